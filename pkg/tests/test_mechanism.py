import math

import numpy as np
import pytest

from conftest import random_network
from ofdma_assoc import fixtures, mechanism
from ofdma_assoc.assoc_game import Evaluator, GameMode, is_ne
from ofdma_assoc.mechanism import (AddUsers, RegenerateChannels, RemoveUsers,
                                   apply_event, init_state, nearest_bs_profile,
                                   run, step, update_interference_noise)
from ofdma_assoc.net_model import InvalidArgumentError, NetworkInstance
from ofdma_assoc.per_bs_alloc import CA, CAPA, solve_capa


def positioned_network():
    """2 BSs at x=0 and x=10, three users along the segment."""
    gain = np.array([[1.0, 1.0, 0.2, 0.2],
                     [0.3, 0.3, 0.9, 0.9],
                     [0.5, 0.5, 0.6, 0.6]])
    return NetworkInstance(
        gain=gain, noise=np.ones((3, 4)),
        channels_of_bs=[np.arange(2), np.arange(2, 4)],
        budget=np.array([2.0, 2.0]), weight=np.ones(2),
        bandwidth=np.ones(2), tau=1.0,
        user_pos=np.array([[1.0, 0.0], [9.0, 0.0], [6.0, 0.0]]),
        bs_pos=np.array([[0.0, 0.0], [10.0, 0.0]]))


class TestInit:
    def test_nearest_by_distance(self):
        net = positioned_network()
        assert nearest_bs_profile(net).tolist() == [0, 1, 1]

    def test_gain_fallback(self, rng):
        net = random_network(rng, n_users=4, n_bss=2, chans_per_bs=[2, 2])
        g = net.normalized_gain()
        expect = [int(np.argmax([g[i, :2].mean(), g[i, 2:].mean()]))
                  for i in range(4)]
        assert nearest_bs_profile(net).tolist() == expect

    def test_memory_length_validated(self, rng):
        net = random_network(rng)
        with pytest.raises(InvalidArgumentError):
            init_state(net, 0, 0.0, seed=1)

    def test_same_seed_same_state(self):
        net = positioned_network()
        s1 = init_state(net, 3, 0.0, seed=4)
        s2 = init_state(net, 3, 0.0, seed=4)
        assert np.array_equal(s1.profile, s2.profile)
        assert s1.rng.integers(0, 100) == s2.rng.integers(0, 100)


class TestStep:
    def test_absorbing_state(self):
        """BR sets empty and memories saturated with the current profile:
        the profile can never change again."""
        net = positioned_network()
        mode = GameMode(strategy=CAPA, taxed=True)
        res = run(net, 3, 0.0, 100, seed=0, mode=mode)
        assert res.converged
        state = init_state(net, 3, 0.0, seed=1)
        state.profile = np.array(res.profile)
        for i in range(net.num_users):
            state.memories[i].extend([res.profile[i]] * 3)
        for _ in range(10):
            step(net, state, mode)
            assert tuple(state.profile) == res.profile

    def test_single_user_locks_onto_better_bs(self):
        gain = np.array([[0.1, 0.1, 5.0, 5.0]])
        net = NetworkInstance(gain=gain, noise=np.ones((1, 4)),
                              channels_of_bs=[np.arange(2), np.arange(2, 4)],
                              budget=np.ones(2), weight=np.ones(2),
                              bandwidth=np.ones(2), tau=1.0,
                              user_pos=np.array([[0.0, 0.0]]),
                              bs_pos=np.array([[0.1, 0.0], [5.0, 0.0]]))
        m = 4
        state = init_state(net, m, 0.0, seed=2)
        assert state.profile[0] == 0          # starts at the nearest BS
        mode = GameMode()
        for _ in range(m + 5):
            step(net, state, mode)
        assert state.profile[0] == 1
        assert all(w == 1 for w in state.memories[0])

    def test_infinite_cost_freezes_profile(self):
        net = positioned_network()
        state = init_state(net, 3, math.inf, seed=3)
        start = state.profile.copy()
        mode = GameMode()
        for _ in range(10):
            step(net, state, mode)
            assert np.array_equal(state.profile, start)

    def test_memory_never_exceeds_bound(self):
        net = positioned_network()
        m = 2
        state = init_state(net, m, 0.0, seed=5)
        mode = GameMode()
        for _ in range(20):
            step(net, state, mode)
            assert all(len(mem) <= m for mem in state.memories)


class TestRun:
    def test_single_bs_converges_at_m(self, rng):
        net = random_network(rng, n_bss=1)
        m = 4
        res = run(net, m, 0.0, 50, seed=1)
        assert res.converged and res.iterations == m

    def test_max_iter_validated(self, rng):
        net = random_network(rng)
        with pytest.raises(InvalidArgumentError):
            run(net, 5, 0.0, 5, seed=1)

    def test_example2_ca_taxed_reaches_ne(self):
        net = fixtures.example2_ca_network()
        mode = GameMode(strategy=CA, taxed=True)
        res = run(net, 3, 0.0, 200, seed=11, mode=mode)
        assert res.converged and res.is_ne

    def test_deterministic_replay(self):
        net = positioned_network()
        r1 = run(net, 3, 0.0, 100, seed=21)
        r2 = run(net, 3, 0.0, 100, seed=21)
        assert r1.profile == r2.profile
        assert [t.profile for t in r1.trace] == [t.profile for t in r2.trace]
        assert [t.throughput for t in r1.trace] == [t.throughput for t in r2.trace]

    def test_trace_bookkeeping(self):
        net = positioned_network()
        res = run(net, 3, 0.0, 100, seed=2)
        assert res.trace[0].iteration == 0
        iters = [t.iteration for t in res.trace]
        assert iters == list(range(len(res.trace)))
        for rec in res.trace:
            assert rec.throughput == pytest.approx(sum(rec.bs_throughput), abs=1e-9)

    def test_random_instances_converge_to_ne(self, rng):
        for _ in range(25):
            net = random_network(rng, n_users=int(rng.integers(2, 6)),
                                 n_bss=int(rng.integers(2, 4)))
            res = run(net, net.num_users, 0.0, 500, seed=int(rng.integers(10 ** 6)))
            assert res.converged
            assert res.is_ne


class TestEvents:
    def test_remove_unknown_user(self):
        net = positioned_network()
        state = init_state(net, 3, 0.0, seed=1)
        with pytest.raises(InvalidArgumentError):
            apply_event(net, state, RemoveUsers([7]))

    def test_remove_then_add_round_trip(self):
        net = positioned_network()
        state = init_state(net, 3, 0.0, seed=1)
        gone_gain = net.gain[2].copy()
        gone_noise = net.noise[2].copy()
        gone_pos = net.user_pos[2].copy()
        net2 = apply_event(net, state, RemoveUsers([2]))
        assert net2.num_users == 2
        assert len(state.memories) == 2 and len(state.profile) == 2
        net3 = apply_event(net2, state, AddUsers(gain=gone_gain[None, :],
                                                 noise=gone_noise[None, :],
                                                 positions=gone_pos[None, :]))
        assert net3.num_users == 3
        assert np.array_equal(net3.gain[2], gone_gain)
        assert state.profile[2] == 1          # re-enters at its nearest BS
        assert len(state.memories[2]) == 0

    def test_event_annotates_trace_and_resets_history(self):
        net = positioned_network()
        mode = GameMode()
        state = init_state(net, 2, 0.0, seed=3)
        ev = Evaluator(net, mode)
        mechanism._record(net, state, ev)
        for _ in range(5):
            step(net, state, mode, ev)
        net = apply_event(net, state, RemoveUsers([0]))
        assert state.trace[-1].event.startswith("remove_users")
        assert state.history == []

    def test_regenerate_channels_deterministic(self):
        cfg_net = positioned_network()
        cfg_net.gain_mean = np.full((3, 2), 0.5)
        state = init_state(cfg_net, 2, 0.0, seed=1)
        n1 = apply_event(cfg_net, state, RegenerateChannels(seed=42))
        n2 = apply_event(cfg_net, state, RegenerateChannels(seed=42))
        assert np.array_equal(n1.gain, n2.gain)
        assert not np.array_equal(n1.gain, cfg_net.gain)

    def test_reconvergence_after_arrivals(self):
        """Arrivals mid-run: the mechanism keeps tracking and converges again."""
        net = positioned_network()
        mode = GameMode()
        m = 3
        state = init_state(net, m, 0.0, seed=9)
        ev = Evaluator(net, mode)
        for _ in range(30):
            step(net, state, mode, ev)
        rng = np.random.default_rng(17)
        new_gain = rng.exponential(scale=0.5, size=(2, 4))
        net = apply_event(net, state, AddUsers(
            gain=new_gain, noise=np.ones((2, 4)),
            positions=np.array([[2.0, 0.0], [8.0, 0.0]])))
        ev = Evaluator(net, mode)
        for _ in range(200):
            step(net, state, mode, ev)
        assert is_ne(net, state.profile, mode, ev)


class TestInterference:
    def test_single_bs_noise_unchanged(self, rng):
        net = random_network(rng, n_bss=1)
        alloc = solve_capa(net, 0, range(net.num_users), net.normalized_gain())
        before = net.noise.copy()
        update_interference_noise(net, [0] * net.num_users, {0: alloc})
        assert np.allclose(net.noise, before)

    def test_zero_cross_gain_unchanged(self):
        gain = np.array([[1.0, 1.0, 0.0, 0.0],
                         [0.0, 0.0, 1.0, 1.0]])
        net = NetworkInstance(gain=gain, noise=np.ones((2, 4)),
                              channels_of_bs=[np.arange(2), np.arange(2, 4)],
                              budget=np.ones(2), weight=np.ones(2),
                              bandwidth=np.ones(2), tau=1.0)
        g = net.normalized_gain()
        allocs = {0: solve_capa(net, 0, [0], g), 1: solve_capa(net, 1, [1], g)}
        before = net.noise.copy()
        update_interference_noise(net, [0, 1], allocs)
        assert np.allclose(net.noise, before)

    def test_two_bs_hand_check(self):
        """Cross-BS power x gain lands on the position-aligned channel."""
        gain = np.array([[1.0, 2.0, 0.5, 0.25],
                         [0.3, 0.4, 2.0, 2.0]])
        net = NetworkInstance(gain=gain, noise=np.ones((2, 4)),
                              channels_of_bs=[np.arange(2), np.arange(2, 4)],
                              budget=np.array([2.0, 3.0]), weight=np.ones(2),
                              bandwidth=np.ones(2), tau=1.0)
        g = net.normalized_gain()
        allocs = {0: solve_capa(net, 0, [0], g), 1: solve_capa(net, 1, [1], g)}
        p0 = allocs[0].power
        p1 = allocs[1].power
        update_interference_noise(net, [0, 1], allocs)
        # user 0 served by BS 0: noise on its channels gains BS 1's powers
        assert net.noise[0, 0] == pytest.approx(1.0 + 0.5 * p1[0])
        assert net.noise[0, 1] == pytest.approx(1.0 + 0.25 * p1[1])
        # user 1 served by BS 1: noise on channels 2,3 gains BS 0's powers
        assert net.noise[1, 2] == pytest.approx(1.0 + 0.3 * p0[0])
        assert net.noise[1, 3] == pytest.approx(1.0 + 0.4 * p0[1])

    def test_interference_run_caps_honestly(self):
        net = positioned_network()
        net.gain_mean = np.full((3, 2), 0.5)
        res = run(net, 2, 0.0, 30, seed=5, interference=True)
        assert res.is_ne is None
        assert res.iterations <= 30
