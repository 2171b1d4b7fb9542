import dataclasses
import json
import math

import numpy as np
import pytest

from conftest import random_network
from ofdma_assoc.net_model import (InvalidArgumentError, NetworkInstance,
                                   SatInstance, ScenarioConfig, capacity_gap,
                                   dbm_to_watts, generate,
                                   inject_estimation_error, reduce_3sat)


class TestCapacityGap:
    def test_closed_form(self):
        assert capacity_gap(1.0 / (5.0 * math.e)) == pytest.approx(2.0 / 3.0)
        assert capacity_gap(1e-6) == pytest.approx(-math.log(5e-6) / 1.5)
        assert capacity_gap(1e-6) == pytest.approx(8.1374, abs=1e-3)

    def test_monotone_in_ber(self):
        bers = np.logspace(-9, -2, 30)
        gaps = [capacity_gap(b) for b in bers]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))

    @pytest.mark.parametrize("ber", [0.0, -1e-3, 0.2, 0.5, 1.0])
    def test_out_of_domain(self, ber):
        with pytest.raises(InvalidArgumentError):
            capacity_gap(ber)


def test_dbm_to_watts():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert dbm_to_watts(23.0) == pytest.approx(0.19953, abs=1e-4)


class TestNetworkInstance:
    def test_valid_instance(self, rng):
        net = random_network(rng)
        assert net.num_users >= 1
        owner = net.bs_of_channel()
        for w, chans in enumerate(net.channels_of_bs):
            assert (owner[chans] == w).all()

    def test_overlapping_channels_rejected(self):
        with pytest.raises(InvalidArgumentError):
            NetworkInstance(gain=np.ones((1, 2)), noise=np.ones((1, 2)),
                            channels_of_bs=[np.array([0, 1]), np.array([1])],
                            budget=np.ones(2), weight=np.ones(2),
                            bandwidth=np.ones(2), tau=1.0)

    def test_partition_must_cover(self):
        with pytest.raises(InvalidArgumentError):
            NetworkInstance(gain=np.ones((1, 3)), noise=np.ones((1, 3)),
                            channels_of_bs=[np.array([0, 1])],
                            budget=np.ones(1), weight=np.ones(1),
                            bandwidth=np.ones(1), tau=1.0)

    @pytest.mark.parametrize("field,value", [
        ("gain", -1.0), ("noise", 0.0), ("budget", 0.0), ("tau", 0.5),
    ])
    def test_invalid_numbers_rejected(self, rng, field, value):
        net = random_network(rng)
        kwargs = dict(gain=net.gain, noise=net.noise,
                      channels_of_bs=net.channels_of_bs, budget=net.budget,
                      weight=net.weight, bandwidth=net.bandwidth, tau=net.tau)
        if field == "tau":
            kwargs["tau"] = value
        else:
            arr = kwargs[field].copy()
            arr.flat[0] = value
            kwargs[field] = arr
        with pytest.raises(InvalidArgumentError):
            NetworkInstance(**kwargs)

    def test_json_round_trip(self, rng):
        net = random_network(rng)
        back = NetworkInstance.from_json(net.to_json())
        assert np.array_equal(back.gain, net.gain)
        assert np.array_equal(back.noise, net.noise)
        assert back.tau == net.tau
        assert len(back.channels_of_bs) == len(net.channels_of_bs)

    def test_normalized_gain(self, rng):
        net = random_network(rng)
        net.noise = np.full_like(net.noise, 2.0)
        assert np.allclose(net.normalized_gain(), net.gain / 2.0)


class TestScenarioConfig:
    def test_json_round_trip(self):
        cfg = ScenarioConfig(mode="outdoor", num_users=7, seed=3,
                             distribution_factor=0.2)
        assert ScenarioConfig.from_json(cfg.to_json()) == cfg

    @pytest.mark.parametrize("d", [-0.1, 1.5])
    def test_bad_distribution_factor(self, d):
        with pytest.raises(InvalidArgumentError):
            ScenarioConfig(distribution_factor=d)


class TestIndoorScenario:
    def test_determinism(self):
        cfg = ScenarioConfig(num_users=12, num_bss=4, num_channels=16, seed=9)
        a, b = generate(cfg), generate(cfg)
        assert np.array_equal(a.gain, b.gain)
        assert np.array_equal(a.user_pos, b.user_pos)

    def test_hotspot_placement_d0(self):
        """D=0: every user in the central quarter, every BS on the border."""
        cfg = ScenarioConfig(num_users=40, num_bss=8, num_channels=16,
                             distribution_factor=0.0, seed=5)
        net = generate(cfg)
        a = cfg.area_m
        assert (net.user_pos >= a / 4).all() and (net.user_pos <= 3 * a / 4).all()
        on_border = np.isclose(net.bs_pos, 0.0) | np.isclose(net.bs_pos, a)
        assert on_border.any(axis=1).all()

    def test_uniform_placement_d1(self):
        cfg = ScenarioConfig(num_users=200, num_bss=4, num_channels=16,
                             distribution_factor=1.0, seed=5)
        net = generate(cfg)
        # uniform draws should land outside the central quarter often
        outside = ((net.user_pos < cfg.area_m / 4) |
                   (net.user_pos > 3 * cfg.area_m / 4)).any(axis=1)
        assert outside.mean() > 0.5

    def test_channel_gains_exponential(self):
        """KS test of per-channel gains (scaled by their link mean) against
        Exp(1), 1% level over 10^4 samples."""
        cfg = ScenarioConfig(num_users=100, num_bss=1, num_channels=128,
                             seed=11)
        net = generate(cfg)
        samples = (net.gain / net.gain_mean[:, [0]]).ravel()
        n = samples.size
        assert n >= 10 ** 4
        xs = np.sort(samples)
        cdf = 1.0 - np.exp(-xs)
        d_plus = (np.arange(1, n + 1) / n - cdf).max()
        d_minus = (cdf - np.arange(0, n) / n).max()
        ks = max(d_plus, d_minus)
        assert ks < 1.63 / math.sqrt(n)   # 1% critical value

    def test_physical_parameters(self):
        cfg = ScenarioConfig(num_users=5, num_bss=2, num_channels=8, seed=1)
        net = generate(cfg)
        df = cfg.total_bandwidth_hz / cfg.num_channels
        assert np.allclose(net.bandwidth, df)
        assert np.allclose(net.budget, dbm_to_watts(23.0))
        assert np.allclose(net.noise, dbm_to_watts(-100.0) * df)
        assert net.tau == pytest.approx(capacity_gap(1e-6))


class TestOutdoorScenario:
    def test_layout_and_blocks(self):
        cfg = ScenarioConfig(mode="outdoor", num_users=6, num_bss=7,
                             num_channels=64, seed=2,
                             total_bandwidth_hz=10e6, power_dbm=49.0,
                             noise_psd_dbm_hz=-169.0)
        net = generate(cfg)
        assert net.num_bss == 7
        assert net.num_channels == 7 * 64
        d = np.linalg.norm(net.bs_pos[1:] - net.bs_pos[0], axis=1)
        assert np.allclose(d, cfg.bs_distance_km)
        assert all(len(c) == 64 for c in net.channels_of_bs)

    def test_determinism(self):
        cfg = ScenarioConfig(mode="outdoor", num_users=4, num_bss=7,
                             num_channels=16, seed=8)
        assert np.array_equal(generate(cfg).gain, generate(cfg).gain)


class TestEstimationError:
    def test_infinite_cer_is_exact(self, rng):
        net = random_network(rng)
        rep = inject_estimation_error(net, math.inf, rng)
        assert np.array_equal(rep, net.normalized_gain())

    def test_error_variance_matches_cer(self):
        rng = np.random.default_rng(0)
        n, k, cer = 200, 50, 20.0
        gain = np.full((n, k), 4.0)
        net = NetworkInstance(gain=gain, noise=np.ones((n, k)),
                              channels_of_bs=[np.arange(k)],
                              budget=np.ones(1), weight=np.ones(1),
                              bandwidth=np.ones(1), tau=1.0)
        rep = inject_estimation_error(net, cer, rng)
        err = rep - net.normalized_gain()
        target_var = 4.0 / 10.0 ** (cer / 10.0)
        assert err.mean() == pytest.approx(0.0, abs=3 * math.sqrt(target_var / (n * k)))
        assert err.var() == pytest.approx(target_var, rel=0.05)

    def test_clamped_nonnegative(self, rng):
        net = random_network(rng, n_users=5)
        rep = inject_estimation_error(net, -10.0, rng)   # huge error
        assert (rep >= 0.0).all()


DIMACS = """c tiny formula
p cnf 2 2
1 -2 2 0
-1 2 2 0
"""


class TestSat:
    def test_from_dimacs(self):
        sat = SatInstance.from_dimacs(DIMACS)
        assert sat.num_vars == 2
        assert sat.clauses == [[(0, True), (1, False), (1, True)],
                               [(0, False), (1, True), (1, True)]]

    def test_satisfied_by(self):
        sat = SatInstance.from_dimacs(DIMACS)
        assert sat.is_satisfied_by([True, True])
        assert sat.is_satisfied_by([False, False])
        assert sat.satisfiable()

    def test_unsat_detection(self):
        clauses = [[(0, True)] * 3, [(0, False)] * 3]
        sat = SatInstance(num_vars=1, clauses=clauses)
        assert not sat.satisfiable()

    def test_clause_arity_enforced(self):
        with pytest.raises(InvalidArgumentError):
            SatInstance(num_vars=1, clauses=[[(0, True)]])


class TestReduction:
    def _gadget(self):
        sat = SatInstance(num_vars=2, clauses=[
            [(0, True), (1, True), (1, False)],
            [(0, False), (1, True), (0, True)],
        ])
        return sat, reduce_3sat(sat)

    def test_sizes(self):
        sat, (net, _) = self._gadget()
        m, q = sat.num_vars, len(sat.clauses)
        assert net.num_users == (2 * q + 1) * m
        assert net.num_bss == 2 * m + q
        assert net.num_channels == 2 * m * q + q
        assert np.array_equal(net.budget,
                              np.r_[np.full(2 * m, float(q)), np.ones(q)])

    def test_gain_alphabet(self):
        _, (net, _) = self._gadget()
        assert set(np.unique(net.gain)) <= {0.0, 1.0, 2.0, 3.0}

    def test_threshold_formula(self):
        sat, (_, thr) = self._gadget()
        m, q = sat.num_vars, len(sat.clauses)
        assert thr == pytest.approx(2 * m * q + m * q * math.log2(3) + q)

    def test_variable_gadget_cell_values(self):
        """Oracle for the gadget arithmetic: a variable BS is worth 2Q with
        its y-user alone and Q*log2(3) with its Q literal users; a clause BS
        serving one literal user is worth exactly 1."""
        from ofdma_assoc.assoc_game import Evaluator, GameMode
        sat, (net, _) = self._gadget()
        q = len(sat.clauses)
        ev = Evaluator(net, GameMode(strategy="CAPA"))
        y0 = 2 * q          # user index of y for variable 0
        xs = frozenset(range(q))           # x-users of variable 0
        assert ev.cell(0, frozenset([y0])).value == pytest.approx(2 * q)
        assert ev.cell(0, xs).value == pytest.approx(q * math.log2(3))
        # clause BS 0 with any of its gain-1 users
        clause_bs = 2 * sat.num_vars
        lit_user = next(i for i in range(net.num_users)
                        if net.gain[i, net.channels_of_bs[clause_bs][0]] == 1.0)
        assert ev.cell(clause_bs, frozenset([lit_user])).value == pytest.approx(1.0)
