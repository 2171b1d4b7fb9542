import numpy as np
import pytest

from ofdma_assoc.net_model import NetworkInstance

# one line per acceptance criterion, printed after the run so the verdicts
# stay visible in captured-output mode
ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)


def random_network(rng, n_users=None, n_bss=None, chans_per_bs=None,
                   zero_frac=0.0):
    """Small random instance with unit noise, unit weights, tau=1 and
    exponential gains; the workhorse of the property tests."""
    if n_users is None:
        n_users = int(rng.integers(1, 6))
    if n_bss is None:
        n_bss = int(rng.integers(1, 4))
    if chans_per_bs is None:
        chans_per_bs = [int(rng.integers(1, 5)) for _ in range(n_bss)]
    k = sum(chans_per_bs)
    gain = rng.exponential(scale=1.0, size=(n_users, k))
    if zero_frac > 0:
        gain[rng.uniform(size=gain.shape) < zero_frac] = 0.0
    chans, start = [], 0
    for c in chans_per_bs:
        chans.append(np.arange(start, start + c))
        start += c
    return NetworkInstance(
        gain=gain,
        noise=np.ones((n_users, k)),
        channels_of_bs=chans,
        budget=rng.uniform(0.5, 5.0, size=n_bss),
        weight=np.ones(n_bss),
        bandwidth=np.ones(n_bss),
        tau=1.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
