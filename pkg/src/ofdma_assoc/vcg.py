"""Per-BS VCG taxation and quasilinear user utilities.

Taxes are computed from reported channels only (the information the BS
actually has); realized rates come from the true channels.  The misreport
sampler doubles as the strategy-proofness oracle.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .net_model import InvalidArgumentError, NetworkInstance
from .per_bs_alloc import (CA, CAPA, CA_PF, cell_members, realized_rates,
                           reported_rates, solve_cell)


class PFInfeasibleError(ValueError):
    """A PF cell where some served user ends up with zero rate."""


@dataclass
class ReportProfile:
    """Reported normalized gains for every (user, channel), with a per-user
    truthfulness flag."""

    values: np.ndarray            # (N, K)
    truthful: np.ndarray          # (N,) bool

    @classmethod
    def truthful_for(cls, net: NetworkInstance) -> "ReportProfile":
        return cls(values=net.normalized_gain(),
                   truthful=np.ones(net.num_users, dtype=bool))

    def with_fabrication(self, i: int, row: np.ndarray) -> "ReportProfile":
        vals = self.values.copy()
        vals[i] = row
        flags = self.truthful.copy()
        flags[i] = False
        return ReportProfile(values=vals, truthful=flags)


@dataclass
class UserOutcome:
    rate: float
    tax: float
    utility: float


def _as_values(net: NetworkInstance, reports) -> np.ndarray:
    if reports is None:
        return net.normalized_gain()
    if isinstance(reports, ReportProfile):
        return reports.values
    return np.asarray(reports, dtype=float)


def _reported_cell_sum(net: NetworkInstance, w: int, users: Sequence[int],
                       values: np.ndarray, strategy: str,
                       skip: Optional[int] = None) -> float:
    """Sum of reported rates in cell w, optionally excluding one user's rate
    (but keeping it in the allocation)."""
    if not users:
        return 0.0
    alloc = solve_cell(net, w, users, values, strategy)
    rates = reported_rates(net, alloc, values)
    return sum(r for u, r in rates.items() if u != skip)


def tax(net: NetworkInstance, a: Sequence[int], i: int, reports,
        strategy: str) -> float:
    """Rate improvement the rest of the cell would see if user i departed,
    both terms evaluated from the reported channels."""
    w = a[i]
    values = _as_values(net, reports)
    users = cell_members(a, w)
    others = [u for u in users if u != i]
    without_i = _reported_cell_sum(net, w, others, values, strategy)
    with_i = _reported_cell_sum(net, w, users, values, strategy, skip=i)
    return net.weight[w] * (without_i - with_i)


def utility(net: NetworkInstance, a: Sequence[int], i: int, reports,
            strategy: str) -> UserOutcome:
    """Realized rate (true channels, allocation from reports), reported-side
    tax, and the quasilinear utility alpha*rate - tax."""
    w = a[i]
    values = _as_values(net, reports)
    users = cell_members(a, w)
    alloc = solve_cell(net, w, users, values, strategy)
    rate = realized_rates(net, w, alloc, users).get(i, 0.0)
    t = tax(net, a, i, reports, strategy)
    return UserOutcome(rate=rate, tax=t, utility=net.weight[w] * rate - t)


def _misreport_row(true_row: np.ndarray, net: NetworkInstance, i: int,
                   a: Sequence[int], values: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Sample one fabricated report: log-uniform per-channel scalings,
    within-BS channel permutations, or copying a cell mate's gains."""
    kind = rng.integers(0, 3)
    if kind == 0:
        factors = 10.0 ** rng.uniform(-2.0, 2.0, size=true_row.shape)
        return true_row * factors
    if kind == 1:
        row = true_row.copy()
        for chans in net.channels_of_bs:
            row[chans] = row[rng.permutation(chans)]
        return row
    mates = [u for u in cell_members(a, a[i]) if u != i]
    if not mates:
        return true_row * 10.0 ** rng.uniform(-2.0, 2.0)
    return values[mates[rng.integers(0, len(mates))]].copy()


def misreport_search(net: NetworkInstance, a: Sequence[int], i: int,
                     strategy: str, rng: np.random.Generator,
                     trials: int = 100) -> float:
    """Max utility gain user i can obtain over sampled fabricated reports.

    This is the executable strategy-proofness check: the returned value
    should never exceed numerical noise.
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    base = ReportProfile.truthful_for(net)
    truthful_u = utility(net, a, i, base, strategy).utility
    w = a[i]
    alpha = net.weight[w]
    users = cell_members(a, w)
    others = [u for u in users if u != i]
    # the drop-out term of the tax does not depend on user i's report
    without_i = _reported_cell_sum(net, w, others, base.values, strategy)
    true_row = base.values[i]
    best_gain = -math.inf
    vals = base.values.copy()
    for _ in range(trials):
        vals[i] = _misreport_row(true_row, net, i, a, base.values, rng)
        alloc = solve_cell(net, w, users, vals, strategy)
        rate = realized_rates(net, w, alloc, users).get(i, 0.0)
        rep = reported_rates(net, alloc, vals)
        with_i = sum(r for u, r in rep.items() if u != i)
        t = alpha * (without_i - with_i)
        gain = (alpha * rate - t) - truthful_u
        if gain > best_gain:
            best_gain = gain
    return best_gain


def pf_tax_utility(net: NetworkInstance, a: Sequence[int], i: int,
                   reports=None) -> UserOutcome:
    """Tax and utility in the proportional-fairness game: log rates replace
    rates in both difference terms."""
    w = a[i]
    values = _as_values(net, reports)
    users = cell_members(a, w)
    alpha = net.weight[w]

    def log_rate_sum(members, skip=None):
        if not members:
            return 0.0, {}
        alloc = solve_cell(net, w, members, values, CA_PF)
        rates = realized_rates(net, w, alloc, members)
        total = 0.0
        for u in members:
            if u == skip or u in alloc.pf_excluded:
                continue
            if rates.get(u, 0.0) <= 0.0:
                raise PFInfeasibleError(f"user {u} has zero PF rate in cell {w}")
            total += math.log(rates[u])
        return total, rates

    others = [u for u in users if u != i]
    without_i, _ = log_rate_sum(others)
    with_i, rates = log_rate_sum(users, skip=i)
    if rates.get(i, 0.0) <= 0.0:
        raise PFInfeasibleError(f"user {i} has zero PF rate in cell {w}")
    t = alpha * (without_i - with_i)
    return UserOutcome(rate=rates[i], tax=t,
                       utility=alpha * math.log(rates[i]) - t)
