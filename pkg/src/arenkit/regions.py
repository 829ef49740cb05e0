"""Over-approximating the number of affine pieces of the MPC law.

A subset ``alpha`` of constraint rows passes the test when some direction
``v`` makes every selected row of ``G H^{-1}`` strictly negative, implemented
as ``rows_alpha(G H^{-1}) v <= -eps``. The family of passing subsets is closed
under taking subsets, so it is described by its maximal members; these are
enumerated by alternating a max-cardinality Boolean search with LP checks,
learning an irreducible infeasible subset as a clause whenever a candidate
fails. The estimate is the number of distinct subsets of the maximal sets.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .condense import CondensedQp
from .linfeas import IneqSystem, LpStats, check_feasible, extract_iis
from .sat import BoolConstraint, Clause, add_blocking, maximize_true

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-6
IE_THRESHOLD = 20


@dataclass(frozen=True, order=True)
class ActiveSet:
    """Sorted, duplicate-free subset of the 1-based constraint indices ``1..rho``."""

    indices: tuple[int, ...]

    def __init__(self, indices: Iterable[int]):
        idx = tuple(sorted({int(i) for i in indices}))
        if idx and idx[0] < 1:
            raise ValueError("active-set indices are 1-based")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices

    @property
    def zero_based(self) -> list[int]:
        return [i - 1 for i in self.indices]

    def selector(self, rho: int) -> np.ndarray:
        """Rows ``e_j'`` of the ``rho x rho`` identity for ``j`` in the set, in order."""
        if self.indices and self.indices[-1] > rho:
            raise ValueError(f"index {self.indices[-1]} exceeds rho={rho}")
        return np.eye(rho)[self.zero_based]

    def issubset(self, other: "ActiveSet") -> bool:
        return set(self.indices) <= set(other.indices)


@dataclass
class RegionCountReport:
    maximal_sets: list[ActiveSet]
    n_est: int
    two_pow_rho: int
    rho: int
    epsilon: float
    exact_union: bool = True
    complete: bool = True
    partial_bound: int | None = None
    wall_time: float = 0.0
    lp_calls: int = 0
    sat_calls: int = 0
    learned_iis: list[frozenset[int]] = field(default_factory=list, repr=False)

    @property
    def ratio(self) -> float:
        return self.two_pow_rho / self.n_est


def feasibility_matrix(qp: CondensedQp) -> np.ndarray:
    """The ``rho x omega`` matrix ``G H^{-1}`` whose row subsets are tested."""
    return qp.G @ qp.H_inv


def subset_system(V: np.ndarray, alpha: Iterable[int], eps: float) -> IneqSystem:
    """``rows_alpha(V) v <= -eps`` with 1-based labels."""
    alpha = sorted(alpha)
    return IneqSystem(V[[i - 1 for i in alpha]], -eps * np.ones(len(alpha)), tuple(alpha))


def count_unique_subsets(maximal_sets: Sequence[Iterable[int]], rho: int | None = None,
                         threshold: int = IE_THRESHOLD) -> int:
    """Size of the union of the power sets of ``maximal_sets``.

    Exact (inclusion-exclusion over intersections) for at most ``threshold``
    sets; beyond that the sum of the power-set sizes, capped at ``2**rho``.
    An empty family still contains the empty set, so the result is at least 1.
    """
    sets = [frozenset(s) for s in maximal_sets]
    if not sets:
        return 1
    if len(sets) > threshold:
        total = sum(1 << len(s) for s in sets)
        return min(total, 1 << rho) if rho is not None else total
    universe = sorted(set().union(*sets))
    bit = {v: 1 << k for k, v in enumerate(universe)}
    masks = [sum(bit[v] for v in s) for s in sets]

    def terms(start: int, inter: int, sign: int) -> int:
        acc = 0
        for i in range(start, len(masks)):
            x = inter & masks[i]
            acc += sign * (1 << x.bit_count())
            acc += terms(i + 1, x, -sign)
        return acc

    return terms(0, (1 << len(universe)) - 1, 1)


def estimate_region_count(qp: CondensedQp, eps: float = DEFAULT_EPS,
                          budget_seconds: float | None = None,
                          ie_threshold: int = IE_THRESHOLD) -> RegionCountReport:
    """Enumerate maximal passing subsets and bound the number of affine pieces.

    With a ``budget_seconds`` limit the loop may stop early; the report is then
    flagged ``complete=False`` and ``n_est`` falls back to ``2**rho`` (the only
    bound that stays sound), while ``partial_bound`` records the union size of
    the sets found so far.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    t0 = time.perf_counter()
    V = feasibility_matrix(qp)
    rho = qp.rho
    constraints: list[BoolConstraint] = []
    found: list[ActiveSet] = []
    learned: list[frozenset[int]] = []
    stats = LpStats()
    sat_calls = 0
    complete = True

    while True:
        if budget_seconds is not None and time.perf_counter() - t0 > budget_seconds:
            complete = False
            log.warning("region count stopped by the %.1fs budget after %d sets",
                        budget_seconds, len(found))
            break
        sat_calls += 1
        alpha = maximize_true(rho, constraints)
        if alpha is None:
            break
        if not alpha:
            # Only reachable before any set was found: every single row fails.
            found.append(ActiveSet(()))
            break
        sys = subset_system(V, alpha, eps)
        if check_feasible(sys, stats).feasible:
            found.append(ActiveSet(alpha))
            constraints = add_blocking(constraints, alpha)
            log.debug("maximal set %s", sorted(alpha))
        else:
            iis = extract_iis(sys, stats)
            learned.append(iis)
            constraints.append(Clause(-i for i in sorted(iis)))
            log.debug("learned IIS %s", sorted(iis))

    two_pow_rho = 1 << rho
    union = count_unique_subsets([s.indices for s in found], rho, ie_threshold)
    return RegionCountReport(
        maximal_sets=found,
        n_est=union if complete else two_pow_rho,
        two_pow_rho=two_pow_rho,
        rho=rho,
        epsilon=eps,
        exact_union=len(found) <= ie_threshold,
        complete=complete,
        partial_bound=None if complete else union,
        wall_time=time.perf_counter() - t0,
        lp_calls=stats.calls,
        sat_calls=sat_calls,
        learned_iis=learned,
    )
