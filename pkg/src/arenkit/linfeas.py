"""Dense linear feasibility: phase-1 simplex, Farkas certificates, IIS, Chebyshev centers.

All systems have the form ``M v <= rhs`` with ``v`` free. Rows are rescaled to
unit norm before pivoting; witnesses and certificates are reported for the
original, unscaled rows.

The only numeric contract is :data:`FEAS_TOL`: a witness satisfies every row
of the original system to within this absolute residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import NotInfeasible, NumericalBreakdown

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-12
_RC_TOL = 1e-11
_CERT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class IneqSystem:
    """Rows ``M[i] @ v <= rhs[i]``, each tagged with a unique integer label."""

    M: np.ndarray
    rhs: np.ndarray
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float)).ravel()
        if M.shape[0] != rhs.shape[0]:
            raise ValueError(f"M has {M.shape[0]} rows but rhs has {rhs.shape[0]} entries")
        if M.shape[0] < 1 or M.shape[1] < 1:
            raise ValueError("an inequality system needs at least one row and one column")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(rhs))):
            raise ValueError("inequality system has non-finite entries")
        labels = tuple(int(i) for i in self.labels) if len(self.labels) else tuple(range(M.shape[0]))
        if len(labels) != M.shape[0] or len(set(labels)) != len(labels):
            raise ValueError("labels must be unique, one per row")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.M.shape[0]

    @property
    def dim(self) -> int:
        return self.M.shape[1]

    def subsystem(self, labels: Iterable[int]) -> "IneqSystem":
        """Rows whose labels are in ``labels``, kept in their original order."""
        wanted = set(labels)
        idx = [i for i, lab in enumerate(self.labels) if lab in wanted]
        return IneqSystem(self.M[idx], self.rhs[idx], tuple(self.labels[i] for i in idx))

    def residual(self, v: np.ndarray) -> np.ndarray:
        return self.M @ v - self.rhs


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    witness: np.ndarray | None = None
    certificate: np.ndarray | None = None

    @property
    def feasible(self) -> bool:
        return self.witness is not None


@dataclass
class LpStats:
    calls: int = 0
    pivots: int = 0


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _simplex(T: np.ndarray, basis: list[int], ncols: int, max_pivots: int) -> tuple[str, int]:
    """Minimize over the tableau ``T`` (last row = reduced costs) with Bland's rule.

    Only the first ``ncols`` columns may enter the basis.
    """
    rhs = T.shape[1] - 1
    for it in range(max_pivots):
        enter = np.flatnonzero(T[-1, :ncols] < -_RC_TOL)
        if enter.size == 0:
            return "optimal", it
        c = int(enter[0])
        col = T[:-1, c]
        pos = np.flatnonzero(col > _PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", it
        ratios = T[pos, rhs] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, c)
        basis[r] = c
    raise NumericalBreakdown(f"simplex exceeded {max_pivots} pivots")


def _scale_rows(M: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    norms = np.linalg.norm(M, axis=1)
    d = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return M * d[:, None], rhs * d, d


class _PhaseOne:
    """Phase-1 tableau for ``A y + s = b`` (y free split in two, s >= 0)."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        r, c = A.shape
        self.r, self.c = r, c
        self.sigma = np.where(b < 0, -1.0, 1.0)
        self.art_rows = np.flatnonzero(self.sigma < 0)
        k = self.art_rows.size
        nvars = 2 * c + r + k
        T = np.zeros((r + 1, nvars + 1))
        T[:r, :c] = A * self.sigma[:, None]
        T[:r, c:2 * c] = -T[:r, :c]
        T[:r, 2 * c:2 * c + r] = np.diag(self.sigma)
        for j, i in enumerate(self.art_rows):
            T[i, 2 * c + r + j] = 1.0
        T[:r, -1] = b * self.sigma
        self.n_struct = 2 * c + r
        self.cost = np.zeros(nvars)
        self.cost[self.n_struct:] = 1.0
        self.basis = [2 * c + i for i in range(r)]
        self.init_basis = list(self.basis)
        for j, i in enumerate(self.art_rows):
            self.basis[i] = 2 * c + r + j
            self.init_basis[i] = 2 * c + r + j
        T[-1, :nvars] = self.cost - T[self.art_rows, :nvars].sum(axis=0)
        T[-1, -1] = -T[self.art_rows, -1].sum()
        self.T = T
        self.max_pivots = 50 * (r + nvars) + 1000

    def run(self) -> tuple[float, int]:
        _, pivots = _simplex(self.T, self.basis, self.T.shape[1] - 1, self.max_pivots)
        return -self.T[-1, -1], pivots

    def primal(self) -> np.ndarray:
        y = np.zeros(self.T.shape[1] - 1)
        for i, j in enumerate(self.basis):
            y[j] = self.T[i, -1]
        return y[:self.c] - y[self.c:2 * self.c]

    def farkas(self) -> np.ndarray:
        """Non-negative row multipliers proving infeasibility of the scaled system."""
        rc = self.T[-1, :-1]
        j = np.asarray(self.init_basis)
        y = self.cost[j] - rc[j]
        return -self.sigma * y

    def drop_artificials(self) -> None:
        """Pivot artificial variables out of the basis (or delete redundant rows)."""
        keep_rows = list(range(self.r))
        for i in range(self.r):
            if self.basis[i] < self.n_struct:
                continue
            row = self.T[i, :self.n_struct]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                _pivot(self.T, i, int(cand[0]))
                self.basis[i] = int(cand[0])
            else:
                keep_rows.remove(i)
        cols = list(range(self.n_struct)) + [self.T.shape[1] - 1]
        self.T = self.T[np.ix_(keep_rows + [self.r], cols)]
        self.basis = [self.basis[i] for i in keep_rows]
        self.r = len(keep_rows)


def check_feasible(sys: IneqSystem, stats: LpStats | None = None) -> FeasibilityResult:
    """Decide whether ``M v <= rhs`` has a solution.

    Returns a witness ``v`` when feasible, otherwise non-negative Farkas
    multipliers ``y`` with ``y @ M == 0`` and ``y @ rhs < 0`` (scaled so that
    ``max(y) == 1``). The pivot rule is deterministic.
    """
    Ms, bs, d = _scale_rows(sys.M, sys.rhs)
    lp = _PhaseOne(Ms, bs)
    infeas, pivots = lp.run()
    if stats is not None:
        stats.calls += 1
        stats.pivots += pivots

    if infeas <= FEAS_TOL:
        v = lp.primal()
        if np.all(sys.residual(v) <= FEAS_TOL):
            return FeasibilityResult(witness=v)
    cert = lp.farkas() * d
    if cert.max() <= 0 or cert.min() < -_CERT_TOL * cert.max():
        raise NumericalBreakdown("phase-1 simplex returned an invalid Farkas certificate")
    cert = np.clip(cert, 0.0, None)
    cert = cert / cert.max()
    cert[cert < 1e-12] = 0.0
    scale = max(1.0, float(np.abs(sys.M).max()))
    if np.max(np.abs(cert @ sys.M)) > _CERT_TOL * scale * len(sys) or cert @ sys.rhs >= 0:
        raise NumericalBreakdown("Farkas certificate failed verification")
    return FeasibilityResult(certificate=cert)


def extract_iis(sys: IneqSystem, stats: LpStats | None = None) -> frozenset[int]:
    """Irreducible infeasible subset of ``sys`` (as row labels) by deletion filtering.

    Rows outside the support of the Farkas certificate are discarded first;
    the remaining rows are then dropped one at a time (in label order) whenever
    the rest stays infeasible.

    Raises:
        NotInfeasible: if ``sys`` is feasible.
    """
    res = check_feasible(sys, stats)
    if res.feasible:
        raise NotInfeasible("system is feasible; no IIS exists")
    keep = [lab for lab, y in zip(sys.labels, res.certificate) if y > 0]
    if check_feasible(sys.subsystem(keep), stats).feasible:
        keep = list(sys.labels)
    for lab in sorted(keep):
        trial = [k for k in keep if k != lab]
        if trial and not check_feasible(sys.subsystem(trial), stats).feasible:
            keep = trial
    return frozenset(keep)


def chebyshev_center(sys: IneqSystem) -> tuple[np.ndarray | None, float]:
    """Center and radius of the largest ball inside ``{v : M v <= rhs}``.

    The radius is negative when the polyhedron is empty (the LP keeps the
    radius free) and ``inf`` when balls of any size fit. A zero row with a
    negative right-hand side yields ``(None, -inf)``.
    """
    norms = np.linalg.norm(sys.M, axis=1)
    zero = norms == 0
    if np.any(sys.rhs[zero] < 0):
        return None, -np.inf
    M, rhs, norms = sys.M[~zero], sys.rhs[~zero], norms[~zero]
    c = sys.dim
    if M.shape[0] == 0:
        return np.zeros(c), np.inf
    # Unknowns (v, t); rows scaled to unit norm: M_i v / |M_i| + t <= rhs_i / |M_i|.
    A = np.hstack([M / norms[:, None], np.ones((M.shape[0], 1))])
    b = rhs / norms
    lp = _PhaseOne(A, b)
    infeas, _ = lp.run()
    if infeas > FEAS_TOL:
        raise NumericalBreakdown("Chebyshev LP with a free radius must be feasible")
    lp.drop_artificials()
    T = lp.T
    nvars = T.shape[1] - 1
    cost = np.zeros(nvars)
    cost[c] = -1.0          # maximize t = t+ - t-
    cost[2 * c + 1] = 1.0
    T[-1, :] = 0.0
    T[-1, :nvars] = cost
    for i, j in enumerate(lp.basis):
        T[-1] -= cost[j] * T[i]
    status, _ = _simplex(T, lp.basis, nvars, lp.max_pivots)
    y = np.zeros(nvars)
    for i, j in enumerate(lp.basis):
        y[j] = T[i, -1]
    center = y[:c + 1] - y[c + 1:2 * (c + 1)]
    if status == "unbounded":
        return center[:c], np.inf
    return center[:c], float(center[c])
