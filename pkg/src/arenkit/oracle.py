"""Brute-force explicit MPC for small problems, used as ground truth.

For every active set ``a`` whose reduced KKT matrix ``G_a H^{-1} G_a'`` is
invertible, the multipliers and the optimizer are affine in ``x``::

    lambda_a(x) = -(G_a H^{-1} G_a')^{-1} (W_a + S_a x),   z(x) = -H^{-1} G_a' lambda_a(x)

and the set of states where this is optimal is the polyhedron
``{lambda_a(x) >= 0, G z(x) <= W + S x}``. Pieces with an interior inside the
domain box make up a :class:`PwaFunction`.

Also here: a pointwise QP solver (dual coordinate ascent plus an active-set
polish) that never looks at the enumerated pieces, and extraction of a
max-min (lattice) description from the pieces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .condense import CondensedQp
from .errors import CoverageGap, NoConvergence, QPInfeasible, TooManyConstraints
from .lattice import CpwlDescription
from .linfeas import IneqSystem, chebyshev_center, check_feasible
from .regions import ActiveSet

log = logging.getLogger(__name__)

ORACLE_RHO_LIMIT = 16
RADIUS_TOL = 1e-7
LAW_TOL = 1e-8
TIE_TOL = 1e-9
CONTAIN_TOL = 1e-9
BOX_CAP = 100.0


@dataclass(frozen=True, eq=False)
class CriticalRegion:
    """Affine control law ``u = control_gain @ x + control_offset`` valid on ``region``.

    Region rows are normalized to unit length.
    """

    active_set: ActiveSet
    control_gain: np.ndarray
    control_offset: np.ndarray
    region: IneqSystem
    full_dim: bool = True
    center: np.ndarray | None = None
    radius: float = float("nan")

    def contains(self, X: np.ndarray, tol: float = CONTAIN_TOL) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all(X @ self.region.M.T <= self.region.rhs + tol, axis=1)

    def control(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.control_gain.T + self.control_offset


@dataclass(frozen=True, eq=False)
class PwaFunction:
    """Piecewise-affine map given by critical regions over ``domain_box`` (``(n, 2)`` bounds).

    ``qp`` is kept when the pieces come from an MPC problem; it lets callers
    tell infeasible states apart from coverage holes.
    """

    pieces: tuple[CriticalRegion, ...]
    domain_box: np.ndarray
    qp: CondensedQp | None = None

    @property
    def n_state(self) -> int:
        return self.domain_box.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.pieces[0].control_gain.shape[0] if self.pieces else 0

    def locate(self, X: np.ndarray, tol: float = CONTAIN_TOL) -> np.ndarray:
        """Index of the first piece containing each row of ``X``, or -1."""
        X = np.atleast_2d(X)
        out = np.full(X.shape[0], -1)
        for k, piece in enumerate(self.pieces):
            todo = out < 0
            if not todo.any():
                break
            hit = piece.contains(X[todo], tol)
            out[np.flatnonzero(todo)[hit]] = k
        return out

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """Control at each row of ``X``; NaN where no piece applies."""
        X = np.atleast_2d(X)
        idx = self.locate(X)
        out = np.full((X.shape[0], self.n_outputs), np.nan)
        for k in np.unique(idx[idx >= 0]):
            sel = idx == k
            out[sel] = self.pieces[k].control(X[sel])
        return out


def _box_rows(box: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = box.shape[0]
    return np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([box[:, 1], -box[:, 0]])


def _region_system(M: np.ndarray, rhs: np.ndarray) -> IneqSystem | None:
    """Normalize rows, drop trivial ones; ``None`` if some trivial row is violated."""
    norms = np.linalg.norm(M, axis=1)
    tiny = norms < 1e-10
    if np.any(rhs[tiny] < -1e-9):
        return None
    M, rhs, norms = M[~tiny], rhs[~tiny], norms[~tiny]
    return IneqSystem(M / norms[:, None], rhs / norms)


def qp_feasible(qp: CondensedQp, x: np.ndarray) -> bool:
    return check_feasible(IneqSystem(qp.G, qp.W + qp.S @ np.asarray(x, dtype=float))).feasible


def default_domain_box(qp: CondensedQp, cap: float = BOX_CAP, iters: int = 60) -> np.ndarray:
    """Per-axis extent of the feasible states, found by bisection along each half-axis.

    The feasible set is convex, so along a ray from a feasible origin it is an
    interval. Unbounded directions are clipped to ``cap``.

    Raises:
        QPInfeasible: if the origin itself is infeasible.
    """
    n = qp.n
    if not qp_feasible(qp, np.zeros(n)):
        raise QPInfeasible("the QP is infeasible at x = 0; pass a domain box explicitly")
    box = np.zeros((n, 2))
    for i in range(n):
        for col, sign in ((1, 1.0), (0, -1.0)):
            e = np.zeros(n)
            e[i] = sign
            if qp_feasible(qp, cap * e):
                box[i, col] = sign * cap
                continue
            lo, hi = 0.0, cap
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                if qp_feasible(qp, mid * e):
                    lo = mid
                else:
                    hi = mid
            box[i, col] = sign * lo
    return box


def enumerate_explicit(qp: CondensedQp, domain_box: np.ndarray | None = None,
                       radius_tol: float = RADIUS_TOL,
                       rho_limit: int = ORACLE_RHO_LIMIT) -> PwaFunction:
    """Try every one of the ``2**rho`` active sets and keep the full-dimensional pieces.

    Sets larger than ``omega`` (and any other set with a singular reduced KKT
    matrix) cannot define a piece and are skipped.

    Raises:
        TooManyConstraints: if ``rho > rho_limit``.
    """
    rho, omega, n, m = qp.rho, qp.omega, qp.n, qp.m
    if rho > rho_limit:
        raise TooManyConstraints(f"rho = {rho} exceeds the brute-force limit {rho_limit}")
    box = default_domain_box(qp) if domain_box is None else np.asarray(domain_box, dtype=float)
    if box.shape != (n, 2) or np.any(box[:, 0] > box[:, 1]):
        raise ValueError(f"domain box must be an ({n}, 2) array of [low, high] rows")
    Hinv = qp.H_inv
    HinvGt = Hinv @ qp.G.T
    D = qp.G @ HinvGt
    unconstrained_gain = -Hinv @ qp.F.T
    box_M, box_rhs = _box_rows(box)

    pieces = []
    singular = 0
    for size in range(rho + 1):
        if size > omega:
            singular += comb(rho, size)
            continue
        for alpha in combinations(range(rho), size):
            a = list(alpha)
            if a:
                Daa = D[np.ix_(a, a)]
                if np.linalg.matrix_rank(Daa, tol=1e-10 * max(1.0, np.abs(Daa).max())) < size:
                    singular += 1
                    log.debug("skipping degenerate active set %s", [i + 1 for i in a])
                    continue
                lam_gain = -np.linalg.solve(Daa, qp.S[a])
                lam_off = -np.linalg.solve(Daa, qp.W[a])
                z_gain = -HinvGt[:, a] @ lam_gain
                z_off = -HinvGt[:, a] @ lam_off
            else:
                lam_gain = np.zeros((0, n))
                lam_off = np.zeros(0)
                z_gain = np.zeros((omega, n))
                z_off = np.zeros(omega)
            inactive = [i for i in range(rho) if i not in alpha]
            M = np.vstack([-lam_gain,
                           qp.G[inactive] @ z_gain - qp.S[inactive],
                           box_M])
            rhs = np.concatenate([lam_off,
                                  qp.W[inactive] - qp.G[inactive] @ z_off,
                                  box_rhs])
            region = _region_system(M, rhs)
            if region is None:
                continue
            center, radius = chebyshev_center(region)
            if not radius > radius_tol:
                continue
            U_gain = z_gain + unconstrained_gain
            pieces.append(CriticalRegion(
                active_set=ActiveSet(i + 1 for i in alpha),
                control_gain=U_gain[:m],
                control_offset=z_off[:m],
                region=region,
                full_dim=True,
                center=center,
                radius=radius,
            ))
    log.info("explicit enumeration: %d pieces, %d singular active sets", len(pieces), singular)
    return PwaFunction(tuple(pieces), box, qp)


def distinct_laws(pieces, channel: int | None = None, tol: float = LAW_TOL) -> tuple[list[np.ndarray], list[int]]:
    """Deduplicate the affine laws of ``pieces``.

    Returns the distinct laws (each as ``[gain..., offset]`` rows, one per
    output channel or only ``channel``) and the law index of every piece.
    """
    laws: list[np.ndarray] = []
    index = []
    for piece in pieces:
        law = np.hstack([piece.control_gain, piece.control_offset[:, None]])
        if channel is not None:
            law = law[channel:channel + 1]
        for k, seen in enumerate(laws):
            if np.max(np.abs(seen - law)) <= tol:
                index.append(k)
                break
        else:
            index.append(len(laws))
            laws.append(law)
    return laws, index


def exact_maximal_region_count(pwa: PwaFunction, tol: float = LAW_TOL) -> int:
    """Number of distinct affine laws among the full-dimensional pieces."""
    laws, _ = distinct_laws([p for p in pwa.pieces if p.full_dim], tol=tol)
    return len(laws)


# --------------------------------------------------------------------------- pointwise QP

def _polish(qp: CondensedQp, Hinv: np.ndarray, D: np.ndarray, b: np.ndarray,
            active: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact KKT solve for each sample's guessed active set; returns (z, ok)."""
    B = b.shape[0]
    z = np.zeros((B, qp.omega))
    ok = np.zeros(B, dtype=bool)
    patterns, inverse = np.unique(active, axis=0, return_inverse=True)
    for p, pattern in enumerate(patterns):
        rows = np.flatnonzero(inverse.ravel() == p)
        a = np.flatnonzero(pattern)
        if a.size:
            try:
                lam = -np.linalg.solve(D[np.ix_(a, a)], b[np.ix_(rows, a)].T).T
            except np.linalg.LinAlgError:
                continue
            zz = -lam @ (Hinv @ qp.G[a].T).T
            good = lam.min(axis=1) >= -tol
        else:
            zz = np.zeros((rows.size, qp.omega))
            good = np.ones(rows.size, dtype=bool)
        primal = np.max(zz @ qp.G.T - b[rows], axis=1) <= tol * (1.0 + np.abs(b[rows]).max(axis=1))
        z[rows] = zz
        ok[rows] = good & primal
    return z, ok


def optimal_sequences(qp: CondensedQp, X: np.ndarray, tol: float = 1e-10,
                          max_iter: int = 100_000, probe_after: int = 200,
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Optimal input sequence ``U`` of the MPC QP at every row of ``X``.

    Hildreth's dual coordinate ascent runs until the largest multiplier change
    of a sweep drops below ``tol``; the resulting active set is then solved
    exactly. Samples still moving after ``probe_after`` sweeps are checked
    for feasibility with an LP. Samples whose QP has no feasible point get
    NaN controls.

    Returns:
        ``(U, feasible)`` with ``U`` of shape ``(B, omega)``.

    Raises:
        NoConvergence: if a feasible sample does not settle within ``max_iter`` sweeps.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Bn = X.shape[0]
    Hinv = qp.H_inv
    D = qp.G @ Hinv @ qp.G.T
    b = qp.W + X @ qp.S.T
    diag = np.diag(D)
    live = np.flatnonzero(diag > 1e-12)
    # Rows with G_i = 0 only constrain the state.
    state_ok = np.all(b[:, diag <= 1e-12] >= -1e-12, axis=1)

    lam = np.zeros((Bn, qp.rho))
    running = state_ok.copy()
    infeasible = ~state_ok
    for sweep in range(max_iter):
        if sweep == probe_after:
            # An infeasible QP has an unbounded dual; ascent only drifts, so ask the LP.
            for k in np.flatnonzero(running):
                if not check_feasible(IneqSystem(qp.G, b[k])).feasible:
                    running[k] = False
                    infeasible[k] = True
        idx = np.flatnonzero(running)
        if idx.size == 0:
            break
        L = lam[idx]
        bb = b[idx]
        change = np.zeros(idx.size)
        for i in live:
            new = np.maximum(0.0, L[:, i] - (L @ D[:, i] + bb[:, i]) / diag[i])
            change = np.maximum(change, np.abs(new - L[:, i]))
            L[:, i] = new
        lam[idx] = L
        running[idx[change <= tol]] = False
    unsettled = running.copy()

    scale = np.abs(lam).max(axis=1, keepdims=True) + 1.0
    active = lam > 1e-9 * scale
    z, ok = _polish(qp, Hinv, D, b, active, 1e-9)
    feasible = ~infeasible & ok
    for k in np.flatnonzero(~infeasible & ~ok):
        if check_feasible(IneqSystem(qp.G, b[k])).feasible:
            if unsettled[k]:
                raise NoConvergence(f"dual ascent did not settle at sample {k}")
            # Fall back to the unpolished dual iterate.
            zk = -Hinv @ qp.G.T @ lam[k]
            if np.max(qp.G @ zk - b[k]) > 1e-7:
                raise NoConvergence(f"could not recover a feasible optimizer at sample {k}")
            z[k] = zk
            feasible[k] = True
    U = z - X @ (Hinv @ qp.F.T).T
    U[~feasible] = np.nan
    return U, feasible


def solve_pointwise_batch(qp: CondensedQp, X: np.ndarray, **kw) -> tuple[np.ndarray, np.ndarray]:
    """First control move at every row of ``X`` (NaN where infeasible) and the feasibility mask."""
    U, feasible = optimal_sequences(qp, X, **kw)
    return U[:, :qp.m], feasible


def solve_pointwise(qp: CondensedQp, x: np.ndarray) -> np.ndarray:
    """First control move of the QP minimizer at ``x``.

    Raises:
        QPInfeasible: if no input sequence satisfies the constraints at ``x``.
    """
    u, feasible = solve_pointwise_batch(qp, np.asarray(x, dtype=float).reshape(1, -1))
    if not feasible[0]:
        raise QPInfeasible(f"no feasible input sequence at x = {np.ravel(x)}")
    return u[0]


def feasible_mask(qp: CondensedQp, X: np.ndarray) -> np.ndarray:
    return np.array([qp_feasible(qp, x) for x in np.atleast_2d(X)], dtype=bool)


def sample_feasible(qp: CondensedQp, box: np.ndarray, count: int, rng: np.random.Generator,
                    max_rounds: int = 50) -> np.ndarray:
    """``count`` uniform samples of the feasible states inside ``box`` (rejection sampling)."""
    box = np.asarray(box, dtype=float)
    found = []
    total = 0
    for _ in range(max_rounds):
        X = rng.uniform(box[:, 0], box[:, 1], size=(2 * count, box.shape[0]))
        keep = X[feasible_mask(qp, X)]
        found.append(keep)
        total += keep.shape[0]
        if total >= count:
            return np.vstack(found)[:count]
    raise QPInfeasible(f"found only {total} feasible samples in the box")


# --------------------------------------------------------------------------- lattice extraction

def _hit_and_run(region: IneqSystem, start: np.ndarray, steps: int, rng: np.random.Generator) -> np.ndarray:
    x = np.array(start, dtype=float)
    out = []
    for _ in range(steps):
        d = rng.normal(size=x.shape)
        d /= np.linalg.norm(d)
        slack = region.rhs - region.M @ x
        rate = region.M @ d
        with np.errstate(divide="ignore"):
            steps_to = slack / rate
        hi = np.min(steps_to[rate > 1e-14], initial=np.inf)
        lo = np.max(steps_to[rate < -1e-14], initial=-np.inf)
        if not (np.isfinite(hi) and np.isfinite(lo)) or hi <= lo:
            continue
        x = x + rng.uniform(lo, hi) * d
        out.append(x.copy())
    return np.array(out).reshape(-1, start.shape[0])


def _grid(box: np.ndarray, max_points: int) -> np.ndarray:
    n = box.shape[0]
    per_axis = max(2, int(max_points ** (1.0 / n)))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


def _minimal_sets(masks: np.ndarray) -> list[tuple[int, ...]]:
    """Distinct boolean rows with every row that contains another one removed."""
    uniq = np.unique(masks, axis=0)
    uniq = uniq[np.argsort(uniq.sum(axis=1), kind="stable")]
    kept: list[np.ndarray] = []
    for row in uniq:
        if not any(np.all(k <= row) for k in kept):
            kept.append(row)
    return sorted(tuple(np.flatnonzero(k).tolist()) for k in kept)


def extract_lattice(pwa: PwaFunction, channel: int = 0, samples_per_region: int = 32,
                    grid_points: int = 20_000, seed: int = 0) -> CpwlDescription:
    """Max-min description of one output channel of ``pwa``.

    The local functions are the distinct laws of the channel. Every sample
    point ``x`` in a piece with law ``k`` contributes the subset of laws
    whose value at ``x`` is at least ``l_k(x)`` (ties within ``TIE_TOL``
    included). Samples are the Chebyshev centers, hit-and-run points inside
    each piece and a grid over the domain box; subsets containing another
    subset are dropped since they never attain the max.

    Raises:
        CoverageGap: if a grid point that should be covered lies in no piece.
    """
    pieces = [p for p in pwa.pieces if p.full_dim]
    if not pieces:
        raise CoverageGap("the piecewise-affine function has no full-dimensional piece")
    laws, law_of_piece = distinct_laws(pieces, channel=channel)
    table = np.vstack(laws)
    gains, offsets = table[:, :-1], table[:, -1]
    rng = np.random.default_rng(seed)

    points, owner = [], []
    for k, piece in enumerate(pieces):
        start = piece.center if piece.center is not None else chebyshev_center(piece.region)[0]
        pts = np.vstack([start[None, :], _hit_and_run(piece.region, start, samples_per_region, rng)])
        points.append(pts)
        owner.append(np.full(pts.shape[0], law_of_piece[k]))

    grid = _grid(pwa.domain_box, grid_points)
    where = PwaFunction(tuple(pieces), pwa.domain_box).locate(grid)
    missing = grid[where < 0]
    if missing.shape[0]:
        if pwa.qp is None:
            raise CoverageGap(f"{missing.shape[0]} grid points lie in no piece, e.g. {missing[0]}")
        for x in missing:
            if qp_feasible(pwa.qp, x):
                raise CoverageGap(f"feasible state {x} lies in no piece")
    points.append(grid[where >= 0])
    owner.append(np.array([law_of_piece[k] for k in where[where >= 0]], dtype=int))

    X = np.vstack(points)
    own = np.concatenate(owner)
    values = X @ gains.T + offsets
    f = values[np.arange(X.shape[0]), own]
    masks = values >= (f - TIE_TOL * (1.0 + np.abs(f)))[:, None]
    return CpwlDescription(gains, offsets, _minimal_sets(masks))


def sampled_orderings(gains: np.ndarray, offsets: np.ndarray, X: np.ndarray,
                      tie_tol: float = TIE_TOL) -> set[tuple[int, ...]]:
    """Distinct value orderings of the affine functions at the rows of ``X``.

    Values within ``tie_tol`` of each other share a rank.
    """
    values = np.atleast_2d(X) @ np.asarray(gains).T + np.asarray(offsets)
    keys = set()
    for row in values:
        order = np.argsort(row, kind="stable")
        ranks = np.empty(row.size, dtype=int)
        rank = 0
        for pos, j in enumerate(order):
            if pos and row[j] - row[order[pos - 1]] > tie_tol * (1.0 + abs(row[j])):
                rank += 1
            ranks[j] = rank
        keys.add(tuple(ranks.tolist()))
    return keys
