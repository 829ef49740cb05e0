"""Condensed parametric QP for linear MPC with box constraints.

The MPC problem over inputs ``U = [u_0; ...; u_Nc]`` with prediction horizon
``N_y = N_c + 1`` is rewritten as::

    J(U, x) = 1/2 x'Yx + 1/2 U'HU + x'FU,     G U <= W + E x

and, after the change of variables ``z = U + H^{-1} F' x``::

    min 1/2 z'Hz   s.t.   G z <= W + S x,     S = E + G H^{-1} F'.

Constraint rows are ordered as: output upper bounds (k = 1..N_c), output
lower bounds (k = 1..N_c), input upper bounds (k = 0..N_c), input lower bounds
(k = 0..N_c). Within a block the component index varies fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NonPositiveDefiniteH, SpecError

SYM_TOL = 1e-10


def _as_matrix(name: str, value, shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got ndim={arr.ndim}")
    if shape is not None and arr.shape != shape:
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{name} contains non-finite entries")
    return arr


def _as_vector(name: str, value, size: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if arr.shape != (size,):
        raise DimensionMismatch(f"{name} has length {arr.size}, expected {size}")
    if np.any(np.isnan(arr)):
        raise SpecError(f"{name} contains NaN")
    return arr


def _check_symmetric(name: str, M: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > SYM_TOL * scale:
        raise SpecError(f"{name} is not symmetric")


def _check_psd(name: str, M: np.ndarray) -> None:
    _check_symmetric(name, M)
    scale = max(1.0, float(np.max(np.abs(M))))
    # Cholesky of a slightly shifted matrix: succeeds iff M is PSD up to tolerance.
    try:
        np.linalg.cholesky(M + 1e-10 * scale * np.eye(M.shape[0]))
    except np.linalg.LinAlgError:
        raise SpecError(f"{name} is not positive semidefinite") from None


@dataclass(frozen=True, eq=False)
class MpcSpec:
    """A linear MPC problem instance.

    Shapes: ``A`` (n, n), ``B`` (n, m), ``C`` (l, n), ``P``/``Q`` (n, n),
    ``R`` (m, m), ``K`` (m, n). Bounds are vectors of length l (outputs) and
    m (inputs). ``K`` is carried for completeness; with ``N_y = N_c + 1`` it
    does not enter the condensed QP.

    Positive definiteness of ``R`` is checked by :func:`condense`, which is
    where a singular Hessian would surface.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    K: np.ndarray
    N_c: int
    y_min: np.ndarray
    y_max: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    epsilon: float = 1e-6
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = _as_matrix("A", self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B = _as_matrix("B", self.B)
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n}")
        m = B.shape[1]
        C = _as_matrix("C", self.C)
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {n}")
        l = C.shape[0]
        P = _as_matrix("P", self.P, (n, n))
        Q = _as_matrix("Q", self.Q, (n, n))
        R = _as_matrix("R", self.R, (m, m))
        K = _as_matrix("K", self.K, (m, n))
        _check_psd("Q", Q)
        _check_psd("P", P)
        _check_symmetric("R", R)

        if int(self.N_c) != self.N_c or self.N_c < 2:
            raise SpecError(f"N_c must be an integer >= 2, got {self.N_c}")
        y_min = _as_vector("y_min", self.y_min, l)
        y_max = _as_vector("y_max", self.y_max, l)
        u_min = _as_vector("u_min", self.u_min, m)
        u_max = _as_vector("u_max", self.u_max, m)
        if not np.all(y_min < y_max):
            raise SpecError("y_min < y_max must hold element-wise")
        if not np.all(u_min < u_max):
            raise SpecError("u_min < u_max must hold element-wise")
        if not self.epsilon > 0:
            raise SpecError("epsilon must be positive")

        for name, value in dict(A=A, B=B, C=C, P=P, Q=Q, R=R, K=K, y_min=y_min,
                                y_max=y_max, u_min=u_min, u_max=u_max).items():
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "N_c", int(self.N_c))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def l(self) -> int:
        return self.C.shape[0]

    @property
    def omega(self) -> int:
        return self.m * (self.N_c + 1)

    @property
    def rho(self) -> int:
        return 2 * self.l * self.N_c + 2 * self.m * (self.N_c + 1)

    def rollout(self, U: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Predicted states ``x_0 .. x_{N_c+1}`` as an array of shape (N_c + 2, n)."""
        U = np.asarray(U, dtype=float).reshape(self.N_c + 1, self.m)
        xs = [np.asarray(x, dtype=float).ravel()]
        for u in U:
            xs.append(self.A @ xs[-1] + self.B @ u)
        return np.array(xs)

    def cost(self, U: np.ndarray, x: np.ndarray) -> float:
        """MPC cost evaluated by simulating the dynamics (no ½ factor)."""
        U = np.asarray(U, dtype=float).reshape(self.N_c + 1, self.m)
        xs = self.rollout(U, x)
        J = xs[-1] @ self.P @ xs[-1]
        for k in range(self.N_c + 1):
            J += xs[k] @ self.Q @ xs[k] + U[k] @ self.R @ U[k]
        return float(J)

    def constraints_hold(self, U: np.ndarray, x: np.ndarray, slack: float = 0.0) -> bool:
        """Check the output and input bounds directly on a rollout."""
        U = np.asarray(U, dtype=float).reshape(self.N_c + 1, self.m)
        xs = self.rollout(U, x)
        for k in range(1, self.N_c + 1):
            y = self.C @ xs[k]
            if np.any(y > self.y_max + slack) or np.any(y < self.y_min - slack):
                return False
        return bool(np.all(U <= self.u_max + slack) and np.all(U >= self.u_min - slack))


@dataclass(frozen=True, eq=False)
class CondensedQp:
    H: np.ndarray
    F: np.ndarray
    Y: np.ndarray
    G: np.ndarray
    W: np.ndarray
    E: np.ndarray
    S: np.ndarray
    n: int
    m: int
    l: int
    N_c: int

    @property
    def omega(self) -> int:
        return self.H.shape[0]

    @property
    def rho(self) -> int:
        return self.G.shape[0]

    @property
    def H_inv(self) -> np.ndarray:
        L = np.linalg.cholesky(self.H)
        Linv = np.linalg.solve(L, np.eye(self.omega))
        return Linv.T @ Linv

    def objective(self, U: np.ndarray, x: np.ndarray) -> float:
        U = np.asarray(U, dtype=float).ravel()
        x = np.asarray(x, dtype=float).ravel()
        return float(0.5 * x @ self.Y @ x + 0.5 * U @ self.H @ U + x @ self.F @ U)

    def row_names(self) -> list[str]:
        """Human-readable name of each constraint row, in row order."""
        names = []
        for kind, bound, steps, width in (("y", "max", range(1, self.N_c + 1), self.l),
                                          ("y", "min", range(1, self.N_c + 1), self.l),
                                          ("u", "max", range(self.N_c + 1), self.m),
                                          ("u", "min", range(self.N_c + 1), self.m)):
            for k in steps:
                for i in range(width):
                    names.append(f"{kind}{i}[{k}]<={bound}" if bound == "max"
                                 else f"{kind}{i}[{k}]>={bound}")
        return names


def prediction_matrices(A: np.ndarray, B: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Batch prediction ``X = Sx x + Su U`` for states ``x_0..x_horizon``.

    ``U`` stacks ``horizon`` inputs ``u_0..u_{horizon-1}``.
    """
    n, m = B.shape
    Sx = np.zeros(((horizon + 1) * n, n))
    Su = np.zeros(((horizon + 1) * n, horizon * m))
    Ak = np.eye(n)
    powers = [Ak]
    for k in range(horizon + 1):
        Sx[k * n:(k + 1) * n] = Ak
        Ak = A @ Ak
        powers.append(Ak)
    for k in range(1, horizon + 1):
        for j in range(k):
            Su[k * n:(k + 1) * n, j * m:(j + 1) * m] = powers[k - 1 - j] @ B
    return Sx, Su


def condense(spec: MpcSpec) -> CondensedQp:
    """Eliminate the dynamics and complete the square.

    Raises:
        NonPositiveDefiniteH: if ``R`` or the resulting ``H`` fails Cholesky.
    """
    n, m, l, N = spec.n, spec.m, spec.l, spec.N_c
    try:
        np.linalg.cholesky(spec.R)
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteH("R must be positive definite") from None

    Ny = N + 1
    Sx, Su = prediction_matrices(spec.A, spec.B, Ny)
    Qbar = np.zeros(((Ny + 1) * n, (Ny + 1) * n))
    for k in range(Ny):
        Qbar[k * n:(k + 1) * n, k * n:(k + 1) * n] = spec.Q
    Qbar[Ny * n:, Ny * n:] = spec.P
    Rbar = np.kron(np.eye(N + 1), spec.R)

    H = 2.0 * (Su.T @ Qbar @ Su + Rbar)
    H = 0.5 * (H + H.T)
    F = 2.0 * Sx.T @ Qbar @ Su
    Y = 2.0 * Sx.T @ Qbar @ Sx
    Y = 0.5 * (Y + Y.T)

    omega = m * (N + 1)
    C_blocks = [spec.C @ Su[k * n:(k + 1) * n] for k in range(1, N + 1)]
    CA_blocks = [spec.C @ Sx[k * n:(k + 1) * n] for k in range(1, N + 1)]
    I_u = np.eye(omega)

    G = np.vstack(C_blocks + [-b for b in C_blocks] + [I_u, -I_u])
    W = np.concatenate([np.tile(spec.y_max, N), np.tile(-spec.y_min, N),
                        np.tile(spec.u_max, N + 1), np.tile(-spec.u_min, N + 1)])
    E = np.vstack([-b for b in CA_blocks] + CA_blocks + [np.zeros((2 * omega, n))])

    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteH("condensed Hessian H is not positive definite") from None
    Linv = np.linalg.solve(L, np.eye(omega))
    H_inv = Linv.T @ Linv
    S = E + G @ H_inv @ F.T

    out = CondensedQp(H=H, F=F, Y=Y, G=G, W=W, E=E, S=S, n=n, m=m, l=l, N_c=N)
    for arr in (H, F, Y, G, W, E, S):
        arr.setflags(write=False)
    assert out.omega == omega and out.rho == spec.rho
    return out


def dare_solve(A, B, Q, R, tol: float = 1e-10, max_iter: int = 10000) -> tuple[np.ndarray, np.ndarray]:
    """Solve the discrete algebraic Riccati equation by fixed-point iteration.

    Returns ``(P, K)`` with the feedback convention ``u = K x``, i.e.
    ``K = -(R + B'PB)^{-1} B'PA``.

    Raises:
        NoConvergence: if the relative change does not drop below ``tol``
            within ``max_iter`` iterations (e.g. ``(A, B)`` not stabilizable).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if B.shape[0] != A.shape[0]:
        B = B.T
    P = Q.copy()
    for _ in range(max_iter):
        gain = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            break
        if np.max(np.abs(P_next - P)) <= tol * max(1.0, float(np.max(np.abs(P_next)))):
            K = -np.linalg.solve(R + B.T @ P_next @ B, B.T @ P_next @ A)
            return P_next, K
        P = P_next
    raise NoConvergence(f"Riccati iteration did not converge in {max_iter} iterations")
