"""Ready-made MPC instances for tests, benchmarks and examples."""

from __future__ import annotations

import numpy as np

from .condense import MpcSpec, dare_solve


def _with_riccati(A, B, C, Q, R, N_c, y_bound, u_bound, **meta) -> MpcSpec:
    P, K = dare_solve(A, B, Q, R)
    l, m = np.atleast_2d(C).shape[0], np.atleast_2d(B).shape[1]
    return MpcSpec(A=A, B=B, C=C, P=P, Q=Q, R=R, K=K, N_c=N_c,
                   y_min=-y_bound * np.ones(l), y_max=y_bound * np.ones(l),
                   u_min=-u_bound * np.ones(m), u_max=u_bound * np.ones(m),
                   meta=dict(riccati=True, **meta))


def double_integrator(N_c: int = 2, y_bound: float = 1.0, u_bound: float = 1.0) -> MpcSpec:
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    B = np.array([[0.5], [1.0]])
    C = np.array([[1.0, 0.0]])
    return _with_riccati(A, B, C, np.eye(2), np.eye(1), N_c, y_bound, u_bound, name="double-integrator")


def scalar_system(a: float = 1.2, b: float = 1.0, N_c: int = 2,
                  y_bound: float = 2.0, u_bound: float = 1.0) -> MpcSpec:
    A, B, C = np.array([[a]]), np.array([[b]]), np.array([[1.0]])
    return _with_riccati(A, B, C, np.eye(1), np.eye(1), N_c, y_bound, u_bound, name="scalar")


def random_stable_system(n: int, m: int = 1, l: int = 1, N_c: int = 2, seed: int = 0,
                         spectral_radius: float = 0.9, y_bound: float = 1.0,
                         u_bound: float = 1.0) -> MpcSpec:
    """Random instance with ``A`` a scaled orthogonal matrix and Gaussian ``B``, ``C``."""
    rng = np.random.default_rng(seed)
    Qr, _ = np.linalg.qr(rng.normal(size=(n, n)))
    A = spectral_radius * Qr
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(l, n))
    return _with_riccati(A, B, C, np.eye(n), np.eye(m), N_c, y_bound, u_bound,
                         name=f"random-n{n}-m{m}-l{l}-seed{seed}")
