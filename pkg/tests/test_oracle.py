from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import minimize

from arenkit.condense import condense
from arenkit.errors import CoverageGap, QPInfeasible, TooManyConstraints
from arenkit.lattice import lattice_net
from arenkit.linfeas import IneqSystem
from arenkit.oracle import (CriticalRegion, PwaFunction, default_domain_box, enumerate_explicit,
                            exact_maximal_region_count, extract_lattice, sample_feasible,
                            optimal_sequences, solve_pointwise, solve_pointwise_batch)
from arenkit.regions import ActiveSet
from arenkit.systems import random_stable_system, scalar_system


def interval_piece(gain, offset, lo, hi):
    region = IneqSystem([[1.0], [-1.0]], [hi, -lo])
    return CriticalRegion(ActiveSet(()), np.array([[gain]]), np.array([offset]), region,
                          center=np.array([(lo + hi) / 2]), radius=(hi - lo) / 2)


def scalar_pwa(pieces, lo, hi):
    return PwaFunction(tuple(interval_piece(*p) for p in pieces), np.array([[lo, hi]]))


def scipy_first_move(qp, x):
    """Reference QP solve with SLSQP on the original (unshifted) variables."""
    b = qp.W + qp.E @ x
    res = minimize(lambda U: 0.5 * U @ qp.H @ U + x @ qp.F @ U, np.zeros(qp.omega),
                   jac=lambda U: qp.H @ U + qp.F.T @ x,
                   constraints=[{"type": "ineq", "fun": lambda U: b - qp.G @ U,
                                 "jac": lambda U: -qp.G}],
                   method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    return res.x[:qp.m]


def test_unconstrained_law_near_origin(di_qp):
    x = np.array([0.01, -0.02])
    expected = (-np.linalg.solve(di_qp.H, di_qp.F.T) @ x)[:di_qp.m]
    np.testing.assert_allclose(solve_pointwise(di_qp, x), expected, atol=1e-10)
    np.testing.assert_allclose(solve_pointwise(di_qp, np.zeros(2)), 0, atol=1e-12)


def test_pointwise_matches_scipy(di_qp, rng):
    box = default_domain_box(di_qp)
    X = sample_feasible(di_qp, box, 100, rng)
    u, ok = solve_pointwise_batch(di_qp, X)
    assert ok.all()
    for x, ux in zip(X, u):
        np.testing.assert_allclose(ux, scipy_first_move(di_qp, x), atol=1e-6)


def test_infeasible_state(di_qp):
    with pytest.raises(QPInfeasible):
        solve_pointwise(di_qp, np.array([10.0, 10.0]))
    u, ok = solve_pointwise_batch(di_qp, np.array([[10.0, 10.0], [0.0, 0.0]]))
    assert ok.tolist() == [False, True] and np.isnan(u[0]).all()


def test_pieces_agree_with_pointwise_solver(di_qp, rng):
    pwa = enumerate_explicit(di_qp)
    X = sample_feasible(di_qp, pwa.domain_box, 500, rng)
    u, _ = solve_pointwise_batch(di_qp, X)
    assert np.max(np.abs(pwa(X) - u)) <= 1e-7
    for piece in pwa.pieces:
        assert piece.full_dim and piece.radius > 1e-7
        assert piece.contains(piece.center[None, :])[0]


def test_piece_count_matches_grid_classification(di_qp):
    """Every enumerated piece shows up as the optimal active set somewhere on a 200 x 200 grid."""
    pwa = enumerate_explicit(di_qp)
    axes = [np.linspace(lo, hi, 200) for lo, hi in pwa.domain_box]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
    U, ok = optimal_sequences(di_qp, X)
    X, U = X[ok], U[ok]
    slack = di_qp.W + X @ di_qp.E.T - U @ di_qp.G.T
    observed = {tuple(np.flatnonzero(row < 1e-9) + 1) for row in slack}
    enumerated = {p.active_set.indices for p in pwa.pieces}
    assert enumerated <= observed
    # Extra keys can only come from grid points sitting exactly on a piece boundary.
    located = pwa.locate(X)
    assert np.all(located >= 0)
    assert set(located.tolist()) == set(range(len(pwa.pieces)))


def test_saturation_pieces_on_scalar_system():
    qp = condense(scalar_system(a=1.2, b=1.0, y_bound=5.0, u_bound=0.3))
    pwa = enumerate_explicit(qp)
    offsets = sorted(round(float(p.control_offset[0]), 9) for p in pwa.pieces
                     if np.allclose(p.control_gain, 0))
    assert -0.3 in offsets and 0.3 in offsets


def test_region_count_examples():
    assert exact_maximal_region_count(scalar_pwa([(1.0, 0.0, -1, 0), (1.0, 0.0, 0, 1)], -1, 1)) == 1
    sat = scalar_pwa([(0.0, -1.0, -3, -1), (1.0, 0.0, -1, 1), (0.0, 1.0, 1, 3)], -3, 3)
    assert exact_maximal_region_count(sat) == 3
    assert exact_maximal_region_count(PwaFunction((), np.array([[0.0, 1.0]]))) == 0


def test_oracle_limit():
    qp = condense(random_stable_system(2, m=1, l=2, N_c=3))
    assert qp.rho == 20
    with pytest.raises(TooManyConstraints):
        enumerate_explicit(qp, np.array([[-1.0, 1.0], [-1.0, 1.0]]))


def test_lattice_of_cpwl_example():
    pwa = scalar_pwa([(-2.0, 3.0, -5, 0), (2.0, 3.0, 0, 5)], -5, 5)
    d = extract_lattice(pwa)
    assert sorted(zip(d.gains[:, 0], d.offsets)) == [(-2.0, 3.0), (2.0, 3.0)]
    assert d.subsets == ((0,), (1,))


def test_lattice_of_affine_function():
    d = extract_lattice(scalar_pwa([(0.5, 1.0, -2, 2)], -2, 2))
    assert d.n_local == 1 and d.subsets == ((0,),)


def test_lattice_of_three_piece_nonconvex_function():
    # rises, plateaus, falls: neither convex nor concave
    pwa = scalar_pwa([(1.0, 2.0, -4, -1), (0.0, 1.0, -1, 1), (-1.0, 2.0, 1, 4)], -4, 4)
    d = extract_lattice(pwa)
    x = np.linspace(-4, 4, 10_001)[:, None]
    assert np.max(np.abs(lattice_net(d)(x)[:, 0] - pwa(x)[:, 0])) <= 1e-8


def test_coverage_gap_detected():
    pwa = scalar_pwa([(1.0, 0.0, -2, -1), (1.0, 0.0, 1, 2)], -2, 2)
    with pytest.raises(CoverageGap):
        extract_lattice(pwa)


def test_lattice_round_trip_on_mpc_law(random_qp, rng):
    pwa = enumerate_explicit(random_qp)
    d = extract_lattice(pwa)
    X = sample_feasible(random_qp, pwa.domain_box, 2000, rng)
    u, _ = solve_pointwise_batch(random_qp, X)
    assert np.max(np.abs(lattice_net(d)(X)[:, 0] - u[:, 0])) <= 1e-8
