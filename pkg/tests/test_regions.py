from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from arenkit.condense import CondensedQp, condense
from arenkit.regions import ActiveSet, count_unique_subsets, estimate_region_count
from arenkit.systems import random_stable_system


def toy_qp(G, H=None):
    G = np.atleast_2d(np.asarray(G, dtype=float))
    rho, omega = G.shape
    H = np.eye(omega) if H is None else np.atleast_2d(H)
    return CondensedQp(H=H, F=np.zeros((1, omega)), Y=np.zeros((1, 1)), G=G, W=np.ones(rho),
                       E=np.zeros((rho, 1)), S=np.zeros((rho, 1)), n=1, m=1, l=1, N_c=2)


def passing_subsets_scipy(V, eps):
    """Every row subset a (1-based) with rows_a(V) v <= -eps feasible, via an external LP."""
    rho = V.shape[0]
    out = [frozenset()]
    for k in range(1, rho + 1):
        for a in combinations(range(rho), k):
            res = linprog(np.zeros(V.shape[1]), A_ub=V[list(a)], b_ub=-eps * np.ones(k),
                          bounds=[(None, None)] * V.shape[1], method="highs")
            if res.status == 0:
                out.append(frozenset(i + 1 for i in a))
    return out


def test_active_set_basics():
    a = ActiveSet([3, 1, 3])
    assert a.indices == (1, 3) and len(a) == 2 and 3 in a
    np.testing.assert_array_equal(a.selector(4), [[1, 0, 0, 0], [0, 0, 1, 0]])
    assert ActiveSet([1]).issubset(a)
    with pytest.raises(ValueError):
        ActiveSet([0])
    with pytest.raises(ValueError):
        a.selector(2)


def test_union_of_power_sets_small_cases():
    assert count_unique_subsets([]) == 1
    assert count_unique_subsets([{1, 2, 3}]) == 8
    assert count_unique_subsets([{1, 3}, {2}]) == 5
    assert count_unique_subsets([{1, 2}, {2, 3}]) == 6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sets(st.integers(1, 8), max_size=6), min_size=1, max_size=8))
def test_union_matches_explicit_enumeration(sets):
    explicit = {frozenset(sub) for s in sets for k in range(len(s) + 1)
                for sub in combinations(sorted(s), k)}
    assert count_unique_subsets(sets) == len(explicit)


def test_bound_form_beyond_threshold():
    sets = [{i, i + 1} for i in range(1, 30)]
    assert count_unique_subsets(sets, rho=30, threshold=20) == min(29 * 4, 2**30)


def test_zero_matrix_admits_only_the_empty_set():
    rep = estimate_region_count(toy_qp(np.zeros((3, 1))))
    assert rep.n_est == 1


def test_mixed_signs_give_two_maximal_sets():
    rep = estimate_region_count(toy_qp([[1.0], [-1.0], [2.0]]))
    assert sorted(s.indices for s in rep.maximal_sets) == [(1, 3), (2,)]
    assert rep.n_est == 5


def test_all_positive_rows_pass_together():
    rep = estimate_region_count(toy_qp([[1.0, 0.5], [2.0, 1.0], [0.3, 3.0]]))
    assert rep.n_est == 2**3 == rep.two_pow_rho


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_estimate_equals_external_count_of_passing_subsets(seed):
    qp = condense(random_stable_system(2 + seed, seed=seed))
    rep = estimate_region_count(qp)
    passing = passing_subsets_scipy(qp.G @ np.linalg.inv(qp.H), 1e-6)
    assert rep.n_est == len(passing)
    maximal = {s for s in passing if not any(s < t for t in passing)}
    assert {frozenset(a.indices) for a in rep.maximal_sets} == maximal


def test_double_integrator_value(di_qp):
    rep = estimate_region_count(di_qp)
    assert rep.exact_union and rep.complete
    assert rep.n_est == 171 and rep.two_pow_rho == 1024


def test_margin_does_not_change_the_count(di_qp):
    counts = {estimate_region_count(di_qp, eps=e).n_est for e in (1e-3, 1e-6, 1e-9)}
    assert counts == {171}


def test_budget_exhaustion_falls_back_to_full_power_set(di_qp):
    rep = estimate_region_count(di_qp, budget_seconds=0.0)
    assert not rep.complete
    assert rep.n_est == rep.two_pow_rho


def test_learned_conflicts_are_infeasible(di_qp):
    rep = estimate_region_count(di_qp)
    V = di_qp.G @ di_qp.H_inv
    for iis in rep.learned_iis:
        rows = [i - 1 for i in iis]
        res = linprog(np.zeros(V.shape[1]), A_ub=V[rows], b_ub=-1e-6 * np.ones(len(rows)),
                      bounds=[(None, None)] * V.shape[1], method="highs")
        assert res.status == 2
