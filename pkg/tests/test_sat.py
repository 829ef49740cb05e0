from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from arenkit.sat import (AtLeastOneOf, Clause, ImplicationBlock, OutsideOf, add_blocking,
                         maximize_true, satisfies)


def brute_force_maximum(universe, constraints):
    """All maximum-cardinality models, by enumerating every assignment."""
    for size in range(universe, -1, -1):
        models = [frozenset(c) for c in combinations(range(1, universe + 1), size)
                  if satisfies(c, constraints, universe)]
        if models:
            return models
    return []


def random_constraints(rng, universe):
    out = []
    for _ in range(rng.integers(0, 10)):
        kind = rng.integers(0, 4)
        k = int(rng.integers(1, min(universe, 4) + 1))
        vars_ = [int(v) for v in rng.choice(np.arange(1, universe + 1), size=k, replace=False)]
        if kind == 0:
            out.append(Clause(v if rng.random() < 0.3 else -v for v in vars_))
        elif kind == 1:
            out.append(AtLeastOneOf(vars_))
        elif kind == 2:
            out.append(OutsideOf(vars_))
        else:
            out.append(ImplicationBlock(vars_))
    return out


def test_unconstrained_sets_everything():
    assert maximize_true(4, []) == frozenset({1, 2, 3, 4})


def test_unsatisfiable_returns_none():
    assert maximize_true(2, [Clause([1]), Clause([-1])]) is None


def test_tie_break_is_lexicographic():
    assert maximize_true(3, [Clause([-1, -2]), Clause([-2, -3]), Clause([-1, -3])]) == frozenset({1})


def test_matches_exhaustive_search_on_random_systems():
    rng = np.random.default_rng(99)
    for _ in range(50):
        universe = int(rng.integers(1, 13))
        cons = random_constraints(rng, universe)
        got = maximize_true(universe, cons)
        models = brute_force_maximum(universe, cons)
        if not models:
            assert got is None
        else:
            assert got in models
            assert got == min(models, key=lambda s: sorted(s))


def test_outside_blocks_set_and_subsets():
    cons = add_blocking([], {1, 2})
    assert not satisfies({1, 2}, cons, 3)
    assert not satisfies({1}, cons, 3)
    assert satisfies({3}, cons, 3)
    with pytest.raises(ValueError):
        add_blocking([], set())


def test_implication_block_still_admits_the_set():
    cons = [ImplicationBlock({1, 2})]
    assert satisfies({1, 2}, cons, 3)
    assert not satisfies({1}, cons, 3)
    assert satisfies({1, 3}, cons, 3)


def test_rejects_out_of_range_literals():
    with pytest.raises(ValueError):
        maximize_true(2, [Clause([3])])
    with pytest.raises(ValueError):
        Clause([0])
