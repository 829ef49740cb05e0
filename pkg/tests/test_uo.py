from __future__ import annotations

from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from arenkit.oracle import sampled_orderings
from arenkit.uo import estimate_unique_order_count, region_bound


def test_small_arrangements():
    assert region_bound(3, 2) == 7
    assert region_bound(3, 1) == 4
    assert region_bound(0, 3) == 1


@given(N=st.integers(0, 40), extra=st.integers(0, 5))
def test_full_power_when_dimension_is_large(N, extra):
    assert region_bound(N, max(N, 1) + extra) == 2**N


@given(N=st.integers(0, 60), n=st.integers(1, 8))
def test_monotone_and_capped(N, n):
    r = region_bound(N, n)
    assert r <= 2**N
    assert region_bound(N + 1, n) >= r
    assert region_bound(N, n + 1) >= r


def test_huge_arguments_stay_exact():
    N = 10**12
    assert region_bound(N, 2) == 1 + N + N * (N - 1) // 2


def test_pairwise_hyperplanes():
    assert estimate_unique_order_count(2, 1).m_est == 2
    b = estimate_unique_order_count(3, 1)
    assert (b.n_hyperplanes, b.m_est) == (3, 4)
    b = estimate_unique_order_count(4, 2)
    assert (b.n_hyperplanes, b.m_est) == (6, comb(6, 0) + comb(6, 1) + comb(6, 2)) == (6, 22)


def test_literal_variant_counts_functions():
    b = estimate_unique_order_count(4, 2, pairwise=False)
    assert (b.n_hyperplanes, b.m_est) == (4, 11)


def test_rejects_empty():
    with pytest.raises(ValueError):
        estimate_unique_order_count(0, 1)
    with pytest.raises(ValueError):
        region_bound(3, 0)


@pytest.mark.parametrize("N, n", [(3, 1), (4, 2), (5, 2), (4, 3)])
def test_observed_orderings_within_bound(N, n):
    rng = np.random.default_rng(N * 10 + n)
    gains, offsets = rng.normal(size=(N, n)), rng.normal(size=N)
    X = rng.uniform(-20, 20, size=(20_000, n))
    assert len(sampled_orderings(gains, offsets, X)) <= estimate_unique_order_count(N, n).m_est
