"""Upper bounds on the number of unique-order regions.

The value ordering of ``N`` affine functions can only change across the
pairwise equality hyperplanes ``l_i(x) = l_j(x)``, so the number of cells of
that arrangement bounds the number of unique-order regions. An arrangement of
``K`` hyperplanes in dimension ``n`` has at most ``sum_{i<=n} C(K, i)`` cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb


@dataclass(frozen=True)
class UoBound:
    n_local: int
    n_hyperplanes: int
    n_state: int
    m_est: int


def region_bound(num_hyperplanes: int, dim: int) -> int:
    """Maximum number of cells cut out by ``num_hyperplanes`` hyperplanes in ``R^dim``."""
    if num_hyperplanes < 0 or dim < 1:
        raise ValueError("need num_hyperplanes >= 0 and dim >= 1")
    if dim >= num_hyperplanes:
        return 1 << num_hyperplanes
    return sum(comb(num_hyperplanes, i) for i in range(dim + 1))


def estimate_unique_order_count(n_est: int, n_state: int, pairwise: bool = True) -> UoBound:
    """Bound the unique-order regions of a CPWL map with at most ``n_est`` local functions.

    By default one hyperplane is counted per pair of local functions. With
    ``pairwise=False`` the hyperplane count is ``n_est`` itself, which is the
    smaller (and not generally sound) literal variant, kept for comparison.
    """
    if n_est < 1:
        raise ValueError("n_est must be at least 1")
    k = n_est * (n_est - 1) // 2 if pairwise else n_est
    return UoBound(n_local=n_est, n_hyperplanes=k, n_state=n_state,
                   m_est=region_bound(k, n_state))
