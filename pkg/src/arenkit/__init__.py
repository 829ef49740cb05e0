"""Sizing and constructing ReLU networks that can exactly represent a linear MPC law."""

from __future__ import annotations

from .condense import CondensedQp, MpcSpec, condense, dare_solve
from .lattice import (ArchDescriptor, CpwlDescription, LatticeNet, WeightedNet,
                      assemble_lattice_net, embed, infer_architecture, lattice_net)
from .regions import ActiveSet, RegionCountReport, estimate_region_count
from .uo import UoBound, estimate_unique_order_count, region_bound

__version__ = "0.1.0"

__all__ = [
    "ActiveSet", "ArchDescriptor", "CondensedQp", "CpwlDescription", "LatticeNet", "MpcSpec",
    "RegionCountReport", "UoBound", "WeightedNet", "assemble_lattice_net", "condense",
    "dare_solve", "embed", "estimate_region_count", "estimate_unique_order_count",
    "infer_architecture", "lattice_net", "region_bound",
]
