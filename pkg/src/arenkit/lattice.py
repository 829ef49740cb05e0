"""ReLU networks for two-level lattice (max-min) functions.

The building block computes ``max(a, b)`` or ``min(a, b)`` exactly from the
identity ``max(a, b) = (a + b)/2 + |a - b|/2`` with one hidden ReLU layer of
four units. Wider max/min networks pair their inputs stage by stage
(ceil-halving), duplicating the last input when a stage has odd width.

A lattice network evaluates ``x -> max_i min_{j in s_i} l_j(x)`` with

* one affine layer producing ``l_j(x)`` for every (subset, port) slot
  (the 0/1 routing is folded in; it can be kept separate for inspection),
* ``M`` parallel min-networks over ``N`` ports each,
* one max-network over the ``M`` min outputs.

Vector outputs run ``m`` channels side by side, so every signal is ``m``
times wider. Signals are stored position-major: slot ``(pos, lane)`` sits at
index ``pos * lanes + lane``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySubset, ShapeMismatch

ROLES = ("linear", "selector", "min-stage", "max-stage", "output")
PARAM_WARN_THRESHOLD = 10**8

# Hidden units of a 2-input block: a+b, -(a+b), b-a, a-b.
_BLOCK_IN = np.array([[1.0, 1.0], [-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0]])
_BLOCK_OUT = {
    "max": np.array([0.5, -0.5, 0.5, 0.5]),
    "min": np.array([0.5, -0.5, -0.5, -0.5]),
}


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    role: str
    activation: bool

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown layer role {self.role!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be positive")

    @property
    def param_count(self) -> int:
        return self.out_dim * (self.in_dim + 1)


@dataclass(frozen=True)
class ArchDescriptor:
    layers: tuple[LayerSpec, ...]
    input_dim: int
    output_dim: int
    n_local: int = 1
    n_orders: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        dim = self.input_dim
        for k, layer in enumerate(self.layers):
            if layer.in_dim != dim:
                raise ShapeMismatch(f"layer {k} expects {layer.in_dim} inputs, receives {dim}")
            dim = layer.out_dim
        if dim != self.output_dim:
            raise ShapeMismatch(f"network ends with {dim} outputs, declared {self.output_dim}")

    @property
    def param_count(self) -> int:
        return sum(layer.param_count for layer in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def dims(self) -> list[tuple[int, int]]:
        return [(layer.in_dim, layer.out_dim) for layer in self.layers]

    def stage_units(self, role: str) -> list[int]:
        """Output widths of the non-activated layers closing each stage of ``role``."""
        return [layer.out_dim for layer in self.layers if layer.role == role and not layer.activation]


@dataclass(frozen=True, eq=False)
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: bool
    role: str = "linear"

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape[0] != W.shape[0]:
            raise ShapeMismatch(f"bias of length {b.shape[0]} for {W.shape[0]} outputs")
        if self.role not in ROLES:
            raise ValueError(f"unknown layer role {self.role!r}")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def spec(self) -> LayerSpec:
        return LayerSpec(self.W.shape[1], self.W.shape[0], self.role, self.activation)


@dataclass(frozen=True, eq=False)
class WeightedNet:
    layers: tuple[Layer, ...]
    input_dim: int
    output_dim: int
    n_local: int = 1
    n_orders: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.arch()  # validates composability

    def arch(self) -> ArchDescriptor:
        return ArchDescriptor(tuple(layer.spec for layer in self.layers), self.input_dim,
                              self.output_dim, self.n_local, self.n_orders)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on one input vector or on a batch with inputs along the last axis."""
        z = np.asarray(x, dtype=float)
        if z.shape[-1] != self.input_dim:
            raise ShapeMismatch(f"expected inputs of size {self.input_dim}, got {z.shape[-1]}")
        for layer in self.layers:
            z = z @ layer.W.T + layer.b
            if layer.activation:
                z = np.maximum(z, 0.0)
        return z

    __call__ = forward

    def selector_rows_ok(self) -> bool:
        """Every selector layer has 0/1 rows with exactly one 1 and zero bias."""
        for layer in self.layers:
            if layer.role != "selector":
                continue
            W = layer.W
            if not (np.all((W == 0) | (W == 1)) and np.all(W.sum(axis=1) == 1) and not layer.b.any()):
                return False
        return True


# --------------------------------------------------------------------------- stages

def _stage_widths(width: int) -> list[int]:
    """Ceil-halving sequence of stage output widths, e.g. 5 -> [3, 2, 1]."""
    out = []
    while width > 1:
        width = -(-width // 2)
        out.append(width)
    return out


def _stage_specs(width: int, lanes: int, role: str) -> list[LayerSpec]:
    specs = []
    for units in _stage_widths(width):
        specs.append(LayerSpec(width * lanes, 4 * units * lanes, role, True))
        specs.append(LayerSpec(4 * units * lanes, units * lanes, role, False))
        width = units
    return specs


def _stage_layers(width: int, lanes: int, kind: str) -> list[Layer]:
    """Exact weights of a ``kind`` ('max' or 'min') network over ``width`` positions per lane."""
    role = f"{kind}-stage"
    out_pattern = _BLOCK_OUT[kind]
    layers = []
    for units in _stage_widths(width):
        W1 = np.zeros((4 * units * lanes, width * lanes))
        W2 = np.zeros((units * lanes, 4 * units * lanes))
        for p in range(units):
            a, b = 2 * p, min(2 * p + 1, width - 1)
            for lane in range(lanes):
                out = p * lanes + lane
                hid = slice(4 * out, 4 * out + 4)
                W1[hid, a * lanes + lane] += _BLOCK_IN[:, 0]
                W1[hid, b * lanes + lane] += _BLOCK_IN[:, 1]
                W2[out, hid] = out_pattern
        layers.append(Layer(W1, np.zeros(W1.shape[0]), True, role))
        layers.append(Layer(W2, np.zeros(W2.shape[0]), False, role))
        width = units
    return layers


def max2_weights() -> WeightedNet:
    return WeightedNet(_stage_layers(2, 1, "max"), 2, 1)


def min2_weights() -> WeightedNet:
    return WeightedNet(_stage_layers(2, 1, "min"), 2, 1)


def maxN_arch(N: int) -> ArchDescriptor:
    if N < 1:
        raise ValueError("N must be at least 1")
    return ArchDescriptor(_stage_specs(N, 1, "max-stage"), N, 1)


def minN_arch(N: int) -> ArchDescriptor:
    if N < 1:
        raise ValueError("N must be at least 1")
    return ArchDescriptor(_stage_specs(N, 1, "min-stage"), N, 1)


def maxN_weights(N: int) -> WeightedNet:
    """Exact max of ``N`` inputs; ``N = 1`` gives the empty (identity) network."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return WeightedNet(_stage_layers(N, 1, "max"), N, 1)


def minN_weights(N: int) -> WeightedNet:
    if N < 1:
        raise ValueError("N must be at least 1")
    return WeightedNet(_stage_layers(N, 1, "min"), N, 1)


def infer_architecture(n_est: int, m_est: int, n: int, m: int,
                       warn_threshold: int = PARAM_WARN_THRESHOLD) -> ArchDescriptor:
    """Layer shapes of a lattice network with ``n_est`` local functions and ``m_est`` subsets.

    Widths are exact Python integers, so astronomically large estimates are
    representable; a ``ResourceWarning`` flags parameter counts above
    ``warn_threshold``.
    """
    if n_est < 1 or m_est < 1:
        raise ValueError("n_est and m_est must be at least 1")
    if n < 1 or m < 1:
        raise ValueError("input and output dimensions must be positive")
    layers = [LayerSpec(n, m * n_est * m_est, "linear", False)]
    layers += _stage_specs(n_est, m_est * m, "min-stage")
    layers += _stage_specs(m_est, m, "max-stage")
    arch = ArchDescriptor(tuple(layers), n, m, n_est, m_est)
    if arch.param_count > warn_threshold:
        warnings.warn(f"architecture has {arch.param_count} parameters", ResourceWarning, stacklevel=2)
    return arch


# --------------------------------------------------------------------------- lattice form

@dataclass(frozen=True, eq=False)
class CpwlDescription:
    """Scalar CPWL function ``max_i min_{j in subsets[i]} (gains[j] @ x + offsets[j])``.

    Subsets hold 0-based indices into the local functions and are stored sorted.
    """

    gains: np.ndarray
    offsets: np.ndarray
    subsets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        gains = np.atleast_2d(np.asarray(self.gains, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if gains.shape[0] != offsets.shape[0]:
            raise ShapeMismatch("one offset per local function is required")
        if gains.shape[0] < 1:
            raise ValueError("at least one local function is required")
        subsets = tuple(tuple(sorted({int(j) for j in s})) for s in self.subsets)
        if not subsets:
            raise ValueError("at least one subset is required")
        for s in subsets:
            if not s:
                raise EmptySubset("lattice subsets must be nonempty")
            if s[0] < 0 or s[-1] >= gains.shape[0]:
                raise ValueError(f"subset {s} refers to a missing local function")
        gains.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "subsets", subsets)

    @property
    def n_local(self) -> int:
        return self.gains.shape[0]

    @property
    def n_subsets(self) -> int:
        return len(self.subsets)

    @property
    def dim(self) -> int:
        return self.gains.shape[1]

    def local_values(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.gains.T + self.offsets

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Direct max-min evaluation; ``x`` is ``(n,)`` or ``(B, n)``."""
        L = self.local_values(x)
        out = np.max(np.stack([L[:, list(s)].min(axis=1) for s in self.subsets]), axis=0)
        return out if np.ndim(x) > 1 else out[0]


def _as_channels(desc: CpwlDescription | Sequence[CpwlDescription]) -> tuple[CpwlDescription, ...]:
    channels = (desc,) if isinstance(desc, CpwlDescription) else tuple(desc)
    if not channels:
        raise ValueError("need at least one output channel")
    if len({c.dim for c in channels}) != 1:
        raise ShapeMismatch("all channels must share the input dimension")
    return channels


def _padded(subset: tuple[int, ...], width: int) -> list[int]:
    # Extra ports repeat the largest member; min over repeats is unchanged.
    return list(subset) + [subset[-1]] * (width - len(subset))


def _pair_runs(runs: list[tuple[np.ndarray, int]], kind: str) -> list[tuple[np.ndarray, int]]:
    """One stage of 2-input blocks on a run-length encoded signal.

    ``runs`` lists ``(values, count)``: ``count`` consecutive positions holding
    identical values. Each distinct pair is evaluated once with the ReLU block.
    """
    out: list[tuple[np.ndarray, int]] = []
    pending = None

    def block(a, b):
        h = np.maximum(np.stack([a + b, -a - b, b - a, a - b], axis=-1), 0.0)
        return h @ _BLOCK_OUT[kind]

    for values, count in runs:
        if pending is not None:
            out.append((block(pending, values), 1))
            pending = None
            count -= 1
        if count >= 2:
            out.append((block(values, values), count // 2))
        if count % 2:
            pending = values
    if pending is not None:
        out.append((block(pending, pending), 1))
    return out


def _reduce_runs(runs: list[tuple[np.ndarray, int]], kind: str) -> np.ndarray:
    while sum(c for _, c in runs) > 1:
        runs = _pair_runs(runs, kind)
    return runs[0][0]


@dataclass(frozen=True, eq=False)
class LatticeNet:
    """A lattice network held by its parameters rather than dense matrices.

    ``n_local`` and ``n_orders`` are the architecture's port and subset counts;
    they may exceed what the channels need, in which case missing ports and
    subsets are filled by replication. :meth:`forward` runs the same ReLU
    block arithmetic as :meth:`dense` but visits every distinct
    (pair of inputs) only once, so huge padded architectures stay cheap.
    """

    channels: tuple[CpwlDescription, ...]
    n_local: int
    n_orders: int

    def __post_init__(self):
        object.__setattr__(self, "channels", _as_channels(self.channels))
        need_n = max(max(len(s) for s in c.subsets) for c in self.channels)
        need_m = max(c.n_subsets for c in self.channels)
        if self.n_local < need_n or self.n_orders < need_m:
            raise ShapeMismatch(f"({self.n_local}, {self.n_orders}) cannot hold subsets needing "
                                f"({need_n}, {need_m})")

    @property
    def input_dim(self) -> int:
        return self.channels[0].dim

    @property
    def output_dim(self) -> int:
        return len(self.channels)

    def arch(self) -> ArchDescriptor:
        return infer_architecture(self.n_local, self.n_orders, self.input_dim, self.output_dim,
                                  warn_threshold=float("inf"))

    def forward(self, x: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if X.shape[-1] != self.input_dim:
            raise ShapeMismatch(f"expected inputs of size {self.input_dim}, got {X.shape[-1]}")
        out = np.empty((X.shape[0], self.output_dim))
        for c, ch in enumerate(self.channels):
            L = ch.local_values(X)
            mins = []
            for s in ch.subsets:
                runs = [(L[:, j], 1) for j in s]
                runs[-1] = (runs[-1][0], 1 + self.n_local - len(s))
                mins.append(_reduce_runs(runs, "min"))
            runs = [(v, 1) for v in mins]
            runs[-1] = (runs[-1][0], 1 + self.n_orders - len(mins))
            out[:, c] = _reduce_runs(runs, "max")
        return out if np.ndim(x) > 1 else out[0]

    __call__ = forward

    def dense(self, fold_selector: bool = True) -> WeightedNet:
        """Materialize the full weight matrices (only sensible for small nets).

        With ``fold_selector=False`` the first layer evaluates each distinct
        local function once and a 0/1 ``selector`` layer routes the values to
        the min-network ports.
        """
        N, M, m, n = self.n_local, self.n_orders, self.output_dim, self.input_dim
        lanes = M * m
        offset = np.cumsum([0] + [ch.n_local for ch in self.channels])
        route = np.zeros(N * lanes, dtype=int)
        for c, ch in enumerate(self.channels):
            subsets = list(ch.subsets) + [ch.subsets[-1]] * (M - ch.n_subsets)
            for i, s in enumerate(subsets):
                for j, fn in enumerate(_padded(s, N)):
                    route[j * lanes + i * m + c] = offset[c] + fn
        G = np.vstack([ch.gains for ch in self.channels])
        g = np.concatenate([ch.offsets for ch in self.channels])
        if fold_selector:
            first = [Layer(G[route], g[route], False, "linear")]
        else:
            sel = np.zeros((N * lanes, G.shape[0]))
            sel[np.arange(N * lanes), route] = 1.0
            first = [Layer(G, g, False, "linear"), Layer(sel, np.zeros(N * lanes), False, "selector")]
        layers = first + _stage_layers(N, lanes, "min") + _stage_layers(M, m, "max")
        return WeightedNet(tuple(layers), n, m, N, M)


def lattice_net(desc: CpwlDescription | Sequence[CpwlDescription]) -> LatticeNet:
    """Smallest lattice network for ``desc``: one port per local function, one lane per subset."""
    channels = _as_channels(desc)
    return LatticeNet(channels, max(c.n_local for c in channels), max(c.n_subsets for c in channels))


def assemble_lattice_net(desc: CpwlDescription | Sequence[CpwlDescription],
                         fold_selector: bool = False) -> WeightedNet:
    """Dense ReLU network computing ``desc`` (one description per output channel)."""
    return lattice_net(desc).dense(fold_selector=fold_selector)


def embed(net: LatticeNet, n_local: int, n_orders: int) -> LatticeNet:
    """Lift ``net`` into the architecture with ``n_local`` ports and ``n_orders`` subsets.

    Extra ports repeat an existing local function of the same subset and extra
    subsets repeat the last one, so outputs are unchanged. (Zero-filled ports
    would inject a spurious 0 into the min.)
    """
    if not isinstance(net, LatticeNet):
        raise ShapeMismatch("embed expects a lattice-structured network")
    if n_local < net.n_local or n_orders < net.n_orders:
        raise ShapeMismatch(f"cannot shrink ({net.n_local}, {net.n_orders}) to ({n_local}, {n_orders})")
    return LatticeNet(net.channels, n_local, n_orders)
