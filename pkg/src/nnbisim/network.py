"""Feedforward network model, pre-sums, forward semantics and Lipschitz bounds.

Nodes are identified by ``(layer, position)``; layer 0 is the input layer and
layer ``k`` the output layer.  ``weights[i-1]`` holds the edges from layer
``i-1`` to layer ``i`` with shape ``(|S_{i-1}|, |S_i|)`` (row = source node).

All sums over source nodes are left folds in ascending node order, so results
are bit-stable and the vectorized kernels agree exactly with scalar loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ContractError, ValidationError

__all__ = [
    "ActivationKind",
    "RELU",
    "TANH",
    "SIGMOID",
    "SOFTPLUS",
    "ARCTAN",
    "SOFTSIGN",
    "IDENTITY",
    "leaky_relu",
    "Network",
    "Valuation",
    "pre_sum",
    "block_sums",
    "presum_matrix",
    "row_chunks",
    "eval_layer",
    "eval_network",
    "eval_trace",
    "forward",
    "forward_trace",
    "layer_lipschitz",
    "operator_inf_norm",
    "network_lipschitz_bound",
    "weight_inf_norm",
    "interval_bounds",
]

_TAGS = ("relu", "leaky_relu", "tanh", "sigmoid", "softplus", "arctan", "softsign", "identity")
# piecewise-linear with a kink at 0: possibly non-monotone (negative slope)
_MONOTONE = frozenset({"relu", "tanh", "sigmoid", "softplus", "arctan", "softsign", "identity"})


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class ActivationKind:
    """An activation function tag, plus the slope for ``leaky_relu``."""

    tag: str
    slope: float | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown activation {self.tag!r}; expected one of {_TAGS}")
        if self.tag == "leaky_relu":
            if self.slope is None or not np.isfinite(self.slope):
                raise ValueError("leaky_relu needs a finite slope")
            object.__setattr__(self, "slope", float(self.slope))
        elif self.slope is not None:
            raise ValueError(f"{self.tag} takes no slope parameter")

    @property
    def lipschitz(self) -> float:
        if self.tag == "leaky_relu":
            return max(1.0, abs(self.slope))
        return 1.0

    @property
    def key(self) -> tuple[str, float]:
        """Total-orderable identity: tag plus exact parameter."""
        return (self.tag, 0.0 if self.slope is None else self.slope)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        tag = self.tag
        if tag == "relu":
            return np.maximum(x, 0.0)
        if tag == "leaky_relu":
            return np.where(x >= 0.0, x, self.slope * x)
        if tag == "tanh":
            return np.tanh(x)
        if tag == "sigmoid":
            return _sigmoid(np.atleast_1d(x)).reshape(x.shape)
        if tag == "softplus":
            return np.logaddexp(0.0, x)
        if tag == "arctan":
            return np.arctan(x)
        if tag == "softsign":
            return x / (1.0 + np.abs(x))
        return x.copy()

    def image(self, lo, hi):
        """Elementwise image of the box ``[lo, hi]``."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        flo, fhi = self(lo), self(hi)
        if self.tag in _MONOTONE or self.slope >= 0.0:
            return flo, fhi
        straddle = (lo < 0.0) & (hi > 0.0)
        new_lo = np.minimum(flo, fhi)
        new_hi = np.maximum(flo, fhi)
        new_lo = np.where(straddle, np.minimum(new_lo, 0.0), new_lo)
        new_hi = np.where(straddle, np.maximum(new_hi, 0.0), new_hi)
        return new_lo, new_hi

    def __str__(self):
        if self.tag == "leaky_relu":
            return f"leaky_relu({self.slope!r})"
        return self.tag


RELU = ActivationKind("relu")
TANH = ActivationKind("tanh")
SIGMOID = ActivationKind("sigmoid")
SOFTPLUS = ActivationKind("softplus")
ARCTAN = ActivationKind("arctan")
SOFTSIGN = ActivationKind("softsign")
IDENTITY = ActivationKind("identity")


def leaky_relu(slope: float) -> ActivationKind:
    return ActivationKind("leaky_relu", slope)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class Network:
    """An immutable dense feedforward network.

    ``weights[i-1]``, ``biases[i-1]`` and ``activations[i-1]`` describe layer
    ``i`` for ``i`` in ``1..k``.  Arrays are copied and made read-only.
    """

    def __init__(self, weights, biases, activations):
        if len(weights) == 0:
            raise ValidationError("a network needs at least one non-input layer")
        if not (len(weights) == len(biases) == len(activations)):
            raise ValidationError(
                f"got {len(weights)} weight matrices, {len(biases)} bias vectors "
                f"and {len(activations)} activation vectors"
            )
        ws, bs, acts = [], [], []
        sizes = None
        for i, (w, b, a) in enumerate(zip(weights, biases, activations), start=1):
            w = np.asarray(w, dtype=np.float64)
            if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
                raise ValidationError(f"weight matrix must be a non-empty 2-D array, got shape {w.shape}", layer=i)
            if sizes is None:
                sizes = [w.shape[0]]
            elif w.shape[0] != sizes[-1]:
                raise ValidationError(
                    f"weight matrix has {w.shape[0]} rows but layer {i - 1} has {sizes[-1]} nodes", layer=i
                )
            sizes.append(w.shape[1])
            b = np.asarray(b, dtype=np.float64)
            if b.shape != (w.shape[1],):
                raise ValidationError(f"bias vector has shape {b.shape}, expected ({w.shape[1]},)", layer=i)
            a = tuple(a)
            if len(a) != w.shape[1]:
                raise ValidationError(f"{len(a)} activations for {w.shape[1]} nodes", layer=i)
            if not all(isinstance(f, ActivationKind) for f in a):
                raise ValidationError("activations must be ActivationKind values", layer=i)
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValidationError("weights and biases must be finite", layer=i)
            ws.append(_frozen(w))
            bs.append(_frozen(b))
            acts.append(a)
        self.weights: tuple[np.ndarray, ...] = tuple(ws)
        self.biases: tuple[np.ndarray, ...] = tuple(bs)
        self.activations: tuple[tuple[ActivationKind, ...], ...] = tuple(acts)
        self.layer_sizes: tuple[int, ...] = tuple(int(n) for n in sizes)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def node_count(self) -> int:
        return sum(self.layer_sizes)

    @property
    def edge_count(self) -> int:
        return sum(a * b for a, b in zip(self.layer_sizes, self.layer_sizes[1:]))

    def W(self, i: int) -> np.ndarray:
        self._check_layer(i)
        return self.weights[i - 1]

    def b(self, i: int) -> np.ndarray:
        self._check_layer(i)
        return self.biases[i - 1]

    def A(self, i: int) -> tuple[ActivationKind, ...]:
        self._check_layer(i)
        return self.activations[i - 1]

    def _check_layer(self, i):
        if not 1 <= i <= self.k:
            raise IndexError(f"layer index {i} outside 1..{self.k}")

    @cached_property
    def _activation_groups(self):
        groups = []
        for acts in self.activations:
            by_kind: dict[ActivationKind, list[int]] = {}
            for j, f in enumerate(acts):
                by_kind.setdefault(f, []).append(j)
            groups.append([(f, np.array(ix, dtype=np.intp)) for f, ix in by_kind.items()])
        return groups

    def apply_activations(self, i: int, z: np.ndarray) -> np.ndarray:
        """Apply layer ``i``'s per-node activations to pre-activations ``z`` (last axis = nodes)."""
        groups = self._activation_groups[i - 1]
        if len(groups) == 1:
            return groups[0][0](z)
        out = np.empty_like(z)
        for f, ix in groups:
            out[..., ix] = f(z[..., ix])
        return out

    def identical(self, other: "Network") -> bool:
        """Bit-for-bit equality of all parameters."""
        return (
            self.layer_sizes == other.layer_sizes
            and self.activations == other.activations
            and all(a.tobytes() == b.tobytes() for a, b in zip(self.weights, other.weights))
            and all(a.tobytes() == b.tobytes() for a, b in zip(self.biases, other.biases))
        )

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.layer_sizes == other.layer_sizes
            and self.activations == other.activations
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    __hash__ = None

    def __repr__(self):
        return f"Network(layer_sizes={list(self.layer_sizes)})"


@dataclass(frozen=True)
class Valuation:
    """Values assigned to the nodes of one layer."""

    layer: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if not np.isfinite(v).all():
            raise ContractError("valuation entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, Valuation):
            return NotImplemented
        return self.layer == other.layer and np.array_equal(self.values, other.values)

    __hash__ = None


def pre_sum(net: Network, i: int, block, target: int) -> float:
    """Total weight on edges from ``block`` (nodes of layer ``i-1``) into ``target`` of layer ``i``."""
    W = net.W(i)
    n_prev, n = W.shape
    if not 0 <= target < n:
        raise IndexError(f"target node {target} outside layer {i} (size {n})")
    members = sorted(block)
    for s in members:
        if not 0 <= s < n_prev:
            raise IndexError(f"source node {s} outside layer {i - 1} (size {n_prev})")
    if not members:
        return 0.0
    total = W[members[0], target]
    for s in members[1:]:
        total += W[s, target]
    return float(total)


def _flat_blocks(blocks) -> tuple[np.ndarray, np.ndarray]:
    """``(order, sizes)``: members listed block by block (each ascending) and block sizes."""
    order = getattr(blocks, "order", None)
    if order is not None:
        return order, np.fromiter((len(b) for b in blocks), dtype=np.intp, count=len(blocks))
    members = [sorted(int(s) for s in b) for b in blocks]
    sizes = np.fromiter((len(m) for m in members), dtype=np.intp, count=len(members))
    flat = np.fromiter((s for m in members for s in m), dtype=np.intp, count=int(sizes.sum()))
    return flat, sizes


def block_sums(matrix: np.ndarray, blocks) -> np.ndarray:
    """Row sums of ``matrix`` over each block, one output row per block.

    ``blocks`` is a sequence of index collections or a ``LayerPartition``.
    Each entry is the left fold over the block's rows in ascending index
    order, identical bit-for-bit to :func:`pre_sum`.  Cost is linear in the
    number of entries summed plus one vectorized step per rank of the
    largest block.
    """
    matrix = np.asarray(matrix)
    order, sizes = _flat_blocks(blocks)
    nb = len(sizes)
    out = np.zeros((nb, matrix.shape[1]), dtype=np.float64)
    if nb == 0 or not sizes.any():
        return out
    starts = np.zeros(nb, dtype=np.intp)
    np.cumsum(sizes[:-1], out=starts[1:])
    # rank blocks by size so the blocks still active at rank r form a prefix
    by_size = np.argsort(-sizes, kind="stable")
    sorted_sizes = sizes[by_size]
    active = int(np.count_nonzero(sorted_sizes))
    ranked = by_size[:active]
    first = starts[ranked]
    acc = matrix[order[first]].astype(np.float64)
    counts = np.searchsorted(-sorted_sizes[:active], -np.arange(1, sorted_sizes[0]), side="left")
    for r, cnt in enumerate(counts, start=1):
        acc[:cnt] += matrix[order[first[:cnt] + r]]
    out[ranked] = acc
    return out


def row_chunks(M: np.ndarray, entries: int = 1 << 15):
    """Yield ``(first_row, rows)`` slices of ``M`` holding about ``entries`` values each.

    Keeps temporaries cache-sized so per-entry cost does not grow with ``M``.
    """
    step = max(1, entries // max(1, M.shape[1]))
    for r0 in range(0, M.shape[0], step):
        yield r0, M[r0:r0 + step]


def presum_matrix(net: Network, i: int, prev_blocks) -> np.ndarray:
    """Pre-sums of every node of layer ``i`` w.r.t. each block of layer ``i-1``.

    Entry ``[r, t]`` equals ``pre_sum(net, i, prev_blocks[r], t)``.
    """
    return block_sums(net.W(i), prev_blocks)


def _affine(W: np.ndarray, b: np.ndarray, X: np.ndarray) -> np.ndarray:
    # sequential over sources so every entry is a fixed-order fold
    acc = X[..., 0, None] * W[0]
    for s in range(1, W.shape[0]):
        acc += X[..., s, None] * W[s]
    acc += b
    return acc


def _check_valuation(net: Network, v: Valuation, layer: int):
    if v.layer != layer:
        raise ContractError(f"expected a valuation of layer {layer}, got layer {v.layer}")
    if len(v.values) != net.layer_sizes[layer]:
        raise ContractError(
            f"valuation has {len(v.values)} entries, layer {layer} has {net.layer_sizes[layer]} nodes"
        )


def eval_layer(net: Network, i: int, v: Valuation) -> Valuation:
    """One layer of the forward semantics: activation of (weighted sum + bias)."""
    net._check_layer(i)
    _check_valuation(net, v, i - 1)
    z = _affine(net.W(i), net.b(i), v.values)
    return Valuation(i, net.apply_activations(i, z))


def eval_trace(net: Network, v0: Valuation) -> list[Valuation]:
    """All intermediate valuations, layer 0 through layer k."""
    _check_valuation(net, v0, 0)
    out = [v0]
    for i in range(1, net.k + 1):
        out.append(eval_layer(net, i, out[-1]))
    return out


def eval_network(net: Network, v0: Valuation) -> Valuation:
    """Input-output semantics: the output-layer valuation for input ``v0``."""
    return eval_trace(net, v0)[-1]


def forward_trace(net: Network, X) -> list[np.ndarray]:
    """Batched :func:`eval_trace`; ``X`` has shape ``(..., |S_0|)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != net.layer_sizes[0]:
        raise ContractError(f"inputs have {X.shape[-1]} features, network expects {net.layer_sizes[0]}")
    out = [X]
    for i in range(1, net.k + 1):
        out.append(net.apply_activations(i, _affine(net.W(i), net.b(i), out[-1])))
    return out


def forward(net: Network, X) -> np.ndarray:
    """Batched :func:`eval_network`."""
    return forward_trace(net, X)[-1]


def layer_lipschitz(net: Network, i: int) -> float:
    """Largest activation Lipschitz constant among layer ``i``'s nodes."""
    return max(f.lipschitz for f in net.A(i))


def operator_inf_norm(W: np.ndarray) -> float:
    """inf-operator norm of the map ``v -> v @ W``: the largest absolute column sum."""
    return float(np.abs(W).sum(axis=0).max())


def network_lipschitz_bound(net: Network) -> float:
    """An upper bound on the inf-norm Lipschitz constant of every prefix ``[[N]]^i``.

    Uses the product of per-layer bounds (activation constant times the
    operator norm of the weight map), maximised over prefixes.
    """
    best = 0.0
    running = 1.0
    for i in range(1, net.k + 1):
        running *= layer_lipschitz(net, i) * operator_inf_norm(net.W(i))
        best = max(best, running)
    return best


def weight_inf_norm(net: Network, i: int) -> float:
    """Largest absolute weight between layers ``i-1`` and ``i``."""
    return float(np.abs(net.W(i)).max())


def interval_bounds(net: Network, lo, hi) -> list[tuple[np.ndarray, np.ndarray]]:
    """Elementwise bounds on every layer's valuation for inputs in the box ``[lo, hi]``.

    Plain interval arithmetic, so it is sound but not tight.
    """
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (net.layer_sizes[0],)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (net.layer_sizes[0],)).copy()
    if (lo > hi).any():
        raise ContractError("interval lower bound exceeds upper bound")
    out = [(lo, hi)]
    for i in range(1, net.k + 1):
        W = net.W(i)
        Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
        zlo = lo @ Wp + hi @ Wn + net.b(i)
        zhi = hi @ Wp + lo @ Wn + net.b(i)
        new_lo = np.empty_like(zlo)
        new_hi = np.empty_like(zhi)
        for f, ix in net._activation_groups[i - 1]:
            new_lo[ix], new_hi[ix] = f.image(zlo[ix], zhi[ix])
        lo, hi = new_lo, new_hi
        out.append((lo, hi))
    return out
