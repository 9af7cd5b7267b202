"""Per-layer node partitions, the refinement preorder and consistency predicates."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError

__all__ = [
    "LayerPartition",
    "NetPartition",
    "identity_partition",
    "coarsest_layer",
    "is_finer",
    "is_consistent",
    "is_eps_consistent",
    "concretize",
]


def _canonical(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    canon = [tuple(sorted(int(s) for s in b)) for b in blocks]
    canon.sort(key=lambda b: b[0] if b else -1)
    return tuple(canon)


@dataclass(frozen=True)
class LayerPartition:
    """A partition of the nodes ``0..size-1`` of one layer.

    Blocks are stored canonically: members ascending, blocks ordered by their
    smallest member.  Construction validates disjointness and coverage.
    """

    layer: int
    blocks: tuple[tuple[int, ...], ...]

    def __init__(self, layer: int, blocks: Iterable[Iterable[int]], size: int | None = None):
        canon = _canonical(blocks)
        if any(len(b) == 0 for b in canon):
            raise ContractError(f"layer {layer}: blocks must be non-empty")
        flat = [s for b in canon for s in b]
        n = len(flat)
        if size is not None and n != size:
            raise ContractError(f"layer {layer}: blocks cover {n} nodes, layer has {size}")
        if sorted(flat) != list(range(n)):
            raise ContractError(f"layer {layer}: blocks must be disjoint and cover 0..{n - 1}")
        object.__setattr__(self, "layer", int(layer))
        object.__setattr__(self, "blocks", canon)

    @classmethod
    def from_labels(cls, layer: int, labels: Sequence[int]) -> "LayerPartition":
        groups: dict[int, list[int]] = {}
        for node, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(node)
        return cls(layer, groups.values())

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @cached_property
    def labels(self) -> np.ndarray:
        """Block index of every node."""
        lab = np.empty(self.size, dtype=np.intp)
        for j, b in enumerate(self.blocks):
            lab[list(b)] = j
        lab.setflags(write=False)
        return lab

    @cached_property
    def order(self) -> np.ndarray:
        """Nodes listed block by block (the grouping permutation)."""
        o = np.fromiter((s for b in self.blocks for s in b), dtype=np.intp, count=self.size)
        o.setflags(write=False)
        return o

    @cached_property
    def starts(self) -> np.ndarray:
        """Offset of each block inside :attr:`order`."""
        s = np.zeros(len(self.blocks), dtype=np.intp)
        np.cumsum([len(b) for b in self.blocks[:-1]], out=s[1:])
        s.setflags(write=False)
        return s

    @cached_property
    def representatives(self) -> np.ndarray:
        """Smallest member of each block."""
        return np.array([b[0] for b in self.blocks], dtype=np.intp)

    def block_of(self, node: int) -> tuple[int, ...]:
        return self.blocks[self.labels[node]]

    def is_singleton(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)


@dataclass(frozen=True)
class NetPartition:
    """One :class:`LayerPartition` per layer ``0..k``."""

    per_layer: tuple[LayerPartition, ...]

    def __init__(self, per_layer: Iterable[LayerPartition | Iterable[Iterable[int]]]):
        layers = []
        for i, p in enumerate(per_layer):
            if not isinstance(p, LayerPartition):
                p = LayerPartition(i, p)
            elif p.layer != i:
                raise ContractError(f"partition for position {i} is labelled layer {p.layer}")
            layers.append(p)
        if len(layers) < 2:
            raise ContractError("a network partition needs at least two layers")
        object.__setattr__(self, "per_layer", tuple(layers))

    def __getitem__(self, i: int) -> LayerPartition:
        return self.per_layer[i]

    def __len__(self):
        return len(self.per_layer)

    def __iter__(self):
        return iter(self.per_layer)

    @property
    def k(self) -> int:
        return len(self.per_layer) - 1

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(p.size for p in self.per_layer)

    @property
    def block_counts(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.per_layer)

    def as_lists(self) -> list[list[list[int]]]:
        return [[list(b) for b in p.blocks] for p in self.per_layer]

    def replace(self, layer: int, blocks: Iterable[Iterable[int]]) -> "NetPartition":
        layers = list(self.per_layer)
        layers[layer] = LayerPartition(layer, blocks, size=self.per_layer[layer].size)
        return NetPartition(layers)

    def check_sizes(self, layer_sizes: Sequence[int]):
        if tuple(layer_sizes) != self.layer_sizes:
            raise ContractError(
                f"partition covers layer sizes {list(self.layer_sizes)}, network has {list(layer_sizes)}"
            )


def identity_partition(net) -> NetPartition:
    """Every node in its own block."""
    return NetPartition(LayerPartition(i, [[s] for s in range(n)]) for i, n in enumerate(net.layer_sizes))


def coarsest_layer(layer: int, size: int) -> LayerPartition:
    return LayerPartition(layer, [range(size)])


def is_finer(p: NetPartition, q: NetPartition) -> bool:
    """True iff every block of ``p`` lies inside some block of ``q``, in every layer."""
    if p.layer_sizes != q.layer_sizes:
        raise ContractError(f"layer sizes differ: {list(p.layer_sizes)} vs {list(q.layer_sizes)}")
    for pl, ql in zip(p, q):
        target = ql.labels[pl.order]
        first = np.repeat(target[pl.starts], [len(b) for b in pl.blocks])
        if not np.array_equal(target, first):
            return False
    return True


def _check_layer(v, p: LayerPartition):
    if v.layer != p.layer:
        raise ContractError(f"valuation is for layer {v.layer}, partition for layer {p.layer}")
    if len(v.values) != p.size:
        raise ContractError(f"valuation has {len(v.values)} entries, partition covers {p.size} nodes")


def _block_spreads(values: np.ndarray, p: LayerPartition) -> np.ndarray:
    grouped = values[p.order]
    return np.maximum.reduceat(grouped, p.starts) - np.minimum.reduceat(grouped, p.starts)


def is_consistent(v, p: LayerPartition) -> bool:
    """All nodes of each block carry exactly equal values."""
    _check_layer(v, p)
    grouped = v.values[p.order]
    reps = np.repeat(grouped[p.starts], [len(b) for b in p.blocks])
    return bool(np.array_equal(grouped, reps))


def is_eps_consistent(v, p: LayerPartition, eps: float) -> bool:
    """Values within each block differ pairwise by at most ``eps`` (closed bound)."""
    if eps < 0:
        raise ContractError(f"eps must be non-negative, got {eps}")
    _check_layer(v, p)
    return bool((_block_spreads(v.values, p) <= eps).all())


def concretize(block_values, p: LayerPartition) -> np.ndarray:
    """Node-level values with every node taking its block's value."""
    block_values = np.asarray(block_values, dtype=np.float64)
    if block_values.shape[-1] != len(p):
        raise ContractError(f"{block_values.shape[-1]} block values for {len(p)} blocks")
    return block_values[..., p.labels]
