"""Coarsest NN-bisimulation by partition refinement (MinNN).

Start from one block per layer, split every non-input layer by
(activation, bias), then repeatedly pick an inconsistent pair ``(S', S)``,
a block ``S'`` of layer ``i`` whose members have different pre-sums w.r.t.
a block ``S`` of layer ``i-1``, and split ``S'`` by those pre-sums.  The
result is the coarsest bisimulation, so its quotient is the smallest
bisimulation-equivalent network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .bisim import _layer_violation, check_bisimulation, quotient
from .errors import ContractError
from .network import Network, block_sums, presum_matrix
from .partition import LayerPartition, NetPartition

__all__ = [
    "RefinementStep",
    "RefinementTrace",
    "MinimizeResult",
    "split_act_bias",
    "find_inconsistent_pair",
    "split_pre",
    "minimize",
    "maximality_check",
]

STEP_KINDS = ("act_bias_split", "presum_split", "preserve_io")


@dataclass(frozen=True)
class RefinementStep:
    """``block`` of ``layer`` was replaced by the blocks in ``result``.

    ``trigger`` is the previous-layer block for a ``presum_split``.
    ``preserve_io`` steps break the input/output layers into singletons.
    """

    kind: str
    layer: int
    block: tuple[int, ...]
    result: tuple[tuple[int, ...], ...]
    trigger: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "layer": self.layer,
            "block": list(self.block),
            "result": [list(b) for b in self.result],
            "trigger": None if self.trigger is None else list(self.trigger),
        }


@dataclass(frozen=True)
class RefinementTrace:
    steps: tuple[RefinementStep, ...]
    final_partition: NetPartition

    def partitions(self) -> Iterator[NetPartition]:
        """The working partition after each step, starting from one block per layer."""
        layers = [[tuple(range(n))] for n in self.final_partition.layer_sizes]
        for step in self.steps:
            blocks = layers[step.layer]
            try:
                pos = blocks.index(step.block)
            except ValueError:
                raise ContractError(f"trace step splits {step.block}, which is not a current block") from None
            layers[step.layer] = blocks[:pos] + list(step.result) + blocks[pos + 1:]
            yield NetPartition(LayerPartition(i, b) for i, b in enumerate(layers))

    def replay(self) -> NetPartition:
        """Re-apply every step; equals :attr:`final_partition` for a valid trace."""
        last = NetPartition(LayerPartition(i, [range(n)]) for i, n in enumerate(self.final_partition.layer_sizes))
        for last in self.partitions():
            pass
        return last

    @property
    def presum_splits(self) -> int:
        return sum(1 for s in self.steps if s.kind == "presum_split")


class MinimizeResult(NamedTuple):
    partition: NetPartition
    network: Network
    trace: RefinementTrace


def _group_equal(nodes, values) -> list[tuple[int, ...]]:
    """Maximal groups of ``nodes`` with exactly equal ``values`` (any hashable keys)."""
    groups: dict = {}
    for node, val in zip(nodes, values):
        groups.setdefault(val, []).append(int(node))
    return sorted((tuple(sorted(g)) for g in groups.values()), key=lambda g: g[0])


def split_act_bias(net: Network, i: int) -> LayerPartition:
    """Maximal groups of layer ``i`` agreeing exactly on activation and bias."""
    acts, bias = net.A(i), net.b(i)
    nodes = sorted(range(len(acts)), key=lambda s: (acts[s].key, bias[s]))
    keys = [(acts[s].key, float(bias[s])) for s in nodes]
    return LayerPartition(i, _group_equal(nodes, keys))


def split_pre(net: Network, i: int, target_block, prev_block) -> list[tuple[int, ...]]:
    """Split ``target_block`` (layer ``i``) by exact pre-sum w.r.t. ``prev_block`` (layer ``i-1``)."""
    target = sorted(int(s) for s in target_block)
    W = net.W(i)
    sums = block_sums(W[:, target], [sorted(prev_block)])[0]
    return _group_equal(target, sums.tolist())


def _inconsistency(M: np.ndarray, blocks) -> np.ndarray:
    """Boolean ``(prev blocks, blocks)`` matrix: True where pre-sums within a block differ."""
    sizes = [len(b) for b in blocks]
    order = np.fromiter((s for b in blocks for s in b), dtype=np.intp, count=sum(sizes))
    starts = np.zeros(len(blocks), dtype=np.intp)
    np.cumsum(sizes[:-1], out=starts[1:])
    Mg = M[:, order]
    return np.maximum.reduceat(Mg, starts, axis=1) != np.minimum.reduceat(Mg, starts, axis=1)


def _pick(inc: np.ndarray, last: bool):
    cols = np.flatnonzero(inc.any(axis=0))
    if cols.size == 0:
        return None
    b = int(cols[-1] if last else cols[0])
    rows = np.flatnonzero(inc[:, b])
    return b, int(rows[-1] if last else rows[0])


def find_inconsistent_pair(net: Network, p: NetPartition):
    """First ``(layer, S', S)`` with ``S'`` in ``p[layer]`` inconsistent w.r.t. ``S`` in ``p[layer-1]``.

    Scan order is ascending layer, then block ``S'``, then block ``S``.
    Returns None when every pair is consistent.
    """
    p.check_sizes(net.layer_sizes)
    for i in range(1, net.k + 1):
        M = presum_matrix(net, i, p[i - 1])
        hit = _pick(_inconsistency(M, p[i].blocks), last=False)
        if hit is not None:
            b, r = hit
            return i, p[i].blocks[b], p[i - 1].blocks[r]
    return None


def minimize(net: Network, preserve_io: bool = True, schedule: str = "ascending") -> MinimizeResult:
    """Compute the coarsest NN-bisimulation of ``net`` and the quotient by it.

    ``preserve_io`` starts the input and output layers as singletons so the
    reduced network keeps the original interface; with ``preserve_io=False``
    the input layer starts as a single block, exactly as in MinNN.

    ``schedule`` picks which inconsistent pair to split next: ``"ascending"``
    takes the first in (layer, block, block) order, ``"descending"`` the
    last.  Both reach the same partition.
    """
    if schedule not in ("ascending", "descending"):
        raise ContractError(f"unknown schedule {schedule!r}")
    k = net.k
    sizes = net.layer_sizes
    steps: list[RefinementStep] = []

    layers: list[list[tuple[int, ...]]] = [[tuple(range(sizes[0]))]]
    if preserve_io and sizes[0] > 1:
        singles = tuple((s,) for s in range(sizes[0]))
        steps.append(RefinementStep("preserve_io", 0, layers[0][0], singles))
        layers[0] = list(singles)
    for i in range(1, k + 1):
        whole = tuple(range(sizes[i]))
        parts = list(split_act_bias(net, i).blocks)
        steps.append(RefinementStep("act_bias_split", i, whole, tuple(parts)))
        if preserve_io and i == k:
            for blk in [b for b in parts if len(b) > 1]:
                steps.append(RefinementStep("preserve_io", i, blk, tuple((s,) for s in blk)))
            parts = [(s,) for s in range(sizes[i])]
        layers.append(parts)

    # M[i][slot, t]: pre-sum into node t of layer i from the layer-(i-1) block
    # stored in ``slot``; a split rewrites only the slots of its pieces
    slots = [list(range(len(blocks))) for blocks in layers]
    M = [None]
    for i in range(1, k + 1):
        Mi = np.zeros((sizes[i - 1], sizes[i]))
        Mi[: len(layers[i - 1])] = block_sums(net.W(i), layers[i - 1])
        M.append(Mi)
    # bad[i][j] is False only if block j of layer i is known to be consistent
    bad = [None] + [list(_inconsistency(M[i][: len(layers[i - 1])], layers[i]).any(axis=0)) for i in range(1, k + 1)]
    last = schedule == "descending"
    scan = range(k, 0, -1) if last else range(1, k + 1)
    while True:
        found = None
        for i in scan:
            flagged = [j for j, f in enumerate(bad[i]) if f]
            for j in reversed(flagged) if last else flagged:
                target = layers[i][j]
                rows = M[i][np.ix_(slots[i - 1], target)]
                diff = np.flatnonzero((rows != rows[:, :1]).any(axis=1))
                if diff.size == 0:
                    bad[i][j] = False
                    continue
                found = (i, j, int(diff[-1] if last else diff[0]))
                break
            if found is not None:
                break
        if found is None:
            break
        i, bidx, ridx = found
        target, prev = layers[i][bidx], layers[i - 1][ridx]
        pieces = _group_equal(target, M[i][slots[i - 1][ridx], list(target)].tolist())
        steps.append(RefinementStep("presum_split", i, target, tuple(pieces), prev))
        piece_bad = []
        for pc in pieces:
            cols = M[i][np.ix_(slots[i - 1], pc)]
            piece_bad.append(bool((cols != cols[:, :1]).any()))
        new_slots = [slots[i][bidx]] + list(range(len(layers[i]), len(layers[i]) + len(pieces) - 1))
        entries = [(b, sl, f) for n, (b, sl, f) in enumerate(zip(layers[i], slots[i], bad[i])) if n != bidx]
        entries += zip(pieces, new_slots, piece_bad)
        entries.sort(key=lambda e: e[0][0])
        layers[i] = [e[0] for e in entries]
        slots[i] = [e[1] for e in entries]
        bad[i] = [e[2] for e in entries]
        if i < k:
            sums = block_sums(net.W(i + 1), pieces)
            M[i + 1][new_slots] = sums
            # kept rows are unchanged, so only the new rows can break consistency
            stale = _inconsistency(sums, layers[i + 1]).any(axis=0)
            bad[i + 1] = [f or bool(st) for f, st in zip(bad[i + 1], stale)]

    partition = NetPartition(LayerPartition(i, b) for i, b in enumerate(layers))
    trace = RefinementTrace(tuple(steps), partition)
    return MinimizeResult(partition, quotient(net, partition, checked=True), trace)


def maximality_check(net: Network, p: NetPartition, preserve_io: bool = False) -> bool:
    """True iff merging any two same-layer blocks of ``p`` breaks bisimilarity.

    With ``preserve_io`` only merges inside hidden layers are tried, matching
    ``minimize(net, preserve_io=True)``.
    """
    if not check_bisimulation(net, p).ok:
        raise ContractError("maximality_check needs a bisimulation")
    k = net.k
    for i in range(1, k) if preserve_io else range(k + 1):
        blocks = p[i].blocks
        for a in range(len(blocks)):
            for b in range(a + 1, len(blocks)):
                merged_blocks = [blk for j, blk in enumerate(blocks) if j not in (a, b)]
                merged_blocks.append(blocks[a] + blocks[b])
                cur = LayerPartition(i, merged_blocks)
                ok = True
                if i >= 1:
                    M = presum_matrix(net, i, p[i - 1])
                    ok = _layer_violation(net, i, p[i - 1], cur, M) is None
                if ok and i < k:
                    M = presum_matrix(net, i + 1, cur)
                    ok = _layer_violation(net, i + 1, cur, p[i + 1], M) is None
                if ok:
                    return False
    return True
