"""Exact NN-bisimulation: checking, quotient networks and valuation abstraction.

A partition is an NN-bisimulation when, in every layer ``i >= 1``, nodes of
one block share activation and bias exactly and have exactly equal pre-sums
with respect to every block of layer ``i-1``.  Quotienting by such a
partition yields a network with one node per block that computes the same
function on consistent inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, PreconditionError
from .network import Network, Valuation, presum_matrix, row_chunks
from .partition import LayerPartition, NetPartition, is_consistent

__all__ = [
    "Witness",
    "BisimReport",
    "check_bisimulation",
    "quotient",
    "abstract_valuation",
    "activation_codes",
]


@dataclass(frozen=True)
class Witness:
    """A concrete violation: nodes ``nodes`` of block ``block`` in ``layer`` disagree.

    ``prev_block`` is the previous-layer block the pre-sums were taken over
    (``None`` for activation and bias violations).  ``gap`` is the absolute
    difference of the offending quantity (``inf`` for an activation mismatch).
    """

    layer: int
    block: tuple[int, ...]
    prev_block: tuple[int, ...] | None
    nodes: tuple[int, int]
    condition: str
    gap: float

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "block": list(self.block),
            "prev_block": None if self.prev_block is None else list(self.prev_block),
            "nodes": list(self.nodes),
            "condition": self.condition,
            "gap": None if not np.isfinite(self.gap) else self.gap,
        }


@dataclass(frozen=True)
class BisimReport:
    ok: bool
    witness: Witness | None = None

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "witness": None if self.witness is None else self.witness.to_dict()}


def activation_codes(net: Network, i: int) -> np.ndarray:
    """Integer code per node of layer ``i``; equal codes iff equal activations."""
    keys = sorted({f.key for f in net.A(i)})
    index = {key: c for c, key in enumerate(keys)}
    return np.array([index[f.key] for f in net.A(i)], dtype=np.intp)


def _check_shapes(net: Network, p: NetPartition):
    if not isinstance(p, NetPartition):
        raise ContractError("expected a NetPartition")
    p.check_sizes(net.layer_sizes)


def _layer_violation(net: Network, i: int, prev: LayerPartition, cur: LayerPartition, M: np.ndarray):
    """First exact violation in layer ``i`` in scan order, or None."""
    order, starts = cur.order, cur.starts
    sizes = np.diff(np.append(starts, len(order)))
    rep_cols = np.repeat(order[starts], sizes)
    codes = activation_codes(net, i)[order]
    bias = net.b(i)[order]
    bad_act = codes != codes[np.repeat(starts, sizes)]
    bad_bias = bias != bias[np.repeat(starts, sizes)]
    bad_pre = np.zeros(len(order), dtype=bool)
    for _, rows in row_chunks(M):
        bad_pre |= (rows[:, order] != rows[:, rep_cols]).any(axis=0)
    bad_node = bad_act | bad_bias | bad_pre
    if not bad_node.any():
        return None
    pos = np.flatnonzero(bad_node)
    block_idx = int(np.searchsorted(starts, pos[0], side="right") - 1)
    block = cur.blocks[block_idx]
    lo, hi = starts[block_idx], starts[block_idx] + sizes[block_idx]
    rep = block[0]
    for cond, flags in (("activation", bad_act), ("bias", bad_bias)):
        hit = np.flatnonzero(flags[lo:hi])
        if hit.size:
            other = block[hit[0]]
            gap = np.inf if cond == "activation" else abs(float(net.b(i)[other] - net.b(i)[rep]))
            return Witness(i, block, None, (rep, other), cond, gap)
    sub = M[:, list(block)] != M[:, [rep]]
    r = int(np.flatnonzero(sub.any(axis=1))[0])
    other = block[int(np.flatnonzero(sub[r])[0])]
    gap = abs(float(M[r, other] - M[r, rep]))
    return Witness(i, block, prev.blocks[r], (rep, other), "presum", gap)


def check_bisimulation(net: Network, p: NetPartition) -> BisimReport:
    """Decide whether ``p`` is an NN-bisimulation of ``net``.

    One pass over the edges per layer.  On failure the report carries the
    first violation in scan order: ascending layer, then block, then
    activation / bias / pre-sum (by previous-layer block).
    """
    _check_shapes(net, p)
    for i in range(1, net.k + 1):
        M = presum_matrix(net, i, p[i - 1])
        w = _layer_violation(net, i, p[i - 1], p[i], M)
        if w is not None:
            return BisimReport(False, w)
    return BisimReport(True)


def quotient(net: Network, p: NetPartition, *, checked: bool = False) -> Network:
    """The reduced network whose layer-``i`` nodes are the blocks of ``p[i]``.

    The weight from block ``B`` to block ``B'`` is the pre-sum of ``B`` into
    the smallest member of ``B'``; bias and activation come from that member.
    Raises :class:`PreconditionError` unless ``p`` is a bisimulation (pass
    ``checked=True`` to skip the re-check when the caller already did it).
    """
    _check_shapes(net, p)
    if not checked:
        report = check_bisimulation(net, p)
        if not report.ok:
            raise PreconditionError(f"partition is not an NN-bisimulation: {report.witness}", report)
    weights, biases, acts = [], [], []
    for i in range(1, net.k + 1):
        reps = p[i].representatives
        M = presum_matrix(net, i, p[i - 1])
        weights.append(M[:, reps])
        biases.append(net.b(i)[reps])
        acts.append([net.A(i)[r] for r in reps])
    return Network(weights, biases, acts)


def abstract_valuation(v: Valuation, p: LayerPartition, *, tol: float = 0.0) -> Valuation:
    """Map a consistent node valuation to its block valuation (canonical block order).

    With the default ``tol=0`` the valuation must be exactly consistent.  A
    positive ``tol`` accepts blocks whose spread is at most ``tol`` (useful
    when values came from floating-point evaluation); the smallest member's
    value is then used.
    """
    if tol < 0:
        raise ContractError("tol must be non-negative")
    if tol == 0.0:
        ok = is_consistent(v, p)
    else:
        if v.layer != p.layer or len(v.values) != p.size:
            raise ContractError("valuation and partition do not match")
        grouped = v.values[p.order]
        ok = bool(((np.maximum.reduceat(grouped, p.starts) - np.minimum.reduceat(grouped, p.starts)) <= tol).all())
    if not ok:
        raise PreconditionError(f"valuation of layer {v.layer} is not consistent with the partition")
    return Valuation(v.layer, v.values[p.representatives])
