"""Approximate (delta) NN-bisimulation and its output-deviation bounds.

A delta-bisimulation relaxes exact bisimulation: same-block nodes still share
their activation but biases and pre-sums may differ by up to ``delta``.  The
quotient is no longer unique (each weight/bias may come from any member), so
quotients are built under a named :class:`RepresentativePolicy`; every policy
yields a member of the quotient set.  :func:`global_error_bound` bounds how
far any such member's outputs can drift from the original network's.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .bisim import Witness, activation_codes
from .errors import ContractError, PreconditionError
from .network import (
    Network,
    Valuation,
    interval_bounds,
    layer_lipschitz,
    network_lipschitz_bound,
    presum_matrix,
    row_chunks,
    weight_inf_norm,
)
from .partition import LayerPartition, NetPartition, is_eps_consistent

__all__ = [
    "DeltaReport",
    "RepresentativePolicy",
    "POLICY_NAMES",
    "LayerBound",
    "ErrorBound",
    "check_delta_bisimulation",
    "quotient_delta",
    "enumerate_quotients",
    "eps_abstraction_contains",
    "two_eps_consistency",
    "one_step_constants",
    "one_step_error",
    "closed_form_bound",
    "global_error_bound",
    "greedy_delta_partition",
]

POLICY_NAMES = ("min_index", "max_index", "per_value_min", "per_value_max", "explicit")


@dataclass(frozen=True)
class DeltaReport:
    ok: bool
    max_bias_gap: float
    max_presum_gap: float
    witness: Witness | None = None

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_bias_gap": self.max_bias_gap,
            "max_presum_gap": self.max_presum_gap,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


@dataclass(frozen=True)
class RepresentativePolicy:
    """Which block member supplies each weight and bias of a delta-quotient.

    ``min_index``/``max_index`` use one member per block for everything.
    ``per_value_min``/``per_value_max`` pick, independently for every weight
    entry and bias, the member with the smallest/largest value.
    ``explicit`` takes ``choice[(layer, block)]``; blocks missing from the
    map must be singletons.
    """

    tag: str = "min_index"
    choice: Mapping[tuple[int, tuple[int, ...]], int] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tag not in POLICY_NAMES:
            raise ContractError(f"unknown policy {self.tag!r}; expected one of {POLICY_NAMES}")
        if self.tag == "explicit":
            if self.choice is None:
                raise ContractError("explicit policy needs a choice map")
            for (layer, block), member in self.choice.items():
                if member not in block:
                    raise ContractError(f"explicit choice {member} is not in block {block} of layer {layer}")
        elif self.choice is not None:
            raise ContractError(f"policy {self.tag} takes no choice map")

    @classmethod
    def explicit(cls, choice: Mapping[tuple[int, tuple[int, ...]], int]) -> "RepresentativePolicy":
        return cls("explicit", {(int(l), tuple(b)): int(m) for (l, b), m in choice.items()})

    def member(self, layer: int, block: tuple[int, ...]) -> int:
        if self.tag == "max_index":
            return block[-1]
        if self.tag == "explicit":
            if (layer, block) in self.choice:
                return self.choice[(layer, block)]
            if len(block) == 1:
                return block[0]
            raise ContractError(f"explicit policy has no member for block {block} of layer {layer}")
        return block[0]

    def __str__(self):
        return self.tag


def _grouped_spreads(values: np.ndarray, p: LayerPartition) -> np.ndarray:
    """max - min per block along the last axis."""
    g = values[..., p.order]
    return np.maximum.reduceat(g, p.starts, axis=-1) - np.minimum.reduceat(g, p.starts, axis=-1)


def _argext(values: np.ndarray, block: tuple[int, ...]) -> tuple[int, int]:
    vals = values[list(block)]
    return block[int(np.argmin(vals))], block[int(np.argmax(vals))]


def check_delta_bisimulation(net: Network, p: NetPartition, delta: float) -> DeltaReport:
    """Decide whether ``p`` is a ``delta``-bisimulation of ``net``.

    Activations must match exactly within each block; bias spread and the
    spread of every pre-sum (per previous-layer block) must be ``<= delta``.
    The largest gaps are reported even when the check passes.
    """
    if not delta >= 0:
        raise ContractError(f"delta must be non-negative, got {delta}")
    p.check_sizes(net.layer_sizes)
    max_bias = 0.0
    max_pre = 0.0
    witness = None
    for i in range(1, net.k + 1):
        cur, prev = p[i], p[i - 1]
        codes = activation_codes(net, i).astype(np.float64)
        act_spread = _grouped_spreads(codes, cur)
        bias_spread = _grouped_spreads(net.b(i), cur)
        M = presum_matrix(net, i, prev)
        # first previous-layer block whose pre-sum spread exceeds delta, per block
        first_bad = np.full(len(cur), -1, dtype=np.intp)
        for r0, rows in row_chunks(M):
            spread = _grouped_spreads(rows, cur)
            max_pre = max(max_pre, float(spread.max()))
            over = spread > delta
            hit = over.any(axis=0) & (first_bad < 0)
            if hit.any():
                first_bad[hit] = r0 + over[:, hit].argmax(axis=0)
        max_bias = max(max_bias, float(bias_spread.max()))
        if witness is not None:
            continue
        bad = (act_spread > 0) | (bias_spread > delta) | (first_bad >= 0)
        if not bad.any():
            continue
        j = int(np.flatnonzero(bad)[0])
        block = cur.blocks[j]
        if act_spread[j] > 0:
            codes_b = codes[list(block)]
            other = block[int(np.flatnonzero(codes_b != codes_b[0])[0])]
            witness = Witness(i, block, None, (block[0], other), "activation", float("inf"))
        elif bias_spread[j] > delta:
            witness = Witness(i, block, None, _argext(net.b(i), block), "bias", float(bias_spread[j]))
        else:
            r = int(first_bad[j])
            lo, hi = _argext(M[r], block)
            witness = Witness(i, block, prev.blocks[r], (lo, hi), "presum", float(M[r, hi] - M[r, lo]))
    return DeltaReport(witness is None, max_bias, max_pre, witness)


def _require_delta(net, p, delta):
    report = check_delta_bisimulation(net, p, delta)
    if not report.ok:
        raise PreconditionError(f"partition is not a {delta}-bisimulation: {report.witness}", report)
    return report


def quotient_delta(
    net: Network,
    p: NetPartition,
    delta: float,
    policy: RepresentativePolicy | str = "min_index",
    *,
    checked: bool = False,
) -> Network:
    """One member of the delta-quotient set, chosen by ``policy``."""
    if isinstance(policy, str):
        policy = RepresentativePolicy(policy)
    if not checked:
        _require_delta(net, p, delta)
    weights, biases, acts = [], [], []
    for i in range(1, net.k + 1):
        cur = p[i]
        M = presum_matrix(net, i, p[i - 1])
        A, b = net.A(i), net.b(i)
        if policy.tag in ("per_value_min", "per_value_max"):
            reduce = np.minimum if policy.tag == "per_value_min" else np.maximum
            weights.append(reduce.reduceat(M[:, cur.order], cur.starts, axis=1))
            biases.append(reduce.reduceat(b[cur.order], cur.starts))
            acts.append([A[r] for r in cur.representatives])
        else:
            reps = [policy.member(i, blk) for blk in cur.blocks]
            weights.append(M[:, reps])
            biases.append(b[reps])
            acts.append([A[r] for r in reps])
    return Network(weights, biases, acts)


def enumerate_quotients(net: Network, p: NetPartition, delta: float, limit: int = 4096) -> Iterator[Network]:
    """Every distinct network in the delta-quotient set.

    Each weight entry and bias independently ranges over the distinct values
    its block's members provide.  Raises :class:`ContractError` if the set is
    larger than ``limit``.
    """
    _require_delta(net, p, delta)
    slots = []  # (layer, kind, row, block index, candidate values)
    for i in range(1, net.k + 1):
        M = presum_matrix(net, i, p[i - 1])
        for j, blk in enumerate(p[i].blocks):
            for r in range(M.shape[0]):
                slots.append((i, "w", r, j, sorted(set(M[r, list(blk)].tolist()))))
            slots.append((i, "b", None, j, sorted(set(net.b(i)[list(blk)].tolist()))))
    total = 1
    for s in slots:
        total *= len(s[4])
    if total > limit:
        raise ContractError(f"quotient set has {total} members, more than limit={limit}")
    base = quotient_delta(net, p, delta, "min_index", checked=True)
    for combo in itertools.product(*(s[4] for s in slots)):
        ws = [w.copy() for w in base.weights]
        bs = [b.copy() for b in base.biases]
        for (i, kind, r, j, _), val in zip(slots, combo):
            if kind == "w":
                ws[i - 1][r, j] = val
            else:
                bs[i - 1][j] = val
        yield Network(ws, bs, base.activations)


def eps_abstraction_contains(v: Valuation, p: LayerPartition, eps: float, vhat: Valuation) -> bool:
    """True iff ``vhat`` (block values) is within ``eps`` of every member's value in ``v``."""
    if v.layer != p.layer or len(v.values) != p.size:
        raise ContractError("valuation and partition do not match")
    if len(vhat.values) != len(p):
        raise ContractError(f"block valuation has {len(vhat.values)} entries for {len(p)} blocks")
    return bool((np.abs(vhat.values[p.labels] - v.values) <= eps).all())


def two_eps_consistency(v: Valuation, p: LayerPartition, eps: float) -> bool:
    """Whether ``v`` is ``2*eps``-consistent, as implied by a non-empty eps-abstraction."""
    return is_eps_consistent(v, p, 2.0 * eps)


def one_step_constants(net: Network, p: NetPartition, i: int, delta: float, v_inf: float) -> tuple[float, float]:
    """``(a_i, b_i)`` of the one-layer deviation bound ``a_i * eps + b_i``.

    ``a_i = L(A_i) |S_{i-1}| ||W_i||_inf`` and
    ``b_i = L(A_i) (|P_{i-1}| v_inf + 1) delta``.
    """
    if delta < 0 or v_inf < 0:
        raise ContractError("delta and v_inf must be non-negative")
    L = layer_lipschitz(net, i)
    a_i = L * net.layer_sizes[i - 1] * weight_inf_norm(net, i)
    b_i = L * (len(p[i - 1]) * v_inf + 1.0) * delta
    return a_i, b_i


def one_step_error(net: Network, p: NetPartition, i: int, eps: float, delta: float, v_inf: float) -> float:
    """Bound on ``|vhat'(block) - v'(node)|`` after layer ``i``.

    Applies when ``v`` is eps-consistent with ``||v||_inf <= v_inf`` and
    ``vhat`` is an eps-abstraction of it.
    """
    if eps < 0:
        raise ContractError("eps must be non-negative")
    a_i, b_i = one_step_constants(net, p, i, delta, v_inf)
    return a_i * eps + b_i


@dataclass(frozen=True)
class LayerBound:
    a: float
    b: float
    eps_prime: float
    eps: float


@dataclass(frozen=True)
class ErrorBound:
    """Trace of the deviation recurrence ``eps'_i = a_i eps_{i-1} + b_i``, ``eps_i = 2 eps'_i``.

    ``per_layer[i-1]`` is layer ``i``.  In ``"lipschitz"`` mode every layer
    uses the uniform constants ``a`` and ``b``; in ``"interval"`` mode the
    constants are per layer and ``a``/``b`` hold their maxima.
    """

    a: float
    b: float
    per_layer: tuple[LayerBound, ...]
    eps_final: float
    eps0: float = 0.0
    mode: str = "lipschitz"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "a": self.a,
            "b": self.b,
            "eps0": self.eps0,
            "per_layer": [
                {"layer": n, "a": s.a, "b": s.b, "eps_prime": s.eps_prime, "eps": s.eps}
                for n, s in enumerate(self.per_layer, start=1)
            ],
            "eps_final": self.eps_final,
        }


def closed_form_bound(a: float, b: float, k: int) -> float:
    """``eps'_k`` of the uniform recurrence from ``eps'_0 = 0``: ``((2a)^k - 1) b / (2a - 1)``."""
    two_a = 2.0 * a
    if two_a == 1.0:
        return k * b
    return (two_a**k - 1.0) * b / (two_a - 1.0)


def global_error_bound(
    net: Network,
    p: NetPartition,
    delta: float,
    eps0: float = 0.0,
    v0_inf: float = 1.0,
    *,
    mode: str = "lipschitz",
    checked: bool = False,
) -> ErrorBound:
    """Bound the output deviation of every delta-quotient member from ``net``.

    For inputs ``v`` with ``||v||_inf <= v0_inf`` that are ``eps0``-consistent,
    and any ``vhat`` within ``eps0`` of ``v`` blockwise, the quotient's output
    on ``vhat`` is within ``eps_final`` of every member of the original output.

    ``mode="lipschitz"`` uses uniform constants with per-layer valuation norms
    bounded by ``max(1, L(N)) * v0_inf``.  ``mode="interval"`` bounds each
    layer's norm by interval propagation from the input box and accounts for
    the abstraction's own drift; it is sound for biased networks where the
    Lipschitz norm estimate is not.
    """
    if delta < 0 or eps0 < 0 or v0_inf < 0:
        raise ContractError("delta, eps0 and v0_inf must be non-negative")
    if mode not in ("lipschitz", "interval"):
        raise ContractError(f"unknown mode {mode!r}")
    p.check_sizes(net.layer_sizes)
    if not checked:
        _require_delta(net, p, delta)
    k = net.k
    steps = []
    eps_prime = eps = float(eps0)
    if mode == "lipschitz":
        L_act = max(layer_lipschitz(net, i) for i in range(1, k + 1))
        width = max(net.layer_sizes)
        w_inf = max(weight_inf_norm(net, i) for i in range(1, k + 1))
        blocks = max(p.block_counts)
        # the identity prefix (input layer) is 1-Lipschitz
        L_net = max(1.0, network_lipschitz_bound(net))
        a = L_act * width * w_inf
        b = L_act * (blocks * L_net * v0_inf + 1.0) * delta
        for _ in range(k):
            eps_prime = a * eps + b
            eps = 2.0 * eps_prime
            steps.append(LayerBound(a, b, eps_prime, eps))
    else:
        bounds = interval_bounds(net, -v0_inf, v0_inf)
        for i in range(1, k + 1):
            lo, hi = bounds[i - 1]
            radius = float(max(np.abs(lo).max(), np.abs(hi).max()))
            a_i, b_i = one_step_constants(net, p, i, delta, radius + eps_prime)
            eps_prime = a_i * eps + b_i
            eps = 2.0 * eps_prime
            steps.append(LayerBound(a_i, b_i, eps_prime, eps))
        a = max(s.a for s in steps)
        b = max(s.b for s in steps)
    return ErrorBound(a, b, tuple(steps), steps[-1].eps_prime, float(eps0), mode)


def greedy_delta_partition(net: Network, delta: float, preserve_io: bool = True) -> NetPartition:
    """A delta-bisimulation found by one greedy forward pass (no optimality claim).

    Layers are processed in order; within a layer each node, in ascending
    order, joins the first existing block it stays compatible with
    (same activation, bias and pre-sum spreads ``<= delta`` w.r.t. the
    already fixed previous layer), else opens a new block.
    """
    if not delta >= 0:
        raise ContractError(f"delta must be non-negative, got {delta}")
    sizes = net.layer_sizes
    k = net.k
    layers = [LayerPartition(0, [[s] for s in range(sizes[0])] if preserve_io else [range(sizes[0])])]
    for i in range(1, k + 1):
        if preserve_io and i == k:
            layers.append(LayerPartition(i, [[s] for s in range(sizes[i])]))
            continue
        M = presum_matrix(net, i, layers[i - 1])
        codes = activation_codes(net, i)
        bias = net.b(i)
        members: list[list[int]] = []
        code_of, bmin, bmax, pmin, pmax = [], [], [], [], []
        for t in range(sizes[i]):
            col = M[:, t]
            for j in range(len(members)):
                if code_of[j] != codes[t]:
                    continue
                if max(bmax[j], bias[t]) - min(bmin[j], bias[t]) > delta:
                    continue
                lo, hi = np.minimum(pmin[j], col), np.maximum(pmax[j], col)
                if ((hi - lo) > delta).any():
                    continue
                members[j].append(t)
                bmin[j], bmax[j] = min(bmin[j], bias[t]), max(bmax[j], bias[t])
                pmin[j], pmax[j] = lo, hi
                break
            else:
                members.append([t])
                code_of.append(codes[t])
                bmin.append(bias[t])
                bmax.append(bias[t])
                pmin.append(col.copy())
                pmax.append(col.copy())
        layers.append(LayerPartition(i, members))
    return NetPartition(layers)
