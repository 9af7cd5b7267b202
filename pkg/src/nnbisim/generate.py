"""Deterministic random networks, including ones with planted bisimulations.

Every generator is a pure function of its arguments and ``seed``
(``numpy.random.default_rng``).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ValidationError
from .network import IDENTITY, RELU, SIGMOID, TANH, ActivationKind, Network, leaky_relu
from .partition import LayerPartition, NetPartition

__all__ = ["MIXED_ACTIVATIONS", "random_network", "generate_planted"]

MIXED_ACTIVATIONS = (RELU, TANH, SIGMOID, leaky_relu(0.1), IDENTITY)

# planted weights are multiples of 2**-10 so permuted sums stay exact
_GRID = 1024


def _activation_pool(activations) -> tuple[ActivationKind, ...]:
    if activations == "mixed":
        return MIXED_ACTIVATIONS
    if activations == "relu":
        return (RELU,)
    if isinstance(activations, ActivationKind):
        return (activations,)
    pool = tuple(activations)
    if not pool or not all(isinstance(f, ActivationKind) for f in pool):
        raise ValidationError("activations must be 'mixed', 'relu' or ActivationKind values")
    return pool


def _check_sizes(sizes):
    sizes = [int(n) for n in sizes]
    if len(sizes) < 2 or any(n < 1 for n in sizes):
        raise ValidationError("need at least two layers of positive size")
    return sizes


def random_network(
    sizes: Sequence[int],
    seed: int,
    *,
    activations="mixed",
    low: float = -1.0,
    high: float = 1.0,
    decimals: int | None = None,
    bias: bool = True,
) -> Network:
    """Uniform weights and biases in ``[low, high]``.

    ``decimals`` rounds every value to that many decimal places, which makes
    equal biases and pre-sums (and hence non-trivial bisimulations) likely.
    """
    sizes = _check_sizes(sizes)
    rng = np.random.default_rng(seed)
    pool = _activation_pool(activations)
    weights, biases, acts = [], [], []
    for i in range(1, len(sizes)):
        W = rng.uniform(low, high, size=(sizes[i - 1], sizes[i]))
        b = rng.uniform(low, high, size=sizes[i]) if bias else np.zeros(sizes[i])
        if decimals is not None:
            W, b = np.round(W, decimals) + 0.0, np.round(b, decimals) + 0.0
        weights.append(W)
        biases.append(b)
        acts.append([pool[j] for j in rng.integers(len(pool), size=sizes[i])])
    return Network(weights, biases, acts)


def _planted_blocks(rng, layer: int, size: int, groups: list[int]) -> LayerPartition:
    if sum(groups) > size:
        raise ValidationError(f"planted groups of sizes {groups} do not fit {size} nodes", layer)
    perm = rng.permutation(size)
    blocks, pos = [], 0
    for g in groups:
        blocks.append(perm[pos:pos + g].tolist())
        pos += g
    blocks.extend([int(s)] for s in perm[pos:])
    return LayerPartition(layer, blocks)


def generate_planted(
    layer_sizes: Sequence[int],
    seed: int,
    twins: Sequence[tuple[int, int]] = (),
    *,
    delta: float = 0.0,
    activations="mixed",
) -> tuple[Network, NetPartition]:
    """A random network together with a bisimulation planted into it.

    ``twins`` lists ``(layer, group_size)`` pairs; each adds one group of
    that many nodes at random positions of ``layer``.  Group members share
    activation and bias, and each member's incoming weights from every
    previous-layer block are a permutation of the first member's, so their
    pre-sums agree exactly.  Values lie on a 1/1024 grid in ``[-1, 1]``.

    With ``delta > 0`` every group member's bias and, for each previous
    block, one incoming weight are perturbed by less than ``delta / 2``, so
    the planted partition is a ``delta``-bisimulation but no longer exact.
    """
    sizes = _check_sizes(layer_sizes)
    if not delta >= 0:
        raise ValidationError(f"delta must be non-negative, got {delta}")
    k = len(sizes) - 1
    groups: dict[int, list[int]] = {}
    for layer, g in twins:
        if not 0 <= layer <= k:
            raise ValidationError(f"no layer {layer} in a network with {k + 1} layers")
        if g < 1:
            raise ValidationError(f"group size must be positive, got {g}", layer)
        groups.setdefault(int(layer), []).append(int(g))
    rng = np.random.default_rng(seed)
    pool = _activation_pool(activations)
    parts = [_planted_blocks(rng, i, sizes[i], groups.get(i, [])) for i in range(k + 1)]

    def grid(shape):
        return rng.integers(-_GRID, _GRID + 1, size=shape) / _GRID

    weights, biases, acts = [], [], []
    for i in range(1, k + 1):
        prev, cur = parts[i - 1], parts[i]
        W = grid((sizes[i - 1], sizes[i]))
        b = grid(sizes[i])
        act = [pool[j] for j in rng.integers(len(pool), size=sizes[i])]
        for blk in cur.blocks:
            rep = blk[0]
            for t in blk[1:]:
                b[t] = b[rep]
                act[t] = act[rep]
                for S in prev.blocks:
                    rows = list(S)
                    W[rows, t] = W[rng.permutation(rows), rep]
        if delta > 0:
            h = 0.49 * delta
            for blk in cur.blocks:
                if len(blk) < 2:
                    continue
                for t in blk:
                    b[t] += rng.uniform(-h, h)
                    for S in prev.blocks:
                        W[S[0], t] += rng.uniform(-h, h)
        weights.append(W)
        biases.append(b)
        acts.append(act)
    return Network(weights, biases, acts), NetPartition(parts)
