"""Independent slow reference implementations used as test oracles.

Everything here is written with plain Python loops straight from the
definitions, sharing no code with the package beyond the data classes.
"""

import itertools
import math

import numpy as np

from nnbisim.network import ActivationKind


def act_scalar(f: ActivationKind, x: float) -> float:
    tag = f.tag
    if tag == "relu":
        return x if x > 0 else 0.0
    if tag == "leaky_relu":
        return x if x >= 0 else f.slope * x
    if tag == "tanh":
        return math.tanh(x)
    if tag == "sigmoid":
        return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))
    if tag == "softplus":
        return math.log1p(math.exp(-abs(x))) + max(x, 0.0)
    if tag == "arctan":
        return math.atan(x)
    if tag == "softsign":
        return x / (1.0 + abs(x))
    return x


def presum(net, i, block, t):
    total = 0.0
    for s in sorted(block):
        total += float(net.weights[i - 1][s][t])
    return total


def eval_scalar(net, x):
    v = [float(a) for a in x]
    for i in range(1, net.k + 1):
        W, b, A = net.weights[i - 1], net.biases[i - 1], net.activations[i - 1]
        out = []
        for t in range(len(b)):
            z = 0.0
            for s in range(len(v)):
                z += v[s] * float(W[s][t])
            out.append(act_scalar(A[t], z + float(b[t])))
        v = out
    return v


def is_bisim(net, blocks_per_layer) -> bool:
    """Pairwise check of the definition; ``blocks_per_layer`` is a list of lists of blocks."""
    for i in range(1, net.k + 1):
        for blk in blocks_per_layer[i]:
            for t1, t2 in itertools.combinations(blk, 2):
                if net.activations[i - 1][t1].key != net.activations[i - 1][t2].key:
                    return False
                if net.biases[i - 1][t1] != net.biases[i - 1][t2]:
                    return False
                for S in blocks_per_layer[i - 1]:
                    if presum(net, i, S, t1) != presum(net, i, S, t2):
                        return False
    return True


def max_spreads(net, blocks_per_layer):
    """(activation mismatch?, max bias spread, max pre-sum spread) by brute force."""
    mismatch, bias_gap, pre_gap = False, 0.0, 0.0
    for i in range(1, net.k + 1):
        for blk in blocks_per_layer[i]:
            for t1, t2 in itertools.combinations(blk, 2):
                mismatch |= net.activations[i - 1][t1].key != net.activations[i - 1][t2].key
                bias_gap = max(bias_gap, abs(net.biases[i - 1][t1] - net.biases[i - 1][t2]))
                for S in blocks_per_layer[i - 1]:
                    pre_gap = max(pre_gap, abs(presum(net, i, S, t1) - presum(net, i, S, t2)))
    return mismatch, bias_gap, pre_gap


def set_partitions(n):
    """All partitions of ``range(n)`` as lists of lists (restricted growth strings)."""
    if n == 0:
        yield []
        return

    def rec(i, blocks):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def all_bisimulations(net, preserve_io: bool):
    """Every NN-bisimulation of a small network, by layer-wise DFS with pruning.

    Layer ``i``'s partition is only constrained by layers ``i-1`` and ``i``, so
    partial assignments are checked as soon as a layer is fixed.
    """
    sizes = net.layer_sizes
    k = net.k

    def choices(i):
        if preserve_io and i in (0, k):
            return [[[s] for s in range(sizes[i])]]
        return list(set_partitions(sizes[i]))

    def ok_layer(i, prev, cur):
        for blk in cur:
            for t1, t2 in itertools.combinations(blk, 2):
                if net.activations[i - 1][t1].key != net.activations[i - 1][t2].key:
                    return False
                if net.biases[i - 1][t1] != net.biases[i - 1][t2]:
                    return False
                for S in prev:
                    if presum(net, i, S, t1) != presum(net, i, S, t2):
                        return False
        return True

    def rec(i, acc):
        if i > k:
            yield [list(map(list, layer)) for layer in acc]
            return
        for cur in choices(i):
            if ok_layer(i, acc[-1], cur):
                acc.append(cur)
                yield from rec(i + 1, acc)
                acc.pop()

    for first in choices(0):
        yield from rec(1, [first])


def finer(p_blocks, q_blocks) -> bool:
    for pl, ql in zip(p_blocks, q_blocks):
        label = {s: j for j, b in enumerate(ql) for s in b}
        for b in pl:
            if len({label[s] for s in b}) > 1:
                return False
    return True


def consistent_input(rng, p0, vinf=1.0):
    """A random input assigning one value per block of ``p0``."""
    vals = rng.uniform(-vinf, vinf, size=len(p0))
    return np.asarray(vals[p0.labels], dtype=np.float64)
