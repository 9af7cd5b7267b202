"""Small hand-built networks used by the examples, tests and CLI demos.

The JSON copies in ``nnbisim/data`` hold the same values.

``exact_example``: sizes 2-3-3-1, zero biases, ReLU everywhere.  Hidden
nodes 0 and 1 of layer 1 receive identical weights, and hidden nodes 0 and 1
of layer 2 both receive a total of 4 from the merged layer-1 block, so the coarsest
bisimulation (with fixed input/output) merges exactly those two pairs.

``delta_example``: sizes 1-3-1 with incoming weights 0.8, 1.0 and 1.2 into
three ReLU nodes, zero biases and unit outgoing weights.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .network import RELU, Network
from .partition import NetPartition

__all__ = [
    "exact_example_network",
    "exact_example_partition",
    "delta_example_network",
    "delta_example_partition",
    "delta_example_merged_all",
    "data_text",
]


def exact_example_network() -> Network:
    W1 = np.array([[1.0, 1.0, 2.0], [2.0, 2.0, 1.0]])
    W2 = np.array([[1.0, 2.0, 1.0], [3.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
    W3 = np.array([[1.0], [1.0], [1.0]])
    return Network([W1, W2, W3], [np.zeros(3), np.zeros(3), np.zeros(1)], [[RELU] * 3, [RELU] * 3, [RELU]])


def exact_example_partition() -> NetPartition:
    return NetPartition([[[0], [1]], [[0, 1], [2]], [[0, 1], [2]], [[0]]])


def delta_example_network() -> Network:
    W1 = np.array([[0.8, 1.0, 1.2]])
    W2 = np.array([[1.0], [1.0], [1.0]])
    return Network([W1, W2], [np.zeros(3), np.zeros(1)], [[RELU] * 3, [RELU]])


def delta_example_partition() -> NetPartition:
    """Merges the hidden nodes with weights 0.8 and 1.0."""
    return NetPartition([[[0]], [[0, 1], [2]], [[0]]])


def delta_example_merged_all() -> NetPartition:
    return NetPartition([[[0]], [[0, 1, 2]], [[0]]])


def data_text(name: str) -> str:
    """Text of a bundled document, e.g. ``data_text("exact_example_model.json")``."""
    return resources.files("nnbisim").joinpath("data", name).read_text(encoding="utf-8")
