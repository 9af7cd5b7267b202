"""JSON documents for networks, partitions and reports.

Floats are written with Python's shortest round-trip ``repr``, so
``load_model(save_model(net))`` reproduces every weight and bias bit for bit.
The schemas are described in ``docs/formats.md``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import DocumentError, ValidationError
from .generate import generate_planted, random_network
from .network import ActivationKind, Network
from .partition import LayerPartition, NetPartition

__all__ = [
    "FORMAT_VERSION",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "partition_to_dict",
    "partition_from_dict",
    "save_partition",
    "load_partition",
    "read_model",
    "read_partition",
    "write_text",
    "dumps",
    "generate_planted",
    "random_network",
]

FORMAT_VERSION = "1"


def dumps(obj: Any) -> str:
    """Deterministic JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _parse(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(f"malformed document: {e.msg}", e.lineno, e.colno) from None


def _activation_to_json(f: ActivationKind):
    if f.slope is None:
        return f.tag
    return {"tag": f.tag, "slope": f.slope}


def _activation_from_json(obj, layer: int) -> ActivationKind:
    try:
        if isinstance(obj, str):
            return ActivationKind(obj)
        if isinstance(obj, dict) and set(obj) <= {"tag", "slope"} and "tag" in obj:
            return ActivationKind(obj["tag"], obj.get("slope"))
    except ValueError as e:
        raise ValidationError(str(e), layer) from None
    raise ValidationError(f"bad activation descriptor {obj!r}", layer)


def model_to_dict(net: Network, metadata: dict | None = None) -> dict:
    layers = []
    for i in range(1, net.k + 1):
        layers.append(
            {
                "weights": net.W(i).tolist(),
                "biases": net.b(i).tolist(),
                "activations": [_activation_to_json(f) for f in net.A(i)],
            }
        )
    doc = {"format_version": FORMAT_VERSION, "layer_sizes": list(net.layer_sizes), "layers": layers}
    if metadata:
        doc["metadata"] = metadata
    return doc


def _require(cond, message, layer=None):
    if not cond:
        raise ValidationError(message, layer)


def _numeric(obj, shape, what, layer) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must be numeric", layer) from None
    if arr.shape != shape:
        raise ValidationError(f"{what} has shape {list(arr.shape)}, expected {list(shape)}", layer)
    return arr


def model_from_dict(doc: Any) -> Network:
    _require(isinstance(doc, dict), "model document must be an object")
    version = doc.get("format_version")
    _require(version == FORMAT_VERSION, f"unsupported format_version {version!r}")
    sizes = doc.get("layer_sizes")
    _require(
        isinstance(sizes, list) and len(sizes) >= 2 and all(isinstance(n, int) and n >= 1 for n in sizes),
        "layer_sizes must list at least two positive integers",
    )
    layers = doc.get("layers")
    _require(isinstance(layers, list), "layers must be a list")
    _require(len(layers) == len(sizes) - 1, f"{len(layers)} layers for {len(sizes)} layer sizes")
    weights, biases, acts = [], [], []
    for i, layer in enumerate(layers, start=1):
        _require(isinstance(layer, dict), "layer entry must be an object", i)
        for key in ("weights", "biases", "activations"):
            _require(key in layer, f"missing {key!r}", i)
        weights.append(_numeric(layer["weights"], (sizes[i - 1], sizes[i]), "weights", i))
        biases.append(_numeric(layer["biases"], (sizes[i],), "biases", i))
        spec = layer["activations"]
        if isinstance(spec, (str, dict)):
            spec = [spec] * sizes[i]
        _require(isinstance(spec, list) and len(spec) == sizes[i], f"expected {sizes[i]} activations", i)
        acts.append([_activation_from_json(a, i) for a in spec])
    return Network(weights, biases, acts)


def save_model(net: Network, metadata: dict | None = None) -> str:
    return dumps(model_to_dict(net, metadata))


def load_model(text: str) -> Network:
    """Parse a model document.

    Raises :class:`DocumentError` (with line and column) on malformed text
    and :class:`ValidationError` naming the layer on inconsistent shapes.
    """
    return model_from_dict(_parse(text))


def partition_to_dict(p: NetPartition) -> dict:
    return {"format_version": FORMAT_VERSION, "layer_sizes": list(p.layer_sizes), "blocks": p.as_lists()}


def partition_from_dict(doc: Any, layer_sizes: Sequence[int] | None = None) -> NetPartition:
    _require(isinstance(doc, dict), "partition document must be an object")
    version = doc.get("format_version", FORMAT_VERSION)
    _require(version == FORMAT_VERSION, f"unsupported format_version {version!r}")
    blocks = doc.get("blocks")
    _require(isinstance(blocks, list) and len(blocks) >= 2, "blocks must list at least two layers")
    declared = doc.get("layer_sizes")
    layers = []
    for i, layer in enumerate(blocks):
        _require(
            isinstance(layer, list)
            and all(isinstance(b, list) and all(isinstance(s, int) and not isinstance(s, bool) for s in b) for b in layer),
            "blocks must be lists of node indices",
            i,
        )
        try:
            layers.append(LayerPartition(i, layer))
        except ValueError as e:
            raise ValidationError(str(e), i) from None
    p = NetPartition(layers)
    for expected in (declared, layer_sizes):
        if expected is None:
            continue
        expected = list(expected)
        if len(expected) != len(p):
            raise ValidationError(f"partition has {len(p)} layers, expected {len(expected)}")
        for i, (got, want) in enumerate(zip(p.layer_sizes, expected)):
            _require(got == want, f"partition covers {got} nodes, layer has {want}", i)
    return p


def save_partition(p: NetPartition) -> str:
    return dumps(partition_to_dict(p))


def load_partition(text: str, layer_sizes: Sequence[int] | None = None) -> NetPartition:
    return partition_from_dict(_parse(text), layer_sizes)


def read_model(path) -> Network:
    return load_model(Path(path).read_text(encoding="utf-8"))


def read_partition(path, layer_sizes: Sequence[int] | None = None) -> NetPartition:
    return load_partition(Path(path).read_text(encoding="utf-8"), layer_sizes)


def write_text(path, text: str):
    Path(path).write_text(text, encoding="utf-8")
