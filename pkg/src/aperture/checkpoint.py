"""Self-contained model checkpoints.

A checkpoint is a versioned JSON envelope embedding the feature schema
(with scaling bounds), the layer sizes and activation, and every parameter
array as hex-encoded little-endian IEEE-754 doubles in row-major order, so
a round-trip is bit-exact and a loaded model needs no side files. The
``created_at`` stamp is excluded from content hashing so identical
trainings hash identically.
"""
from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone

import numpy as np

from .errors import (
    CheckpointDimensionError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from .nn import Network, NetworkConfig, OptimizerState
from .schema import FeatureDef, FeatureSchema

FORMAT_VERSION = 1


def _encode(arr: np.ndarray) -> str:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes().hex()


def _decode(hexstr: str, shape: tuple[int, ...], what: str) -> np.ndarray:
    expected = int(np.prod(shape)) * 8
    try:
        raw = bytes.fromhex(hexstr)
    except ValueError as exc:
        raise CheckpointTruncatedError(f"{what}: invalid hex payload") from exc
    if len(raw) != expected:
        raise CheckpointDimensionError(
            f"dimension inconsistency: {what} holds {len(raw)} bytes, "
            f"expected {expected} for shape {shape}"
        )
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def _schema_to_doc(schema: FeatureSchema) -> dict:
    return {
        "label": schema.label_name,
        "features": [
            {
                "name": f.name,
                "unit": f.unit,
                "min": f.scale_min,
                "max": f.scale_max,
                "lag_minutes": f.lag_minutes,
            }
            for f in schema.features
        ],
    }


def _schema_from_doc(doc: dict) -> FeatureSchema:
    try:
        features = tuple(
            FeatureDef(
                name=f["name"],
                unit=f.get("unit", "-"),
                scale_min=float(f["min"]),
                scale_max=float(f["max"]),
                lag_minutes=int(f.get("lag_minutes", 0)),
            )
            for f in doc["features"]
        )
        return FeatureSchema(features=features, label_name=doc["label"])
    except (KeyError, TypeError) as exc:
        raise CheckpointTruncatedError(f"schema block incomplete: {exc}") from exc


def save_checkpoint(
    path,
    network: Network,
    schema: FeatureSchema,
    optimizer_state: OptimizerState | None = None,
    created_at: str | None = None,
) -> None:
    if schema.input_width != network.input_width:
        raise ValueError(
            f"schema width {schema.input_width} != network input {network.input_width}"
        )
    if created_at is None:
        created_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    doc = {
        "format_version": FORMAT_VERSION,
        "created_at": created_at,
        "schema": _schema_to_doc(schema),
        "hidden_activation": network.hidden_activation,
        "layer_sizes": network.layer_sizes,
        "weights": [_encode(w) for w in network.weights],
        "biases": [_encode(b) for b in network.biases],
        "optimizer": None,
    }
    if optimizer_state is not None:
        doc["optimizer"] = {
            "step": optimizer_state.step,
            "grad_sq_weights": [_encode(g) for g in optimizer_state.grad_sq_weights],
            "grad_sq_biases": [_encode(g) for g in optimizer_state.grad_sq_biases],
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[Network, FeatureSchema, OptimizerState | None]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointTruncatedError(f"{path}: truncated or not a checkpoint: {exc}") from exc

    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format_version {version!r} unsupported (expected {FORMAT_VERSION})"
        )
    for key in ("schema", "hidden_activation", "layer_sizes", "weights", "biases"):
        if key not in doc:
            raise CheckpointTruncatedError(f"{path}: missing field {key!r}")

    schema = _schema_from_doc(doc["schema"])
    sizes = [int(s) for s in doc["layer_sizes"]]
    if len(sizes) < 3 or sizes[-1] != 1:
        raise CheckpointDimensionError(f"{path}: implausible layer sizes {sizes}")
    if len(doc["weights"]) != len(sizes) - 1 or len(doc["biases"]) != len(sizes) - 1:
        raise CheckpointDimensionError(
            f"{path}: {len(doc['weights'])} weight blocks for {len(sizes)} layer sizes"
        )
    if schema.input_width != sizes[0]:
        raise CheckpointDimensionError(
            f"{path}: schema width {schema.input_width} != input layer {sizes[0]}"
        )

    weights = [
        _decode(h, (sizes[i + 1], sizes[i]), f"weights[{i}]")
        for i, h in enumerate(doc["weights"])
    ]
    biases = [
        _decode(h, (sizes[i + 1],), f"biases[{i}]") for i, h in enumerate(doc["biases"])
    ]
    config = NetworkConfig(
        input_width=sizes[0],
        hidden_layer_sizes=tuple(sizes[1:-1]),
        hidden_activation=doc["hidden_activation"],
    )
    network = Network(
        weights=weights,
        biases=biases,
        hidden_activation=doc["hidden_activation"],
        config=config,
    )

    state = None
    if doc.get("optimizer"):
        opt = doc["optimizer"]
        state = OptimizerState(
            grad_sq_weights=[
                _decode(h, (sizes[i + 1], sizes[i]), f"grad_sq_weights[{i}]")
                for i, h in enumerate(opt["grad_sq_weights"])
            ],
            grad_sq_biases=[
                _decode(h, (sizes[i + 1],), f"grad_sq_biases[{i}]")
                for i, h in enumerate(opt["grad_sq_biases"])
            ],
            step=int(opt.get("step", 0)),
        )
    return network, schema, state


def checkpoint_content_hash(path) -> str:
    """Hash of the checkpoint with the creation stamp normalized out."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    doc.pop("created_at", None)
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
