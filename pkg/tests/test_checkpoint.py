import json

import numpy as np
import pytest

from aperture import nn
from aperture.checkpoint import (
    checkpoint_content_hash,
    load_checkpoint,
    save_checkpoint,
)
from aperture.errors import (
    CheckpointDimensionError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from aperture.schema import FeatureDef, FeatureSchema

SCHEMA = FeatureSchema(
    features=(
        FeatureDef("indoor_temp", "degC", -10, 40),
        FeatureDef("co2", "ppm", 0, 2500),
        FeatureDef("indoor_temp", "degC", -10, 40, lag_minutes=10),
    )
)


def make_net(seed=0):
    cfg = nn.NetworkConfig(input_width=3, hidden_layer_sizes=(5, 4), init_seed=seed)
    return nn.init_network(cfg)


def test_roundtrip_preserves_predictions_exactly(tmp_path):
    net = make_net()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, SCHEMA)
    loaded, schema, state = load_checkpoint(path)
    assert schema == SCHEMA
    assert state is None
    X = np.random.default_rng(0).uniform(size=(1000, 3))
    assert np.array_equal(nn.forward(net, X), nn.forward(loaded, X))


def test_roundtrip_with_optimizer_state(tmp_path):
    net = make_net()
    state = nn.OptimizerState.fresh(net, 0.1)
    state.grad_sq_weights[0][0, 0] = 2.5
    state.step = 17
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, SCHEMA, optimizer_state=state)
    _, _, loaded_state = load_checkpoint(path)
    assert loaded_state.step == 17
    for a, b in zip(state.grad_sq_weights, loaded_state.grad_sq_weights):
        assert np.array_equal(a, b)


def test_edited_layer_size_detected(tmp_path):
    net = make_net()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, SCHEMA)
    doc = json.loads(path.read_text())
    doc["layer_sizes"][1] = 6
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointDimensionError, match="dimension inconsistency"):
        load_checkpoint(path)


def test_version_mismatch_detected(tmp_path):
    net = make_net()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, SCHEMA)
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_truncated_file_detected(tmp_path):
    net = make_net()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, SCHEMA)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CheckpointTruncatedError):
        load_checkpoint(path)


def test_missing_field_detected(tmp_path):
    net = make_net()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, SCHEMA)
    doc = json.loads(path.read_text())
    del doc["biases"]
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointTruncatedError, match="biases"):
        load_checkpoint(path)


def test_checkpoint_without_state_supports_continued_training(tmp_path):
    net = make_net()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, SCHEMA)
    loaded, _, state = load_checkpoint(path)
    assert state is None
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(256, 3))
    y = (X[:, 0] > 0.5).astype(int)
    cfg = nn.TrainConfig(batch_size=128, iterations=200, shuffle_seed=0)
    trained, _, _ = nn.train(loaded, X, y, cfg)  # fresh accumulators
    states, _ = nn.predict(trained, X)
    from aperture.metrics import confusion, rates

    f1 = rates(confusion(states, y)).f1
    assert f1 is not None and np.isfinite(f1)


def test_content_hash_ignores_created_at(tmp_path):
    net = make_net()
    a = tmp_path / "a.ckpt"
    b = tmp_path / "b.ckpt"
    save_checkpoint(a, net, SCHEMA, created_at="2020-01-01T00:00:00+00:00")
    save_checkpoint(b, net, SCHEMA, created_at="2021-06-15T12:34:56+00:00")
    assert a.read_text() != b.read_text()
    assert checkpoint_content_hash(a) == checkpoint_content_hash(b)


def test_pinned_created_at_gives_bitwise_identical_files(tmp_path):
    net = make_net()
    a = tmp_path / "a.ckpt"
    b = tmp_path / "b.ckpt"
    save_checkpoint(a, net, SCHEMA, created_at="2020-01-01T00:00:00+00:00")
    save_checkpoint(b, net, SCHEMA, created_at="2020-01-01T00:00:00+00:00")
    assert a.read_bytes() == b.read_bytes()
