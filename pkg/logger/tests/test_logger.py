import json

import numpy as np
import pytest

from explog import (
    DenseNet,
    DuplicateModelError,
    ExperimentLogger,
    LoggerConfig,
    append_model_db,
    init_root,
    make_header,
    toy_dataset,
    write_checkpoint_bundle,
)

# the serving side is only used to validate the written files; the format is
# the contract between the two packages
from modelprobe.queries import run_tensor_query
from modelprobe.store import load_catalog


def _train_run(root, epochs=3, seed=0, name="toy_classifier", parents=()):
    config = LoggerConfig(root=root, sample_count=20, checkpoint_every=1,
                          class_labels=("a", "b", "c"))
    x, y = toy_dataset(48, input_dim=6, classes=3, seed=seed)
    model = DenseNet((6, 5, 3), seed=seed)
    header = make_header(name, parents)
    logger = ExperimentLogger(config, header, model, (x, y))
    for epoch in range(1, epochs + 1):
        loss = model.train_epoch(x, y)
        logger.on_epoch_end(epoch, {"loss": loss})
    record = logger.finish()
    return header, record, model


def test_make_header_fields_and_uniqueness():
    base = make_header("vae_base", [])
    child = make_header("vae_v2", [base["id"]])
    assert base["parents"] == []
    assert child["parents"] == [base["id"]]
    assert base["id"] != make_header("vae_base", [])["id"]
    assert set(base) == {"id", "name", "parents", "created_at"}


def test_three_epoch_run_round_trips(tmp_path):
    header, record, _ = _train_run(tmp_path, epochs=3)
    catalog = load_catalog(tmp_path)
    assert list(catalog.models) == [header["id"]]
    loaded = catalog.models[header["id"]]
    assert [b.epoch for b in loaded.checkpoints] == [0, 1, 2, 3]
    assert len(loaded.metrics["loss"]) == 3
    assert loaded.num_trainable_params == 6 * 5 + 5 + 5 * 3 + 3
    assert loaded.runtime_ms_per_sample is not None


def test_logged_store_serves_uc_style_queries(tmp_path):
    header, _, _ = _train_run(tmp_path, epochs=3)
    catalog = load_catalog(tmp_path)
    series = run_tensor_query(
        catalog, header["id"], "*", "layers/output/weights/kernel",
        [{"op": "agg", "fn": "var", "axis": "all"}])
    assert series["epochs"] == [0, 1, 2, 3]
    hist = run_tensor_query(
        catalog, header["id"], "latest", "layers/hidden_1/activations",
        [{"op": "histogram", "bins": 8}])
    assert sum(hist["columns"]["counts"]) == 20 * 5  # samples x hidden units
    grouped = run_tensor_query(
        catalog, header["id"], "latest", "data_samples/y_prediction",
        [{"op": "groupby_class", "fn": "mean"}])
    assert set(grouped["columns"]) <= {"a", "b", "c"}


def test_first_dim_equality_and_class_means(tmp_path):
    config = LoggerConfig(root=tmp_path, sample_count=20,
                          class_labels=("a", "b"))
    x, y = toy_dataset(40, input_dim=4, classes=2, seed=1)
    model = DenseNet((4, 3, 2), seed=1)
    init_root(tmp_path, config.class_labels)
    entry, warns = write_checkpoint_bundle(model, (x, y), 0, config, "m1")
    assert warns == []
    manifest = json.loads((tmp_path / entry["manifest"]).read_text())
    dims = {tuple(t["shape"])[0] for p, t in manifest["tensors"].items()
            if p.startswith("data_samples/") or p.endswith("/activations")}
    assert dims == {20}
    mca = manifest["tensors"]["layers/hidden_1/mean_class_activations"]
    assert mca["shape"][0] == 2


def test_checkpoint_blobs_deterministic_for_fixed_weights(tmp_path):
    config = LoggerConfig(root=tmp_path, sample_count=10, class_labels=("a", "b"))
    x, y = toy_dataset(10, input_dim=4, classes=2, seed=3)
    model = DenseNet((4, 3, 2), seed=3)
    init_root(tmp_path, config.class_labels)
    write_checkpoint_bundle(model, (x, y), 0, config, "m1")
    first = {p.name: p.read_bytes()
             for p in (tmp_path / "m1/checkpoints/0/tensors").iterdir()}
    write_checkpoint_bundle(model, (x, y), 0, config, "m1")
    second = {p.name: p.read_bytes()
              for p in (tmp_path / "m1/checkpoints/0/tensors").iterdir()}
    assert first == second


def test_skipped_layer_recorded_as_warning(tmp_path):
    config = LoggerConfig(root=tmp_path, sample_count=10, class_labels=("a", "b"))
    x, y = toy_dataset(10, input_dim=4, classes=2, seed=3)
    model = DenseNet((4, 3, 2), seed=3)
    model.layers[0].capture_output = False
    init_root(tmp_path, config.class_labels)
    entry, warns = write_checkpoint_bundle(model, (x, y), 0, config, "m1")
    assert any("hidden_1" in w for w in warns)
    manifest = json.loads((tmp_path / entry["manifest"]).read_text())
    assert "layers/hidden_1/activations" not in manifest["tensors"]
    # weights are still stored, and the bundle remains loadable
    assert "layers/hidden_1/weights/kernel" in manifest["tensors"]


def test_duplicate_id_rejected_and_db_unchanged(tmp_path):
    header, _, _ = _train_run(tmp_path, epochs=1)
    before = (tmp_path / "models.db").read_text()
    with pytest.raises(DuplicateModelError):
        append_model_db(header, {"num_trainable_params": 0, "save_size_bytes": 0,
                                 "runtime_ms_per_sample": None, "metrics": {},
                                 "graph": f"{header['id']}/graph.doc",
                                 "checkpoints": []}, tmp_path)
    assert (tmp_path / "models.db").read_text() == before


def test_lineage_across_runs(tmp_path):
    base_header, _, _ = _train_run(tmp_path, epochs=1, seed=0, name="base")
    child_header, _, _ = _train_run(tmp_path, epochs=1, seed=1, name="child",
                                    parents=(base_header["id"],))
    catalog = load_catalog(tmp_path)
    assert catalog.models[child_header["id"]].header.parents == (base_header["id"],)


def test_checkpoint_cadence(tmp_path):
    config = LoggerConfig(root=tmp_path, sample_count=8, checkpoint_every=2,
                          class_labels=("a", "b"))
    x, y = toy_dataset(8, input_dim=4, classes=2, seed=5)
    model = DenseNet((4, 3, 2), seed=5)
    logger = ExperimentLogger(config, make_header("cadence"), model, (x, y))
    for epoch in range(1, 5):
        logger.on_epoch_end(epoch, {"loss": 1.0 / epoch})
    record = logger.finish()
    assert [c["epoch"] for c in record["checkpoints"]] == [0, 2, 4]
    assert len(record["metrics"]["loss"]) == 4


def test_served_after_reload(tmp_path):
    # a watching server picks up a record appended by the logger
    from fastapi.testclient import TestClient

    from modelprobe.server import ServerState, create_app

    _train_run(tmp_path, epochs=1, seed=0, name="first")
    state = ServerState(tmp_path)
    client = TestClient(create_app(state))
    assert len(client.get("/models").json()) == 1
    header, _, _ = _train_run(tmp_path, epochs=1, seed=1, name="second")
    assert state.holder.poll() is True
    assert header["id"] in client.get("/models").json()
