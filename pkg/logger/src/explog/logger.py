"""Training-side logging of the experiment store format.

The workflow mirrors a normal training loop: create a header before
training, hand an ``ExperimentLogger`` the model after each epoch so it can
write a checkpoint bundle, and append the finished record to the model
database when training ends. Only files are shared with the serving side;
this package has no dependency on it.

Directory layout written (see the store's format documentation):

    <root>/models.db
    <root>/<model_id>/graph.doc
    <root>/<model_id>/checkpoints/<epoch>/manifest.doc
    <root>/<model_id>/checkpoints/<epoch>/tensors/<name>.bin
"""

from __future__ import annotations

import json
import os
import re
import time
import uuid
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np


class LoggerError(Exception):
    pass


class DuplicateModelError(LoggerError):
    pass


@dataclass(frozen=True)
class LoggerConfig:
    root: Path
    sample_count: int = 32  # evaluation samples stored per checkpoint
    checkpoint_every: int = 1  # epochs between checkpoints (plus epoch 0)
    class_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.sample_count < 1:
            raise LoggerError("sample_count must be >= 1")
        if self.checkpoint_every < 1:
            raise LoggerError("checkpoint_every must be >= 1")
        object.__setattr__(self, "root", Path(self.root))


class LayerLike(Protocol):
    name: str
    type: str
    activation: str

    @property
    def kernel(self) -> Optional[np.ndarray]: ...

    @property
    def bias(self) -> Optional[np.ndarray]: ...

    def output_shape(self) -> tuple[int, ...]: ...


class ModelLike(Protocol):
    layers: Sequence[LayerLike]

    def layer_outputs(self, x: np.ndarray) -> dict[str, np.ndarray]: ...

    def predict(self, x: np.ndarray) -> np.ndarray: ...


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9_]+", "_", name.lower()).strip("_") or "model"


def make_header(name: str, parents: Sequence[str] = ()) -> dict:
    """Model metadata created before training; ids are fresh and unique."""
    return {
        "id": f"{_slug(name)}-{uuid.uuid4().hex[:8]}",
        "name": name,
        "parents": list(parents),
        "created_at": _now(),
    }


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_blob(path: Path, values: np.ndarray, dtype: str) -> tuple[list[int], int]:
    np_dtype = {"f32": "<f4", "i64": "<i8", "i32": "<i4"}[dtype]
    arr = np.ascontiguousarray(values, dtype=np_dtype)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(arr.tobytes())
    return list(arr.shape), arr.nbytes


def graph_doc(model: ModelLike) -> dict:
    """Chain architecture graph derived from the model's layer list."""
    layers = []
    for layer in model.layers:
        name = layer.name
        ops = []
        edges = []
        if layer.kernel is not None:
            ops += [
                {"id": f"{name}.kernel", "kind": "variable-kernel",
                 "attrs": {"shape": list(layer.kernel.shape)}},
                {"id": f"{name}.matmul", "kind": "matmul", "attrs": {}},
            ]
            edges.append([f"{name}.kernel", f"{name}.matmul"])
        if layer.bias is not None:
            ops += [
                {"id": f"{name}.bias", "kind": "variable-bias",
                 "attrs": {"shape": list(layer.bias.shape)}},
                {"id": f"{name}.add", "kind": "add", "attrs": {}},
            ]
            if layer.kernel is not None:
                edges.append([f"{name}.matmul", f"{name}.add"])
            edges.append([f"{name}.bias", f"{name}.add"])
        ops.append({"id": f"{name}.act", "kind": "activation",
                    "attrs": {"activation": layer.activation}})
        if layer.bias is not None:
            edges.append([f"{name}.add", f"{name}.act"])
        elif layer.kernel is not None:
            edges.append([f"{name}.matmul", f"{name}.act"])
        layers.append({
            "id": name, "name": name, "type": layer.type,
            "output_shape": list(layer.output_shape()),
            "inner_ops": ops, "inner_edges": edges,
        })
    edges = [[model.layers[i].name, model.layers[i + 1].name]
             for i in range(len(model.layers) - 1)]
    return {"layers": layers, "edges": edges}


def write_checkpoint_bundle(model: ModelLike, batch: tuple[np.ndarray, np.ndarray],
                            epoch: int, config: LoggerConfig,
                            model_id: str) -> tuple[dict, list[str]]:
    """Write one checkpoint: samples, labels, predictions, per-layer
    activations and per-class means, and weights. Returns the catalog entry
    and any warnings for layers whose outputs could not be captured."""
    x_full, y_full = batch
    n = min(config.sample_count, x_full.shape[0])
    x = np.asarray(x_full[:n])
    y_label = np.asarray(y_full[:n]).ravel().astype(np.int64)

    ckpt_dir = config.root / model_id / "checkpoints" / str(epoch)
    tensors: dict[str, dict] = {}

    def store(path: str, values: np.ndarray, dtype: str) -> None:
        blob_name = path.replace("/", "__") + ".bin"
        shape, _ = _write_blob(ckpt_dir / "tensors" / blob_name, values, dtype)
        tensors[path] = {"dtype": dtype, "shape": shape,
                         "blob": f"tensors/{blob_name}"}

    y_prediction = np.asarray(model.predict(x))
    store("data_samples/x", x, "f32")
    store("data_samples/y_label", y_label, "i64")
    store("data_samples/y_prediction", y_prediction, "f32")

    captured: list[str] = []
    try:
        outputs = model.layer_outputs(x)
    except Exception as exc:  # pragma: no cover - defensive
        outputs = {}
        warnings.warn(f"layer outputs not materializable: {exc}")
    num_classes = len(config.class_labels)
    for layer in model.layers:
        acts = outputs.get(layer.name)
        if acts is None:
            captured.append(f"layer {layer.name}: output not materializable, skipped")
        else:
            acts = np.asarray(acts)
            store(f"layers/{layer.name}/activations", acts, "f32")
            if num_classes:
                acts32 = acts.astype("<f4").astype(np.float64)
                mca = np.stack([
                    acts32[y_label == c].mean(axis=0) if np.any(y_label == c)
                    else np.zeros(acts.shape[1:])
                    for c in range(num_classes)
                ])
                store(f"layers/{layer.name}/mean_class_activations", mca, "f32")
        if layer.kernel is not None:
            store(f"layers/{layer.name}/weights/kernel", layer.kernel, "f32")
        if layer.bias is not None:
            store(f"layers/{layer.name}/weights/bias", layer.bias, "f32")

    manifest = {"epoch": epoch, "tensors": tensors}
    _write_json(ckpt_dir / "manifest.doc", manifest)
    entry = {"epoch": epoch,
             "manifest": f"{model_id}/checkpoints/{epoch}/manifest.doc"}
    return entry, captured


def measure_runtime_ms(model: ModelLike, x: np.ndarray, runs: int = 5) -> float:
    """Median wall-clock inference time per sample over the stored batch."""
    timings = []
    for _ in range(runs):
        start = time.perf_counter()
        model.predict(x)
        timings.append(time.perf_counter() - start)
    return float(np.median(timings) / max(1, x.shape[0]) * 1000.0)


def init_root(root: Path, class_labels: Sequence[str]) -> None:
    """Create an empty model database if none exists."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    db_path = root / "models.db"
    if not db_path.exists():
        _write_json(db_path, {"class_labels": list(class_labels), "models": []})


def append_model_db(header: dict, enrichments: dict, root: Path) -> dict:
    """Atomically append a finished record; duplicate ids are rejected and
    leave the database unchanged."""
    root = Path(root)
    db_path = root / "models.db"
    if not db_path.exists():
        raise LoggerError(f"model database not initialized: {db_path}")
    db = json.loads(db_path.read_text())
    if any(m["id"] == header["id"] for m in db["models"]):
        raise DuplicateModelError(f"duplicate model id: {header['id']}")
    record = {**header, **enrichments}
    db["models"].append(record)
    tmp = db_path.with_suffix(".tmp")
    tmp.write_text(json.dumps(db, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, db_path)
    return record


class ExperimentLogger:
    """End-of-epoch callback: writes checkpoint bundles on the configured
    cadence, collects metric series, and appends the record on finish."""

    def __init__(self, config: LoggerConfig, header: dict, model: ModelLike,
                 eval_batch: tuple[np.ndarray, np.ndarray]):
        self.config = config
        self.header = header
        self.model = model
        self.eval_batch = eval_batch
        self.metrics: dict[str, list[float]] = {}
        self.checkpoints: list[dict] = []
        self.warnings: list[str] = []
        init_root(config.root, config.class_labels)
        existing = json.loads((config.root / "models.db").read_text())
        if tuple(existing["class_labels"]) != tuple(config.class_labels):
            raise LoggerError("class_labels differ from the existing database")
        _write_json(config.root / header["id"] / "graph.doc", graph_doc(model))
        entry, warns = write_checkpoint_bundle(
            model, eval_batch, 0, config, header["id"])
        self.checkpoints.append(entry)
        self.warnings.extend(warns)

    def on_epoch_end(self, epoch: int, metrics: dict[str, float]) -> None:
        """``epoch`` counts completed epochs starting at 1."""
        for name, value in metrics.items():
            self.metrics.setdefault(name, []).append(float(value))
        if epoch % self.config.checkpoint_every == 0:
            entry, warns = write_checkpoint_bundle(
                self.model, self.eval_batch, epoch, self.config, self.header["id"])
            self.checkpoints.append(entry)
            self.warnings.extend(warns)

    def finish(self) -> dict:
        num_params = 0
        save_size = 0
        for layer in self.model.layers:
            for weight in (layer.kernel, layer.bias):
                if weight is not None:
                    num_params += int(np.asarray(weight).size)
                    save_size += int(np.asarray(weight).size) * 4
        enrichments = {
            "num_trainable_params": num_params,
            "save_size_bytes": save_size,
            "runtime_ms_per_sample": round(
                measure_runtime_ms(self.model, self.eval_batch[0][: self.config.sample_count]), 6),
            "metrics": self.metrics,
            "graph": f"{self.header['id']}/graph.doc",
            "checkpoints": self.checkpoints,
        }
        return append_model_db(self.header, enrichments, self.config.root)
