"""Deterministic synthetic experiment logs for tests and demos.

Two families are provided: a dense/conv classifier family with a hidden
layer whose value spread grows over the training epochs, and a VAE family
whose latent activations are pinned to exact population variances and whose
third model carries an injected defect (the ``z_log_var`` activations are
clamped to be non-negative).

Identical ``(spec, seed)`` pairs produce byte-identical directory trees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .catalog import load_catalog
from .model import ExperimentCatalog, StoreError
from .tensor_io import write_tensor

_BASE_TIME = datetime(2026, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class FixtureSpec:
    family: str = "classifier"  # "classifier" | "vae"
    num_models: int = 3
    lineage: str = "chain"  # "chain" | "tree" (tree ends in a two-parent merge)
    layer_sizes: tuple[int, ...] = (4, 2, 2)  # input width, then dense widths
    checkpoints: int = 2
    samples: int = 20
    classes: int = 2
    latent_dim: int = 4  # vae only
    variance_targets: tuple[float, float] = (2.02, 12.38)  # vae only
    filler_variance: float = 5.0  # vae only


def classifier_fixture_spec() -> FixtureSpec:
    return FixtureSpec(
        family="classifier",
        num_models=4,
        lineage="tree",
        layer_sizes=(16, 8, 8, 4),
        checkpoints=3,
        samples=64,
        classes=4,
    )


def vae_fixture_spec() -> FixtureSpec:
    return FixtureSpec(
        family="vae",
        num_models=3,
        lineage="tree",
        layer_sizes=(16, 8),
        checkpoints=2,
        samples=256,
        classes=4,
        latent_dim=8,
    )


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _created_at(index: int) -> str:
    return (_BASE_TIME + timedelta(hours=index)).strftime("%Y-%m-%dT%H:%M:%SZ")


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _pinned(rng: np.random.Generator, shape: tuple[int, ...], variance: float,
            mean: float = 0.0) -> np.ndarray:
    """Draw normals, then rescale the f32-rounded values to the exact
    population variance (up to f32 resolution of the final cast)."""
    x = rng.standard_normal(shape)
    x32 = ((x - x.mean()) / x.std() * math.sqrt(variance) + mean).astype("<f4")
    x64 = x32.astype(np.float64)
    y = (x64 - x64.mean()) / x64.std() * math.sqrt(variance) + mean
    return y.astype("<f4")


def _dense_layer_doc(name: str, width: int, activation: str) -> dict:
    return {
        "id": name,
        "name": name,
        "type": "dense",
        "output_shape": [width],
        "inner_ops": [
            {"id": f"{name}.kernel", "kind": "variable-kernel", "attrs": {"initializer": "glorot_uniform"}},
            {"id": f"{name}.matmul", "kind": "matmul", "attrs": {}},
            {"id": f"{name}.bias", "kind": "variable-bias", "attrs": {"initializer": "zeros"}},
            {"id": f"{name}.add", "kind": "add", "attrs": {}},
            {"id": f"{name}.act", "kind": "activation", "attrs": {"activation": activation}},
        ],
        "inner_edges": [
            [f"{name}.kernel", f"{name}.matmul"],
            [f"{name}.matmul", f"{name}.add"],
            [f"{name}.bias", f"{name}.add"],
            [f"{name}.add", f"{name}.act"],
        ],
    }


class _ModelWriter:
    """Accumulates one model's tensors and writes its directory tree."""

    def __init__(self, root: Path, model_id: str, name: str, parents: list[str],
                 index: int, classes: int):
        self.root = root
        self.model_id = model_id
        self.name = name
        self.parents = parents
        self.index = index
        self.classes = classes
        self.graph_doc: dict = {}
        self.metrics: dict[str, list[float]] = {}
        self.runtime_ms: float | None = None
        # epoch -> logical path -> (array, dtype)
        self.epochs: dict[int, dict[str, tuple[np.ndarray, str]]] = {}

    def add_epoch(self, epoch: int, x: np.ndarray, y_label: np.ndarray,
                  y_prediction: np.ndarray,
                  layers: dict[str, dict[str, np.ndarray]]) -> None:
        tensors: dict[str, tuple[np.ndarray, str]] = {
            "data_samples/x": (x, "f32"),
            "data_samples/y_label": (y_label, "i64"),
            "data_samples/y_prediction": (y_prediction, "f32"),
        }
        for layer_name, parts in layers.items():
            acts = parts["activations"]
            tensors[f"layers/{layer_name}/activations"] = (acts, "f32")
            mca = np.stack([
                acts[np.asarray(y_label) == c].astype(np.float64).mean(axis=0)
                for c in range(self.classes)
            ])
            tensors[f"layers/{layer_name}/mean_class_activations"] = (mca, "f32")
            if "kernel" in parts:
                tensors[f"layers/{layer_name}/weights/kernel"] = (parts["kernel"], "f32")
            if "bias" in parts:
                tensors[f"layers/{layer_name}/weights/bias"] = (parts["bias"], "f32")
        self.epochs[epoch] = tensors

    def write(self) -> dict:
        model_dir = self.root / self.model_id
        _write_json(model_dir / "graph.doc", self.graph_doc)
        checkpoint_entries = []
        weight_bytes = 0
        num_params = 0
        for epoch in sorted(self.epochs):
            ckpt_dir = model_dir / "checkpoints" / str(epoch)
            manifest_tensors = {}
            epoch_weight_bytes = 0
            epoch_params = 0
            for path, (arr, dtype) in sorted(self.epochs[epoch].items()):
                blob_name = path.replace("/", "__") + ".bin"
                ref = write_tensor(ckpt_dir / "tensors" / blob_name, arr, dtype)
                manifest_tensors[path] = {
                    "dtype": dtype,
                    "shape": list(ref.shape),
                    "blob": f"tensors/{blob_name}",
                }
                if "/weights/" in path:
                    epoch_weight_bytes += ref.num_bytes
                    epoch_params += ref.num_elements
            _write_json(ckpt_dir / "manifest.doc",
                        {"epoch": epoch, "tensors": manifest_tensors})
            checkpoint_entries.append({
                "epoch": epoch,
                "manifest": f"{self.model_id}/checkpoints/{epoch}/manifest.doc",
            })
            weight_bytes = epoch_weight_bytes
            num_params = epoch_params
        return {
            "id": self.model_id,
            "name": self.name,
            "parents": self.parents,
            "created_at": _created_at(self.index),
            "num_trainable_params": num_params,
            "save_size_bytes": weight_bytes,
            "runtime_ms_per_sample": self.runtime_ms,
            "metrics": self.metrics,
            "graph": f"{self.model_id}/graph.doc",
            "checkpoints": checkpoint_entries,
        }


def _lineage_parents(spec: FixtureSpec, ids: list[str]) -> list[list[str]]:
    parents: list[list[str]] = []
    for i in range(len(ids)):
        if i == 0:
            parents.append([])
        elif spec.lineage == "tree" and i == len(ids) - 1 and i >= 2:
            parents.append([ids[i - 2], ids[i - 1]])
        elif spec.lineage == "tree" and i >= 1:
            parents.append([ids[0]])
        else:
            parents.append([ids[i - 1]])
    return parents


def _build_classifier_family(spec: FixtureSpec, rng: np.random.Generator,
                             root: Path) -> list[dict]:
    ids = [f"cls_{i}" for i in range(spec.num_models)]
    names = {0: "cls_base", 1: "cls_wide", 2: "cls_deep"}
    parents = _lineage_parents(spec, ids)
    merge_index = spec.num_models - 1 if spec.lineage == "tree" and spec.num_models >= 3 else -1
    records = []
    for i, model_id in enumerate(ids):
        name = "cls_merge" if i == merge_index else names.get(i, f"cls_var_{i}")
        writer = _ModelWriter(root, model_id, name, parents[i], i, spec.classes)
        if i == merge_index:
            records.append(_write_conv_classifier(spec, rng, writer))
        else:
            records.append(_write_dense_classifier(spec, rng, writer, width_extra=i))
    return records


def _classifier_metrics(writer: _ModelWriter, epochs: int) -> None:
    i = writer.index
    writer.metrics = {
        "loss": [round(2.0 * 0.8 ** e + 0.05 * i, 6) for e in range(epochs)],
        "val_loss": [round(2.2 * 0.82 ** e + 0.05 * i, 6) for e in range(epochs)],
        "accuracy": [round(1.0 - 0.9 * 0.85 ** e - 0.01 * i, 6) for e in range(epochs)],
    }
    writer.runtime_ms = round(0.5 + 0.07 * i, 4)


def _write_dense_classifier(spec: FixtureSpec, rng: np.random.Generator,
                            writer: _ModelWriter, width_extra: int) -> dict:
    input_dim = spec.layer_sizes[0]
    widths = [w + width_extra for w in spec.layer_sizes[1:]]
    layer_names = [f"hidden_{j + 1}" for j in range(len(widths) - 1)] + ["output"]
    writer.graph_doc = {
        "layers": [
            _dense_layer_doc(layer_names[j], widths[j],
                             "softmax" if j == len(widths) - 1 else "linear")
            for j in range(len(widths))
        ],
        "edges": [[layer_names[j], layer_names[j + 1]] for j in range(len(widths) - 1)],
    }
    x = rng.standard_normal((spec.samples, input_dim)).astype("<f4")
    y_label = (np.arange(spec.samples) % spec.classes).astype("<i8")
    kernels = []
    biases = []
    fan_in = input_dim
    for w in widths:
        kernels.append(rng.standard_normal((fan_in, w)) * 0.5)
        biases.append(rng.standard_normal(w) * 0.1)
        fan_in = w
    for epoch in range(spec.checkpoints):
        layers: dict[str, dict[str, np.ndarray]] = {}
        acts = x.astype(np.float64)
        for j, layer_name in enumerate(layer_names):
            # the second layer's weights spread out as training progresses
            scale = float(1 + epoch) if j == 1 else 1.0
            k = (kernels[j] * scale).astype("<f4")
            b = (biases[j] * scale).astype("<f4")
            acts = acts @ k.astype(np.float64) + b.astype(np.float64)
            layers[layer_name] = {
                "activations": acts.astype("<f4"),
                "kernel": k,
                "bias": b,
            }
            acts = layers[layer_name]["activations"].astype(np.float64)
        y_prediction = _softmax(acts).astype("<f4")
        writer.add_epoch(epoch, x, y_label, y_prediction, layers)
    _classifier_metrics(writer, spec.checkpoints)
    return writer.write()


def _write_conv_classifier(spec: FixtureSpec, rng: np.random.Generator,
                           writer: _ModelWriter) -> dict:
    """Conv-fronted variant with a skip connection from flatten to output."""
    side, channels = 4, 4
    dense_width = spec.layer_sizes[-1] if len(spec.layer_sizes) > 1 else 4
    flat_width = side * side * channels
    writer.graph_doc = {
        "layers": [
            {
                "id": "conv_1", "name": "conv_1", "type": "conv2d",
                "output_shape": [side, side, channels],
                "inner_ops": [
                    {"id": "conv_1.kernel", "kind": "variable-kernel",
                     "attrs": {"filter_shape": [3, 3, 1, channels]}},
                    {"id": "conv_1.conv", "kind": "conv", "attrs": {"padding": "same"}},
                    {"id": "conv_1.bias", "kind": "variable-bias", "attrs": {}},
                    {"id": "conv_1.add", "kind": "add", "attrs": {}},
                    {"id": "conv_1.act", "kind": "activation", "attrs": {"activation": "relu"}},
                ],
                "inner_edges": [
                    ["conv_1.kernel", "conv_1.conv"],
                    ["conv_1.conv", "conv_1.add"],
                    ["conv_1.bias", "conv_1.add"],
                    ["conv_1.add", "conv_1.act"],
                ],
            },
            {
                "id": "flatten_1", "name": "flatten_1", "type": "flatten",
                "output_shape": [flat_width],
                "inner_ops": [{"id": "flatten_1.reshape", "kind": "reshape", "attrs": {}}],
                "inner_edges": [],
            },
            _dense_layer_doc("dense_1", dense_width, "linear"),
            _dense_layer_doc("output", spec.classes, "softmax"),
        ],
        "edges": [
            ["conv_1", "flatten_1"],
            ["flatten_1", "dense_1"],
            ["dense_1", "output"],
            ["flatten_1", "output"],
        ],
    }
    x = rng.standard_normal((spec.samples, side, side, 1)).astype("<f4")
    y_label = (np.arange(spec.samples) % spec.classes).astype("<i8")
    conv_kernel = (rng.standard_normal((3, 3, 1, channels)) * 0.3).astype("<f4")
    conv_bias = (rng.standard_normal(channels) * 0.1).astype("<f4")
    dense_kernels = {
        "dense_1": (rng.standard_normal((flat_width, dense_width)) * 0.2).astype("<f4"),
        "output": (rng.standard_normal((dense_width, spec.classes)) * 0.5).astype("<f4"),
    }
    dense_biases = {
        "dense_1": (rng.standard_normal(dense_width) * 0.1).astype("<f4"),
        "output": (rng.standard_normal(spec.classes) * 0.1).astype("<f4"),
    }
    for epoch in range(spec.checkpoints):
        conv_acts = np.maximum(
            rng.standard_normal((spec.samples, side, side, channels)), 0.0
        ).astype("<f4")
        flat_acts = conv_acts.reshape(spec.samples, flat_width)
        dense_acts = (
            flat_acts.astype(np.float64) @ dense_kernels["dense_1"].astype(np.float64)
            + dense_biases["dense_1"].astype(np.float64)
        ).astype("<f4")
        logits = (
            dense_acts.astype(np.float64) @ dense_kernels["output"].astype(np.float64)
            + dense_biases["output"].astype(np.float64)
        )
        out_acts = logits.astype("<f4")
        y_prediction = _softmax(logits).astype("<f4")
        writer.add_epoch(epoch, x, y_label, y_prediction, {
            "conv_1": {"activations": conv_acts, "kernel": conv_kernel, "bias": conv_bias},
            "flatten_1": {"activations": flat_acts},
            "dense_1": {"activations": dense_acts,
                        "kernel": dense_kernels["dense_1"], "bias": dense_biases["dense_1"]},
            "output": {"activations": out_acts,
                       "kernel": dense_kernels["output"], "bias": dense_biases["output"]},
        })
    _classifier_metrics(writer, spec.checkpoints)
    return writer.write()


def _build_vae_family(spec: FixtureSpec, rng: np.random.Generator,
                      root: Path) -> list[dict]:
    """Three VAEs: two loss balances with exact latent variances, plus a
    defective merge child whose z_log_var activations are clamped at zero."""
    ids = ["vae_25_75", "vae_90_10", "vae_defect"]
    parents = [[], ["vae_25_75"], ["vae_25_75", "vae_90_10"]]
    records = []
    for i, model_id in enumerate(ids):
        writer = _ModelWriter(root, model_id, model_id, parents[i], i, spec.classes)
        defective = model_id == "vae_defect"
        z_variance = (spec.variance_targets[i] if i < 2 else spec.filler_variance)
        records.append(_write_vae(spec, rng, writer, z_variance, defective))
    return records


def _write_vae(spec: FixtureSpec, rng: np.random.Generator, writer: _ModelWriter,
               z_variance: float, defective: bool) -> dict:
    input_dim, hidden = spec.layer_sizes[0], spec.layer_sizes[1]
    latent = spec.latent_dim
    writer.graph_doc = {
        "layers": [
            _dense_layer_doc("encoder_1", hidden, "relu"),
            _dense_layer_doc("z_mean", latent, "linear"),
            _dense_layer_doc("z_log_var", latent,
                             "relu" if defective else "linear"),
            {
                "id": "z", "name": "z", "type": "sampling",
                "output_shape": [latent],
                "inner_ops": [{"id": "z.sample", "kind": "custom",
                               "attrs": {"op": "reparameterize"}}],
                "inner_edges": [],
            },
            _dense_layer_doc("decoder_1", hidden, "relu"),
            _dense_layer_doc("reconstruction", input_dim, "sigmoid"),
        ],
        "edges": [
            ["encoder_1", "z_mean"],
            ["encoder_1", "z_log_var"],
            ["z_mean", "z"],
            ["z_log_var", "z"],
            ["z", "decoder_1"],
            ["decoder_1", "reconstruction"],
        ],
    }
    x = rng.standard_normal((spec.samples, input_dim)).astype("<f4")
    y_label = (np.arange(spec.samples) % spec.classes).astype("<i8")
    dims = {"encoder_1": (input_dim, hidden), "z_mean": (hidden, latent),
            "z_log_var": (hidden, latent), "decoder_1": (latent, hidden),
            "reconstruction": (hidden, input_dim)}
    kernels = {n: (rng.standard_normal(d) * 0.1).astype("<f4") for n, d in dims.items()}
    biases = {n: (rng.standard_normal(d[1]) * 0.05).astype("<f4") for n, d in dims.items()}
    filler = spec.filler_variance
    for epoch in range(spec.checkpoints):
        layers: dict[str, dict[str, np.ndarray]] = {}
        for layer_name in dims:
            shape = (spec.samples, dims[layer_name][1])
            if layer_name == "z_log_var" and defective:
                acts = np.maximum(rng.standard_normal(shape), 0.0).astype("<f4")
            else:
                acts = _pinned(rng, shape, filler)
            layers[layer_name] = {
                "activations": acts,
                "kernel": kernels[layer_name],
                "bias": biases[layer_name],
            }
        layers["z"] = {"activations": _pinned(rng, (spec.samples, latent), z_variance)}
        y_prediction = layers["reconstruction"]["activations"]
        writer.add_epoch(epoch, x, y_label, y_prediction, layers)
    balance = {"vae_25_75": (0.25, 0.75), "vae_90_10": (0.9, 0.1)}.get(writer.model_id, (0.5, 0.5))
    writer.metrics = {
        "loss": [round(3.0 * 0.75 ** e + 0.1 * writer.index, 6) for e in range(spec.checkpoints)],
        "kl_loss": [round(balance[1] * 2.0 * 0.8 ** e, 6) for e in range(spec.checkpoints)],
        "reconstruction_loss": [round(balance[0] * 2.5 * 0.85 ** e, 6) for e in range(spec.checkpoints)],
    }
    writer.runtime_ms = round(0.9 + 0.05 * writer.index, 4)
    return writer.write()


def generate_fixture(spec: FixtureSpec, seed: int, out: Path) -> ExperimentCatalog:
    """Write a complete experiment log under ``out`` and load it back."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise StoreError(f"fixture directory not writable: {out}: {exc}")
    rng = np.random.default_rng(seed)
    if spec.family == "classifier":
        records = _build_classifier_family(spec, rng, out) if spec.num_models else []
    elif spec.family == "vae":
        records = _build_vae_family(spec, rng, out)
    else:
        raise StoreError(f"unknown fixture family: {spec.family}")
    class_labels = [f"class_{i}" for i in range(spec.classes)]
    _write_json(out / "models.db", {"class_labels": class_labels, "models": records})
    return load_catalog(out)


def generate_demo(seed: int, out: Path) -> ExperimentCatalog:
    """Both fixture families in one log (two experiments side by side)."""
    out = Path(out)
    cls_spec = classifier_fixture_spec()
    vae_spec = vae_fixture_spec()
    assert cls_spec.classes == vae_spec.classes
    rng = np.random.default_rng(seed)
    records = _build_classifier_family(cls_spec, rng, out)
    records += _build_vae_family(vae_spec, rng, out)
    class_labels = [f"class_{i}" for i in range(cls_spec.classes)]
    _write_json(out / "models.db", {"class_labels": class_labels, "models": records})
    return load_catalog(out)
