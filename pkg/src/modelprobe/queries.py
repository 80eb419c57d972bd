"""Execution of data queries against a catalog snapshot.

Three sources exist: ``checkpoint`` (tensor paths inside checkpoint bundles,
with optional class filtering and a transform pipeline), ``metrics``
(per-epoch series from the model record), and ``record`` (scalar fields of
the model record). Checkpoint queries accept an epoch wildcard ``*`` that
maps the transform over every logged epoch.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .store.model import ExperimentCatalog, ModelRecord
from .store.tensor_io import read_tensor
from .transforms import apply_transform, parse_transform

_PATH_RE = re.compile(
    r"^(data_samples/(x|y_label|y_prediction)"
    r"|layers/[^/]+/(activations|mean_class_activations)"
    r"|layers/[^/]+/weights/(kernel|bias))$"
)

RECORD_FIELDS = ("runtime_ms_per_sample", "save_size_bytes", "num_trainable_params")


class QueryError(ValueError):
    """Invalid query (bad path, bad field, bad parameters)."""


class NotFoundError(LookupError):
    """Unknown model, epoch, or tensor path."""


@dataclass(frozen=True)
class WidgetQuery:
    """A widget's bound data query."""

    models: tuple[str, ...]
    source: str = "checkpoint"  # checkpoint | metrics | record
    epoch: object = "latest"  # int | "latest" | "*"
    path: str = ""
    transform: tuple = ()  # transform spec document (list of op objects)
    classes: Optional[tuple[int, ...]] = None

    def to_doc(self) -> dict:
        return {
            "models": list(self.models),
            "source": self.source,
            "epoch": self.epoch,
            "path": self.path,
            "transform": [dict(op) for op in self.transform],
            "classes": None if self.classes is None else list(self.classes),
        }


def is_sample_aligned(path: str) -> bool:
    return path.startswith("data_samples/") or path.endswith("/activations")


def validate_path(path: str) -> str:
    if not _PATH_RE.match(path):
        raise QueryError(f"invalid tensor path: {path}")
    return path


def _get_record(catalog: ExperimentCatalog, model_id: str) -> ModelRecord:
    if model_id not in catalog.models:
        raise NotFoundError(f"unknown model: {model_id}")
    return catalog.models[model_id]


def _resolve_epochs(record: ModelRecord, selector) -> list[int]:
    if not record.checkpoints:
        raise NotFoundError(f"model {record.id} has no checkpoints")
    if selector == "*":
        return [b.epoch for b in record.checkpoints]
    if selector == "latest":
        return [record.latest_checkpoint.epoch]
    try:
        epoch = int(selector)
    except (TypeError, ValueError):
        raise QueryError(f"invalid epoch selector: {selector!r}")
    if not any(b.epoch == epoch for b in record.checkpoints):
        raise NotFoundError(f"model {record.id} has no checkpoint at epoch {epoch}")
    return [epoch]


def _query_one_epoch(catalog: ExperimentCatalog, record: ModelRecord, epoch: int,
                     path: str, spec, classes: Optional[Sequence[int]]) -> dict:
    bundle = record.checkpoint(epoch)
    if path not in bundle.tensors:
        raise NotFoundError(f"no tensor at {path} in epoch {epoch} of {record.id}")
    values = read_tensor(bundle.tensors[path]).values

    labels = None
    if "data_samples/y_label" in bundle.tensors:
        labels = read_tensor(bundle.tensors["data_samples/y_label"]).values.ravel()

    if classes:
        wanted = sorted(set(int(c) for c in classes))
        for c in wanted:
            if not 0 <= c < max(1, len(catalog.class_labels)):
                raise QueryError(f"unknown class id: {c}")
        if is_sample_aligned(path):
            if labels is None:
                raise QueryError("class filter requires y_label in the checkpoint")
            mask = np.isin(labels, wanted)
            values = values[mask]
            labels = labels[mask]
        elif path.endswith("/mean_class_activations"):
            values = values[wanted]

    table = apply_transform(values, spec, labels=labels,
                            class_names=list(catalog.class_labels) or None)
    doc = table.to_doc()
    doc["epoch"] = epoch
    return doc


def run_tensor_query(catalog: ExperimentCatalog, model_id: str, selector,
                     path: str, transform_doc, classes: Optional[Sequence[int]] = None) -> dict:
    """Run one checkpoint query; wildcard selectors yield an epoch series."""
    record = _get_record(catalog, model_id)
    validate_path(path)
    spec = parse_transform(transform_doc)
    epochs = _resolve_epochs(record, selector)
    if selector == "*":
        results = [
            _query_one_epoch(catalog, record, e, path, spec, classes) for e in epochs
        ]
        return {
            "type": "epoch_series",
            "model": model_id,
            "path": path,
            "epochs": epochs,
            "results": results,
        }
    doc = _query_one_epoch(catalog, record, epochs[0], path, spec, classes)
    doc["model"] = model_id
    doc["path"] = path
    return doc


def _metrics_doc(records: list[ModelRecord], metric: str) -> dict:
    columns: dict[str, list[float]] = {}
    length = 0
    for record in records:
        names = sorted(record.metrics) if metric == "*" else [metric]
        for name in names:
            if name not in record.metrics:
                raise NotFoundError(f"model {record.id} has no metric '{name}'")
            key = name if len(records) == 1 else f"{record.id}/{name}"
            series = list(record.metrics[name])
            columns[key] = series
            length = max(length, len(series))
    return {
        "type": "table",
        "columns": {"epoch": list(range(length)), **columns},
    }


def _record_doc(records: list[ModelRecord], field_name: str) -> dict:
    if field_name not in RECORD_FIELDS:
        raise QueryError(f"unknown record field: {field_name}")
    columns = {
        record.id: [float(getattr(record, field_name))
                    if getattr(record, field_name) is not None else 0.0]
        for record in records
    }
    return {"type": "table", "columns": columns}


def run_widget_query(catalog: ExperimentCatalog, query: WidgetQuery) -> dict:
    """Execute a widget's bound query against the catalog."""
    records = [_get_record(catalog, mid) for mid in query.models]
    if query.source == "metrics":
        return _metrics_doc(records, query.path or "*")
    if query.source == "record":
        return _record_doc(records, query.path)
    if query.source != "checkpoint":
        raise QueryError(f"unknown query source: {query.source}")
    if len(records) != 1:
        raise QueryError("checkpoint queries bind exactly one model")
    return run_tensor_query(catalog, records[0].id, query.epoch, query.path,
                            list(query.transform), query.classes)
