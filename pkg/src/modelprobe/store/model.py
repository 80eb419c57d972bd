"""Domain types for the on-disk experiment log and its in-memory catalog.

All types are immutable snapshots: a loaded catalog is never mutated, a
reload produces a fresh catalog with a strictly greater version number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

DTYPES = {"f32": "<f4", "i32": "<i4", "i64": "<i8"}
DTYPE_SIZES = {"f32": 4, "i32": 4, "i64": 8}

OP_KINDS = (
    "matmul",
    "add",
    "conv",
    "activation",
    "reshape",
    "concat",
    "variable-kernel",
    "variable-bias",
    "custom",
)


class StoreError(Exception):
    """Base class for experiment-store failures."""


class DatabaseNotFoundError(StoreError):
    pass


class MalformedRecordError(StoreError):
    pass


class LineageError(StoreError):
    """Unresolved parent or cyclic parent relation."""


class TensorFormatError(StoreError):
    """Blob length mismatch or unknown dtype tag."""


def parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class ModelHeader:
    id: str
    name: str
    parents: tuple[str, ...]
    created_at: datetime

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "parents": list(self.parents),
            "created_at": format_timestamp(self.created_at),
        }


@dataclass(frozen=True)
class TensorRef:
    dtype: str
    shape: tuple[int, ...]
    blob: Path

    @property
    def num_elements(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    @property
    def num_bytes(self) -> int:
        return self.num_elements * DTYPE_SIZES[self.dtype]


@dataclass(frozen=True)
class Tensor:
    dtype: str
    shape: tuple[int, ...]
    values: np.ndarray


@dataclass(frozen=True)
class InnerOp:
    id: str
    kind: str
    attrs: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class LayerDesc:
    id: str
    name: str
    type: str
    output_shape: tuple[int, ...]
    inner_ops: tuple[InnerOp, ...] = ()
    inner_edges: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ArchitectureGraph:
    layers: tuple[LayerDesc, ...]
    edges: tuple[tuple[str, str], ...]

    def layer(self, layer_id: str) -> LayerDesc:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise KeyError(layer_id)

    def predecessors(self, layer_id: str) -> list[str]:
        return [a for a, b in self.edges if b == layer_id]

    def to_doc(self) -> dict:
        return {
            "layers": [
                {
                    "id": l.id,
                    "name": l.name,
                    "type": l.type,
                    "output_shape": list(l.output_shape),
                    "inner_ops": [
                        {"id": op.id, "kind": op.kind, "attrs": dict(op.attrs)}
                        for op in l.inner_ops
                    ],
                    "inner_edges": [list(e) for e in l.inner_edges],
                }
                for l in self.layers
            ],
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class CheckpointBundle:
    """Per-epoch tensor map, addressed by logical paths.

    Logical paths follow ``data_samples/{x,y_label,y_prediction}``,
    ``layers/<name>/{activations,mean_class_activations}`` and
    ``layers/<name>/weights/{kernel,bias}``.
    """

    epoch: int
    tensors: Mapping[str, TensorRef]
    manifest_path: Path

    def weight_refs(self) -> list[TensorRef]:
        return [
            ref
            for path, ref in sorted(self.tensors.items())
            if "/weights/" in path
        ]


@dataclass(frozen=True)
class ModelRecord:
    header: ModelHeader
    num_trainable_params: int
    save_size_bytes: int
    runtime_ms_per_sample: Optional[float]
    metrics: Mapping[str, tuple[float, ...]]
    checkpoints: tuple[CheckpointBundle, ...]
    graph: ArchitectureGraph
    graph_path: Path

    @property
    def id(self) -> str:
        return self.header.id

    def checkpoint(self, epoch: int) -> CheckpointBundle:
        for bundle in self.checkpoints:
            if bundle.epoch == epoch:
                return bundle
        raise KeyError(epoch)

    @property
    def latest_checkpoint(self) -> CheckpointBundle:
        if not self.checkpoints:
            raise StoreError(f"model {self.id} has no checkpoints")
        return self.checkpoints[-1]


@dataclass(frozen=True)
class ExperimentCatalog:
    version: int
    models: Mapping[str, ModelRecord]
    class_labels: tuple[str, ...]
    root: Path

    def model(self, model_id: str) -> ModelRecord:
        try:
            return self.models[model_id]
        except KeyError:
            raise KeyError(model_id) from None
