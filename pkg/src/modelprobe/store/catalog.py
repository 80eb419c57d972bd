"""Loading, validating, and hot-reloading the experiment catalog.

Directory layout::

    <root>/models.db                                  model database (JSON)
    <root>/<model_id>/graph.doc                       architecture graph (JSON)
    <root>/<model_id>/checkpoints/<epoch>/manifest.doc
    <root>/<model_id>/checkpoints/<epoch>/tensors/<name>.bin

The catalog is an immutable snapshot; ``CatalogHolder`` republishes a new
snapshot (with a strictly greater version) when the files change and keeps
the previous one when the new state fails validation.
"""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Iterable, Optional

from .model import (
    ArchitectureGraph,
    CheckpointBundle,
    DatabaseNotFoundError,
    DTYPES,
    ExperimentCatalog,
    InnerOp,
    LayerDesc,
    LineageError,
    MalformedRecordError,
    ModelHeader,
    ModelRecord,
    StoreError,
    TensorRef,
    parse_timestamp,
)
from .tensor_io import check_blob_length

log = logging.getLogger(__name__)

DB_FILENAME = "models.db"
# Server-side state files living inside the root that must not trigger reloads.
NON_CATALOG_FILES = {"notes.db", "session.db"}


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise MalformedRecordError(f"{context}: missing field '{key}'")
    return doc[key]


def _load_graph(path: Path, context: str) -> ArchitectureGraph:
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise MalformedRecordError(f"{context}: missing graph file {path}")
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"{context}: malformed graph file: {exc}")
    layers = []
    seen = set()
    for ldoc in _require(doc, "layers", context):
        lid = _require(ldoc, "id", context)
        if lid in seen:
            raise MalformedRecordError(f"{context}: duplicate layer id '{lid}'")
        seen.add(lid)
        layers.append(
            LayerDesc(
                id=lid,
                name=ldoc.get("name", lid),
                type=_require(ldoc, "type", context),
                output_shape=tuple(ldoc.get("output_shape", ())),
                inner_ops=tuple(
                    InnerOp(id=o["id"], kind=o["kind"], attrs=o.get("attrs", {}))
                    for o in ldoc.get("inner_ops", ())
                ),
                inner_edges=tuple(tuple(e) for e in ldoc.get("inner_edges", ())),
            )
        )
    edges = tuple(tuple(e) for e in doc.get("edges", ()))
    graph = ArchitectureGraph(layers=tuple(layers), edges=edges)
    _check_dag((l.id for l in graph.layers), graph.edges, f"{context}: layer graph")
    for layer in graph.layers:
        _check_dag(
            (op.id for op in layer.inner_ops),
            layer.inner_edges,
            f"{context}: inner graph of layer '{layer.id}'",
        )
    return graph


def _check_dag(nodes: Iterable[str], edges: tuple[tuple[str, str], ...], context: str) -> None:
    nodes = list(nodes)
    adj = {n: [] for n in nodes}
    for a, b in edges:
        if a not in adj or b not in adj:
            raise MalformedRecordError(f"{context}: edge ({a}, {b}) references unknown node")
        adj[a].append(b)
    state: dict[str, int] = {}

    def visit(n: str) -> None:
        state[n] = 1
        for m in adj[n]:
            mark = state.get(m, 0)
            if mark == 1:
                raise MalformedRecordError(f"{context}: cycle through '{m}'")
            if mark == 0:
                visit(m)
        state[n] = 2

    for n in nodes:
        if state.get(n, 0) == 0:
            visit(n)


def _load_checkpoint(model_dir: Path, entry: dict, context: str) -> CheckpointBundle:
    epoch = _require(entry, "epoch", context)
    manifest_path = model_dir.parent / _require(entry, "manifest", context)
    try:
        doc = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise MalformedRecordError(f"{context}: missing manifest {manifest_path}")
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"{context}: malformed manifest: {exc}")
    if doc.get("epoch") != epoch:
        raise MalformedRecordError(
            f"{context}: manifest epoch {doc.get('epoch')} != catalog epoch {epoch}"
        )
    tensors = {}
    for path, tdoc in _require(doc, "tensors", context).items():
        dtype = _require(tdoc, "dtype", f"{context}: tensor {path}")
        if dtype not in DTYPES:
            raise MalformedRecordError(f"{context}: tensor {path}: unknown dtype '{dtype}'")
        ref = TensorRef(
            dtype=dtype,
            shape=tuple(_require(tdoc, "shape", f"{context}: tensor {path}")),
            blob=manifest_path.parent / _require(tdoc, "blob", f"{context}: tensor {path}"),
        )
        check_blob_length(ref)
        tensors[path] = ref
    return CheckpointBundle(epoch=epoch, tensors=tensors, manifest_path=manifest_path)


def _check_bundle_alignment(
    bundle: CheckpointBundle, context: str, expected_classes: Optional[int]
) -> None:
    """First dims of x, y_label, y_prediction, and all activations must agree."""
    sample_dims = {}
    for path in ("data_samples/x", "data_samples/y_label", "data_samples/y_prediction"):
        if path in bundle.tensors:
            sample_dims[path] = bundle.tensors[path].shape[0]
    for path, ref in bundle.tensors.items():
        if path.startswith("layers/") and path.endswith("/activations"):
            sample_dims[path] = ref.shape[0]
    if len(set(sample_dims.values())) > 1:
        raise MalformedRecordError(
            f"{context}: first-dimension mismatch across sample-aligned tensors: "
            f"{sorted(sample_dims.items())}"
        )
    if expected_classes is not None:
        for path, ref in bundle.tensors.items():
            if path.endswith("/mean_class_activations") and ref.shape[0] != expected_classes:
                raise MalformedRecordError(
                    f"{context}: {path} first dimension {ref.shape[0]} != "
                    f"number of classes {expected_classes}"
                )


def _check_lineage(headers: dict[str, ModelHeader]) -> None:
    for h in headers.values():
        for parent in h.parents:
            if parent not in headers:
                raise LineageError(f"unresolved parent: {parent}")
    state: dict[str, int] = {}

    def visit(mid: str) -> None:
        state[mid] = 1
        for parent in headers[mid].parents:
            mark = state.get(parent, 0)
            if mark == 1:
                raise LineageError(f"cyclic parent relation through '{parent}'")
            if mark == 0:
                visit(parent)
        state[mid] = 2

    for mid in headers:
        if state.get(mid, 0) == 0:
            visit(mid)


def load_catalog(root: Path, version: int = 1) -> ExperimentCatalog:
    """Load and fully validate the experiment log under ``root``."""
    root = Path(root)
    db_path = root / DB_FILENAME
    if not db_path.exists():
        raise DatabaseNotFoundError(f"model database not found: {db_path}")
    try:
        db = json.loads(db_path.read_text() or "{}")
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"malformed model database: {exc}")
    class_labels = tuple(db.get("class_labels", ()))

    headers: dict[str, ModelHeader] = {}
    raw_records = db.get("models", [])
    for doc in raw_records:
        context = f"model record '{doc.get('id', '?')}'"
        header = ModelHeader(
            id=_require(doc, "id", context),
            name=_require(doc, "name", context),
            parents=tuple(_require(doc, "parents", context)),
            created_at=parse_timestamp(_require(doc, "created_at", context)),
        )
        if not header.id:
            raise MalformedRecordError("model record with empty id")
        if header.id in headers:
            raise MalformedRecordError(f"duplicate model id '{header.id}'")
        headers[header.id] = header
    _check_lineage(headers)

    models: dict[str, ModelRecord] = {}
    for doc in raw_records:
        mid = doc["id"]
        context = f"model record '{mid}'"
        model_dir = root / mid
        graph_path = root / _require(doc, "graph", context)
        graph = _load_graph(graph_path, context)
        metrics = {
            name: tuple(float(v) for v in series)
            for name, series in _require(doc, "metrics", context).items()
        }
        lengths = {len(s) for s in metrics.values()}
        if len(lengths) > 1:
            raise MalformedRecordError(
                f"{context}: metric series do not share an index domain: "
                f"{sorted((k, len(v)) for k, v in metrics.items())}"
            )
        bundles = []
        last_epoch = None
        for entry in _require(doc, "checkpoints", context):
            bundle = _load_checkpoint(model_dir, entry, context)
            if last_epoch is not None and bundle.epoch <= last_epoch:
                raise MalformedRecordError(
                    f"{context}: checkpoint epochs not strictly increasing"
                )
            last_epoch = bundle.epoch
            _check_bundle_alignment(bundle, context, expected_classes=len(class_labels))
            bundles.append(bundle)
        num_params = int(_require(doc, "num_trainable_params", context))
        save_size = int(_require(doc, "save_size_bytes", context))
        if num_params < 0 or save_size < 0:
            raise MalformedRecordError(f"{context}: negative size field")
        runtime = doc.get("runtime_ms_per_sample")
        models[mid] = ModelRecord(
            header=headers[mid],
            num_trainable_params=num_params,
            save_size_bytes=save_size,
            runtime_ms_per_sample=None if runtime is None else float(runtime),
            metrics=metrics,
            checkpoints=tuple(bundles),
            graph=graph,
            graph_path=graph_path,
        )

    return ExperimentCatalog(
        version=version, models=models, class_labels=class_labels, root=root
    )


def validate_header(header: ModelHeader, catalog: ExperimentCatalog) -> list[str]:
    """Return all violations a header would introduce; empty means ok."""
    violations = []
    if not header.id:
        violations.append("empty id")
    if header.id in catalog.models:
        violations.append("duplicate id")
    parents: dict[str, tuple[str, ...]] = {
        mid: rec.header.parents for mid, rec in catalog.models.items()
    }
    for parent in header.parents:
        if parent not in parents and parent != header.id:
            violations.append(f"unresolved parent: {parent}")
    parents[header.id] = header.parents
    state: dict[str, int] = {}

    def has_cycle(mid: str) -> bool:
        state[mid] = 1
        for parent in parents.get(mid, ()):
            if parent not in parents:
                continue
            mark = state.get(parent, 0)
            if mark == 1 or (mark == 0 and has_cycle(parent)):
                return True
        state[mid] = 2
        return False

    if any(state.get(mid, 0) == 0 and has_cycle(mid) for mid in parents):
        violations.append("cycle")
    return violations


def compute_save_size(model: ModelRecord) -> int:
    """Byte count of all weight blobs in the latest checkpoint."""
    bundle = model.latest_checkpoint
    return sum(ref.num_bytes for ref in bundle.weight_refs())


def scan_signature(root: Path) -> tuple:
    """Cheap change signature of the catalog files under ``root``.

    Covers the database, graph and manifest documents, and tensor blobs;
    ignores the server-side note/session state living in the same directory.
    """
    root = Path(root)
    entries = []
    if not root.exists():
        return ()
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        if path.name in NON_CATALOG_FILES:
            continue
        stat = path.stat()
        entries.append((str(path.relative_to(root)), stat.st_mtime_ns, stat.st_size))
    return tuple(entries)


class CatalogHolder:
    """Publishes immutable catalog snapshots; the single writer on reload."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self._catalog = load_catalog(self.root, version=1)
        self._signature = scan_signature(self.root)
        self._lock = threading.Lock()

    @property
    def catalog(self) -> ExperimentCatalog:
        return self._catalog

    def poll(self) -> bool:
        """Reload if files changed; returns True when a new snapshot published.

        An invalid new state keeps the previous snapshot (and version) and
        logs the failure.
        """
        signature = scan_signature(self.root)
        if signature == self._signature:
            return False
        with self._lock:
            recheck = scan_signature(self.root)
            if recheck == self._signature:
                return False
            try:
                fresh = load_catalog(self.root, version=self._catalog.version + 1)
            except StoreError as exc:
                log.error("catalog reload failed, keeping version %d: %s",
                          self._catalog.version, exc)
                self._signature = recheck
                return False
            self._catalog = fresh
            self._signature = recheck
            return True

    def watch(self, interval_s: float, stop: threading.Event) -> None:
        """Poll loop for a background watcher thread."""
        while not stop.wait(interval_s):
            self.poll()
