"""HTTP service over the catalog: model info, backbone views, checkpoint
queries with transforms, interestingness reports, tool and widget surfaces,
notes, sessions, and the branch endpoint.

Every request reads one immutable catalog snapshot; a background watcher is
the only writer and republishes atomically on file changes. Checkpoint query
and interestingness responses are cached under version-scoped keys; the
``cached`` response header flags hits. All routes are read-only except the
notes, session, and branch endpoints.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import uuid

from fastapi import FastAPI, Request, Response

from . import _kernels, backbone, components, interestingness, queries
from .cache import ResponseCache, make_key
from .store.catalog import CatalogHolder

JSON = "application/json"


def _dump(doc) -> bytes:
    return json.dumps(doc, separators=(",", ":")).encode()


def _json_response(doc, status: int = 200, headers: Optional[dict] = None) -> Response:
    return Response(content=_dump(doc), media_type=JSON, status_code=status,
                    headers=headers or {})


def _not_found(message: str, ident: str) -> Response:
    return _json_response({"error": message, "id": ident}, status=404)


def _bad_request(message: str, **extra) -> Response:
    return _json_response({"error": message, **extra}, status=400)


class ServerState:
    def __init__(self, log_dir: Path, cache_mb: int = 256):
        self.holder = CatalogHolder(Path(log_dir))
        self.cache = ResponseCache(max_bytes=cache_mb * 1024 * 1024)
        self.notes = components.NotesStore(Path(log_dir) / "notes.db")
        self.session_path = Path(log_dir) / "session.db"
        self.stop_event = threading.Event()
        self._watcher: Optional[threading.Thread] = None

    @property
    def catalog(self):
        return self.holder.catalog

    def load_session(self) -> dict:
        if self.session_path.exists():
            return json.loads(self.session_path.read_text())
        return {"widgets": [], "groups": [], "panel": {}}

    def save_session(self, doc: dict) -> None:
        tmp = self.session_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True))
        tmp.replace(self.session_path)

    def start_watcher(self, interval_s: float = 0.5) -> None:
        if self._watcher is not None:
            return
        self._watcher = threading.Thread(
            target=self.holder.watch, args=(interval_s, self.stop_event), daemon=True
        )
        self._watcher.start()

    def stop_watcher(self) -> None:
        self.stop_event.set()


def create_app(state: ServerState) -> FastAPI:
    app = FastAPI(title="modelprobe", version="0.1.0")
    app.state.probe = state

    @app.get("/meta")
    def meta():
        catalog = state.catalog
        return _json_response({
            "version": catalog.version,
            "class_labels": list(catalog.class_labels),
            "num_models": len(catalog.models),
            "kernel_backend": _kernels.backend(),
        })

    @app.get("/openapi")
    def openapi_listing():
        return _json_response(app.openapi())

    @app.get("/models")
    def model_ids():
        return _json_response(sorted(state.catalog.models))

    @app.get("/models/{model_id}/info")
    def model_info(model_id: str):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        record = catalog.models[model_id]
        return _json_response({
            **record.header.to_doc(),
            "num_trainable_params": record.num_trainable_params,
            "save_size_bytes": record.save_size_bytes,
            "runtime_ms_per_sample": record.runtime_ms_per_sample,
            "metrics": {k: list(v) for k, v in sorted(record.metrics.items())},
            "checkpoints": [b.epoch for b in record.checkpoints],
        })

    @app.get("/models/{model_id}/graph")
    def model_graph(model_id: str):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        return _json_response(catalog.models[model_id].graph.to_doc())

    @app.get("/models/{model_id}/metrics")
    def model_metrics(model_id: str):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        record = catalog.models[model_id]
        return _json_response({"metrics": {k: list(v) for k, v in sorted(record.metrics.items())}})

    @app.get("/models/{model_id}/checkpoints")
    def model_checkpoints(model_id: str):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        record = catalog.models[model_id]
        return _json_response({
            "checkpoints": [
                {"epoch": b.epoch, "paths": sorted(b.tensors)}
                for b in record.checkpoints
            ]
        })

    @app.get("/experiments/tree")
    def experiments_tree():
        return _json_response(backbone.build_model_tree(state.catalog).to_doc())

    @app.get("/search")
    def search(kind: str):
        try:
            badges = backbone.propagate_badges(state.catalog, kind)
        except backbone.BadgeQueryError as exc:
            return _bad_request(str(exc))
        return _json_response({"query": kind, "badges": [b.to_doc() for b in badges]})

    @app.get("/structures/{model_id}")
    def structures(model_id: str):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        try:
            report = backbone.detect_structures(catalog.models[model_id].graph)
        except backbone.GraphStructureError as exc:
            return _bad_request(str(exc))
        return _json_response({
            "model": model_id,
            "skip_connection": [list(p) for p in report["skip_connection"]],
            "multi_branch": [list(p) for p in report["multi_branch"]],
        })

    @app.get("/models/{model_id}/layers/{layer_id}/neuron_weight_view")
    def neuron_weight_view(model_id: str, layer_id: str, epoch: str = "latest",
                           k: int = 8, classes: Optional[str] = None):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        selection = (
            [int(c) for c in classes.split(",") if c != ""]
            if classes else list(range(len(catalog.class_labels)))
        )
        try:
            view = backbone.build_neuron_weight_view(
                catalog, model_id, layer_id, _epoch_selector(epoch), selection, k)
        except backbone.ViewError as exc:
            return _bad_request(str(exc))
        return _json_response(view.to_doc())

    @app.get("/models/{model_id}/layers/{layer_id}/neurons_by_class")
    def neurons_by_class(model_id: str, layer_id: str, epoch: str = "latest",
                         sort_by: Optional[int] = None):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        try:
            rows = backbone.neurons_by_class_matrix(
                catalog, model_id, layer_id, _epoch_selector(epoch), sort_by)
        except backbone.ViewError as exc:
            return _bad_request(str(exc))
        return _json_response({"model": model_id, "layer": layer_id, "rows": rows})

    @app.post("/models/{model_id}/checkpoints/{epoch}/query")
    async def checkpoint_query(model_id: str, epoch: str, request: Request):
        catalog = state.catalog
        try:
            body = json.loads(await request.body() or b"{}")
        except json.JSONDecodeError as exc:
            return _bad_request(f"malformed request body: {exc}")
        route = f"/models/{model_id}/checkpoints/{epoch}/query"
        key = make_key(catalog.version, route, body)
        cached = state.cache.get(key)
        if cached is not None:
            return Response(content=cached, media_type=JSON,
                            headers={"cached": "true"})
        try:
            doc = queries.run_tensor_query(
                catalog, model_id, _epoch_selector(epoch),
                body.get("path", ""), body.get("transform", []),
                body.get("classes"),
            )
        except queries.NotFoundError as exc:
            return _not_found(str(exc), model_id)
        except queries.QueryError as exc:
            return _bad_request(str(exc))
        except Exception as exc:  # transform errors carry their op index
            op_index = getattr(exc, "op_index", None)
            if op_index is None:
                raise
            return _bad_request(str(exc), op_index=op_index)
        payload = _dump(doc)
        state.cache.put(key, payload)
        return Response(content=payload, media_type=JSON, headers={"cached": "false"})

    @app.get("/interestingness")
    def interestingness_report(measure: str, epoch: str = "latest",
                               baseline: str = "standard_normal",
                               models: Optional[str] = None):
        catalog = state.catalog
        params = {"measure": measure, "epoch": epoch, "baseline": baseline,
                  "models": models}
        key = make_key(catalog.version, "/interestingness", params)
        cached = state.cache.get(key)
        if cached is not None:
            return Response(content=cached, media_type=JSON,
                            headers={"cached": "true"})
        try:
            m = interestingness.InterestingnessMeasure(
                kind=measure,
                baseline=(interestingness.BaselineSpec(kind=baseline)
                          if measure == "baseline_divergence" else None),
            )
            report = interestingness.score_and_propagate(
                catalog, _epoch_selector(epoch), m,
                models=models.split(",") if models else None,
            )
        except interestingness.ScoringError as exc:
            return _bad_request(str(exc))
        doc = report.to_doc()
        doc["colors"] = {
            unit: interestingness.colorize(score)
            for unit, score in report.propagated.items()
        }
        payload = _dump(doc)
        state.cache.put(key, payload)
        return Response(content=payload, media_type=JSON, headers={"cached": "false"})

    @app.get("/tools")
    def tools():
        return _json_response({"tools": [t.to_doc() for t in components.BUILTIN_TOOLS]})

    @app.get("/tools/applicable")
    def tools_applicable(uoa: str):
        catalog = state.catalog
        try:
            path = backbone.UnitPath.parse(uoa)
            applicable = components.applicable_tools(path, catalog)
        except backbone.ResolveError as exc:
            return _bad_request(str(exc))
        return _json_response({"uoa": uoa, "tools": [t.to_doc() for t in applicable]})

    @app.post("/widgets/instantiate")
    async def widgets_instantiate(request: Request):
        catalog = state.catalog
        body = json.loads(await request.body() or b"{}")
        registry = components.registry_by_id()
        tool = registry.get(body.get("tool", ""))
        if tool is None:
            return _not_found("unknown tool", body.get("tool", ""))
        try:
            path = backbone.UnitPath.parse(body.get("uoa", ""))
            widget = components.instantiate_widget(
                tool, path, catalog,
                class_selection=body.get("classes"),
                checkpoint_selector=_epoch_selector(body.get("epoch", "latest")),
            )
        except (backbone.ResolveError, components.ToolError,
                components.DimensionConflictError) as exc:
            return _bad_request(str(exc))
        return _json_response(widget.to_doc())

    @app.post("/queries/run")
    async def queries_run(request: Request):
        catalog = state.catalog
        body = json.loads(await request.body() or b"{}")
        try:
            query = queries.WidgetQuery(
                models=tuple(body.get("models", ())),
                source=body.get("source", "checkpoint"),
                epoch=_epoch_selector(body.get("epoch", "latest")),
                path=body.get("path", ""),
                transform=tuple(body.get("transform", ())),
                classes=tuple(body["classes"]) if body.get("classes") else None,
            )
            doc = queries.run_widget_query(catalog, query)
        except queries.NotFoundError as exc:
            return _not_found(str(exc), "")
        except queries.QueryError as exc:
            return _bad_request(str(exc))
        except Exception as exc:
            op_index = getattr(exc, "op_index", None)
            if op_index is None:
                raise
            return _bad_request(str(exc), op_index=op_index)
        return _json_response(doc)

    @app.post("/models/{model_id}/branch")
    async def branch_model(model_id: str, request: Request):
        catalog = state.catalog
        if model_id not in catalog.models:
            return _not_found("unknown model", model_id)
        body = json.loads(await request.body() or b"{}")
        name = body.get("name") or f"{catalog.models[model_id].header.name}-branch"
        header = {
            "id": f"{model_id}-b{uuid.uuid4().hex[:6]}",
            "name": name,
            "parents": [model_id],
            "created_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        }
        return _json_response(header)

    @app.get("/notes")
    def notes_list(uoa: Optional[str] = None):
        return _json_response({"notes": state.notes.list(uoa)})

    @app.post("/notes")
    async def notes_add(request: Request):
        body = json.loads(await request.body() or b"{}")
        if not body.get("uoa"):
            return _bad_request("note needs a 'uoa' field")
        note = state.notes.add(
            uoa=body["uoa"],
            markdown=body.get("markdown", ""),
            created_at=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        )
        return _json_response(note, status=201)

    @app.get("/session")
    def session_get():
        return _json_response(state.load_session())

    @app.put("/session")
    async def session_put(request: Request):
        body = json.loads(await request.body() or b"{}")
        state.save_session(body)
        return _json_response({"ok": True})

    return app


def _epoch_selector(epoch):
    if epoch in ("latest", "*"):
        return epoch
    try:
        return int(epoch)
    except (TypeError, ValueError):
        return epoch


def serve(log_dir: Path, port: int = 8080, cache_mb: int = 256,
          watch: bool = True) -> None:
    import uvicorn

    state = ServerState(log_dir, cache_mb=cache_mb)
    if watch:
        state.start_watcher()
    app = create_app(state)
    try:
        uvicorn.run(app, host="0.0.0.0", port=port, log_level="info")
    finally:
        state.stop_watcher()
