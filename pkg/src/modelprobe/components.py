"""Debugging components: design-dimension resolution, the built-in tool
registry, widget instantiation, grouping, class selection, and the session
document a UI persists and restores.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .backbone import UnitPath, experiment_partition, resolve as resolve_unit
from .queries import WidgetQuery
from .store.model import ExperimentCatalog

DATA_KINDS = ("structural", "scalar", "n_dimensional", "function")
TASKS = ("assessment", "verification", "comparison")
LEVELS = ("multi_model", "single_model", "layer_unit", "weight_neuron")
PROCESSING = ("raw", "transformation", "aggregation", "statistical_descriptors")
REPRESENTATIONS = ("visualization", "verbalization")
DEPENDENCIES = ("none", "dataset", "model", "layer")

_SLOT_DOMAINS = {
    "data": DATA_KINDS,
    "task": TASKS,
    "level": LEVELS,
    "processing": PROCESSING,
    "representation": REPRESENTATIONS,
    "dependencies": DEPENDENCIES,
}

# dependencies are inferred from the chosen data kind, never user-assigned
_INFERRED_DEPENDENCIES = {
    "structural": "none",
    "scalar": "none",
    "n_dimensional": "dataset",
    "function": "layer",
}


class DimensionConflictError(ValueError):
    def __init__(self, cause: str, existing: str):
        super().__init__(f"contradiction: {cause} conflicts with {existing}")
        self.pair = (cause, existing)


class ToolError(ValueError):
    pass


class GroupError(ValueError):
    pass


@dataclass(frozen=True)
class Slot:
    value: Optional[str] = None
    excluded: frozenset = frozenset()

    @property
    def fixed(self) -> bool:
        return self.value is not None

    def to_doc(self):
        if self.fixed:
            return {"fixed": self.value}
        if self.excluded:
            return {"free": True, "excluded": sorted(self.excluded)}
        return {"free": True}


@dataclass(frozen=True)
class DimensionState:
    data: Slot = Slot()
    task: Slot = Slot()
    level: Slot = Slot()
    processing: Slot = Slot()
    representation: Slot = Slot()
    dependencies: Slot = Slot()

    @classmethod
    def partial(cls, **fixed: str) -> "DimensionState":
        """Build a user state; the dependencies slot cannot be assigned."""
        if "dependencies" in fixed:
            raise ValueError("the dependencies dimension is inferred, not assigned")
        slots = {}
        for name, value in fixed.items():
            if name not in _SLOT_DOMAINS:
                raise ValueError(f"unknown dimension: {name}")
            if value not in _SLOT_DOMAINS[name]:
                raise ValueError(f"unknown {name} characteristic: {value}")
            slots[name] = Slot(value=value)
        return cls(**slots)

    @property
    def fully_fixed(self) -> bool:
        return all(
            getattr(self, name).fixed for name in _SLOT_DOMAINS
        )

    def to_doc(self) -> dict:
        return {name: getattr(self, name).to_doc() for name in _SLOT_DOMAINS}


def _fix(state: DimensionState, name: str, value: str, cause: str) -> DimensionState:
    slot: Slot = getattr(state, name)
    if slot.fixed:
        if slot.value != value:
            raise DimensionConflictError(cause, f"{name}={slot.value}")
        return state
    if value in slot.excluded:
        raise DimensionConflictError(cause, f"{name} excludes {value}")
    return replace(state, **{name: Slot(value=value, excluded=slot.excluded)})


def _exclude(state: DimensionState, name: str, value: str, cause: str) -> DimensionState:
    slot: Slot = getattr(state, name)
    if slot.fixed:
        if slot.value == value:
            raise DimensionConflictError(cause, f"{name}={slot.value}")
        return state
    if value in slot.excluded:
        return state
    return replace(state, **{name: Slot(excluded=slot.excluded | {value})})


def resolve_dimensions(partial: DimensionState) -> DimensionState:
    """Propagate the dimension constraint rules to a fixpoint.

    Rules: comparison forces the multi-model level; structural data under a
    visual representation forces transformation processing, under a verbal
    one statistical descriptors; binned aggregation never applies to
    structural data; the dependencies dimension follows the data kind.
    Unreached slots stay free."""
    state = partial
    for _ in range(8):
        before = state
        if state.task.value == "comparison":
            state = _fix(state, "level", "multi_model", "task=comparison")
        if state.data.value == "structural":
            state = _exclude(state, "processing", "aggregation", "data=structural")
            if state.representation.value == "visualization":
                state = _fix(state, "processing", "transformation",
                             "data=structural & representation=visualization")
            if state.representation.value == "verbalization":
                state = _fix(state, "processing", "statistical_descriptors",
                             "data=structural & representation=verbalization")
        if state.data.fixed:
            state = _fix(state, "dependencies",
                         _INFERRED_DEPENDENCIES[state.data.value],
                         f"data={state.data.value}")
        if state == before:
            return state
    return state


def query_scope(state: DimensionState) -> str:
    """Multi-model states query across models; everything else targets one unit."""
    return "models" if state.level.value == "multi_model" else "unit"


@dataclass(frozen=True)
class ToolDescriptor:
    id: str
    name: str
    description: str
    category: str
    applicable_uoa_kinds: frozenset
    applicable_levels: frozenset
    produces: str
    class_recomputable: bool
    dimensions: dict
    query_source: Optional[str] = None  # checkpoint | metrics | record
    query_path: Optional[str] = None  # template, may hold {layer}/{variable}
    query_transform: tuple = ()
    query_epoch: object = "latest"
    action: Optional[str] = None

    def __post_init__(self):
        if not self.applicable_uoa_kinds or not self.applicable_levels:
            raise ToolError(f"tool {self.id} declares empty applicability")

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "category": self.category,
            "applicable_uoa_kinds": sorted(self.applicable_uoa_kinds),
            "applicable_levels": sorted(self.applicable_levels),
            "produces": self.produces,
            "class_recomputable": self.class_recomputable,
            "functional": self.action is not None,
        }


_ALL_KINDS = frozenset(("experiment", "model", "layer", "op", "variable", "neuron", "weight"))
_MODEL_SCOPE = frozenset(("experiment", "model"))
_MODEL_LEVELS = frozenset(("multi_model", "single_model"))

BUILTIN_TOOLS: tuple[ToolDescriptor, ...] = (
    ToolDescriptor(
        id="performance-metrics", name="Performance Metrics",
        description="Training metric series (loss, accuracy, ...) per epoch.",
        category="metrics", applicable_uoa_kinds=_MODEL_SCOPE,
        applicable_levels=_MODEL_LEVELS, produces="line_chart",
        class_recomputable=False,
        dimensions={"data": "scalar", "task": "assessment",
                    "processing": "raw", "representation": "visualization"},
        query_source="metrics", query_path="*", query_epoch="*",
    ),
    ToolDescriptor(
        id="runtime-statistics", name="Runtime Statistics",
        description="Measured inference time per sample.",
        category="metrics", applicable_uoa_kinds=_MODEL_SCOPE,
        applicable_levels=_MODEL_LEVELS, produces="bar_chart",
        class_recomputable=False,
        dimensions={"data": "scalar", "task": "assessment",
                    "processing": "raw", "representation": "visualization"},
        query_source="record", query_path="runtime_ms_per_sample",
    ),
    ToolDescriptor(
        id="model-save-size", name="Model Save Size",
        description="On-disk weight size of the latest checkpoint.",
        category="metrics", applicable_uoa_kinds=_MODEL_SCOPE,
        applicable_levels=_MODEL_LEVELS, produces="bar_chart",
        class_recomputable=True,
        dimensions={"data": "scalar", "task": "assessment",
                    "processing": "raw", "representation": "visualization"},
        query_source="record", query_path="save_size_bytes",
    ),
    ToolDescriptor(
        id="histogram", name="Histogram",
        description="Value distribution of weights or activations.",
        category="distribution", applicable_uoa_kinds=frozenset(("layer", "variable")),
        applicable_levels=frozenset(("layer_unit",)), produces="histogram",
        class_recomputable=True,
        dimensions={"data": "n_dimensional", "task": "assessment",
                    "processing": "aggregation", "representation": "visualization"},
        query_source="checkpoint", query_path="{variable_path}",
        query_transform=({"op": "histogram", "bins": 32},),
    ),
    ToolDescriptor(
        id="feature-distribution", name="Feature Distribution",
        description="Density estimate for every dimension of a layer's activations.",
        category="distribution", applicable_uoa_kinds=frozenset(("layer",)),
        applicable_levels=frozenset(("layer_unit",)), produces="multi_density",
        class_recomputable=True,
        dimensions={"data": "n_dimensional", "task": "verification",
                    "processing": "statistical_descriptors",
                    "representation": "visualization"},
        query_source="checkpoint", query_path="layers/{layer}/activations",
        query_transform=("{per_dimension_density}",),
    ),
    ToolDescriptor(
        id="input-reconstruction", name="Input / Reconstruction",
        description="Model outputs next to their inputs for sample rows.",
        category="dataset", applicable_uoa_kinds=frozenset(("model",)),
        applicable_levels=frozenset(("single_model",)), produces="image_grid",
        class_recomputable=True,
        dimensions={"data": "n_dimensional", "task": "verification",
                    "processing": "raw", "representation": "visualization"},
        query_source="checkpoint", query_path="data_samples/y_prediction",
        query_transform=({"op": "slice", "axis": 0, "start": 0, "stop": 8},),
    ),
    ToolDescriptor(
        id="class-probability", name="Class Probability",
        description="Mean predicted probability per class.",
        category="dataset", applicable_uoa_kinds=frozenset(("model",)),
        applicable_levels=frozenset(("single_model",)), produces="bar_chart",
        class_recomputable=True,
        dimensions={"data": "n_dimensional", "task": "assessment",
                    "processing": "aggregation", "representation": "visualization"},
        query_source="checkpoint", query_path="data_samples/y_prediction",
        query_transform=({"op": "agg", "fn": "mean", "axis": 0},),
    ),
    ToolDescriptor(
        id="confusion-matrix", name="Confusion Matrix",
        description="Mean predicted distribution grouped by true class.",
        category="dataset", applicable_uoa_kinds=frozenset(("model",)),
        applicable_levels=frozenset(("single_model",)), produces="matrix",
        class_recomputable=True,
        dimensions={"data": "n_dimensional", "task": "assessment",
                    "processing": "aggregation", "representation": "visualization"},
        query_source="checkpoint", query_path="data_samples/y_prediction",
        query_transform=({"op": "groupby_class", "fn": "mean"},),
    ),
    ToolDescriptor(
        id="neurons-by-class", name="Neurons x Classes",
        description="Per-class mean activation of every neuron in a layer.",
        category="activations", applicable_uoa_kinds=frozenset(("layer",)),
        applicable_levels=frozenset(("layer_unit",)), produces="matrix",
        class_recomputable=True,
        dimensions={"data": "n_dimensional", "task": "verification",
                    "processing": "aggregation", "representation": "visualization"},
        query_source="checkpoint", query_path="layers/{layer}/mean_class_activations",
    ),
    ToolDescriptor(
        id="note", name="Note",
        description="Markdown note attached to any unit, persisted server-side.",
        category="functional", applicable_uoa_kinds=_ALL_KINDS,
        applicable_levels=frozenset(LEVELS), produces="note",
        class_recomputable=True,
        dimensions={"data": "scalar", "task": "assessment",
                    "processing": "raw", "representation": "verbalization"},
        action="create_note",
    ),
    ToolDescriptor(
        id="branch-model", name="Branch Model",
        description="Emit a child model header with this model as parent.",
        category="functional", applicable_uoa_kinds=frozenset(("model",)),
        applicable_levels=frozenset(("single_model",)), produces="header",
        class_recomputable=True,
        dimensions={"data": "structural", "task": "assessment",
                    "representation": "visualization"},
        action="branch_model",
    ),
)


def registry_by_id() -> dict[str, ToolDescriptor]:
    return {tool.id: tool for tool in BUILTIN_TOOLS}


def applicable_tools(uoa: UnitPath, catalog: ExperimentCatalog,
                     registry: Sequence[ToolDescriptor] = BUILTIN_TOOLS) -> list[ToolDescriptor]:
    """Tools whose declared kinds and levels admit the unit, ordered by
    (category, name)."""
    resolve_unit(uoa, catalog)
    kind = uoa.kind
    level = uoa.level
    tools = [
        t for t in registry
        if kind in t.applicable_uoa_kinds and level in t.applicable_levels
    ]
    return sorted(tools, key=lambda t: (t.category, t.name))


@dataclass(frozen=True)
class WidgetInstance:
    id: str
    tool_id: str
    uoa: str
    level: str
    dimensions: DimensionState
    representation: str
    class_warning: bool
    query: Optional[WidgetQuery] = None
    action: Optional[str] = None

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "tool_id": self.tool_id,
            "uoa": self.uoa,
            "level": self.level,
            "dimensions": self.dimensions.to_doc(),
            "representation": self.representation,
            "class_warning": self.class_warning,
            "query": None if self.query is None else self.query.to_doc(),
            "action": self.action,
        }


def _per_dimension_density(units: int, bins: int = 32) -> list[dict]:
    names = [f"dim_{i}" for i in range(units)]
    return [
        {
            "op": "branch",
            "specs": {
                f"dim_{i}": [
                    {"op": "slice", "axis": 1, "start": i, "stop": i + 1},
                    {"op": "density", "bins": bins},
                ]
                for i in range(units)
            },
        },
        {"op": "merge", "names": names},
    ]


def _fill_template(tool: ToolDescriptor, uoa: UnitPath,
                   catalog: ExperimentCatalog) -> tuple[str, tuple]:
    layer = uoa.get("layer")
    variable = uoa.get("variable")
    path = tool.query_path or ""
    transform = tool.query_transform
    if "{variable_path}" in path:
        if layer is None:
            raise ToolError("unresolved template variable: layer")
        if variable in ("kernel", "bias"):
            path = f"layers/{layer}/weights/{variable}"
        else:
            path = f"layers/{layer}/activations"
    if "{layer}" in path:
        if layer is None:
            raise ToolError("unresolved template variable: layer")
        path = path.replace("{layer}", layer)
    if transform == ("{per_dimension_density}",):
        model = catalog.model(uoa.get("model"))
        shape = model.graph.layer(layer).output_shape
        if not shape:
            raise ToolError(f"layer {layer} declares no output shape")
        transform = tuple(_per_dimension_density(int(shape[-1])))
    return path, transform


def instantiate_widget(tool: ToolDescriptor, uoa: UnitPath,
                       catalog: ExperimentCatalog,
                       class_selection: Optional[Sequence[int]] = None,
                       checkpoint_selector="latest") -> WidgetInstance:
    """Bind a tool to a unit: resolve dimensions to a fully fixed state and
    instantiate the tool's query template."""
    resolve_unit(uoa, catalog)
    if uoa.kind not in tool.applicable_uoa_kinds or uoa.level not in tool.applicable_levels:
        raise ToolError(f"tool {tool.id} is not applicable to {uoa.kind} units")
    state = resolve_dimensions(
        DimensionState.partial(level=uoa.level, **tool.dimensions))
    if not state.fully_fixed:
        raise ToolError(f"tool {tool.id} leaves dimensions unresolved")

    query = None
    if tool.query_source is not None:
        if uoa.kind == "experiment":
            partition = experiment_partition(catalog)
            models = tuple(partition[uoa.leaf_id])
        else:
            model = uoa.get("model")
            if model is None:
                raise ToolError("unresolved template variable: model")
            models = (model,)
        path, transform = _fill_template(tool, uoa, catalog)
        query = WidgetQuery(
            models=models,
            source=tool.query_source,
            epoch=tool.query_epoch if tool.query_epoch != "latest" else checkpoint_selector,
            path=path,
            transform=transform,
            classes=None if class_selection is None else tuple(class_selection),
        )
    return WidgetInstance(
        id=f"w-{uuid.uuid4().hex[:8]}",
        tool_id=tool.id,
        uoa=str(uoa),
        level=uoa.level,
        dimensions=state,
        representation=tool.produces,
        class_warning=not tool.class_recomputable,
        query=query,
        action=tool.action,
    )


@dataclass
class WidgetGroup:
    id: str
    member_ids: list[str]
    mode: str = "side_by_side"  # side_by_side | common_scale | merged

    def to_doc(self) -> dict:
        return {"id": self.id, "member_ids": list(self.member_ids), "mode": self.mode}


# axis semantics per representation kind; groups may only share a scale or
# merge when both representation and axes line up
_AXIS_SEMANTICS = {
    "line_chart": ("epoch", "value"),
    "bar_chart": ("category", "value"),
    "histogram": ("value", "count"),
    "multi_density": ("value", "density"),
    "matrix": None,
    "image_grid": None,
    "note": None,
    "header": None,
}

_DOMAIN_EXCLUDED_COLUMNS = {"epoch", "bin_edges", "index"}


def _value_domain(doc: dict) -> tuple[float, float]:
    values: list[float] = []
    if doc.get("type") == "table":
        for name, col in doc["columns"].items():
            if name not in _DOMAIN_EXCLUDED_COLUMNS:
                values.extend(col)
    elif doc.get("type") == "tensor":
        values.extend(doc["values"])
    elif doc.get("type") == "scalar":
        values.append(doc["value"])
    elif doc.get("type") == "epoch_series":
        for sub in doc["results"]:
            lo, hi = _value_domain(sub)
            values.extend((lo, hi))
    if not values:
        raise GroupError("widget data has no numeric domain")
    return min(values), max(values)


def _series_of(doc: dict) -> dict[str, list[float]]:
    if doc.get("type") == "table":
        return {n: list(c) for n, c in doc["columns"].items()
                if n not in _DOMAIN_EXCLUDED_COLUMNS}
    if doc.get("type") == "tensor":
        return {"values": list(doc["values"])}
    if doc.get("type") == "scalar":
        return {"value": [doc["value"]]}
    raise GroupError("widget data cannot be merged")


def regroup(group: WidgetGroup, mode: str, widgets: dict[str, WidgetInstance],
            data: Optional[dict[str, dict]] = None) -> dict:
    """Re-mode a group; common_scale unions the member value domains, merged
    concatenates member series under per-widget labels."""
    members = [widgets[mid] for mid in group.member_ids]
    if mode == "side_by_side":
        group.mode = mode
        return {"group": group.to_doc()}
    first = members[0]
    for other in members[1:]:
        same_repr = other.representation == first.representation
        axes = _AXIS_SEMANTICS.get(first.representation)
        if not same_repr or axes is None:
            raise GroupError(
                f"incompatible members: {first.id} ({first.representation}) "
                f"and {other.id} ({other.representation})")
    if data is None:
        raise GroupError(f"{mode} needs the members' data")
    if mode == "common_scale":
        domains = [_value_domain(data[m.id]) for m in members]
        group.mode = mode
        return {
            "group": group.to_doc(),
            "domain": [min(d[0] for d in domains), max(d[1] for d in domains)],
        }
    if mode == "merged":
        series: dict[str, list[float]] = {}
        for m in members:
            for name, col in _series_of(data[m.id]).items():
                series[f"{m.id}/{name}"] = col
        group.mode = mode
        return {"group": group.to_doc(), "series": series}
    raise GroupError(f"unknown group mode: {mode}")


def apply_class_selection(selection: Sequence[int],
                          widgets: Sequence[WidgetInstance]) -> dict:
    """Split widgets into a requery set (class filter pushed into the query)
    and a warned set left unchanged."""
    if not selection:
        raise ValueError("class selection must not be empty")
    wanted = tuple(sorted(set(int(c) for c in selection)))
    requery: list[WidgetInstance] = []
    warned: list[WidgetInstance] = []
    for widget in widgets:
        if widget.class_warning:
            warned.append(widget)
            continue
        query = widget.query
        if query is not None and query.source == "checkpoint":
            query = replace(query, classes=wanted)
        requery.append(replace(widget, query=query))
    return {"requery": requery, "warned": warned}


class SessionState:
    """Widget-panel state: widgets grouped under their level's flap, plus
    widget groups. Serializes to a document a UI can persist and restore."""

    def __init__(self):
        self.widgets: dict[str, WidgetInstance] = {}
        self.groups: dict[str, WidgetGroup] = {}
        self.panel: dict[str, list[str]] = {level: [] for level in LEVELS}

    def add_widget(self, widget: WidgetInstance) -> None:
        self.widgets[widget.id] = widget
        self.panel[widget.level].append(widget.id)

    def remove_widget(self, widget_id: str) -> None:
        widget = self.widgets.pop(widget_id, None)
        if widget is not None:
            self.panel[widget.level].remove(widget_id)
        for group in self.groups.values():
            if widget_id in group.member_ids:
                group.member_ids.remove(widget_id)

    def add_group(self, member_ids: Sequence[str],
                  mode: str = "side_by_side") -> WidgetGroup:
        for mid in member_ids:
            if mid not in self.widgets:
                raise GroupError(f"unknown widget: {mid}")
        group = WidgetGroup(id=f"g-{uuid.uuid4().hex[:8]}",
                            member_ids=list(member_ids), mode=mode)
        self.groups[group.id] = group
        return group

    def to_doc(self) -> dict:
        return {
            "widgets": [self.widgets[wid].to_doc()
                        for level in LEVELS for wid in self.panel[level]],
            "groups": [g.to_doc() for g in self.groups.values()],
            "panel": {level: list(ids) for level, ids in self.panel.items()},
        }


class NotesStore:
    """Markdown notes keyed by unit path, persisted as a JSON document with
    an atomic temp-file-and-rename write."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._notes: list[dict] = []
        if self.path.exists():
            self._notes = json.loads(self.path.read_text()).get("notes", [])

    def _flush(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"notes": self._notes}, indent=2, sort_keys=True))
        os.replace(tmp, self.path)

    def add(self, uoa: str, markdown: str, created_at: str) -> dict:
        note = {
            "id": f"n-{uuid.uuid4().hex[:8]}",
            "uoa": uoa,
            "markdown": markdown,
            "created_at": created_at,
        }
        self._notes.append(note)
        self._flush()
        return note

    def list(self, uoa: Optional[str] = None) -> list[dict]:
        if uoa is None:
            return list(self._notes)
        return [n for n in self._notes if n["uoa"] == uoa]
