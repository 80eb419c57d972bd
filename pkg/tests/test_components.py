import json

import pytest

from modelprobe.backbone import UnitPath
from modelprobe.components import (
    BUILTIN_TOOLS,
    DimensionConflictError,
    DimensionState,
    GroupError,
    NotesStore,
    SessionState,
    ToolError,
    WidgetGroup,
    applicable_tools,
    apply_class_selection,
    instantiate_widget,
    query_scope,
    regroup,
    registry_by_id,
    resolve_dimensions,
)
from modelprobe.queries import run_widget_query


# --- dimension resolution -----------------------------------------------------

def test_walkthrough_visual_ending():
    state = resolve_dimensions(DimensionState.partial(
        data="structural", task="comparison", representation="visualization"))
    assert state.level.value == "multi_model"
    assert state.processing.value == "transformation"
    assert state.dependencies.value == "none"
    assert state.fully_fixed
    assert query_scope(state) == "models"


def test_walkthrough_verbal_ending():
    state = resolve_dimensions(DimensionState.partial(
        data="structural", task="comparison", representation="verbalization"))
    assert state.level.value == "multi_model"
    assert state.processing.value == "statistical_descriptors"
    assert state.fully_fixed


def test_empty_state_stays_free():
    state = resolve_dimensions(DimensionState())
    assert not state.data.fixed
    assert not state.level.fixed
    assert not state.fully_fixed


def test_comparison_single_model_contradiction():
    with pytest.raises(DimensionConflictError) as err:
        resolve_dimensions(DimensionState.partial(
            task="comparison", level="single_model"))
    assert err.value.pair == ("task=comparison", "level=single_model")


def test_structural_aggregation_contradiction():
    with pytest.raises(DimensionConflictError):
        resolve_dimensions(DimensionState.partial(
            data="structural", processing="aggregation"))


def test_structural_excludes_aggregation_when_processing_free():
    state = resolve_dimensions(DimensionState.partial(data="structural"))
    assert not state.processing.fixed
    assert "aggregation" in state.processing.excluded


def test_resolution_idempotent_and_monotone():
    partials = [
        DimensionState.partial(data="structural", task="comparison",
                               representation="visualization"),
        DimensionState.partial(data="n_dimensional"),
        DimensionState.partial(task="assessment"),
        DimensionState(),
    ]
    for partial in partials:
        once = resolve_dimensions(partial)
        twice = resolve_dimensions(once)
        assert once == twice
        for name in ("data", "task", "level", "processing", "representation"):
            before = getattr(partial, name)
            after = getattr(once, name)
            if before.fixed:
                assert after.value == before.value


def test_dependencies_not_user_assignable():
    with pytest.raises(ValueError, match="inferred"):
        DimensionState.partial(dependencies="dataset")


def test_dependencies_follow_data_kind():
    assert resolve_dimensions(
        DimensionState.partial(data="n_dimensional")).dependencies.value == "dataset"
    assert resolve_dimensions(
        DimensionState.partial(data="scalar")).dependencies.value == "none"
    assert resolve_dimensions(
        DimensionState.partial(data="function")).dependencies.value == "layer"


# --- tool registry ------------------------------------------------------------

def test_registry_has_expected_tools():
    ids = {t.id for t in BUILTIN_TOOLS}
    assert ids == {
        "performance-metrics", "runtime-statistics", "model-save-size",
        "histogram", "feature-distribution", "input-reconstruction",
        "class-probability", "confusion-matrix", "neurons-by-class",
        "note", "branch-model",
    }
    assert len(BUILTIN_TOOLS) == 11


def test_applicable_tools_kernel_variable(vae_catalog):
    uoa = UnitPath.parse("model:vae_25_75/layer:z_mean/variable:kernel")
    ids = [t.id for t in applicable_tools(uoa, vae_catalog)]
    assert "histogram" in ids
    assert "performance-metrics" not in ids


def test_applicable_tools_experiment(vae_catalog):
    ids = [t.id for t in applicable_tools(UnitPath.parse("experiment:exp_0"), vae_catalog)]
    assert "performance-metrics" in ids
    assert "histogram" not in ids


def test_note_applicable_everywhere(vae_catalog):
    for path in ("experiment:exp_0", "model:vae_25_75",
                 "model:vae_25_75/layer:z_mean",
                 "model:vae_25_75/layer:z_mean/variable:kernel",
                 "model:vae_25_75/layer:z_mean/neuron:1"):
        ids = [t.id for t in applicable_tools(UnitPath.parse(path), vae_catalog)]
        assert "note" in ids, path


def test_applicable_tools_ordering(vae_catalog):
    tools = applicable_tools(UnitPath.parse("model:vae_25_75"), vae_catalog)
    keys = [(t.category, t.name) for t in tools]
    assert keys == sorted(keys)


# --- widget instantiation -------------------------------------------------------

def test_histogram_widget_binds_kernel_path(vae_catalog):
    registry = registry_by_id()
    widget = instantiate_widget(
        registry["histogram"],
        UnitPath.parse("model:vae_25_75/layer:z_mean/variable:kernel"),
        vae_catalog)
    assert widget.query.path == "layers/z_mean/weights/kernel"
    assert widget.query.transform[0]["op"] == "histogram"
    assert widget.query.transform[0]["bins"] == 32
    assert widget.dimensions.fully_fixed
    assert not widget.class_warning


def test_histogram_on_layer_binds_activations(vae_catalog):
    registry = registry_by_id()
    widget = instantiate_widget(
        registry["histogram"],
        UnitPath.parse("model:vae_25_75/layer:z_log_var"), vae_catalog)
    assert widget.query.path == "layers/z_log_var/activations"


def test_performance_metrics_widget_epoch_wildcard_and_warning(vae_catalog):
    registry = registry_by_id()
    widget = instantiate_widget(
        registry["performance-metrics"], UnitPath.parse("model:vae_25_75"),
        vae_catalog)
    assert widget.query.source == "metrics"
    assert widget.query.epoch == "*"
    assert widget.class_warning is True


def test_experiment_scope_spans_models(vae_catalog):
    registry = registry_by_id()
    widget = instantiate_widget(
        registry["performance-metrics"], UnitPath.parse("experiment:exp_0"),
        vae_catalog)
    assert set(widget.query.models) == {"vae_25_75", "vae_90_10", "vae_defect"}


def test_feature_distribution_branches_over_dimensions(vae_catalog):
    registry = registry_by_id()
    widget = instantiate_widget(
        registry["feature-distribution"],
        UnitPath.parse("model:vae_25_75/layer:z"), vae_catalog)
    branch = widget.query.transform[0]
    assert branch["op"] == "branch"
    assert len(branch["specs"]) == 8  # one sub-pipeline per latent dimension
    result = run_widget_query(vae_catalog, widget.query)
    assert result["type"] == "table"
    assert "dim_0/density" in result["columns"]


def test_inapplicable_tool_rejected(vae_catalog):
    registry = registry_by_id()
    with pytest.raises(ToolError, match="not applicable"):
        instantiate_widget(registry["histogram"],
                           UnitPath.parse("model:vae_25_75"), vae_catalog)


def test_every_builtin_tool_runs_on_fixtures(classifier_catalog, vae_catalog):
    registry = registry_by_id()
    bindings = [
        ("performance-metrics", vae_catalog, "model:vae_25_75"),
        ("runtime-statistics", vae_catalog, "experiment:exp_0"),
        ("model-save-size", classifier_catalog, "experiment:exp_0"),
        ("histogram", classifier_catalog, "model:cls_0/layer:hidden_2/variable:kernel"),
        ("feature-distribution", vae_catalog, "model:vae_25_75/layer:z"),
        ("input-reconstruction", vae_catalog, "model:vae_25_75"),
        ("class-probability", classifier_catalog, "model:cls_0"),
        ("confusion-matrix", classifier_catalog, "model:cls_0"),
        ("neurons-by-class", vae_catalog, "model:vae_25_75/layer:z_mean"),
        ("note", vae_catalog, "model:vae_25_75/layer:z"),
        ("branch-model", classifier_catalog, "model:cls_0"),
    ]
    assert {b[0] for b in bindings} == set(registry)
    for tool_id, catalog, uoa in bindings:
        widget = instantiate_widget(registry[tool_id], UnitPath.parse(uoa), catalog)
        assert widget.dimensions.fully_fixed, tool_id
        if widget.query is not None:
            result = run_widget_query(catalog, widget.query)
            assert result.get("type") in {"table", "tensor", "scalar", "epoch_series"}
        else:
            assert widget.action in {"create_note", "branch_model"}


# --- groups ---------------------------------------------------------------------

def _loss_widget(wid, domain):
    from modelprobe.components import WidgetInstance

    return (
        WidgetInstance(
            id=wid, tool_id="performance-metrics", uoa="model:m",
            level="single_model",
            dimensions=resolve_dimensions(DimensionState.partial(
                data="scalar", task="assessment", level="single_model",
                processing="raw", representation="visualization")),
            representation="line_chart", class_warning=True, query=None),
        {"type": "table", "columns": {"epoch": [0, 1, 2], "loss": list(domain)}},
    )


def test_common_scale_unions_domains():
    w1, d1 = _loss_widget("w1", [0.0, 2.0, 1.0])
    w2, d2 = _loss_widget("w2", [1.0, 5.0, 3.0])
    group = WidgetGroup(id="g", member_ids=["w1", "w2"])
    out = regroup(group, "common_scale", {"w1": w1, "w2": w2},
                  {"w1": d1, "w2": d2})
    assert out["domain"] == [0.0, 5.0]


def test_merged_concatenates_labeled_series():
    w1, d1 = _loss_widget("w1", [0.5, 0.4, 0.3])
    w2, d2 = _loss_widget("w2", [0.6, 0.5, 0.4])
    group = WidgetGroup(id="g", member_ids=["w1", "w2"])
    out = regroup(group, "merged", {"w1": w1, "w2": w2}, {"w1": d1, "w2": d2})
    assert set(out["series"]) == {"w1/loss", "w2/loss"}


def test_merge_incompatible_kinds_rejected(vae_catalog):
    registry = registry_by_id()
    hist = instantiate_widget(
        registry["histogram"],
        UnitPath.parse("model:vae_25_75/layer:z_mean/variable:kernel"), vae_catalog)
    img = instantiate_widget(
        registry["input-reconstruction"], UnitPath.parse("model:vae_25_75"),
        vae_catalog)
    group = WidgetGroup(id="g", member_ids=[hist.id, img.id])
    with pytest.raises(GroupError, match="incompatible"):
        regroup(group, "merged", {hist.id: hist, img.id: img}, {})


# --- class selection ------------------------------------------------------------

def test_class_selection_splits_requery_and_warned(vae_catalog):
    registry = registry_by_id()
    hist = instantiate_widget(
        registry["histogram"],
        UnitPath.parse("model:vae_25_75/layer:z_log_var"), vae_catalog)
    metrics = instantiate_widget(
        registry["performance-metrics"], UnitPath.parse("model:vae_25_75"),
        vae_catalog)
    out = apply_class_selection([3], [hist, metrics])
    assert [w.tool_id for w in out["warned"]] == ["performance-metrics"]
    (requeried,) = [w for w in out["requery"] if w.tool_id == "histogram"]
    assert requeried.query.classes == (3,)
    result = run_widget_query(vae_catalog, requeried.query)
    assert result["type"] == "table"


def test_class_selection_must_be_nonempty():
    with pytest.raises(ValueError):
        apply_class_selection([], [])


def test_selection_combinations_are_not_precomputed():
    # n classes admit 2^n - 1 selections; the system recomputes on demand
    assert 2 ** 10 - 1 == 1023


# --- session document -------------------------------------------------------------

def test_session_panel_groups_by_level(vae_catalog):
    registry = registry_by_id()
    session = SessionState()
    model_widget = instantiate_widget(
        registry["performance-metrics"], UnitPath.parse("model:vae_25_75"),
        vae_catalog)
    layer_widget = instantiate_widget(
        registry["histogram"],
        UnitPath.parse("model:vae_25_75/layer:z_mean/variable:kernel"), vae_catalog)
    session.add_widget(model_widget)
    session.add_widget(layer_widget)
    doc = session.to_doc()
    assert doc["panel"]["single_model"] == [model_widget.id]
    assert doc["panel"]["layer_unit"] == [layer_widget.id]
    flat = [wid for ids in doc["panel"].values() for wid in ids]
    assert sorted(flat) == sorted({w["id"] for w in doc["widgets"]})


def test_session_groups_and_removal(vae_catalog):
    registry = registry_by_id()
    session = SessionState()
    widgets = [
        instantiate_widget(registry["histogram"],
                           UnitPath.parse("model:vae_25_75/layer:z_mean/variable:kernel"),
                           vae_catalog)
        for _ in range(2)
    ]
    for w in widgets:
        session.add_widget(w)
    group = session.add_group([w.id for w in widgets])
    session.remove_widget(widgets[0].id)
    assert session.groups[group.id].member_ids == [widgets[1].id]


# --- notes ---------------------------------------------------------------------

def test_notes_persist_across_instances(tmp_path):
    store = NotesStore(tmp_path / "notes.db")
    note = store.add("model:m/layer:l", "suspicious activation", "2026-01-01T00:00:00Z")
    again = NotesStore(tmp_path / "notes.db")
    assert again.list("model:m/layer:l") == [note]
    assert json.loads((tmp_path / "notes.db").read_text())["notes"]
