"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy import stats

from modelprobe.backbone import (
    UnitPath,
    experiment_partition,
    propagate_badges,
    top_k_weight_edges,
)
from modelprobe.components import (
    DimensionConflictError,
    DimensionState,
    instantiate_widget,
    registry_by_id,
    resolve_dimensions,
)
from modelprobe.interestingness import (
    InterestingnessMeasure,
    compute_descriptors,
    score_and_propagate,
)
from modelprobe.queries import run_tensor_query, run_widget_query
from modelprobe.server import ServerState, create_app
from modelprobe.store import (
    FixtureSpec,
    TensorFormatError,
    generate_fixture,
    load_catalog,
    vae_fixture_spec,
)
from modelprobe.transforms import apply_transform, parse_transform


def _report(name: str) -> None:
    print(f"[PASS] {name}")


def test_uc3_defect_localization(vae_catalog):
    started = time.monotonic()
    report = score_and_propagate(vae_catalog, "latest",
                                 InterestingnessMeasure(kind="skew"))
    defect = "model:vae_defect/layer:z_log_var/variable:activations"
    activation_units = [u for u, t in report.variable_types.items()
                        if t == "activations"]
    assert report.normalized[defect] == 1.0
    assert max(report.normalized[u] for u in activation_units) == report.normalized[defect]
    assert report.propagated["model:vae_defect"] == 1.0

    hist = run_tensor_query(
        vae_catalog, "vae_defect", "latest", "layers/z_log_var/activations",
        [{"op": "histogram", "bins": 12, "range": [-3.0, 3.0]}])
    edges = hist["columns"]["bin_edges"]
    counts = hist["columns"]["counts"]
    below_zero = sum(c for c, right in zip(counts, edges[1:]) if right <= 0)
    assert below_zero == 0
    assert sum(counts) > 0

    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    _report(f"UC3 defect localization (skew rank 1, zero mass below 0, {elapsed:.2f}s)")


def test_uc2_variance_discrimination(vae_catalog):
    report = score_and_propagate(
        vae_catalog, "latest", InterestingnessMeasure(kind="variance"),
        models=["vae_25_75", "vae_90_10"])
    low = "model:vae_25_75/layer:z/variable:activations"
    high = "model:vae_90_10/layer:z/variable:activations"
    assert abs(report.raw[low] - 2.02) < 1e-6
    assert abs(report.raw[high] - 12.38) < 1e-6
    assert report.normalized[low] == 0.0
    assert report.normalized[high] == 1.0
    _report("UC2 variance discrimination (raw within 1e-6, normalized {0, 1})")


def _close(a, b, tol=1e-9):
    return np.allclose(np.asarray(a, dtype=np.float64),
                       np.asarray(b, dtype=np.float64), rtol=tol, atol=tol)


def test_oracle_equivalence_suites(tmp_path):
    started = time.monotonic()
    rng = np.random.default_rng(2024)

    # transform ops vs reference implementations
    for _ in range(100):
        x = rng.standard_normal(int(rng.integers(2, 5000))) * rng.uniform(0.1, 10)
        bins = int(rng.integers(1, 50))
        hist = apply_transform(x, parse_transform([{"op": "histogram", "bins": bins}]))
        counts, edges = np.histogram(x, bins=bins)
        assert hist.columns["counts"].tolist() == counts.tolist()
        assert _close(hist.columns["bin_edges"], edges)
        mean = apply_transform(x, parse_transform(
            [{"op": "agg", "fn": "mean", "axis": "all"}]))
        assert _close(float(mean.tensor), x.mean())
        norm = apply_transform(x, parse_transform(
            [{"op": "normalize", "mode": "zscore"}]))
        assert _close(norm.tensor, (x - x.mean()) / x.std())

    # descriptors vs brute force
    for _ in range(100):
        x = rng.standard_normal(int(rng.integers(2, 5000))) * rng.uniform(0.1, 10)
        d = compute_descriptors(x)
        assert _close(d["variance"], np.var(x))
        assert _close(d["min"], x.min())
        assert _close(d["max"], x.max())
        assert _close(d["skew"], stats.skew(x, bias=True))

    # top-k weight subgraph vs full sort
    for _ in range(100):
        rows, cols = int(rng.integers(1, 65)), int(rng.integers(1, 65))
        k = int(rng.integers(1, rows * cols + 1))
        kernel = rng.standard_normal((rows, cols))
        got = top_k_weight_edges(kernel, k)
        full = sorted(
            ((abs(kernel[r, c]), r, c) for r in range(rows) for c in range(cols)),
            key=lambda t: (-t[0], t[1], t[2]))[:k]
        assert [(r, c) for _, r, c in full] == [(r, c) for r, c, _ in got]

    # experiment partition vs union-find
    graph_doc = {"layers": [{"id": "l", "name": "l", "type": "dense",
                             "output_shape": [1], "inner_ops": [], "inner_edges": []}],
                 "edges": []}
    for trial in range(100):
        n = int(rng.integers(1, 10))
        ids = [f"m{i}" for i in range(n)]
        records = []
        parents = {}
        root = tmp_path / f"part{trial}"
        for i, mid in enumerate(ids):
            k = int(rng.integers(0, min(i, 2) + 1))
            parents[mid] = list(rng.choice(ids[:i], size=k, replace=False)) if k else []
            (root / mid).mkdir(parents=True, exist_ok=True)
            (root / mid / "graph.doc").write_text(json.dumps(graph_doc))
            records.append({"id": mid, "name": mid, "parents": parents[mid],
                            "created_at": f"2026-01-01T00:{i:02d}:00Z",
                            "num_trainable_params": 1, "save_size_bytes": 0,
                            "runtime_ms_per_sample": None, "metrics": {},
                            "graph": f"{mid}/graph.doc", "checkpoints": []})
        (root / "models.db").write_text(
            json.dumps({"class_labels": [], "models": records}))
        catalog = load_catalog(root)

        uf = {m: m for m in ids}

        def find(a):
            while uf[a] != a:
                uf[a] = uf[uf[a]]
                a = uf[a]
            return a

        for child, ps in parents.items():
            for p in ps:
                uf[find(child)] = find(p)
        oracle: dict[str, set] = {}
        for m in ids:
            oracle.setdefault(find(m), set()).add(m)
        got = experiment_partition(catalog)
        assert sorted(map(frozenset, got.values())) == \
            sorted(map(frozenset, oracle.values()))

    # badge counts vs exhaustive traversal
    kinds = ["matmul", "add", "conv", "activation"]
    for trial in range(100):
        root = tmp_path / f"badge{trial}"
        records = []
        graphs = {}
        for i in range(int(rng.integers(1, 4))):
            mid = f"m{i}"
            layers = []
            for j in range(int(rng.integers(1, 4))):
                ops = [{"id": f"l{j}o{k}", "kind": kinds[int(rng.integers(0, 4))],
                        "attrs": {}} for k in range(int(rng.integers(0, 4)))]
                layers.append({"id": f"l{j}", "name": f"l{j}", "type": "dense",
                               "output_shape": [1], "inner_ops": ops,
                               "inner_edges": []})
            graphs[mid] = layers
            (root / mid).mkdir(parents=True, exist_ok=True)
            (root / mid / "graph.doc").write_text(
                json.dumps({"layers": layers, "edges": []}))
            records.append({"id": mid, "name": mid,
                            "parents": [] if i == 0 else ["m0"],
                            "created_at": f"2026-01-01T00:{i:02d}:00Z",
                            "num_trainable_params": 1, "save_size_bytes": 0,
                            "runtime_ms_per_sample": None, "metrics": {},
                            "graph": f"{mid}/graph.doc", "checkpoints": []})
        (root / "models.db").write_text(
            json.dumps({"class_labels": [], "models": records}))
        catalog = load_catalog(root)
        query = kinds[int(rng.integers(0, 4))]
        badges = {b.uoa: b.count for b in propagate_badges(catalog, query)}
        total = 0
        for mid, layers in graphs.items():
            model_total = 0
            for layer in layers:
                expected = sum(1 for op in layer["inner_ops"] if op["kind"] == query)
                assert badges.get(f"model:{mid}/layer:{layer['id']}", 0) == expected
                model_total += expected
            assert badges.get(f"model:{mid}", 0) == model_total
            total += model_total
        assert badges.get("experiment:exp_0", 0) == total

    elapsed = time.monotonic() - started
    assert elapsed < 300.0
    _report(f"oracle equivalence suites (5 suites x 100 seeds, {elapsed:.2f}s)")


def test_dimension_resolution_walkthrough():
    visual = resolve_dimensions(DimensionState.partial(
        data="structural", task="comparison", representation="visualization"))
    assert visual.level.value == "multi_model"
    assert visual.processing.value == "transformation"
    assert visual.dependencies.value == "none"
    assert visual.fully_fixed

    verbal = resolve_dimensions(DimensionState.partial(
        data="structural", task="comparison", representation="verbalization"))
    assert verbal.processing.value == "statistical_descriptors"
    assert verbal.fully_fixed

    with pytest.raises(DimensionConflictError) as err:
        resolve_dimensions(DimensionState.partial(
            task="comparison", level="single_model"))
    assert err.value.pair == ("task=comparison", "level=single_model")
    _report("dimension-resolution walkthrough (visual, verbal, contradiction)")


def test_format_round_trip_and_first_dim(tmp_path):
    specs = [
        FixtureSpec(family="classifier", num_models=3, lineage="chain",
                    layer_sizes=(4, 2, 2), checkpoints=2, samples=20, classes=2),
        vae_fixture_spec(),
    ]
    for i, spec in enumerate(specs):
        root = tmp_path / f"fix{i}"
        catalog = generate_fixture(spec, seed=7, out=root)
        reloaded = load_catalog(root)
        assert sorted(reloaded.models) == sorted(catalog.models)
        for mid, record in reloaded.models.items():
            original = catalog.models[mid]
            assert record.header == original.header
            assert record.metrics == original.metrics
            assert record.graph == original.graph
            for bundle in record.checkpoints:
                dims = {ref.shape[0] for path, ref in bundle.tensors.items()
                        if path.startswith("data_samples/")
                        or path.endswith("/activations")}
                assert len(dims) == 1

    # corrupting any blob length is detected at load
    root = tmp_path / "fix0"
    for blob in sorted(root.rglob("*.bin"))[:5]:
        original = blob.read_bytes()
        blob.write_bytes(original[:-1])
        with pytest.raises(TensorFormatError):
            load_catalog(root)
        blob.write_bytes(original)
    load_catalog(root)
    _report("format round-trip, first-dim invariant, blob corruption detected")


def test_cache_contract(tmp_path):
    generate_fixture(vae_fixture_spec(), seed=7, out=tmp_path)
    state = ServerState(tmp_path, cache_mb=16)
    client = TestClient(create_app(state))
    route = "/models/vae_25_75/checkpoints/1/query"
    body = {"path": "layers/z/activations",
            "transform": [{"op": "agg", "fn": "var", "axis": "all"}]}
    first = client.post(route, json=body)
    second = client.post(route, json=body)
    assert first.headers["cached"] == "false"
    assert second.headers["cached"] == "true"
    assert second.content == first.content

    db_path = tmp_path / "models.db"
    db = json.loads(db_path.read_text())
    db["models"][0]["name"] = "renamed"
    db_path.write_text(json.dumps(db))
    assert state.holder.poll() is True
    third = client.post(route, json=body)
    assert third.headers["cached"] == "false"
    assert third.content == first.content

    requests = [
        ("GET", "/models", None),
        ("GET", "/experiments/tree", None),
        ("POST", route, body),
        ("POST", "/models/vae_defect/checkpoints/*/query",
         {"path": "layers/z_log_var/activations",
          "transform": [{"op": "agg", "fn": "skew", "axis": "all"}]}),
        ("GET", "/interestingness?measure=skew", None),
    ]

    def play(c):
        return [
            (c.get(url) if method == "GET" else c.post(url, json=b)).content
            for method, url, b in requests
        ]

    baseline = play(client)
    results = [None] * 16
    threads = [
        threading.Thread(
            target=lambda i=i: results.__setitem__(
                i, play(TestClient(create_app(state)))))
        for i in range(16)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r == baseline for r in results)
    _report("cache contract (byte-identical, flagged, version-scoped, 16-client replay)")


def test_builtin_tool_smoke_matrix(classifier_catalog, vae_catalog):
    registry = registry_by_id()
    bindings = {
        "performance-metrics": (vae_catalog, "model:vae_25_75"),
        "runtime-statistics": (classifier_catalog, "experiment:exp_0"),
        "model-save-size": (classifier_catalog, "model:cls_0"),
        "histogram": (vae_catalog, "model:vae_defect/layer:z_log_var"),
        "feature-distribution": (vae_catalog, "model:vae_25_75/layer:z"),
        "input-reconstruction": (vae_catalog, "model:vae_25_75"),
        "class-probability": (classifier_catalog, "model:cls_0"),
        "confusion-matrix": (classifier_catalog, "model:cls_0"),
        "neurons-by-class": (classifier_catalog, "model:cls_0/layer:hidden_1"),
        "note": (vae_catalog, "model:vae_25_75/layer:z/variable:activations"),
        "branch-model": (classifier_catalog, "model:cls_2"),
    }
    assert set(bindings) == set(registry)
    executed = 0
    for tool_id, (catalog, uoa) in sorted(bindings.items()):
        widget = instantiate_widget(registry[tool_id], UnitPath.parse(uoa), catalog)
        assert widget.dimensions.fully_fixed
        if widget.query is not None:
            result = run_widget_query(catalog, widget.query)
            assert result["type"] in {"table", "tensor", "scalar", "epoch_series"}
            executed += 1
        else:
            assert widget.action is not None
    assert executed == 9  # all but the two functional tools bind live queries
    _report("11-tool smoke matrix instantiated and executed with zero errors")


def test_epoch_wildcard_variance_series(classifier_catalog):
    # hidden-layer spread grows across training epochs in the classifier
    # fixture; the epoch-wildcard query exposes one variance per epoch
    doc = run_tensor_query(
        classifier_catalog, "cls_0", "*", "layers/hidden_2/weights/kernel",
        [{"op": "agg", "fn": "var", "axis": "all"}])
    series = [r["value"] for r in doc["results"]]
    assert doc["epochs"] == [0, 1, 2]
    from modelprobe.store import read_tensor

    record = classifier_catalog.models["cls_0"]
    expected = [
        float(np.var(read_tensor(
            record.checkpoint(e).tensors["layers/hidden_2/weights/kernel"]
        ).values.astype(np.float64)))
        for e in (0, 1, 2)
    ]
    assert np.allclose(series, expected, rtol=1e-12, atol=1e-12)
    assert series[0] < series[1] < series[2]
    _report("epoch-wildcard variance series matches per-epoch oracle and increases")
