import numpy as np
import pytest
from scipy import stats

from modelprobe.transforms import (
    DataTable,
    TransformExecError,
    TransformParseError,
    apply_transform,
    parse_transform,
)


def run(data, doc, **kw):
    return apply_transform(np.asarray(data, dtype=np.float64), parse_transform(doc), **kw)


def close(a, b, tol=1e-9):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.allclose(a, b, rtol=tol, atol=tol)


# --- parsing ---------------------------------------------------------------

def test_parse_single_op():
    spec = parse_transform([{"op": "agg", "fn": "mean", "axis": "all"}])
    assert len(spec.ops) == 1
    assert spec.ops[0].name == "agg"


def test_parse_unknown_op_names_it():
    with pytest.raises(TransformParseError, match="unknown op: frobnicate"):
        parse_transform([{"op": "frobnicate"}])


def test_parse_empty_is_identity():
    spec = parse_transform([])
    out = apply_transform(np.array([1.0, 2.0]), spec)
    assert out.tensor.tolist() == [1.0, 2.0]


@pytest.mark.parametrize("doc", [
    [{"op": "histogram", "bins": -3}],
    [{"op": "histogram", "bins": 0}],
    [{"op": "top_k", "k": 0}],
    [{"op": "agg", "fn": "median", "axis": "all"}],
    [{"op": "filter", "cmp": "??", "value": 1}],
    [{"op": "slice", "axis": 0, "step": 0}],
    [{"op": "normalize", "mode": "sigmoid"}],
    [{"op": "reshape", "shape": [0, 2]}],
    [{"op": "branch", "specs": {}}],
    [{"op": "merge", "names": []}],
    [{"op": "histogram", "bins": 4, "range": [3, 1]}],
])
def test_parse_invalid_parameters(doc):
    with pytest.raises(TransformParseError):
        parse_transform(doc)


def test_spec_doc_round_trip():
    doc = [
        {"op": "branch", "specs": {"lo": [{"op": "agg", "fn": "min", "axis": "all"}],
                                   "hi": [{"op": "agg", "fn": "max", "axis": "all"}]}},
        {"op": "merge", "names": ["lo", "hi"]},
    ]
    spec = parse_transform(doc)
    assert parse_transform(spec.to_doc()).to_doc() == spec.to_doc()


# --- spec examples ----------------------------------------------------------

def test_histogram_example():
    out = run([1, 1, 2, 3], [{"op": "histogram", "bins": 3, "range": [1, 3]}])
    assert close(out.columns["bin_edges"], [1, 1 + 2 / 3, 1 + 4 / 3, 3])
    assert out.columns["counts"].tolist() == [2.0, 1.0, 1.0]


def test_agg_mean_all():
    out = run([[1, 2], [3, 4]], [{"op": "agg", "fn": "mean", "axis": "all"}])
    assert float(out.tensor) == 2.5


def test_groupby_class_example():
    out = run([1, 2, 3, 4], [{"op": "groupby_class", "fn": "mean"}],
              labels=np.array([0, 0, 1, 1]))
    assert close(out.columns["class_0"], [1.5])
    assert close(out.columns["class_1"], [3.5])


def test_groupby_without_labels_errors():
    with pytest.raises(TransformExecError, match="op 0"):
        run([1, 2], [{"op": "groupby_class", "fn": "mean"}])


def test_branch_merge_example():
    out = run([1, 5, 3], [
        {"op": "branch", "specs": {"lo": [{"op": "agg", "fn": "min", "axis": "all"}],
                                   "hi": [{"op": "agg", "fn": "max", "axis": "all"}]}},
        {"op": "merge", "names": ["lo", "hi"]},
    ])
    assert out.columns["lo"].tolist() == [1.0]
    assert out.columns["hi"].tolist() == [5.0]


def test_error_reports_op_index():
    with pytest.raises(TransformExecError, match="op 1") as err:
        run([[1, 2], [3, 4]], [{"op": "flatten"}, {"op": "reshape", "shape": [3]}])
    assert err.value.op_index == 1


# --- per-op semantics -------------------------------------------------------

def test_slice_and_reshape():
    out = run(np.arange(12).reshape(3, 4),
              [{"op": "slice", "axis": 1, "start": 1, "stop": 3},
               {"op": "reshape", "shape": [6]}])
    assert out.tensor.tolist() == [1, 2, 5, 6, 9, 10]


def test_filter_flattens():
    out = run([[1, -2], [3, -4]], [{"op": "filter", "cmp": "gt", "value": 0}])
    assert out.tensor.tolist() == [1.0, 3.0]


def test_sort_descending():
    out = run([3, 1, 2], [{"op": "sort", "descending": True}])
    assert out.tensor.tolist() == [3.0, 2.0, 1.0]


def test_top_k_by_abs_with_ties():
    out = run([1.0, -2.0, 2.0, 0.5], [{"op": "top_k", "k": 2, "by": "abs"}])
    # |−2| == |2|: the earlier flat index wins the tie
    assert out.columns["index"].tolist() == [1.0, 2.0]
    assert out.columns["value"].tolist() == [-2.0, 2.0]


def test_top_k_by_value():
    out = run([1.0, -2.0, 2.0], [{"op": "top_k", "k": 1, "by": "value"}])
    assert out.columns["value"].tolist() == [2.0]


def test_normalize_minmax_bounds_and_constant():
    out = run([2, 4, 6], [{"op": "normalize", "mode": "minmax"}])
    assert close(out.tensor, [0, 0.5, 1])
    const = run([5, 5, 5], [{"op": "normalize", "mode": "minmax"}])
    assert const.tensor.tolist() == [0.0, 0.0, 0.0]


def test_normalize_zscore():
    out = run([1, 2, 3], [{"op": "normalize", "mode": "zscore"}])
    assert close(out.tensor.mean(), 0)
    assert close(out.tensor.std(), 1)


def test_density_integrates_to_one():
    rng = np.random.default_rng(0)
    data = rng.standard_normal(500)
    out = run(data, [{"op": "density", "bins": 16}])
    edges = out.columns["bin_edges"]
    width = edges[1] - edges[0]
    assert close(out.columns["density"].sum() * width, 1.0)


def test_histogram_counts_in_range():
    out = run([0, 1, 2, 10], [{"op": "histogram", "bins": 2, "range": [0, 2]}])
    assert out.columns["counts"].sum() == 3


def test_agg_axis_reduction():
    out = run([[1, 2], [3, 4]], [{"op": "agg", "fn": "sum", "axis": 0}])
    assert out.tensor.tolist() == [4.0, 6.0]


def test_agg_count():
    out = run([[1, 2], [3, 4]], [{"op": "agg", "fn": "count", "axis": "all"}])
    assert float(out.tensor) == 4.0


def test_skew_constant_is_zero():
    out = run([5, 5, 5], [{"op": "agg", "fn": "skew", "axis": "all"}])
    assert float(out.tensor) == 0.0


# --- oracle equivalence -----------------------------------------------------

def _random_tensor(rng):
    rank = int(rng.integers(1, 5))
    shape = [int(rng.integers(1, 8)) for _ in range(rank)]
    while np.prod(shape) > 1e5:
        shape = shape[:-1]
    return rng.standard_normal(shape) * rng.uniform(0.1, 10)


def test_agg_oracle_equivalence():
    rng = np.random.default_rng(42)
    for _ in range(200):
        x = _random_tensor(rng)
        flat = x.ravel()
        cases = {
            "mean": flat.mean(),
            "var": flat.var(),
            "min": flat.min(),
            "max": flat.max(),
            "sum": flat.sum(),
            "count": flat.size,
            "skew": stats.skew(flat, bias=True) if flat.size > 1 else 0.0,
        }
        for fn, expected in cases.items():
            out = run(x, [{"op": "agg", "fn": fn, "axis": "all"}])
            if fn == "skew" and flat.size == 1:
                continue
            assert close(float(out.tensor), float(expected)), fn


def test_histogram_oracle_equivalence():
    rng = np.random.default_rng(43)
    for _ in range(200):
        x = rng.standard_normal(int(rng.integers(2, 2000))) * rng.uniform(0.5, 5)
        bins = int(rng.integers(1, 40))
        out = run(x, [{"op": "histogram", "bins": bins}])
        expected, edges = np.histogram(x, bins=bins)
        assert out.columns["counts"].tolist() == expected.tolist()
        assert close(out.columns["bin_edges"], edges)


def test_density_oracle_equivalence():
    rng = np.random.default_rng(44)
    for _ in range(100):
        x = rng.standard_normal(int(rng.integers(2, 1000)))
        bins = int(rng.integers(1, 30))
        out = run(x, [{"op": "density", "bins": bins}])
        expected, _ = np.histogram(x, bins=bins, density=True)
        assert close(out.columns["density"], expected)


def test_normalize_oracle_equivalence():
    rng = np.random.default_rng(45)
    for _ in range(100):
        x = _random_tensor(rng)
        out = run(x, [{"op": "normalize", "mode": "minmax"}])
        if x.max() > x.min():
            assert close(out.tensor, (x - x.min()) / (x.max() - x.min()))
            assert out.tensor.min() >= 0 and out.tensor.max() <= 1
        z = run(x, [{"op": "normalize", "mode": "zscore"}])
        if x.std() > 0:
            assert close(z.tensor, (x - x.mean()) / x.std())


def test_top_k_oracle_equivalence():
    rng = np.random.default_rng(46)
    for _ in range(100):
        x = rng.standard_normal(int(rng.integers(1, 500)))
        k = int(rng.integers(1, x.size + 1))
        out = run(x, [{"op": "top_k", "k": k, "by": "abs"}])
        expected = sorted(range(x.size), key=lambda i: (-abs(x[i]), i))[:k]
        assert out.columns["index"].astype(int).tolist() == expected


def test_filter_oracle_equivalence():
    rng = np.random.default_rng(47)
    ops = {"gt": np.greater, "ge": np.greater_equal, "lt": np.less,
           "le": np.less_equal, "eq": np.equal}
    for _ in range(100):
        x = _random_tensor(rng)
        cmp = list(ops)[int(rng.integers(0, 5))]
        threshold = float(rng.standard_normal())
        out = run(x, [{"op": "filter", "cmp": cmp, "value": threshold}])
        expected = x.ravel()[ops[cmp](x.ravel(), threshold)]
        assert close(out.tensor, expected)


def test_groupby_oracle_equivalence():
    rng = np.random.default_rng(48)
    for _ in range(100):
        n = int(rng.integers(4, 200))
        x = rng.standard_normal(n)
        labels = rng.integers(0, 4, size=n)
        out = run(x, [{"op": "groupby_class", "fn": "mean"}], labels=labels)
        for c in sorted(set(labels.tolist())):
            assert close(out.columns[f"class_{c}"], [x[labels == c].mean()])


# --- composition ------------------------------------------------------------

def test_composition_exact():
    rng = np.random.default_rng(49)
    pipelines = [
        [{"op": "flatten"}, {"op": "filter", "cmp": "gt", "value": 0},
         {"op": "normalize", "mode": "minmax"}, {"op": "sort", "descending": True}],
        [{"op": "agg", "fn": "mean", "axis": 0}, {"op": "histogram", "bins": 5, "range": [-2, 2]}],
        [{"op": "slice", "axis": 0, "start": 1, "stop": None},
         {"op": "agg", "fn": "var", "axis": "all"}],
    ]
    for doc in pipelines:
        for split in range(len(doc) + 1):
            x = rng.standard_normal((6, 7))
            whole = apply_transform(x, parse_transform(doc))
            first = apply_transform(x, parse_transform(doc[:split]))
            second = apply_transform(first, parse_transform(doc[split:]))
            assert whole == second
