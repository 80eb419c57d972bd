"""Transform pipeline: parse a list of operations and run them over tensors.

A transform specification is an ordered list of operation objects applied
left to right in double precision. ``branch`` evaluates named sub-pipelines
against the current value and yields a column table; ``merge`` restricts
such a table to the named branches. Everything is pure and reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels

AGG_FNS = ("mean", "var", "min", "max", "sum", "count", "skew")
CMP_FNS = ("gt", "ge", "lt", "le", "eq")

OP_NAMES = (
    "reshape", "flatten", "slice", "filter", "agg", "histogram", "density",
    "normalize", "groupby_class", "sort", "top_k", "branch", "merge",
)


class TransformParseError(ValueError):
    """Unknown operation name or invalid parameter."""


class TransformExecError(ValueError):
    """Execution failure; carries the index of the offending operation."""

    def __init__(self, op_index: int, message: str):
        super().__init__(f"op {op_index}: {message}")
        self.op_index = op_index


@dataclass(frozen=True)
class TransformOp:
    name: str
    params: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        doc = {"op": self.name}
        for key, value in self.params.items():
            doc[key] = value.to_doc() if isinstance(value, TransformSpec) else (
                {k: v.to_doc() for k, v in value.items()}
                if key == "specs" else value
            )
        return doc


@dataclass(frozen=True)
class TransformSpec:
    ops: tuple[TransformOp, ...] = ()

    def to_doc(self) -> list:
        return [op.to_doc() for op in self.ops]

    def __add__(self, other: "TransformSpec") -> "TransformSpec":
        return TransformSpec(self.ops + other.ops)


class DataTable:
    """Either a single tensor or a set of named 1-D columns.

    Histogram-style outputs hold columns of unequal length (``bin_edges``
    has one more entry than ``counts``), so column lengths are not enforced.
    """

    def __init__(self, tensor: Optional[np.ndarray] = None,
                 columns: Optional[dict[str, np.ndarray]] = None):
        if (tensor is None) == (columns is None):
            raise ValueError("DataTable holds either a tensor or columns")
        self.tensor = tensor
        self.columns = columns

    @property
    def is_tensor(self) -> bool:
        return self.tensor is not None

    def to_doc(self) -> dict:
        if self.is_tensor:
            t = np.asarray(self.tensor)
            if t.ndim == 0:
                return {"type": "scalar", "value": float(t)}
            return {
                "type": "tensor",
                "shape": list(t.shape),
                "values": [float(v) for v in t.ravel()],
            }
        return {
            "type": "table",
            "columns": {
                name: [float(v) for v in np.asarray(col).ravel()]
                for name, col in self.columns.items()
            },
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataTable):
            return NotImplemented
        if self.is_tensor != other.is_tensor:
            return False
        if self.is_tensor:
            return (self.tensor.shape == other.tensor.shape
                    and bool(np.array_equal(self.tensor, other.tensor)))
        if set(self.columns) != set(other.columns):
            return False
        return all(np.array_equal(self.columns[k], other.columns[k])
                   for k in self.columns)


def _check_int(doc: dict, key: str, minimum: Optional[int] = None) -> int:
    value = doc.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise TransformParseError(f"'{key}' must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise TransformParseError(f"'{key}' must be >= {minimum}, got {value}")
    return value


def _parse_op(doc: dict) -> TransformOp:
    if not isinstance(doc, dict) or "op" not in doc:
        raise TransformParseError(f"operation must be an object with an 'op' field: {doc!r}")
    name = doc["op"]
    params = {k: v for k, v in doc.items() if k != "op"}
    if name not in OP_NAMES:
        raise TransformParseError(f"unknown op: {name}")
    if name == "reshape":
        shape = params.get("shape")
        if (not isinstance(shape, (list, tuple)) or not shape
                or not all(isinstance(s, int) and (s > 0 or s == -1) for s in shape)
                or sum(1 for s in shape if s == -1) > 1):
            raise TransformParseError(f"reshape 'shape' must be positive ints (one -1 allowed): {shape!r}")
        params["shape"] = list(shape)
    elif name == "slice":
        _check_int(params, "axis")
        for key in ("start", "stop", "step"):
            if params.get(key) is not None:
                _check_int(params, key)
        if params.get("step") == 0:
            raise TransformParseError("slice 'step' must not be 0")
    elif name == "filter":
        if params.get("cmp") not in CMP_FNS:
            raise TransformParseError(f"filter 'cmp' must be one of {CMP_FNS}: {params.get('cmp')!r}")
        if not isinstance(params.get("value"), (int, float)) or isinstance(params.get("value"), bool):
            raise TransformParseError("filter 'value' must be a number")
    elif name == "agg":
        if params.get("fn") not in AGG_FNS:
            raise TransformParseError(f"agg 'fn' must be one of {AGG_FNS}: {params.get('fn')!r}")
        axis = params.get("axis", "all")
        if axis != "all" and (not isinstance(axis, int) or isinstance(axis, bool)):
            raise TransformParseError(f"agg 'axis' must be 'all' or an integer: {axis!r}")
        params["axis"] = axis
    elif name in ("histogram", "density"):
        _check_int(params, "bins", minimum=1)
        rng = params.get("range")
        if rng is not None:
            if (not isinstance(rng, (list, tuple)) or len(rng) != 2
                    or not all(isinstance(v, (int, float)) for v in rng)
                    or rng[1] < rng[0]):
                raise TransformParseError(f"'range' must be [lo, hi] with hi >= lo: {rng!r}")
            params["range"] = [float(rng[0]), float(rng[1])]
    elif name == "normalize":
        if params.get("mode") not in ("minmax", "zscore"):
            raise TransformParseError(f"normalize 'mode' must be minmax or zscore: {params.get('mode')!r}")
    elif name == "groupby_class":
        if params.get("fn") not in AGG_FNS:
            raise TransformParseError(f"groupby_class 'fn' must be one of {AGG_FNS}: {params.get('fn')!r}")
    elif name == "sort":
        if not isinstance(params.get("descending", False), bool):
            raise TransformParseError("sort 'descending' must be a boolean")
        params.setdefault("descending", False)
    elif name == "top_k":
        _check_int(params, "k", minimum=1)
        if params.get("by", "abs") not in ("abs", "value"):
            raise TransformParseError(f"top_k 'by' must be abs or value: {params.get('by')!r}")
        params.setdefault("by", "abs")
    elif name == "branch":
        specs = params.get("specs")
        if not isinstance(specs, dict) or not specs:
            raise TransformParseError("branch 'specs' must be a non-empty object of sub-pipelines")
        params["specs"] = {bname: parse_transform(sub) for bname, sub in specs.items()}
    elif name == "merge":
        names = params.get("names")
        if not isinstance(names, (list, tuple)) or not names:
            raise TransformParseError("merge 'names' must be a non-empty list")
        params["names"] = list(names)
    return TransformOp(name=name, params=params)


def parse_transform(doc: Sequence[dict]) -> TransformSpec:
    """Validate a list of operation objects; an empty list is the identity."""
    if doc is None:
        return TransformSpec()
    if not isinstance(doc, (list, tuple)):
        raise TransformParseError("transform spec must be a list of operations")
    return TransformSpec(tuple(_parse_op(op) for op in doc))


def _as_array(value, i: int) -> np.ndarray:
    if isinstance(value, DataTable):
        if value.is_tensor:
            return np.asarray(value.tensor, dtype=np.float64)
        raise TransformExecError(i, "expected a tensor input, got a column table")
    return np.asarray(value, dtype=np.float64)


def _population_skew(x: np.ndarray) -> float:
    _, m2, m3, _, _ = _kernels.moments(x)
    if m2 == 0.0:
        return 0.0
    return m3 / m2 ** 1.5


def _agg_reduce(x: np.ndarray, fn: str, axis, i: int):
    if x.size == 0:
        raise TransformExecError(i, "aggregation over an empty input")
    if axis == "all":
        if fn == "mean":
            return np.float64(_kernels.moments(x)[0])
        if fn == "var":
            return np.float64(_kernels.moments(x)[1])
        if fn == "min":
            return np.float64(_kernels.moments(x)[3])
        if fn == "max":
            return np.float64(_kernels.moments(x)[4])
        if fn == "sum":
            return np.float64(x.sum())
        if fn == "count":
            return np.float64(x.size)
        return np.float64(_population_skew(x))
    if not -x.ndim <= axis < x.ndim:
        raise TransformExecError(i, f"axis {axis} out of range for shape {list(x.shape)}")
    if fn == "mean":
        return np.mean(x, axis=axis)
    if fn == "var":
        return np.var(x, axis=axis)
    if fn == "min":
        return np.min(x, axis=axis)
    if fn == "max":
        return np.max(x, axis=axis)
    if fn == "sum":
        return np.sum(x, axis=axis)
    if fn == "count":
        return np.full(np.delete(np.array(x.shape), axis), float(x.shape[axis]))
    return np.apply_along_axis(lambda row: _population_skew(row), axis, x)


def _histogram_table(x: np.ndarray, bins: int, value_range, i: int,
                     density: bool) -> DataTable:
    if x.size == 0 and value_range is None:
        raise TransformExecError(i, "histogram of empty input needs an explicit range")
    if value_range is None:
        lo, hi = float(x.min()), float(x.max())
    else:
        lo, hi = value_range
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts = _kernels.histogram_counts(x, lo, hi, bins)
    edges = np.linspace(lo, hi, bins + 1)
    if density:
        total = counts.sum()
        width = (hi - lo) / bins
        dens = counts / (total * width) if total > 0 else counts.astype(np.float64)
        return DataTable(columns={"bin_edges": edges, "density": dens})
    return DataTable(columns={"bin_edges": edges, "counts": counts.astype(np.float64)})


def _coerce_branch_columns(name: str, result, i: int) -> dict[str, np.ndarray]:
    if isinstance(result, DataTable):
        if result.is_tensor:
            t = np.asarray(result.tensor, dtype=np.float64)
            return {name: np.atleast_1d(t.ravel())}
        return {f"{name}/{col}": np.asarray(v, dtype=np.float64).ravel()
                for col, v in result.columns.items()}
    t = np.asarray(result, dtype=np.float64)
    return {name: np.atleast_1d(t.ravel())}


def _apply_op(value, op: TransformOp, i: int, labels: Optional[np.ndarray],
              class_names: Optional[Sequence[str]]):
    p = op.params
    if op.name == "merge":
        if not isinstance(value, DataTable) or value.is_tensor:
            raise TransformExecError(i, "merge requires a branched column table")
        out: dict[str, np.ndarray] = {}
        for name in p["names"]:
            matched = {c: v for c, v in value.columns.items()
                       if c == name or c.startswith(name + "/")}
            if not matched:
                raise TransformExecError(i, f"merge references unknown branch '{name}'")
            out.update(matched)
        return DataTable(columns=out)
    if op.name == "branch":
        columns: dict[str, np.ndarray] = {}
        for bname in p["specs"]:
            sub = apply_transform(value, p["specs"][bname], labels=labels,
                                  class_names=class_names)
            columns.update(_coerce_branch_columns(bname, sub, i))
        return DataTable(columns=columns)

    x = _as_array(value, i)
    if op.name == "reshape":
        try:
            return x.reshape(p["shape"])
        except ValueError as exc:
            raise TransformExecError(i, str(exc))
    if op.name == "flatten":
        return x.ravel()
    if op.name == "slice":
        axis = p["axis"]
        if not -x.ndim <= axis < x.ndim:
            raise TransformExecError(i, f"axis {axis} out of range for shape {list(x.shape)}")
        index = [slice(None)] * x.ndim
        index[axis] = slice(p.get("start"), p.get("stop"), p.get("step"))
        return x[tuple(index)]
    if op.name == "filter":
        flat = x.ravel()
        cmp = {"gt": np.greater, "ge": np.greater_equal, "lt": np.less,
               "le": np.less_equal, "eq": np.equal}[p["cmp"]]
        return flat[cmp(flat, p["value"])]
    if op.name == "agg":
        return _agg_reduce(x, p["fn"], p["axis"], i)
    if op.name == "histogram":
        return _histogram_table(x, p["bins"], p.get("range"), i, density=False)
    if op.name == "density":
        return _histogram_table(x, p["bins"], p.get("range"), i, density=True)
    if op.name == "normalize":
        if x.size == 0:
            raise TransformExecError(i, "normalize of an empty input")
        if p["mode"] == "minmax":
            lo, hi = x.min(), x.max()
            if hi == lo:
                return np.zeros_like(x)
            return (x - lo) / (hi - lo)
        mean, std = x.mean(), x.std()
        if std == 0:
            return np.zeros_like(x)
        return (x - mean) / std
    if op.name == "groupby_class":
        if labels is None:
            raise TransformExecError(i, "groupby_class requires sample labels")
        lab = np.asarray(labels).ravel()
        if x.shape[0] != lab.shape[0]:
            raise TransformExecError(
                i, f"labels length {lab.shape[0]} != first dimension {x.shape[0]}")
        columns = {}
        for c in sorted(set(int(v) for v in lab)):
            name = (class_names[c] if class_names is not None and c < len(class_names)
                    else f"class_{c}")
            group = x[lab == c]
            # reduce over the sample axis: scalars for 1-D data, one value
            # per trailing column otherwise
            reduced = _agg_reduce(group, p["fn"], 0, i)
            columns[name] = np.atleast_1d(np.asarray(reduced, dtype=np.float64)).ravel()
        return DataTable(columns=columns)
    if op.name == "sort":
        flat = np.sort(x.ravel())
        return flat[::-1].copy() if p["descending"] else flat
    if op.name == "top_k":
        flat = x.ravel()
        k = min(p["k"], flat.size)
        key = np.abs(flat) if p["by"] == "abs" else flat
        order = np.argsort(-key, kind="stable")[:k]
        return DataTable(columns={"index": order.astype(np.float64),
                                  "value": flat[order]})
    raise TransformExecError(i, f"unhandled op '{op.name}'")


def apply_transform(data, spec: TransformSpec,
                    labels: Optional[np.ndarray] = None,
                    class_names: Optional[Sequence[str]] = None) -> DataTable:
    """Run ``spec`` over a tensor (or table) and return a DataTable.

    ``labels`` are per-sample class labels aligned on the first dimension,
    required by ``groupby_class``; ``class_names`` map label values to
    column names.
    """
    value = data.values if hasattr(data, "values") and hasattr(data, "dtype") else data
    for i, op in enumerate(spec.ops):
        value = _apply_op(value, op, i, labels, class_names)
    if isinstance(value, DataTable):
        return value
    return DataTable(tensor=np.asarray(value, dtype=np.float64))
