"""Abnormality scoring: statistical descriptors and baseline divergences,
normalized per variable type and propagated up the model hierarchy.

Raw scores are computed per data-bearing unit (activations, kernel, bias of
each layer at one checkpoint), min-max normalized within one
(measure, variable type) group, and propagated upward by taking the maximum
over children so an anomaly stays visible at every level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .store.model import ExperimentCatalog, ModelRecord
from .store.tensor_io import read_tensor

MEASURE_KINDS = ("skew", "variance", "min", "max", "baseline_divergence")
BASELINE_KINDS = ("standard_normal", "fitted_normal", "uniform", "custom_samples")
VARIABLE_TYPES = ("activations", "dense-kernel", "dense-bias", "conv-kernel", "conv-bias")

_BASELINE_SEED = 178
_BASELINE_DRAWS = 10_000

COLOR_LOW = (0x3B, 0x4C, 0xC0)
COLOR_HIGH = (0xB4, 0x04, 0x26)


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineSpec:
    kind: str = "standard_normal"
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ScoringError(f"unknown baseline kind: {self.kind}")
        if self.kind == "custom_samples":
            if self.samples is None or np.asarray(self.samples).size == 0:
                raise ScoringError("custom_samples baseline needs a non-empty sample array")


@dataclass(frozen=True)
class InterestingnessMeasure:
    kind: str
    baseline: Optional[BaselineSpec] = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ScoringError(f"unknown measure kind: {self.kind}")
        if self.kind == "baseline_divergence" and self.baseline is None:
            object.__setattr__(self, "baseline", BaselineSpec())

    def to_doc(self) -> dict:
        doc = {"kind": self.kind}
        if self.baseline is not None:
            doc["baseline"] = self.baseline.kind
        return doc


@dataclass
class InterestingnessReport:
    measure: InterestingnessMeasure
    epoch_by_model: dict[str, int]
    variable_types: dict[str, str]  # unit path -> variable type
    raw: dict[str, float]
    normalized: dict[str, float]
    propagated: dict[str, float]

    def to_doc(self) -> dict:
        return {
            "measure": self.measure.to_doc(),
            "epochs": self.epoch_by_model,
            "variable_types": self.variable_types,
            "raw": self.raw,
            "normalized": self.normalized,
            "propagated": self.propagated,
        }


def compute_descriptors(values: np.ndarray) -> dict[str, float]:
    """Population skew, variance, min, and max in double precision."""
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ScoringError("descriptors of an empty tensor are undefined")
    _, m2, m3, mn, mx = _kernels.moments(flat)
    skew = 0.0 if m2 == 0.0 else m3 / m2 ** 1.5
    return {"skew": skew, "variance": m2, "min": mn, "max": mx}


def _draw_baseline(baseline: BaselineSpec, data: np.ndarray) -> np.ndarray:
    if baseline.kind == "custom_samples":
        return np.asarray(baseline.samples, dtype=np.float64).ravel()
    rng = np.random.default_rng(_BASELINE_SEED)
    if baseline.kind == "standard_normal":
        return rng.standard_normal(_BASELINE_DRAWS)
    if baseline.kind == "fitted_normal":
        std = data.std()
        return rng.standard_normal(_BASELINE_DRAWS) * (std if std > 0 else 1.0) + data.mean()
    lo, hi = data.min(), data.max()
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return rng.uniform(lo, hi, _BASELINE_DRAWS)


def divergence_from_baseline(values: np.ndarray, baseline: BaselineSpec,
                             bins: int = 64) -> float:
    """Jensen-Shannon divergence (natural log) between equal-width histograms
    of the data and of seeded baseline draws over their combined range.
    Bounded by ln 2."""
    data = np.asarray(values, dtype=np.float64).ravel()
    if data.size == 0:
        raise ScoringError("divergence of an empty tensor is undefined")
    ref = _draw_baseline(baseline, data)
    lo = min(data.min(), ref.min())
    hi = max(data.max(), ref.max())
    p = _kernels.histogram_counts(data, lo, hi, bins).astype(np.float64)
    q = _kernels.histogram_counts(ref, lo, hi, bins).astype(np.float64)
    p /= p.sum()
    q /= q.sum()
    m = 0.5 * (p + q)

    def _kl(a: np.ndarray, b: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / b[mask])))

    return 0.5 * _kl(p, m) + 0.5 * _kl(q, m)


def _variable_type(layer_type: str, leaf: str) -> str:
    if leaf == "activations":
        return "activations"
    family = "conv" if layer_type.startswith("conv") else "dense"
    return f"{family}-{leaf}"


def _raw_score(values: np.ndarray, measure: InterestingnessMeasure) -> float:
    if measure.kind == "baseline_divergence":
        return divergence_from_baseline(values, measure.baseline)
    return compute_descriptors(values)[measure.kind]


def _resolve_epoch(record: ModelRecord, selector) -> Optional[int]:
    if not record.checkpoints:
        return None
    if selector == "latest":
        return record.latest_checkpoint.epoch
    epoch = int(selector)
    return epoch if any(b.epoch == epoch for b in record.checkpoints) else None


def score_and_propagate(catalog: ExperimentCatalog, checkpoint_selector,
                        measure: InterestingnessMeasure,
                        models: Optional[Sequence[str]] = None) -> InterestingnessReport:
    """Score every data-bearing unit at the selected checkpoint.

    ``models`` restricts scope to a subset of model ids (scores are
    comparable within whatever is currently in view); default is the whole
    catalog. Normalization groups are (measure, variable type); an all-equal
    group normalizes to 0. Parent scores are the max over children.
    """
    from .backbone import experiment_partition  # local import to avoid a cycle

    scope = sorted(models) if models is not None else sorted(catalog.models)
    for mid in scope:
        if mid not in catalog.models:
            raise ScoringError(f"unknown model: {mid}")
    raw: dict[str, float] = {}
    types: dict[str, str] = {}
    epochs: dict[str, int] = {}
    for mid in scope:
        record = catalog.models[mid]
        epoch = _resolve_epoch(record, checkpoint_selector)
        if epoch is None:
            continue
        epochs[mid] = epoch
        bundle = record.checkpoint(epoch)
        layer_types = {l.id: l.type for l in record.graph.layers}
        for path in sorted(bundle.tensors):
            if not path.startswith("layers/"):
                continue
            parts = path.split("/")
            layer, leaf = parts[1], parts[-1]
            if leaf not in ("activations", "kernel", "bias"):
                continue
            unit = f"model:{mid}/layer:{layer}/variable:{leaf}"
            tensor = read_tensor(bundle.tensors[path])
            raw[unit] = float(_raw_score(tensor.values, measure))
            types[unit] = _variable_type(layer_types.get(layer, "dense"), leaf)
    if not raw:
        raise ScoringError("no data-bearing units in scope")

    normalized: dict[str, float] = {}
    for vtype in sorted(set(types.values())):
        group = [u for u in raw if types[u] == vtype]
        values = [raw[u] for u in group]
        lo, hi = min(values), max(values)
        for u in group:
            normalized[u] = 0.0 if hi == lo else (raw[u] - lo) / (hi - lo)

    propagated: dict[str, float] = {}
    for unit, score in normalized.items():
        model_part, layer_part, _ = unit.split("/")
        for ancestor in (f"{model_part}/{layer_part}", model_part):
            propagated[ancestor] = max(propagated.get(ancestor, 0.0), score)
    partition = experiment_partition(catalog)
    for exp_id, members in partition.items():
        scores = [propagated.get(f"model:{mid}", None) for mid in members]
        scores = [s for s in scores if s is not None]
        if scores:
            propagated[f"experiment:{exp_id}"] = max(scores)
    return InterestingnessReport(
        measure=measure,
        epoch_by_model=epochs,
        variable_types=types,
        raw=raw,
        normalized=normalized,
        propagated=propagated,
    )


def colorize(score: float) -> str:
    """Hex color on a linear per-channel scale from blue (0) to red (1)."""
    t = min(1.0, max(0.0, float(score)))
    channels = (
        round(lo + t * (hi - lo)) for lo, hi in zip(COLOR_LOW, COLOR_HIGH)
    )
    return "#" + "".join(f"{c:02X}" for c in channels)
