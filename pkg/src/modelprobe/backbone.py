"""Navigable graph structures over the catalog: unit addressing, the tree of
models grouped into experiments, neuron-weight views, search badges, and
architectural pattern detection.

All builders are pure functions of an immutable catalog snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .store.model import ArchitectureGraph, ExperimentCatalog, ModelRecord, OP_KINDS
from .store.tensor_io import read_tensor

KIND_RANKS = {
    "experiment": 0,
    "model": 1,
    "layer": 2,
    "op": 3,
    "variable": 4,
    "neuron": 5,
    "weight": 6,
}

VARIABLE_IDS = ("kernel", "bias", "activations")

# dimension level of the unit a widget or tool is bound to
UNIT_LEVELS = {
    "experiment": "multi_model",
    "model": "single_model",
    "layer": "layer_unit",
    "op": "layer_unit",
    "variable": "layer_unit",
    "neuron": "weight_neuron",
    "weight": "weight_neuron",
}

STRUCTURE_NAMES = ("skip_connection", "multi_branch")


class ResolveError(ValueError):
    pass


class BadgeQueryError(ValueError):
    pass


class GraphStructureError(ValueError):
    pass


class ViewError(ValueError):
    pass


@dataclass(frozen=True)
class UnitPath:
    """Hierarchical address of a unit, e.g.
    ``model:vae_base/layer:z_mean/variable:kernel``."""

    segments: tuple[tuple[str, str], ...]

    @classmethod
    def parse(cls, text: str) -> "UnitPath":
        if not text:
            raise ResolveError("empty unit path")
        segments = []
        last_rank = -1
        for part in text.split("/"):
            kind, sep, ident = part.partition(":")
            if not sep or not ident:
                raise ResolveError(f"malformed segment '{part}' in '{text}'")
            if kind not in KIND_RANKS:
                raise ResolveError(f"unknown segment kind '{kind}' in '{text}'")
            rank = KIND_RANKS[kind]
            if rank <= last_rank:
                raise ResolveError(f"segment '{part}' out of hierarchy order in '{text}'")
            last_rank = rank
            if kind == "variable" and ident not in VARIABLE_IDS:
                raise ResolveError(f"variable id must be one of {VARIABLE_IDS}: '{ident}'")
            segments.append((kind, ident))
        return cls(tuple(segments))

    def __str__(self) -> str:
        return "/".join(f"{kind}:{ident}" for kind, ident in self.segments)

    @property
    def kind(self) -> str:
        return self.segments[-1][0]

    @property
    def leaf_id(self) -> str:
        return self.segments[-1][1]

    @property
    def level(self) -> str:
        return UNIT_LEVELS[self.kind]

    def get(self, kind: str) -> Optional[str]:
        for k, ident in self.segments:
            if k == kind:
                return ident
        return None

    def child(self, kind: str, ident: str) -> "UnitPath":
        return UnitPath(self.segments + ((kind, ident),))

    def parent(self) -> Optional["UnitPath"]:
        if len(self.segments) <= 1:
            return None
        return UnitPath(self.segments[:-1])

    def ancestors(self) -> list["UnitPath"]:
        return [UnitPath(self.segments[:n]) for n in range(len(self.segments) - 1, 0, -1)]

    def is_ancestor_of(self, other: "UnitPath") -> bool:
        n = len(self.segments)
        return len(other.segments) > n and other.segments[:n] == self.segments


def experiment_partition(catalog: ExperimentCatalog) -> dict[str, list[str]]:
    """Connected components of the undirected parent relation, ordered by the
    earliest created_at of their members. Ids are ``exp_<index>``."""
    parent_of = {}
    for mid, record in catalog.models.items():
        parent_of[mid] = mid

    def find(a: str) -> str:
        while parent_of[a] != a:
            parent_of[a] = parent_of[parent_of[a]]
            a = parent_of[a]
        return a

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent_of[ra] = rb

    for mid, record in catalog.models.items():
        for parent in record.header.parents:
            union(mid, parent)
    groups: dict[str, list[str]] = {}
    for mid in catalog.models:
        groups.setdefault(find(mid), []).append(mid)

    def component_key(members: list[str]):
        return min((catalog.models[m].header.created_at, m) for m in members)

    ordered = sorted(groups.values(), key=component_key)
    return {f"exp_{i}": sorted(members) for i, members in enumerate(ordered)}


def _model_depths(catalog: ExperimentCatalog, members: Sequence[str]) -> dict[str, int]:
    depths: dict[str, int] = {}

    def depth(mid: str) -> int:
        if mid not in depths:
            parents = catalog.models[mid].header.parents
            depths[mid] = 0 if not parents else 1 + max(depth(p) for p in parents)
        return depths[mid]

    for mid in members:
        depth(mid)
    return depths


@dataclass(frozen=True)
class TreeNode:
    id: str
    name: str
    color_index: int
    depth: int
    num_trainable_params: int


@dataclass(frozen=True)
class TreeEdge:
    parent: str
    child: str
    rel_param_change: Optional[float]


@dataclass(frozen=True)
class Experiment:
    id: str
    nodes: tuple[TreeNode, ...]
    edges: tuple[TreeEdge, ...]


@dataclass(frozen=True)
class ModelTreeGraph:
    experiments: tuple[Experiment, ...]

    def to_doc(self) -> dict:
        return {
            "experiments": [
                {
                    "id": e.id,
                    "models": [
                        {
                            "id": n.id,
                            "name": n.name,
                            "color_index": n.color_index,
                            "depth": n.depth,
                            "num_trainable_params": n.num_trainable_params,
                        }
                        for n in e.nodes
                    ],
                    "edges": [
                        {
                            "parent": ed.parent,
                            "child": ed.child,
                            "rel_param_change": ed.rel_param_change,
                        }
                        for ed in e.edges
                    ],
                }
                for e in self.experiments
            ]
        }


def build_model_tree(catalog: ExperimentCatalog) -> ModelTreeGraph:
    """Group models into experiments and lay out lineage edges.

    Edge weight is the relative change in trainable parameter count, or None
    when the parent has zero parameters (shown as an absolute change
    instead). Node order is (depth, created_at, id); the color index is the
    node's position in that order."""
    partition = experiment_partition(catalog)
    experiments = []
    for exp_id, members in partition.items():
        depths = _model_depths(catalog, members)
        ordered = sorted(
            members,
            key=lambda m: (depths[m], catalog.models[m].header.created_at, m),
        )
        nodes = tuple(
            TreeNode(
                id=mid,
                name=catalog.models[mid].header.name,
                color_index=i,
                depth=depths[mid],
                num_trainable_params=catalog.models[mid].num_trainable_params,
            )
            for i, mid in enumerate(ordered)
        )
        edges = []
        for mid in ordered:
            for parent in catalog.models[mid].header.parents:
                parent_params = catalog.models[parent].num_trainable_params
                child_params = catalog.models[mid].num_trainable_params
                rel = (
                    (child_params - parent_params) / parent_params
                    if parent_params > 0 else None
                )
                edges.append(TreeEdge(parent=parent, child=mid, rel_param_change=rel))
        edges.sort(key=lambda e: (e.parent, e.child))
        experiments.append(Experiment(id=exp_id, nodes=nodes, edges=tuple(edges)))
    return ModelTreeGraph(experiments=tuple(experiments))


def _resolve_epoch(record: ModelRecord, selector) -> int:
    if selector == "latest":
        return record.latest_checkpoint.epoch
    epoch = int(selector)
    if not any(b.epoch == epoch for b in record.checkpoints):
        raise ViewError(f"model {record.id} has no checkpoint at epoch {epoch}")
    return epoch


def _per_class_unit_means(mca: np.ndarray) -> np.ndarray:
    """Collapse per-class mean activations to one value per unit.

    Dense layers are already (classes, units); conv maps average the spatial
    dimensions per output channel."""
    arr = np.asarray(mca, dtype=np.float64)
    if arr.ndim <= 2:
        return arr
    return arr.reshape(arr.shape[0], -1, arr.shape[-1]).mean(axis=1)


@dataclass(frozen=True)
class NeuronEntry:
    index: int
    mean_activation: float
    share_relative: float
    share_absolute: float
    per_class_means: tuple[float, ...]

    def to_doc(self) -> dict:
        return {
            "index": self.index,
            "mean_activation": self.mean_activation,
            "share_relative": self.share_relative,
            "share_absolute": self.share_absolute,
            "per_class_means": list(self.per_class_means),
            "avg": self.mean_activation,
        }


@dataclass(frozen=True)
class NeuronWeightView:
    model: str
    layer: str
    source_layer: str
    epoch: int
    k: int
    source_neurons: tuple[NeuronEntry, ...]
    target_neurons: tuple[NeuronEntry, ...]
    edges: tuple[tuple[int, int, float], ...]

    def to_doc(self) -> dict:
        return {
            "model": self.model,
            "layer": self.layer,
            "source_layer": self.source_layer,
            "epoch": self.epoch,
            "k": self.k,
            "source_neurons": [n.to_doc() for n in self.source_neurons],
            "target_neurons": [n.to_doc() for n in self.target_neurons],
            "edges": [[a, b, v] for a, b, v in self.edges],
        }


def top_k_weight_edges(kernel: np.ndarray, k: int) -> list[tuple[int, int, float]]:
    """The k largest-magnitude entries of a 2-D kernel, ties broken by
    (row, col) ascending; conv kernels are collapsed to (in, out) by
    averaging the spatial taps first."""
    arr = np.asarray(kernel, dtype=np.float64)
    if arr.ndim > 2:
        arr = arr.reshape(-1, arr.shape[-2], arr.shape[-1]).mean(axis=0)
    if arr.ndim != 2:
        raise ViewError(f"kernel of rank {arr.ndim} cannot form a weight network")
    flat = arr.ravel()
    order = np.argsort(-np.abs(flat), kind="stable")[: min(k, flat.size)]
    out_dim = arr.shape[1]
    return [(int(i) // out_dim, int(i) % out_dim, float(flat[i])) for i in order]


def _neuron_entries(per_class: np.ndarray, class_selection: Sequence[int],
                    keep: set[int]) -> list[NeuronEntry]:
    selected = per_class[list(class_selection), :]
    mean_acts = selected.mean(axis=0)
    total = np.abs(mean_acts).sum()
    entries = []
    for i in sorted(keep):
        absolute = float(abs(mean_acts[i]))
        entries.append(
            NeuronEntry(
                index=i,
                mean_activation=float(mean_acts[i]),
                share_relative=float(absolute / total) if total > 0 else 0.0,
                share_absolute=absolute,
                per_class_means=tuple(float(v) for v in selected[:, i]),
            )
        )
    entries.sort(key=lambda e: (-e.mean_activation, e.index))
    return entries


def _included(mean_acts: np.ndarray, endpoint_indices: set[int]) -> set[int]:
    n = mean_acts.shape[0]
    if n < 20:
        return set(range(n))
    order = np.argsort(mean_acts, kind="stable")
    keep = set(int(i) for i in order[:10]) | set(int(i) for i in order[-10:])
    return keep | endpoint_indices


def build_neuron_weight_view(catalog: ExperimentCatalog, model_id: str, layer_id: str,
                             checkpoint_selector, class_selection: Sequence[int],
                             k: int) -> NeuronWeightView:
    """Top-k weight subgraph between a layer and its predecessor, with both
    neuron lists sorted by mean activation under the class selection."""
    if k < 1:
        raise ViewError("k must be >= 1")
    if not class_selection:
        raise ViewError("class selection must not be empty")
    record = catalog.model(model_id)
    epoch = _resolve_epoch(record, checkpoint_selector)
    bundle = record.checkpoint(epoch)
    kernel_path = f"layers/{layer_id}/weights/kernel"
    if kernel_path not in bundle.tensors:
        raise ViewError(f"layer {layer_id} has no kernel")
    kernel = read_tensor(bundle.tensors[kernel_path]).values

    arr = np.asarray(kernel, dtype=np.float64)
    in_dim = arr.shape[-2]
    source_layer = None
    for pred in record.graph.predecessors(layer_id):
        mca_path = f"layers/{pred}/mean_class_activations"
        if mca_path in bundle.tensors:
            units = _per_class_unit_means(
                read_tensor(bundle.tensors[mca_path]).values).shape[1]
            if units == in_dim:
                source_layer = pred
                break
    if source_layer is None:
        raise ViewError(
            f"no predecessor of {layer_id} with activations matching the kernel "
            f"input dimension {in_dim}")

    for c in class_selection:
        if not 0 <= int(c) < len(catalog.class_labels):
            raise ViewError(f"unknown class id: {c}")
    source_pc = _per_class_unit_means(
        read_tensor(bundle.tensors[f"layers/{source_layer}/mean_class_activations"]).values)
    target_pc = _per_class_unit_means(
        read_tensor(bundle.tensors[f"layers/{layer_id}/mean_class_activations"]).values)

    edges = top_k_weight_edges(kernel, k)
    src_endpoints = {a for a, _, _ in edges}
    tgt_endpoints = {b for _, b, _ in edges}
    selection = [int(c) for c in class_selection]
    src_means = source_pc[selection, :].mean(axis=0)
    tgt_means = target_pc[selection, :].mean(axis=0)
    return NeuronWeightView(
        model=model_id,
        layer=layer_id,
        source_layer=source_layer,
        epoch=epoch,
        k=k,
        source_neurons=tuple(_neuron_entries(source_pc, selection,
                                             _included(src_means, src_endpoints))),
        target_neurons=tuple(_neuron_entries(target_pc, selection,
                                             _included(tgt_means, tgt_endpoints))),
        edges=tuple(edges),
    )


def neurons_by_class_matrix(catalog: ExperimentCatalog, model_id: str, layer_id: str,
                            checkpoint_selector,
                            sort_by_class: Optional[int] = None) -> list[dict]:
    """Rows of (neuron index, per-class mean activations), optionally sorted
    by one class column (descending, ties by neuron index)."""
    record = catalog.model(model_id)
    epoch = _resolve_epoch(record, checkpoint_selector)
    bundle = record.checkpoint(epoch)
    path = f"layers/{layer_id}/mean_class_activations"
    if path not in bundle.tensors:
        raise ViewError(f"layer {layer_id} has no mean class activations")
    per_class = _per_class_unit_means(read_tensor(bundle.tensors[path]).values)
    num_classes, units = per_class.shape
    if sort_by_class is not None and not 0 <= sort_by_class < num_classes:
        raise ViewError(f"unknown class id: {sort_by_class}")
    rows = [
        {"neuron": i, "means": [float(v) for v in per_class[:, i]]}
        for i in range(units)
    ]
    if sort_by_class is not None:
        rows.sort(key=lambda r: (-r["means"][sort_by_class], r["neuron"]))
    return rows


@dataclass(frozen=True)
class Badge:
    uoa: str
    match_kind: str
    count: int

    def to_doc(self) -> dict:
        return {"uoa": self.uoa, "match_kind": self.match_kind, "count": self.count}


def _layer_types(catalog: ExperimentCatalog) -> set[str]:
    types = set()
    for record in catalog.models.values():
        for layer in record.graph.layers:
            types.add(layer.type)
    return types


def propagate_badges(catalog: ExperimentCatalog, query: str) -> list[Badge]:
    """Badges at every matching unit, plus ancestor badges whose count is the
    sum of descendant match counts (up to the experiment)."""
    is_op_kind = query in OP_KINDS
    is_structure = query in STRUCTURE_NAMES
    is_layer_type = query in _layer_types(catalog)
    if not (is_op_kind or is_structure or is_layer_type):
        raise BadgeQueryError(f"unknown query: {query}")

    counts: dict[str, int] = {}

    def bump(path: str, n: int = 1) -> None:
        counts[path] = counts.get(path, 0) + n

    partition = experiment_partition(catalog)
    exp_of = {mid: exp for exp, members in partition.items() for mid in members}

    for mid in sorted(catalog.models):
        record = catalog.models[mid]
        model_path = f"model:{mid}"
        model_hits = 0
        for layer in record.graph.layers:
            layer_path = f"{model_path}/layer:{layer.id}"
            hits = 0
            if is_layer_type and layer.type == query:
                hits += 1
            if is_op_kind:
                for op in layer.inner_ops:
                    if op.kind == query:
                        bump(f"{layer_path}/op:{op.id}")
                        hits += 1
            if hits:
                bump(layer_path, hits)
                model_hits += hits
        if is_structure:
            report = detect_structures(record.graph)
            for u, _v in report[query]:
                # a structure pair is badged at its source layer
                bump(f"{model_path}/layer:{u}")
                model_hits += 1
        if model_hits:
            bump(model_path, model_hits)
            bump(f"experiment:{exp_of[mid]}", model_hits)
    return [Badge(uoa=path, match_kind=query, count=n)
            for path, n in sorted(counts.items())]


def _reachable(adj: dict[str, list[str]], start: str, goal: str,
               banned: frozenset[str]) -> bool:
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        for nxt in adj.get(node, ()):
            if nxt == goal:
                return True
            if nxt not in seen and nxt not in banned:
                seen.add(nxt)
                stack.append(nxt)
    return False


def detect_structures(graph: ArchitectureGraph) -> dict[str, list[tuple[str, str]]]:
    """Skip connections (direct edge shadowed by a longer path) and
    multi-branches (two internally node-disjoint paths of length >= 2)."""
    nodes = [l.id for l in graph.layers]
    edge_set = {tuple(e) for e in graph.edges}
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in sorted(edge_set):
        if a not in adj or b not in adj:
            raise GraphStructureError(f"edge ({a}, {b}) references unknown layer")
        adj[a].append(b)

    # cycle check
    state: dict[str, int] = {}

    def visit(n: str) -> None:
        state[n] = 1
        for m in adj[n]:
            mark = state.get(m, 0)
            if mark == 1:
                raise GraphStructureError(f"graph is cyclic through '{m}'")
            if mark == 0:
                visit(m)
        state[n] = 2

    for n in nodes:
        if state.get(n, 0) == 0:
            visit(n)

    skip: list[tuple[str, str]] = []
    multi: list[tuple[str, str]] = []
    for u in nodes:
        for v in nodes:
            if u == v:
                continue
            indirect = {n: [m for m in adj[n] if not (n == u and m == v)] for n in adj}
            connected = _reachable(indirect, u, v, frozenset())
            if (u, v) in edge_set and connected:
                skip.append((u, v))
            if connected:
                # Menger: >= 2 internally disjoint paths iff no single
                # internal vertex separates u from v (no direct edge here,
                # so every path has length >= 2)
                if all(
                    _reachable(indirect, u, v, frozenset({w}))
                    for w in nodes
                    if w not in (u, v)
                ):
                    multi.append((u, v))
    return {"skip_connection": sorted(skip), "multi_branch": sorted(multi)}


def resolve(path: UnitPath, catalog: ExperimentCatalog) -> UnitPath:
    """Check every segment against the catalog; returns the path unchanged."""
    partition = experiment_partition(catalog)
    record: Optional[ModelRecord] = None
    layer = None
    variable = None
    for kind, ident in path.segments:
        if kind == "experiment":
            if ident not in partition:
                raise ResolveError(f"unknown experiment: {ident}")
        elif kind == "model":
            if ident not in catalog.models:
                raise ResolveError(f"unknown model: {ident}")
            exp = path.get("experiment")
            if exp is not None and ident not in partition.get(exp, ()):
                raise ResolveError(f"model {ident} is not part of {exp}")
            record = catalog.models[ident]
        elif kind == "layer":
            if record is None:
                raise ResolveError("layer segment requires a model segment")
            try:
                layer = record.graph.layer(ident)
            except KeyError:
                raise ResolveError(f"unknown layer: {ident}")
        elif kind == "op":
            if layer is None:
                raise ResolveError("op segment requires a layer segment")
            if ident not in {op.id for op in layer.inner_ops}:
                raise ResolveError(f"unknown op: {ident}")
        elif kind == "variable":
            if layer is None:
                raise ResolveError("variable segment requires a layer segment")
            if record.checkpoints:
                bundle = record.latest_checkpoint
                tensor_path = (
                    f"layers/{layer.id}/activations" if ident == "activations"
                    else f"layers/{layer.id}/weights/{ident}"
                )
                if tensor_path not in bundle.tensors:
                    raise ResolveError(f"layer {layer.id} has no {ident} data")
            variable = ident
        elif kind == "neuron":
            if layer is None:
                raise ResolveError("neuron segment requires a layer segment")
            units = layer.output_shape[-1] if layer.output_shape else 0
            if not (ident.isdigit() and int(ident) < units):
                raise ResolveError(f"neuron index out of range: {ident}")
        elif kind == "weight":
            if variable not in ("kernel", "bias"):
                raise ResolveError("weight segment requires a kernel or bias variable")
            if record.checkpoints:
                ref = record.latest_checkpoint.tensors.get(
                    f"layers/{layer.id}/weights/{variable}")
                parts = ident.split("_")
                if ref is not None:
                    dims = ref.shape[-2:] if variable == "kernel" else ref.shape[-1:]
                    ok = (len(parts) == len(dims)
                          and all(p.isdigit() and int(p) < d
                                  for p, d in zip(parts, dims)))
                    if not ok:
                        raise ResolveError(f"weight index out of range: {ident}")
    return path
