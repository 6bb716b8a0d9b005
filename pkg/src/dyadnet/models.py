"""Edge classifiers over the dyad graph.

Eight variants share one forward engine:

- D   dyadic: endpoint node vectors + the target edge vector
- D1  dyadic, node vectors only
- S   systemic: signed neighborhood propagation, endpoint/target features hidden
- S2  systemic, neighbor node features only (unsigned propagation)
- S3  systemic, neighbor edge features only (unsigned propagation, constant init)
- S4  systemic, signed topology only (constant init)
- C   combined: everything visible except the target edge's label
- MAJ constant-ALLIES baseline

All learned variants run the same node path: encoded (or constant) initial
embeddings followed by `gin_steps` update MLPs, where each step first adds
the signed neighbor sum over the variant's propagation edge set (empty for
D/D1).  Final score per edge: mean-aggregate each endpoint embedding with
that endpoint's edge-embedding term, classify both, sigmoid(dot).

Label visibility: signed variants (S, S4, C) propagate only edges whose
labels are visible (the training split during experiments), weighted +1 for
ALLIES and -1 for ENEMIES; label-blind variants (S2, S3) propagate every
edge except the target at weight +1.  The target edge never propagates and
its stored label is never read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ContractViolationError, DataError, \
    MaskedFeatureError
from .features import edge_embedding
from .graph import ALLIES, DyadGraph, RestrictedView, ordered_pair
from .tensor import (MlpParams, Tensor, add, gather_rows, gin_layer,
                     init_mlp, load_checkpoint, mlp_forward, mlp_tensors,
                     mul_cols, row_dot, save_checkpoint, scatter_add,
                     sigmoid, slice_rows, sub, tile_rows, tile_rows_masked)

VARIANTS = ("D", "S", "C", "MAJ", "D1", "S2", "S3", "S4")


@dataclass(frozen=True)
class FeatureMask:
    use_u: bool
    use_v: bool
    use_e: bool
    use_neighbor_nodes: bool
    use_neighbor_edges: bool
    use_neighbor_labels: bool

    @property
    def exposes_topology(self) -> bool:
        return (self.use_neighbor_nodes or self.use_neighbor_edges
                or self.use_neighbor_labels)

    @property
    def needs_node_encoder(self) -> bool:
        return self.use_u or self.use_v or self.use_neighbor_nodes

    @property
    def needs_edge_encoder(self) -> bool:
        return self.use_e or self.use_neighbor_edges

    def as_dict(self) -> Dict[str, bool]:
        return {"use_u": self.use_u, "use_v": self.use_v, "use_e": self.use_e,
                "use_neighbor_nodes": self.use_neighbor_nodes,
                "use_neighbor_edges": self.use_neighbor_edges,
                "use_neighbor_labels": self.use_neighbor_labels}


MASKS: Dict[str, FeatureMask] = {
    "D": FeatureMask(True, True, True, False, False, False),
    "D1": FeatureMask(True, True, False, False, False, False),
    "S": FeatureMask(False, False, False, True, True, True),
    "S2": FeatureMask(False, False, False, True, False, False),
    "S3": FeatureMask(False, False, False, False, True, False),
    "S4": FeatureMask(False, False, False, False, False, True),
    "C": FeatureMask(True, True, True, True, True, True),
}


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    node_encoder_dims: Tuple[int, ...]
    edge_encoder_dims: Tuple[int, ...]
    classifier_dims: Tuple[int, ...]
    gin_update_dims: Tuple[int, ...] = ()
    gin_steps: int = 2
    gin_eps: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == "MAJ":
            return
        mask = MASKS[self.variant]
        if self.gin_steps < 1:
            raise ConfigError("gin_steps must be >= 1")
        if len(self.classifier_dims) < 2:
            raise ConfigError("classifier_dims needs input and output sizes")
        d = self.hidden_dim
        if mask.needs_node_encoder:
            if len(self.node_encoder_dims) < 2:
                raise ConfigError("node_encoder_dims needs >= 2 sizes")
            if self.node_encoder_dims[-1] != d:
                raise ConfigError("node encoder output dim must equal "
                                  "classifier input dim")
        if mask.needs_edge_encoder:
            if len(self.edge_encoder_dims) < 2:
                raise ConfigError("edge_encoder_dims needs >= 2 sizes")
            if self.edge_encoder_dims[-1] != d:
                raise ConfigError("edge encoder output dim must equal "
                                  "classifier input dim")
        ud = self.update_dims
        if ud[0] != d or ud[-1] != d:
            raise ConfigError("gin update dims must start and end at the "
                              "classifier input dim")

    @property
    def hidden_dim(self) -> int:
        return self.classifier_dims[0]

    @property
    def update_dims(self) -> Tuple[int, ...]:
        if self.gin_update_dims:
            return self.gin_update_dims
        d = self.hidden_dim
        return (d, d, d)

    @property
    def mask(self) -> FeatureMask:
        return MASKS[self.variant]


class ModelParams:
    """Learned tensors for one variant.

    Components absent under the variant's feature mask are not allocated.
    Parameter draw order is fixed (node encoder, edge encoder, GIN updates,
    classifier) so variants sharing a component and a seed share its values.
    """

    def __init__(self, config: ModelConfig):
        if config.variant == "MAJ":
            raise ConfigError("MAJ has no parameters")
        self.config = config
        self.mask = config.mask
        rng = np.random.default_rng(config.seed)
        self.node_encoder: Optional[MlpParams] = None
        self.edge_encoder: Optional[MlpParams] = None
        if self.mask.needs_node_encoder:
            self.node_encoder = init_mlp(rng, config.node_encoder_dims)
        if self.mask.needs_edge_encoder:
            self.edge_encoder = init_mlp(rng, config.edge_encoder_dims)
        self.gin_updates: List[MlpParams] = [
            init_mlp(rng, config.update_dims) for _ in range(config.gin_steps)]
        self.classifier: MlpParams = init_mlp(rng, config.classifier_dims)

    def tensors(self) -> List[Tensor]:
        out: List[Tensor] = []
        if self.node_encoder is not None:
            out.extend(mlp_tensors(self.node_encoder))
        if self.edge_encoder is not None:
            out.extend(mlp_tensors(self.edge_encoder))
        for update in self.gin_updates:
            out.extend(mlp_tensors(update))
        out.extend(mlp_tensors(self.classifier))
        return out

    def named_arrays(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}

        def put(prefix: str, layers: MlpParams) -> None:
            for i, layer in enumerate(layers):
                out[f"{prefix}.{i}.W"] = layer.W.data
                out[f"{prefix}.{i}.b"] = layer.b.data

        if self.node_encoder is not None:
            put("node_encoder", self.node_encoder)
        if self.edge_encoder is not None:
            put("edge_encoder", self.edge_encoder)
        for s, update in enumerate(self.gin_updates):
            put(f"gin.{s}", update)
        put("classifier", self.classifier)
        return out

    def copy_arrays(self) -> Dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_arrays().items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        own = self.named_arrays()
        if set(own) != set(arrays):
            raise DataError("checkpoint tensor names do not match the model")
        for name, arr in own.items():
            src = np.asarray(arrays[name], dtype=np.float64)
            if src.shape != arr.shape:
                raise DataError(f"shape mismatch for tensor {name}")
            arr[...] = src

    def save(self, path) -> None:
        save_checkpoint(path, self.named_arrays())

    @classmethod
    def load(cls, config: ModelConfig, path) -> "ModelParams":
        params = cls(config)
        params.load_arrays(load_checkpoint(path))
        return params


@dataclass
class GraphTensors:
    """Array form of a dyad graph plus feature matrices.

    Nodes are indexed 0..N-1 in sorted-id order; edges 0..E-1 in the
    graph's canonical (u, v) order.  `y` holds 1.0 for ALLIES and 0.0 for
    ENEMIES.  Directed arrays list every edge in both orientations for the
    propagation and incident-edge scatters.
    """

    node_ids: Tuple
    X: np.ndarray
    u: np.ndarray
    v: np.ndarray
    y: np.ndarray
    Xe: np.ndarray
    node_index: Dict = field(repr=False)
    edge_index: Dict = field(repr=False)
    deg: np.ndarray = field(repr=False)
    src_dir: np.ndarray = field(repr=False)
    dst_dir: np.ndarray = field(repr=False)
    eid_dir: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.u)

    def edge_id(self, u, v) -> int:
        key = ordered_pair(u, v)
        eid = self.edge_index.get(key)
        if eid is None:
            raise DataError(f"no edge between {key[0]!r} and {key[1]!r}")
        return eid

    @classmethod
    def from_arrays(cls, X: np.ndarray, u: Sequence[int], v: Sequence[int],
                    y: Sequence[float], Xe: np.ndarray,
                    node_ids: Optional[Sequence] = None) -> "GraphTensors":
        X = np.asarray(X, dtype=np.float64)
        u = np.asarray(u, dtype=np.intp)
        v = np.asarray(v, dtype=np.intp)
        y = np.asarray(y, dtype=np.float64)
        Xe = np.asarray(Xe, dtype=np.float64)
        n = X.shape[0]
        if node_ids is None:
            node_ids = tuple(range(n))
        if not (len(u) == len(v) == len(y) == Xe.shape[0]):
            raise DataError("edge array lengths disagree")
        if len(u) and (u.min() < 0 or max(u.max(), v.max()) >= n):
            raise DataError("edge endpoint index out of range")
        if np.any(u == v):
            raise DataError("self-loop in edge arrays")
        return cls._assemble(tuple(node_ids), X, u, v, y, Xe)

    @classmethod
    def from_graph(cls, graph: DyadGraph, node_features: Mapping,
                   conflict_vectors: Mapping[int, np.ndarray]) -> "GraphTensors":
        node_ids = tuple(graph.nodes)
        rows = []
        for nid in node_ids:
            vec = node_features.get(nid)
            if vec is None:
                raise DataError(f"no feature vector for entity {nid!r}")
            rows.append(np.asarray(vec, dtype=np.float64))
        X = np.stack(rows, axis=0) if rows else np.zeros((0, 0))
        index = {nid: i for i, nid in enumerate(node_ids)}
        u = np.asarray([index[e.u] for e in graph.edges], dtype=np.intp)
        v = np.asarray([index[e.v] for e in graph.edges], dtype=np.intp)
        y = np.asarray([1.0 if e.label == ALLIES else 0.0
                        for e in graph.edges], dtype=np.float64)
        erows = [edge_embedding(e.conflict_ids, conflict_vectors)
                 for e in graph.edges]
        Xe = np.stack(erows, axis=0) if erows else np.zeros((0, X.shape[1]))
        return cls._assemble(node_ids, X, u, v, y, Xe)

    @classmethod
    def _assemble(cls, node_ids, X, u, v, y, Xe) -> "GraphTensors":
        n = X.shape[0]
        node_index = {nid: i for i, nid in enumerate(node_ids)}
        rev = {i: nid for nid, i in node_index.items()}
        edge_index = {ordered_pair(rev[int(a)], rev[int(b)]): k
                      for k, (a, b) in enumerate(zip(u, v))}
        if len(edge_index) != len(u):
            raise DataError("duplicate edge in edge arrays")
        deg = np.zeros(n, dtype=np.float64)
        np.add.at(deg, u, 1.0)
        np.add.at(deg, v, 1.0)
        src_dir = np.concatenate([u, v])
        dst_dir = np.concatenate([v, u])
        eid_dir = np.tile(np.arange(len(u), dtype=np.intp), 2)
        return cls(node_ids=node_ids, X=X, u=u, v=v, y=y, Xe=Xe,
                   node_index=node_index, edge_index=edge_index, deg=deg,
                   src_dir=src_dir, dst_dir=dst_dir, eid_dir=eid_dir)


def _propagation_arrays(gt: GraphTensors, mask: FeatureMask,
                        target_eids: np.ndarray,
                        label_visible: Optional[np.ndarray]):
    """Tiled directed (src, dst, w) with per-copy target exclusion."""
    b = len(target_eids)
    n = gt.n_nodes
    k = len(gt.eid_dir)
    if k == 0:
        return None
    if mask.use_neighbor_labels:
        if label_visible is None:
            base_keep = np.ones(k, dtype=bool)
        else:
            base_keep = label_visible[gt.eid_dir]
        w_base = np.where(gt.y[gt.eid_dir] == 1.0, 1.0, -1.0)
    else:
        base_keep = np.ones(k, dtype=bool)
        w_base = np.ones(k, dtype=np.float64)
    offsets = np.repeat(np.arange(b, dtype=np.intp) * n, k)
    keep = np.tile(base_keep, b) & \
        (np.tile(gt.eid_dir, b) != np.repeat(target_eids, k))
    if not keep.any():
        return None
    src = (np.tile(gt.src_dir, b) + offsets)[keep]
    dst = (np.tile(gt.dst_dir, b) + offsets)[keep]
    w = np.tile(w_base, b)[keep]
    return src, dst, w


def _edge_term(mask: FeatureMask, he: Optional[Tensor], gt: GraphTensors,
               target_eids: np.ndarray, end_idx: np.ndarray,
               incident_sum: Optional[Tensor]):
    """Per-endpoint mean of the variant's edge-feature set, with counts."""
    if mask.use_neighbor_edges:
        raw = gather_rows(incident_sum, end_idx)
        if mask.use_e:
            cnt = gt.deg[end_idx]
        else:
            raw = sub(raw, gather_rows(he, target_eids))
            cnt = gt.deg[end_idx] - 1.0
        return raw, cnt
    if mask.use_e:
        return gather_rows(he, target_eids), np.ones(len(target_eids))
    return None, None


def _aggregate(h_end: Tensor, raw: Optional[Tensor],
               cnt: Optional[np.ndarray]) -> Tensor:
    if raw is None:
        return h_end
    cnt = np.asarray(cnt, dtype=np.float64)
    inv = np.divide(1.0, cnt, out=np.zeros_like(cnt), where=cnt > 0)
    half = np.where(cnt > 0, 0.5, 1.0)
    return mul_cols(add(h_end, mul_cols(raw, inv[:, None])), half[:, None])


def forward_batch(params: ModelParams, gt: GraphTensors,
                  target_eids: Sequence[int],
                  label_visible: Optional[np.ndarray] = None) -> Tensor:
    """ALLIES probabilities for a batch of target edges, shape (B, 1).

    `label_visible` marks edges whose labels signed propagation may read
    (None = all).  Target edges never propagate and their labels are never
    read, so the output is independent of `gt.y[target_eids]`.
    """
    mask = params.mask
    cfg = params.config
    target_eids = np.asarray(target_eids, dtype=np.intp)
    b = len(target_eids)
    n = gt.n_nodes
    d = cfg.hidden_dim
    u_t = gt.u[target_eids]
    v_t = gt.v[target_eids]

    hn: Optional[Tensor] = None
    if params.node_encoder is not None:
        hn = mlp_forward(params.node_encoder, Tensor(gt.X))
    he: Optional[Tensor] = None
    incident_sum: Optional[Tensor] = None
    if params.edge_encoder is not None:
        he = mlp_forward(params.edge_encoder, Tensor(gt.Xe))
        if mask.use_neighbor_edges and gt.n_edges:
            ones = np.ones(len(gt.eid_dir), dtype=np.float64)
            incident_sum = scatter_add(he, gt.eid_dir, gt.src_dir, ones, n)

    if mask.exposes_topology:
        if mask.use_neighbor_nodes:
            if mask.use_u and mask.use_v:
                h = tile_rows(hn, b)
            else:
                offs = np.arange(b, dtype=np.intp) * n
                h = tile_rows_masked(hn, b, np.concatenate([offs + u_t,
                                                            offs + v_t]))
        else:
            base = np.full((b * n, d), 1.0 / np.sqrt(d))
            h = Tensor(base)
        prop = _propagation_arrays(gt, mask, target_eids, label_visible)
    else:
        idx = np.concatenate([u_t, v_t])
        h = gather_rows(hn, idx)
        prop = None

    if prop is None:
        empty = np.zeros(0, dtype=np.intp)
        prop = (empty, empty, np.zeros(0, dtype=np.float64))
    src, dst, w = prop
    for step in range(cfg.gin_steps):
        h = gin_layer(h, src, dst, w, params.gin_updates[step], cfg.gin_eps)

    if mask.exposes_topology:
        offs = np.arange(b, dtype=np.intp) * n
        h_u = gather_rows(h, offs + u_t)
        h_v = gather_rows(h, offs + v_t)
    else:
        h_u = slice_rows(h, 0, b)
        h_v = slice_rows(h, b, 2 * b)

    raw_u, cnt_u = _edge_term(mask, he, gt, target_eids, u_t, incident_sum)
    raw_v, cnt_v = _edge_term(mask, he, gt, target_eids, v_t, incident_sum)
    z_u = _aggregate(h_u, raw_u, cnt_u)
    z_v = _aggregate(h_v, raw_v, cnt_v)
    a = mlp_forward(params.classifier, z_u)
    c = mlp_forward(params.classifier, z_v)
    return sigmoid(row_dot(a, c))


def predict_batch(params: ModelParams, gt: GraphTensors,
                  target_eids: Sequence[int],
                  label_visible: Optional[np.ndarray] = None,
                  threshold: float = 0.5) -> np.ndarray:
    """Hard 0/1 predictions (1 = ALLIES); ties at the threshold go to 1."""
    p = forward_batch(params, gt, target_eids, label_visible)
    return (p.data[:, 0] >= threshold).astype(np.float64)


def _check_variant(params: ModelParams, allowed: Tuple[str, ...]) -> None:
    if params.config.variant not in allowed:
        raise ContractViolationError(
            f"variant {params.config.variant} not in {allowed}")


def forward_dyadic(params: ModelParams, gt: GraphTensors, u, v) -> float:
    """ALLIES probability from endpoint features alone (variants D, D1)."""
    _check_variant(params, ("D", "D1"))
    eid = gt.edge_id(u, v)
    return float(forward_batch(params, gt, [eid]).data[0, 0])


def forward_systemic(params: ModelParams, view: RestrictedView,
                     gt: GraphTensors, u, v) -> float:
    """ALLIES probability from the neighborhood (variants S, S2, S3, S4).

    The restricted view must hide exactly the target edge."""
    _check_variant(params, ("S", "S2", "S3", "S4"))
    key = ordered_pair(u, v)
    if view.excluded_edge != key:
        raise ContractViolationError(
            f"view excludes {view.excluded_edge}, target is {key}")
    try:
        view.edge_label(u, v)
    except MaskedFeatureError:
        pass
    else:
        raise ContractViolationError("target edge visible through view")
    eid = gt.edge_id(u, v)
    return float(forward_batch(params, gt, [eid]).data[0, 0])


def forward_combined(params: ModelParams, gt: GraphTensors, u, v) -> float:
    """ALLIES probability from dyadic plus systemic features (variant C)."""
    _check_variant(params, ("C",))
    eid = gt.edge_id(u, v)
    return float(forward_batch(params, gt, [eid]).data[0, 0])


def predict_majority(train_labels=()) -> int:
    """The majority baseline always predicts ALLIES."""
    return ALLIES


def write_model_manifest(path, config: ModelConfig, checkpoint_path: str) -> None:
    payload = {
        "variant": config.variant,
        "node_encoder_dims": list(config.node_encoder_dims),
        "edge_encoder_dims": list(config.edge_encoder_dims),
        "classifier_dims": list(config.classifier_dims),
        "gin_update_dims": list(config.update_dims),
        "gin_steps": config.gin_steps,
        "gin_eps": config.gin_eps,
        "seed": config.seed,
        "checkpoint_path": checkpoint_path,
        "feature_mask": (config.mask.as_dict()
                         if config.variant != "MAJ" else None),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
