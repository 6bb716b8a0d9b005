"""Dyad extraction and the labeled dyad graph.

Per-conflict Cartesian pairs are aggregated into one edge per unordered
entity pair with ally/enemy tallies and conflict provenance; the restricted
view hides one edge (label + features) and masks its endpoints' features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, MaskedFeatureError, ValidationError
from .wikitext import InfoboxMilitaryConflict, entity_id

ALLIES = "ALLIES"
ENEMIES = "ENEMIES"

Pair = Tuple[str, str]


def ordered_pair(u: str, v: str) -> Pair:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Conflict:
    """One conflict's belligerents as disjoint sets of entity ids."""

    conflict_id: int
    belligerents: Tuple[frozenset, ...]


def conflict_from_infobox(record: InfoboxMilitaryConflict) -> Conflict:
    """Map combatant groups to entity-id sets (duplicates within a group
    collapse; cross-group duplicates fail validation in dyads_from_conflict)."""
    return Conflict(
        conflict_id=record.conflict_id,
        belligerents=tuple(frozenset(entity_id(r) for r in group)
                           for group in record.combatant_groups))


def dyads_from_conflict(c: Conflict) -> List[Tuple[Pair, str]]:
    """Every unordered entity pair of the conflict exactly once; ENEMIES iff
    the endpoints lie in different belligerent sets."""
    membership: Dict[str, int] = {}
    for gi, group in enumerate(c.belligerents):
        if not group:
            raise ValidationError(
                f"conflict {c.conflict_id}: empty belligerent set")
        for ent in group:
            if ent in membership:
                raise ValidationError(
                    f"conflict {c.conflict_id}: entity {ent!r} appears in "
                    f"multiple belligerent sets")
            membership[ent] = gi
    out: List[Tuple[Pair, str]] = []
    for u, v in combinations(sorted(membership), 2):
        label = ALLIES if membership[u] == membership[v] else ENEMIES
        out.append(((u, v), label))
    return out


@dataclass(frozen=True)
class Dyad:
    """One aggregated edge of the dyad graph."""

    u: str
    v: str
    label: str
    ally_count: int
    enemy_count: int
    conflict_ids: Tuple[int, ...]


class DyadGraph:
    """Immutable labeled graph over entity ids; one edge per unordered pair."""

    def __init__(self, edges: Iterable[Dyad]):
        self.edges: Tuple[Dyad, ...] = tuple(
            sorted(edges, key=lambda e: (e.u, e.v)))
        self._index: Dict[Pair, Dyad] = {}
        nodes = set()
        for e in self.edges:
            if e.u == e.v:
                raise ValidationError(f"self-loop on {e.u!r}")
            key = (e.u, e.v)
            if key != ordered_pair(e.u, e.v):
                raise ValidationError(f"edge {key} not stored with u < v")
            if key in self._index:
                raise ValidationError(f"duplicate edge {key}")
            self._index[key] = e
            nodes.add(e.u)
            nodes.add(e.v)
        self.nodes: Tuple[str, ...] = tuple(sorted(nodes))

    def __len__(self) -> int:
        return len(self.edges)

    def has_edge(self, u: str, v: str) -> bool:
        return ordered_pair(u, v) in self._index

    def edge(self, u: str, v: str) -> Dyad:
        try:
            return self._index[ordered_pair(u, v)]
        except KeyError:
            raise DataError(f"no edge {ordered_pair(u, v)}") from None


def aggregate(all_pairs: Iterable[Tuple[Pair, str, int]]) -> DyadGraph:
    """Tally per-pair ally/enemy evidence across conflicts.

    Label is ALLIES iff ally_count > enemy_count (ties are ENEMIES).
    """
    tally: Dict[Pair, List] = {}
    for pair, label, conflict_id in all_pairs:
        key = ordered_pair(*pair)
        rec = tally.setdefault(key, [0, 0, set()])
        if label == ALLIES:
            rec[0] += 1
        elif label == ENEMIES:
            rec[1] += 1
        else:
            raise ValidationError(f"unknown label {label!r}")
        rec[2].add(conflict_id)
    edges = []
    for (u, v), (ally, enemy, ids) in tally.items():
        edges.append(Dyad(u=u, v=v,
                          label=ALLIES if ally > enemy else ENEMIES,
                          ally_count=ally, enemy_count=enemy,
                          conflict_ids=tuple(sorted(ids))))
    return DyadGraph(edges)


def build_graph(conflicts: Sequence[InfoboxMilitaryConflict]) -> DyadGraph:
    """Infobox records straight to the aggregated dyad graph."""
    triples: List[Tuple[Pair, str, int]] = []
    for record in conflicts:
        c = conflict_from_infobox(record)
        for pair, label in dyads_from_conflict(c):
            triples.append((pair, label, c.conflict_id))
    return aggregate(triples)


class RestrictedView:
    """The graph with one edge hidden and its endpoints feature-masked.

    Topology stays intact. Querying the hidden edge's label/features or a
    masked node's features raises MaskedFeatureError; model code substitutes
    the zero vector by the documented convention instead of reading through
    the mask.
    """

    def __init__(self, base: DyadGraph, excluded_edge: Pair,
                 node_features: Optional[Mapping[str, np.ndarray]] = None,
                 edge_features: Optional[Mapping[Pair, np.ndarray]] = None):
        self.base = base
        self.excluded_edge = ordered_pair(*excluded_edge)
        self.masked_nodes = frozenset(self.excluded_edge)
        self._node_features = node_features
        self._edge_features = edge_features

    def visible_edges(self) -> Iterator[Dyad]:
        for e in self.base.edges:
            if (e.u, e.v) != self.excluded_edge:
                yield e

    def edge_label(self, u: str, v: str) -> str:
        if ordered_pair(u, v) == self.excluded_edge:
            raise MaskedFeatureError(f"label of hidden edge {self.excluded_edge}")
        return self.base.edge(u, v).label

    def node_feature(self, node: str) -> np.ndarray:
        if node in self.masked_nodes:
            raise MaskedFeatureError(f"features of masked node {node!r}")
        if self._node_features is None or node not in self._node_features:
            raise DataError(f"no feature vector for node {node!r}")
        return self._node_features[node]

    def edge_feature(self, u: str, v: str) -> np.ndarray:
        key = ordered_pair(u, v)
        if key == self.excluded_edge:
            raise MaskedFeatureError(f"features of hidden edge {key}")
        if self._edge_features is None or key not in self._edge_features:
            raise DataError(f"no feature vector for edge {key}")
        return self._edge_features[key]


def restricted_view(g: DyadGraph, target: Pair,
                    node_features: Optional[Mapping[str, np.ndarray]] = None,
                    edge_features: Optional[Mapping[Pair, np.ndarray]] = None
                    ) -> RestrictedView:
    key = ordered_pair(*target)
    if not g.has_edge(*key):
        raise DataError(f"target edge {key} not in graph")
    return RestrictedView(g, key, node_features, edge_features)


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    ally_fraction: float
    degree_histogram: Tuple[Tuple[int, int], ...]  # (degree, count) pairs


def graph_stats(g: DyadGraph) -> GraphStats:
    if not g.edges:
        return GraphStats(0, 0, 0.0, ())
    degree: Dict[str, int] = {n: 0 for n in g.nodes}
    allies = 0
    for e in g.edges:
        degree[e.u] += 1
        degree[e.v] += 1
        if e.label == ALLIES:
            allies += 1
    hist: Dict[int, int] = {}
    for d in degree.values():
        hist[d] = hist.get(d, 0) + 1
    return GraphStats(node_count=len(g.nodes), edge_count=len(g.edges),
                      ally_fraction=allies / len(g.edges),
                      degree_histogram=tuple(sorted(hist.items())))


def write_graph_json(path, g: DyadGraph) -> None:
    doc = {
        "nodes": list(g.nodes),
        "edges": [{"u": e.u, "v": e.v, "label": e.label,
                   "ally_count": e.ally_count, "enemy_count": e.enemy_count,
                   "conflict_ids": list(e.conflict_ids)}
                  for e in g.edges],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def read_graph_json(path) -> DyadGraph:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    edges = [Dyad(u=e["u"], v=e["v"], label=e["label"],
                  ally_count=e["ally_count"], enemy_count=e["enemy_count"],
                  conflict_ids=tuple(e["conflict_ids"]))
             for e in doc["edges"]]
    g = DyadGraph(edges)
    extra = set(doc["nodes"]) - set(g.nodes)
    if extra:
        raise DataError(f"graph.json lists isolated nodes: {sorted(extra)[:3]}")
    return g
