"""Dyad extraction, aggregation, graph containers, restricted views."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadnet.errors import (DataError, MaskedFeatureError, ValidationError)
from dyadnet.graph import (ALLIES, ENEMIES, Conflict, Dyad, DyadGraph,
                           aggregate, build_graph, conflict_from_infobox,
                           dyads_from_conflict, graph_stats, ordered_pair,
                           read_graph_json, restricted_view, write_graph_json)
from dyadnet.wikitext import EntityRef, InfoboxMilitaryConflict

from _util import enumerate_dyads_reference, random_conflict_groups


def conflict(groups, cid=1):
    return Conflict(conflict_id=cid,
                    belligerents=tuple(frozenset(g) for g in groups))


class TestOrderedPair:
    def test_sorts(self):
        assert ordered_pair("b", "a") == ("a", "b")
        assert ordered_pair("a", "b") == ("a", "b")

    @given(st.text(min_size=1, max_size=5), st.text(min_size=1, max_size=5))
    def test_invariant(self, a, b):
        p = ordered_pair(a, b)
        assert p == ordered_pair(b, a)
        assert p[0] <= p[1]


class TestDyadsFromConflict:
    def test_two_vs_two(self):
        out = dict(dyads_from_conflict(conflict([{"a", "b"}, {"c", "d"}])))
        assert out == {("a", "b"): ALLIES, ("c", "d"): ALLIES,
                       ("a", "c"): ENEMIES, ("a", "d"): ENEMIES,
                       ("b", "c"): ENEMIES, ("b", "d"): ENEMIES}

    def test_singletons_have_no_ally_pairs(self):
        out = dict(dyads_from_conflict(conflict([{"a"}, {"b"}, {"c"}])))
        assert set(out.values()) == {ENEMIES}
        assert len(out) == 3

    def test_pair_count_formula(self):
        c = conflict([{"a", "b", "c"}, {"d", "e"}, {"f"}])
        out = dyads_from_conflict(c)
        n = 6
        assert len(out) == n * (n - 1) // 2
        allies = sum(1 for _, lab in out if lab == ALLIES)
        assert allies == 3 + 1  # C(3,2) + C(2,2)

    def test_empty_group_raises(self):
        with pytest.raises(ValidationError, match="empty"):
            dyads_from_conflict(conflict([{"a"}, set()]))

    def test_entity_in_two_groups_raises(self):
        with pytest.raises(ValidationError, match="multiple"):
            dyads_from_conflict(conflict([{"a", "b"}, {"b", "c"}]))

    def test_matches_brute_force_reference(self):
        rng = np.random.default_rng(17)
        for cid in range(50):
            groups = random_conflict_groups(rng)
            got = dict(dyads_from_conflict(conflict(groups, cid)))
            assert got == enumerate_dyads_reference(groups)


class TestAggregate:
    def test_majority_wins(self):
        g = aggregate([(("a", "b"), ALLIES, 1), (("a", "b"), ALLIES, 2),
                       (("a", "b"), ENEMIES, 3)])
        e = g.edge("a", "b")
        assert e.label == ALLIES
        assert (e.ally_count, e.enemy_count) == (2, 1)
        assert e.conflict_ids == (1, 2, 3)

    def test_tie_is_enemies(self):
        g = aggregate([(("a", "b"), ALLIES, 1), (("a", "b"), ENEMIES, 2)])
        assert g.edge("a", "b").label == ENEMIES

    def test_unordered_input_pairs_merge(self):
        g = aggregate([(("b", "a"), ALLIES, 1), (("a", "b"), ALLIES, 2)])
        assert len(g) == 1
        assert g.edge("a", "b").ally_count == 2

    def test_order_invariance_is_bitwise(self):
        rng = np.random.default_rng(23)
        triples = []
        for cid in range(30):
            for pair, lab in dyads_from_conflict(
                    conflict(random_conflict_groups(rng), cid)):
                triples.append((pair, lab, cid))
        base = aggregate(triples)
        for seed in range(5):
            perm = list(triples)
            np.random.default_rng(seed).shuffle(perm)
            other = aggregate(perm)
            assert other.edges == base.edges
            assert other.nodes == base.nodes

    def test_unknown_label_raises(self):
        with pytest.raises(ValidationError):
            aggregate([(("a", "b"), "FRIENDS", 1)])


class TestDyadGraph:
    def test_edges_and_nodes_sorted(self):
        g = aggregate([(("c", "d"), ALLIES, 1), (("a", "b"), ENEMIES, 1),
                       (("a", "d"), ALLIES, 2)])
        assert [(e.u, e.v) for e in g.edges] == \
            [("a", "b"), ("a", "d"), ("c", "d")]
        assert g.nodes == ("a", "b", "c", "d")

    def test_has_edge_and_lookup(self):
        g = aggregate([(("a", "b"), ALLIES, 1)])
        assert g.has_edge("b", "a")
        assert not g.has_edge("a", "c")
        with pytest.raises(DataError):
            g.edge("a", "c")

    def test_duplicate_edge_rejected(self):
        d = Dyad("a", "b", ALLIES, 1, 0, (1,))
        with pytest.raises(ValidationError, match="duplicate"):
            DyadGraph([d, d])

    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError, match="self-loop"):
            DyadGraph([Dyad("a", "a", ALLIES, 1, 0, (1,))])

    def test_unsorted_endpoints_rejected(self):
        with pytest.raises(ValidationError):
            DyadGraph([Dyad("b", "a", ALLIES, 1, 0, (1,))])


class TestBuildGraph:
    def infobox(self, cid, title, g1, g2):
        def refs(names):
            return tuple(EntityRef(raw_text=n, link_target=n,
                                   resolved_title=n) for n in names)
        return InfoboxMilitaryConflict(
            conflict_title=title, conflict_id=cid,
            combatant_groups=(refs(g1), refs(g2)))

    def test_two_conflicts_aggregate(self):
        g = build_graph([
            self.infobox(1, "War One", ["A", "B"], ["C"]),
            self.infobox(2, "War Two", ["A"], ["B"]),
        ])
        ab = g.edge("A", "B")
        assert ab.label == ENEMIES  # one ally vote, one enemy vote: tie
        assert ab.conflict_ids == (1, 2)
        assert g.edge("A", "C").label == ENEMIES
        assert len(g) == 3

    def test_conflict_from_infobox_drops_duplicate_refs(self):
        box = self.infobox(1, "War", ["A", "A"], ["B"])
        c = conflict_from_infobox(box)
        assert c.belligerents == (frozenset({"A"}), frozenset({"B"}))


class TestGraphStats:
    def test_counts_and_fraction(self):
        g = aggregate([(("a", "b"), ALLIES, 1), (("a", "c"), ENEMIES, 1),
                       (("b", "c"), ENEMIES, 1), (("a", "d"), ALLIES, 2)])
        s = graph_stats(g)
        assert s.node_count == 4
        assert s.edge_count == 4
        assert s.ally_fraction == pytest.approx(0.5)
        assert dict(s.degree_histogram) == {1: 1, 2: 2, 3: 1}

    def test_empty(self):
        s = graph_stats(DyadGraph([]))
        assert (s.node_count, s.edge_count) == (0, 0)


class TestGraphJson:
    def test_round_trip(self, tmp_path):
        g = aggregate([(("a", "b"), ALLIES, 2), (("a", "c"), ENEMIES, 1),
                       (("b", "c"), ALLIES, 1), (("b", "c"), ALLIES, 2)])
        path = tmp_path / "graph.json"
        write_graph_json(path, g)
        g2 = read_graph_json(path)
        assert g2.edges == g.edges
        assert g2.nodes == g.nodes


class TestRestrictedView:
    def make(self):
        g = aggregate([(("a", "b"), ALLIES, 1), (("a", "c"), ENEMIES, 1),
                       (("b", "c"), ALLIES, 2)])
        nf = {n: np.ones(3) * i for i, n in enumerate(g.nodes)}
        ef = {(e.u, e.v): np.ones(2) for e in g.edges}
        return g, restricted_view(g, ("b", "a"), nf, ef)

    def test_hidden_edge_label_masked(self):
        _, view = self.make()
        assert view.excluded_edge == ("a", "b")
        with pytest.raises(MaskedFeatureError):
            view.edge_label("a", "b")
        assert view.edge_label("a", "c") == ENEMIES

    def test_hidden_edge_feature_masked(self):
        _, view = self.make()
        with pytest.raises(MaskedFeatureError):
            view.edge_feature("b", "a")
        assert view.edge_feature("b", "c") is not None

    def test_endpoint_node_features_masked(self):
        _, view = self.make()
        for node in ("a", "b"):
            with pytest.raises(MaskedFeatureError):
                view.node_feature(node)
        assert np.array_equal(view.node_feature("c"), np.ones(3) * 2)

    def test_visible_edges_exclude_target_only(self):
        g, view = self.make()
        vis = [(e.u, e.v) for e in view.visible_edges()]
        assert vis == [("a", "c"), ("b", "c")]
        assert len(list(g.edges)) == 3

    def test_target_must_be_an_edge(self):
        g, _ = self.make()
        with pytest.raises(DataError):
            restricted_view(g, ("a", "z"))
