import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpcc.graph import (
    COMPLETE,
    Clustering,
    GraphError,
    SignedGraph,
    agreement,
    combine_signed,
    cut_distance_exact,
    cut_distance_lower_bound,
    cut_weight,
    disagreement,
    disagreement_many,
    generate_planted,
    neighbor_distance,
    parse_clustering,
    parse_edge_list,
    random_signed_graph,
    serialize_clustering,
    serialize_edge_list,
    split_signed,
)

from dpcc.dp import make_rng

from _oracles import cut_distance_enum, cut_weight_loop, dis_by_edges, subsets


def k3_positive():
    return SignedGraph.complete(np.ones((3, 3), dtype=bool))


@st.composite
def graphs(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    density = draw(st.sampled_from([0.3, 0.7, 1.0]))
    return random_signed_graph(n, np.random.default_rng(seed), density=density)


class TestTypes:
    def test_self_loop_rejected(self):
        present = np.eye(2, dtype=bool)
        with pytest.raises(GraphError, match="self-loop"):
            SignedGraph(2, present, np.ones((2, 2)), np.ones((2, 2)))

    def test_negative_weight_rejected(self):
        with pytest.raises(GraphError):
            SignedGraph.from_edges(2, [(0, 1, 1, -0.5)])

    def test_complete_mode_needs_unit_weights(self):
        present = ~np.eye(3, dtype=bool)
        with pytest.raises(GraphError):
            SignedGraph(3, present, np.ones((3, 3)), present * 2.0, mode=COMPLETE)

    def test_graph_is_immutable(self):
        g = k3_positive()
        with pytest.raises(ValueError):
            g.weight[0, 1] = 5

    def test_total_weight(self):
        assert k3_positive().total_weight == 3

    def test_clustering_canonical(self):
        assert Clustering([7, 7, 2, 9]) == Clustering([0, 0, 1, 2])
        assert Clustering([5, 3, 5]).labels.tolist() == [0, 1, 0]

    def test_clustering_from_clusters_requires_partition(self):
        with pytest.raises(GraphError):
            Clustering.from_clusters([[0, 1], [1, 2]], 3)
        with pytest.raises(GraphError):
            Clustering.from_clusters([[0]], 2)

    def test_singleton_set(self):
        c = Clustering.from_clusters([[0, 2], [1], [3]])
        assert c.singleton_set == {1, 3}
        assert c.clusters == [[0, 2], [1], [3]]


class TestDisagreement:
    def test_k3_single_cluster(self):
        assert disagreement(Clustering.single(3), k3_positive()) == 0

    def test_k3_singletons(self):
        assert disagreement(Clustering.singletons(3), k3_positive()) == 3

    def test_node_count_mismatch(self):
        with pytest.raises(GraphError):
            disagreement(Clustering.single(4), k3_positive())

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_edge_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        g = random_signed_graph(7, rng, density=0.8)
        labels = rng.integers(0, 3, size=7)
        assert disagreement(Clustering(labels), g) == pytest.approx(dis_by_edges(labels, g))

    @given(graphs(), st.data())
    @settings(max_examples=60, deadline=None)
    def test_relabel_invariance_and_bounds(self, g, data):
        labels = np.array(data.draw(st.lists(st.integers(0, 3), min_size=g.n, max_size=g.n)))
        perm = np.array(data.draw(st.permutations(range(4))))
        d = disagreement(Clustering(labels), g)
        assert d == disagreement(Clustering(perm[labels]), g)
        assert 0 <= d <= g.total_weight + 1e-9

    def test_disagreement_many_matches_single(self):
        rng = np.random.default_rng(3)
        g = random_signed_graph(8, rng)
        labels = rng.integers(0, 4, size=(50, 8))
        many = disagreement_many(labels, g)
        single = [disagreement(Clustering(row), g) for row in labels]
        np.testing.assert_allclose(many, single)

    def test_complete_agreement_identity(self):
        g, _ = generate_planted(12, [5, 7], 0.3, 4)
        rng = np.random.default_rng(0)
        for _ in range(20):
            c = Clustering(rng.integers(0, 4, size=12))
            assert disagreement(c, g) + agreement(c, g) == math.comb(12, 2)


class TestNeighborDistance:
    def test_identical(self):
        g = random_signed_graph(5, np.random.default_rng(1))
        assert neighbor_distance(g, g) == 0

    def test_sign_flip_is_two(self):
        g = SignedGraph.from_edges(3, [(0, 1, 1, 1.0)])
        h = SignedGraph.from_edges(3, [(0, 1, -1, 1.0)])
        assert neighbor_distance(g, h) == 2

    def test_weight_change(self):
        g = SignedGraph.from_edges(3, [(0, 1, 1, 0.7)])
        h = SignedGraph.from_edges(3, [(0, 1, 1, 0.2)])
        assert neighbor_distance(g, h) == pytest.approx(0.5)

    def test_mismatch(self):
        with pytest.raises(GraphError):
            neighbor_distance(k3_positive(), SignedGraph.from_edges(4, []))


class TestCuts:
    def test_empty_sets(self):
        g = random_signed_graph(5, np.random.default_rng(2))
        assert cut_weight(g, [], [0, 1]) == 0
        assert cut_weight(g, [1], []) == 0

    def test_single_edge(self):
        g = SignedGraph.from_edges(3, [(0, 1, 1, 1.0)])
        assert cut_weight(g, [0], [1]) == 1

    def test_overlap_counts_twice(self):
        g = SignedGraph.from_edges(3, [(0, 1, 1, 1.0)])
        assert cut_weight(g, [0, 1], [0, 1]) == 2

    def test_out_of_range(self):
        with pytest.raises(GraphError):
            cut_weight(k3_positive(), [5], [0])

    @pytest.mark.parametrize("seed", range(10))
    def test_cut_weight_matches_double_loop(self, seed):
        rng = np.random.default_rng(seed)
        g = random_signed_graph(6, rng, density=0.7)
        s = [u for u in range(6) if rng.random() < 0.5]
        t = [u for u in range(6) if rng.random() < 0.5]
        assert cut_weight(g, s, t) == pytest.approx(cut_weight_loop(g, s, t))

    def test_exact_identical_is_zero(self):
        g = random_signed_graph(6, np.random.default_rng(0))
        assert cut_distance_exact(g, g) == 0

    def test_exact_one_extra_edge(self):
        g = SignedGraph.from_edges(5, [(0, 2, 1, 1.0)])
        h = SignedGraph.from_edges(5, [(0, 2, 1, 1.0), (1, 3, 1, 1.0)])
        # disjoint witness sees the edge once; S = T = {1, 3} sees it twice
        assert abs(cut_weight(g, [1], [3]) - cut_weight(h, [1], [3])) == 1
        assert abs(cut_weight(g, [1, 3], [1, 3]) - cut_weight(h, [1, 3], [1, 3])) == 2
        assert cut_distance_exact(g, h) == 2

    @pytest.mark.parametrize("seed", range(6))
    def test_exact_matches_full_enumeration(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = 5 if seed % 2 else 6
        g, h = random_signed_graph(n, rng), random_signed_graph(n, rng, density=0.5)
        assert cut_distance_exact(g, h) == pytest.approx(cut_distance_enum(g, h))

    def test_exact_limit(self):
        g = SignedGraph.from_edges(13, [])
        with pytest.raises(GraphError):
            cut_distance_exact(g, g)
        assert cut_distance_exact(g, g, limit=13) == 0

    def test_pseudometric(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            a, b, c = (random_signed_graph(7, rng, density=0.6) for _ in range(3))
            ab, ba = cut_distance_exact(a, b), cut_distance_exact(b, a)
            assert ab == pytest.approx(ba)
            assert ab <= cut_distance_exact(a, c) + cut_distance_exact(c, b) + 1e-9

    def test_lower_bound_identical(self):
        g = random_signed_graph(9, np.random.default_rng(1))
        assert cut_distance_lower_bound(g, g, rng_seed=3) == 0

    def test_lower_bound_deterministic(self):
        rng = np.random.default_rng(4)
        g, h = random_signed_graph(20, rng), random_signed_graph(20, rng)
        assert cut_distance_lower_bound(g, h, 5, 11) == cut_distance_lower_bound(g, h, 5, 11)

    def test_lower_bound_quality_suite(self):
        rng = np.random.default_rng(2024)
        ratios = []
        for i in range(100):
            n = int(rng.integers(4, 11))
            g = random_signed_graph(n, rng, density=rng.choice([0.4, 1.0]))
            h = random_signed_graph(n, rng, density=rng.choice([0.4, 1.0]))
            exact = cut_distance_exact(g, h)
            lb = cut_distance_lower_bound(g, h, restarts=5, rng_seed=i)
            assert lb <= exact + 1e-9
            ratios.append(lb / exact if exact else 1.0)
        assert min(ratios) >= 0.5


class TestSplit:
    def test_all_positive(self):
        g = k3_positive()
        gp, gn = split_signed(g)
        assert np.array_equal(gp.weight, g.weight)
        assert gn.total_weight == 0

    def test_positive_edge_goes_to_positive_side(self):
        g = SignedGraph.from_edges(3, [(0, 1, 1, 0.4), (1, 2, -1, 0.9)])
        gp, gn = split_signed(g)
        assert gp.weight[0, 1] == 0.4 and gn.weight[0, 1] == 0
        assert gn.weight[1, 2] == 0.9 and gp.weight[1, 2] == 0

    @given(graphs())
    @settings(max_examples=40, deadline=None)
    def test_parts_disjoint_and_recombine(self, g):
        gp, gn = split_signed(g)
        assert not (gp.weight * gn.weight).any()
        assert combine_signed(gp, gn) == g


class TestPlanted:
    def test_noiseless_truth_is_perfect(self):
        g, truth = generate_planted(10, [5, 5], 0.0, 1)
        assert disagreement(truth, g) == 0
        assert g.sign[0, 5] == -1
        assert g.sign[0, 4] == 1

    def test_size_mismatch(self):
        with pytest.raises(GraphError):
            generate_planted(10, [5, 4], 0.0, 1)

    def test_flip_count_binomial(self):
        g, truth = generate_planted(100, [50, 50], 0.1, 5)
        flips = disagreement(truth, g)
        m = math.comb(100, 2)
        assert abs(flips - 0.1 * m) <= 4 * math.sqrt(m * 0.1 * 0.9)

    def test_reproducible(self):
        assert generate_planted(30, [10, 20], 0.2, 9) == generate_planted(30, [10, 20], 0.2, 9)


class TestEdgeList:
    def test_parse_simple(self):
        g = parse_edge_list("n=3 mode=general\n0 1 + 1.0\n")
        assert g.n == 3 and g.edges() == [(0, 1, 1, 1.0)]

    def test_empty_edges(self):
        g = parse_edge_list("n=4 mode=general\n# nothing\n")
        assert g.edges() == []

    @pytest.mark.parametrize("text, match", [
        ("n=3 mode=general\n0 0 + 1.0\n", "line 2: self-loop"),
        ("n=3 mode=general\n0 1 + -1\n", "line 2: weight"),
        ("n=3 mode=general\n0 1 + 1\n1 0 - 2\n", "line 3: duplicate"),
        ("n=3 mode=general\n0 1 +\n", "line 2"),
        ("n=3 mode=complete\n0 1 + 1\n", "line 2: complete"),
        ("0 1 + 1\n", "line 1: bad header"),
        ("", "missing"),
    ])
    def test_errors(self, text, match):
        with pytest.raises(GraphError, match=match):
            parse_edge_list(text)

    def test_complete_defaults_positive(self):
        g = parse_edge_list("n=3 mode=complete\n0 2 - 1  # only negatives listed\n")
        assert g.sign[0, 1] == 1 and g.sign[0, 2] == -1 and g.mode == COMPLETE

    @given(graphs(max_n=9))
    @settings(max_examples=40, deadline=None)
    def test_round_trip_general(self, g):
        assert parse_edge_list(serialize_edge_list(g)) == g

    def test_round_trip_complete(self):
        g, _ = generate_planted(15, [5, 10], 0.2, 2)
        assert parse_edge_list(serialize_edge_list(g)) == g

    def test_clustering_round_trip(self):
        c = Clustering([0, 1, 0, 2, 1])
        assert parse_clustering(serialize_clustering(c), 5) == c


class TestSignedCut:
    @pytest.mark.parametrize("seed", range(4))
    def test_signed_exact_matches_enumeration(self, seed):
        rng = make_rng(seed)
        g = random_signed_graph(5, rng, density=0.8, weighted=True)
        h = random_signed_graph(5, rng, density=0.8, weighted=True)
        best = 0.0
        subs = list(subsets(5))
        for s in subs:
            for t in subs:
                diff = sum(g.signed[u, v] - h.signed[u, v] for u in s for v in t if u != v)
                best = max(best, abs(diff))
        assert cut_distance_exact(g, h, signed=True) == pytest.approx(best)
        assert cut_distance_lower_bound(g, h, signed=True) <= best + 1e-9

    def test_sign_flip_only_visible_when_signed(self):
        a = SignedGraph.from_edges(3, [(0, 1, 1, 1.0)], mode="general")
        b = SignedGraph.from_edges(3, [(0, 1, -1, 1.0)], mode="general")
        assert cut_distance_exact(a, b) == 0
        assert cut_distance_exact(a, b, signed=True) == 4
