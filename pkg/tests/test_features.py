import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from nelp.features import (
    FeatureExtractor,
    TRIAD_CONFIGS,
    apply_standardization,
    build_schema,
    extract,
    signed_view,
    standardize,
)
from nelp.graph import InteractionData, PositiveNetwork, SignedNetwork, jaccard
from nelp.sampling import SampleSet

from helpers import random_digraph, random_interactions


def _empty_interactions(m):
    return InteractionData(m, [], sp.csr_matrix((m, 0), dtype=np.int64))


def _rich_instance():
    # User 0 sits in one all-positive triangle {0,1,2}, authors posts p0, p1;
    # p1 is disliked by user 3; user 0 likes p2 (by 1) and dislikes p3 (by 2).
    g = PositiveNetwork(4, [(0, 1), (1, 2), (2, 0)])
    post_author = [0, 0, 1, 2]
    o = np.zeros((4, 4), dtype=np.int64)
    o[3, 1] = -1
    o[0, 2] = 1
    o[0, 3] = -1
    data = InteractionData(4, post_author, sp.csr_matrix(o))
    return g, data


class TestSchema:
    def test_exactly_45_named_features(self):
        schema = build_schema()
        assert len(schema) == 45
        assert len(set(schema.names)) == 45
        assert schema.groups.count("user-src") == 8
        assert schema.groups.count("user-dst") == 8
        assert schema.groups.count("pair") == 7
        assert schema.groups.count("sign") == 22

    def test_triad_block_order_is_lexicographic(self):
        schema = build_schema()
        triads = [n for n in schema.names if n.startswith("triad_")]
        expected = [f"triad_{a}_{b}" for a in TRIAD_CONFIGS for b in TRIAD_CONFIGS]
        assert triads == expected


class TestUserFeatures:
    def test_isolated_user_is_all_zeros(self):
        g = PositiveNetwork(3, [(1, 2)])
        ex = FeatureExtractor(g, _empty_interactions(3))
        assert ex.user_features(0).tolist() == [0] * 8

    def test_rich_instance(self):
        g, data = _rich_instance()
        ex = FeatureExtractor(g, data)
        got = ex.user_features(0)
        # in-deg, out-deg, triangles, authored, pos-rated, neg-rated,
        # pos-given, neg-given
        assert got.tolist() == [1, 1, 1, 2, 0, 1, 1, 1]

    def test_matches_recount_oracle(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            g = random_digraph(rng, n=12, p=0.2)
            data = random_interactions(rng, m=12, n_posts=20)
            ex = FeatureExtractor(g, data)
            dense = data.opinions.toarray()
            for u in range(12):
                authored = [p for p in range(20) if data.post_author[p] == u]
                tri = 0
                und = [set(map(int, g.und_neighbors(x))) for x in range(12)]
                for a in und[u]:
                    for b in und[u]:
                        if a < b and b in und[a]:
                            tri += 1
                want = [
                    g.in_degree(u),
                    g.out_degree(u),
                    tri,
                    len(authored),
                    sum(1 for p in authored if (dense[:, p] == 1).any()),
                    sum(1 for p in authored if (dense[:, p] == -1).any()),
                    int((dense[u] == 1).sum()),
                    int((dense[u] == -1).sum()),
                ]
                assert ex.user_features(u).tolist() == want


class TestPairFeatures:
    def test_strangers(self):
        g = PositiveNetwork(4, [(0, 1), (2, 3)])
        ex = FeatureExtractor(g, _empty_interactions(4), cap=6)
        got = ex.pair_features(0, 2)
        assert got.tolist() == [0, 0, 0, 0, 0, 0, 7]

    def test_interaction_counts(self):
        # 0 liked two of 1's posts and disliked one.
        post_author = [1, 1, 1]
        o = np.array([[1, 1, -1], [0, 0, 0]])
        data = InteractionData(2, post_author, sp.csr_matrix(o))
        g = PositiveNetwork(2, [])
        got = FeatureExtractor(g, data).pair_features(0, 1)
        assert got[0] == 2 and got[1] == 1 and got[2] == 0 and got[3] == 0

    def test_matches_recount_oracle(self):
        rng = np.random.default_rng(91)
        g = random_digraph(rng, n=10, p=0.25)
        data = random_interactions(rng, m=10, n_posts=15)
        ex = FeatureExtractor(g, data, cap=6)
        dense = data.opinions.toarray()
        for i in range(10):
            for j in range(10):
                if i == j:
                    continue
                got = ex.pair_features(i, j)
                pos_ij = sum(1 for p in range(15)
                             if data.post_author[p] == j and dense[i, p] == 1)
                neg_ij = sum(1 for p in range(15)
                             if data.post_author[p] == j and dense[i, p] == -1)
                pos_ji = sum(1 for p in range(15)
                             if data.post_author[p] == i and dense[j, p] == 1)
                neg_ji = sum(1 for p in range(15)
                             if data.post_author[p] == i and dense[j, p] == -1)
                assert got[:4].tolist() == [pos_ij, neg_ij, pos_ji, neg_ji]
                assert got[4] == jaccard(set(map(int, g.in_neighbors(i))),
                                         set(map(int, g.in_neighbors(j))))
                assert got[5] == jaccard(set(map(int, g.out_neighbors(i))),
                                         set(map(int, g.out_neighbors(j))))


class TestSignFeatures:
    def test_no_negatives_no_common_neighbors(self):
        g = PositiveNetwork(4, [(0, 1)])
        ex = FeatureExtractor(g, _empty_interactions(4))
        assert ex.sign_features(2, 3).tolist() == [0.0] * 22

    def test_single_weighted_two_path(self):
        # i=0 -> w=2 positive, w=2 -> j=1 negative with weight 0.5.
        g = PositiveNetwork(3, [(0, 2)])
        view = SignedNetwork(g, [(2, 1, 0.5)])
        ex = FeatureExtractor(g, _empty_interactions(3), view)
        got = ex.sign_features(0, 1)
        schema = build_schema()
        offset = len(schema.names) - 22
        nonzero = {schema.names[offset + k]: v for k, v in enumerate(got) if v != 0}
        assert nonzero == {"dst_neg_in_weight": 0.5, "triad_fp_fn": 0.5}

    def test_matches_exhaustive_common_neighbor_oracle(self):
        rng = np.random.default_rng(55)
        for _ in range(10):
            g = random_digraph(rng, n=12, p=0.2)
            neg = []
            for i in range(12):
                for j in range(12):
                    if i != j and not g.has_edge(i, j) and rng.random() < 0.1:
                        neg.append((i, j, float(rng.uniform(0.1, 1.0))))
            view = SignedNetwork(g, neg)
            ex = FeatureExtractor(g, _empty_interactions(12), view)
            wmap = view.neg_weight
            for i in range(12):
                for j in range(12):
                    if i == j:
                        continue
                    got = ex.sign_features(i, j)[6:]
                    want = np.zeros(16)
                    for w in range(12):
                        if w in (i, j):
                            continue
                        first, second = [], []
                        if g.has_edge(i, w):
                            first.append(("fp", 1.0))
                        if (i, w) in wmap:
                            first.append(("fn", wmap[(i, w)]))
                        if g.has_edge(w, i):
                            first.append(("bp", 1.0))
                        if (w, i) in wmap:
                            first.append(("bn", wmap[(w, i)]))
                        if g.has_edge(w, j):
                            second.append(("fp", 1.0))
                        if (w, j) in wmap:
                            second.append(("fn", wmap[(w, j)]))
                        if g.has_edge(j, w):
                            second.append(("bp", 1.0))
                        if (j, w) in wmap:
                            second.append(("bn", wmap[(j, w)]))
                        if not first or not second:
                            continue
                        for c1, w1 in first:
                            for c2, w2 in second:
                                idx = TRIAD_CONFIGS.index(c1) * 4 + TRIAD_CONFIGS.index(c2)
                                want[idx] += w1 * w2
                    assert np.allclose(got, want)

    def test_unit_weights_reduce_to_counts(self):
        rng = np.random.default_rng(66)
        g = random_digraph(rng, n=10, p=0.25)
        neg = [(i, j, 1.0) for i in range(10) for j in range(10)
               if i != j and not g.has_edge(i, j) and rng.random() < 0.15]
        view = SignedNetwork(g, neg)
        ex = FeatureExtractor(g, _empty_interactions(10), view)
        feats = ex.sign_features(0, 5)[6:]
        assert np.allclose(feats, np.round(feats))

    def test_weighted_degrees_monotone_in_edge_weight(self):
        g = PositiveNetwork(3, [])
        lo = FeatureExtractor(g, _empty_interactions(3), SignedNetwork(g, [(0, 1, 0.2)]))
        hi = FeatureExtractor(g, _empty_interactions(3), SignedNetwork(g, [(0, 1, 0.9)]))
        assert (hi.sign_features(0, 1)[:4] >= lo.sign_features(0, 1)[:4]).all()


class TestExtract:
    def test_vector_length_45(self):
        g, data = _rich_instance()
        matrix, schema = extract([(0, 3)], g, data)
        assert matrix.shape == (1, 45)
        assert len(schema) == 45

    def test_swapped_pair_blocks(self):
        g, data = _rich_instance()
        view = SignedNetwork(g, [(3, 1, 0.5)])
        ex = FeatureExtractor(g, data, view)
        fwd = ex.vector(0, 3)
        rev = ex.vector(3, 0)
        assert np.allclose(fwd[:8], rev[8:16])
        assert np.allclose(fwd[8:16], rev[:8])
        # Directed interaction counts swap pairwise.
        assert fwd[16] == rev[18] and fwd[17] == rev[19]
        assert fwd[18] == rev[16] and fwd[19] == rev[17]
        # Jaccard features are symmetric.
        assert fwd[20] == rev[20] and fwd[21] == rev[21]
        # Weighted negative degrees swap.
        assert fwd[23] == rev[25] and fwd[24] == rev[26]
        # Triad features map via direction flip and block transpose.
        flip = {0: 2, 1: 3, 2: 0, 3: 1}  # fp<->bp, fn<->bn
        for a in range(4):
            for b in range(4):
                assert fwd[29 + 4 * a + b] == pytest.approx(
                    rev[29 + 4 * flip[b] + flip[a]]
                )

    def test_unknown_user_rejected(self):
        g, data = _rich_instance()
        ex = FeatureExtractor(g, data)
        with pytest.raises(KeyError):
            ex.vector(0, 99)

    def test_matrix_equals_stacked_ops(self):
        rng = np.random.default_rng(10)
        g = random_digraph(rng, n=20, p=0.15)
        data = random_interactions(rng, m=20, n_posts=30)
        neg = [(i, j, 0.7) for i in range(20) for j in range(20)
               if i != j and not g.has_edge(i, j) and rng.random() < 0.05]
        view = SignedNetwork(g, neg)
        ex = FeatureExtractor(g, data, view)
        pairs = [(i, j) for i in range(20) for j in range(20) if i != j][:120]
        matrix = ex.matrix(pairs)
        for k, (i, j) in enumerate(pairs):
            row = np.concatenate([
                ex.user_features(i), ex.user_features(j),
                ex.pair_features(i, j), ex.sign_features(i, j),
            ])
            assert np.array_equal(matrix[k], row)

    def test_threaded_matches_serial(self):
        rng = np.random.default_rng(12)
        g = random_digraph(rng, n=25, p=0.15)
        data = random_interactions(rng, m=25, n_posts=30)
        ex = FeatureExtractor(g, data)
        pairs = [(i, j) for i in range(25) for j in range(25) if i != j]
        assert np.array_equal(ex.matrix(pairs, threads=4), ex.matrix(pairs, threads=1))

    def test_deterministic(self):
        g, data = _rich_instance()
        a, _ = extract([(0, 3), (1, 2)], g, data)
        b, _ = extract([(0, 3), (1, 2)], g, data)
        assert np.array_equal(a, b)

    def test_count_features_are_nonnegative_integers(self):
        rng = np.random.default_rng(77)
        g = random_digraph(rng, n=15, p=0.2)
        data = random_interactions(rng, m=15, n_posts=25)
        matrix, schema = extract([(0, 1), (3, 4), (7, 2)], g, data)
        count_cols = [k for k, n in enumerate(schema.names)
                      if "jaccard" not in n and "weight" not in n and "triad" not in n]
        counts = matrix[:, count_cols]
        assert (counts >= 0).all()
        assert np.allclose(counts, np.round(counts))


class TestStandardize:
    def test_constant_column_zeroed(self):
        x = np.array([[1.0, 5.0], [1.0, 7.0]])
        xs, mean, div = standardize(x)
        assert np.allclose(xs[:, 0], 0.0)
        assert div[0] == 1.0

    def test_two_point_column(self):
        xs, _, _ = standardize(np.array([[0.0], [2.0]]))
        assert xs.ravel().tolist() == [-1.0, 1.0]

    def test_population_moments(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(200, 6)) * 3 + 1
        xs, mean, div = standardize(x)
        assert np.allclose(xs.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(xs.std(axis=0), 1.0, atol=1e-9)

    def test_reuse_at_prediction_time(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(50, 4))
        xs, mean, div = standardize(x)
        assert np.allclose(apply_standardization(x, mean, div), xs)

    def test_single_row_rejected(self):
        with pytest.raises(ValueError):
            standardize(np.ones((1, 3)))
