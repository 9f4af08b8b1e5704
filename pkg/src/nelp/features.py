"""Per-pair feature extraction: user activity profiles, pairwise interaction
and topology features, and signed features over the weighted signed view."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import InteractionData, PositiveNetwork, SignedNetwork, jaccard
from .sampling import SampleSet

SCHEMA_VERSION = "1"

USER_FEATURES = (
    "pos_in_degree",
    "pos_out_degree",
    "pos_triangles",
    "posts_authored",
    "posts_pos_rated",
    "posts_neg_rated",
    "pos_opinions_given",
    "neg_opinions_given",
)
PAIR_FEATURES = (
    "pos_inter_src_dst",
    "neg_inter_src_dst",
    "pos_inter_dst_src",
    "neg_inter_dst_src",
    "pos_in_jaccard",
    "pos_out_jaccard",
    "shortest_path",
)
# Edge configurations for the common-neighbor triad features, in schema order:
# forward/backward is relative to reading the two-hop chain src -> w -> dst.
TRIAD_CONFIGS = ("fp", "fn", "bp", "bn")
SIGN_FEATURES = (
    "src_neg_in_weight",
    "src_neg_out_weight",
    "dst_neg_in_weight",
    "dst_neg_out_weight",
    "neg_in_jaccard",
    "neg_out_jaccard",
) + tuple(f"triad_{a}_{b}" for a in TRIAD_CONFIGS for b in TRIAD_CONFIGS)


@dataclass(frozen=True)
class FeatureSchema:
    version: str
    names: tuple
    groups: tuple

    def __len__(self):
        return len(self.names)


def build_schema() -> FeatureSchema:
    names = (
        tuple(f"src_{n}" for n in USER_FEATURES)
        + tuple(f"dst_{n}" for n in USER_FEATURES)
        + PAIR_FEATURES
        + SIGN_FEATURES
    )
    groups = (
        ("user-src",) * len(USER_FEATURES)
        + ("user-dst",) * len(USER_FEATURES)
        + ("pair",) * len(PAIR_FEATURES)
        + ("sign",) * len(SIGN_FEATURES)
    )
    assert len(names) == 45
    return FeatureSchema(version=SCHEMA_VERSION, names=names, groups=groups)


def signed_view(g_p: PositiveNetwork, samples: SampleSet) -> SignedNetwork:
    """Positive links at weight 1 plus negative-sample edges at their reliability
    weights."""
    return SignedNetwork(
        g_p, [(i, j, samples.weights[(i, j)]) for i, j in samples.ns]
    )


class FeatureExtractor:
    """Shared precomputation for extracting many pairs against one dataset.

    The per-user aggregates are vectorized once; per-pair work is O(degree).
    """

    def __init__(self, g_p: PositiveNetwork, data: InteractionData,
                 view: SignedNetwork | None = None, cap: int = 6):
        self.g_p = g_p
        self.data = data
        self.view = view if view is not None else SignedNetwork(g_p, ())
        self.cap = cap
        self.schema = build_schema()

        m = g_p.m
        self._user = np.zeros((m, len(USER_FEATURES)))
        self._user[:, 0] = [g_p.in_degree(u) for u in range(m)]
        self._user[:, 1] = [g_p.out_degree(u) for u in range(m)]
        self._user[:, 2] = g_p.triangle_counts()
        self._user[:, 3] = data.posts_authored()
        self._user[:, 4] = data.posts_with_feedback(+1)
        self._user[:, 5] = data.posts_with_feedback(-1)
        self._user[:, 6] = data.opinions_given(+1)
        self._user[:, 7] = data.opinions_given(-1)

        self._pos_counts = self._pair_dict(data.interaction_counts(+1))
        self._neg_counts = self._pair_dict(data.interaction_counts(-1))
        self._in_sets = [set(map(int, g_p.in_neighbors(u))) for u in range(m)]
        self._out_sets = [set(map(int, g_p.out_neighbors(u))) for u in range(m)]

    @staticmethod
    def _pair_dict(mat):
        coo = mat.tocoo()
        return {
            (int(r), int(c)): int(v) for r, c, v in zip(coo.row, coo.col, coo.data)
        }

    def user_features(self, u: int) -> np.ndarray:
        return self._user[u].copy()

    def pair_features(self, i: int, j: int) -> np.ndarray:
        if i == j:
            raise ValueError("pair features need two distinct users")
        d = self.g_p.distances_from(i, self.cap, directed=True)[j]
        return np.array(
            [
                self._pos_counts.get((i, j), 0),
                self._neg_counts.get((i, j), 0),
                self._pos_counts.get((j, i), 0),
                self._neg_counts.get((j, i), 0),
                jaccard(self._in_sets[i], self._in_sets[j]),
                jaccard(self._out_sets[i], self._out_sets[j]),
                float(d) if d > 0 else float(self.cap + 1),
            ]
        )

    def _edge_configs(self, a: int, b: int):
        """Configurations of edges between a and b, read in the a -> b sense:
        (f/b for direction, p/n for sign, weight)."""
        out = []
        if self.g_p.has_edge(a, b):
            out.append(("fp", 1.0))
        w = self.view.neg_out[a].get(b)
        if w is not None:
            out.append(("fn", w))
        if self.g_p.has_edge(b, a):
            out.append(("bp", 1.0))
        w = self.view.neg_out[b].get(a)
        if w is not None:
            out.append(("bn", w))
        return out

    def sign_features(self, i: int, j: int) -> np.ndarray:
        if i == j:
            raise ValueError("sign features need two distinct users")
        view = self.view
        out = np.zeros(len(SIGN_FEATURES))
        out[0] = view.weighted_neg_in_degree(i)
        out[1] = view.weighted_neg_out_degree(i)
        out[2] = view.weighted_neg_in_degree(j)
        out[3] = view.weighted_neg_out_degree(j)
        out[4] = jaccard(view.neg_in[i].keys(), view.neg_in[j].keys())
        out[5] = jaccard(view.neg_out[i].keys(), view.neg_out[j].keys())
        common = np.intersect1d(
            view.skeleton_neighbors(i), view.skeleton_neighbors(j), assume_unique=True
        )
        idx = {c: k for k, c in enumerate(TRIAD_CONFIGS)}
        for w in common:
            w = int(w)
            for c1, w1 in self._edge_configs(i, w):
                for c2, w2 in self._edge_configs(w, j):
                    out[6 + 4 * idx[c1] + idx[c2]] += w1 * w2
        return out

    def vector(self, i: int, j: int) -> np.ndarray:
        if not (0 <= i < self.g_p.m and 0 <= j < self.g_p.m):
            raise KeyError(f"unknown user in pair ({i}, {j})")
        return np.concatenate(
            [
                self.user_features(i),
                self.user_features(j),
                self.pair_features(i, j),
                self.sign_features(i, j),
            ]
        )

    def matrix(self, pairs, threads: int = 1) -> np.ndarray:
        pairs = list(pairs)
        # Warm the BFS cache source by source so threads only read it.
        for src in sorted({i for i, _ in pairs}):
            self.g_p.distances_from(src, self.cap, directed=True)
        if threads > 1 and len(pairs) > 512:
            chunks = np.array_split(np.arange(len(pairs)), threads * 4)
            rows = [None] * len(pairs)

            def work(idx):
                for k in idx:
                    rows[k] = self.vector(*pairs[k])

            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, chunks))
            return np.vstack(rows) if rows else np.zeros((0, 45))
        if not pairs:
            return np.zeros((0, 45))
        return np.vstack([self.vector(i, j) for i, j in pairs])


def user_features(u, g_p, data) -> np.ndarray:
    return FeatureExtractor(g_p, data).user_features(u)


def pair_features(i, j, g_p, data, cap: int = 6) -> np.ndarray:
    return FeatureExtractor(g_p, data, cap=cap).pair_features(i, j)


def sign_features(i, j, view: SignedNetwork, data: InteractionData) -> np.ndarray:
    return FeatureExtractor(view.positive, data, view).sign_features(i, j)


def extract(pairs, g_p, data, view=None, cap: int = 6, threads: int = 1):
    """Feature matrix (one 45-dim row per pair) plus the schema describing it."""
    ex = FeatureExtractor(g_p, data, view, cap)
    return ex.matrix(pairs, threads=threads), ex.schema


def standardize(matrix: np.ndarray):
    """Column z-scores with population statistics; zero-variance columns map to
    zeros (divisor 1). Returns (standardized, mean, divisor) for verbatim reuse
    at prediction time."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("standardization needs at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    div = np.where(std == 0.0, 1.0, std)
    return (x - mean) / div, mean, div


def apply_standardization(matrix, mean, div):
    return (np.asarray(matrix, dtype=float) - mean) / div


def write_feature_tsv(path, pairs, matrix, schema: FeatureSchema, names=None):
    """TSV with pair ids and all feature columns; schema version embedded."""
    def label(u):
        return names[u] if names is not None else str(u)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema_version={schema.version}\n")
        fh.write("src\tdst\t" + "\t".join(schema.names) + "\n")
        for (i, j), row in zip(pairs, matrix):
            vals = "\t".join(repr(float(v)) for v in row)
            fh.write(f"{label(i)}\t{label(j)}\t{vals}\n")
