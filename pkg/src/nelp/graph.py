"""Core signed-graph structures: adjacency, BFS distances, triads, balance/status checks.

All graph objects are immutable after construction; concurrent readers are safe.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

log = logging.getLogger(__name__)

UNREACHABLE = None  # sentinel returned by shortest_path_length


class IdMap:
    """Bijection between external string ids and dense integer ids in [0, n)."""

    def __init__(self):
        self._index = {}
        self._names = []

    def intern(self, name: str) -> int:
        """Return the dense id for ``name``, assigning the next free id if new."""
        idx = self._index.get(name)
        if idx is None:
            idx = len(self._names)
            self._index[name] = idx
            self._names.append(name)
        return idx

    def id_of(self, name: str) -> int:
        return self._index[name]

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name) -> bool:
        return name in self._index

    def names(self) -> list[str]:
        return list(self._names)


def _build_adjacency(m, pairs):
    """CSR-style (indptr, indices) with sorted neighbor lists from (src, dst) pairs."""
    if len(pairs) == 0:
        return np.zeros(m + 1, dtype=np.int64), np.zeros(0, dtype=np.int32)
    arr = np.asarray(pairs, dtype=np.int64)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    arr = arr[order]
    counts = np.bincount(arr[:, 0], minlength=m)
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, arr[:, 1].astype(np.int32)


class PositiveNetwork:
    """Directed positive-link graph over ``m`` users.

    Self-loops and duplicate edges are dropped with a warning. Out-, in- and
    undirected adjacency are kept as sorted compressed neighbor lists.
    """

    def __init__(self, m: int, edges: Iterable[tuple[int, int]]):
        self.m = int(m)
        seen = set()
        dropped_loops = 0
        dropped_dups = 0
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise ValueError(f"edge ({i}, {j}) outside user range [0, {self.m})")
            if i == j:
                dropped_loops += 1
                continue
            if (i, j) in seen:
                dropped_dups += 1
                continue
            seen.add((i, j))
        if dropped_loops or dropped_dups:
            log.warning(
                "dropped %d self-loops and %d duplicate positive edges",
                dropped_loops,
                dropped_dups,
            )
        self.edge_set = frozenset(seen)
        pairs = sorted(seen)
        self._out_indptr, self._out_indices = _build_adjacency(self.m, pairs)
        self._in_indptr, self._in_indices = _build_adjacency(
            self.m, [(j, i) for i, j in pairs]
        )
        und = {(min(i, j), max(i, j)) for i, j in seen}
        und_pairs = [(a, b) for a, b in und] + [(b, a) for a, b in und]
        self._und_indptr, self._und_indices = _build_adjacency(self.m, und_pairs)
        self._csr_out = None
        self._csr_und = None
        self._triangles = None
        self._dist_cache = {}

    @property
    def n_edges(self) -> int:
        return len(self.edge_set)

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edge_set

    def positively_linked(self, i: int, j: int) -> bool:
        """True when a positive link exists in either direction."""
        return (i, j) in self.edge_set or (j, i) in self.edge_set

    def out_neighbors(self, i: int) -> np.ndarray:
        return self._out_indices[self._out_indptr[i] : self._out_indptr[i + 1]]

    def in_neighbors(self, i: int) -> np.ndarray:
        return self._in_indices[self._in_indptr[i] : self._in_indptr[i + 1]]

    def und_neighbors(self, i: int) -> np.ndarray:
        return self._und_indices[self._und_indptr[i] : self._und_indptr[i + 1]]

    def out_degree(self, i: int) -> int:
        return int(self._out_indptr[i + 1] - self._out_indptr[i])

    def in_degree(self, i: int) -> int:
        return int(self._in_indptr[i + 1] - self._in_indptr[i])

    def _matrix(self, directed: bool) -> sp.csr_matrix:
        if directed:
            if self._csr_out is None:
                data = np.ones(len(self._out_indices), dtype=np.int8)
                self._csr_out = sp.csr_matrix(
                    (data, self._out_indices, self._out_indptr), shape=(self.m, self.m)
                )
            return self._csr_out
        if self._csr_und is None:
            data = np.ones(len(self._und_indices), dtype=np.int8)
            self._csr_und = sp.csr_matrix(
                (data, self._und_indices, self._und_indptr), shape=(self.m, self.m)
            )
        return self._csr_und

    def distances_from(self, src: int, cap: int, directed: bool = True) -> np.ndarray:
        """BFS hop distances from ``src`` to every node, -1 beyond ``cap`` or unreachable.

        Results are memoized; graphs are immutable so the cache never goes stale.
        """
        key = (src, cap, directed)
        cached = self._dist_cache.get(key)
        if cached is not None:
            return cached
        dist = dijkstra(
            self._matrix(directed=True) if directed else self._matrix(directed=False),
            directed=directed,
            unweighted=True,
            indices=src,
            limit=cap,
        )
        out = np.where(np.isfinite(dist), dist, -1).astype(np.int32)
        self._dist_cache[key] = out
        return out

    def triangle_counts(self) -> np.ndarray:
        """Number of undirected triangles each node participates in."""
        if self._triangles is None:
            a = self._matrix(directed=False)
            common = (a @ a).multiply(a)
            self._triangles = np.asarray(common.sum(axis=1)).ravel() // 2
        return self._triangles


def shortest_path_length(g: PositiveNetwork, src: int, dst: int, cap: int = 6,
                         directed: bool = True):
    """BFS hop distance from src to dst, or None when no path of length <= cap exists.

    The default is directed; pass ``directed=False`` to ignore edge direction.
    """
    if src == dst:
        raise ValueError("source and destination must differ")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    d = g.distances_from(src, cap, directed)[dst]
    return int(d) if d >= 0 else UNREACHABLE


def jaccard(a, b) -> float:
    """|a n b| / |a u b| over id collections; 0.0 when both are empty."""
    sa, sb = set(a), set(b)
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return len(sa & sb) / union


@dataclass(frozen=True)
class TriadEdge:
    src: int
    dst: int
    sign: int  # +1 or -1
    weight: float = 1.0


@dataclass(frozen=True)
class Triad:
    """Three users plus every link present among them.

    Undirected-mode triads carry one synthetic edge per pair (src < dst, the
    collapsed sign); directed-mode triads carry the true directed edges.
    """

    nodes: tuple[int, int, int]
    edges: tuple[TriadEdge, ...]

    def pair_edges(self) -> dict[tuple[int, int], list[TriadEdge]]:
        by_pair = {}
        for e in self.edges:
            key = (min(e.src, e.dst), max(e.src, e.dst))
            by_pair.setdefault(key, []).append(e)
        return by_pair

    def undirected_signs(self) -> tuple[int, int, int]:
        """One sign per pair; raises if a pair is missing or carries mixed signs."""
        by_pair = self.pair_edges()
        a, b, c = self.nodes
        signs = []
        for key in ((min(a, b), max(a, b)), (min(a, c), max(a, c)), (min(b, c), max(b, c))):
            es = by_pair.get(key)
            if not es:
                raise ValueError(f"triad {self.nodes} is missing a sign for pair {key}")
            ss = {e.sign for e in es}
            if len(ss) > 1:
                raise ValueError(f"triad {self.nodes} has conflicting signs on pair {key}")
            signs.append(ss.pop())
        return tuple(signs)


def is_balanced(t: Triad) -> bool:
    """True when the undirected sign multiset is (+,+,+) or (+,-,-)."""
    s1, s2, s3 = t.undirected_signs()
    return s1 * s2 * s3 > 0


def _acyclic(edges) -> bool:
    # Three directed edges, one per pair: acyclic unless they form a 3-cycle.
    outs = {e[0] for e in edges}
    ins = {e[1] for e in edges}
    return not (len(outs) == 3 and len(ins) == 3)


def satisfies_status(t: Triad) -> bool:
    """Status check: reverse and sign-flip each negative edge; the all-positive
    triangle must be acyclic.

    When a pair carries reciprocal edges, every one-edge-per-pair selection must
    pass, so mixed reciprocal evidence counts as a violation.
    """
    by_pair = t.pair_edges()
    a, b, c = t.nodes
    keys = ((min(a, b), max(a, b)), (min(a, c), max(a, c)), (min(b, c), max(b, c)))
    groups = []
    for key in keys:
        es = by_pair.get(key)
        if not es:
            raise ValueError(f"triad {t.nodes} is missing an edge for pair {key}")
        groups.append(es)
    for e1 in groups[0]:
        for e2 in groups[1]:
            for e3 in groups[2]:
                sel = []
                for e in (e1, e2, e3):
                    if e.sign < 0:
                        sel.append((e.dst, e.src))
                    else:
                        sel.append((e.src, e.dst))
                if not _acyclic(sel):
                    return False
    return True


class SignedNetwork:
    """A positive network plus directed, weighted negative edges.

    Negative edges must be disjoint from positive edges on (src, dst) and carry
    weights in [0, 1]. Self-loops and duplicates are dropped with a warning.
    """

    def __init__(self, positive: PositiveNetwork,
                 negative_edges: Iterable[tuple[int, int, float]] = ()):
        self.positive = positive
        self.m = positive.m
        neg = {}
        dropped = 0
        for item in negative_edges:
            i, j, w = (int(item[0]), int(item[1]), float(item[2]))
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise ValueError(f"negative edge ({i}, {j}) outside user range")
            if not (0.0 <= w <= 1.0):
                raise ValueError(f"negative edge weight {w} outside [0, 1]")
            if i == j or (i, j) in neg:
                dropped += 1
                continue
            if positive.has_edge(i, j):
                raise ValueError(
                    f"negative edge ({i}, {j}) collides with a positive edge"
                )
            neg[(i, j)] = w
        if dropped:
            log.warning("dropped %d self-loop/duplicate negative edges", dropped)
        self.neg_weight = neg
        self.neg_out = [dict() for _ in range(self.m)]
        self.neg_in = [dict() for _ in range(self.m)]
        for (i, j), w in neg.items():
            self.neg_out[i][j] = w
            self.neg_in[j][i] = w
        self._pair_info = None
        self._skeleton = None
        self._balance_adj = None
        self.n_conflicts = 0  # pairs excluded from the undirected view

    @property
    def n_negative(self) -> int:
        return len(self.neg_weight)

    def _pairs(self):
        """Per unordered pair: collapsed sign (+1/-1, 0 = conflict) and edge list."""
        if self._pair_info is None:
            info = {}
            for i, j in self.positive.edge_set:
                key = (min(i, j), max(i, j))
                entry = info.setdefault(key, [set(), []])
                entry[0].add(1)
                entry[1].append(TriadEdge(i, j, 1, 1.0))
            for (i, j), w in self.neg_weight.items():
                key = (min(i, j), max(i, j))
                entry = info.setdefault(key, [set(), []])
                entry[0].add(-1)
                entry[1].append(TriadEdge(i, j, -1, w))
            pairs = {}
            conflicts = 0
            for key, (signs, edges) in info.items():
                if len(signs) > 1:
                    sign = 0
                    conflicts += 1
                else:
                    sign = signs.pop()
                pairs[key] = (sign, tuple(edges))
            if conflicts:
                log.warning(
                    "%d reciprocal pairs carry conflicting signs; excluded from the "
                    "undirected view",
                    conflicts,
                )
            self.n_conflicts = conflicts
            self._pair_info = pairs
        return self._pair_info

    def pair_sign(self, i: int, j: int):
        """Collapsed undirected sign for pair {i, j}: +1, -1, 0 (conflict) or None."""
        entry = self._pairs().get((min(i, j), max(i, j)))
        if entry is None:
            return None
        return entry[0]

    def edges_between(self, i: int, j: int) -> tuple[TriadEdge, ...]:
        entry = self._pairs().get((min(i, j), max(i, j)))
        return entry[1] if entry is not None else ()

    def _adjacency(self, balance_only: bool):
        """Sorted neighbor arrays over linked pairs (balance view drops conflicts)."""
        cache = "_balance_adj" if balance_only else "_skeleton"
        if getattr(self, cache) is None:
            pairs = [
                key
                for key, (sign, _) in self._pairs().items()
                if not (balance_only and sign == 0)
            ]
            und = [(a, b) for a, b in pairs] + [(b, a) for a, b in pairs]
            setattr(self, cache, _build_adjacency(self.m, und))
        return getattr(self, cache)

    def skeleton_neighbors(self, i: int) -> np.ndarray:
        indptr, indices = self._adjacency(balance_only=False)
        return indices[indptr[i] : indptr[i + 1]]

    def weighted_neg_in_degree(self, i: int) -> float:
        return float(sum(self.neg_in[i].values()))

    def weighted_neg_out_degree(self, i: int) -> float:
        return float(sum(self.neg_out[i].values()))


def enumerate_triads(g: SignedNetwork, mode: str = "undirected") -> Iterator[Triad]:
    """Yield each closed triple exactly once.

    mode="undirected": reciprocal edges collapse to one signed undirected link,
    pairs with conflicting signs are excluded, and each triad carries canonical
    (min -> max) edges. mode="directed": every present edge is preserved.
    """
    if mode not in ("undirected", "directed"):
        raise ValueError(f"unknown triad mode {mode!r}")
    balance_only = mode == "undirected"
    indptr, indices = g._adjacency(balance_only=balance_only)
    for a in range(g.m):
        nbrs_a = indices[indptr[a] : indptr[a + 1]]
        nbrs_a = nbrs_a[nbrs_a > a]
        for b in nbrs_a:
            nbrs_b = indices[indptr[b] : indptr[b + 1]]
            common = np.intersect1d(nbrs_a, nbrs_b[nbrs_b > b], assume_unique=True)
            for c in common:
                nodes = (int(a), int(b), int(c))
                if balance_only:
                    edges = tuple(
                        TriadEdge(x, y, g.pair_sign(x, y), 1.0)
                        for x, y in ((a, b), (a, int(c)), (b, int(c)))
                    )
                else:
                    edges = (
                        g.edges_between(a, b)
                        + g.edges_between(a, int(c))
                        + g.edges_between(b, int(c))
                    )
                yield Triad(nodes=nodes, edges=edges)


@dataclass(frozen=True)
class NegativeInteractionMatrix:
    """Counts of negative content-centric interactions between ordered user pairs."""

    mat: sp.csr_matrix  # m x m, nonnegative integers

    @property
    def m(self) -> int:
        return self.mat.shape[0]

    def count(self, i: int, j: int) -> int:
        return int(self.mat[i, j])

    def pairs(self) -> Iterator[tuple[int, int, int]]:
        """Yield (i, j, count) for every nonzero entry, in row-major order."""
        coo = self.mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            yield int(r), int(c), int(v)

    def nonzero_pairs(self) -> set[tuple[int, int]]:
        coo = self.mat.tocoo()
        return {(int(r), int(c)) for r, c in zip(coo.row, coo.col)}


class InteractionData:
    """Authorship (one author per post) and opinion relations over users x posts."""

    def __init__(self, m: int, post_author: Sequence[int], opinions: sp.spmatrix):
        self.m = int(m)
        self.post_author = np.asarray(post_author, dtype=np.int64)
        self.n_posts = len(self.post_author)
        if self.n_posts and (
            self.post_author.min() < 0 or self.post_author.max() >= self.m
        ):
            raise ValueError("post author outside user range")
        o = sp.csr_matrix(opinions, shape=(self.m, self.n_posts), dtype=np.int64)
        o.eliminate_zeros()
        if o.nnz and not np.isin(o.data, (-1, 1)).all():
            raise ValueError("opinion values must be in {-1, 0, +1}")
        self.opinions = o
        self._authorship = None
        self._counts = {}

    @property
    def authorship(self) -> sp.csr_matrix:
        """0/1 user-by-post authorship matrix (exactly one nonzero per column)."""
        if self._authorship is None:
            data = np.ones(self.n_posts, dtype=np.int64)
            cols = np.arange(self.n_posts)
            self._authorship = sp.csr_matrix(
                (data, (self.post_author, cols)), shape=(self.m, self.n_posts)
            )
        return self._authorship

    def posts_of(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.post_author == u)

    def posts_authored(self) -> np.ndarray:
        return np.bincount(self.post_author, minlength=self.m)

    def opinions_given(self, sign: int) -> np.ndarray:
        """Per-user count of +1 or -1 opinions expressed."""
        part = self._signed_part(sign)
        return np.asarray((part != 0).sum(axis=1)).ravel()

    def posts_with_feedback(self, sign: int) -> np.ndarray:
        """Per-user count of authored posts that received >= 1 opinion of ``sign``."""
        part = self._signed_part(sign)
        flagged = np.asarray((part != 0).sum(axis=0)).ravel() > 0
        counts = np.zeros(self.m, dtype=np.int64)
        np.add.at(counts, self.post_author[flagged], 1)
        return counts

    def _signed_part(self, sign: int) -> sp.csr_matrix:
        if sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        key = ("part", sign)
        if key not in self._counts:
            o = self.opinions
            if sign > 0:
                part = (o + abs(o)) / 2
            else:
                part = (o - abs(o)) / 2
            part = sp.csr_matrix(part, dtype=np.int64)
            part.eliminate_zeros()
            self._counts[key] = part
        return self._counts[key]

    def interaction_counts(self, sign: int) -> sp.csr_matrix:
        """User-by-user counts: entry (i, j) = opinions of ``sign`` that u_i
        expressed on posts authored by u_j."""
        key = ("pairs", sign)
        if key not in self._counts:
            part = self._signed_part(sign)
            mat = abs(part) @ self.authorship.T
            self._counts[key] = sp.csr_matrix(mat, dtype=np.int64)
        return self._counts[key]


def compute_negative_interactions(data: InteractionData,
                                  transpose: bool = False) -> NegativeInteractionMatrix:
    """Negative-interaction counts N with N[i, j] = number of u_i's negative
    opinions on posts authored by u_j.

    ``transpose=True`` flips the orientation so N[i, j] counts negative opinions
    u_i received from u_j.
    """
    mat = data.interaction_counts(-1)
    if transpose:
        mat = sp.csr_matrix(mat.T)
    return NegativeInteractionMatrix(mat=mat)
