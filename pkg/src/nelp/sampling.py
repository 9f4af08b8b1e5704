"""Training-label construction: negative samples from interaction evidence
refined by status-theory triad checks, reliability weights, and the positive
(missing-link) sample pool."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    NegativeInteractionMatrix,
    PositiveNetwork,
    SignedNetwork,
    Triad,
    TriadEdge,
    satisfies_status,
)

log = logging.getLogger(__name__)

INTERACTION = "interaction"
CLOSURE = "closure"


@dataclass
class SamplingConfig:
    r: float = 0.5            # weight for closure-added pairs
    ratio: float = 10.0       # positive-to-negative sample ratio
    seed: int = 7
    weight_fn: str = "log"    # "log" or "uniform"

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("r must lie in [0, 1]")
        if self.ratio < 1.0:
            raise ValueError("ratio must be >= 1")
        if self.weight_fn not in ("log", "uniform"):
            raise ValueError(f"unknown weight function {self.weight_fn!r}")


@dataclass
class SampleSet:
    """Positive (missing-link) and negative (inferred-enemy) ordered pairs with
    reliability weights and a provenance tag per negative pair."""

    ps: list = field(default_factory=list)
    ns: list = field(default_factory=list)
    weights: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def validate(self, nmat: NegativeInteractionMatrix | None = None, r: float | None = None):
        if set(self.ps) & set(self.ns):
            raise ValueError("PS and NS overlap")
        for pair in self.ns:
            if pair not in self.weights or pair not in self.provenance:
                raise ValueError(f"negative sample {pair} lacks weight or provenance")
            if not 0.0 <= self.weights[pair] <= 1.0:
                raise ValueError(f"weight for {pair} outside [0, 1]")
            if nmat is not None and self.provenance[pair] == INTERACTION:
                if nmat.count(*pair) == 0:
                    raise ValueError(f"{pair} tagged interaction-derived but N is 0")
            if r is not None and self.provenance[pair] == CLOSURE:
                if self.weights[pair] != r:
                    raise ValueError(f"closure pair {pair} must have weight {r}")

    def rows(self):
        """(src, dst, label, weight, provenance) rows, negatives first, sorted."""
        out = []
        for i, j in sorted(self.ns):
            out.append((i, j, -1, self.weights[(i, j)], self.provenance[(i, j)]))
        for i, j in sorted(self.ps):
            out.append((i, j, 1, 1.0, "missing"))
        return out

    def write_tsv(self, path, names=None):
        def label(u):
            return names[u] if names is not None else str(u)

        with open(path, "w", encoding="utf-8") as fh:
            fh.write("src\tdst\tlabel\tweight\tprovenance\n")
            for i, j, y, w, tag in self.rows():
                fh.write(f"{label(i)}\t{label(j)}\t{y:+d}\t{w!r}\t{tag}\n")


def read_sample_tsv(path, id_of=None):
    """Inverse of SampleSet.write_tsv; ``id_of`` maps names back to dense ids."""
    out = SampleSet()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("src\t"):
            raise ValueError(f"{path}: missing sample header")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 columns")
            src, dst, y, w, tag = parts
            i = id_of(src) if id_of else int(src)
            j = id_of(dst) if id_of else int(dst)
            if int(y) == -1:
                out.ns.append((i, j))
                out.weights[(i, j)] = float(w)
                out.provenance[(i, j)] = tag
            else:
                out.ps.append((i, j))
    return out


def reliability_weight(n_ij: int, cfg: SamplingConfig) -> float:
    """Confidence in a negative sample: a clamped 1 - 1/log2(1 + n) of the
    interaction count when interactions exist, the constant r otherwise."""
    if n_ij < 0:
        raise ValueError("interaction count must be nonnegative")
    if n_ij == 0:
        return cfg.r
    if cfg.weight_fn == "uniform":
        return 1.0
    return min(1.0, max(0.0, 1.0 - 1.0 / math.log2(1.0 + n_ij)))


def _pair_triads(signed: SignedNetwork, i: int, j: int):
    """Triads whose three nodes include the linked pair {i, j}."""
    common = np.intersect1d(
        signed.skeleton_neighbors(i), signed.skeleton_neighbors(j), assume_unique=True
    )
    for w in common:
        w = int(w)
        yield Triad(
            nodes=(i, j, w),
            edges=signed.edges_between(i, j)
            + signed.edges_between(i, w)
            + signed.edges_between(j, w),
        )


def _closure_candidates(signed: SignedNetwork):
    """Unlinked pairs that would close an open triad containing a negative edge."""
    cand = set()
    for (i, j) in signed.neg_weight:
        for anchor, other in ((i, j), (j, i)):
            for z in signed.skeleton_neighbors(anchor):
                z = int(z)
                if z == other:
                    continue
                if signed.pair_sign(z, other) is None:
                    cand.add((min(z, other), max(z, other)))
    return sorted(cand)


def _closes_all_status(signed: SignedNetwork, src: int, dst: int, weight: float) -> bool:
    """Would a negative edge src -> dst leave every triad through {src, dst}
    status-satisfying?"""
    new_edge = (TriadEdge(src, dst, -1, weight),)
    common = np.intersect1d(
        signed.skeleton_neighbors(src), signed.skeleton_neighbors(dst), assume_unique=True
    )
    if len(common) == 0:
        return False
    for w in common:
        w = int(w)
        t = Triad(
            nodes=(src, dst, w),
            edges=new_edge + signed.edges_between(src, w) + signed.edges_between(dst, w),
        )
        if not satisfies_status(t):
            return False
    return True


def construct_negative_samples(
    g_p: PositiveNetwork, nmat: NegativeInteractionMatrix, cfg: SamplingConfig,
    refine: bool = True,
) -> SampleSet:
    """Build the negative sample set: seed with every pair that has negative
    interactions, drop seeds sitting in a status-violating triad, then add pairs
    whose insertion leaves every incident triad status-satisfying.

    Removal runs to completion against the seeded signed graph before the single
    addition pass; additions are evaluated against the post-removal graph and are
    not re-checked. ``refine=False`` keeps the raw seed set (no triad passes).
    """
    seeds = []
    skipped = 0
    for i, j, v in nmat.pairs():
        if g_p.has_edge(i, j):
            skipped += 1
            continue
        seeds.append((i, j, v))
    if skipped:
        log.warning(
            "skipped %d interacting pairs that already carry a positive link", skipped
        )

    out = SampleSet()
    if not seeds:
        return out

    if not refine:
        for i, j, v in seeds:
            out.ns.append((i, j))
            out.weights[(i, j)] = reliability_weight(v, cfg)
            out.provenance[(i, j)] = INTERACTION
        return out

    signed = SignedNetwork(g_p, [(i, j, 1.0) for i, j, _ in seeds])
    removed = set()
    for i, j, _ in seeds:
        for t in _pair_triads(signed, i, j):
            if not satisfies_status(t):
                removed.add((i, j))
                break
    survivors = [(i, j, v) for i, j, v in seeds if (i, j) not in removed]

    refined = SignedNetwork(g_p, [(i, j, 1.0) for i, j, _ in survivors])
    additions = []
    for a, b in _closure_candidates(refined):
        ok_ab = _closes_all_status(refined, a, b, cfg.r)
        ok_ba = _closes_all_status(refined, b, a, cfg.r)
        if ok_ab and ok_ba:
            # Both directions are status-consistent; point the new enmity at
            # the endpoint already receiving more negative edges.
            if len(refined.neg_in[b]) >= len(refined.neg_in[a]):
                additions.append((a, b))
            else:
                additions.append((b, a))
        elif ok_ab:
            additions.append((a, b))
        elif ok_ba:
            additions.append((b, a))

    for i, j, v in survivors:
        out.ns.append((i, j))
        out.weights[(i, j)] = reliability_weight(v, cfg)
        out.provenance[(i, j)] = INTERACTION
    ns_set = set(out.ns)
    for i, j in additions:
        if (i, j) in ns_set:
            continue
        out.ns.append((i, j))
        out.weights[(i, j)] = cfg.r
        out.provenance[(i, j)] = CLOSURE
        ns_set.add((i, j))
    out.ns.sort()
    return out


def sample_positive_pairs(
    m: int, g_p: PositiveNetwork, samples: SampleSet, cfg: SamplingConfig,
) -> SampleSet:
    """Uniformly sample ratio * |NS| ordered non-edge pairs, disjoint from NS,
    as positive (missing-link) samples. Deterministic given the seed."""
    count = round(cfg.ratio * len(samples.ns))
    ns_set = set(samples.ns)
    available = m * (m - 1) - g_p.n_edges - len(ns_set)
    if count > available:
        raise ValueError(
            f"requested {count} positive samples but only {available} non-edge pairs exist"
        )
    rng = np.random.default_rng(cfg.seed)
    chosen = []
    chosen_set = set()
    while len(chosen) < count:
        i = int(rng.integers(m))
        j = int(rng.integers(m))
        if i == j:
            continue
        pair = (i, j)
        if pair in chosen_set or pair in ns_set or g_p.has_edge(i, j):
            continue
        chosen.append(pair)
        chosen_set.add(pair)
    samples.ps = chosen
    return samples
