"""Diagnostic studies over a signed dataset: where enemies sit in the positive
network, how triads split across sign combinations, and whether negative
content interactions line up with negative links."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as t_dist

from .graph import (
    NegativeInteractionMatrix,
    PositiveNetwork,
    SignedNetwork,
    enumerate_triads,
    is_balanced,
    satisfies_status,
)

SIGN_COMBOS = ("+++", "++-", "+--", "---")
BALANCED_COMBOS = ("+++", "+--")


@dataclass
class PathLengthHistogram:
    """Counts of BFS path lengths, bucketed 1..cap plus 'unreachable'."""

    cap: int
    counts: dict[str, int]
    total: int

    @property
    def ratios(self) -> dict[str, float]:
        if self.total == 0:
            return {k: 0.0 for k in self.counts}
        return {k: v / self.total for k, v in self.counts.items()}

    def within(self, hops: int) -> float:
        """Fraction of pairs with path length <= hops."""
        if self.total == 0:
            return 0.0
        return sum(self.counts[str(k)] for k in range(1, hops + 1)) / self.total

    def to_dict(self) -> dict:
        return {
            "cap": self.cap,
            "total": self.total,
            "counts": dict(self.counts),
            "ratios": self.ratios,
        }

    def csv_rows(self):
        header = ["bucket", "count", "ratio"]
        ratios = self.ratios
        rows = [[k, self.counts[k], ratios[k]] for k in self.counts]
        return header, rows


@dataclass
class TriadReport:
    """Census of signed triads: sign-combination counts plus balance and status ratios."""

    total: int
    combo_counts: dict[str, int]
    balanced: int
    directed_total: int
    status_satisfied: int
    conflict_pairs: int = 0

    @property
    def balanced_ratio(self):
        return self.balanced / self.total if self.total else None

    @property
    def status_ratio(self):
        return self.status_satisfied / self.directed_total if self.directed_total else None

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "combo_counts": dict(self.combo_counts),
            "balanced": self.balanced,
            "balanced_ratio": self.balanced_ratio,
            "directed_total": self.directed_total,
            "status_satisfied": self.status_satisfied,
            "status_ratio": self.status_ratio,
            "conflict_pairs_excluded": self.conflict_pairs,
        }

    def csv_rows(self):
        header = ["combo", "count", "ratio"]
        rows = [
            [c, self.combo_counts[c], self.combo_counts[c] / self.total if self.total else 0.0]
            for c in SIGN_COMBOS
        ]
        return header, rows


@dataclass
class CorrelationReport:
    """Outcome of the negative-interaction vs negative-link correlation study."""

    n_interacting: int
    t_stat: float
    p_value: float
    alpha: float
    significant: bool
    k_max: int
    ratio_curve: list  # (K, pairs_at_least_k, with_link, ratio)
    baseline_ratio: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "n_interacting_pairs": self.n_interacting,
            "t_stat": self.t_stat,
            "p_one_sided": self.p_value,
            "alpha": self.alpha,
            "significant": self.significant,
            "k_max": self.k_max,
            "ratio_curve": [
                {"k": k, "pairs": n, "with_link": w, "ratio": r}
                for k, n, w, r in self.ratio_curve
            ],
            "baseline_ratio": self.baseline_ratio,
            "seed": self.seed,
        }

    def csv_rows(self):
        header = ["k", "pairs_at_least_k", "with_negative_link", "ratio"]
        rows = [[k, n, w, r] for k, n, w, r in self.ratio_curve]
        return header, rows


def enemy_path_distribution(g_p: PositiveNetwork, negatives, cap: int = 6) -> PathLengthHistogram:
    """Distribution of directed BFS path lengths i -> j over negative links (i, j)."""
    negatives = list(negatives)
    if not negatives:
        raise ValueError("no negative links to analyze")
    counts = {str(k): 0 for k in range(1, cap + 1)}
    counts["unreachable"] = 0
    by_src = {}
    for i, j in negatives:
        if not (0 <= i < g_p.m and 0 <= j < g_p.m):
            raise ValueError(f"negative edge ({i}, {j}) references unknown users")
        by_src.setdefault(i, []).append(j)
    for src in sorted(by_src):
        dist = g_p.distances_from(src, cap, directed=True)
        for dst in by_src[src]:
            d = dist[dst]
            if d > 0:
                counts[str(int(d))] += 1
            else:
                counts["unreachable"] += 1
    return PathLengthHistogram(cap=cap, counts=counts, total=len(negatives))


def triad_census(g: SignedNetwork, include_status: bool = True) -> TriadReport:
    """Count undirected sign combinations and the status pass rate of directed
    triads (the directed pass can be skipped when only balance is needed)."""
    combo_counts = {c: 0 for c in SIGN_COMBOS}
    balanced = 0
    total = 0
    for t in enumerate_triads(g, mode="undirected"):
        n_neg = sum(1 for s in t.undirected_signs() if s < 0)
        combo_counts[SIGN_COMBOS[n_neg]] += 1
        total += 1
        if is_balanced(t):
            balanced += 1
    directed_total = 0
    status_ok = 0
    if include_status:
        for t in enumerate_triads(g, mode="directed"):
            directed_total += 1
            if satisfies_status(t):
                status_ok += 1
    return TriadReport(
        total=total,
        combo_counts=combo_counts,
        balanced=balanced,
        directed_total=directed_total,
        status_satisfied=status_ok,
        conflict_pairs=g.n_conflicts,
    )


def welch_t_test(s, r) -> tuple[float, float]:
    """Welch unequal-variance two-sample statistic with one-sided p for mean(s) > mean(r).

    Degrees of freedom follow Welch-Satterthwaite. Inputs where both vectors are
    constant with equal means are rejected; constant vectors with unequal means
    yield an infinite statistic (p of 0 or 1).
    """
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    if s.size < 2 or r.size < 2:
        raise ValueError("both samples need at least 2 observations")
    vs = s.var(ddof=1)
    vr = r.var(ddof=1)
    num = s.mean() - r.mean()
    se2 = vs / s.size + vr / r.size
    if se2 == 0.0:
        if num == 0.0:
            raise ValueError("degenerate t-test: both samples constant and equal")
        return (math.inf if num > 0 else -math.inf, 0.0 if num > 0 else 1.0)
    t_stat = num / math.sqrt(se2)
    df = se2**2 / (
        (vs / s.size) ** 2 / (s.size - 1) + (vr / r.size) ** 2 / (r.size - 1)
    )
    p = float(t_dist.sf(t_stat, df))
    return float(t_stat), p


def interaction_link_correlation(
    nmat: NegativeInteractionMatrix,
    negatives,
    seed: int,
    alpha: float = 0.01,
    k_max: int = 0,
    min_pairs_per_k: int = 30,
) -> CorrelationReport:
    """Pairs with negative interactions vs matched random pairs: one-sided t-test
    on negative-link indicators, plus the ratio-of-negative-links curve by
    interaction count threshold K.

    Matched pairs are drawn per source user without replacement among targets the
    source has no negative interactions with. ``k_max=0`` picks the largest K
    with at least ``min_pairs_per_k`` qualifying pairs.
    """
    m = nmat.m
    entries = [(i, j, v) for i, j, v in nmat.pairs()]
    if len(entries) < 2:
        raise ValueError("need at least 2 pairs with negative interactions")
    truth = set(map(tuple, negatives))
    rng = np.random.default_rng(seed)

    s_vec = [1.0 if (i, j) in truth else 0.0 for i, j, _ in entries]
    by_src = {}
    for i, j, _ in entries:
        by_src.setdefault(i, set()).add(j)
    r_vec = []
    for i in sorted(by_src):
        excluded = by_src[i] | {i}
        needed = len(by_src[i])
        if m - len(excluded) < needed:
            raise ValueError(f"user {i} has too few non-interacting targets to match")
        chosen = set()
        while len(chosen) < needed:
            k = int(rng.integers(m))
            if k not in excluded and k not in chosen:
                chosen.add(k)
        for k in sorted(chosen):
            r_vec.append(1.0 if (i, k) in truth else 0.0)

    t_stat, p = welch_t_test(s_vec, r_vec)

    values = np.array([v for _, _, v in entries])
    linked = np.array([(i, j) in truth for i, j, _ in entries])
    if k_max <= 0:
        k_max = 1
        for k in range(1, int(values.max()) + 1):
            if (values >= k).sum() >= min_pairs_per_k:
                k_max = k
    curve = []
    for k in range(1, k_max + 1):
        mask = values >= k
        n_pairs = int(mask.sum())
        n_link = int(linked[mask].sum())
        curve.append((k, n_pairs, n_link, n_link / n_pairs if n_pairs else 0.0))

    baseline = len(truth) / (m * (m - 1)) if m > 1 else 0.0
    return CorrelationReport(
        n_interacting=len(entries),
        t_stat=t_stat,
        p_value=p,
        alpha=alpha,
        significant=p < alpha,
        k_max=k_max,
        ratio_curve=curve,
        baseline_ratio=baseline,
        seed=seed,
    )
