"""Shared fixtures and independent oracles used across the test suite.

The oracles here are deliberately naive (triple loops, Floyd-Warshall,
projected gradient) so they share no code path with the implementations they
check.
"""

import numpy as np
import scipy.sparse as sp

from nelp.graph import InteractionData, PositiveNetwork, SignedNetwork


def random_interactions(rng, m=5, n_posts=8, density=0.4):
    post_author = rng.integers(0, m, size=n_posts)
    rows, cols, vals = [], [], []
    for i in range(m):
        for p in range(n_posts):
            if rng.random() < density:
                rows.append(i)
                cols.append(p)
                vals.append(int(rng.choice((-1, 1))))
    omat = sp.csr_matrix((vals, (rows, cols)), shape=(m, n_posts), dtype=np.int64)
    return InteractionData(m, post_author, omat)


def negative_counts_oracle(data: InteractionData) -> np.ndarray:
    """Triple-loop count of u_i's -1 opinions on posts authored by u_j."""
    m = data.m
    out = np.zeros((m, m), dtype=np.int64)
    dense = data.opinions.toarray()
    for i in range(m):
        for j in range(m):
            for p in range(data.n_posts):
                if data.post_author[p] == j and dense[i, p] == -1:
                    out[i, j] += 1
    return out


def random_digraph(rng, n=50, p=0.08) -> PositiveNetwork:
    edges = [(i, j) for i in range(n) for j in range(n)
             if i != j and rng.random() < p]
    return PositiveNetwork(n, edges)


def floyd_warshall_hops(g: PositiveNetwork, cap: int) -> np.ndarray:
    """All-pairs unweighted distances; entries > cap map to -1."""
    n = g.m
    big = n + 10
    dist = np.full((n, n), big, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    for i, j in g.edge_set:
        dist[i, j] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    dist[dist > cap] = -1
    return dist


def random_signed(rng, n=30, p_pos=0.08, p_neg=0.03) -> SignedNetwork:
    pos = []
    neg = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r = rng.random()
            if r < p_pos:
                pos.append((i, j))
            elif r < p_pos + p_neg:
                neg.append((i, j, float(rng.uniform(0.1, 1.0))))
    g = PositiveNetwork(n, pos)
    neg = [(i, j, w) for i, j, w in neg if not g.has_edge(i, j)]
    return SignedNetwork(g, neg)


def brute_force_triads(signed: SignedNetwork, mode: str):
    """O(n^3) closed-triple enumeration over the requested view."""
    n = signed.m
    out = []
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                linked = []
                ok = True
                for x, y in ((a, b), (a, c), (b, c)):
                    sign = signed.pair_sign(x, y)
                    if sign is None or (mode == "undirected" and sign == 0):
                        ok = False
                        break
                    linked.append(sign)
                if ok:
                    out.append(((a, b, c), tuple(linked)))
    return out


def projected_gradient_qp(q, y, s, iters=30000, polish=True):
    """Independent maximizer of sum(b) - 0.5 b'Qb subject to y'b = 0 and
    0 <= b <= s: projected gradient with exact line search plus an active-set
    polish through a KKT solve."""
    q = np.asarray(q, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    n = len(y)

    def project(v):
        # Find the shift along y that zeroes y' clip(v - t*y, 0, s).
        lo, hi = -1.0, 1.0
        span = abs(v).max() + s.max() + 1.0
        lo, hi = -span, span
        for _ in range(100):
            mid = (lo + hi) / 2.0
            val = y @ np.clip(v - mid * y, 0.0, s)
            if val > 0:
                lo = mid
            else:
                hi = mid
        return np.clip(v - ((lo + hi) / 2.0) * y, 0.0, s)

    beta = project(np.zeros(n))
    step = 1.0 / (np.linalg.norm(q, 2) + 1.0)
    for _ in range(iters):
        grad = 1.0 - q @ beta
        cand = project(beta + step * grad)
        d = cand - beta
        dqd = d @ q @ d
        gd = grad @ d
        if dqd > 1e-15:
            t = min(max(gd / dqd, 0.0), 1.0)
        else:
            t = 1.0 if gd > 0 else 0.0
        new = beta + t * d
        if np.linalg.norm(new - beta) < 1e-14:
            beta = new
            break
        beta = new

    if polish:
        eps = 1e-7 * max(1.0, s.max())
        free = (beta > eps) & (beta < s - eps)
        if free.any():
            f = np.flatnonzero(free)
            fixed = beta.copy()
            fixed[f] = 0.0
            rhs = 1.0 - q[np.ix_(f, range(n))] @ fixed
            kkt = np.zeros((len(f) + 1, len(f) + 1))
            kkt[: len(f), : len(f)] = q[np.ix_(f, f)]
            kkt[: len(f), -1] = y[f]
            kkt[-1, : len(f)] = y[f]
            target = np.concatenate([rhs, [-(y * fixed).sum()]])
            try:
                sol = np.linalg.solve(kkt, target)
                cand = beta.copy()
                cand[f] = sol[: len(f)]
                inside = (cand[f] >= -1e-12).all() and (cand[f] <= s[f] + 1e-12).all()
                if inside and abs(y @ cand) < 1e-8:
                    cand = np.clip(cand, 0.0, s)
                    if objective(q, cand) >= objective(q, beta):
                        beta = cand
            except np.linalg.LinAlgError:
                pass
    return beta


def objective(q, beta):
    return float(beta.sum() - 0.5 * beta @ q @ beta)
