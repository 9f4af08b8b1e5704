"""Synthetic benchmark generator with known ground truth.

The planted world has friendship blocks whose cores are densely linked, with a
minority of hostile block pairs, and wires each empirical regularity the
pipeline exploits into the graph:

* Enmity comes in pods: a tight fringe friend group in one block shares a
  grudge against a target in a hostile block. Members hold the negative link
  with high probability; the ones who stay neutral instead share a mutual
  friend (the helper) with the target, which is exactly the structure the
  status-closure test uses to reject them. Enemies end up a few hops from
  their targets through the helper bridges.
* Off-structure negatives (placed until the balanced-triad ratio matches the
  target) sit on reciprocal friendship wedges, so their seeded edges land in
  status-violating triads and the removal step can find them.
* Negative interactions are emitted across negative-linked pairs, escalating
  to several dislikes for most real feuds. Interaction noise comes from
  linkless lurkers dropping one or two dislikes on popular unattached authors:
  it fools interaction-based seeding, adds no graph structure, and its low
  counts are exactly what the reliability weighting discounts.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .analysis import triad_census
from .datasets import DatasetBundle, write_bundle
from .graph import IdMap, InteractionData, PositiveNetwork, SignedNetwork

log = logging.getLogger(__name__)


@dataclass
class PlantedModelParams:
    n_users: int = 2000
    n_blocks: int = 8
    core_degree: float = 8.0
    friendly_cross_degree: float = 2.5
    hostile_cross_degree: float = 0.8
    hostile_fraction: float = 0.3
    negative_per_user: float = 0.09      # structured negatives per user
    pod_size: int = 6
    pod_density: float = 0.75
    pod_reciprocal: float = 0.6
    propagation_prob: float = 0.75
    balanced_target: float = 0.92
    neg_emission_prob: float = 0.55
    noise_neg_emission_prob: float = 0.12
    neg_emission_extra: float = 2.0        # Poisson mean on top of 2 for escalated feuds
    neg_light_fraction: float = 0.2       # enemies who leave only a single dislike
    noise_interaction_rate: float = 0.055  # drive-by disliker pairs per user
    noise_interaction_heavy: float = 0.45  # fraction of noise pairs with 2 dislikes
    posts_per_user: float = 2.0
    pos_emission_prob: float = 0.25

    def __post_init__(self):
        if self.n_users < 10:
            raise ValueError("need at least 10 users")
        if not 2 <= self.n_blocks <= self.n_users // 20:
            raise ValueError("block count out of range")
        if self.pod_size < 3:
            raise ValueError("pods need at least 3 members")
        for name in ("core_degree", "friendly_cross_degree", "hostile_cross_degree",
                     "posts_per_user", "neg_emission_extra", "noise_interaction_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("hostile_fraction", "negative_per_user", "propagation_prob",
                     "balanced_target", "pod_density"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        for name in ("neg_emission_prob", "noise_neg_emission_prob",
                     "pos_emission_prob", "pod_reciprocal", "neg_light_fraction",
                     "noise_interaction_heavy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def _rng(seed: int, stage: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


@dataclass
class _World:
    core: list             # per block: ndarray of core user ids
    block_of: np.ndarray
    hostile: set
    pos_edges: set
    structured_negs: list
    noise_pairs: list      # brigading (user, author) pairs without links
    popular_authors: list  # brigade victims: prolific, well-rated creators
    pod_meta: list


def _split_blocks(params: PlantedModelParams):
    members = np.array_split(np.arange(params.n_users), params.n_blocks)
    block_of = np.empty(params.n_users, dtype=np.int64)
    core, pod_pool, target_pool, lurker_pool = [], [], [], []
    for b, ms in enumerate(members):
        block_of[ms] = b
        n = len(ms)
        n_targets = max(2, n // 10)
        n_lurk = max(2, n // 6)
        n_pod = max(params.pod_size, n // 5)
        cut3 = n - n_lurk
        cut2 = cut3 - n_targets
        cut1 = cut2 - n_pod
        lurker_pool.append(ms[cut3:])
        target_pool.append(ms[cut2:cut3])
        pod_pool.append(ms[cut1:cut2])
        core.append(ms[:cut1])
    return core, pod_pool, target_pool, lurker_pool, block_of


def _build_world(params: PlantedModelParams, seed: int) -> _World:
    core, pod_pool, target_pool, lurker_pool, block_of = _split_blocks(params)
    nb = params.n_blocks
    rng = _rng(seed, "blocks")
    all_pairs = [(a, b) for a in range(nb) for b in range(a + 1, nb)]
    n_hostile = max(1, round(params.hostile_fraction * len(all_pairs)))
    idx = rng.choice(len(all_pairs), size=n_hostile, replace=False)
    hostile = {all_pairs[i] for i in sorted(idx)}

    edges = set()
    rng_pos = _rng(seed, "positive")
    for b in range(nb):
        own = core[b]
        for u in own:
            u = int(u)
            d = min(rng_pos.poisson(params.core_degree), len(own) - 1)
            if d > 0:
                for v in rng_pos.choice(own, size=d, replace=False):
                    v = int(v)
                    if v != u:
                        edges.add((u, v))
        friendly = [c for c in range(nb)
                    if c != b and (min(b, c), max(b, c)) not in hostile]
        hostile_b = [c for c in range(nb)
                     if c != b and (min(b, c), max(b, c)) in hostile]
        for pool, mean in ((friendly, params.friendly_cross_degree),
                           (hostile_b, params.hostile_cross_degree)):
            if not pool:
                continue
            for u in own:
                u = int(u)
                for _ in range(rng_pos.poisson(mean)):
                    c = int(pool[rng_pos.integers(len(pool))])
                    v = int(core[c][rng_pos.integers(len(core[c]))])
                    edges.add((u, v))

    rng_pod = _rng(seed, "pods")
    n_struct = max(10, round(params.n_users * params.negative_per_user))
    expected_per_pod = (params.pod_size - 1) * params.propagation_prob
    n_pods = max(1, round(n_struct / expected_per_pod))
    hostile_list = sorted(hostile)
    pod_cursor = {b: 0 for b in range(nb)}
    target_cursor = {b: 0 for b in range(nb)}
    structured = []
    pod_meta = []
    attempts = 0
    while len(pod_meta) < n_pods and attempts < 8 * n_pods:
        attempts += 1
        a, b = hostile_list[int(rng_pod.integers(len(hostile_list)))]
        if rng_pod.random() < 0.5:
            a, b = b, a
        if pod_cursor[a] + params.pod_size > len(pod_pool[a]):
            continue
        if target_cursor[b] >= len(target_pool[b]):
            continue
        members = [int(u) for u in
                   pod_pool[a][pod_cursor[a] : pod_cursor[a] + params.pod_size]]
        pod_cursor[a] += params.pod_size
        dst = int(target_pool[b][target_cursor[b]])
        target_cursor[b] += 1

        # The first member is the peacemaker: mutual friends with everyone in
        # the pod, with the block core, and with the target's helper. It never
        # joins the grudge, so every member has a mutually-befriended neighbor
        # the status gate can read when weighing spurious closures.
        peacemaker = members[0]
        for u in members[1:]:
            edges.add((u, peacemaker))
            edges.add((peacemaker, u))
        for i in range(1, len(members)):
            for j in range(i + 1, len(members)):
                if rng_pod.random() < params.pod_density:
                    edges.add((members[i], members[j]))
                    if rng_pod.random() < params.pod_reciprocal:
                        edges.add((members[j], members[i]))
        anchor = int(core[a][rng_pod.integers(len(core[a]))])
        edges.add((peacemaker, anchor))
        edges.add((anchor, peacemaker))

        # The target is reachable only through its helper; neutral members get
        # a full mutual-friend bridge, which the status gate later reads as
        # grounds to reject them as enemies.
        helper = int(core[b][rng_pod.integers(len(core[b]))])
        edges.add((helper, dst))
        edges.add((dst, helper))
        edges.add((peacemaker, helper))
        edges.add((helper, peacemaker))
        haters = []
        for u in members[1:]:
            if rng_pod.random() < params.propagation_prob:
                structured.append((u, dst))
                haters.append(u)
            else:
                edges.add((u, helper))
                edges.add((helper, u))
        pod_meta.append({"members": members, "target": dst, "haters": haters,
                         "helper": helper, "peacemaker": peacemaker})

    # Interaction noise: lurkers (opinion-only users with no links) disliking
    # posts of popular unattached authors, matched one-to-one so the noise adds
    # no edges and no open triads to the seeded signed graph. It fools
    # interaction-based seeding; nothing else.
    rng_noise = _rng(seed, "noise-pairs")
    n_noise = int(round(params.n_users * params.noise_interaction_rate))
    lurkers = np.concatenate(lurker_pool)
    free_targets = np.concatenate(
        [target_pool[b][target_cursor[b]:] for b in range(nb)]
    )
    rng_noise.shuffle(lurkers)
    rng_noise.shuffle(free_targets)
    noise_pairs = sorted(
        (int(i), int(j)) for i, j in zip(lurkers[:n_noise], free_targets[:n_noise])
    )
    popular_authors = sorted(j for _, j in noise_pairs)

    structured = [(u, v) for u, v in structured if (u, v) not in edges]
    return _World(
        core=core,
        block_of=block_of,
        hostile=hostile,
        pos_edges=edges,
        structured_negs=sorted(set(structured)),
        noise_pairs=sorted(noise_pairs),
        popular_authors=sorted(set(popular_authors)),
        pod_meta=pod_meta,
    )


def _noise_negatives(world: _World, g_base: PositiveNetwork, seed: int, count: int):
    """Off-structure negatives between core acquaintances sharing friends: each
    closes several all-positive wedges (unbalanced triads), and one wedge is
    made reciprocal so the seeded edge lands in a status violation the removal
    step can detect. Returns (negative pairs, wedge edges to add)."""
    rng = _rng(seed, "noise-negs")
    out = []
    wedge_edges = set()
    seen = set(world.structured_negs)
    guard = 0
    while len(out) < count and guard < 80 * count + 1000:
        guard += 1
        b = int(rng.integers(len(world.core)))
        own = world.core[b]
        w = int(own[rng.integers(len(own))])
        nbrs = [int(x) for x in g_base.und_neighbors(w)
                if world.block_of[x] == b]
        if len(nbrs) < 2:
            continue
        u = int(nbrs[rng.integers(len(nbrs))])
        # Among a few candidates, prefer the one sharing the most friends with
        # u: more closed wedges per noise edge.
        best_v, best_common = -1, -1
        u_nbrs = set(int(x) for x in g_base.und_neighbors(u))
        for _ in range(4):
            v = int(nbrs[rng.integers(len(nbrs))])
            if v == u or v == w:
                continue
            if (u, v) in seen or g_base.positively_linked(u, v):
                continue
            common = len(u_nbrs & set(int(x) for x in g_base.und_neighbors(v)))
            if common > best_common:
                best_v, best_common = v, common
        if best_v < 0:
            continue
        v = best_v
        seen.add((u, v))
        out.append((u, v))
        wedge_edges.update({(u, w), (w, u), (w, v), (v, w)})
    return out, wedge_edges


def _calibrate_noise(params: PlantedModelParams, seed: int, world: _World,
                     tol: float = 0.015):
    """Bisect the number of off-structure negatives until the balanced-triad
    ratio lands near the target; returns (noise pairs, graph, achieved)."""
    base = world.structured_negs
    g_base = PositiveNetwork(params.n_users, world.pos_edges)

    def measure(count):
        noise, wedges = _noise_negatives(world, g_base, seed, count)
        g = PositiveNetwork(params.n_users, world.pos_edges | wedges)
        negs = [(i, j) for i, j in base + noise if not g.has_edge(i, j)]
        signed = SignedNetwork(g, [(i, j, 1.0) for i, j in negs])
        rep = triad_census(signed, include_status=False)
        ratio = rep.balanced_ratio if rep.balanced_ratio is not None else 1.0
        return noise, g, ratio

    max_noise = max(20, 3 * len(base))
    noise_lo, g_lo, ratio_lo = measure(0)
    if ratio_lo <= params.balanced_target:
        return noise_lo, g_lo, ratio_lo
    noise_hi, g_hi, ratio_hi = measure(max_noise)
    if ratio_hi >= params.balanced_target:
        return noise_hi, g_hi, ratio_hi
    lo, hi = 0, max_noise
    best = (noise_lo, g_lo, ratio_lo)
    for _ in range(8):
        mid = (lo + hi) // 2
        cand = measure(mid)
        if abs(cand[2] - params.balanced_target) < abs(best[2] - params.balanced_target):
            best = cand
        if abs(cand[2] - params.balanced_target) <= tol:
            return cand
        if cand[2] > params.balanced_target:
            lo = mid + 1
        else:
            hi = mid - 1
        if lo > hi:
            break
    return best


def _emit_interactions(params: PlantedModelParams, seed: int, world: _World,
                       structured, noise_negs, pos_edges, posts_of):
    rng = _rng(seed, "interactions")
    cells = {}

    def opine(user, author, sign, count):
        posts = posts_of[author]
        if len(posts) == 0 or count <= 0:
            return
        count = min(count, len(posts))
        picks = rng.choice(posts, size=count, replace=False)
        for p in picks:
            cells.setdefault((user, int(p)), sign)

    # Escalated feuds leave several dislikes; a light minority leaves just one,
    # indistinguishable from brigading by count alone.
    for i, j in structured:
        if rng.random() < params.neg_emission_prob:
            if rng.random() < params.neg_light_fraction:
                count = 1
            else:
                count = 3 + int(rng.poisson(params.neg_emission_extra))
            opine(i, j, -1, count)
    for i, j in noise_negs:
        if rng.random() < params.noise_neg_emission_prob:
            opine(i, j, -1, 1 + int(rng.poisson(0.5)))

    # Drive-by noise: each matched lurker drops one or two dislikes. The
    # victims are prolific, well-rated creators; fans rate without following,
    # so the popularity shows up in content features but not in the graph.
    for i, j in world.noise_pairs:
        heavy = rng.random() < params.noise_interaction_heavy
        opine(i, j, -1, 2 if heavy else 1)
    n_users = params.n_users
    for author in world.popular_authors:
        for _ in range(12):
            fan = int(rng.integers(n_users))
            if fan != author:
                opine(fan, author, +1, 1 + int(rng.poisson(0.5)))

    for i, j in sorted(pos_edges):
        if rng.random() < params.pos_emission_prob:
            opine(i, j, +1, 1 + int(rng.poisson(0.5)))
    return cells


def generate_planted(params: PlantedModelParams, seed: int, out_dir,
                     name: str = "planted") -> DatasetBundle:
    """Write a synthetic dataset bundle (with ground truth) to ``out_dir``.

    Deterministic: the same params and seed reproduce identical files.
    """
    world = _build_world(params, seed)
    noise, g_p, achieved = _calibrate_noise(params, seed, world)
    structured = [(i, j) for i, j in world.structured_negs if not g_p.has_edge(i, j)]
    negs = sorted(set(structured) | set(noise))
    log.info(
        "planted: %d structured + %d noise negatives, balanced ratio %.4f (target %.4f)",
        len(structured), len(noise), achieved, params.balanced_target,
    )

    rng_posts = _rng(seed, "posts")
    popular = set(world.popular_authors)
    post_author = []
    for u in range(params.n_users):
        if u in popular:
            count = 6 + int(rng_posts.poisson(4.0))
        else:
            count = 1 + int(rng_posts.poisson(params.posts_per_user))
        post_author.extend([u] * count)
    post_author = np.array(post_author, dtype=np.int64)
    posts_of = [np.flatnonzero(post_author == u) for u in range(params.n_users)]

    cells = _emit_interactions(
        params, seed, world, structured, noise, g_p.edge_set, posts_of
    )
    rows = np.array([c[0] for c in cells], dtype=np.int64)
    cols = np.array([c[1] for c in cells], dtype=np.int64)
    vals = np.array([cells[c] for c in cells], dtype=np.int64)
    omat = sp.csr_matrix(
        (vals, (rows, cols)), shape=(params.n_users, len(post_author))
    )
    data = InteractionData(params.n_users, post_author, omat)

    users = IdMap()
    for u in range(params.n_users):
        users.intern(f"u{u:05d}")
    posts = IdMap()
    for p in range(len(post_author)):
        posts.intern(f"p{p:06d}")

    meta = {
        "generator": "planted",
        "seed": seed,
        "params": asdict(params),
        "achieved_balanced_ratio": achieved,
        "n_negative_links": len(negs),
        "n_structured_negatives": len(structured),
        "n_noise_negatives": len(noise),
        "n_pods": len(world.pod_meta),
    }
    return write_bundle(
        out_dir, name, users, g_p, data, posts, truth=set(negs), extra_meta=meta
    )
