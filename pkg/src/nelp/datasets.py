"""Dataset bundles and ingestion.

A bundle is a directory of UTF-8 tab-separated files: positive links
(``src<TAB>dst``), authorship (``user<TAB>post``), opinions
(``user<TAB>post<TAB>value``) and, optionally, ground-truth negative links
(``src<TAB>dst``). Lines starting with ``#`` are comments.

Ground truth is quarantined: :func:`load_products` never opens the truth file,
so sampling, features and training cannot see it. Evaluation paths read it
through :func:`load_truth` explicitly.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import (
    IdMap,
    InteractionData,
    NegativeInteractionMatrix,
    PositiveNetwork,
    SignedNetwork,
    compute_negative_interactions,
)

log = logging.getLogger(__name__)

POSITIVE_FILE = "positive.tsv"
AUTHORSHIP_FILE = "authorship.tsv"
OPINIONS_FILE = "opinions.tsv"
TRUTH_FILE = "truth.tsv"
USERS_FILE = "users.tsv"
META_FILE = "bundle.json"


@dataclass
class DatasetBundle:
    name: str
    directory: str

    def path(self, filename) -> str:
        return os.path.join(self.directory, filename)

    @property
    def has_truth(self) -> bool:
        return os.path.exists(self.path(TRUTH_FILE))

    @classmethod
    def open(cls, directory) -> "DatasetBundle":
        meta_path = os.path.join(directory, META_FILE)
        name = os.path.basename(os.path.normpath(directory))
        if os.path.exists(meta_path):
            with open(meta_path, encoding="utf-8") as fh:
                name = json.load(fh).get("name", name)
        for required in (POSITIVE_FILE, AUTHORSHIP_FILE, OPINIONS_FILE):
            if not os.path.exists(os.path.join(directory, required)):
                raise FileNotFoundError(f"bundle {directory} is missing {required}")
        return cls(name=name, directory=directory)


@dataclass
class DatasetProducts:
    """Everything the training pipeline may see. No ground truth in here."""

    name: str
    users: IdMap
    posts: IdMap
    g_p: PositiveNetwork
    data: InteractionData
    stats: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.g_p.m

    def nmat(self, transpose: bool = False) -> NegativeInteractionMatrix:
        return compute_negative_interactions(self.data, transpose=transpose)


def _read_rows(path, n_cols):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != n_cols:
                raise ValueError(
                    f"{path}:{lineno}: expected {n_cols} tab-separated fields, "
                    f"got {len(parts)}"
                )
            rows.append(parts)
    return rows


def _seed_users(bundle: DatasetBundle) -> IdMap:
    """Fix id order from the user roster when the bundle carries one, so ids stay
    consistent between ingestion and truth-blind loading (the roster names users
    that appear only in the truth file)."""
    users = IdMap()
    roster = bundle.path(USERS_FILE)
    if os.path.exists(roster):
        for (name,) in _read_rows(roster, 1):
            users.intern(name)
    return users


def _to_opinion(value, threshold, path, lineno):
    try:
        v = int(value)
    except ValueError as exc:
        raise ValueError(f"{path}:{lineno}: opinion value {value!r} is not an integer") from exc
    if threshold is None:
        if v not in (-1, 0, 1):
            raise ValueError(
                f"{path}:{lineno}: opinion {v} outside {{-1, 0, +1}} "
                "(pass a rating threshold for raw ratings)"
            )
        return v
    if v > threshold:
        return 1
    if v < threshold:
        return -1
    return 0


def ingest(bundle: DatasetBundle, rating_threshold: int | None = None):
    """Parse a bundle into graph products plus the quarantined truth edges.

    Raw ratings become opinions through the threshold (above -> +1, below -> -1,
    equal -> 0). When truth is present, users with neither positive nor negative
    links are filtered out and ids are re-assigned densely.
    """
    pos_rows = _read_rows(bundle.path(POSITIVE_FILE), 2)
    auth_rows = _read_rows(bundle.path(AUTHORSHIP_FILE), 2)
    op_path = bundle.path(OPINIONS_FILE)
    truth_rows = (
        _read_rows(bundle.path(TRUTH_FILE), 2) if bundle.has_truth else None
    )

    opinions = []
    with open(op_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{op_path}:{lineno}: expected 3 fields")
            opinions.append((parts[0], parts[1], _to_opinion(parts[2], rating_threshold, op_path, lineno)))

    if truth_rows is not None:
        linked = {u for a, b in pos_rows for u in (a, b)}
        linked |= {u for a, b in truth_rows for u in (a, b)}
        keep = linked
        pos_rows = [r for r in pos_rows if r[0] in keep and r[1] in keep]
        truth_rows = [r for r in truth_rows if r[0] in keep and r[1] in keep]
        auth_rows = [r for r in auth_rows if r[0] in keep]
        kept_posts = {p for _, p in auth_rows}
        opinions = [
            (u, p, v) for u, p, v in opinions if u in keep and p in kept_posts
        ]

    users = _seed_users(bundle)
    if truth_rows is not None:
        users = IdMap()
        roster = bundle.path(USERS_FILE)
        if os.path.exists(roster):
            for (name,) in _read_rows(roster, 1):
                if name in keep:
                    users.intern(name)
    for a, b in pos_rows:
        users.intern(a)
        users.intern(b)
    if truth_rows:
        for a, b in truth_rows:
            users.intern(a)
            users.intern(b)
    for u, _ in auth_rows:
        users.intern(u)
    for u, _, _ in opinions:
        users.intern(u)

    posts = IdMap()
    author_of = {}
    for u, p in auth_rows:
        pid = posts.intern(p)
        prev = author_of.get(pid)
        if prev is not None and prev != users.id_of(u):
            raise ValueError(f"post {p!r} has more than one author")
        author_of[pid] = users.id_of(u)

    m = len(users)
    post_author = np.array([author_of[k] for k in range(len(posts))], dtype=np.int64)

    rows, cols, vals = [], [], []
    seen_cells = {}
    for u, p, v in opinions:
        if v == 0:
            continue
        if p not in posts:
            raise ValueError(f"opinion references unknown post {p!r}")
        cell = (users.id_of(u), posts.id_of(p))
        if cell in seen_cells:
            if seen_cells[cell] != v:
                log.warning("conflicting duplicate opinion for %s; keeping first", cell)
            continue
        seen_cells[cell] = v
        rows.append(cell[0])
        cols.append(cell[1])
        vals.append(v)
    omat = sp.csr_matrix(
        (vals, (rows, cols)), shape=(m, len(posts)), dtype=np.int64
    )

    g_p = PositiveNetwork(m, [(users.id_of(a), users.id_of(b)) for a, b in pos_rows])
    data = InteractionData(m, post_author, omat)

    truth = None
    if truth_rows is not None:
        truth = set()
        dropped = 0
        for a, b in truth_rows:
            i, j = users.id_of(a), users.id_of(b)
            if i == j:
                dropped += 1
                continue
            truth.add((i, j))
        if dropped:
            log.warning("dropped %d self-loop truth edges", dropped)

    stats = {
        "users": m,
        "positive_links": g_p.n_edges,
        "posts": len(posts),
        "positive_opinions": int(data.opinions_given(+1).sum()),
        "negative_opinions": int(data.opinions_given(-1).sum()),
        "negative_links": len(truth) if truth is not None else None,
    }
    products = DatasetProducts(
        name=bundle.name, users=users, posts=posts, g_p=g_p, data=data, stats=stats
    )
    return products, truth


def load_products(bundle: DatasetBundle, rating_threshold: int | None = None) -> DatasetProducts:
    """Training-path loader: parses positive links, authorship and opinions only.
    The truth file is never opened here."""
    pos_rows = _read_rows(bundle.path(POSITIVE_FILE), 2)
    auth_rows = _read_rows(bundle.path(AUTHORSHIP_FILE), 2)

    users = _seed_users(bundle)
    for a, b in pos_rows:
        users.intern(a)
        users.intern(b)
    for u, _ in auth_rows:
        users.intern(u)

    posts = IdMap()
    author_of = {}
    for u, p in auth_rows:
        pid = posts.intern(p)
        prev = author_of.get(pid)
        if prev is not None and prev != users.id_of(u):
            raise ValueError(f"post {p!r} has more than one author")
        author_of[pid] = users.id_of(u)

    op_path = bundle.path(OPINIONS_FILE)
    rows, cols, vals = [], [], []
    seen_cells = set()
    with open(op_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{op_path}:{lineno}: expected 3 fields")
            u, p, v = parts[0], parts[1], _to_opinion(parts[2], rating_threshold, op_path, lineno)
            if v == 0:
                continue
            if p not in posts:
                raise ValueError(f"{op_path}:{lineno}: opinion references unknown post {p!r}")
            users.intern(u)
            cell = (users.id_of(u), posts.id_of(p))
            if cell in seen_cells:
                continue
            seen_cells.add(cell)
            rows.append(cell[0])
            cols.append(cell[1])
            vals.append(v)

    m = len(users)
    post_author = np.array(
        [author_of[k] for k in range(len(posts))], dtype=np.int64
    )
    omat = sp.csr_matrix((vals, (rows, cols)), shape=(m, len(posts)), dtype=np.int64)
    g_p = PositiveNetwork(m, [(users.id_of(a), users.id_of(b)) for a, b in pos_rows])
    data = InteractionData(m, post_author, omat)
    return DatasetProducts(
        name=bundle.name,
        users=users,
        posts=posts,
        g_p=g_p,
        data=data,
        stats={"users": m, "positive_links": g_p.n_edges, "posts": len(posts)},
    )


def load_truth(bundle: DatasetBundle, users: IdMap) -> set:
    """Evaluation-only access to ground-truth negative edges."""
    if not bundle.has_truth:
        raise FileNotFoundError(f"bundle {bundle.directory} has no truth file")
    truth = set()
    for a, b in _read_rows(bundle.path(TRUTH_FILE), 2):
        if a not in users or b not in users:
            raise ValueError(f"truth edge ({a}, {b}) references unknown users")
        i, j = users.id_of(a), users.id_of(b)
        if i != j:
            truth.add((i, j))
    return truth


def signed_from_truth(g_p: PositiveNetwork, truth) -> SignedNetwork:
    """Signed network from ground truth, dropping negatives that collide with a
    positive edge (dirty data)."""
    clean = [(i, j, 1.0) for i, j in sorted(truth) if not g_p.has_edge(i, j)]
    dropped = len(truth) - len(clean)
    if dropped:
        log.warning("dropped %d truth negatives colliding with positive edges", dropped)
    return SignedNetwork(g_p, clean)


def write_bundle(directory, name, users: IdMap, g_p: PositiveNetwork,
                 data: InteractionData, posts: IdMap, truth=None, extra_meta=None):
    """Write a normalized bundle: sorted, canonical TSVs. Ingesting the result
    and re-serializing reproduces the files byte for byte."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, USERS_FILE), "w", encoding="utf-8") as fh:
        for name in users.names():
            fh.write(f"{name}\n")
    with open(os.path.join(directory, POSITIVE_FILE), "w", encoding="utf-8") as fh:
        for i, j in sorted(g_p.edge_set, key=lambda e: (users.name_of(e[0]), users.name_of(e[1]))):
            fh.write(f"{users.name_of(i)}\t{users.name_of(j)}\n")
    with open(os.path.join(directory, AUTHORSHIP_FILE), "w", encoding="utf-8") as fh:
        entries = sorted(
            (posts.name_of(p), users.name_of(data.post_author[p]))
            for p in range(data.n_posts)
        )
        for post_name, user_name in entries:
            fh.write(f"{user_name}\t{post_name}\n")
    coo = data.opinions.tocoo()
    with open(os.path.join(directory, OPINIONS_FILE), "w", encoding="utf-8") as fh:
        entries = sorted(
            (users.name_of(int(r)), posts.name_of(int(c)), int(v))
            for r, c, v in zip(coo.row, coo.col, coo.data)
        )
        for user_name, post_name, v in entries:
            fh.write(f"{user_name}\t{post_name}\t{v}\n")
    if truth is not None:
        with open(os.path.join(directory, TRUTH_FILE), "w", encoding="utf-8") as fh:
            for i, j in sorted(truth, key=lambda e: (users.name_of(e[0]), users.name_of(e[1]))):
                fh.write(f"{users.name_of(i)}\t{users.name_of(j)}\n")
    meta = {"name": name}
    if extra_meta:
        meta.update(extra_meta)
    with open(os.path.join(directory, META_FILE), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return DatasetBundle(name=name, directory=directory)
