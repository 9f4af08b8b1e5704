"""End-to-end training plumbing: derive samples, assemble the semi-supervised
feature block (labeled rows first, then coupled two-hop pairs), standardize,
and hand the problem to the dual solver.

All randomness flows from the run seed, split deterministically per stage, so
stages can be re-run in isolation.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .datasets import DatasetProducts
from .features import FeatureExtractor, build_schema, signed_view, standardize
from .graph import NegativeInteractionMatrix
from .sampling import (
    SampleSet,
    SamplingConfig,
    construct_negative_samples,
    sample_positive_pairs,
)
from .solver import (
    DualOperator,
    KernelSpec,
    Model,
    TrainingOverrides,
    TrainingProblem,
    build_balance_matrix,
    solve_dual,
)

log = logging.getLogger(__name__)

STAGES = ("sampling", "unlabeled", "eval-universe", "random-baseline")


def stage_seed(master: int, stage: str) -> int:
    """Deterministic per-stage seed derived from the master seed."""
    digest = hashlib.sha256(f"{master}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def sampling_config(cfg: RunConfig, seed: int | None = None) -> SamplingConfig:
    return SamplingConfig(
        r=cfg.r,
        ratio=cfg.ps_ns_ratio,
        seed=stage_seed(cfg.seed if seed is None else seed, "sampling"),
        weight_fn=cfg.weight_fn,
    )


def kernel_spec(cfg: RunConfig) -> KernelSpec:
    return KernelSpec(kind=cfg.kernel, bandwidth=cfg.rbf_bandwidth)


def build_samples(products: DatasetProducts, cfg: RunConfig,
                  ns_mode: str = "refined") -> SampleSet:
    """Negative samples (refined through the triad passes, or the raw
    interaction seeds) plus the positive sample pool."""
    if ns_mode not in ("refined", "seed"):
        raise ValueError(f"unknown ns_mode {ns_mode!r}")
    scfg = sampling_config(cfg)
    nmat = products.nmat()
    samples = construct_negative_samples(
        products.g_p, nmat, scfg, refine=ns_mode == "refined"
    )
    if samples.ns:
        sample_positive_pairs(products.m, products.g_p, samples, scfg)
    return samples


def unlabeled_pairs(products: DatasetProducts, samples: SampleSet,
                    cfg: RunConfig) -> list:
    """Two-hop pairs admitted into the balance coupling as unlabeled rows.

    Candidates share their second endpoint with a labeled sample, have
    positively-linked first endpoints (the coupling condition) and sit at
    directed distance exactly 2. The pool is capped by a seeded subsample to
    keep the shifted operator dense-solvable; pairs coupled to negative samples
    are kept in preference to ones coupled only to positive samples.
    """
    g = products.g_p
    labeled = set(samples.ps) | set(samples.ns)
    nbr_cache = {}

    def neighbors(i):
        if i not in nbr_cache:
            nbr_cache[i] = set(map(int, g.out_neighbors(i))) | set(
                map(int, g.in_neighbors(i))
            )
        return nbr_cache[i]

    def coupled(anchors):
        found = set()
        for i, k in anchors:
            if g.positively_linked(i, k):
                continue
            for j in neighbors(i):
                if j == k or (j, k) in labeled or g.positively_linked(j, k):
                    continue
                if g.distances_from(j, cfg.path_cap, directed=True)[k] == 2:
                    found.add((j, k))
        return found

    from_ns = coupled(samples.ns)
    from_ps = coupled(samples.ps) - from_ns
    rng = np.random.default_rng(stage_seed(cfg.seed, "unlabeled"))

    def capped(pool, budget):
        pool = sorted(pool)
        if len(pool) <= budget:
            return pool
        idx = rng.choice(len(pool), size=budget, replace=False)
        return [pool[i] for i in sorted(idx)]

    keep = capped(from_ns, cfg.max_unlabeled)
    keep += capped(from_ps, cfg.max_unlabeled - len(keep))
    return sorted(keep)


@dataclass
class PreparedTraining:
    """Reusable training state for one (dataset, seed, ns_mode) combination;
    repeated solves only swap hyperparameters."""

    products: DatasetProducts
    samples: SampleSet
    pairs: list                   # PS rows, then NS rows, then unlabeled
    y: np.ndarray                 # labels for the labeled prefix
    ns_weights: np.ndarray        # reliability weights aligned with NS rows
    l: int
    mu: int
    x_std: np.ndarray
    mean: np.ndarray
    div: np.ndarray
    operator: DualOperator
    schema_version: str
    feature_names: tuple
    extractor: FeatureExtractor


def prepare_training(products: DatasetProducts, cfg: RunConfig,
                     ns_mode: str = "refined",
                     samples: SampleSet | None = None) -> PreparedTraining:
    if samples is None:
        samples = build_samples(products, cfg, ns_mode=ns_mode)
    if not samples.ns:
        raise ValueError("no negative samples; nothing to train on")
    if not samples.ps:
        raise ValueError("no positive samples; nothing to train on")
    ps = sorted(samples.ps)
    ns = sorted(samples.ns)
    unlabeled = unlabeled_pairs(products, samples, cfg)
    pairs = ps + ns + unlabeled

    view = signed_view(products.g_p, samples)
    extractor = FeatureExtractor(products.g_p, products.data, view, cap=cfg.path_cap)
    x_raw = extractor.matrix(pairs, threads=cfg.threads)
    x_std, mean, div = standardize(x_raw)

    reg = build_balance_matrix(pairs, products.g_p)
    l = len(ps) + len(ns)
    operator = DualOperator(x_std, l, kernel_spec(cfg), reg.laplacian)

    y = np.concatenate([np.ones(len(ps)), -np.ones(len(ns))])
    ns_weights = np.array([samples.weights[p] for p in ns])
    return PreparedTraining(
        products=products,
        samples=samples,
        pairs=pairs,
        y=y,
        ns_weights=ns_weights,
        l=l,
        mu=len(unlabeled),
        x_std=x_std,
        mean=mean,
        div=div,
        operator=operator,
        schema_version=extractor.schema.version,
        feature_names=extractor.schema.names,
        extractor=extractor,
    )


def cost_caps(prep: PreparedTraining, c_p: float, c_n: float,
              weight_mode: str = "reliability") -> np.ndarray:
    n_ps = prep.l - len(prep.ns_weights)
    c = prep.ns_weights if weight_mode == "reliability" else np.ones_like(prep.ns_weights)
    return np.concatenate([np.full(n_ps, c_p), c_n * c])


def train_prepared(prep: PreparedTraining, cfg: RunConfig,
                   overrides: TrainingOverrides | None = None) -> Model:
    c_n = overrides.c_n if overrides else cfg.c_n
    c_b = overrides.c_b if overrides else cfg.c_b
    weight_mode = overrides.weight_mode if overrides else "reliability"
    s = cost_caps(prep, cfg.c_p, c_n, weight_mode)
    problem = TrainingProblem(
        x=prep.x_std, y=prep.y, s=s, c_b=c_b, kernel=kernel_spec(cfg)
    )
    solution = solve_dual(
        problem,
        tol=cfg.solver_tol,
        max_sweeps=cfg.max_sweeps,
        operator=prep.operator,
    )
    return Model(
        kernel=kernel_spec(cfg),
        alpha=solution.alpha,
        b=solution.b,
        rows=prep.x_std,
        mean=prep.mean,
        div=prep.div,
        schema_version=prep.schema_version,
        feature_names=prep.feature_names,
        hyperparams={
            "c_p": cfg.c_p,
            "c_n": c_n,
            "c_b": c_b,
            "weight_mode": weight_mode,
            "r": cfg.r,
            "ps_ns_ratio": cfg.ps_ns_ratio,
            "seed": cfg.seed,
        },
        stats={
            "objective": solution.objective,
            "kkt_residual": solution.kkt_residual,
            "converged": solution.converged,
            "iterations": solution.iterations,
            "l": prep.l,
            "mu": prep.mu,
            "n_support": int((solution.beta > 1e-10).sum()),
        },
    )


def train(products: DatasetProducts, cfg: RunConfig, ns_mode: str = "refined") -> Model:
    """One-shot training: sample, featurize, solve."""
    return train_prepared(prepare_training(products, cfg, ns_mode=ns_mode), cfg)


def predict_pairs(model: Model, products: DatasetProducts, pairs, cfg: RunConfig,
                  extractor: FeatureExtractor | None = None,
                  samples: SampleSet | None = None):
    """Decision values and labels for arbitrary pairs of the dataset."""
    if extractor is None:
        view = signed_view(products.g_p, samples) if samples is not None else None
        extractor = FeatureExtractor(
            products.g_p, products.data, view, cap=cfg.path_cap
        )
    x = extractor.matrix(list(pairs), threads=cfg.threads)
    return model.predict(x)
