"""Evaluation: precision/recall/F1 with the negative-link class as target, the
baseline predictors, and the comparison, cross-site, sweep and ablation
harnesses."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .datasets import DatasetProducts
from .graph import NegativeInteractionMatrix, PositiveNetwork
from .pipeline import (
    build_samples,
    predict_pairs,
    prepare_training,
    sampling_config,
    stage_seed,
    train_prepared,
)
from .sampling import SampleSet, construct_negative_samples
from .solver import Model, TrainingOverrides, ablation_grid

log = logging.getLogger(__name__)

METHOD_ORDER = ("random", "sPath", "negIn", "negInS", "nelp-negin", "nelp")


@dataclass
class ConfusionMatrix:
    """Counts with the negative-link class (-1) as target: tp is predicted -1
    and truly -1."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass
class MetricsReport:
    method: str
    precision: float
    recall: float
    f1: float
    confusion: ConfusionMatrix
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "method": self.method,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": self.confusion.to_dict(),
            "params": self.params,
        }


def metrics(predictions: dict, truth, universe, method: str = "",
            params: dict | None = None) -> MetricsReport:
    """Score labeled pairs against ground truth over an explicit universe.

    ``predictions`` must cover the universe; truth edges outside the universe
    are rejected so recall denominators stay comparable across methods.
    """
    universe = set(universe)
    truth = set(truth)
    missing = universe - predictions.keys()
    if missing:
        raise ValueError(f"predictions missing for {len(missing)} universe pairs")
    outside = truth - universe
    if outside:
        raise ValueError(f"{len(outside)} truth edges fall outside the universe")
    cm = ConfusionMatrix()
    for pair in universe:
        predicted_neg = predictions[pair] == -1
        is_neg = pair in truth
        if predicted_neg and is_neg:
            cm.tp += 1
        elif predicted_neg:
            cm.fp += 1
        elif is_neg:
            cm.fn += 1
        else:
            cm.tn += 1
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsReport(
        method=method,
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=cm,
        params=params or {},
    )


def baseline_random(universe, rate: float, seed: int) -> dict:
    """Label each pair -1 independently with the given probability."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = sorted(universe)
    draws = rng.random(len(pairs)) < rate
    return {p: (-1 if hit else 1) for p, hit in zip(pairs, draws)}


def baseline_spath(universe, g_p: PositiveNetwork, length: int, cap: int = 6) -> dict:
    """Label -1 exactly the pairs whose directed shortest path length equals L."""
    cap = max(cap, length)
    out = {}
    by_src = {}
    for i, j in universe:
        by_src.setdefault(i, []).append(j)
    for i in sorted(by_src):
        dist = g_p.distances_from(i, cap, directed=True)
        for j in by_src[i]:
            out[(i, j)] = -1 if dist[j] == length else 1
    return out


def baseline_negin(universe, nmat: NegativeInteractionMatrix) -> dict:
    """Label -1 the pairs with any negative interactions."""
    hot = nmat.nonzero_pairs()
    return {p: (-1 if p in hot else 1) for p in universe}


def baseline_negins(universe, g_p: PositiveNetwork, nmat: NegativeInteractionMatrix,
                    cfg: RunConfig, ns: SampleSet | None = None) -> dict:
    """Label -1 the pairs surviving the status-theory refinement of the
    interaction seeds (including closure additions)."""
    if ns is None:
        ns = construct_negative_samples(g_p, nmat, sampling_config(cfg))
    hot = set(ns.ns)
    return {p: (-1 if p in hot else 1) for p in universe}


def build_universe(products: DatasetProducts, truth, samples: SampleSet,
                   nmat: NegativeInteractionMatrix, cfg: RunConfig) -> list:
    """Evaluation universe: interaction-scope pairs, refined negative samples,
    all ground-truth negatives, the positive sample pool, and a seeded sample of
    extra missing pairs. Never all m(m-1) pairs."""
    g = products.g_p
    universe = set()
    universe |= {p for p in nmat.nonzero_pairs() if not g.has_edge(*p)}
    universe |= set(samples.ns)
    universe |= {p for p in truth if not g.has_edge(*p)}
    universe |= set(samples.ps)
    dropped_truth = len(truth) - len({p for p in truth if not g.has_edge(*p)})
    if dropped_truth:
        log.warning(
            "%d truth negatives coincide with positive links; excluded from universe",
            dropped_truth,
        )
    extra = cfg.eval_extra_missing
    if extra > 0:
        rng = np.random.default_rng(stage_seed(cfg.seed, "eval-universe"))
        m = products.m
        available = m * (m - 1) - g.n_edges - len(universe)
        target = min(extra, max(available, 0))
        guard = 0
        while target > 0 and guard < 100 * extra + 1000:
            i = int(rng.integers(m))
            j = int(rng.integers(m))
            guard += 1
            if i == j or g.has_edge(i, j) or (i, j) in universe:
                continue
            universe.add((i, j))
            target -= 1
    return sorted(universe)


@dataclass
class ComparisonResult:
    dataset: str
    rows: list                    # MetricsReport in METHOD_ORDER
    universe_size: int
    truth_size: int
    metadata: dict = field(default_factory=dict)

    def row(self, method: str) -> MetricsReport:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "universe_size": self.universe_size,
            "truth_size": self.truth_size,
            "rows": [r.to_dict() for r in self.rows],
            "metadata": self.metadata,
        }

    def csv_rows(self):
        header = ["method", "f1", "precision", "recall"]
        rows = [[r.method, r.f1, r.precision, r.recall] for r in self.rows]
        return header, rows


def _best_spath(universe, truth, g_p, cfg: RunConfig) -> MetricsReport:
    best = None
    for length in cfg.spath_lengths:
        preds = baseline_spath(universe, g_p, length, cap=cfg.path_cap)
        rep = metrics(preds, truth, universe, method="sPath", params={"L": length})
        if best is None or rep.f1 > best.f1:
            best = rep
    return best


def run_comparison(products: DatasetProducts, truth, cfg: RunConfig,
                   models: dict | None = None) -> ComparisonResult:
    """Score every baseline plus the trained predictors on one shared universe.

    ``models`` may carry pre-trained "nelp"/"nelp-negin" models to reuse;
    freshly trained ones are stored back into it when provided.
    """
    nmat = products.nmat()
    refined = build_samples(products, cfg, ns_mode="refined")
    truth = {tuple(p) for p in truth}
    universe = build_universe(products, truth, refined, nmat, cfg)
    in_universe = set(universe)
    truth_eval = truth & in_universe

    prevalence = len(truth_eval) / len(universe) if universe else 0.0
    rows = []
    rows.append(
        metrics(
            baseline_random(universe, prevalence, stage_seed(cfg.seed, "random-baseline")),
            truth_eval,
            universe,
            method="random",
            params={"rate": prevalence},
        )
    )
    rows.append(_best_spath(universe, truth_eval, products.g_p, cfg))
    rows.append(metrics(baseline_negin(universe, nmat), truth_eval, universe, method="negIn"))
    rows.append(
        metrics(
            baseline_negins(universe, products.g_p, nmat, cfg, ns=refined),
            truth_eval,
            universe,
            method="negInS",
        )
    )

    models = models if models is not None else {}
    for method, ns_mode in (("nelp-negin", "seed"), ("nelp", "refined")):
        if method in models:
            model, prep = models[method]
        else:
            samples = refined if ns_mode == "refined" else build_samples(products, cfg, ns_mode="seed")
            prep = prepare_training(products, cfg, ns_mode=ns_mode, samples=samples)
            model = train_prepared(prep, cfg)
            models[method] = (model, prep)
        dec, labels = predict_pairs(
            model, products, universe, cfg, extractor=prep.extractor
        )
        preds = {p: int(lab) for p, lab in zip(universe, labels)}
        rows.append(
            metrics(preds, truth_eval, universe, method=method,
                    params=dict(model.hyperparams))
        )

    seed_ns = set()
    if "nelp-negin" in models:
        seed_ns = set(models["nelp-negin"][1].samples.ns)
    audit = {
        "negin_pairs": len({p for p in nmat.nonzero_pairs() if not products.g_p.has_edge(*p)}),
        "negins_pairs": len(refined.ns),
        "removed_by_status": len(
            {p for p in nmat.nonzero_pairs() if not products.g_p.has_edge(*p)}
            - set(refined.ns)
        ),
        "added_by_closure": len(
            [p for p in refined.ns if refined.provenance[p] == "closure"]
        ),
    }
    order = {m: k for k, m in enumerate(METHOD_ORDER)}
    rows.sort(key=lambda r: order[r.method])
    return ComparisonResult(
        dataset=products.name,
        rows=rows,
        universe_size=len(universe),
        truth_size=len(truth_eval),
        metadata={
            "seed": cfg.seed,
            "config_hash": cfg.config_hash(),
            "universe": "interaction-scope + NS + truth + PS + sampled-missing",
            "truth_outside_universe": len(truth - in_universe),
            "audit": audit,
        },
    )


def cross_site(train_products: DatasetProducts, test_products: DatasetProducts,
               train_truth, test_truth, cfg: RunConfig) -> MetricsReport:
    """Train on one dataset, evaluate on the other; the feature schema is
    identical by construction."""
    prep = prepare_training(train_products, cfg, ns_mode="refined")
    model = train_prepared(prep, cfg)

    nmat = test_products.nmat()
    test_samples = build_samples(test_products, cfg, ns_mode="refined")
    test_truth = {tuple(p) for p in test_truth}
    universe = build_universe(test_products, test_truth, test_samples, nmat, cfg)
    truth_eval = test_truth & set(universe)
    dec, labels = predict_pairs(
        model, test_products, universe, cfg, samples=test_samples
    )
    preds = {p: int(lab) for p, lab in zip(universe, labels)}
    rep = metrics(
        preds,
        truth_eval,
        universe,
        method="nelp",
        params={
            "direction": f"{train_products.name}->{test_products.name}",
            "train_dataset": train_products.name,
            "test_dataset": test_products.name,
            **model.hyperparams,
        },
    )
    return rep


def evaluate_model(model: Model, products: DatasetProducts, truth,
                   cfg: RunConfig, universe=None,
                   samples: SampleSet | None = None) -> MetricsReport:
    """Score a trained model over a universe (built fresh when not supplied)."""
    truth = {tuple(p) for p in truth}
    if universe is None:
        if samples is None:
            samples = build_samples(products, cfg, ns_mode="refined")
        universe = build_universe(products, truth, samples, products.nmat(), cfg)
    truth_eval = truth & set(universe)
    dec, labels = predict_pairs(model, products, universe, cfg, samples=samples)
    preds = {p: int(lab) for p, lab in zip(universe, labels)}
    return metrics(preds, truth_eval, universe, method="nelp",
                   params=dict(model.hyperparams))


def cb_sweep(products: DatasetProducts, truth, cfg: RunConfig,
             values=None) -> list:
    """One train/evaluate cycle per balance-coupling strength, sharing samples,
    features and universe across runs."""
    values = list(cfg.cb_sweep_values if values is None else values)
    prep = prepare_training(products, cfg, ns_mode="refined")
    nmat = products.nmat()
    truth = {tuple(p) for p in truth}
    universe = build_universe(products, truth, prep.samples, nmat, cfg)
    truth_eval = truth & set(universe)
    x_universe = prep.extractor.matrix(universe, threads=cfg.threads)
    curve = []
    for c_b in values:
        model = train_prepared(
            prep, cfg, TrainingOverrides(cfg.c_n, "reliability", float(c_b))
        )
        dec, labels = model.predict(x_universe)
        preds = {p: int(lab) for p, lab in zip(universe, labels)}
        rep = metrics(preds, truth_eval, universe, method="nelp",
                      params={"c_b": float(c_b)})
        curve.append((float(c_b), rep))
    return curve


def ablation_table(products: DatasetProducts, truth, cfg: RunConfig) -> list:
    """The component-analysis rows: full model, each component off, all off."""
    prep = prepare_training(products, cfg, ns_mode="refined")
    nmat = products.nmat()
    truth = {tuple(p) for p in truth}
    universe = build_universe(products, truth, prep.samples, nmat, cfg)
    truth_eval = truth & set(universe)
    x_universe = prep.extractor.matrix(universe, threads=cfg.threads)
    rows = []
    for name, overrides in ablation_grid(cfg.c_n, cfg.c_b):
        model = train_prepared(prep, cfg, overrides)
        dec, labels = model.predict(x_universe)
        preds = {p: int(lab) for p, lab in zip(universe, labels)}
        rep = metrics(
            preds,
            truth_eval,
            universe,
            method=name,
            params={
                "c_n": overrides.c_n,
                "weight_mode": overrides.weight_mode,
                "c_b": overrides.c_b,
            },
        )
        rows.append(rep)
    return rows
