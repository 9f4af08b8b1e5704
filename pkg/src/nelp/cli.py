"""Command-line surface tying the pipeline together.

Outputs land under ``--out-dir`` in a fixed layout: reports/, models/,
samples/, features/, figures/. Every command is deterministic given its
config, inputs and seed; failures exit nonzero with a JSON error on stderr.
"""

from __future__ import annotations

import csv
import functools
import json
import os
import sys

import click
import numpy as np

from . import analysis, plots
from .config import RunConfig
from .datasets import (
    DatasetBundle,
    ingest as ingest_bundle,
    load_products,
    load_truth,
    signed_from_truth,
    write_bundle,
)
from .evaluation import (
    ablation_table,
    cb_sweep,
    cross_site,
    evaluate_model,
    metrics,
    run_comparison,
)
from .features import write_feature_tsv
from .pipeline import (
    build_samples,
    predict_pairs,
    prepare_training,
    train_prepared,
)
from .sampling import read_sample_tsv
from .solver import Model
from .synth import PlantedModelParams, generate_planted


def _fail(exc: Exception):
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:  # surfaced as machine-readable JSON
            _fail(exc)

    return wrapper


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class Ctx:
    def __init__(self, config_path, seed, threads, out_dir):
        self.cfg = RunConfig.from_file(config_path) if config_path else RunConfig()
        if seed is not None:
            self.cfg = self.cfg.replace(seed=seed)
        if threads is not None:
            self.cfg = self.cfg.replace(threads=threads)
        self.out_dir = out_dir

    def subdir(self, name):
        path = os.path.join(self.out_dir, name)
        os.makedirs(path, exist_ok=True)
        return path


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Run configuration file (key = value lines).")
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--threads", type=int, default=None, help="Worker thread bound.")
@click.option("--out-dir", type=click.Path(file_okay=False), default="out",
              show_default=True, help="Output directory root.")
@click.pass_context
def main(ctx, config_path, seed, threads, out_dir):
    """Predict negative links from positive links and content interactions."""
    try:
        ctx.obj = Ctx(config_path, seed, threads, out_dir)
    except Exception as exc:
        _fail(exc)


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--rating-threshold", type=int, default=None,
              help="Treat opinion values as raw ratings split at this threshold.")
@click.option("--name", default=None, help="Dataset name recorded in the bundle.")
@click.pass_obj
@handle_errors
def ingest(obj, bundle_dir, rating_threshold, name):
    """Normalize a raw bundle: validate, filter, and write canonical files."""
    bundle = DatasetBundle.open(bundle_dir)
    threshold = rating_threshold if rating_threshold is not None else obj.cfg.rating_threshold
    products, truth = ingest_bundle(bundle, rating_threshold=threshold)
    out = os.path.join(obj.out_dir, "bundles", name or products.name)
    written = write_bundle(
        out, name or products.name, products.users, products.g_p, products.data,
        products.posts, truth=truth,
    )
    _write_json(os.path.join(out, "stats.json"), products.stats)
    click.echo(f"normalized bundle written to {written.directory}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
@handle_errors
def analyze(obj, bundle_dir):
    """Diagnostic reports: enemy path lengths, triad census, interaction tests."""
    bundle = DatasetBundle.open(bundle_dir)
    products, truth = ingest_bundle(bundle, rating_threshold=obj.cfg.rating_threshold)
    if not truth:
        raise ValueError("analysis needs ground-truth negative links")
    reports = obj.subdir("reports")
    figures = obj.subdir("figures") if obj.cfg.figures else None

    hist = analysis.enemy_path_distribution(products.g_p, sorted(truth), cap=obj.cfg.path_cap)
    header, rows = hist.csv_rows()
    _write_csv(os.path.join(reports, "enemy_paths.csv"), header, rows)

    signed = signed_from_truth(products.g_p, truth)
    census = analysis.triad_census(signed)
    header, rows = census.csv_rows()
    _write_csv(os.path.join(reports, "triad_census.csv"), header, rows)

    corr = analysis.interaction_link_correlation(
        products.nmat(), sorted(truth), seed=obj.cfg.seed,
        k_max=obj.cfg.k_max, min_pairs_per_k=obj.cfg.min_pairs_per_k,
    )
    header, rows = corr.csv_rows()
    _write_csv(os.path.join(reports, "interaction_ratio.csv"), header, rows)

    _write_json(
        os.path.join(reports, "analysis.json"),
        {
            "dataset": products.name,
            "enemy_paths": hist.to_dict(),
            "triad_census": census.to_dict(),
            "interaction_correlation": corr.to_dict(),
        },
    )
    if figures:
        plots.save_path_histogram(hist, os.path.join(figures, "enemy_paths.png"))
        plots.save_triad_census(census, os.path.join(figures, "triad_census.png"))
        plots.save_ratio_curve(corr, os.path.join(figures, "interaction_ratio.png"))
    click.echo(f"analysis reports written to {reports}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--ns-mode", type=click.Choice(["refined", "seed"]), default="refined",
              show_default=True)
@click.pass_obj
@handle_errors
def sample(obj, bundle_dir, ns_mode):
    """Construct negative and positive training samples."""
    products = load_products(DatasetBundle.open(bundle_dir), obj.cfg.rating_threshold)
    samples = build_samples(products, obj.cfg, ns_mode=ns_mode)
    out = os.path.join(obj.subdir("samples"), f"{products.name}.tsv")
    samples.write_tsv(out, names=products.users.names())
    click.echo(f"{len(samples.ns)} negative and {len(samples.ps)} positive samples -> {out}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--samples-file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Pairs to featurize (sample TSV); defaults to a fresh sampling run.")
@click.pass_obj
@handle_errors
def features(obj, bundle_dir, samples_file):
    """Extract the 45-column feature matrix for sample pairs."""
    products = load_products(DatasetBundle.open(bundle_dir), obj.cfg.rating_threshold)
    if samples_file:
        samples = read_sample_tsv(samples_file, id_of=products.users.id_of)
    else:
        samples = build_samples(products, obj.cfg)
    from .features import FeatureExtractor, signed_view

    pairs = sorted(samples.ps) + sorted(samples.ns)
    extractor = FeatureExtractor(
        products.g_p, products.data, signed_view(products.g_p, samples),
        cap=obj.cfg.path_cap,
    )
    matrix = extractor.matrix(pairs, threads=obj.cfg.threads)
    out = os.path.join(obj.subdir("features"), f"{products.name}.tsv")
    write_feature_tsv(out, pairs, matrix, extractor.schema, names=products.users.names())
    click.echo(f"{matrix.shape[0]} x {matrix.shape[1]} feature matrix -> {out}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--ns-mode", type=click.Choice(["refined", "seed"]), default="refined",
              show_default=True)
@click.pass_obj
@handle_errors
def train(obj, bundle_dir, ns_mode):
    """Train the negative-link predictor and save the model container."""
    products = load_products(DatasetBundle.open(bundle_dir), obj.cfg.rating_threshold)
    prep = prepare_training(products, obj.cfg, ns_mode=ns_mode)
    model = train_prepared(prep, obj.cfg)
    out = os.path.join(obj.subdir("models"), f"{products.name}.json")
    model.save(out)
    click.echo(
        f"model saved to {out} (objective {model.stats['objective']:.4f}, "
        f"kkt {model.stats['kkt_residual']:.2e})"
    )


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--pairs-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="TSV of src/dst pairs to score; defaults to the evaluation universe.")
@click.pass_obj
@handle_errors
def predict(obj, bundle_dir, model_path, pairs_file):
    """Score pairs with a trained model."""
    products = load_products(DatasetBundle.open(bundle_dir), obj.cfg.rating_threshold)
    model = Model.load(model_path)
    if pairs_file:
        pairs = []
        with open(pairs_file, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#") or line.startswith("src\t"):
                    continue
                a, b = line.split("\t")[:2]
                pairs.append((products.users.id_of(a), products.users.id_of(b)))
    else:
        samples = build_samples(products, obj.cfg)
        pairs = sorted(set(samples.ps) | set(samples.ns))
    samples = build_samples(products, obj.cfg)
    dec, labels = predict_pairs(model, products, pairs, obj.cfg, samples=samples)
    out = os.path.join(obj.subdir("reports"), f"predictions_{products.name}.tsv")
    names = products.users.names()
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("src\tdst\tdecision\tlabel\n")
        for (i, j), d, lab in zip(pairs, dec, labels):
            fh.write(f"{names[i]}\t{names[j]}\t{d!r}\t{int(lab):+d}\n")
    click.echo(f"{len(pairs)} predictions -> {out}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--predictions", "predictions_path",
              type=click.Path(exists=True, dir_okay=False), required=True)
@click.pass_obj
@handle_errors
def evaluate(obj, bundle_dir, predictions_path):
    """Score a predictions file against the bundle's ground truth."""
    bundle = DatasetBundle.open(bundle_dir)
    products = load_products(bundle, obj.cfg.rating_threshold)
    truth = load_truth(bundle, products.users)
    preds = {}
    with open(predictions_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#") or line.startswith("src\t"):
                continue
            a, b, _, lab = line.split("\t")[:4]
            preds[(products.users.id_of(a), products.users.id_of(b))] = int(lab)
    universe = set(preds)
    rep = metrics(preds, truth & universe, universe, method="predictions")
    out = os.path.join(obj.subdir("reports"), f"evaluation_{products.name}.json")
    _write_json(out, rep.to_dict())
    click.echo(f"f1 {rep.f1:.4f} precision {rep.precision:.4f} -> {out}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
@handle_errors
def compare(obj, bundle_dir):
    """Full method comparison on one dataset (baselines plus trained models)."""
    bundle = DatasetBundle.open(bundle_dir)
    products = load_products(bundle, obj.cfg.rating_threshold)
    truth = load_truth(bundle, products.users)
    result = run_comparison(products, truth, obj.cfg)
    reports = obj.subdir("reports")
    header, rows = result.csv_rows()
    _write_csv(os.path.join(reports, f"comparison_{products.name}.csv"), header, rows)
    _write_json(os.path.join(reports, f"comparison_{products.name}.json"), result.to_dict())
    if obj.cfg.figures:
        plots.save_comparison(
            result, os.path.join(obj.subdir("figures"), f"comparison_{products.name}.png")
        )
    for r in result.rows:
        click.echo(f"{r.method:>12}  f1 {r.f1:.4f}  precision {r.precision:.4f}")


@main.command(name="cross-site")
@click.argument("train_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("test_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--both-directions", is_flag=True, default=False)
@click.pass_obj
@handle_errors
def cross_site_cmd(obj, train_dir, test_dir, both_directions):
    """Train on one dataset and evaluate on another."""
    bundles = [DatasetBundle.open(train_dir), DatasetBundle.open(test_dir)]
    loaded = []
    for b in bundles:
        products = load_products(b, obj.cfg.rating_threshold)
        loaded.append((products, load_truth(b, products.users)))
    runs = [(0, 1)] + ([(1, 0)] if both_directions else [])
    reports = []
    for a, b in runs:
        rep = cross_site(loaded[a][0], loaded[b][0], loaded[a][1], loaded[b][1], obj.cfg)
        reports.append(rep)
        click.echo(
            f"{rep.params['direction']}: f1 {rep.f1:.4f} precision {rep.precision:.4f}"
        )
    out = os.path.join(obj.subdir("reports"), "cross_site.json")
    _write_json(out, [r.to_dict() for r in reports])
    if obj.cfg.figures:
        plots.save_cross_site(reports, os.path.join(obj.subdir("figures"), "cross_site.png"))


@main.command(name="sweep-cb")
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--values", default=None,
              help="Comma-separated regularization strengths (defaults to the configured sweep).")
@click.pass_obj
@handle_errors
def sweep_cb(obj, bundle_dir, values):
    """Train and evaluate across balance-regularization strengths."""
    bundle = DatasetBundle.open(bundle_dir)
    products = load_products(bundle, obj.cfg.rating_threshold)
    truth = load_truth(bundle, products.users)
    vals = [float(v) for v in values.split(",")] if values else None
    curve = cb_sweep(products, truth, obj.cfg, values=vals)
    reports = obj.subdir("reports")
    _write_csv(
        os.path.join(reports, f"cb_sweep_{products.name}.csv"),
        ["c_b", "f1", "precision", "recall"],
        [[cb, rep.f1, rep.precision, rep.recall] for cb, rep in curve],
    )
    _write_json(
        os.path.join(reports, f"cb_sweep_{products.name}.json"),
        [{"c_b": cb, **rep.to_dict()} for cb, rep in curve],
    )
    if obj.cfg.figures:
        plots.save_cb_sweep(
            curve, os.path.join(obj.subdir("figures"), f"cb_sweep_{products.name}.png")
        )
    for cb, rep in curve:
        click.echo(f"c_b {cb:<8g} f1 {rep.f1:.4f} precision {rep.precision:.4f}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
@handle_errors
def ablate(obj, bundle_dir):
    """Component analysis: switch off cost asymmetry, weighting, and coupling."""
    bundle = DatasetBundle.open(bundle_dir)
    products = load_products(bundle, obj.cfg.rating_threshold)
    truth = load_truth(bundle, products.users)
    rows = ablation_table(products, truth, obj.cfg)
    reports = obj.subdir("reports")
    _write_csv(
        os.path.join(reports, f"ablation_{products.name}.csv"),
        ["variant", "c_n", "weight_mode", "c_b", "f1", "precision", "recall"],
        [
            [r.method, r.params["c_n"], r.params["weight_mode"], r.params["c_b"],
             r.f1, r.precision, r.recall]
            for r in rows
        ],
    )
    _write_json(
        os.path.join(reports, f"ablation_{products.name}.json"),
        [r.to_dict() for r in rows],
    )
    if obj.cfg.figures:
        plots.save_ablation(
            rows, os.path.join(obj.subdir("figures"), f"ablation_{products.name}.png")
        )
    for r in rows:
        click.echo(f"{r.method:>16}  f1 {r.f1:.4f}  precision {r.precision:.4f}")


@main.command()
@click.option("--users", "n_users", type=int, default=2000, show_default=True)
@click.option("--name", default="planted", show_default=True)
@click.option("--params-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file overriding generator parameters.")
@click.pass_obj
@handle_errors
def generate(obj, n_users, name, params_file):
    """Generate a synthetic benchmark bundle with known ground truth."""
    overrides = {}
    if params_file:
        with open(params_file, encoding="utf-8") as fh:
            overrides = json.load(fh)
    overrides.setdefault("n_users", n_users)
    params = PlantedModelParams(**overrides)
    out = os.path.join(obj.out_dir, "bundles", name)
    bundle = generate_planted(params, seed=obj.cfg.seed, out_dir=out, name=name)
    click.echo(f"planted bundle written to {bundle.directory}")


if __name__ == "__main__":
    main()
