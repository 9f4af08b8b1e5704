"""Figure rendering for report outputs. Every figure lands next to the CSV it
illustrates; nothing here is interactive."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIG_SIZE = (6.4, 4.0)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_path_histogram(report, path):
    """Bar chart of the enemy shortest-path length distribution."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    labels = list(report.counts.keys())
    ratios = [report.ratios[k] for k in labels]
    ax.bar(range(len(labels)), ratios, color="#4878d0")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("shortest path length in the positive network")
    ax.set_ylabel("ratio of negative links")
    ax.set_ylim(0, 1)
    return _finish(fig, path)


def save_triad_census(report, path):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    combos = list(report.combo_counts.keys())
    counts = [report.combo_counts[c] for c in combos]
    total = max(report.total, 1)
    ax.bar(range(len(combos)), [c / total for c in counts], color="#4878d0")
    ax.set_xticks(range(len(combos)))
    ax.set_xticklabels(combos)
    ax.set_ylabel("triad ratio")
    title = []
    if report.balanced_ratio is not None:
        title.append(f"balanced {report.balanced_ratio:.2%}")
    if report.status_ratio is not None:
        title.append(f"status-satisfying {report.status_ratio:.2%}")
    ax.set_title(", ".join(title))
    return _finish(fig, path)


def save_ratio_curve(report, path):
    """Negative-link ratio against the interaction-count threshold K."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ks = [k for k, _, _, _ in report.ratio_curve]
    ratios = [r for _, _, _, r in report.ratio_curve]
    ax.plot(ks, ratios, marker="o", color="#4878d0", label="pairs with >= K interactions")
    ax.axhline(report.baseline_ratio, color="#d65f5f", linestyle="--",
               label="random pairs")
    ax.set_xlabel("negative interaction threshold K")
    ax.set_ylabel("ratio with negative links")
    ax.legend()
    return _finish(fig, path)


def save_comparison(result, path):
    """Grouped bars of F1 and precision per method."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    methods = [r.method for r in result.rows]
    x = range(len(methods))
    width = 0.38
    ax.bar([i - width / 2 for i in x], [r.f1 for r in result.rows], width,
           label="F1", color="#4878d0")
    ax.bar([i + width / 2 for i in x], [r.precision for r in result.rows], width,
           label="precision", color="#ee854a")
    ax.set_xticks(list(x))
    ax.set_xticklabels(methods, rotation=20)
    ax.set_ylabel("score")
    ax.set_title(f"negative link prediction on {result.dataset}")
    ax.legend()
    return _finish(fig, path)


def save_cb_sweep(curve, path):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    xs = [cb for cb, _ in curve]
    ax.plot(xs, [rep.f1 for _, rep in curve], marker="o", label="F1", color="#4878d0")
    ax.plot(xs, [rep.precision for _, rep in curve], marker="s",
            label="precision", color="#ee854a")
    ax.set_xscale("symlog", linthresh=1e-3)
    ax.set_xlabel("balance regularization strength")
    ax.set_ylabel("score")
    ax.legend()
    return _finish(fig, path)


def save_ablation(rows, path):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    names = [r.method for r in rows]
    x = range(len(names))
    width = 0.38
    ax.bar([i - width / 2 for i in x], [r.f1 for r in rows], width,
           label="F1", color="#4878d0")
    ax.bar([i + width / 2 for i in x], [r.precision for r in rows], width,
           label="precision", color="#ee854a")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20)
    ax.set_ylabel("score")
    ax.set_title("component analysis")
    ax.legend()
    return _finish(fig, path)


def save_cross_site(reports, path):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    names = [r.params.get("direction", r.method) for r in reports]
    x = range(len(names))
    width = 0.38
    ax.bar([i - width / 2 for i in x], [r.f1 for r in reports], width,
           label="F1", color="#4878d0")
    ax.bar([i + width / 2 for i in x], [r.precision for r in reports], width,
           label="precision", color="#ee854a")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20)
    ax.set_ylabel("score")
    ax.legend()
    return _finish(fig, path)
