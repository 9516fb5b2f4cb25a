"""Matplotlib figures written next to the CSV outputs.

All functions take plain data (rows, lists, factors) and a file path, draw
with the non-interactive Agg backend and return the path written.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

VARIANT_STYLE = {
    "l0": dict(color="tab:red", marker="o", label=r"$\ell_0$"),
    "l1": dict(color="tab:blue", marker="s", label=r"$\ell_1$"),
    "l2": dict(color="tab:green", marker="^", label=r"$\ell_2$"),
}

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.dpi": 150,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _median_by(rows, key, value):
    groups = defaultdict(list)
    for row in rows:
        v = row.get(value)
        if v not in (None, ""):
            groups[row[key]].append(float(v))
    xs = sorted(groups)
    return xs, [float(np.median(groups[x])) for x in xs]


def plot_sweep(rows, path, x: str = "noise_ratio") -> Path:
    """Four panels: iterations, false positives, false negatives, MSE against `x`.

    Counts and MSE are drawn against both the truth (solid) and the
    observation (dashed).  Each point is the median over seeds.
    """
    rows = [r for r in rows if r.get("status", "ok") == "ok"]
    by_variant = defaultdict(list)
    for r in rows:
        by_variant[r["variant"]].append(r)
    xlabel = "noise ratio" if x == "noise_ratio" else "rank R"
    panels = [
        ("(a) convergence iterations", [("outer_iterations", "-")]),
        ("(b) false positives", [("fp_truth", "-"), ("fp_observation", "--")]),
        ("(c) false negatives", [("fn_truth", "-"), ("fn_observation", "--")]),
        ("(d) mean square error", [("mse_truth", "-"), ("mse_observation", "--")]),
    ]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 4, figsize=(12, 3))
        for ax, (title, series) in zip(axes, panels):
            for variant, vrows in sorted(by_variant.items()):
                style = dict(VARIANT_STYLE.get(variant, {"label": variant}))
                base = style.pop("label")
                for col, ls in series:
                    xs, ys = _median_by(vrows, x, col)
                    if not xs:
                        continue
                    ref = "" if len(series) == 1 else (" vs X" if col.endswith("truth") else " vs O")
                    ax.plot(xs, ys, linestyle=ls, label=base + ref, **style)
            ax.set_title(title)
            ax.set_xlabel(xlabel)
            ax.grid(alpha=0.3)
        axes[0].legend(loc="best")
        axes[1].legend(loc="best")
        return _save(fig, path)


def plot_slice_histogram(counts, path, bins: int = 20, xlabel: str = "errors per slice") -> Path:
    counts = np.asarray(counts)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.hist(counts, bins=bins, color="0.4", edgecolor="white")
        ax.axvline(counts.mean() if counts.size else 0, color="tab:red", linestyle="--",
                   label=f"mean {counts.mean() if counts.size else 0:.2f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("slices")
        ax.legend()
        return _save(fig, path)


def plot_component_nonzero_ratio(f, path, threshold: float = 1e-6) -> Path:
    """Per-component share of nonzero entries in each factor column."""
    ratios = np.array([(m > threshold).mean(axis=0) for m in f])
    r = np.arange(ratios.shape[1])
    width = 0.27
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(4, 0.35 * len(r) + 2), 3))
        for d, name in enumerate("ABC"):
            ax.bar(r + (d - 1) * width, ratios[d], width, label=name)
        ax.set_xlabel("component r")
        ax.set_ylabel("nonzero ratio")
        ax.set_xticks(r)
        ax.legend()
        return _save(fig, path)


def plot_factor_supports(f, path, mode_names=("mode 1", "mode 2", "mode 3")) -> Path:
    """Factor weights per component, one heat map per mode."""
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
        for ax, m, name in zip(axes, f, mode_names):
            im = ax.imshow(m.T, aspect="auto", interpolation="nearest", cmap="Greys")
            ax.set_title(name)
            ax.set_xlabel("index")
            ax.set_ylabel("component r")
            fig.colorbar(im, ax=ax, fraction=0.04)
        return _save(fig, path)


def plot_convergence(trace, path) -> Path:
    outer = [rec.outer for rec in trace.records]
    with plt.rc_context(RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8, 3))
        ax0.semilogy(outer, [max(rec.res_outer, 1e-16) for rec in trace.records], label="outer residual")
        ax0.semilogy(outer, [max(rec.res_inner[-1], 1e-16) for rec in trace.records], label="last inner residual")
        ax0.set_xlabel("outer iteration")
        ax0.legend()
        ax1.plot(outer, [rec.objective for rec in trace.records], color="k")
        ax1.set_xlabel("outer iteration")
        ax1.set_ylabel("error objective")
        return _save(fig, path)
