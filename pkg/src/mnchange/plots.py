"""Figure rendering for the command-line reports.

All plotting stays in this module so the evaluation code remains free of
matplotlib; every function writes a PNG and returns nothing.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_path(lambdas, per_lambda_norms, truth=None, selected_lambda2=None,
              out_png="path.png") -> None:
    """Group-norm trajectories of the pairwise factors along the lambda2 grid.

    lambdas: (m,) grid values; per_lambda_norms: list of m dicts mapping
    (u, v) to the group norm.  Truly changed edges are drawn on top in color.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    edges = sorted({e for d in per_lambda_norms for e in d if e[0] != e[1]})
    truth = set() if truth is None else set(truth)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for e in edges:
        ys = np.array([d.get(e, np.nan) for d in per_lambda_norms])
        if e in truth:
            ax.plot(lambdas, ys, color="tab:red", lw=1.4, alpha=0.9, zorder=3)
        else:
            ax.plot(lambdas, ys, color="0.65", lw=0.7, alpha=0.7, zorder=2)
    if selected_lambda2 is not None:
        ax.axvline(selected_lambda2, color="tab:blue", ls="--", lw=1.0,
                   label=f"selected $\\lambda_2$ = {selected_lambda2:.4g}")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xscale("log")
    ax.set_xlabel(r"$\lambda_2$")
    ax.set_ylabel("group norm")
    if truth:
        ax.set_title("changed edges in red, unchanged in gray", fontsize=9)
    fig.tight_layout()
    fig.savefig(out_png, dpi=130)
    plt.close(fig)


def plot_pr(runs, out_png="pr.png", mean_band=None) -> None:
    """Precision-recall points per run, optionally with a mean +/- stderr band.

    runs: list of (label, recalls, precisions); mean_band: optional tuple
    (recall_grid, mean_precision, stderr).
    """
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    for label, rec, prec in runs:
        order = np.argsort(rec, kind="stable")
        ax.plot(np.asarray(rec)[order], np.asarray(prec)[order], marker="o",
                ms=3, lw=1.0, alpha=0.8 if mean_band is None else 0.35,
                label=label if mean_band is None else None)
    if mean_band is not None:
        grid, mean, err = mean_band
        ax.plot(grid, mean, color="tab:red", lw=1.8, label="mean")
        ax.fill_between(grid, np.asarray(mean) - np.asarray(err),
                        np.asarray(mean) + np.asarray(err),
                        color="tab:red", alpha=0.2, label="+/- stderr")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    if mean_band is not None or len(runs) <= 6:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=130)
    plt.close(fig)


def plot_timing(rows, out_png="bench.png") -> None:
    """Total path wall time per route against dimension.

    rows: iterable of dicts with keys d, route, seconds.
    """
    by_route = {}
    for r in rows:
        by_route.setdefault(r["route"], []).append((r["d"], r["seconds"]))
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for route, pts in sorted(by_route.items()):
        pts = sorted(pts)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=route)
    ax.set_xlabel("d")
    ax.set_ylabel("path wall time (s)")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_png, dpi=130)
    plt.close(fig)
