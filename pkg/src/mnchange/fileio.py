"""Delimited and JSON file formats used by the command-line tools.

Sample matrices are headerless CSV with 17 significant digits, so a
write/read round trip is exact for doubles.  Change sets are CSV with a
"u,v" header and 1-based indices, u > v.  Structured outputs are JSON with a
schema_version field, written with sorted keys so reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
import warnings

import numpy as np

from .features import factor_pairs

SCHEMA_VERSION = 1


def write_samples(path, X: np.ndarray) -> None:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"sample matrix must be 2-d, got shape {X.shape}")
    np.savetxt(path, X, fmt="%.17g", delimiter=",")


def read_samples(path) -> np.ndarray:
    with warnings.catch_warnings():
        # an empty file warns before we can raise the clearer error below
        warnings.simplefilter("ignore", UserWarning)
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    if X.size == 0:
        raise ValueError(f"no rows in {path}")
    return X


def write_truth(path, edges) -> None:
    """Write a set of changed edges (u, v), u > v, 1-based, sorted."""
    rows = sorted(edges)
    for u, v in rows:
        if not u > v >= 1:
            raise ValueError(f"edge ({u}, {v}) must satisfy u > v >= 1")
    with open(path, "w") as fh:
        fh.write("u,v\n")
        for u, v in rows:
            fh.write(f"{u},{v}\n")


def read_truth(path) -> set:
    edges = set()
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "u,v":
            raise ValueError(f"expected header 'u,v' in {path}, got {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u_s, v_s = line.split(",")
            u, v = int(u_s), int(v_s)
            if not u > v >= 1:
                raise ValueError(f"edge ({u}, {v}) in {path} must satisfy u > v >= 1")
            edges.add((u, v))
    return edges


def parse_grid_spec(text: str) -> np.ndarray:
    """Parse a lambda2 grid spec "log:lo:hi:count" into a descending grid."""
    parts = text.split(":")
    if len(parts) != 4 or parts[0] != "log":
        raise ValueError(f"grid spec must look like 'log:lo:hi:count', got {text!r}")
    lo, hi = float(parts[1]), float(parts[2])
    count = int(parts[3])
    if lo <= 0 or hi <= 0:
        raise ValueError("grid bounds must be positive")
    if count < 1:
        raise ValueError("grid count must be >= 1")
    if count > 1 and not lo < hi:
        raise ValueError("grid needs lo < hi when count > 1")
    return np.logspace(math.log10(hi), math.log10(lo), count)


def write_path_csv(path, reg_path) -> None:
    """One row per (lambda2, factor): lambda2,u,v,group_norm in grid order."""
    pairs = factor_pairs(reg_path.d)
    with open(path, "w") as fh:
        fh.write("lambda2,u,v,group_norm\n")
        for i, lam2 in enumerate(reg_path.lambda2_grid):
            for t, (u, v) in enumerate(pairs):
                fh.write(f"{lam2:.17g},{u},{v},{reg_path.group_norms[i, t]:.17g}\n")


def read_path_csv(path):
    """Parse a path CSV back into (lambdas in file order, per-lambda norm dicts)."""
    lambdas = []
    per_lambda = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "lambda2,u,v,group_norm":
            raise ValueError(f"unexpected path CSV header in {path}: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            lam_s, u_s, v_s, norm_s = line.split(",")
            lam = float(lam_s)
            if not lambdas or lam != lambdas[-1]:
                lambdas.append(lam)
                per_lambda.append({})
            per_lambda[-1][(int(u_s), int(v_s))] = float(norm_s)
    if not lambdas:
        raise ValueError(f"no rows in {path}")
    return np.asarray(lambdas), per_lambda


def write_timing_csv(path, reg_path) -> None:
    with open(path, "w") as fh:
        fh.write("lambda2,seconds,converged,iterations,route\n")
        for i, lam2 in enumerate(reg_path.lambda2_grid):
            fit = reg_path.fits[i]
            conv = int(fit.converged) if fit is not None else 0
            iters = fit.iterations if fit is not None else -1
            fh.write(f"{lam2:.17g},{reg_path.seconds[i]:.9g},{conv},{iters},{reg_path.route}\n")


def write_bench_csv(path, rows) -> None:
    """rows: iterable of dicts with keys d, route, seconds, n_lambda2."""
    with open(path, "w") as fh:
        fh.write("d,route,seconds,n_lambda2\n")
        for r in rows:
            fh.write(f"{r['d']},{r['route']},{r['seconds']:.9g},{r['n_lambda2']}\n")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def fit_to_dict(fit) -> dict:
    """JSON-ready summary of a fit: diagnostics, group norms, nonzero blocks."""
    theta = fit.theta
    pairs = factor_pairs(theta.d)
    norms = theta.group_norms()
    groups = [{"u": u, "v": v, "norm": float(norms[t])} for t, (u, v) in enumerate(pairs)]
    nonzero = []
    for t, (u, v) in enumerate(pairs):
        if norms[t] > 0.0:
            nonzero.append({"u": u, "v": v,
                            "coefficients": [float(c) for c in theta.block(u, v)]})
    return {
        "schema_version": SCHEMA_VERSION,
        "basis": {"family": theta.spec.family, "k": theta.spec.k},
        "d": theta.d,
        "lambda1": fit.lambda1,
        "lambda2": fit.lambda2,
        "route": fit.route,
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "objective_value": float(fit.objective_value),
        "stationarity": float(fit.stationarity),
        "num_nonzero_edges": sum(1 for t, (u, v) in enumerate(pairs)
                                 if u != v and norms[t] > 0.0),
        "groups": groups,
        "nonzero_blocks": nonzero,
    }
