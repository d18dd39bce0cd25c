"""Command-line interface.

Subcommands:
  generate    synthetic sample pairs (gaussian, power-transformed, or quartic)
  fit         one fit at fixed (lambda1, lambda2), JSON report
  path        regularization path with optional hold-out basis selection
  eval-pr     precision-recall of one or more path CSVs against a truth file
  bench-dual  primal-vs-dual wall-time comparison over growing dimension
  permtest    permutation stability screen for detected changes

Relative output paths are resolved under $MNCHANGE_OUT_DIR when that variable
is set; input paths are never rewritten.  A config file of key=value lines
(keys match the long option names) overrides command-line flags.  Reruns with
the same inputs rewrite outputs byte-identically except for wall-time fields.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .evaluation import (
    average_pr_curves,
    permutation_test,
    pr_from_path_data,
    regularization_path,
    select_by_holl,
)
from .features import BasisSpec, num_factors
from .fileio import (
    SCHEMA_VERSION,
    fit_to_dict,
    parse_grid_spec,
    read_path_csv,
    read_samples,
    read_truth,
    write_bench_csv,
    write_json,
    write_path_csv,
    write_samples,
    write_timing_csv,
    write_truth,
)
from .ratio import FeatureCache, holl
from .sampling import (
    diamond_log_density_unnorm,
    make_diamond_pair,
    make_gaussian_pair,
    npn_transform,
    sample_gaussian_mn,
    slice_sample,
)
from .solvers import SolveConfig, auto_route, solve_dual, solve_primal

OUT_DIR_ENV = "MNCHANGE_OUT_DIR"


class CliError(Exception):
    """User-facing validation failure; maps to a nonzero exit."""


def _resolve_out(path: str) -> str:
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _resolve_out_dir(path: str) -> str:
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    os.makedirs(path, exist_ok=True)
    return path


def _require_inputs(*paths) -> None:
    for p in paths:
        if not os.path.isfile(p):
            raise CliError(f"input file not found: {p}")


def _apply_config(ns: argparse.Namespace) -> None:
    """Override parsed flags with key=value lines from --config."""
    if not getattr(ns, "config", None):
        return
    _require_inputs(ns.config)
    with open(ns.config) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{ns.config}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            dest = key.replace("-", "_")
            if not hasattr(ns, dest) or dest in ("config", "func"):
                raise CliError(f"{ns.config}:{lineno}: unknown option {key!r}")
            current = getattr(ns, dest)
            try:
                if isinstance(current, bool):
                    value_l = value.lower()
                    if value_l in ("1", "true", "yes", "on"):
                        converted = True
                    elif value_l in ("0", "false", "no", "off"):
                        converted = False
                    else:
                        raise ValueError(f"not a boolean: {value!r}")
                elif isinstance(current, int):
                    converted = int(value)
                elif isinstance(current, float):
                    converted = float(value)
                else:
                    converted = value
            except ValueError as exc:
                raise CliError(f"{ns.config}:{lineno}: bad value for {key}: {exc}") from exc
            setattr(ns, dest, converted)


def _parse_k_list(text: str) -> list:
    try:
        ks = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise CliError(f"bad degree list {text!r}: {exc}") from exc
    if not ks:
        raise CliError("at least one basis degree is required")
    return ks


def _make_specs(family: str, k_text: str) -> list:
    try:
        return [BasisSpec(family, k) for k in _parse_k_list(k_text)]
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _load_pair(ns):
    _require_inputs(ns.p_csv, ns.q_csv)
    Xp = read_samples(ns.p_csv)
    Xq = read_samples(ns.q_csv)
    if Xp.shape[1] != Xq.shape[1]:
        raise CliError(
            f"dimension mismatch: {ns.p_csv} has d={Xp.shape[1]}, {ns.q_csv} has d={Xq.shape[1]}")
    return Xp, Xq


def _solve_config(ns, lambda1: float, lambda2: float, warm=None) -> SolveConfig:
    try:
        return SolveConfig(lambda1=lambda1, lambda2=lambda2, max_iters=ns.max_iters,
                           grad_tol=ns.grad_tol, warm_start=warm)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


# generate --------------------------------------------------------------------

def cmd_generate(ns) -> None:
    if ns.d < 2:
        raise CliError("need d >= 2")
    if ns.n < 1:
        raise CliError("need n >= 1")
    s_struct, s_p, s_q = (int(x) for x in np.random.SeedSequence(ns.seed).generate_state(3))
    if ns.kind in ("gaussian", "npn"):
        try:
            pair = make_gaussian_pair(ns.d, ns.sparsity, ns.changes, ns.delta, s_struct)
        except (ValueError, RuntimeError) as exc:
            raise CliError(str(exc)) from exc
        Xp = sample_gaussian_mn(pair.theta_p, ns.n, s_p)
        Xq = sample_gaussian_mn(pair.theta_q, ns.n, s_q)
        if ns.kind == "npn":
            if ns.power < 1:
                raise CliError("need power >= 1")
            Xp = npn_transform(Xp, 1.0 / ns.power)
            Xq = npn_transform(Xq, 1.0 / ns.power)
        truth = pair.changed_edges
    else:
        try:
            spec_p, spec_q, truth = make_diamond_pair(ns.d, ns.sparsity_p, ns.sparsity_q, s_struct)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        x0 = np.zeros(ns.d)
        Xp = slice_sample(lambda x: diamond_log_density_unnorm(x, spec_p), x0, ns.n,
                          s_p, burn_in=ns.burn_in, thin=ns.thin)
        Xq = slice_sample(lambda x: diamond_log_density_unnorm(x, spec_q), x0, ns.n,
                          s_q, burn_in=ns.burn_in, thin=ns.thin)
    out_p = _resolve_out(ns.out_p)
    out_q = _resolve_out(ns.out_q)
    out_truth = _resolve_out(ns.out_truth)
    write_samples(out_p, Xp)
    write_samples(out_q, Xq)
    write_truth(out_truth, truth)
    print(f"wrote {out_p} and {out_q} ({ns.n} x {ns.d} each), "
          f"{len(truth)} changed edges -> {out_truth}")


# fit -------------------------------------------------------------------------

def _resolve_route(route: str, lambda1: float, spec: BasisSpec, d: int, n_q: int) -> str:
    if route == "auto":
        return auto_route(lambda1, num_factors(d) * spec.block_dim, n_q)
    if route == "dual" and lambda1 <= 0:
        raise CliError("route=dual requires lambda1 > 0")
    return route


def cmd_fit(ns) -> None:
    Xp, Xq = _load_pair(ns)
    specs = _make_specs(ns.basis, ns.k)
    if len(specs) != 1:
        raise CliError("fit takes a single basis degree")
    spec = specs[0]
    route = _resolve_route(ns.route, ns.lambda1, spec, Xp.shape[1], Xq.shape[0])
    config = _solve_config(ns, ns.lambda1, ns.lambda2)
    if route == "dual":
        _, fit = solve_dual(Xp, Xq, spec, config)
    else:
        fit = solve_primal(Xp, Xq, spec, config)
    out = _resolve_out(ns.out)
    write_json(out, fit_to_dict(fit))
    print(f"route={fit.route} converged={fit.converged} iterations={fit.iterations} "
          f"objective={fit.objective_value:.6g} "
          f"nonzero_edges={fit_to_dict(fit)['num_nonzero_edges']} -> {out}")


# path ------------------------------------------------------------------------

def _per_lambda_dicts(path_obj):
    from .features import factor_pairs

    pairs = factor_pairs(path_obj.d)
    out = []
    for i in range(path_obj.lambda2_grid.size):
        out.append({pairs[t]: float(path_obj.group_norms[i, t]) for t in range(len(pairs))})
    return out


def cmd_path(ns) -> None:
    Xp, Xq = _load_pair(ns)
    specs = _make_specs(ns.basis, ns.k)
    try:
        grid = parse_grid_spec(ns.grid)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if ns.route == "dual" and ns.lambda1 <= 0:
        raise CliError("route=dual requires lambda1 > 0")
    out_dir = _resolve_out_dir(ns.out_dir)
    config = _solve_config(ns, ns.lambda1, 0.0)
    truth = None
    if ns.truth:
        _require_inputs(ns.truth)
        truth = read_truth(ns.truth)

    selection = None
    if ns.holdout_fraction == 0.0:
        if len(specs) != 1:
            raise CliError("basis selection across degrees needs --holdout-fraction > 0")
        spec = specs[0]
        fit_p, fit_q = Xp, Xq
    else:
        if not 0.0 < ns.holdout_fraction < 1.0:
            raise CliError("holdout fraction must lie in [0, 1)")
        rng = np.random.default_rng(np.random.SeedSequence(ns.seed))
        parts = []
        for X in (Xp, Xq):
            n_hold = round(ns.holdout_fraction * X.shape[0])
            if not 1 <= n_hold < X.shape[0]:
                raise CliError("holdout fraction leaves an empty split")
            idx = rng.permutation(X.shape[0])
            parts.append((X[idx[n_hold:]], X[idx[:n_hold]]))
        (fit_p, hold_p), (fit_q, hold_q) = parts
        try:
            selection = select_by_holl(fit_p, fit_q, hold_p, hold_q, specs, grid,
                                       lambda1=ns.lambda1, route=ns.route, config=config)
        except (ValueError, RuntimeError) as exc:
            raise CliError(str(exc)) from exc
        spec = selection.spec

    path_obj = regularization_path(fit_p, fit_q, spec, grid, lambda1=ns.lambda1,
                                   route=ns.route, config=config)
    path_csv = os.path.join(out_dir, "path.csv")
    timing_csv = os.path.join(out_dir, "timing.csv")
    write_path_csv(path_csv, path_obj)
    write_timing_csv(timing_csv, path_obj)
    written = [path_csv, timing_csv]

    if selection is not None:
        holl_json = os.path.join(out_dir, "holl.json")
        selected_holl = holl(selection.fit.theta, hold_p, hold_q)
        write_json(holl_json, {
            "schema_version": SCHEMA_VERSION,
            "selected": {"family": selection.spec.family, "k": selection.spec.k,
                         "lambda2": selection.lambda2, "holl": selected_holl,
                         "converged": bool(selection.fit.converged)},
            "holdout_fraction": ns.holdout_fraction,
            "lambda1": ns.lambda1,
            "table": selection.table,
        })
        written.append(holl_json)

    if not ns.no_plot:
        from .plots import plot_path

        png = os.path.join(out_dir, "path.png")
        plot_path(path_obj.lambda2_grid, _per_lambda_dicts(path_obj), truth=truth,
                  selected_lambda2=selection.lambda2 if selection else None, out_png=png)
        written.append(png)

    failures = sum(1 for f in path_obj.fits if f is None)
    unconverged = sum(1 for f in path_obj.fits if f is not None and not f.converged)
    msg = f"route={path_obj.route} grid={grid.size} failures={failures} unconverged={unconverged}"
    if selection is not None:
        msg += f" selected: family={spec.family} k={spec.k} lambda2={selection.lambda2:.6g}"
    print(msg)
    print("wrote " + " ".join(written))


# eval-pr ---------------------------------------------------------------------

def cmd_eval_pr(ns) -> None:
    _require_inputs(*ns.path_csv)
    _require_inputs(ns.truth)
    truth = read_truth(ns.truth)
    if not truth:
        raise CliError(f"truth file {ns.truth} holds no edges")
    runs = []
    curves = []
    for path in ns.path_csv:
        lambdas, per_lambda = read_path_csv(path)
        try:
            curve = pr_from_path_data(lambdas, per_lambda, truth)
        except ValueError as exc:
            raise CliError(f"{path}: {exc}") from exc
        curves.append(curve)
        runs.append({
            "file": path,
            "auc": curve.auc,
            "points": [{"lambda2": float(l), "recall": float(r), "precision": float(p)}
                       for l, r, p in zip(curve.thresholds, curve.recalls, curve.precisions)],
        })
    report = {"schema_version": SCHEMA_VERSION, "runs": runs,
              "mean_auc": float(np.mean([c.auc for c in curves]))}
    if len(curves) > 1:
        grid, mean, err = average_pr_curves(curves)
        report["aggregate"] = {
            "recall_grid": [float(x) for x in grid],
            "mean_precision": [float(x) for x in mean],
            "stderr": [float(x) for x in err],
        }
    out = _resolve_out(ns.out)
    write_json(out, report)
    written = [out]
    if not ns.no_plot:
        from .plots import plot_pr

        png = os.path.splitext(out)[0] + ".png"
        data = [(os.path.basename(r["file"]), c.recalls, c.precisions)
                for r, c in zip(runs, curves)]
        band = None
        if len(curves) > 1:
            agg = report["aggregate"]
            band = (agg["recall_grid"], agg["mean_precision"], agg["stderr"])
        plot_pr(data, out_png=png, mean_band=band)
        written.append(png)
    print(f"mean AUC-PR over {len(curves)} run(s): {report['mean_auc']:.4f}")
    print("wrote " + " ".join(written))


# bench-dual ------------------------------------------------------------------

def cmd_bench_dual(ns) -> None:
    dims = _parse_k_list(ns.dims)
    if ns.lambda1 <= 0:
        raise CliError("the dual route requires lambda1 > 0")
    specs = _make_specs(ns.basis, ns.k)
    if len(specs) != 1:
        raise CliError("bench-dual takes a single basis degree")
    spec = specs[0]
    try:
        grid = parse_grid_spec(ns.grid)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    rows = []
    for d in dims:
        s_struct, s_p, s_q = (int(x) for x in
                              np.random.SeedSequence([ns.seed, d]).generate_state(3))
        try:
            pair = make_gaussian_pair(d, ns.sparsity, ns.changes, ns.delta, s_struct)
        except (ValueError, RuntimeError) as exc:
            raise CliError(f"d={d}: {exc}") from exc
        Xp = sample_gaussian_mn(pair.theta_p, ns.n, s_p)
        Xq = sample_gaussian_mn(pair.theta_q, ns.n, s_q)
        config = _solve_config(ns, ns.lambda1, 0.0)
        paths = {}
        for route in ("primal", "dual"):
            t0 = time.perf_counter()
            paths[route] = regularization_path(Xp, Xq, spec, grid, lambda1=ns.lambda1,
                                               route=route, config=config)
            rows.append({"d": d, "route": route,
                         "seconds": time.perf_counter() - t0, "n_lambda2": grid.size})
        dev = 0.0
        for fp, fd in zip(paths["primal"].fits, paths["dual"].fits):
            if fp is not None and fd is not None:
                dev = max(dev, float(np.abs(fp.theta.flat - fd.theta.flat).max()))
        print(f"d={d}: primal {rows[-2]['seconds']:.2f}s, dual {rows[-1]['seconds']:.2f}s, "
              f"max theta deviation across grid {dev:.2e}")
    out = _resolve_out(ns.out)
    write_bench_csv(out, rows)
    written = [out]
    if not ns.no_plot:
        from .plots import plot_timing

        png = os.path.splitext(out)[0] + ".png"
        plot_timing(rows, out_png=png)
        written.append(png)
    print("wrote " + " ".join(written))


# permtest --------------------------------------------------------------------

def cmd_permtest(ns) -> None:
    Xp, Xq = _load_pair(ns)
    specs = _make_specs(ns.basis, ns.k)
    if len(specs) != 1:
        raise CliError("permtest takes a single basis degree")
    try:
        grid = parse_grid_spec(ns.grid)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    config = _solve_config(ns, ns.lambda1, 0.0)
    try:
        res = permutation_test(Xp, Xq, specs[0], grid, ns.folds, ns.shuffles,
                               ns.max_hits, ns.seed, lambda1=ns.lambda1, config=config)
    except (ValueError, RuntimeError) as exc:
        raise CliError(str(exc)) from exc
    out = _resolve_out(ns.out)
    write_json(out, {
        "schema_version": SCHEMA_VERSION,
        "num_shuffles": res.num_shuffles,
        "max_hits": ns.max_hits,
        "folds": ns.folds,
        "original": [[u, v] for u, v in sorted(res.original)],
        "retained": [[u, v] for u, v in sorted(res.retained)],
        "hit_counts": [{"u": u, "v": v, "hits": res.hit_counts[(u, v)]}
                       for u, v in sorted(res.hit_counts)],
    })
    print(f"detected {len(res.original)} edges, retained {len(res.retained)} "
          f"after {res.num_shuffles} shuffles (max_hits={ns.max_hits}) -> {out}")


# parser ----------------------------------------------------------------------

def _add_common(p) -> None:
    p.add_argument("--config", help="key=value file overriding these flags")


def _add_solver_flags(p) -> None:
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--grad-tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnchange",
        description="Estimate sparse changes between two pairwise Markov networks "
                    "by fitting their density ratio.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic sample pairs and the true change set")
    p.add_argument("--kind", choices=("gaussian", "npn", "diamond"), required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="samples per side")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sparsity", type=float, default=0.25)
    p.add_argument("--changes", type=int, default=15)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--power", type=int, default=2, help="npn: transform exponent is 1/power")
    p.add_argument("--sparsity-p", type=float, default=0.35)
    p.add_argument("--sparsity-q", type=float, default=0.15)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=5)
    p.add_argument("--out-p", default="p.csv")
    p.add_argument("--out-q", default="q.csv")
    p.add_argument("--out-truth", default="truth.csv")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="single fit at fixed penalties, JSON report")
    p.add_argument("--p-csv", required=True)
    p.add_argument("--q-csv", required=True)
    p.add_argument("--basis", choices=("polynomial", "power", "gaussian"), default="polynomial")
    p.add_argument("--k", default="2", help="basis degree")
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--lambda2", type=float, default=0.1)
    p.add_argument("--route", choices=("auto", "primal", "dual"), default="auto")
    p.add_argument("--out", default="fit.json")
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("path", help="regularization path, optional hold-out basis selection")
    p.add_argument("--p-csv", required=True)
    p.add_argument("--q-csv", required=True)
    p.add_argument("--basis", choices=("polynomial", "power", "gaussian"), default="polynomial")
    p.add_argument("--k", default="2", help="comma-separated candidate degrees")
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--grid", default="log:1e-4:1:20", help="lambda2 grid spec log:lo:hi:count")
    p.add_argument("--route", choices=("auto", "primal", "dual"), default="auto")
    p.add_argument("--holdout-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0, help="hold-out split seed")
    p.add_argument("--truth", default=None, help="optional truth CSV for the figure")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-plot", action="store_true")
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("eval-pr", help="precision-recall of path CSVs against a truth file")
    p.add_argument("--path-csv", nargs="+", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default="pr.json")
    p.add_argument("--no-plot", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_eval_pr)

    p = sub.add_parser("bench-dual", help="time the full path on both routes over dimensions")
    p.add_argument("--dims", default="40,60,80", help="comma-separated dimensions")
    p.add_argument("--n", type=int, default=150, help="samples per side")
    p.add_argument("--lambda1", type=float, default=0.1)
    p.add_argument("--grid", default="log:1e-4:1:20")
    p.add_argument("--basis", choices=("polynomial", "power", "gaussian"), default="gaussian")
    p.add_argument("--k", default="2")
    p.add_argument("--sparsity", type=float, default=0.25)
    p.add_argument("--changes", type=int, default=15)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--no-plot", action="store_true")
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench_dual)

    p = sub.add_parser("permtest", help="permutation stability screen for detected edges")
    p.add_argument("--p-csv", required=True)
    p.add_argument("--q-csv", required=True)
    p.add_argument("--basis", choices=("polynomial", "power", "gaussian"), default="polynomial")
    p.add_argument("--k", default="2")
    p.add_argument("--grid", default="log:1e-4:1:20")
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--shuffles", type=int, default=100)
    p.add_argument("--max-hits", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="permtest.json")
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_permtest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        _apply_config(ns)
        ns.func(ns)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
