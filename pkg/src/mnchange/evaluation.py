"""Experiment harnesses: regularization paths, precision-recall against a
known change set, hold-out and cross-validated model selection, and a
permutation test for detection stability.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .features import BasisSpec, factor_pairs
from .ratio import FeatureCache, _as_cache, loglik_flat
from .solvers import DualState, FitResult, SolveConfig, auto_route, solve_dual, solve_primal


@dataclass
class RegPath:
    """Fits along a descending lambda2 grid at fixed lambda1.

    Solver failures at a grid point leave fits[i] = None with the error
    message recorded; the rest of the path is still computed.
    """

    spec: BasisSpec
    d: int
    lambda1: float
    lambda2_grid: np.ndarray
    route: str
    fits: list = field(default_factory=list)
    group_norms: np.ndarray | None = None
    errors: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    @property
    def total_seconds(self) -> float:
        return float(sum(self.seconds))


def _check_grid(lambda2_grid) -> np.ndarray:
    grid = np.asarray(lambda2_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("lambda2 grid must be a nonempty 1-d array")
    if np.any(grid <= 0):
        raise ValueError("lambda2 grid values must be positive")
    if grid.size > 1 and not np.all(np.diff(grid) < 0):
        raise ValueError("lambda2 grid must be strictly descending")
    return grid


def regularization_path(Xp, Xq, spec: BasisSpec, lambda2_grid, lambda1: float = 0.0,
                        route: str = "auto", config: SolveConfig | None = None,
                        warm_start: bool = True) -> RegPath:
    """Solve along the grid, reusing each solution to warm-start the next.

    route "auto" picks the dual when lambda1 > 0 and the parameter count
    exceeds the denominator sample size, the primal otherwise.  Feature
    caches are built once and shared across grid points.
    """
    grid = _check_grid(lambda2_grid)
    cache_p = _as_cache(Xp, spec)
    cache_q = _as_cache(Xq, spec)
    if route == "auto":
        route = auto_route(lambda1, cache_p.H.shape[0], cache_q.n)
    if route not in ("primal", "dual"):
        raise ValueError(f"unknown route {route!r}")
    if route == "dual" and lambda1 <= 0:
        raise ValueError("the dual route requires lambda1 > 0")
    base = config if config is not None else SolveConfig()
    T = cache_p.H.shape[0] // spec.block_dim

    path = RegPath(spec, cache_p.d, lambda1, grid, route)
    norms = np.full((grid.size, T), np.nan)
    warm = None
    for i, lam2 in enumerate(grid):
        cfg = replace(base, lambda1=lambda1, lambda2=float(lam2),
                      warm_start=warm if warm_start else None)
        t0 = time.perf_counter()
        try:
            if route == "dual":
                state, fit = solve_dual(cache_p, cache_q, spec, cfg)
                warm = state
            else:
                fit = solve_primal(cache_p, cache_q, spec, cfg)
                warm = fit.theta
        except Exception as exc:  # record and keep going
            path.fits.append(None)
            path.errors.append(f"{type(exc).__name__}: {exc}")
            path.seconds.append(time.perf_counter() - t0)
            warm = None
            continue
        fit.seconds = time.perf_counter() - t0
        path.fits.append(fit)
        path.errors.append(None)
        path.seconds.append(fit.seconds)
        norms[i] = fit.theta.group_norms()
    path.group_norms = norms
    return path


def edge_scores(theta) -> dict:
    """Group norm of every pairwise block, keyed by edge (u, v) with u > v.

    Univariate factors are not edges and are excluded.
    """
    norms = theta.group_norms()
    pairs = factor_pairs(theta.d)
    return {(u, v): float(norms[t]) for t, (u, v) in enumerate(pairs) if u != v}


def nonzero_edges(theta) -> set:
    """Edges whose coefficient block is not exactly zero."""
    return {e for e, s in edge_scores(theta).items() if s > 0.0}


@dataclass
class PRCurve:
    """Precision-recall points plus the area under the curve.

    For threshold sweeps `thresholds` holds the score cutoffs; for
    path-level curves it holds the lambda2 value behind each point.  The AUC
    integrates precision over recall by trapezoid, anchored at recall 0 with
    the first (smallest-recall) point's precision.
    """

    recalls: np.ndarray
    precisions: np.ndarray
    thresholds: np.ndarray
    auc: float


def _auc_anchored(recalls: np.ndarray, precisions: np.ndarray) -> float:
    order = np.argsort(recalls, kind="stable")
    r = recalls[order]
    p = precisions[order]
    r = np.concatenate(([0.0], r))
    p = np.concatenate(([p[0]], p))
    return float(np.trapezoid(p, r))


def pr_curve(scores: dict, truth: set) -> PRCurve:
    """Sweep a detection threshold over the distinct score values.

    scores maps each candidate edge to a nonnegative score; truth is the
    nonempty set of truly changed edges (every truth edge must be scored).
    The sweep runs from the largest score down, so recall is non-decreasing
    along the returned points.
    """
    if not truth:
        raise ValueError("truth set must be nonempty")
    missing = set(truth) - set(scores)
    if missing:
        raise ValueError(f"truth edges missing from scores: {sorted(missing)}")
    edges = list(scores)
    vals = np.array([scores[e] for e in edges], dtype=float)
    is_true = np.array([e in truth for e in edges])
    thresholds = np.unique(vals)[::-1]
    recalls = np.empty(thresholds.size)
    precisions = np.empty(thresholds.size)
    for j, thr in enumerate(thresholds):
        pred = vals >= thr
        tp = int((pred & is_true).sum())
        precisions[j] = tp / int(pred.sum())
        recalls[j] = tp / len(truth)
    return PRCurve(recalls, precisions, thresholds, _auc_anchored(recalls, precisions))


def pr_from_path_data(lambdas, per_lambda, truth: set) -> PRCurve:
    """Precision-recall from per-lambda2 group-norm dicts.

    per_lambda: one dict per grid point mapping factor (u, v) to its group
    norm; univariate entries (u == v) are ignored.  An edge counts as
    detected when its norm is strictly positive.  Grid points with no
    detections contribute no point; raises if that leaves the curve empty.
    """
    if not truth:
        raise ValueError("truth set must be nonempty")
    lambdas = np.asarray(lambdas, dtype=float)
    if len(per_lambda) != lambdas.size:
        raise ValueError("one norm dict per grid value is required")
    scored = {e for d in per_lambda for e in d if e[0] != e[1]}
    bad = set(truth) - scored
    if bad:
        raise ValueError(f"truth contains edges absent from the path: {sorted(bad)}")
    recalls, precisions, lams = [], [], []
    for lam2, norms in zip(lambdas, per_lambda):
        detected = {e for e, s in norms.items() if e[0] != e[1] and s > 0.0}
        if not detected:
            continue
        tp = len(detected & truth)
        recalls.append(tp / len(truth))
        precisions.append(tp / len(detected))
        lams.append(float(lam2))
    if not recalls:
        raise ValueError("no nonzero detections anywhere along the path")
    recalls = np.asarray(recalls)
    precisions = np.asarray(precisions)
    return PRCurve(recalls, precisions, np.asarray(lams),
                   _auc_anchored(recalls, precisions))


def path_pr_curve(path: RegPath, truth: set) -> PRCurve:
    """One precision-recall point per grid lambda2, from exact-zero patterns.

    Failed grid points are dropped before scoring; detection and AUC follow
    pr_from_path_data.
    """
    pairs = factor_pairs(path.d)
    lambdas, per_lambda = [], []
    for i, lam2 in enumerate(path.lambda2_grid):
        if path.fits[i] is None:
            continue
        lambdas.append(float(lam2))
        per_lambda.append({pairs[t]: float(path.group_norms[i, t])
                           for t in range(len(pairs))})
    if not lambdas:
        raise ValueError("every fit along the path failed")
    return pr_from_path_data(np.asarray(lambdas), per_lambda, truth)


DEFAULT_RECALL_GRID = np.linspace(0.05, 1.0, 20)


def average_pr_curves(curves: list, recall_grid: np.ndarray | None = None):
    """Interpolate curves onto a common recall grid and average.

    Returns (recall_grid, mean precision, standard error); the standard error
    is zero for a single curve.
    """
    if not curves:
        raise ValueError("need at least one curve")
    grid = DEFAULT_RECALL_GRID if recall_grid is None else np.asarray(recall_grid, float)
    interp = np.empty((len(curves), grid.size))
    for i, c in enumerate(curves):
        order = np.argsort(c.recalls, kind="stable")
        r = c.recalls[order]
        p = c.precisions[order]
        interp[i] = np.interp(grid, r, p, left=p[0], right=p[-1])
    mean = interp.mean(axis=0)
    if len(curves) > 1:
        stderr = interp.std(axis=0, ddof=1) / np.sqrt(len(curves))
    else:
        stderr = np.zeros_like(mean)
    return grid, mean, stderr


@dataclass
class HollSelection:
    """Winner of a hold-out log-likelihood scan over bases and lambda2."""

    spec: BasisSpec
    lambda2: float
    fit: FitResult
    table: list = field(default_factory=list)


def _selection_key(score: float, k: int, lam2: float) -> tuple:
    """Sort key for hold-out selection: best score, ties to the smaller
    degree, then to the larger lambda2 (the sparser model)."""
    return (score, -k, lam2)


def select_by_holl(Xp_train, Xq_train, Xp_hold, Xq_hold, specs, lambda2_grid,
                   lambda1: float = 0.0, route: str = "auto",
                   config: SolveConfig | None = None) -> HollSelection:
    """Fit a path per candidate basis and pick the best hold-out score.

    Ties prefer the smaller basis degree, then the larger lambda2 (the
    sparser model).  The hold-out sets must be disjoint from the training
    sets; that is not checked here.
    """
    grid = _check_grid(lambda2_grid)
    if not specs:
        raise ValueError("need at least one candidate basis")
    best = None
    best_key = None
    table = []
    for spec in specs:
        path = regularization_path(Xp_train, Xq_train, spec, grid, lambda1=lambda1,
                                   route=route, config=config)
        hold_p = FeatureCache.build(np.asarray(Xp_hold, float), spec)
        hold_q = FeatureCache.build(np.asarray(Xq_hold, float), spec)
        g_hold = hold_p.mean()
        for i, lam2 in enumerate(grid):
            fit = path.fits[i]
            if fit is None:
                continue
            score = loglik_flat(fit.theta.flat, g_hold, hold_q.H)
            table.append({"family": spec.family, "k": spec.k, "lambda2": float(lam2),
                          "holl": score, "converged": fit.converged})
            key = _selection_key(score, spec.k, float(lam2))
            if best_key is None or key > best_key:
                best_key = key
                best = HollSelection(spec, float(lam2), fit)
    if best is None:
        raise RuntimeError("every candidate fit failed")
    best.table = table
    return best


def _fold_bounds(n: int, folds: int) -> list:
    edges = np.linspace(0, n, folds + 1).astype(int)
    return [(int(edges[j]), int(edges[j + 1])) for j in range(folds)]


@dataclass
class CvllSelection:
    """lambda2 chosen by K-fold cross-validated hold-out log-likelihood."""

    lambda2: float
    fit: FitResult
    lambda2_grid: np.ndarray
    scores: np.ndarray


def cvll_select(Xp, Xq, spec: BasisSpec, lambda2_grid, folds: int,
                lambda1: float = 0.0, route: str = "auto",
                config: SolveConfig | None = None) -> CvllSelection:
    """Pick lambda2 by contiguous deterministic K-fold cross-validation.

    Fold j holds out the j-th contiguous block of rows from both samples,
    fits the path on the rest, and scores each lambda2 on the held-out
    block; scores are averaged over folds and the best (largest, ties to the
    larger lambda2) wins.  The returned fit is refit on all data at the
    selected lambda2.
    """
    grid = _check_grid(lambda2_grid)
    Xp = np.asarray(Xp, dtype=float)
    Xq = np.asarray(Xq, dtype=float)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if Xp.shape[0] < folds or Xq.shape[0] < folds:
        raise ValueError("each sample needs at least one row per fold")
    scores = np.zeros(grid.size)
    counts = np.zeros(grid.size)
    for (p_lo, p_hi), (q_lo, q_hi) in zip(_fold_bounds(Xp.shape[0], folds),
                                          _fold_bounds(Xq.shape[0], folds)):
        tr_p = np.delete(Xp, slice(p_lo, p_hi), axis=0)
        tr_q = np.delete(Xq, slice(q_lo, q_hi), axis=0)
        te_p = Xp[p_lo:p_hi]
        te_q = Xq[q_lo:q_hi]
        path = regularization_path(tr_p, tr_q, spec, grid, lambda1=lambda1,
                                   route=route, config=config)
        te_cache_p = FeatureCache.build(te_p, spec)
        te_cache_q = FeatureCache.build(te_q, spec)
        g_te = te_cache_p.mean()
        for i in range(grid.size):
            if path.fits[i] is None:
                scores[i] = -np.inf
            else:
                scores[i] += loglik_flat(path.fits[i].theta.flat, g_te, te_cache_q.H)
                counts[i] += 1
    with np.errstate(invalid="ignore"):
        mean_scores = np.where(np.isneginf(scores), -np.inf, scores / np.maximum(counts, 1))
    if np.all(np.isneginf(mean_scores)):
        raise RuntimeError("every fold failed at every lambda2")
    best = int(np.argmax(mean_scores))  # first max = largest lambda2 on ties
    lam2 = float(grid[best])
    cfg = replace(config if config is not None else SolveConfig(),
                  lambda1=lambda1, lambda2=lam2, warm_start=None)
    cache_p = FeatureCache.build(Xp, spec)
    cache_q = FeatureCache.build(Xq, spec)
    use_route = route
    if use_route == "auto":
        use_route = auto_route(lambda1, cache_p.H.shape[0], cache_q.n)
    if use_route == "dual":
        _, fit = solve_dual(cache_p, cache_q, spec, cfg)
    else:
        fit = solve_primal(cache_p, cache_q, spec, cfg)
    return CvllSelection(lam2, fit, grid, mean_scores)


@dataclass
class PermutationResult:
    """Detected edges, their shuffle hit counts, and the surviving subset."""

    original: set
    retained: set
    hit_counts: dict
    num_shuffles: int


def permutation_test(Xp, Xq, spec: BasisSpec, lambda2_grid, folds: int,
                     num_shuffles: int, max_hits: int, seed: int,
                     lambda1: float = 0.0, config: SolveConfig | None = None) -> PermutationResult:
    """Stability screen: refit on label-shuffled pools and count re-detections.

    Each shuffle pools both samples, re-splits them at the original sizes,
    reruns the full cross-validated selection and detection, and counts how
    often each originally detected edge reappears.  Edges detected more than
    max_hits times under shuffling are dropped; the retained set is always a
    subset of the original detections, and max_hits >= num_shuffles keeps
    everything.
    """
    if num_shuffles < 1:
        raise ValueError("num_shuffles must be >= 1")
    if max_hits < 0:
        raise ValueError("max_hits must be >= 0")
    Xp = np.asarray(Xp, dtype=float)
    Xq = np.asarray(Xq, dtype=float)

    def detect(a, b):
        sel = cvll_select(a, b, spec, lambda2_grid, folds, lambda1=lambda1, config=config)
        return nonzero_edges(sel.fit.theta)

    original = detect(Xp, Xq)
    counts = {e: 0 for e in original}
    n_p = Xp.shape[0]
    pool = np.vstack([Xp, Xq])
    rng = np.random.default_rng(seed)
    for _ in range(num_shuffles):
        perm = rng.permutation(pool.shape[0])
        hit = detect(pool[perm[:n_p]], pool[perm[n_p:]])
        for e in original:
            if e in hit:
                counts[e] += 1
    retained = {e for e in original if counts[e] <= max_hits}
    return PermutationResult(original, retained, counts, num_shuffles)
