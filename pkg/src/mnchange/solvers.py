"""Primal and dual solvers for the group-sparse ratio-fitting objective.

Primal problem, in the flat parameterization theta of length T*b:

    P(theta) = -loglik(theta) + (lambda1/2) ||theta||^2
               + lambda2 * sum_t ||theta_t||,

where t ranges over factors and theta_t is the t-th coefficient block.  It is
minimized by a monotone accelerated proximal-gradient method (FISTA with
backtracking line search and an objective-based restart), whose prox step is
the blockwise group-soft-threshold.

Dual problem, over weights alpha on the denominator sample (the probability
simplex):

    D(alpha) = sum_i alpha_i log alpha_i
               + 1/(2*lambda1) * sum_t max(0, ||xi_t|| - lambda2)^2,
    xi = g - H_q alpha,

where g is the numerator feature mean and H_q the denominator feature stack.
The dual is solved over alpha = softmax(z) with L-BFGS (the reparameterized
problem is smooth and unconstrained; by convexity of D, any interior
stationary point is a global minimum).  The primal solution is recovered
blockwise from xi: theta_t = group_prox(xi_t, lambda2) / lambda1, so blocks
with ||xi_t|| <= lambda2 are exactly zero.  The dual iterates in n_q
dimensions instead of T*b, which pays off when the parameter count exceeds
the denominator sample size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .features import BasisSpec, ParamVector
from .ratio import FeatureCache, _as_cache, grad_flat, loglik_flat


@dataclass
class SolveConfig:
    """Settings shared by both solver routes.

    grad_tol is compared against the route's stationarity measure: the norm of
    the prox-gradient step (primal) or the max-abs reparameterized gradient
    (dual).  warm_start may be a ParamVector (either route) or a DualState
    (dual route).
    """

    lambda1: float = 0.0
    lambda2: float = 0.0
    max_iters: int = 2000
    grad_tol: float = 1e-6
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    warm_start: object = None

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("penalty weights must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")
        if self.step_init <= 0:
            raise ValueError("step_init must be > 0")
        if not (0 < self.backtrack_factor < 1):
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class FitResult:
    """Outcome of one solve, on either route.

    objective_value is always the primal objective at theta, so the two routes
    are directly comparable.  converged=True means the stationarity measure
    reached grad_tol; otherwise theta is the best iterate found.
    """

    theta: ParamVector
    objective_value: float
    iterations: int
    converged: bool
    route: str
    stationarity: float
    lambda1: float
    lambda2: float
    objective_history: np.ndarray | None = field(default=None, repr=False)
    seconds: float = 0.0


@dataclass
class DualState:
    """Simplex weights alpha over the denominator sample and xi = g - H_q alpha."""

    alpha: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.alpha.ndim != 1 or np.any(self.alpha < 0) or not np.isfinite(self.alpha).all():
            raise ValueError("alpha must be a nonnegative finite vector")
        if abs(self.alpha.sum() - 1.0) > 1e-6:
            raise ValueError(f"alpha must sum to 1, got {self.alpha.sum()!r}")
        if not np.isfinite(self.xi).all():
            raise ValueError("xi must be finite")


def group_prox(v: np.ndarray, tau: float) -> np.ndarray:
    """Group soft-threshold of a single block: shrink the norm by tau.

    Returns the zero vector when ||v|| <= tau (boundary included), else
    (1 - tau/||v||) v.
    """
    if tau < 0:
        raise ValueError("threshold must be >= 0")
    v = np.asarray(v, dtype=float)
    nrm = float(np.linalg.norm(v))
    if nrm <= tau:
        return np.zeros_like(v)
    return (1.0 - tau / nrm) * v


def prox_blocks(flat: np.ndarray, tau: float, block_dim: int) -> np.ndarray:
    """group_prox applied to every block of a flat (T*b,) array."""
    blocks = flat.reshape(-1, block_dim)
    norms = np.linalg.norm(blocks, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    return (blocks * scale[:, None]).ravel()


def group_norm_sum(flat: np.ndarray, block_dim: int) -> float:
    return float(np.linalg.norm(flat.reshape(-1, block_dim), axis=1).sum())


def primal_objective_flat(flat, g, Hq, lambda1, lambda2, block_dim) -> float:
    """P(theta) for a flat parameter array, from cached moments."""
    val = -loglik_flat(flat, g, Hq) + 0.5 * lambda1 * float(flat @ flat)
    return val + lambda2 * group_norm_sum(flat, block_dim)


def zero_threshold(Xp, Xq, spec: BasisSpec) -> float:
    """Smallest lambda2 at which theta = 0 solves the primal problem.

    Equals the largest blockwise norm of the loglik gradient at zero (the
    ridge term has zero gradient there, so the value does not depend on
    lambda1).
    """
    cache_p = _as_cache(Xp, spec)
    cache_q = _as_cache(Xq, spec)
    grad0 = cache_p.mean() - cache_q.mean()
    return float(np.linalg.norm(grad0.reshape(-1, spec.block_dim), axis=1).max())


def auto_route(lambda1: float, num_params: int, n_q: int) -> str:
    """Route heuristic: dual iterates in n_q dims, primal in num_params dims."""
    return "dual" if lambda1 > 0 and num_params > n_q else "primal"


_DIVERGENCE_LIMIT = 1e10


def solve_primal(Xp, Xq, spec: BasisSpec, config: SolveConfig) -> FitResult:
    """Minimize the primal objective by monotone FISTA with backtracking.

    The accepted objective sequence is non-increasing by construction.  On
    non-convergence within max_iters the best iterate is returned with
    converged=False rather than raising.

    With lambda1 = 0 the objective can be unbounded below: once the feature
    count exceeds the denominator sample size there are directions that
    separate the numerator mean from every denominator point, and the
    log-likelihood then grows faster than a too-small lambda2 penalty.  That
    is a property of the problem, not of the solver, so it is reported by
    raising RuntimeError as soon as an iterate norm passes a size no bounded
    solution reaches (or the objective stops being finite).
    """
    cache_p = _as_cache(Xp, spec)
    cache_q = _as_cache(Xq, spec)
    if cache_p.d != cache_q.d:
        raise ValueError(f"sample dimensions differ: {cache_p.d} vs {cache_q.d}")
    g = cache_p.mean()
    Hq = cache_q.H
    b = spec.block_dim
    lam1, lam2 = config.lambda1, config.lambda2

    def f(th):
        return -loglik_flat(th, g, Hq) + 0.5 * lam1 * float(th @ th)

    def grad_f(th):
        return -grad_flat(th, g, Hq) + lam1 * th

    if config.warm_start is None:
        x = np.zeros(g.size)
    elif isinstance(config.warm_start, ParamVector):
        if config.warm_start.flat.size != g.size:
            raise ValueError("warm start has the wrong length for this basis and dimension")
        x = config.warm_start.flat.copy()
    else:
        raise ValueError("primal warm start must be a ParamVector")

    F_x = f(x) + lam2 * group_norm_sum(x, b)
    if not np.isfinite(F_x):
        raise RuntimeError("objective is not finite at the starting point")
    history = [F_x]
    step = config.step_init

    # already stationary?
    gx = grad_f(x)
    crit = float(np.linalg.norm(x - prox_blocks(x - step * gx, step * lam2, b))) / step
    if crit <= config.grad_tol:
        theta = ParamVector(spec, cache_p.d, x)
        return FitResult(theta, F_x, 0, True, "primal", crit, lam1, lam2,
                         np.asarray(history))

    x_prev = x.copy()
    y = x.copy()
    t = 1.0
    converged = False
    stationarity = crit
    it = 0
    for it in range(1, config.max_iters + 1):
        fy = f(y)
        gy = grad_f(y)
        while True:
            z = prox_blocks(y - step * gy, step * lam2, b)
            dz = z - y
            fz = f(z)
            bound = fy + float(gy @ dz) + float(dz @ dz) / (2.0 * step)
            if fz <= bound + 1e-12 * (1.0 + abs(fy)) or step < 1e-18:
                break
            step *= config.backtrack_factor
        F_z = fz + lam2 * group_norm_sum(z, b)
        if not np.isfinite(F_z) or float(np.abs(z).max()) > _DIVERGENCE_LIMIT:
            raise RuntimeError(
                f"iterates diverged at lambda1={lam1:g}, lambda2={lam2:g}: "
                "the objective is unbounded below (the penalty is too weak "
                "to bound the ratio model); increase lambda2 or set "
                "lambda1 > 0")

        restart = F_z > F_x
        if F_z <= F_x:
            x_new, F_new = z, F_z
        else:
            x_new, F_new = x, F_x  # keep the best iterate (monotone)
        history.append(F_new)

        # cheap check on the momentum point, verified at the accepted iterate
        crit_y = float(np.linalg.norm(dz)) / step
        if crit_y <= config.grad_tol:
            gx = grad_f(x_new)
            zx = prox_blocks(x_new - step * gx, step * lam2, b)
            stationarity = float(np.linalg.norm(x_new - zx)) / step
            if stationarity <= config.grad_tol:
                x, F_x = x_new, F_new
                converged = True
                break

        if restart:
            t_new = 1.0
            y = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = z + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x_prev)
        x_prev, x, F_x, t = x, x_new, F_new, t_new

    if not converged:
        gx = grad_f(x)
        zx = prox_blocks(x - step * gx, step * lam2, b)
        stationarity = float(np.linalg.norm(x - zx)) / step
        converged = stationarity <= config.grad_tol

    theta = ParamVector(spec, cache_p.d, x)
    return FitResult(theta, F_x, it, converged, "primal", stationarity, lam1, lam2,
                     np.asarray(history))


def dual_xi(alpha: np.ndarray, Xp, Xq, spec: BasisSpec) -> np.ndarray:
    """xi = g - H_q alpha for given denominator weights, as a flat array."""
    cache_p = _as_cache(Xp, spec)
    cache_q = _as_cache(Xq, spec)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (cache_q.n,):
        raise ValueError(f"alpha has shape {alpha.shape}, expected ({cache_q.n},)")
    return cache_p.mean() - cache_q.H @ alpha


def dual_objective(alpha, Xp, Xq, spec: BasisSpec, lambda1: float, lambda2: float) -> float:
    """D(alpha): negative entropy plus the squared-hinge block penalty.

    Defined on the closed simplex with 0*log(0) = 0; lambda1 must be > 0.
    """
    if lambda1 <= 0:
        raise ValueError("the dual requires lambda1 > 0")
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-8:
        raise ValueError("alpha must be a probability vector")
    xi = dual_xi(alpha, Xp, Xq, spec)
    pos = alpha[alpha > 0]
    ent = float(pos @ np.log(pos))
    norms = np.linalg.norm(xi.reshape(-1, spec.block_dim), axis=1)
    hinge = np.maximum(0.0, norms - lambda2)
    return ent + float(hinge @ hinge) / (2.0 * lambda1)


def dual_gradient(alpha, Xp, Xq, spec: BasisSpec, lambda1: float, lambda2: float) -> np.ndarray:
    """Euclidean gradient of dual_objective; requires strictly positive alpha.

    Per sample i: log(alpha_i) + 1 - (1/lambda1) * h_i' q, where q holds, per
    block, (||xi_t|| - lambda2)_+ / ||xi_t|| * xi_t and h_i is sample i's
    feature column.
    """
    if lambda1 <= 0:
        raise ValueError("the dual requires lambda1 > 0")
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("dual_gradient requires strictly positive alpha")
    if abs(alpha.sum() - 1.0) > 1e-8:
        raise ValueError("alpha must sum to 1")
    cache_q = _as_cache(Xq, spec)
    xi = dual_xi(alpha, Xp, Xq, spec)
    q = _shrink_blocks(xi, lambda2, spec.block_dim)
    return np.log(alpha) + 1.0 - (cache_q.H.T @ q) / lambda1


def _shrink_blocks(xi: np.ndarray, lambda2: float, block_dim: int) -> np.ndarray:
    """Blockwise (||xi_t|| - lambda2)_+ / ||xi_t|| * xi_t (zero where the hinge is dead)."""
    return prox_blocks(xi, lambda2, block_dim)


def recover_primal(xi: np.ndarray, lambda1: float, lambda2: float,
                   block_dim: int | None = None) -> np.ndarray:
    """Map xi to the primal solution: blockwise group_prox(xi_t, lambda2) / lambda1.

    Equivalently (1 - lambda2/||xi_t||) xi_t / lambda1 on active blocks and an
    exact zero block where ||xi_t|| <= lambda2.  With block_dim=None the whole
    vector is one block.
    """
    if lambda1 <= 0:
        raise ValueError("recovery requires lambda1 > 0")
    xi = np.asarray(xi, dtype=float)
    if block_dim is None:
        return group_prox(xi, lambda2) / lambda1
    return prox_blocks(xi, lambda2, block_dim) / lambda1


def solve_dual(Xp, Xq, spec: BasisSpec, config: SolveConfig) -> tuple[DualState, FitResult]:
    """Minimize the dual over the simplex and recover the primal solution.

    alpha is parameterized as softmax(z) and z is optimized by L-BFGS with the
    analytic chain-rule gradient.  The returned FitResult reports the primal
    objective at the recovered theta; the stationarity measure is the max-abs
    gradient in z.
    """
    if config.lambda1 <= 0:
        raise ValueError("the dual route requires lambda1 > 0")
    cache_p = _as_cache(Xp, spec)
    cache_q = _as_cache(Xq, spec)
    if cache_p.d != cache_q.d:
        raise ValueError(f"sample dimensions differ: {cache_p.d} vs {cache_q.d}")
    g = cache_p.mean()
    Hq = cache_q.H
    n_q = cache_q.n
    b = spec.block_dim
    lam1, lam2 = config.lambda1, config.lambda2

    ws = config.warm_start
    if ws is None:
        z0 = np.zeros(n_q)
    elif isinstance(ws, DualState):
        if ws.alpha.size != n_q:
            raise ValueError("dual warm start has the wrong sample size")
        z0 = np.log(np.maximum(ws.alpha, 1e-300))
    elif isinstance(ws, ParamVector):
        if ws.flat.size != g.size:
            raise ValueError("warm start has the wrong length for this basis and dimension")
        z0 = Hq.T @ ws.flat  # stationarity links alpha to softmax of the scores
    else:
        raise ValueError("dual warm start must be a ParamVector or DualState")

    def value_and_grad(z):
        ls = z - (z.max() + np.log(np.exp(z - z.max()).sum()))
        alpha = np.exp(ls)
        xi = g - Hq @ alpha
        q = _shrink_blocks(xi, lam2, b)
        norms_shrunk = np.linalg.norm(q.reshape(-1, b), axis=1)  # (||xi_t|| - lambda2)_+
        val = float(alpha @ ls) + float(norms_shrunk @ norms_shrunk) / (2.0 * lam1)
        grad_alpha = ls + 1.0 - (Hq.T @ q) / lam1
        grad_z = alpha * grad_alpha - alpha * float(alpha @ grad_alpha)
        return val, grad_z

    res = minimize(
        value_and_grad, z0, jac=True, method="L-BFGS-B",
        options={
            "maxiter": config.max_iters,
            "maxfun": 4 * config.max_iters,
            "ftol": 1e-16,
            # stop on the same measure the FitResult reports, with margin so
            # converged=True is robust; the two routes then do comparable work
            # at equal grad_tol
            "gtol": config.grad_tol * 0.5,
            # scipy's default memory of 10 correction pairs is small for this
            # objective; more history roughly halves the iteration count
            "maxcor": 30,
        },
    )
    z = res.x
    ls = z - (z.max() + np.log(np.exp(z - z.max()).sum()))
    alpha = np.exp(ls)
    xi = g - Hq @ alpha
    _, grad_z = value_and_grad(z)
    stationarity = float(np.abs(grad_z).max())
    converged = stationarity <= config.grad_tol

    flat = recover_primal(xi, lam1, lam2, block_dim=b)
    theta = ParamVector(spec, cache_p.d, flat)
    obj = primal_objective_flat(flat, g, Hq, lam1, lam2, b)
    state = DualState(alpha=alpha, xi=xi)
    fit = FitResult(theta, obj, int(res.nit), converged, "dual", stationarity, lam1, lam2)
    return state, fit
