"""Synthetic data: Gaussian network pairs, power transforms, and a non-Gaussian
pairwise model sampled by coordinate-wise slice sampling.

Edges are unordered pairs (u, v), 1-based, stored with u > v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular


@dataclass
class PrecisionPair:
    """Two precision matrices that differ on a known set of edges."""

    theta_p: np.ndarray
    theta_q: np.ndarray
    changed_edges: set = field(default_factory=set)

    @property
    def d(self) -> int:
        return self.theta_p.shape[0]


def _off_diagonal_pairs(d: int) -> list[tuple[int, int]]:
    return [(u, v) for v in range(1, d + 1) for u in range(v + 1, d + 1)]


def make_gaussian_pair(d: int, sparsity: float, num_changes: int, delta: float,
                       seed: int, max_tries: int = 100) -> PrecisionPair:
    """Random sparse precision matrix plus a perturbed copy.

    theta_p has 2 on the diagonal and 0.2 at a random symmetric subset of
    off-diagonal positions covering a `sparsity` fraction of pairs.  theta_q
    subtracts delta at num_changes randomly chosen *existing* edges, so
    changed_edges is exactly the set of positions where the matrices differ.
    Both matrices must admit a Cholesky factorization; resamples up to
    max_tries times, then raises.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity must lie in [0, 1], got {sparsity}")
    pairs = _off_diagonal_pairs(d)
    n_edges = round(sparsity * len(pairs))
    if not 0 <= num_changes <= n_edges:
        raise ValueError(f"num_changes must lie in [0, {n_edges}] for this sparsity, got {num_changes}")
    if num_changes > 0 and delta == 0.0:
        raise ValueError("delta must be nonzero when edges are to change")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        edge_idx = rng.choice(len(pairs), size=n_edges, replace=False)
        theta_p = 2.0 * np.eye(d)
        for i in edge_idx:
            u, v = pairs[i]
            theta_p[u - 1, v - 1] = theta_p[v - 1, u - 1] = 0.2
        changed_idx = rng.choice(edge_idx, size=num_changes, replace=False) if num_changes else []
        theta_q = theta_p.copy()
        changed = set()
        for i in changed_idx:
            u, v = pairs[i]
            theta_q[u - 1, v - 1] -= delta
            theta_q[v - 1, u - 1] -= delta
            changed.add((u, v))
        if _is_pd(theta_p) and _is_pd(theta_q):
            return PrecisionPair(theta_p, theta_q, changed)
    raise RuntimeError(f"no positive definite pair found in {max_tries} tries")


def _is_pd(a: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(a)
        return True
    except np.linalg.LinAlgError:
        return False


def sample_gaussian_mn(theta: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Draw n samples from the zero-mean Gaussian with precision matrix theta.

    Uses theta = L L' and x = L'^{-1} z with standard-normal z, so no explicit
    covariance inverse is formed.  Raises ValueError if theta is not symmetric
    positive definite.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValueError(f"precision matrix must be square, got shape {theta.shape}")
    if not np.allclose(theta, theta.T, atol=1e-10):
        raise ValueError("precision matrix must be symmetric")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    try:
        L = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError as exc:
        raise ValueError("precision matrix is not positive definite") from exc
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, theta.shape[0]))
    return solve_triangular(L.T, z.T, lower=False).T


def npn_transform(X: np.ndarray, k_inv: float) -> np.ndarray:
    """Elementwise signed power sign(x)|x|^k_inv.

    Applying it with k_inv = 1/k to Gaussian data produces variables whose
    signed k-th powers are jointly Gaussian, which the power basis of degree k
    maps back to Gaussian sufficient statistics.
    """
    if k_inv <= 0:
        raise ValueError(f"k_inv must be > 0, got {k_inv}")
    X = np.asarray(X, dtype=float)
    return np.sign(X) * np.abs(X) ** k_inv


class DiamondSpec:
    """d variables with quartic couplings on the edges of an adjacency matrix.

    Unnormalized log-density: -2 sum_i x_i^2 - 20 sum_{(u,v) in edges} x_u^2 x_v^2,
    each unordered edge counted once.  All pairwise Pearson correlations of the
    model are zero, so the dependence is invisible to second-order statistics.
    """

    def __init__(self, d: int, adjacency: np.ndarray):
        adjacency = np.asarray(adjacency)
        if adjacency.shape != (d, d):
            raise ValueError(f"adjacency must have shape ({d}, {d}), got {adjacency.shape}")
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adjacency) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if not np.isin(adjacency, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        self.d = d
        self.adjacency = adjacency.astype(int)
        iu, iv = np.nonzero(np.tril(self.adjacency, k=-1))
        self._iu = iu  # 0-based, row > column
        self._iv = iv

    def edges(self) -> set:
        return {(int(u) + 1, int(v) + 1) for u, v in zip(self._iu, self._iv)}


def diamond_log_density_unnorm(x: np.ndarray, spec: DiamondSpec) -> float:
    """Unnormalized log-density of the quartic pairwise model at a point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.d,):
        raise ValueError(f"point has shape {x.shape}, expected ({spec.d},)")
    sq = x * x
    return float(-2.0 * sq.sum() - 20.0 * (sq[spec._iu] * sq[spec._iv]).sum())


def make_diamond_pair(d: int, sparsity_p: float, sparsity_q: float,
                      seed: int) -> tuple[DiamondSpec, DiamondSpec, set]:
    """Random adjacency at sparsity_p, then a sub-network at sparsity_q.

    The second network keeps a random subset of the first one's edges; the
    returned change set holds the removed edges.
    """
    if not 0.0 <= sparsity_q <= sparsity_p <= 1.0:
        raise ValueError("need 0 <= sparsity_q <= sparsity_p <= 1")
    pairs = _off_diagonal_pairs(d)
    n_p = round(sparsity_p * len(pairs))
    n_q = round(sparsity_q * len(pairs))
    rng = np.random.default_rng(seed)
    p_idx = rng.choice(len(pairs), size=n_p, replace=False)
    keep = set(int(i) for i in rng.choice(p_idx, size=n_q, replace=False)) if n_q else set()
    a_p = np.zeros((d, d), dtype=int)
    a_q = np.zeros((d, d), dtype=int)
    changed = set()
    for i in p_idx:
        u, v = pairs[int(i)]
        a_p[u - 1, v - 1] = a_p[v - 1, u - 1] = 1
        if int(i) in keep:
            a_q[u - 1, v - 1] = a_q[v - 1, u - 1] = 1
        else:
            changed.add((u, v))
    return DiamondSpec(d, a_p), DiamondSpec(d, a_q), changed


def slice_sample(log_density, x0: np.ndarray, n: int, seed: int,
                 burn_in: int = 1000, thin: int = 5, width: float = 1.0,
                 max_steps: int = 50) -> np.ndarray:
    """Coordinate-wise slice sampler for an unnormalized log-density.

    Each coordinate update draws a level below the current log-density,
    brackets the slice by stepping out linearly (width `width`, at most
    max_steps expansions split randomly between the two sides), then samples
    by shrinkage.  One sweep updates every coordinate once; burn_in sweeps are
    discarded and every thin-th sweep thereafter is kept.  Every returned
    state has finite log-density.  Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if burn_in < 0 or thin < 1:
        raise ValueError("need burn_in >= 0 and thin >= 1")
    if width <= 0 or max_steps < 1:
        raise ValueError("need width > 0 and max_steps >= 1")
    x = np.array(x0, dtype=float).ravel()
    if not np.isfinite(x).all():
        raise ValueError("x0 must be finite")
    lp = float(log_density(x))
    if not np.isfinite(lp):
        raise ValueError("log density must be finite at x0")
    rng = np.random.default_rng(seed)
    d = x.size
    out = np.empty((n, d))
    stored = 0
    sweep = 0
    while stored < n:
        for i in range(d):
            lp = _slice_update(log_density, x, i, lp, rng, width, max_steps)
        sweep += 1
        if sweep > burn_in and (sweep - burn_in - 1) % thin == 0:
            out[stored] = x
            stored += 1
    return out


def _slice_update(log_density, x: np.ndarray, i: int, lp: float, rng,
                  width: float, max_steps: int) -> float:
    """Slice-sample coordinate i of x in place; returns the new log-density."""
    level = lp - rng.exponential()
    xi0 = x[i]
    left = xi0 - width * rng.uniform()
    right = left + width
    budget_left = int(np.floor(max_steps * rng.uniform()))
    budget_right = (max_steps - 1) - budget_left
    x[i] = left
    while budget_left > 0 and log_density(x) > level:
        left -= width
        x[i] = left
        budget_left -= 1
    x[i] = right
    while budget_right > 0 and log_density(x) > level:
        right += width
        x[i] = right
        budget_right -= 1
    for _ in range(1000):
        xi1 = rng.uniform(left, right)
        x[i] = xi1
        lp1 = float(log_density(x))
        if lp1 > level:
            return lp1
        if xi1 < xi0:
            left = xi1
        else:
            right = xi1
    x[i] = xi0  # interval collapsed to the current point
    return lp
