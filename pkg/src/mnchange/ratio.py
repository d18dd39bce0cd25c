"""Density-ratio model and its fitting objective.

The ratio of two pairwise Markov network densities is log-linear in the
difference of their factor parameters:

    r(x; theta) = exp(sum_{u>=v} theta_{u,v} . f(x_u, x_v)) / N(theta),

where N(theta) is estimated by the empirical mean of the unnormalized ratio
over the denominator sample.  Fitting maximizes the mean log-ratio over the
numerator sample (an importance-estimation objective); its gradient per block
is the numerator feature mean minus the ratio-weighted denominator feature
mean.  All exponential sums are computed with max-shifted log-sum-exp so large
parameters cannot overflow.
"""

from __future__ import annotations

import numpy as np

from .features import BasisSpec, ParamVector, eval_factor_cols, factor_pairs, num_factors


def check_samples(X: np.ndarray) -> np.ndarray:
    """Validate a sample matrix: 2-d, at least one row, all entries finite."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"sample matrix must be 2-d, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"sample matrix must be nonempty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("sample matrix contains non-finite entries")
    return X


class FeatureCache:
    """Stacked basis evaluations of a dataset, built once and reused.

    H has shape (T*b, n): column i is the concatenation, in factor order, of
    every factor's basis evaluated at sample i.  Linear maps against parameter
    vectors and sample weights are then single matrix products.
    """

    def __init__(self, spec: BasisSpec, d: int, H: np.ndarray):
        self.spec = spec
        self.d = d
        self.H = H

    @classmethod
    def build(cls, X: np.ndarray, spec: BasisSpec) -> "FeatureCache":
        X = check_samples(X)
        n, d = X.shape
        b = spec.block_dim
        H = np.empty((num_factors(d) * b, n))
        for t, (u, v) in enumerate(factor_pairs(d)):
            H[t * b:(t + 1) * b] = eval_factor_cols(spec, X, u, v)
        return cls(spec, d, H)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    def mean(self) -> np.ndarray:
        """Per-row sample mean of the stacked features, shape (T*b,).

        Computed as H @ (1/n, ..., 1/n) so it cancels bitwise against a
        uniformly weighted H @ w in the gradient.
        """
        n = self.H.shape[1]
        return self.H @ np.full(n, 1.0 / n)


def _as_cache(X, spec: BasisSpec) -> FeatureCache:
    if isinstance(X, FeatureCache):
        if X.spec != spec:
            raise ValueError(f"cache was built for basis {X.spec}, not {spec}")
        return X
    return FeatureCache.build(X, spec)


def feature_sum(theta: ParamVector, x: np.ndarray) -> float:
    """sum_{u>=v} theta_{u,v} . f(x_u, x_v) at a single point x of shape (d,)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (theta.d,):
        raise ValueError(f"point has shape {x.shape}, expected ({theta.d},)")
    cache = FeatureCache.build(x[None, :], theta.spec)
    return float(cache.H[:, 0] @ theta.flat)


def _scores(theta: ParamVector, X, side: str) -> np.ndarray:
    cache = _as_cache(X, theta.spec)
    if cache.d != theta.d:
        raise ValueError(f"{side} sample has d={cache.d}, parameters have d={theta.d}")
    return cache.H.T @ theta.flat


def log_normalizer(theta: ParamVector, Xq) -> float:
    """log of the denominator-sample estimate of the normalizer N(theta).

    N_hat = (1/n_q) sum_i exp(feature_sum(theta, x_i)); returned in log space
    via log-sum-exp.
    """
    s = _scores(theta, Xq, "denominator")
    m = float(s.max())
    return m + float(np.log(np.exp(s - m).sum())) - float(np.log(s.size))


def estimate_normalizer(theta: ParamVector, Xq) -> float:
    """Empirical normalizer N_hat(theta); exp of log_normalizer."""
    return float(np.exp(log_normalizer(theta, Xq)))


def ratio(theta: ParamVector, x: np.ndarray, Xq) -> float:
    """Normalized density-ratio estimate r(x; theta) at a single point."""
    return float(np.exp(feature_sum(theta, x) - log_normalizer(theta, Xq)))


def ratio_at(theta: ParamVector, X, Xq) -> np.ndarray:
    """Normalized ratio values at every row of X, shape (n,)."""
    s = _scores(theta, X, "evaluation")
    return np.exp(s - log_normalizer(theta, Xq))


def kliep_loglik(theta: ParamVector, Xp, Xq) -> float:
    """Mean log-ratio over the numerator sample (the fitting objective).

    Equals mean_i feature_sum(theta, x_i^p) - log N_hat(theta); zero at
    theta = 0 regardless of the data.
    """
    s_p = _scores(theta, Xp, "numerator")
    return float(s_p.mean()) - log_normalizer(theta, Xq)


def kliep_gradient(theta: ParamVector, Xp, Xq) -> ParamVector:
    """Gradient of kliep_loglik in theta, as a ParamVector.

    Per block: numerator feature mean minus the softmax(score)-weighted
    denominator feature mean.  Weights are computed max-shifted.
    """
    cache_p = _as_cache(Xp, theta.spec)
    cache_q = _as_cache(Xq, theta.spec)
    if cache_p.d != theta.d or cache_q.d != theta.d:
        raise ValueError("sample dimension does not match parameter dimension")
    g = cache_p.mean()
    s = cache_q.H.T @ theta.flat
    w = _softmax(s)
    return ParamVector(theta.spec, theta.d, g - cache_q.H @ w)


def holl(theta: ParamVector, Xp_hold, Xq_hold) -> float:
    """Hold-out log-likelihood: kliep_loglik on data not used for fitting.

    Disjointness of the hold-out sets from the training sets is the caller's
    responsibility.
    """
    return kliep_loglik(theta, Xp_hold, Xq_hold)


def _softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max())
    return e / e.sum()


# flat-array internals shared by the solvers ---------------------------------

def loglik_flat(flat: np.ndarray, g: np.ndarray, Hq: np.ndarray) -> float:
    """kliep_loglik for a flat parameter array given the cached moments.

    g is the numerator feature mean, Hq the denominator feature stack.
    """
    s = Hq.T @ flat
    m = float(s.max())
    lse = m + float(np.log(np.exp(s - m).sum()))
    return float(flat @ g) - (lse - float(np.log(s.size)))


def grad_flat(flat: np.ndarray, g: np.ndarray, Hq: np.ndarray) -> np.ndarray:
    """Gradient of loglik_flat."""
    s = Hq.T @ flat
    return g - Hq @ _softmax(s)
