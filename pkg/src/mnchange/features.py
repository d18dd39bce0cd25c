"""Pairwise sufficient statistics for log-linear density-ratio models.

A model over d variables has one parameter block per unordered variable pair
(u, v) with u >= v (u == v gives the univariate factors).  Blocks are laid out
column-major in v: (1,1), (2,1), ..., (d,1), (2,2), ..., (d,d), giving
T = d(d+1)/2 factors.  Every factor uses the same basis, so a parameter vector
is a flat array of length T*b that reshapes to (T, b).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("polynomial", "power", "gaussian")


def num_factors(d: int) -> int:
    """Number of factors (unordered pairs plus diagonals) for d variables."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return d * (d + 1) // 2


def factor_pairs(d: int) -> list[tuple[int, int]]:
    """All factor indices (u, v), 1-based, u >= v, in v-major order."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return [(u, v) for v in range(1, d + 1) for u in range(v, d + 1)]


def _check_pair(u: int, v: int, d: int) -> None:
    if not (1 <= v <= u <= d):
        raise ValueError(f"factor index (u={u}, v={v}) invalid for d={d}; need 1 <= v <= u <= d")


def factor_ordinal(u: int, v: int, d: int) -> int:
    """0-based position of factor (u, v) in the v-major enumeration."""
    _check_pair(u, v, d)
    # factors in earlier columns: sum_{v'<v} (d - v' + 1)
    return (v - 1) * (d + 1) - v * (v - 1) // 2 + (u - v)


def factor_offset(u: int, v: int, d: int, b: int) -> int:
    """Start of block (u, v) inside a flat parameter vector with block size b."""
    if b < 1:
        raise ValueError(f"block size must be >= 1, got {b}")
    return factor_ordinal(u, v, d) * b


@dataclass(frozen=True)
class BasisSpec:
    """Basis family shared by every factor.

    family "polynomial": all monomials x_u^a x_v^c with 1 <= a + c <= k plus a
        constant, arranged as [x_u^k, x_v^k, cross terms of total degree k,
        both pure terms of each lower degree, 1]; block size 3k.
    family "power": (sign(x_u)|x_u|^k, sign(x_v)|x_v|^k, 1); block size 3.
    family "gaussian": the single product x_u * x_v, the pairwise sufficient
        statistic of a zero-mean normal; block size 1 (k is fixed at 2).
        Univariate factors specialize to x_u^2 rather than the zero-pinned
        form the other families use, which would annihilate the block.
    """

    family: str
    k: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}; expected one of {FAMILIES}")
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"basis degree k must be an integer >= 1, got {self.k!r}")
        if self.family == "gaussian" and self.k != 2:
            raise ValueError("gaussian basis is quadratic; k must be 2")

    @property
    def block_dim(self) -> int:
        if self.family == "polynomial":
            return 3 * self.k
        if self.family == "power":
            return 3
        return 1


def eval_basis_cols(spec: BasisSpec, xu: np.ndarray, xv: np.ndarray) -> np.ndarray:
    """Evaluate one factor's basis at paired coordinate arrays.

    xu, xv : shape (n,).  Returns shape (block_dim, n) with one basis function
    per row, in the documented order for the family.
    """
    xu = np.asarray(xu, dtype=float)
    xv = np.asarray(xv, dtype=float)
    if xu.shape != xv.shape or xu.ndim != 1:
        raise ValueError(f"xu and xv must be 1-d arrays of equal length, got {xu.shape} and {xv.shape}")
    n = xu.shape[0]
    k = spec.k
    if spec.family == "power":
        rows = np.empty((3, n))
        rows[0] = np.sign(xu) * np.abs(xu) ** k
        rows[1] = np.sign(xv) * np.abs(xv) ** k
        rows[2] = 1.0
        return rows
    if spec.family == "gaussian":
        return (xu * xv)[np.newaxis, :]
    # polynomial: powers 1..k of each coordinate, computed once
    pu = np.empty((k + 1, n))
    pv = np.empty((k + 1, n))
    pu[0] = 1.0
    pv[0] = 1.0
    for a in range(1, k + 1):
        pu[a] = pu[a - 1] * xu
        pv[a] = pv[a - 1] * xv
    rows = np.empty((3 * k, n))
    rows[0] = pu[k]
    rows[1] = pv[k]
    r = 2
    for a in range(k - 1, 0, -1):  # cross terms of total degree k
        rows[r] = pu[a] * pv[k - a]
        r += 1
    for m in range(k - 1, 0, -1):  # pure terms of each lower degree
        rows[r] = pu[m]
        rows[r + 1] = pv[m]
        r += 2
    rows[r] = 1.0
    return rows


def eval_basis(spec: BasisSpec, x_u: float, x_v: float) -> np.ndarray:
    """Evaluate one factor's basis at a scalar pair; returns shape (block_dim,)."""
    return eval_basis_cols(spec, np.array([x_u], float), np.array([x_v], float))[:, 0]


def eval_factor_cols(spec: BasisSpec, X: np.ndarray, u: int, v: int) -> np.ndarray:
    """Basis columns for factor (u, v) over a sample matrix X of shape (n, d).

    Univariate factors (u == v) are evaluated as f(x_u, 0), so the slots tied
    to the second coordinate are structurally zero but the block keeps its
    full length.  The gaussian family instead evaluates them as f(x_u, x_u),
    giving the diagonal statistic x_u^2.
    """
    _check_pair(u, v, X.shape[1])
    xu = X[:, u - 1]
    if u != v:
        xv = X[:, v - 1]
    elif spec.family == "gaussian":
        xv = xu
    else:
        xv = np.zeros_like(xu)
    return eval_basis_cols(spec, xu, xv)


@dataclass
class ParamVector:
    """Flat parameter vector with one block of size block_dim per factor."""

    spec: BasisSpec
    d: int
    flat: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=float)
        expected = num_factors(self.d) * self.spec.block_dim
        if self.flat.shape != (expected,):
            raise ValueError(
                f"flat parameter vector has shape {self.flat.shape}, expected ({expected},) "
                f"for d={self.d}, block_dim={self.spec.block_dim}"
            )

    @classmethod
    def zeros(cls, spec: BasisSpec, d: int) -> "ParamVector":
        return cls(spec, d, np.zeros(num_factors(d) * spec.block_dim))

    @property
    def num_factors(self) -> int:
        return num_factors(self.d)

    def block(self, u: int, v: int) -> np.ndarray:
        """View of the (u, v) coefficient block (writable)."""
        b = self.spec.block_dim
        off = factor_offset(u, v, self.d, b)
        return self.flat[off:off + b]

    def set_block(self, u: int, v: int, values) -> None:
        values = np.asarray(values, dtype=float)
        blk = self.block(u, v)
        if values.shape != blk.shape:
            raise ValueError(f"block values have shape {values.shape}, expected {blk.shape}")
        blk[:] = values

    def group_norms(self) -> np.ndarray:
        """Euclidean norm of each factor's block, shape (num_factors,)."""
        b = self.spec.block_dim
        return np.linalg.norm(self.flat.reshape(-1, b), axis=1)

    def copy(self) -> "ParamVector":
        return ParamVector(self.spec, self.d, self.flat.copy())
