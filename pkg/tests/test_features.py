"""Basis evaluation and the flat block layout."""

import numpy as np
import pytest

from mnchange.features import (
    BasisSpec,
    ParamVector,
    eval_basis,
    eval_basis_cols,
    eval_factor_cols,
    factor_offset,
    factor_ordinal,
    factor_pairs,
    num_factors,
)


class TestEnumeration:
    def test_pairs_d2(self):
        assert factor_pairs(2) == [(1, 1), (2, 1), (2, 2)]

    def test_offsets_d2_b1(self):
        offs = [factor_offset(u, v, 2, 1) for u, v in factor_pairs(2)]
        assert offs == [0, 1, 2]

    def test_single_variable(self):
        assert factor_pairs(1) == [(1, 1)]
        assert num_factors(1) == 1

    def test_total_length_d40_b6(self):
        d, b = 40, 6
        last_u, last_v = factor_pairs(d)[-1]
        assert factor_offset(last_u, last_v, d, b) + b == 4920
        assert num_factors(d) * b == 4920

    def test_round_trip_bijection(self):
        for d in (1, 2, 3, 7, 12):
            pairs = factor_pairs(d)
            assert len(pairs) == num_factors(d)
            ordinals = [factor_ordinal(u, v, d) for u, v in pairs]
            assert ordinals == list(range(len(pairs)))

    def test_v_major_order(self):
        pairs = factor_pairs(4)
        assert pairs[:4] == [(1, 1), (2, 1), (3, 1), (4, 1)]
        assert pairs[4:] == [(2, 2), (3, 2), (4, 2), (3, 3), (4, 3), (4, 4)]

    def test_invalid_indices_rejected(self):
        with pytest.raises(ValueError):
            factor_ordinal(1, 2, 3)  # u < v
        with pytest.raises(ValueError):
            factor_ordinal(4, 1, 3)  # u out of range
        with pytest.raises(ValueError):
            factor_ordinal(2, 0, 3)  # v out of range
        with pytest.raises(ValueError):
            factor_offset(1, 1, 2, 0)  # bad block size


class TestBasisSpec:
    def test_block_dims(self):
        assert BasisSpec("polynomial", 1).block_dim == 3
        assert BasisSpec("polynomial", 2).block_dim == 6
        assert BasisSpec("polynomial", 4).block_dim == 12
        assert BasisSpec("power", 3).block_dim == 3
        assert BasisSpec("gaussian").block_dim == 1

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            BasisSpec("fourier", 2)
        with pytest.raises(ValueError):
            BasisSpec("polynomial", 0)
        with pytest.raises(ValueError):
            BasisSpec("polynomial", 2.0)  # non-integer degree
        with pytest.raises(ValueError):
            BasisSpec("gaussian", 3)


class TestEvalBasis:
    def test_polynomial_k2_pinned(self):
        np.testing.assert_allclose(
            eval_basis(BasisSpec("polynomial", 2), 2.0, 3.0),
            [4.0, 9.0, 6.0, 2.0, 3.0, 1.0])

    def test_power_k2_pinned(self):
        np.testing.assert_allclose(
            eval_basis(BasisSpec("power", 2), -2.0, 3.0),
            [-4.0, 9.0, 1.0])

    def test_polynomial_univariate_pinned(self):
        # univariate factors evaluate as f(x, 0): second-coordinate slots vanish
        vals = eval_factor_cols(BasisSpec("polynomial", 2), np.array([[2.0]]), 1, 1)
        np.testing.assert_allclose(vals[:, 0], [4.0, 0.0, 0.0, 2.0, 0.0, 1.0])

    def test_gaussian_values(self):
        np.testing.assert_allclose(eval_basis(BasisSpec("gaussian"), 2.0, -3.0), [-6.0])

    def test_gaussian_univariate_is_square(self):
        # the product basis specializes to x^2 on the diagonal, not f(x, 0)
        vals = eval_factor_cols(BasisSpec("gaussian"), np.array([[3.0, 1.0]]), 1, 1)
        np.testing.assert_allclose(vals, [[9.0]])
        vals = eval_factor_cols(BasisSpec("gaussian"), np.array([[3.0, 1.0]]), 2, 1)
        np.testing.assert_allclose(vals, [[3.0]])

    def test_polynomial_k3_order(self):
        # [u^3, v^3, u^2 v, u v^2, u^2, v^2, u, v, 1]
        u, v = 2.0, 5.0
        np.testing.assert_allclose(
            eval_basis(BasisSpec("polynomial", 3), u, v),
            [8.0, 125.0, 20.0, 50.0, 4.0, 25.0, 2.0, 5.0, 1.0])

    def test_length_matches_block_dim(self):
        rng = np.random.default_rng(42)
        for family in ("polynomial", "power"):
            for k in (1, 2, 3, 4):
                spec = BasisSpec(family, k)
                out = eval_basis(spec, rng.normal(), rng.normal())
                assert out.shape == (spec.block_dim,)
        assert eval_basis(BasisSpec("gaussian"), 0.3, 0.7).shape == (1,)

    def test_constant_slot_at_origin(self):
        for spec in (BasisSpec("polynomial", 1), BasisSpec("polynomial", 3),
                     BasisSpec("power", 2)):
            out = eval_basis(spec, 0.0, 0.0)
            expected = np.zeros(spec.block_dim)
            expected[-1] = 1.0
            np.testing.assert_array_equal(out, expected)

    def test_cols_match_scalar(self):
        rng = np.random.default_rng(7)
        xu = rng.normal(size=5)
        xv = rng.normal(size=5)
        for spec in (BasisSpec("polynomial", 3), BasisSpec("power", 4), BasisSpec("gaussian")):
            cols = eval_basis_cols(spec, xu, xv)
            for i in range(5):
                np.testing.assert_allclose(cols[:, i], eval_basis(spec, xu[i], xv[i]))

    def test_mismatched_shapes_rejected(self):
        with pytest.raises(ValueError):
            eval_basis_cols(BasisSpec("power", 2), np.zeros(3), np.zeros(4))


class TestParamVector:
    def test_zeros_shape(self):
        spec = BasisSpec("polynomial", 2)
        pv = ParamVector.zeros(spec, 5)
        assert pv.flat.shape == (num_factors(5) * 6,)
        assert not pv.flat.any()

    def test_block_round_trip(self):
        spec = BasisSpec("polynomial", 2)
        pv = ParamVector.zeros(spec, 4)
        vals = np.array([1.0, -2.0, 3.0, 0.5, 0.0, 2.0])
        pv.set_block(3, 2, vals)
        np.testing.assert_array_equal(pv.block(3, 2), vals)
        # all other blocks untouched
        assert pv.flat.sum() == vals.sum()

    def test_group_norms_layout(self):
        spec = BasisSpec("power", 2)
        pv = ParamVector.zeros(spec, 3)
        pv.set_block(2, 1, [3.0, 4.0, 0.0])
        norms = pv.group_norms()
        t = factor_ordinal(2, 1, 3)
        assert norms[t] == 5.0
        assert norms.sum() == 5.0

    def test_wrong_length_rejected(self):
        spec = BasisSpec("power", 2)
        with pytest.raises(ValueError):
            ParamVector(spec, 3, np.zeros(7))

    def test_wrong_block_shape_rejected(self):
        pv = ParamVector.zeros(BasisSpec("gaussian"), 3)
        with pytest.raises(ValueError):
            pv.set_block(2, 1, [1.0, 2.0])

    def test_copy_is_independent(self):
        pv = ParamVector.zeros(BasisSpec("gaussian"), 2)
        cp = pv.copy()
        cp.flat[0] = 9.0
        assert pv.flat[0] == 0.0
