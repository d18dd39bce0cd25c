"""CSV and JSON round trips for the command-line file formats."""

import json

import numpy as np
import pytest

from mnchange.evaluation import regularization_path
from mnchange.features import BasisSpec
from mnchange.fileio import (
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
from mnchange.sampling import make_gaussian_pair, sample_gaussian_mn
from mnchange.solvers import SolveConfig, solve_primal


class TestSamples:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(7, 3)) * np.exp(rng.normal(size=(7, 3)) * 5)
        f = tmp_path / "x.csv"
        write_samples(f, X)
        np.testing.assert_array_equal(read_samples(f), X)

    def test_single_row_keeps_2d(self, tmp_path):
        f = tmp_path / "x.csv"
        write_samples(f, np.array([[1.0, 2.0, 3.0]]))
        assert read_samples(f).shape == (1, 3)

    def test_rejects_1d(self, tmp_path):
        with pytest.raises(ValueError):
            write_samples(tmp_path / "x.csv", np.array([1.0, 2.0]))

    def test_empty_file_rejected(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("")
        with pytest.raises(ValueError):
            read_samples(f)

    def test_write_is_deterministic(self, tmp_path):
        X = np.random.default_rng(1).normal(size=(5, 4))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_samples(a, X)
        write_samples(b, X)
        assert a.read_bytes() == b.read_bytes()


class TestTruth:
    def test_round_trip(self, tmp_path):
        edges = {(3, 1), (5, 2), (2, 1)}
        f = tmp_path / "truth.csv"
        write_truth(f, edges)
        assert read_truth(f) == edges
        assert f.read_text() == "u,v\n2,1\n3,1\n5,2\n"

    def test_empty_set(self, tmp_path):
        f = tmp_path / "truth.csv"
        write_truth(f, set())
        assert read_truth(f) == set()

    def test_bad_orientation_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_truth(tmp_path / "t.csv", {(1, 3)})
        with pytest.raises(ValueError):
            write_truth(tmp_path / "t.csv", {(2, 0)})

    def test_bad_header_rejected(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("a,b\n2,1\n")
        with pytest.raises(ValueError):
            read_truth(f)

    def test_bad_row_rejected(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("u,v\n1,3\n")
        with pytest.raises(ValueError):
            read_truth(f)


class TestGridSpec:
    def test_default_spec(self):
        grid = parse_grid_spec("log:1e-4:1:20")
        assert grid.shape == (20,)
        assert grid[0] == pytest.approx(1.0)
        assert grid[-1] == pytest.approx(1e-4)
        assert np.all(np.diff(grid) < 0)

    def test_single_point(self):
        np.testing.assert_allclose(parse_grid_spec("log:0.5:0.5:1"), [0.5])

    def test_matches_logspace(self):
        np.testing.assert_allclose(parse_grid_spec("log:0.01:1:3"), [1.0, 0.1, 0.01])

    def test_invalid_specs(self):
        for bad in ["lin:1e-4:1:20", "log:1e-4:1", "log:0:1:5", "log:1e-4:1:0",
                    "log:1:0.1:5", "log:-1:1:5"]:
            with pytest.raises(ValueError):
                parse_grid_spec(bad)


def small_path(seed=0):
    pair = make_gaussian_pair(4, 0.5, 2, 0.6, seed)
    Xp = sample_gaussian_mn(pair.theta_p, 60, seed + 1)
    Xq = sample_gaussian_mn(pair.theta_q, 60, seed + 2)
    grid = np.logspace(-0.5, -2, 4)
    return regularization_path(Xp, Xq, BasisSpec("gaussian"), grid,
                               config=SolveConfig(max_iters=1000)), Xp, Xq


class TestPathCsv:
    def test_round_trip(self, tmp_path):
        path, _, _ = small_path()
        f = tmp_path / "path.csv"
        write_path_csv(f, path)
        lambdas, per_lambda = read_path_csv(f)
        np.testing.assert_array_equal(lambdas, path.lambda2_grid)
        assert len(per_lambda) == 4
        d = path.d
        T = d * (d + 1) // 2
        from mnchange.features import factor_pairs
        pairs = factor_pairs(d)
        for i in range(4):
            assert set(per_lambda[i]) == set(pairs)
            for t, pv in enumerate(pairs):
                assert per_lambda[i][pv] == path.group_norms[i, t]
        with open(f) as fh:
            assert sum(1 for _ in fh) == 1 + 4 * T

    def test_write_deterministic(self, tmp_path):
        path, _, _ = small_path(1)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_path_csv(a, path)
        write_path_csv(b, path)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_header_rejected(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("lambda,u,v,norm\n0.5,2,1,0.0\n")
        with pytest.raises(ValueError):
            read_path_csv(f)

    def test_empty_rejected(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("lambda2,u,v,group_norm\n")
        with pytest.raises(ValueError):
            read_path_csv(f)


class TestTimingCsv:
    def test_shape_and_route(self, tmp_path):
        path, _, _ = small_path(2)
        f = tmp_path / "timing.csv"
        write_timing_csv(f, path)
        lines = f.read_text().strip().split("\n")
        assert lines[0] == "lambda2,seconds,converged,iterations,route"
        assert len(lines) == 1 + 4
        for line in lines[1:]:
            lam, sec, conv, iters, route = line.split(",")
            assert float(sec) >= 0
            assert conv in ("0", "1")
            assert route == path.route


class TestBenchCsv:
    def test_format(self, tmp_path):
        rows = [{"d": 40, "route": "primal", "seconds": 1.25, "n_lambda2": 10},
                {"d": 40, "route": "dual", "seconds": 0.75, "n_lambda2": 10}]
        f = tmp_path / "bench.csv"
        write_bench_csv(f, rows)
        assert f.read_text() == ("d,route,seconds,n_lambda2\n"
                                 "40,primal,1.25,10\n"
                                 "40,dual,0.75,10\n")


class TestJson:
    def test_sorted_keys_and_trailing_newline(self, tmp_path):
        f = tmp_path / "o.json"
        write_json(f, {"zebra": 1, "alpha": {"late": 2, "early": 3}})
        text = f.read_text()
        assert text.endswith("\n")
        assert text.index('"alpha"') < text.index('"zebra"')
        assert json.loads(text) == {"zebra": 1, "alpha": {"late": 2, "early": 3}}

    def test_fit_to_dict_schema(self):
        path, _, _ = small_path(3)
        fit = path.fits[-1]
        doc = fit_to_dict(fit)
        assert doc["schema_version"] == SCHEMA_VERSION
        assert doc["basis"] == {"family": "gaussian", "k": 2}
        assert doc["d"] == 4
        assert doc["lambda2"] == fit.lambda2
        assert doc["route"] == path.route
        assert len(doc["groups"]) == 10
        assert doc["num_nonzero_edges"] == sum(
            1 for g in doc["groups"]
            if g["u"] != g["v"] and g["norm"] > 0)
        for blk in doc["nonzero_blocks"]:
            assert len(blk["coefficients"]) == 1
            norm = float(np.linalg.norm(blk["coefficients"]))
            match = [g for g in doc["groups"] if (g["u"], g["v"]) == (blk["u"], blk["v"])]
            assert match[0]["norm"] == pytest.approx(norm)
        json.dumps(doc)  # must be serializable as-is

    def test_fit_json_round_trip_bytes(self, tmp_path):
        path, _, _ = small_path(4)
        doc = fit_to_dict(path.fits[0])
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_json(a, doc)
        write_json(b, doc)
        assert a.read_bytes() == b.read_bytes()
