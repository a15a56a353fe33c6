import json
import math

import numpy as np
import pytest

from unirecover.bench import (
    ExperimentKind,
    ExperimentRecord,
    RunArchive,
    build_lattice,
    iter_experiment,
    load_config,
    run_discretization,
    run_exactness,
    run_experiment,
    run_lebesgue,
    run_rates,
    run_universality,
    to_csv,
    to_json,
    write_outputs,
)
from unirecover.bench.executor import ExecutionStatus, RowExecutor
from unirecover.bench.experiments import korobov_for_modulus, largest_guaranteed_N
from unirecover.bench.records import fit_slope
from unirecover.cubature import fibonacci_certificate
from unirecover.errors import ConfigError, MissingCertificateError
from unirecover.function_classes import random_trig_polynomial, trig_function
from unirecover.lattices import FibonacciLattice, KorobovLattice, PointSet, fibonacci_lattice
from unirecover.recovery import (
    EvaluationGrid,
    certified_budget,
    lebesgue_factor,
    lebesgue_vs,
    universal_vp_recover,
)
from unirecover.torus import enumerate_shapes, hyperbolic_cross_size


def config(**kwargs):
    return load_config(kwargs)


class TestConfig:
    def test_defaults(self):
        cfg = config(kind="lebesgue")
        assert cfg.lattice == "fib"
        assert cfg.n_values == [8, 9, 10, 11, 12]
        assert cfg.sweeps

    def test_from_file(self, tmp_path):
        path = tmp_path / "exactness.json"
        path.write_text(json.dumps({"kind": "exactness", "n_min": 5, "n_max": 6}))
        assert load_config(path).n_values == [5, 6]

    @pytest.mark.parametrize(
        "data",
        [
            {"kind": "rates"},
            {"kind": "rates", "function": "trig:poly.txt"},
            {"kind": "lebesgue", "n_min": 9, "n_max": 8},
            {"kind": "lebesgue", "d": 0},
            {"kind": "lebesgue", "lattice": "file:/nonexistent/points.txt"},
            {"kind": "universality", "lattice": "fib:10", "functions": ["samples:/nonexistent"]},
            {"kind": "rates", "function": "bernoulli:r=2,2", "slope_range": [-0.5, -1.5]},
            {"kind": "teleport"},
        ],
    )
    def test_rejects(self, data):
        with pytest.raises(ConfigError):
            load_config(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{kind: rates")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_build_lattice(self, tmp_path):
        assert isinstance(build_lattice("fib:7"), FibonacciLattice)
        korobov = build_lattice("korobov:101,1,10")
        assert isinstance(korobov, KorobovLattice)
        assert korobov.h == (1, 10)
        path = tmp_path / "points.txt"
        path.write_text("# d=2 m=4\n0 0\n1 2\n2 0\n3 2\n")
        assert isinstance(build_lattice(f"file:{path}"), PointSet)
        with pytest.raises(ConfigError):
            build_lattice("sobol:5")


class TestRecords:
    def test_bounded(self):
        row = ExperimentRecord.bounded(ExperimentKind.LEBESGUE, {}, {}, measured=9.5, bound=9.0)
        assert row.passed is False
        row = ExperimentRecord.bounded(ExperimentKind.LEBESGUE, {}, {}, measured=9.5, bound=9.0, slack=1.0)
        assert row.passed is True
        assert ExperimentRecord.bounded(ExperimentKind.LEBESGUE, {}, {}, 1.0, None).passed is None

    def test_fit_slope(self):
        assert fit_slope([1, 2, 3], [5, 3, 1]) == pytest.approx(-2.0)
        with pytest.raises(ValueError):
            fit_slope([1, 1], [2, 3])


class TestExecutor:
    def test_failed_row_does_not_abort(self):
        executor = RowExecutor(ExperimentKind.LEBESGUE, threads=2)
        ok = ExperimentRecord(kind=ExperimentKind.LEBESGUE, values={"value": 1.0})
        records = executor.run_all([("bad", lambda: [1 / 0]), ("good", lambda: [ok])])
        assert [r.status for r in records] == ["failed", "completed"]
        assert "division by zero" in records[0].error
        assert executor.get("bad").status == ExecutionStatus.FAILED
        assert executor.get("good").status == ExecutionStatus.COMPLETED

    def test_results_are_cached(self):
        calls = []

        def task():
            calls.append(1)
            return [ExperimentRecord(kind=ExperimentKind.EXACTNESS)]

        executor = RowExecutor(ExperimentKind.EXACTNESS)
        executor.request_execution("row", task)
        executor.request_execution("row", task)
        assert len(calls) == 1


class TestHelpers:
    def test_largest_guaranteed_N(self):
        N = largest_guaranteed_N(9391, 3)
        assert N == 27
        assert 3 * hyperbolic_cross_size(27, 3) < 9390
        assert largest_guaranteed_N(5, 2) is None

    def test_korobov_for_modulus(self):
        lattice = korobov_for_modulus(101, 2)
        assert lattice.m == 101
        assert lattice.h[0] == 1


class TestRates:
    def test_rows_record_both_axes(self):
        run = run_rates(config(kind="rates", n_min=9, n_max=10, function="bernoulli:r=2,2;phi=sign"))
        rows = [r for r in run.records if "row" not in r.parameters]
        assert [r.values["m"] for r in rows] == [55, 89]
        assert [r.values["N"] for r in rows] == [fibonacci_certificate(n).N_star for n in (9, 10)]
        assert run.summary["fit_axis"] == "m"
        assert run.summary["rows_fitted"] == 2

    def test_single_lattice_cannot_fit_a_slope(self):
        cfg = config(
            kind="rates",
            lattice="fib:10",
            function="bernoulli:r=2,2;phi=sign",
            slope_range=[-1.2, -0.8],
        )
        run = run_rates(cfg)
        assert not run.passed
        summary = run.records[-1]
        assert summary.parameters == {"row": "slope"}
        assert summary.status == "insufficient_data"
        assert summary.passed is False
        assert summary.values["rows_fitted"] == 1

    def test_unusable_rows_fail_the_fit(self):
        """r close to 1 leaves a tail far above the error even at the deepest truncation"""
        cfg = config(
            kind="rates",
            n_min=8,
            n_max=9,
            function="bernoulli:r=1.05,1.05;K=524288;phi=kernel",
            slope_range=[-1.2, -0.8],
        )
        run = run_rates(cfg)
        assert not any(r.values.get("usable") for r in run.records[:-1])
        assert run.records[-1].status == "insufficient_data"
        assert not run.passed

    def test_no_range_no_summary_row(self):
        run = run_rates(config(kind="rates", lattice="fib:9", function="bernoulli:r=2,2;phi=sign"))
        assert len(run.records) == 1
        assert run.passed
        assert run.summary["slope"] is None


class TestExactness:
    def test_fibonacci_sweep(self, tmp_path):
        run = run_exactness(config(kind="exactness", n_min=5, n_max=9))
        assert run.passed
        rows, summary = run.records[:-1], run.records[-1]
        assert [r.parameters["n"] for r in rows] == [5, 6, 7, 8, 9]
        assert [r.values["b_n"] for r in rows] == [8, 13, 21, 34, 55]
        assert rows[3].values["N_star"] == 12
        assert rows[4].values["N_star"] == 20
        assert rows[3].values["budget"] == 0
        assert rows[4].values["budget"] == 1
        assert summary.parameters == {"row": "summary"}
        assert summary.values["gamma_min"] > 0
        assert run.summary["b_n_monotone"]

        csv_path, json_path = write_outputs(run, tmp_path / "out" / "exactness")
        assert csv_path.read_text().splitlines()[0] == "# unirecover/exactness/v1"
        payload = json.loads(json_path.read_text())
        assert payload["schema"] == "unirecover/exactness/v1"
        assert payload["passed"] is True
        assert len(payload["rows"]) == 6

    def test_single_lattice(self):
        run = run_exactness(config(kind="exactness", lattice="korobov:101,1,10"))
        (row,) = run.records
        assert row.values["N_star"] == 9
        assert row.values["budget"] == 0

    def test_korobov_sweep(self):
        run = run_exactness(config(kind="exactness", lattice="korobov", m_values=[5, 101, 211]))
        assert run.passed
        first = run.records[0]
        assert first.values["N"] is None
        assert all(r.values["found"] for r in run.records[1:])

    def test_point_file_is_not_a_lattice(self, tmp_path):
        path = tmp_path / "points.txt"
        path.write_text("# d=2 m=4\n0 0\n1 2\n2 0\n3 2\n")
        run = run_exactness(config(kind="exactness", lattice=f"file:{path}"))
        assert not run.passed
        assert run.records[0].status == "failed"

    def test_kind_is_checked(self):
        with pytest.raises(ConfigError):
            run_exactness(config(kind="lebesgue"))

    def test_korobov_sweep_needs_moduli(self):
        with pytest.raises(ConfigError):
            run_exactness(config(kind="exactness", lattice="korobov"))


class TestLebesgue:
    def test_certified_rows_pass(self):
        run = run_lebesgue(config(kind="lebesgue", n_min=8, n_max=10))
        assert run.passed
        assert all(r.bound == 9.0 for r in run.records)
        assert all(1.0 - 1e-12 <= r.values["value"] <= 9.0 for r in run.records)
        assert {r.parameters["lattice"] for r in run.records} == {"fib:8", "fib:9", "fib:10"}

    def test_uncertified_rows_have_no_bound(self):
        run = run_lebesgue(config(kind="lebesgue", lattice="fib:9", include_uncertified=True))
        weights = [r.parameters["weight"] for r in run.records]
        assert weights == [0, 1, 1, 2, 2, 2]
        uncertified = [r for r in run.records if r.parameters["weight"] == 2]
        assert all(r.bound is None and r.passed is None for r in uncertified)

    def test_uncertified_lattice_is_skipped(self):
        run = run_lebesgue(config(kind="lebesgue", lattice="fib:5"))
        (row,) = run.records
        assert row.status == "skipped"
        assert row.passed is False
        assert row.parameters["m"] == 8
        assert not run.passed

    def test_csv_header(self):
        run = run_lebesgue(config(kind="lebesgue", lattice="fib:8"))
        lines = to_csv(run).splitlines()
        assert lines[0] == "# unirecover/lebesgue/v1"
        assert lines[1].split(",")[:4] == ["lattice", "m", "shape", "weight"]


class TestUniversality:
    def test_small_run(self):
        cfg = config(kind="universality", lattice="fib:10", random_functions=2, probes=50)
        run = run_universality(cfg)
        assert run.passed
        methods = [r.parameters.get("method") for r in run.records]
        assert methods == ["cheb", "vp", "cheb", "vp", None]
        gap = run.records[-1]
        assert gap.parameters == {"row": "selector_gap"}
        assert gap.values["sup_f_min_s"] <= gap.values["min_s_sup_f"]
        assert all("per_shape_best" not in r.values for r in run.records)
        assert math.isfinite(run.summary["d_hat"])

    def test_given_functions(self, tmp_path):
        samples = tmp_path / "samples.txt"
        lattice = fibonacci_lattice(9)
        x = lattice.points.coordinates
        np.savetxt(samples, np.cos(x[:, 0]))
        cfg = config(
            kind="universality",
            lattice="fib:9",
            functions=["bernoulli:r=2,2;K=256;phi=sign", f"samples:{samples}"],
            discretization_constant=3.0,
        )
        run = run_universality(cfg)
        methods = [r.parameters.get("method") for r in run.records]
        # node samples have no vp row
        assert methods == ["cheb", "vp", "cheb", None]
        assert run.summary["d_hat"] == 3.0
        cheb = [r for r in run.records if r.parameters.get("method") == "cheb"]
        assert all(r.values["d_hat"] == 3.0 for r in cheb)
        assert all(r.bound == pytest.approx(7.0 * r.values["min_best"]) for r in cheb)
        assert all(r.values["witness"] >= 0.0 for r in cheb)

    def test_bound_uses_configured_constant(self):
        """A constant below every achievable ratio makes the cheb row fail; the witness never rescues it"""
        cfg = config(
            kind="universality",
            lattice="fib:9",
            function="bernoulli:r=1.5,1.5;K=256;phi=sign",
            discretization_constant=0.0,
        )
        run = run_universality(cfg)
        cheb = run.records[0]
        assert cheb.parameters["method"] == "cheb"
        assert cheb.values["d_hat"] == 0.0
        assert cheb.values["witness"] > 0.0
        assert cheb.passed is False
        assert not run.passed

    def test_rejects_sweeps(self):
        with pytest.raises(ConfigError):
            run_universality(config(kind="universality", lattice="fib"))

    def test_infinite_constant(self):
        with pytest.raises(MissingCertificateError):
            run_universality(
                config(kind="universality", lattice="fib:10", discretization_constant=float("inf"))
            )

    def test_iter_matches_run(self):
        cfg = config(kind="universality", lattice="fib:9", random_functions=1, probes=20)
        streamed = list(iter_experiment(cfg))
        assert streamed[-1].parameters == {"row": "selector_gap"}
        assert len(streamed) == len(run_experiment(cfg).records)


class TestDiscretization:
    def test_fibonacci(self):
        run = run_discretization(config(kind="discretization", n_min=9, n_max=10, probes=30))
        assert run.passed
        for record in run.records:
            assert record.values["budget"] == 1
            assert 1.0 <= record.values["d_hat"] < math.inf
            assert set(record.values["per_shape"]) == {"(0,1)", "(1,0)"}

    def test_hammersley_uses_sweep_weight(self):
        run = run_discretization(
            config(kind="discretization", lattice="hammersley", n_min=1, n_max=2, probes=20)
        )
        assert [r.values["m"] for r in run.records] == [16, 32]
        assert [r.values["budget"] for r in run.records] == [1, 2]

    def test_uncertified_lattice_fails_row(self):
        run = run_discretization(config(kind="discretization", lattice="fib:5", probes=5))
        assert run.records[0].status == "failed"
        assert not run.passed


class TestArchive:
    def test_save_and_read_back(self):
        archive = RunArchive("sqlite://")
        run = run_exactness(config(kind="exactness", n_min=5, n_max=7))
        stored = archive.save(run)
        assert stored.kind == "exactness"
        assert stored.schema == "unirecover/exactness/v1"
        assert stored.passed

        assert [r.id for r in archive.list_runs()] == [stored.id]
        assert archive.list_runs("rates") == []
        assert archive.get_run(stored.id).config["n_min"] == 5
        rows = archive.get_rows(stored.id)
        assert [r.position for r in rows] == [0, 1, 2, 3]
        assert rows[0].content["values"]["b_n"] == 8

    def test_missing_run(self):
        archive = RunArchive("sqlite://")
        with pytest.raises(ValueError):
            archive.get_run("nope")
        with pytest.raises(ValueError):
            archive.get_rows("nope")

    def test_infinite_values_survive(self):
        archive = RunArchive("sqlite://")
        run = run_discretization(config(kind="discretization", lattice="fib:5", probes=5, budget=3))
        stored = archive.save(run)
        assert math.isinf(archive.get_rows(stored.id)[0].content["values"]["d_hat"])
        assert math.isinf(json.loads(to_json(run))["rows"][0]["values"]["d_hat"])


@pytest.mark.slow
class TestAcceptance:
    def test_rates_isotropic(self):
        cfg = config(
            kind="rates",
            function="bernoulli:r=2,2;phi=sign",
            n_min=8,
            n_max=18,
            slope_range=[-1.15, -0.85],
        )
        run = run_rates(cfg)
        assert run.passed
        assert run.summary["expected_slope"] == pytest.approx(-1.0)

    def test_rates_anisotropic(self):
        cfg = config(
            kind="rates",
            function="bernoulli:r=1.5,3;phi=sign",
            n_min=8,
            n_max=18,
            slope_range=[-1.2, -0.8],
        )
        assert run_rates(cfg).passed

    @pytest.mark.parametrize("n", [10, 12, 14])
    def test_reproduction(self, n):
        lattice = fibonacci_lattice(n)
        budget = certified_budget(lattice)
        shapes = enumerate_shapes(budget, 2)
        grid = EvaluationGrid.for_shapes(shapes, 2)
        rng = np.random.default_rng(n)
        for _ in range(100):
            s = shapes[int(rng.integers(len(shapes)))]
            f = trig_function(random_trig_polynomial(s, rng))
            assert universal_vp_recover(lattice, f, budget, grid).winner_error < 1e-8

    @pytest.mark.parametrize("d", [2, 3])
    def test_korobov_search_sweep(self, d):
        run = run_exactness(config(kind="exactness", lattice="korobov", m_max=2000, d=d))
        assert run.passed

    def test_fibonacci_exactness(self):
        run = run_exactness(config(kind="exactness", n_min=5, n_max=20))
        assert run.passed
        assert [r.parameters["n"] for r in run.records[:-1]] == list(range(5, 21))
        assert run.records[-1].values["gamma_min"] > 0

    def test_fibonacci_lebesgue(self):
        run = run_lebesgue(config(kind="lebesgue", n_min=10, n_max=16, oversampling=8))
        assert run.passed
        assert {r.parameters["n"] for r in run.records} == set(range(10, 17))

    def test_korobov_lebesgue(self):
        lattice = korobov_for_modulus(9391, 3)
        budget = certified_budget(lattice)
        assert budget is not None
        for weight in range(budget + 1):
            for s in enumerate_shapes(weight, 3):
                grid = EvaluationGrid.for_shapes([s], 3, include_nodes=False)
                assert lebesgue_vs(lattice, s, grid) <= lebesgue_factor(3)

    def test_universality_fib12(self):
        cfg = config(kind="universality", lattice="fib:12", random_functions=20)
        assert run_universality(cfg).passed

    def test_universality_fib13(self):
        cfg = config(kind="universality", lattice="fib:13", random_functions=6)
        assert run_universality(cfg).passed

    def test_universality_cheb_fib14(self):
        cfg = config(kind="universality", lattice="fib:14", random_functions=10)
        run = run_universality(cfg)
        cheb = [r for r in run.records if r.parameters.get("method") == "cheb"]
        assert len(cheb) == 10
        assert all(r.passed for r in cheb)
        assert run.passed
