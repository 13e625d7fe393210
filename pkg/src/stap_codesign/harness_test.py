# coding=utf-8
import csv
import json
import math
import os
import tempfile
import unittest
from unittest import mock

from . import cli
from .am_driver import RunOptions, IterateTrace, run
from .const import SOLVER_KIND, MULTIPLIER_MODE, TRACE_FORMAT
from .exceptions import ScenarioParseException, ScenarioValidationException, UnsupportedSolverException, \
    ValidationException, NumericalFailureException
from .harness import TRACE_COLUMNS, TABLE_COLUMNS, ExperimentSpec, load_scenario, load_default_scenario, \
    load_defaults, scenario_from_dict, run_comparison, emit_trace, emit_table, variant_label
from .radar_model import ScenarioConfig, ClutterConfig


def small_scenario():
    return ScenarioConfig(M=3, N=4, L=2, clutter=ClutterConfig(patches=5))


class TestScenarioLoading(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, text):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w") as f:
            f.write(text)
        return path

    def test_default_scenario(self):
        cfg = load_default_scenario()
        self.assertEqual((5, 8, 8), (cfg.M, cfg.N, cfg.L))
        self.assertEqual(25, cfg.clutter.patches)
        self.assertEqual(1.0, cfg.kappa)
        self.assertEqual(1.0, cfg.power)
        self.assertEqual((0.0, math.pi / 3, -0.1443),
                         (cfg.target.azimuth, cfg.target.elevation, cfg.target.doppler))
        self.assertEqual(1, len(cfg.interferers))
        self.assertEqual(0.3941, cfg.interferers[0].azimuth)
        self.assertEqual((-math.pi / 2, math.pi / 2), cfg.clutter.azimuth_span)
        self.assertEqual(ScenarioConfig(), cfg)

    def test_empty_file(self):
        with self.assertRaises(ScenarioParseException):
            load_scenario(self._write("empty.json", ""))

    def test_malformed_file(self):
        with self.assertRaises(ScenarioParseException):
            load_scenario(self._write("bad.json", "{\"dims\": "))
        with self.assertRaises(ScenarioParseException):
            load_scenario(self._write("list.json", "[1, 2]"))

    def test_missing_file(self):
        with self.assertRaises(ScenarioParseException):
            load_scenario(os.path.join(self.tmp.name, "missing.json"))

    def test_negative_power(self):
        with self.assertRaises(ScenarioValidationException) as ctx:
            load_scenario(self._write("power.json", json.dumps({"power": -1})))
        self.assertEqual("power", ctx.exception.field)

    def test_wrong_types(self):
        with self.assertRaises(ScenarioValidationException) as ctx:
            scenario_from_dict({"dims": {"M": 2.5}})
        self.assertEqual("M", ctx.exception.field)
        with self.assertRaises(ScenarioValidationException) as ctx:
            scenario_from_dict({"kappa": "one"})
        self.assertEqual("kappa", ctx.exception.field)

    def test_partial_document(self):
        cfg = load_scenario(self._write("partial.json", json.dumps({"dims": {"N": 4}, "power": 4.0, "seed": 7})))
        self.assertEqual(4, cfg.N)
        self.assertEqual(5, cfg.M)
        self.assertEqual(4.0, cfg.power)
        self.assertEqual(7, cfg.seed)


class TestDefaults(unittest.TestCase):

    def test_bundled(self):
        defaults = load_defaults()
        self.assertEqual(20, defaults.max_iter)
        self.assertEqual(0.0, defaults.obj_tol)
        self.assertEqual(MULTIPLIER_MODE.ROOT, defaults.lambda_mode)
        self.assertFalse(defaults.rescale)
        self.assertEqual(50, defaults.trials)
        self.assertEqual(SOLVER_KIND.ALL, defaults.solvers)
        self.assertEqual(TRACE_FORMAT.CSV, defaults.format)

    def test_user_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "user.conf")
            with open(path, "w") as f:
                f.write("[RUN]\nmax_iter = 5\nrescale = yes\n\n[EXPERIMENT]\nsolvers = qcqp, cls\n")
            defaults = load_defaults(path)
        self.assertEqual(5, defaults.max_iter)
        self.assertTrue(defaults.rescale)
        self.assertEqual([SOLVER_KIND.QCQP, SOLVER_KIND.CLS], defaults.solvers)
        self.assertEqual(50, defaults.trials)

    def test_invalid_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "user.conf")
            with open(path, "w") as f:
                f.write("[EXPERIMENT]\nsolvers = qcqp, aa2\n")
            with self.assertRaises(UnsupportedSolverException):
                load_defaults(path)
        with self.assertRaises(ValidationException):
            load_defaults(os.path.join("missing", "user.conf"))


class TestRunComparison(unittest.TestCase):

    def setUp(self):
        self.cfg = small_scenario()

    def test_initial_objective_table(self):
        traces, table = run_comparison(ExperimentSpec(scenario=self.cfg, solvers=[SOLVER_KIND.QCQP], trials=1,
                                                      max_iter=0))
        self.assertEqual(1, len(table.rows))
        row = table.rows[0]
        self.assertEqual("qcqp", row.label)
        self.assertEqual(traces[(SOLVER_KIND.QCQP, 0)].records[0].objective, row.mean_final_objective)
        self.assertEqual(0.0, row.std_final_objective)
        self.assertEqual(1, row.trials)
        expected = run(self.cfg, SOLVER_KIND.QCQP, RunOptions(max_iter=0, seed=0, trial=0))
        self.assertEqual(expected.final_objective, row.mean_final_objective)

    def test_deterministic(self):
        spec = ExperimentSpec(scenario=self.cfg, solvers=[SOLVER_KIND.QCQP, SOLVER_KIND.SDP], trials=2, max_iter=3,
                              seed=5)
        _, first = run_comparison(spec)
        _, second = run_comparison(spec)
        self.assertEqual(first, second)

    def test_trial_isolation(self):
        both, _ = run_comparison(ExperimentSpec(scenario=self.cfg, solvers=[SOLVER_KIND.QCQP, SOLVER_KIND.CLS],
                                                trials=2, max_iter=3))
        alone, _ = run_comparison(ExperimentSpec(scenario=self.cfg, solvers=[SOLVER_KIND.CLS], trials=2,
                                                 max_iter=3))
        for trial in range(2):
            self.assertEqual(both[(SOLVER_KIND.CLS, trial)].objectives(), alone[(SOLVER_KIND.CLS, trial)].objectives())

    def test_rescaled_and_zero_mode_labels(self):
        _, table = run_comparison(ExperimentSpec(scenario=self.cfg, solvers=[SOLVER_KIND.SDP], trials=2, max_iter=2,
                                                 lambda_mode=MULTIPLIER_MODE.ZERO, rescale=True))
        self.assertEqual(["sdp lambda=0", "sdp lambda=0 rescaled"], [r.label for r in table.rows])
        self.assertEqual("qcqp rescaled", variant_label(SOLVER_KIND.QCQP, MULTIPLIER_MODE.ROOT, True))

    def test_failed_cells_are_recorded(self):
        real_run = run

        def flaky_run(cfg, solver, opts, bundle):
            if solver == SOLVER_KIND.CLS and opts.trial == 1:
                raise NumericalFailureException("boom")
            return real_run(cfg, solver, opts, bundle)

        with mock.patch("stap_codesign.harness.run", side_effect=flaky_run):
            traces, table = run_comparison(ExperimentSpec(scenario=self.cfg,
                                                          solvers=[SOLVER_KIND.QCQP, SOLVER_KIND.CLS],
                                                          trials=2, max_iter=1))
        self.assertEqual(3, len(traces))
        self.assertEqual(1, len(table.failures))
        self.assertEqual((1, SOLVER_KIND.CLS), (table.failures[0].trial, table.failures[0].solver))
        self.assertEqual((1, 1), (table.row("cls").trials, table.row("cls").failed))
        self.assertEqual((2, 0), (table.row("qcqp").trials, table.row("qcqp").failed))

    def test_invalid_spec(self):
        with self.assertRaises(ValidationException):
            run_comparison(ExperimentSpec(scenario=self.cfg, trials=0))
        with self.assertRaises(ValidationException):
            run_comparison(ExperimentSpec(scenario=self.cfg, solvers=[]))
        with self.assertRaises(UnsupportedSolverException):
            run_comparison(ExperimentSpec(scenario=self.cfg, solvers=["aa2"]))


class TestEmit(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.cfg = small_scenario()

    def tearDown(self):
        self.tmp.cleanup()

    def test_empty_trace(self):
        path = os.path.join(self.tmp.name, "empty.csv")
        emit_trace(IterateTrace(SOLVER_KIND.QCQP, MULTIPLIER_MODE.ROOT, False, 0, 1.0, 1.0), path)
        with open(path) as f:
            self.assertEqual(",".join(TRACE_COLUMNS) + "\n", f.read())

    def test_csv_round_trip(self):
        trace = run(self.cfg, SOLVER_KIND.QCQP, RunOptions(max_iter=3)).trace
        path = os.path.join(self.tmp.name, "trace.csv")
        emit_trace(trace, path)
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(4, len(rows))
        self.assertEqual(TRACE_COLUMNS, list(rows[0].keys()))
        for row, record in zip(rows, trace.records):
            self.assertEqual(record.iteration, int(row["iter"]))
            self.assertEqual(record.objective, float(row["objective"]))
            self.assertEqual(record.capon_residual, float(row["capon_residual"]))
            self.assertEqual("", row["rescaled_objective"])
        self.assertEqual("", rows[0]["multiplier"])
        self.assertEqual(trace.records[2].multiplier, float(rows[2]["multiplier"]))

    def test_json_round_trip(self):
        trace = run(self.cfg, SOLVER_KIND.CLS, RunOptions(max_iter=2, rescale=True)).trace
        path = os.path.join(self.tmp.name, "trace.json")
        emit_trace(trace, path, TRACE_FORMAT.JSON)
        with open(path) as f:
            doc = json.load(f)
        self.assertEqual(SOLVER_KIND.CLS, doc["solver"])
        self.assertTrue(doc["rescaled"])
        self.assertEqual(3, len(doc["records"]))
        for row, record in zip(doc["records"], trace.records):
            self.assertEqual(TRACE_COLUMNS, list(row.keys()))
            self.assertEqual(record.objective, row["objective"])
            self.assertEqual(record.rescaled_objective, row["rescaled_objective"])
        self.assertIsNone(doc["records"][0]["step_w"])

    def test_table(self):
        _, table = run_comparison(ExperimentSpec(scenario=self.cfg, solvers=[SOLVER_KIND.QCQP], trials=2,
                                                 max_iter=1))
        path = os.path.join(self.tmp.name, "table.csv")
        emit_table(table, path)
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(TABLE_COLUMNS, list(rows[0].keys()))
        self.assertEqual("qcqp", rows[0]["label"])
        self.assertEqual(table.rows[0].mean_final_objective, float(rows[0]["mean_final_objective"]))
        self.assertEqual("2", rows[0]["trials"])

    def test_output_directory(self):
        out = os.path.join(self.tmp.name, "out")
        run_comparison(ExperimentSpec(scenario=self.cfg, solvers=[SOLVER_KIND.QCQP, SOLVER_KIND.CLS], trials=1,
                                      max_iter=1, output_path=out))
        self.assertEqual(["cls_root_trial000.csv", "qcqp_root_trial000.csv", "table.csv"], sorted(os.listdir(out)))


class TestCli(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.scenario = os.path.join(self.tmp.name, "scenario.json")
        with open(self.scenario, "w") as f:
            json.dump({"dims": {"M": 3, "N": 4, "L": 2}, "clutter": {"patches": 5}}, f)

    def tearDown(self):
        self.tmp.cleanup()

    def test_run(self):
        out = os.path.join(self.tmp.name, "trace.csv")
        code = cli.main(["run", "--scenario", self.scenario, "--solver", "sdp", "--iters", "2", "--out", out])
        self.assertEqual(cli.EXIT_OK, code)
        with open(out) as f:
            self.assertEqual(4, len(f.read().splitlines()))

    def test_montecarlo(self):
        out = os.path.join(self.tmp.name, "table.csv")
        code = cli.main(["montecarlo", "--scenario", self.scenario, "--solver", "qcqp,cls", "--trials", "2",
                         "--iters", "1", "--rescale", "--out", out])
        self.assertEqual(cli.EXIT_OK, code)
        with open(out, newline="") as f:
            labels = [row["label"] for row in csv.DictReader(f)]
        self.assertEqual(["qcqp", "cls", "qcqp rescaled", "cls rescaled"], labels)

    def test_validation_exit_code(self):
        bad = os.path.join(self.tmp.name, "bad.json")
        with open(bad, "w") as f:
            json.dump({"power": -1}, f)
        self.assertEqual(cli.EXIT_VALIDATION, cli.main(["run", "--scenario", bad]))
        self.assertEqual(cli.EXIT_VALIDATION, cli.main(["compare", "--scenario", self.scenario, "--solver", "aa2"]))

    def test_numerical_exit_code(self):
        with mock.patch.object(cli, "run", side_effect=NumericalFailureException("boom")):
            self.assertEqual(cli.EXIT_NUMERICAL, cli.main(["run", "--scenario", self.scenario]))


if __name__ == '__main__':
    unittest.main()
