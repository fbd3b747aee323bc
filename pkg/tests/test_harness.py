import json
import math
import os
import tempfile
import unittest
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from nearbest.constants import CSV_SCHEMA, RateModel
from nearbest.constructor import DAMPING_SAFETY, DampingReport
from nearbest.exceptions import ParameterRangeError, RateFitError
from nearbest.geometry import Arc
from nearbest.harness import (
    ENTABLE_HEADER,
    ResultRow,
    VerifyReport,
    build_arc,
    build_function,
    compact_margins,
    construct_one,
    csv_header,
    damped_error_bound,
    entable_records,
    fit_rate,
    geometry_rows,
    run_scenario,
    segment_oracle_checks,
    verify_suite,
    write_run,
)
from nearbest.result_store import ResultStore, read_csv
from nearbest.schemas import load_config, parse_config

TEMPLATES = Path(__file__).resolve().parents[1] / "templates"


def config_text(mode="theorem2", degrees=(8, 16), **extra) -> str:
    data = {
        "name": "segment",
        "mode": mode,
        "arc": {"vertices": [-1, 1]},
        "function": {
            "branches": [{"formula": "-z"}, {"formula": "z"}],
            "singularities": [{"t": 0.5, "order": 0}],
        },
        "lemniscates": [{"order": 2, "radius": 1.0}] if mode == "theorem2" else [],
        "degrees": list(degrees),
        "compact_sets": [{"label": "E1", "t_lo": 0.75, "t_hi": 1.0}],
    }
    data.update(extra)
    return json.dumps(data)


def rows_of(fn, ns=range(1, 11)):
    return [{"n": n, "err": fn(n)} for n in ns]


class TestFitRate(unittest.TestCase):
    def test_geometric(self):
        fit = fit_rate(rows_of(lambda n: 3.0 * math.exp(-0.2 * n)), "geometric", "err")
        self.assertEqual(fit.model, RateModel.GEOMETRIC)
        self.assertAlmostEqual(fit.b, 0.2, places=10)
        self.assertAlmostEqual(fit.a, math.log(3.0), places=10)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=10)
        self.assertIsNone(fit.sigma)
        self.assertFalse(fit.no_decay)

    def test_stretched(self):
        fit = fit_rate(rows_of(lambda n: math.exp(-2.0 * math.sqrt(n))), RateModel.STRETCHED, "err", sigma=0.5)
        self.assertAlmostEqual(fit.b, 2.0, places=10)
        self.assertEqual(fit.sigma, 0.5)

    def test_powerlaw(self):
        fit = fit_rate(rows_of(lambda n: n ** -3.0), "powerlaw", "err")
        self.assertAlmostEqual(fit.b, 3.0, places=10)

    def test_constant_column_has_no_decay(self):
        fit = fit_rate(rows_of(lambda n: 0.25), "geometric", "err")
        self.assertEqual(fit.b, 0.0)
        self.assertTrue(fit.no_decay)
        self.assertTrue(fit.as_dict()["no_decay"])

    def test_rows_below_the_floor_are_excluded(self):
        rows = rows_of(lambda n: math.exp(-0.5 * n))
        rows.append({"n": 11, "err": 1e-20})
        rows.append({"n": 12, "err": float("nan")})
        rows.append({"n": 13, "err": None})
        fit = fit_rate(rows, "geometric", "err")
        self.assertEqual(fit.excluded, (11, 12, 13))
        self.assertEqual(len(fit.used), 10)
        self.assertAlmostEqual(fit.b, 0.5, places=10)

    def test_too_few_rows(self):
        with self.assertRaises(RateFitError):
            fit_rate(rows_of(lambda n: 1.0 / n, ns=range(1, 4)), "geometric", "err")
        with self.assertRaises(ValueError):
            fit_rate(rows_of(lambda n: 1.0 / n), "cubic", "err")


def test_result_row_ratio_and_record():
    row = ResultRow(8, E_n=0.1, sup_L_err=0.2, sup_E_err={"E1": 0.01})
    assert row.near_best_ratio == pytest.approx(2.0)
    record = row.as_record()
    assert record["sup_E1_err"] == 0.01
    assert math.isnan(record["wall_ms"])
    assert math.isnan(ResultRow(8, E_n=0.0, sup_L_err=0.2).near_best_ratio)


def test_csv_header_follows_compact_sets():
    config = parse_config(config_text())
    assert csv_header(config) == ["n", "E_n", "E_n_lower", "sup_L_err", "sup_E1_err",
                                  "d_n", "m_damping", "near_best_ratio", "wall_ms"]


def test_builders():
    config = parse_config(config_text(arc={"pieces": [{"start": -1, "end": 0},
                                                      {"kind": "circular_arc", "start": 0, "center": 1,
                                                       "sweep": 1.0}]}))
    arc = build_arc(config.arc)
    assert len(arc.pieces) == 2
    f = build_function(config.function, arc)
    assert f.singular_params == (0.5,)
    assert f.orders == (0,)
    np.testing.assert_allclose(f.branches[1](np.array([0.5 + 0j])), [0.5])


class TestBestApproxRun(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.config = parse_config(config_text(mode="bestapprox", degrees=(0, 1, 2, 4)))
        cls.result = run_scenario(cls.config, threads=2)

    def test_rows(self):
        rows = self.result.rows
        self.assertEqual([r.n for r in rows], [0, 1, 2, 4])
        self.assertFalse(self.result.failed_rows)
        self.assertAlmostEqual(rows[1].E_n, 0.5, delta=1e-3)
        self.assertTrue(all(a.E_n >= b.E_n for a, b in zip(rows, rows[1:])))
        self.assertTrue(math.isnan(rows[0].d_n))
        self.assertAlmostEqual(rows[3].d_n, 0.5 * (1.25 - 0.8), places=6)
        self.assertTrue(math.isnan(rows[1].sup_L_err))

    def test_entable_records(self):
        records = entable_records(self.result)
        self.assertEqual(set(records[0]), set(ENTABLE_HEADER))
        self.assertEqual(records[2]["n"], 2)

    def test_write_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_run(self.result, ResultStore(tmp))
            self.assertEqual(set(paths), {"csv", "json"})
            self.assertEqual(os.path.basename(paths["csv"]), "segment.csv")
            rows = read_csv(paths["csv"])
            self.assertEqual([r["n"] for r in rows], [0.0, 1.0, 2.0, 4.0])
            with open(paths["json"], encoding="utf-8") as f:
                sidecar = json.load(f)
            self.assertEqual(sidecar["csv_schema"], CSV_SCHEMA)
            self.assertEqual(sidecar["mode"], "bestapprox")
            self.assertEqual(sidecar["sampling"]["map"], "SegmentMap")
            self.assertEqual(len(sidecar["rows"]), 4)

    def test_construct_needs_a_constructing_mode(self):
        with self.assertRaises(ParameterRangeError):
            construct_one(self.config, 4)


class TestTheorem2Run(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.config = parse_config(config_text())
        cls.result = run_scenario(cls.config)

    def test_rows_carry_near_best_errors(self):
        self.assertFalse(self.result.failed_rows)
        row8, row16 = self.result.rows
        self.assertLess(row16.sup_L_err, row8.sup_L_err)
        self.assertLessEqual(row8.E_n, row8.sup_L_err)
        self.assertIn("E1", row16.sup_E_err)
        self.assertLessEqual(row16.sup_E_err["E1"], row16.sup_L_err)
        self.assertEqual(row8.m_damping, 2.0)
        self.assertGreater(row8.near_best_ratio, 1.0)

    def test_rates_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_run(self.result, ResultStore(tmp))
            with open(paths["rates"], encoding="utf-8") as f:
                rates = json.load(f)
        self.assertIn("error", rates["fits"]["sup_L_err"]["geometric"])
        self.assertIn("sup_E1_err", rates["fits"])


class TestTwoJumpsRun(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        config = load_config(TEMPLATES / "two_jumps_theorem2.json")
        cls.config = config.model_copy(update={"degrees": [16, 24]})
        cls.result = run_scenario(cls.config)

    def test_each_jump_gets_its_own_damping(self):
        self.assertFalse(self.result.failed_rows, [r.error for r in self.result.failed_rows])
        for row in self.result.rows:
            damping = row.polynomial.damping
            self.assertEqual(sorted(damping.exponents), ["0:1", "0:2", "1:1", "1:2"])
            self.assertGreater(damping.exponent_at(0), 0)
            self.assertGreater(damping.exponent_at(1), 0)
            self.assertTrue(damping.holds, damping.failures)
            self.assertEqual(len(row.polynomial.d_n), 2)

    def test_margins_per_lemniscate(self):
        E1 = next(c for c in self.result.scenario.compact_sets if c.label == "E1")
        margins = compact_margins(self.result.scenario, E1)
        # x in [0.8, 1]: the jump at x = 0.5 is closer, so its lemniscate damps less
        self.assertAlmostEqual(margins[1], 0.09 / 1.5625, places=9)
        self.assertAlmostEqual(margins[0], 2.0 - 2.25 / 1.5625, places=9)
        for row in self.result.rows:
            bound = damped_error_bound(row, margins)
            m = row.polynomial.damping.exponent_at(1)
            self.assertAlmostEqual(bound, row.sup_L_err * (1.0 - margins[1]) ** m * DAMPING_SAFETY)
            self.assertLessEqual(row.sup_E_err["E1"], row.sup_L_err)

    def test_verify_suite(self):
        report = verify_suite(self.config, oracle=False)
        self.assertTrue(report.passed, report.lines())
        names = [c.name for c in report.checks]
        self.assertNotIn("E1: inside the lemniscates", names)


def test_segment_oracle():
    report = VerifyReport("oracle")
    segment_oracle_checks(report)
    assert len(report.checks) == 6
    assert report.passed, report.lines()
    assert report.exit_code == 0
    alternation = next(c for c in report.checks if "alternation" in c.name)
    assert not alternation.hard
    assert alternation.passed
    assert alternation.measured >= 3


def test_verify_report_hard_and_soft_checks():
    report = VerifyReport("demo")
    report.add("soft", 2.0, 1.0, False, hard=False)
    assert report.passed
    assert report.summary() == "all hard checks passed; 1 soft check failed (reported, exit status unaffected)"
    report.add("hard", 2.0, 1.0, False, detail="too big")
    assert not report.passed
    assert report.exit_code == 1
    assert report.lines()[1] == "FAIL [hard] hard: measured=2 threshold=1 (too big)"
    assert report.as_dict()["passed"] is False
    assert report.summary().startswith("hard check failed")


def test_verify_report_summary_without_soft_failures():
    report = VerifyReport("demo")
    report.add("fine", 0.0, 1.0, True, hard=False)
    assert report.summary() == "all hard checks passed"
    assert report.soft_failures == []


def test_damped_error_bound_takes_the_slowest_jump():
    damping = DampingReport("lemniscate", exponents={"0:1": 4, "0:2": 5, "1:1": 2, "1:2": 3})
    row = ResultRow(16, sup_L_err=0.01, polynomial=SimpleNamespace(damping=damping))
    margins = {0: 0.5, 1: 0.1}
    assert damping.exponent_at(0) == 4
    assert damping.exponent_at(1) == 2
    assert damped_error_bound(row, margins) == pytest.approx(0.01 * 0.9 ** 2 * DAMPING_SAFETY)


def test_verify_suite_on_bestapprox():
    config = parse_config(config_text(mode="bestapprox", degrees=(1, 2, 4)))
    report = verify_suite(config, oracle=False)
    names = [c.name for c in report.checks]
    assert "scenario builds" in names
    assert "rows completed" in names
    assert report.passed, report.lines()


@pytest.mark.slow
def test_verify_suite_reports_inadmissible_lemniscate():
    text = config_text(arc={"vertices": [1.5, 0, [0, 1]]},
                       function={"branches": [{"formula": "0"}, {"formula": "z"}],
                                 "singularities": [{"t": 1.0}]},
                       lemniscates=[{"order": 4}],
                       compact_sets=[])
    report = verify_suite(parse_config(text), oracle=False)
    assert not report.passed
    check = report.checks[-1]
    assert check.name == "scenario builds"
    assert "AdmissibilityError" in check.detail


def test_geometry_rows():
    rows = geometry_rows(parse_config(config_text()), count=32)
    curves = {row["curve"] for row in rows}
    assert curves == {"arc", "ray_0_1", "ray_0_2", "level_8_1", "level_8_2", "level_16_1", "level_16_2"}
    arc = [row for row in rows if row["curve"] == "arc"]
    assert len(arc) == 32
    assert arc[0]["re"] == pytest.approx(-1.0)
    assert Arc.polyline([-1, 1]).distance(complex(arc[5]["re"], arc[5]["im"])) < 1e-12
