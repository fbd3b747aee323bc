import math
import unittest

import numpy as np
import pytest

from nearbest.bestapprox import sup_error
from nearbest.conformal import build_exterior_map
from nearbest.constants import POLYNOMIAL_SCHEMA, Mode
from nearbest.constructor import (
    CompactSet,
    build_rules,
    cauchy_split,
    choose_lambda,
    compute_dn,
    construct,
    construct_theorem1,
    construct_theorem2,
    damping_report,
    eval_nearbest,
    make_scenario,
    smallest_damping_degree,
    two_sided_law,
)
from nearbest.exceptions import AdmissibilityError, DegreeBudgetError, ParameterRangeError
from nearbest.expressions import parse_expression
from nearbest.geometry import Arc, Branch, Lemniscate, PiecewiseAnalyticFunction


def abs_on_segment() -> PiecewiseAnalyticFunction:
    arc = Arc.polyline([-1, 1])
    branches = (Branch(parse_expression("-z"), 0j, math.inf), Branch(parse_expression("z"), 0j, math.inf))
    return PiecewiseAnalyticFunction(arc, (0.5,), branches, (0,))


def segment_scenario(max_degree: int = 16, **kwargs):
    f = abs_on_segment()
    return make_scenario(f.arc, f, Mode.THEOREM2, max_degree, lemniscates=[Lemniscate(2, 1.0)], **kwargs)


def test_choose_lambda():
    emap = build_exterior_map(Arc.polyline([-1, 1]))
    assert choose_lambda(emap, 0.5, math.inf) == 2.0
    lam = choose_lambda(emap, 0.5, 0.1)
    assert 0.1 + math.sqrt(1.01) - 2e-3 <= lam <= 0.1 + math.sqrt(1.01)
    with pytest.raises(ParameterRangeError):
        choose_lambda(emap, 0.5, 1e-6)


def test_compute_dn():
    emap = build_exterior_map(Arc.polyline([-1, 1]))
    assert compute_dn(emap, 0j, 10) == pytest.approx(0.5 * (1.1 - 1 / 1.1), rel=1e-6)
    with pytest.raises(ParameterRangeError):
        compute_dn(emap, 0j, 0)


def test_scenario_needs_admissible_lemniscates():
    f = abs_on_segment()
    with pytest.raises(AdmissibilityError):
        make_scenario(f.arc, f, Mode.THEOREM2, 8)
    with pytest.raises(AdmissibilityError):
        make_scenario(f.arc, f, Mode.THEOREM2, 8, lemniscates=[Lemniscate(4, 1.0)])
    with pytest.raises(ParameterRangeError):
        make_scenario(f.arc, f, Mode.THEOREM2, 0, lemniscates=[Lemniscate(2, 1.0)])


class TestTheorem2OnSegment(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.scenario = segment_scenario(compact_sets=[CompactSet("E", 0.0, 0.3)])
        cls.P8 = construct_theorem2(cls.scenario, 8, check_quadrature=True)
        cls.P16 = construct(cls.scenario, 16)

    def test_scenario_setup(self):
        setup = self.scenario.singularities[0]
        self.assertEqual(setup.z0, 0j)
        self.assertEqual(setup.lam, 2.0)
        self.assertEqual(self.scenario.max_degree, 16)
        self.assertEqual(self.scenario.faber.degree, 8)

    def test_degree_accounting(self):
        self.assertLessEqual(self.P8.kernel_degree, 8)
        self.assertEqual(self.P8.exponent, 2)
        self.assertEqual(self.P8.split.h2_degree, 4)
        self.assertEqual(self.P16.exponent, 4)
        with self.assertRaises(DegreeBudgetError):
            construct(self.scenario, 3)

    def test_split_removes_the_singularity(self):
        split = self.P16.split
        self.assertIn(split.signs[0], (1, -1))
        self.assertLess(split.separation[0], 0.9)
        self.assertLess(split.h2_decay[0], 0.0)

    def test_cauchy_split(self):
        dns, rules = build_rules(self.scenario, 8)
        self.assertAlmostEqual(dns[0], self.P8.d_n[0])
        split = cauchy_split(self.scenario, 8, rules)
        self.assertEqual(split.signs, self.P8.split.signs)
        self.assertEqual(split.h2_degree, 4)
        self.assertEqual(len(split.h1), len(self.scenario.values))
        h2 = self.scenario.values - split.h1
        self.assertLessEqual(split.h2.error, sup_error(h2, np.zeros_like(h2)) + 1e-12)

    def test_polynomial_is_exact_in_the_basis(self):
        self.assertLess(self.P8.projection_residual, 1e-6)
        self.assertTrue(np.isfinite(self.P8.quadrature_change))
        self.assertLess(self.P8.quadrature_change, 1e-3)
        self.assertTrue(math.isnan(self.P16.quadrature_change))

    def test_error_decreases_with_degree(self):
        values = self.scenario.values
        points = self.scenario.discretization.points
        e8 = sup_error(values, self.P8(points))
        e16 = sup_error(values, self.P16(points))
        self.assertLess(e16, 0.5)
        self.assertLess(e16, e8)

    def test_damping_report(self):
        report = damping_report(self.P8)
        self.assertEqual(report.kind, "lemniscate")
        self.assertEqual(report.exponents, {"0:1": 2, "0:2": 2})
        self.assertTrue(report.holds, report.failures)
        entry = report.compact["0:1:E"]
        self.assertAlmostEqual(entry["d_E"], 0.16, places=2)
        self.assertLessEqual(entry["measured"], entry["bound"])
        self.assertEqual(self.P8.parameters["0:1"], {"N": 2, "R": 1.0})

    def test_d_n_matches_the_level_line(self):
        self.assertAlmostEqual(self.P8.d_n[0], 0.5 * (1.125 - 1 / 1.125), places=6)

    def test_export(self):
        payload = self.P8.to_json()
        self.assertEqual(payload["schema"], POLYNOMIAL_SCHEMA)
        self.assertEqual(payload["degree"], 8)
        self.assertEqual(payload["mode"], "theorem2")
        self.assertEqual(len(payload["monomial_coefficients"]), 9)
        self.assertEqual(len(payload["arnoldi"]["coefficients"]), 9)
        self.assertEqual(len(payload["panels"]), 2)
        z = np.array([0.25, -0.6])
        coeffs = np.array([complex(re, im) for re, im in payload["monomial_coefficients"]])
        np.testing.assert_allclose(np.polynomial.polynomial.polyval(z, coeffs), eval_nearbest(self.P8, z),
                                   atol=1e-8)

    def test_mode_and_range_checks(self):
        with self.assertRaises(ParameterRangeError):
            construct_theorem1(self.scenario, 8)
        with self.assertRaises(ParameterRangeError):
            construct(self.scenario, 17)

    def test_smallest_damping_degree(self):
        self.assertEqual(smallest_damping_degree(self.scenario, [2, 3, 4, 8]), 4)


def test_bestapprox_scenarios_do_not_construct():
    f = abs_on_segment()
    scenario = make_scenario(f.arc, f, Mode.BESTAPPROX, 4)
    with pytest.raises(ParameterRangeError):
        construct(scenario, 4)


def test_two_sided_law():
    emap = build_exterior_map(Arc.polyline([-1, 1]))
    report = two_sided_law([(10, 0.02), (20, 0.01)], emap, [(0j, 0), (0.5 + 0j, 3)])
    assert report.k == 0
    rho10 = 0.5 * (1.1 - 1 / 1.1)
    assert report.ratios[10] == pytest.approx(0.02 / rho10, rel=1e-5)
    assert report.points[20] == 0j
    assert report.spread == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ParameterRangeError):
        two_sided_law([(10, 0.1)], emap, [])


@pytest.mark.slow
def test_theorem1_on_the_corner():
    arc = Arc.polyline([1, 0, 1j])
    branches = (Branch(parse_expression("0"), 0j, math.inf), Branch(parse_expression("z"), 0j, math.inf))
    f = PiecewiseAnalyticFunction(arc, (1.0,), branches, (0,))
    scenario = make_scenario(arc, f, Mode.THEOREM1, 64, sigma=0.5, nodes_per_degree=10)
    P = construct_theorem1(scenario, 64)
    assert P.kernel_degree <= 64
    assert P.damping.kind == "wedge"
    assert set(P.damping.classification) == {"0:1", "0:2"}
    assert all(meta["kappa"] >= 2 for meta in P.parameters.values())
    assert np.all(np.isfinite(P(scenario.discretization.points)))
