import math
import unittest

import numpy as np
import pytest

from nearbest.constants import LemniscateRegion
from nearbest.exceptions import (
    AdmissibilityError,
    ArcGeometryError,
    JumpOrderError,
    ParameterRangeError,
)
from nearbest.expressions import parse_expression
from nearbest.geometry import (
    Arc,
    Branch,
    Lemniscate,
    Piece,
    PiecewiseAnalyticFunction,
    arc_eval,
    check_admissibility,
    check_declared_orders,
    d_of_E,
    jump_order,
    lemniscate_classify,
    lemniscate_eval,
    quasi_smoothness_constant,
    subarc_length,
    taylor_coefficients,
    taylor_jump_constant,
    wedge_lemniscate_order,
)


def corner_arc() -> Arc:
    return Arc.polyline([1, 0, 1j])


def corner_function(right: str = "z", order: int = 0) -> PiecewiseAnalyticFunction:
    arc = corner_arc()
    branches = (Branch(parse_expression("0"), 0j, math.inf), Branch(parse_expression(right), 0j, math.inf))
    return PiecewiseAnalyticFunction(arc, (1.0,), branches, (order,))


class TestArc(unittest.TestCase):
    def setUp(self):
        self.arc = corner_arc()

    def test_parametrization(self):
        self.assertEqual(self.arc.t_max, 2.0)
        np.testing.assert_allclose(arc_eval(self.arc, [0.0, 0.5, 1.0, 1.5, 2.0]), [1, 0.5, 0, 0.5j, 1j], atol=1e-15)
        self.assertAlmostEqual(self.arc.total_length, 2.0)
        self.assertAlmostEqual(float(self.arc.length_at(1.25)), 1.25)

    def test_tangent_follows_pieces(self):
        np.testing.assert_allclose(self.arc.tangent([0.5, 1.5]), [-1, 1j], atol=1e-15)

    def test_subarc_length(self):
        self.assertAlmostEqual(subarc_length(self.arc, 0.25, 1.75), 1.5)
        self.assertEqual(subarc_length(self.arc, 1.0, 1.0), 0.0)

    def test_subarc_length_rejects_reversed_parameters(self):
        with self.assertRaises(ParameterRangeError):
            subarc_length(self.arc, 1.75, 0.25)

    def test_subarc_length_rejects_out_of_range(self):
        with self.assertRaises(ParameterRangeError):
            subarc_length(self.arc, 0.5, 2.5)
        with self.assertRaises(ParameterRangeError):
            subarc_length(self.arc, -0.5, 1.0)

    def test_subarc_length_is_additive(self):
        arc = Arc((Piece.segment(2.0, 1.0), Piece.circular(1.0, 0.0, np.pi / 2)))
        for t1, t2, t3 in [(0.2, 0.7, 1.6), (0.5, 1.0, 2.0), (1.1, 1.4, 1.9), (0.0, 1.3, 2.0)]:
            whole = subarc_length(arc, t1, t3)
            parts = subarc_length(arc, t1, t2) + subarc_length(arc, t2, t3)
            self.assertLessEqual(abs(parts - whole), 1e-10 * whole)
        self.assertAlmostEqual(subarc_length(arc, 1.0, 2.0), np.pi / 2, places=12)
        self.assertAlmostEqual(subarc_length(arc, 0.5, 1.5), 0.5 + np.pi / 4, places=12)

    def test_parameter_out_of_range(self):
        with self.assertRaises(ParameterRangeError):
            self.arc.evaluate(2.5)

    def test_projection_and_distance(self):
        z = np.array([0.5 + 0.1j, 0.2 + 0.9j])
        np.testing.assert_allclose(self.arc.distance(z), [0.1, 0.2], atol=1e-14)
        np.testing.assert_allclose(self.arc.project(0.5 + 0.1j), 0.5, atol=1e-14)

    def test_circular_piece(self):
        arc = Arc((Piece.circular(1.0, 0.0, np.pi / 2),))
        self.assertAlmostEqual(arc.total_length, np.pi / 2)
        np.testing.assert_allclose(arc.end, 1j, atol=1e-15)
        np.testing.assert_allclose(abs(arc.evaluate(0.3)), 1.0)

    def test_gap_between_pieces(self):
        with self.assertRaises(ArcGeometryError):
            Arc((Piece.segment(0, 1), Piece.segment(2, 3)))

    def test_self_intersection(self):
        with self.assertRaises(ArcGeometryError):
            Arc.polyline([0, 2, 2 + 1j, 1 - 1j])

    def test_closed_curve_is_not_an_arc(self):
        with self.assertRaises(ArcGeometryError):
            Arc.polyline([0, 1, 1j, 0])


def test_quasi_smoothness_segment_and_corner():
    assert quasi_smoothness_constant(Arc.polyline([-1, 1]), 64) == pytest.approx(1.0)
    corner = quasi_smoothness_constant(corner_arc(), 256)
    assert 1.3 < corner <= math.sqrt(2) + 1e-9


def test_quasi_smoothness_never_decreases_with_more_samples():
    arc = Arc.polyline([1, 0, 1j, 1j - 1])
    assert quasi_smoothness_constant(arc, 64) <= quasi_smoothness_constant(arc, 256) + 1e-15


class TestLemniscate(unittest.TestCase):
    def setUp(self):
        self.lem = Lemniscate(4, 1.0)

    def test_center_lies_on_the_lemniscate(self):
        self.assertAlmostEqual(abs(complex(self.lem.normalized(0.0))), 1.0)

    def test_coefficients_match_product(self):
        lem = Lemniscate(3, 1.25, 0.5 + 0.25j)
        z = np.array([0.3 + 0.2j, -1.1, 2j])
        values = np.polynomial.polynomial.polyval(z, lem.coefficients())
        np.testing.assert_allclose(values, lem.normalized(z), atol=1e-13)

    def test_classify(self):
        regions = lemniscate_classify(self.lem, [0.5, 0.0, 2.0])
        self.assertEqual(list(regions), [LemniscateRegion.INSIDE.value, LemniscateRegion.ON.value,
                                         LemniscateRegion.OUTSIDE.value])

    def test_d_of_E(self):
        E = 1j * np.linspace(0.5, 1.0, 101)
        self.assertAlmostEqual(d_of_E(self.lem, E), 0.0625)
        with self.assertRaises(AdmissibilityError):
            d_of_E(self.lem, [0.0])

    def test_invalid_parameters(self):
        with self.assertRaises(ParameterRangeError):
            Lemniscate(0, 1.0)
        with self.assertRaises(ParameterRangeError):
            Lemniscate(2, -1.0)


def test_corner_inside_quartic_lemniscate_is_admissible():
    rays = np.exp(1j * np.pi / 4) * np.linspace(0.01, 0.5, 50)
    report = check_admissibility(Lemniscate(4, 1.0), corner_arc(), 1.0, ray_points=rays)
    assert report.admissible
    assert report.max_modulus_far < 1.0
    assert report.min_ray_modulus > 1.0


def test_arc_crossing_the_lemniscate_is_rejected():
    arc = Arc.polyline([1.5, 0, 1j])
    with pytest.raises(AdmissibilityError):
        check_admissibility(Lemniscate(4, 1.0), arc, 1.0)
    report = check_admissibility(Lemniscate(4, 1.0), arc, 1.0, raise_on_failure=False)
    assert not report.admissible
    assert "designated point" in report.reason


def test_designated_point_off_the_lemniscate():
    report = check_admissibility(Lemniscate(4, 1.0, 0.1), corner_arc(), 1.0, raise_on_failure=False)
    assert not report.admissible


@pytest.mark.parametrize("angle, order", [(np.pi, 2), (np.pi / 2, 4), (2 * np.pi / 3, 3), (1.0, 6)])
def test_wedge_lemniscate_order(angle, order):
    assert wedge_lemniscate_order(angle) == order


class TestPiecewiseFunction(unittest.TestCase):
    def test_evaluate_by_branch(self):
        f = corner_function()
        np.testing.assert_allclose(f.evaluate([0.5, 1.0, 1.5]), [0, 0, 0.5j], atol=1e-15)

    def test_jump_convention(self):
        f = corner_function()
        np.testing.assert_allclose(f.jump(0, np.array([0.1j, 2.0])), [-0.1j, -2.0])

    def test_entire_branches_have_infinite_radius(self):
        self.assertEqual(corner_function().neighborhood_radius(0), math.inf)

    def test_finite_branch_disks(self):
        arc = corner_arc()
        branches = (Branch(parse_expression("0"), 0.5, 1.0), Branch(parse_expression("1/(z-2)"), 0.5j, 1.0))
        f = PiecewiseAnalyticFunction(arc, (1.0,), branches, (0,))
        self.assertAlmostEqual(f.neighborhood_radius(0), 0.5)

    def test_branch_disk_must_cover_subarc(self):
        arc = corner_arc()
        branches = (Branch(parse_expression("0"), 0.0, 0.5), Branch(parse_expression("z"), 0.0, math.inf))
        with self.assertRaises(ParameterRangeError):
            PiecewiseAnalyticFunction(arc, (1.0,), branches, (0,))

    def test_branch_count(self):
        with self.assertRaises(ParameterRangeError):
            PiecewiseAnalyticFunction(corner_arc(), (1.0,), (Branch(parse_expression("z"), 0j, math.inf),), (0,))

    def test_negative_order(self):
        with self.assertRaises(JumpOrderError):
            corner_function(order=-1)

    def test_singular_point_on_the_boundary(self):
        with self.assertRaises(ParameterRangeError):
            PiecewiseAnalyticFunction(corner_arc(), (2.0,),
                                      (Branch(parse_expression("0"), 0j, math.inf),
                                       Branch(parse_expression("z"), 0j, math.inf)), (0,))


def test_jump_orders():
    assert jump_order(corner_function("z"), 0) == 0
    assert jump_order(corner_function("z^3", 2), 0) == 2
    assert check_declared_orders(corner_function("z^3", 2)) == []
    assert check_declared_orders(corner_function("z^3", 0)) == [(0, 0, 2)]


def test_identical_branches_have_no_jump_order():
    with pytest.raises(JumpOrderError):
        jump_order(corner_function("0"), 0)


def test_taylor_data():
    coeffs = taylor_coefficients(np.exp, 0.0, 1.0, 8)
    np.testing.assert_allclose(coeffs, [1 / math.factorial(r) for r in range(8)], atol=1e-14)
    assert taylor_jump_constant(corner_function("z^3", 2), 0) == pytest.approx(1.0)


def test_lemniscate_eval():
    np.testing.assert_allclose(lemniscate_eval(Lemniscate(2, 1.0), [0, 2, 1j]), [-1, 3, -2], atol=1e-14)
    np.testing.assert_allclose(lemniscate_eval(Lemniscate(2, 2.0, 1.0), [1.0]), [-4.0], atol=1e-14)
