import math
import unittest

import numpy as np
import pytest

from nearbest.conformal import (
    FaberBasis,
    SegmentMap,
    ZipperMap,
    build_exterior_map,
    faber_basis,
    gamma_ray,
    level_line,
    ray_curve_rows,
    rho,
    rho_exponent,
    rho_star,
)
from nearbest.constants import Side
from nearbest.exceptions import MapAccuracyError, ParameterRangeError
from nearbest.geometry import Arc


class TestSegmentMap(unittest.TestCase):
    def setUp(self):
        self.emap = build_exterior_map(Arc.polyline([-1, 1]))

    def test_closed_form_is_used(self):
        self.assertIsInstance(self.emap, SegmentMap)
        self.assertAlmostEqual(self.emap.capacity, 0.5)

    def test_joukowski_values(self):
        self.assertAlmostEqual(complex(self.emap.phi(2.0)), 2.0 + math.sqrt(3.0))
        w = np.array([1.5j, -2.0 + 0.5j])
        np.testing.assert_allclose(self.emap.psi(w), 0.5 * (w + 1 / w))

    def test_round_trip_and_boundary(self):
        self.assertLess(self.emap.round_trip_error(), 1e-12)
        self.assertLess(self.emap.boundary_deviation(), 1e-12)

    def test_left_bank_is_the_upper_half_plane(self):
        theta = self.emap.boundary_angle(0.5, Side.LEFT)
        self.assertAlmostEqual(theta, math.pi / 2)
        line = level_line(self.emap, 0.2, Side.LEFT, 33)
        self.assertTrue(np.all(line.imag >= -1e-14))
        self.assertGreater(line[16].imag, 0.0)
        line = level_line(self.emap, 0.2, Side.RIGHT, 33)
        self.assertTrue(np.all(line.imag <= 1e-14))

    def test_boundary_angle_at_endpoints(self):
        self.assertAlmostEqual(self.emap.boundary_angle(0.0, Side.LEFT), math.pi)
        self.assertAlmostEqual(self.emap.boundary_angle(1.0, Side.RIGHT), 0.0)

    def test_invalid_side_and_parameter(self):
        with self.assertRaises(ParameterRangeError):
            self.emap.boundary_angle(0.5, 3)
        with self.assertRaises(ParameterRangeError):
            self.emap.boundary_angle(1.5, Side.LEFT)

    def test_laurent_coefficients(self):
        cap, b = self.emap.laurent_coefficients(3)
        self.assertAlmostEqual(cap, 0.5, places=10)
        np.testing.assert_allclose(b, [0, 0.5, 0, 0], atol=1e-10)


def test_rho_on_the_segment():
    emap = build_exterior_map(Arc.polyline([-1, 1]))
    r = 1.1
    assert rho(emap, 0j, 0.1, Side.LEFT) == pytest.approx(0.5 * (r - 1 / r), rel=1e-6)
    assert rho_star(emap, 0j, 0.1) == pytest.approx(0.5 * (r - 1 / r), rel=1e-6)
    assert rho(emap, 1 + 0j, 0.1, Side.RIGHT) == pytest.approx(0.5 * (r + 1 / r) - 1, rel=1e-5)


def test_rho_exponents_at_interior_and_endpoint():
    emap = build_exterior_map(Arc.polyline([-1, 1]))
    us = [1e-3, 3e-3, 1e-2]
    assert rho_exponent(emap, 0j, Side.LEFT, us) == pytest.approx(1.0, abs=0.05)
    assert rho_exponent(emap, 1 + 0j, Side.LEFT, us) == pytest.approx(2.0, abs=0.05)


def test_level_line_arguments():
    emap = build_exterior_map(Arc.polyline([-1, 1]))
    with pytest.raises(ParameterRangeError):
        level_line(emap, 0.0, Side.LEFT, 10)
    with pytest.raises(ParameterRangeError):
        level_line(emap, 0.1, Side.LEFT, 1)


def test_unreachable_accuracy():
    with pytest.raises(MapAccuracyError) as info:
        SegmentMap(Arc.polyline([-1, 1]), target_accuracy=0.0)
    assert info.value.achieved < 1e-12


def test_gamma_ray_on_the_segment():
    emap = build_exterior_map(Arc.polyline([-1, 1]))
    ray = gamma_ray(emap, 0.5, Side.LEFT, 1.5, count=16)
    np.testing.assert_allclose(ray.points.real, 0.0, atol=1e-14)
    assert np.all(ray.points.imag > 0)
    assert ray.tip() == pytest.approx(0.5j * (1.5 - 1 / 1.5))
    lo, hi = ray.distance_ratio()
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    with pytest.raises(ParameterRangeError):
        gamma_ray(emap, 0.5, Side.LEFT, 1.0)


class TestFaberBasis(unittest.TestCase):
    def setUp(self):
        self.basis = faber_basis(build_exterior_map(Arc.polyline([-1, 1])), 8)

    def test_basis_type(self):
        self.assertIsInstance(self.basis, FaberBasis)
        self.assertEqual(self.basis.degree, 8)
        self.assertEqual(self.basis.evaluate(np.array([0.5]), 3).shape, (1, 4))

    def test_chebyshev_values(self):
        z = np.array([-0.7, 0.1, 0.9, 0.3 + 0.2j, 1.5j])
        values = self.basis.evaluate(z)
        np.testing.assert_allclose(values[:, 0], 1.0, atol=1e-10)
        for k in range(1, 9):
            e = np.zeros(k + 1)
            e[k] = 1.0
            np.testing.assert_allclose(values[:, k], 2 * np.polynomial.chebyshev.chebval(z, e), atol=1e-9)

    def test_monomial_coefficients(self):
        np.testing.assert_allclose(self.basis.monomial(2), [-2, 0, 4], atol=1e-9)
        np.testing.assert_allclose(self.basis.monomial(3), [0, -6, 0, 8], atol=1e-9)

    def test_degree_limits(self):
        with self.assertRaises(ParameterRangeError):
            self.basis.evaluate([0.0], degree=9)
        with self.assertRaises(ParameterRangeError):
            self.basis.monomial(9)
        with self.assertRaises(ParameterRangeError):
            FaberBasis(self.basis.map, -1)


def test_ray_curve_rows():
    rows = ray_curve_rows({"arc": np.array([1, 1j]), "ray": np.array([2 + 3j])})
    assert rows[1] == {"curve": "arc", "index": 1, "re": 0.0, "im": 1.0}
    assert rows[2]["curve"] == "ray"
    assert len(rows) == 3


@pytest.mark.slow
class TestCornerZipper(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.arc = Arc.polyline([1, 0, 1j])
        cls.emap = build_exterior_map(cls.arc, 1e-8, extra_params=(1.0,))

    def test_zipper_is_used_and_accurate(self):
        self.assertIsInstance(self.emap, ZipperMap)
        self.assertLess(self.emap.round_trip_error(), 1e-8)
        self.assertLess(self.emap.boundary_deviation(), 1e-6)

    def test_boundary_correspondence(self):
        for t in (0.25, 1.0, 1.6):
            for side in Side:
                theta = self.emap.boundary_angle(t, side)
                z = complex(self.emap.psi(np.exp(1j * theta)))
                self.assertLess(abs(z - complex(self.arc.evaluate(t))), 1e-6)

    def test_corner_rays_follow_the_bisectors(self):
        right = gamma_ray(self.emap, 1.0, Side.RIGHT, 1.3, count=16).points
        left = gamma_ray(self.emap, 1.0, Side.LEFT, 1.3, count=16).points
        np.testing.assert_allclose(right.real, right.imag, atol=1e-6)
        np.testing.assert_allclose(left.real, left.imag, atol=1e-6)
        self.assertTrue(np.all(right.real > 0))
        self.assertTrue(np.all(left.real < 0))

    def test_corner_distance_exponents(self):
        us = [1e-3, 3e-3, 1e-2]
        inner = rho_exponent(self.emap, 0j, Side.RIGHT, us)
        outer = rho_exponent(self.emap, 0j, Side.LEFT, us)
        self.assertAlmostEqual(inner, 0.5, delta=0.1)
        self.assertAlmostEqual(outer, 1.5, delta=0.1)
