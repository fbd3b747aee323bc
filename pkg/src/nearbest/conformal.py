"""
Exterior conformal maps of arcs and the quantities derived from them.

Φ maps the complement of the arc onto |w| > 1 with Φ(∞) = ∞ and Φ'(∞) > 0;
Ψ = Φ^{-1}. A single segment gets the closed-form Joukowski map, every other
arc the geodesic zipper map. Level lines, the distances ρ^j_u and ρ*_u,
Γ-rays and Faber polynomials are all built on top of Φ and Ψ.

Side 1 is the left bank of the arc when walking from its start to its end,
side 2 the right bank. Along side 1 the boundary angle decreases with the arc
parameter; along side 2 it increases.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from nearbest.constants import MAP_TOLERANCE, MONOMIAL_DEGREE_LIMIT, RAY_SAMPLES, RHO_SAMPLES, Side
from nearbest.exceptions import MapAccuracyError, ParameterRangeError
from nearbest.geometry import Arc
from nearbest.logger import get_logger, log_stage

TWO_PI = 2.0 * np.pi

logger = get_logger(__name__)


def _side(side) -> Side:
    try:
        return Side(int(side))
    except (ValueError, TypeError):
        raise ParameterRangeError(f"Side must be 1 or 2, got {side!r}")


class ExteriorMap(ABC):
    """
    Conformal map of the arc exterior onto the exterior of the unit disk.

    Subclasses implement:
        - psi(w), dpsi(w): the inverse map and its derivative on |w| >= 1
        - phi(z): the forward map
        - endpoint_angles and _raw_angle: the boundary correspondence
    """

    arc: Arc
    capacity: float
    accuracy: float = float("nan")

    @abstractmethod
    def psi(self, w) -> np.ndarray:
        """Ψ(w) for |w| >= 1."""

    @abstractmethod
    def dpsi(self, w) -> np.ndarray:
        """Ψ'(w) for |w| > 1."""

    @abstractmethod
    def phi(self, z) -> np.ndarray:
        """Φ(z) for z off the arc; points on the arc land on one of the two banks."""

    @property
    @abstractmethod
    def endpoint_angles(self) -> Tuple[float, float]:
        """Angles of Φ at the arc start and end, in [0, 2π)."""

    @abstractmethod
    def _raw_angle(self, t: float, side: Side) -> float:
        """Boundary angle in [0, 2π) for a parameter strictly inside the arc."""

    def _left_side_angle(self) -> float:
        return self._raw_angle(0.5 * self.arc.t_max, Side.LEFT)

    def dphi(self, z) -> np.ndarray:
        return 1.0 / self.dpsi(self.phi(z))

    @cached_property
    def _side_intervals(self) -> Dict[Side, Tuple[float, float]]:
        first, last = self.endpoint_angles
        ccw = (first, first + np.mod(last - first, TWO_PI))          # start → end counter-clockwise
        cw = (last, last + np.mod(first - last, TWO_PI))             # end → start counter-clockwise
        left = self._left_side_angle()
        unwrapped = ccw[0] + np.mod(left - ccw[0], TWO_PI)
        if unwrapped <= ccw[1]:
            return {Side.LEFT: ccw, Side.RIGHT: cw}
        return {Side.LEFT: cw, Side.RIGHT: ccw}

    def side_interval(self, side) -> Tuple[float, float]:
        """Unwrapped (low, high) angles of the circle arc Δ_side."""
        return self._side_intervals[_side(side)]

    def boundary_angle(self, t: float, side) -> float:
        """
        Angle θ with Ψ(e^{iθ}) equal to the arc point at parameter t on the given side.

        Args:
            t: Arc parameter in [0, t_max]
            side: 1 (left bank) or 2 (right bank)

        Returns:
            θ in [0, 2π)

        Raises:
            ParameterRangeError: For an invalid side or a parameter off the arc
        """
        side = _side(side)
        t = float(t)
        if t < -1e-12 or t > self.arc.t_max + 1e-12:
            raise ParameterRangeError(f"Arc parameter {t} outside [0, {self.arc.t_max}]")
        first, last = self.endpoint_angles
        if t <= 1e-14:
            return float(np.mod(first, TWO_PI))
        if t >= self.arc.t_max - 1e-14:
            return float(np.mod(last, TWO_PI))
        return float(np.mod(self._raw_angle(t, side), TWO_PI))

    def unwrapped_angle(self, t: float, side) -> float:
        """boundary_angle placed inside side_interval(side)."""
        low, _ = self.side_interval(side)
        return float(low + np.mod(self.boundary_angle(t, side) - low, TWO_PI))

    def round_trip_error(self, radii: Sequence[float] = (1.001, 1.01, 1.1, 2.0, 10.0),
                         count: int = 64) -> float:
        """max |Φ(Ψ(w)) - w| / |w| over circles of the given radii."""
        theta = TWO_PI * (np.arange(count) + 0.5) / count
        w = (np.asarray(radii, dtype=float)[:, None] * np.exp(1j * theta)[None, :]).ravel()
        return float(np.max(np.abs(self.phi(self.psi(w)) - w) / np.abs(w)))

    def boundary_deviation(self, count: int = 4096) -> float:
        """sup distance from Ψ(e^{iθ}) to the arc on a dense θ sample."""
        theta = TWO_PI * np.arange(count) / count
        return float(np.max(self.arc.distance(self.psi(np.exp(1j * theta)))))

    @cached_property
    def _laurent(self) -> Tuple[float, np.ndarray]:
        r, M = 1.01, 8192
        w = r * np.exp(TWO_PI * 1j * np.arange(M) / M)
        c = np.fft.fft(self.psi(w)) / M
        j = np.arange(1, MONOMIAL_DEGREE_LIMIT + 2)
        b = np.concatenate([[c[0]], c[M - j] * r ** j])
        return float(np.real(c[1]) / r), b

    def laurent_coefficients(self, count: int) -> Tuple[float, np.ndarray]:
        """(cap, b_0..b_count) with Ψ(w) = cap·w + Σ b_j w^{-j}."""
        cap, b = self._laurent
        if count + 1 > len(b):
            raise ParameterRangeError(f"At most {len(b) - 1} Laurent coefficients are tabulated")
        return cap, b[:count + 1].copy()

    def _measure_accuracy(self, target_accuracy: float) -> None:
        err = self.round_trip_error()
        self.accuracy = max(err, np.finfo(float).eps)
        if not err <= target_accuracy:
            raise MapAccuracyError(
                f"Exterior map reached round-trip accuracy {err:.3e}, target was {target_accuracy:.3e}",
                achieved=err)


class SegmentMap(ExteriorMap):
    """
    Closed-form Joukowski map of the segment from a to b:
    Ψ(w) = (a+b)/2 + (b-a)/2 · J(w e^{-iβ}), J(v) = (v + 1/v)/2, β = arg(b - a).
    """

    def __init__(self, arc: Arc, target_accuracy: float = MAP_TOLERANCE):
        if not arc.is_single_segment:
            raise ParameterRangeError("SegmentMap needs an arc made of one segment")
        self.arc = arc
        a, b = arc.start, arc.end
        self.mid = 0.5 * (a + b)
        self.half = 0.5 * (b - a)
        self.beta = float(np.angle(b - a))
        self.rotation = np.exp(1j * self.beta)
        self.capacity = abs(b - a) / 4.0
        self._measure_accuracy(target_accuracy)

    def psi(self, w) -> np.ndarray:
        v = np.asarray(w, dtype=complex) / self.rotation
        return self.mid + self.half * 0.5 * (v + 1.0 / v)

    def dpsi(self, w) -> np.ndarray:
        v = np.asarray(w, dtype=complex) / self.rotation
        return self.half * 0.5 * (1.0 - 1.0 / v ** 2) / self.rotation

    def phi(self, z) -> np.ndarray:
        x = (np.asarray(z, dtype=complex) - self.mid) / self.half
        # the product of principal roots has its cut exactly on [-1, 1]
        v = x + np.sqrt(x - 1.0) * np.sqrt(x + 1.0)
        return v * self.rotation

    @property
    def endpoint_angles(self) -> Tuple[float, float]:
        return float(np.mod(self.beta + np.pi, TWO_PI)), float(np.mod(self.beta, TWO_PI))

    def _raw_angle(self, t: float, side: Side) -> float:
        x = float(np.clip(2.0 * t - 1.0, -1.0, 1.0))
        if side == Side.LEFT:
            return self.beta + math.acos(x)
        return self.beta + TWO_PI - math.acos(x)


def _hsqrt(u, hint) -> np.ndarray:
    """Square root in the closed upper half-plane; on the real axis the sign follows ``hint``."""
    r = np.sqrt(np.asarray(u, dtype=complex))
    r = np.where(r.imag < 0, -r, r)
    return np.where((r.imag == 0) & (np.real(hint) < 0), -r, r)


def _track_real(x: float, ic: float, d: float) -> float:
    """One geodesic step applied to a real boundary point (±inf allowed)."""
    if math.isinf(x):
        if ic == 0.0:
            return x
        m = -1.0 / ic
    else:
        den = 1.0 - x * ic
        if den == 0.0:
            return math.copysign(math.inf, x)
        m = x / den
    if math.isinf(m):
        return m
    return math.copysign(math.sqrt(m * m + d * d), m)


def zipper_nodes(arc: Arc, per_piece: int = 96, extra_params: Sequence[float] = (),
                 end_levels: int = 6) -> np.ndarray:
    """
    Zipper node parameters: cosine clustering on every interval between joints and
    extra parameters, plus a few geometric levels toward each interval end.
    """
    edges = np.unique(np.concatenate([arc.breakpoints, np.asarray(extra_params, dtype=float)]))
    params: List[np.ndarray] = []
    k = np.arange(per_piece + 1)
    base = 0.5 * (1.0 - np.cos(np.pi * k / per_piece))
    first = base[1]
    graded = first * 0.5 ** np.arange(1, end_levels + 1)
    local = np.unique(np.concatenate([base, graded, 1.0 - graded]))
    for lo, hi in zip(edges[:-1], edges[1:]):
        params.append(lo + (hi - lo) * local)
    return np.unique(np.concatenate(params))


class ZipperMap(ExteriorMap):
    """
    Geodesic zipper map through a node sequence z_0, ..., z_N on the arc.

    The first step sends the chord [z_0, z_1] to the real line with
    u = i·sqrt((z - z_1)/(z - z_0)); each later step removes the geodesic from
    0 to the image of the next node with m = z/(1 - z·ic) followed by
    sqrt(m² + d²); a final Möbius map sends the upper half-plane onto |w| > 1
    with ∞ fixed.
    """

    def __init__(self, arc: Arc, target_accuracy: float = MAP_TOLERANCE,
                 nodes_per_piece: int = 96, extra_params: Sequence[float] = ()):
        self.logger = get_logger(self.__class__.__name__)
        self.arc = arc
        self.node_params = zipper_nodes(arc, nodes_per_piece, extra_params)
        self.nodes = arc.evaluate(self.node_params)
        if len(self.nodes) < 3:
            raise ParameterRangeError("The zipper needs at least three nodes")
        self._build()
        self._normalize()
        self._tabulate_boundary()
        self._measure_accuracy(target_accuracy)
        self.logger.info(
            f"Zipper map with {len(self.nodes)} nodes: capacity {self.capacity:.12g}, "
            f"round trip {self.accuracy:.2e}")
        log_stage("conformal", "map", f"zipper nodes={len(self.nodes)} accuracy={self.accuracy:.2e}")

    # -- construction -------------------------------------------------------

    def _build(self) -> None:
        z = self.nodes
        z0, z1 = z[0], z[1]
        rest = 1j * np.sqrt((z[2:] - z1) / (z[2:] - z0))
        p = 1j + 0j                               # image of z = ∞
        ics: List[float] = []
        ds: List[float] = []
        for k in range(2, len(z)):
            a = rest[0]
            if not a.imag > 0.0:
                raise MapAccuracyError(f"Zipper lost node {k} to the real axis (Im = {a.imag:.3e})")
            ic = a.real / abs(a) ** 2
            d = abs(a) ** 2 / a.imag
            ics.append(ic)
            ds.append(d)
            tail = rest[1:]
            m = tail / (1.0 - tail * ic)
            rest = _hsqrt(m * m + d * d, m)
            mp = p / (1.0 - p * ic)
            p = complex(_hsqrt(mp * mp + d * d, mp))
        self.ic = np.array(ics)
        self.d = np.array(ds)
        self.p = p
        self.alpha = 0.0

    def _forward_half_plane(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        zeta = 1j * np.sqrt((z - self.nodes[1]) / (z - self.nodes[0]))
        for ic, d in zip(self.ic, self.d):
            m = zeta / (1.0 - zeta * ic)
            zeta = _hsqrt(m * m + d * d, m)
        return zeta

    def _mobius(self, zeta) -> np.ndarray:
        return np.exp(1j * self.alpha) * (zeta - np.conj(self.p)) / (zeta - self.p)

    def _normalize(self) -> None:
        # mean of Φ0(z)/z over a large circle isolates the leading Laurent term
        radius = 4.0 * max(self.arc.diameter, 1e-300)
        center = np.mean(self.nodes)
        z = center + radius * np.exp(TWO_PI * 1j * np.arange(64) / 64)
        lead = np.mean(self._mobius(self._forward_half_plane(z)) / (z - center))
        self.alpha = -float(np.angle(lead))
        self.capacity = 1.0 / abs(lead)

    def _real_angle(self, x: float) -> float:
        if math.isinf(x):
            return float(np.mod(self.alpha, TWO_PI))
        return float(np.mod(np.angle(self._mobius(complex(x, 0.0))), TWO_PI))

    def _tabulate_boundary(self) -> None:
        n = len(self.nodes)
        left = np.empty(n)
        right = np.empty(n)
        steps = list(zip(self.ic, self.d))

        def propagate(x: float, start: int) -> float:
            for ic, d in steps[start:]:
                x = _track_real(x, ic, d)
            return x

        x_first = propagate(math.inf, 0)
        left[0] = right[0] = self._real_angle(x_first)
        for j in range(1, n - 1):
            # node j is the tip after step j and splits into ±d in the step after
            d = steps[j - 1][1]
            left[j] = self._real_angle(propagate(-d, j))
            right[j] = self._real_angle(propagate(d, j))
        left[-1] = right[-1] = self._real_angle(0.0)
        self._angles = {Side.LEFT: left, Side.RIGHT: right}

        # offset point next to a middle node decides which bank is the left one
        j = n // 2
        normal = 1j * self.arc.tangent(self.node_params[j])
        offset = self.nodes[j] + 1e-7 * self.arc.total_length * normal
        theta = float(np.angle(self.phi(offset)))
        d_left = abs(np.angle(np.exp(1j * (theta - left[j]))))
        d_right = abs(np.angle(np.exp(1j * (theta - right[j]))))
        if d_right < d_left:
            self.logger.warning("Zipper bank labels swapped by the offset point")
            self._angles = {Side.LEFT: right, Side.RIGHT: left}

    # -- maps ---------------------------------------------------------------

    def phi(self, z) -> np.ndarray:
        return self._mobius(self._forward_half_plane(z))

    def _inverse(self, w, with_derivative: bool):
        w = np.asarray(w, dtype=complex)
        v = w * np.exp(-1j * self.alpha)
        zeta = (v * self.p - np.conj(self.p)) / (v - 1.0)
        deriv = (np.conj(self.p) - self.p) / (v - 1.0) ** 2 * np.exp(-1j * self.alpha)
        for ic, d in zip(self.ic[::-1], self.d[::-1]):
            m = _hsqrt(zeta * zeta - d * d, zeta)
            if with_derivative:
                deriv = deriv * (zeta / m) / (1.0 + m * ic) ** 2
            zeta = m / (1.0 + m * ic)
        z0, z1 = self.nodes[0], self.nodes[1]
        U = -zeta * zeta
        if with_derivative:
            deriv = deriv * (z1 - z0) / (1.0 - U) ** 2 * (-2.0 * zeta)
        z = (z1 - U * z0) / (1.0 - U)
        return z, deriv

    def psi(self, w) -> np.ndarray:
        return self._inverse(w, False)[0]

    def dpsi(self, w) -> np.ndarray:
        return self._inverse(w, True)[1]

    # -- boundary correspondence -------------------------------------------

    @property
    def endpoint_angles(self) -> Tuple[float, float]:
        return float(self._angles[Side.LEFT][0]), float(self._angles[Side.LEFT][-1])

    def _raw_angle(self, t: float, side: Side) -> float:
        params = self.node_params
        j = int(np.searchsorted(params, t))
        if j < len(params) and abs(params[j] - t) <= 1e-14:
            return float(self._angles[side][j])
        if j > 0 and abs(params[j - 1] - t) <= 1e-14:
            return float(self._angles[side][j - 1])
        low, _ = self.side_interval(side)
        a = low + np.mod(self._angles[side][j - 1] - low, TWO_PI)
        b = low + np.mod(self._angles[side][j] - low, TWO_PI)

        def offset(theta: float) -> float:
            return float(self.arc.project(self.psi(np.exp(1j * theta)))) - t

        fa, fb = offset(a), offset(b)
        if fa * fb > 0:
            # the geodesic interpolant bulges; fall back to linear interpolation
            s = (t - params[j - 1]) / (params[j] - params[j - 1])
            return float(a + s * (b - a))
        return float(brentq(offset, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))

    def _left_side_angle(self) -> float:
        return float(self._angles[Side.LEFT][len(self.node_params) // 2])


def build_exterior_map(arc: Arc, target_accuracy: float = MAP_TOLERANCE,
                       nodes_per_piece: int = 96, extra_params: Sequence[float] = ()) -> ExteriorMap:
    """
    Build Φ/Ψ for an arc: the closed form for a single segment, the zipper otherwise.

    Raises:
        MapAccuracyError: If the round-trip accuracy misses target_accuracy
    """
    if arc.is_single_segment:
        return SegmentMap(arc, target_accuracy)
    return ZipperMap(arc, target_accuracy, nodes_per_piece, extra_params)


# ---------------------------------------------------------------------------
# Level lines, ρ and ρ*
# ---------------------------------------------------------------------------

def level_line(emap: ExteriorMap, u: float, side, count: int) -> np.ndarray:
    """Samples of Ψ((1+u)e^{iθ}) with θ running over Δ_side, endpoints included."""
    if not u > 0:
        raise ParameterRangeError(f"Level-line offset u must be positive, got {u}")
    if count < 2:
        raise ParameterRangeError(f"Need at least two level-line samples, got {count}")
    low, high = emap.side_interval(side)
    theta = np.linspace(low, high, count)
    return emap.psi((1.0 + u) * np.exp(1j * theta))


def rho(emap: ExteriorMap, z0: complex, u: float, side, samples: int = RHO_SAMPLES,
        rel_change: float = 1e-3, max_samples: int = 1 << 14) -> float:
    """
    ρ^side_u(z0): distance from z0 to the level line |Φ| = 1 + u on the given side.

    The sampled minimum is refined by golden-section search around the best
    sample; the density doubles until the refined value moves by less than
    ``rel_change``.
    """
    if not u > 0:
        raise ParameterRangeError(f"u must be positive, got {u}")
    low, high = emap.side_interval(side)
    radius = 1.0 + u

    def distance(theta: float) -> float:
        return float(abs(complex(emap.psi(radius * np.exp(1j * theta))) - z0))

    previous = None
    count = samples
    while True:
        theta = np.linspace(low, high, count)
        values = np.abs(emap.psi(radius * np.exp(1j * theta)) - z0)
        i = int(np.argmin(values))
        a, b = theta[max(i - 1, 0)], theta[min(i + 1, count - 1)]
        refined = minimize_scalar(distance, bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-14 * max(1.0, abs(b))})
        best = min(float(values[i]), float(refined.fun))
        if previous is not None and abs(best - previous) <= rel_change * max(best, 1e-300):
            return best
        if count >= max_samples:
            logger.debug(f"rho density cap reached at u={u}, side={side}")
            return best
        previous = best
        count *= 2


def rho_star(emap: ExteriorMap, z0: complex, u: float) -> float:
    """ρ*_u(z0) = max over both sides of ρ^side_u(z0)."""
    return max(rho(emap, z0, u, Side.LEFT), rho(emap, z0, u, Side.RIGHT))


def rho_exponent(emap: ExteriorMap, z0: complex, side, us: Sequence[float]) -> float:
    """Fitted p in ρ^side_u(z0) ≍ u^p over the given offsets."""
    us = np.asarray(us, dtype=float)
    values = np.array([rho(emap, z0, u, side) for u in us])
    slope, _ = np.polyfit(np.log(us), np.log(values), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Γ-rays
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GammaRay:
    """Ψ(r e^{iθ0}) for r in (1, λ], on one side of the point z0 = arc(t0)."""
    t0: float
    z0: complex
    side: Side
    theta: float
    lam: float
    radii: np.ndarray
    points: np.ndarray
    emap: ExteriorMap

    def tip(self) -> complex:
        return complex(self.points[-1])

    def at(self, radii) -> np.ndarray:
        """Ray points at the given radii."""
        return self.emap.psi(np.asarray(radii, dtype=float) * np.exp(1j * self.theta))

    def derivative(self, radii) -> np.ndarray:
        """dζ/dr along the ray."""
        direction = np.exp(1j * self.theta)
        return self.emap.dpsi(np.asarray(radii, dtype=float) * direction) * direction

    def distance_ratio(self) -> Tuple[float, float]:
        """(min, max) of dist(ζ, L) / |ζ - z0| over the samples."""
        dist = self.emap.arc.distance(self.points)
        ratio = dist / np.abs(self.points - self.z0)
        return float(np.min(ratio)), float(np.max(ratio))

    def arclength(self, fine: int = 2048) -> Tuple[np.ndarray, np.ndarray]:
        """(radii, cumulative arclength from z0) on a fine geometric grid."""
        s = np.geomspace(1e-12, self.lam - 1.0, fine)
        r = 1.0 + s
        pts = self.at(r)
        steps = np.abs(np.diff(pts))
        cumulative = np.concatenate([[abs(pts[0] - self.z0)], abs(pts[0] - self.z0) + np.cumsum(steps)])
        return r, cumulative


def gamma_ray(emap: ExteriorMap, t0: float, side, lam: float, count: int = RAY_SAMPLES) -> GammaRay:
    """
    The Γ-ray leaving the arc point at parameter t0 on the given side.

    Args:
        emap: Exterior map of the arc
        t0: Arc parameter of z0
        side: 1 or 2
        lam: Outer radius λ > 1 in the w-plane
        count: Number of samples, radii 1 + (λ-1)k/count for k = 1..count

    Returns:
        The sampled ray
    """
    if not lam > 1.0:
        raise ParameterRangeError(f"Ray radius λ must exceed 1, got {lam}")
    side = _side(side)
    theta = emap.boundary_angle(t0, side)
    radii = 1.0 + (lam - 1.0) * np.arange(1, count + 1) / count
    points = emap.psi(radii * np.exp(1j * theta))
    return GammaRay(float(t0), complex(emap.arc.evaluate(t0)), side, theta, float(lam),
                     radii, points, emap)


# ---------------------------------------------------------------------------
# Faber polynomials
# ---------------------------------------------------------------------------

class FaberBasis:
    """
    Faber polynomials F_0..F_degree of an arc.

    Values come from the boundary integral
    F_k(z) = (1/M) Σ_l (r ω^l)^{k+1} Ψ'(r ω^l) / (Ψ(r ω^l) - z), evaluated by one
    FFT per point, which stays accurate at degrees where monomial
    coefficients have long lost every digit. Monomial coefficients (from the
    Laurent recurrence with compensated sums) are available up to degree 200.
    """

    def __init__(self, emap: ExteriorMap, degree: int):
        if degree < 0:
            raise ParameterRangeError(f"Faber degree must be non-negative, got {degree}")
        self.map = emap
        self.degree = degree
        self.capacity = emap.capacity
        self._contours: Dict[Tuple[float, int], Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self.logger = get_logger(self.__class__.__name__)

    def _contour(self, r: float, M: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = (round(r, 12), M)
        if key not in self._contours:
            w = r * np.exp(TWO_PI * 1j * np.arange(M) / M)
            self._contours[key] = (w, self.map.psi(w), self.map.dpsi(w))
        return self._contours[key]

    def evaluate(self, z, degree: Optional[int] = None, chunk: int = 256) -> np.ndarray:
        """
        Matrix of F_k(z), shape (len(z), degree + 1).

        Args:
            z: Evaluation points
            degree: Highest degree (defaults to the basis degree)
            chunk: Points per FFT batch
        """
        degree = self.degree if degree is None else degree
        if degree > self.degree:
            raise ParameterRangeError(f"Basis holds degree {self.degree}, asked for {degree}")
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        out = np.empty((len(z), degree + 1), dtype=complex)
        if len(z) == 0:
            return out
        modulus = np.abs(self.map.phi(z))
        order = np.argsort(modulus)
        base_r = 1.0 + min(0.1, 4.0 / (degree + 1))
        k = np.arange(degree + 1)
        for start in range(0, len(z), chunk):
            idx = order[start:start + chunk]
            top = float(np.max(modulus[idx]))
            r = max(base_r, 1.05 * top)
            ratio = r / max(top, 1.0)
            M = 256
            while M < 4 * (degree + 1) or M < 40.0 / math.log(ratio):
                M *= 2
            w, psi, dpsi = self._contour(r, M)
            g = (w * dpsi)[None, :] / (psi[None, :] - z[idx, None])
            coeffs = np.fft.ifft(g, axis=1)[:, :degree + 1]
            out[idx] = coeffs * r ** k[None, :]
        return out

    @cached_property
    def _monomial_table(self) -> List[np.ndarray]:
        top = min(self.degree, MONOMIAL_DEGREE_LIMIT)
        cap, b = self.map.laurent_coefficients(max(top, 1))
        table: List[np.ndarray] = [np.array([1.0 + 0j])]
        for n in range(1, top + 1):
            prev = table[n - 1]
            terms: List[np.ndarray] = []
            shifted = np.zeros(n + 1, dtype=complex)
            shifted[1:] = prev
            terms.append(shifted)
            terms.append(np.concatenate([-b[0] * prev, [0.0]]))
            for j in range(1, n):
                part = np.zeros(n + 1, dtype=complex)
                part[:len(table[n - 1 - j])] = -b[j] * table[n - 1 - j]
                terms.append(part)
            const = np.zeros(n + 1, dtype=complex)
            const[0] = -(n - 1) * b[n - 1]
            terms.append(const)
            stack = np.array(terms)
            coeffs = np.array([complex(math.fsum(stack[:, i].real), math.fsum(stack[:, i].imag))
                               for i in range(n + 1)]) / cap
            if not np.all(np.isfinite(coeffs)) or np.max(np.abs(coeffs)) > 1e300:
                raise ParameterRangeError(
                    f"Faber monomial coefficients overflow at degree {n}; use the boundary-integral values")
            table.append(coeffs)
        return table

    def monomial(self, k: int) -> np.ndarray:
        """Ascending monomial coefficients of F_k (k <= 200)."""
        if k > MONOMIAL_DEGREE_LIMIT:
            raise ParameterRangeError(f"Monomial Faber coefficients are kept up to degree {MONOMIAL_DEGREE_LIMIT}")
        if k > self.degree:
            raise ParameterRangeError(f"Basis holds degree {self.degree}, asked for {k}")
        return self._monomial_table[k].copy()


def faber_basis(emap: ExteriorMap, degree: int) -> FaberBasis:
    return FaberBasis(emap, degree)


def ray_curve_rows(curves: Dict[str, np.ndarray]) -> List[Dict[str, float]]:
    """Flatten labelled curves into CSV rows with columns curve, index, re, im."""
    rows: List[Dict[str, float]] = []
    for label, points in curves.items():
        for i, z in enumerate(np.asarray(points, dtype=complex)):
            rows.append({"curve": label, "index": i, "re": float(z.real), "im": float(z.imag)})
    return rows
