"""
Arcs, lemniscates and piecewise analytic functions.

An arc is a chain of segments and circular arcs. Piece ``i`` is traversed by
the global parameter ``t`` in ``[i, i + 1]``, uniformly in arclength, so piece
joints sit at integer parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from scipy.stats import qmc

from nearbest.constants import ADMISSIBILITY_SAMPLES, LemniscateRegion, PieceKind
from nearbest.exceptions import (
    AdmissibilityError,
    ArcGeometryError,
    JumpOrderError,
    ParameterRangeError,
)
from nearbest.logger import get_logger

logger = get_logger(__name__)

PARAM_TOL = 1e-12


@dataclass(frozen=True)
class Piece:
    """One segment or circular arc; local parameter ``s`` runs over [0, 1]."""
    kind: PieceKind
    start: complex
    end: complex
    center: Optional[complex] = None
    sweep: float = 0.0

    @classmethod
    def segment(cls, start: complex, end: complex) -> "Piece":
        return cls(PieceKind.SEGMENT, complex(start), complex(end))

    @classmethod
    def circular(cls, start: complex, center: complex, sweep: float) -> "Piece":
        """Circular arc from ``start`` around ``center`` through the signed angle ``sweep``."""
        start, center = complex(start), complex(center)
        if not 0.0 < abs(sweep) < 2.0 * np.pi:
            raise ArcGeometryError(f"Circular arc sweep must lie in (0, 2π) in absolute value, got {sweep}")
        if abs(start - center) == 0.0:
            raise ArcGeometryError("Circular arc has zero radius")
        end = center + (start - center) * np.exp(1j * sweep)
        return cls(PieceKind.CIRCULAR_ARC, start, complex(end), center, float(sweep))

    @property
    def radius(self) -> float:
        return abs(self.start - self.center) if self.center is not None else float("inf")

    @property
    def length(self) -> float:
        if self.kind == PieceKind.SEGMENT:
            return abs(self.end - self.start)
        return self.radius * abs(self.sweep)

    def point(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == PieceKind.SEGMENT:
            return self.start + (self.end - self.start) * s
        return self.center + (self.start - self.center) * np.exp(1j * self.sweep * s)

    def derivative(self, s) -> np.ndarray:
        """dz/ds for the local parameter."""
        s = np.asarray(s, dtype=float)
        if self.kind == PieceKind.SEGMENT:
            return np.full(s.shape, self.end - self.start, dtype=complex)
        return 1j * self.sweep * (self.start - self.center) * np.exp(1j * self.sweep * s)

    def project(self, z) -> np.ndarray:
        """Local parameter of the closest point of the piece."""
        z = np.asarray(z, dtype=complex)
        if self.kind == PieceKind.SEGMENT:
            d = self.end - self.start
            s = np.real((z - self.start) * np.conj(d)) / abs(d) ** 2
            return np.clip(s, 0.0, 1.0)
        rel = np.angle((z - self.center) / (self.start - self.center))
        s = np.mod(rel * np.sign(self.sweep), 2.0 * np.pi) / abs(self.sweep)
        inside = s <= 1.0
        to_start = np.abs(z - self.start)
        to_end = np.abs(z - self.end)
        return np.where(inside, s, np.where(to_start <= to_end, 0.0, 1.0))

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.abs(z - self.point(self.project(z)))


@dataclass(frozen=True)
class Arc:
    """A Jordan arc built from pieces; validated for closure and injectivity on creation."""
    pieces: Tuple[Piece, ...]
    lengths: np.ndarray = field(init=False, repr=False, compare=False)
    cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.pieces:
            raise ArcGeometryError("An arc needs at least one piece")
        object.__setattr__(self, "pieces", tuple(self.pieces))
        lengths = np.array([p.length for p in self.pieces])
        if np.any(lengths <= 0.0):
            raise ArcGeometryError("Arc has a zero-length piece")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cumulative", np.concatenate([[0.0], np.cumsum(lengths)]))

        scale = max(1.0, self.diameter)
        for i, (a, b) in enumerate(zip(self.pieces[:-1], self.pieces[1:])):
            gap = abs(a.end - b.start)
            if gap > 1e-12 * scale:
                raise ArcGeometryError(f"Pieces {i} and {i + 1} do not close up (gap {gap:.3e})")
        if abs(self.start - self.end) <= 1e-12 * scale:
            raise ArcGeometryError("Arc endpoints coincide; a closed curve is not an arc")
        self._check_injective()

    @classmethod
    def polyline(cls, vertices: Sequence[complex]) -> "Arc":
        pts = [complex(v) for v in vertices]
        return cls(tuple(Piece.segment(a, b) for a, b in zip(pts[:-1], pts[1:])))

    @property
    def start(self) -> complex:
        return self.pieces[0].start

    @property
    def end(self) -> complex:
        return self.pieces[-1].end

    @property
    def t_max(self) -> float:
        return float(len(self.pieces))

    @property
    def total_length(self) -> float:
        return float(self.cumulative[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        return np.arange(len(self.pieces) + 1, dtype=float)

    @cached_property
    def diameter(self) -> float:
        pts = self.evaluate(np.linspace(0.0, self.t_max, 64 * len(self.pieces) + 1))
        return float(np.max(np.abs(pts[:, None] - pts[None, :])))

    @property
    def is_single_segment(self) -> bool:
        return len(self.pieces) == 1 and self.pieces[0].kind == PieceKind.SEGMENT

    def _locate(self, t) -> Tuple[np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        if np.any(t < -PARAM_TOL) or np.any(t > self.t_max + PARAM_TOL):
            bad = t[(t < -PARAM_TOL) | (t > self.t_max + PARAM_TOL)].ravel()[0]
            raise ParameterRangeError(f"Arc parameter {bad} outside [0, {self.t_max}]")
        t = np.clip(t, 0.0, self.t_max)
        index = np.minimum(np.floor(t).astype(int), len(self.pieces) - 1)
        return index, t - index

    def evaluate(self, t) -> np.ndarray:
        index, s = self._locate(t)
        out = np.empty(index.shape, dtype=complex)
        for i, piece in enumerate(self.pieces):
            mask = index == i
            if np.any(mask):
                out[mask] = piece.point(s[mask])
        return out

    def tangent(self, t) -> np.ndarray:
        """Unit tangent in the direction of increasing t."""
        index, s = self._locate(t)
        out = np.empty(index.shape, dtype=complex)
        for i, piece in enumerate(self.pieces):
            mask = index == i
            if np.any(mask):
                d = piece.derivative(s[mask])
                out[mask] = d / np.abs(d)
        return out

    def length_at(self, t) -> np.ndarray:
        """Arclength from the start to parameter t."""
        index, s = self._locate(t)
        return self.cumulative[index] + self.lengths[index] * s

    def param_at_length(self, length) -> np.ndarray:
        length = np.clip(np.asarray(length, dtype=float), 0.0, self.total_length)
        index = np.clip(np.searchsorted(self.cumulative, length, side="right") - 1, 0, len(self.pieces) - 1)
        return index + (length - self.cumulative[index]) / self.lengths[index]

    def uniform_params(self, count: int) -> np.ndarray:
        """``count`` parameters equally spaced in arclength, endpoints included."""
        return self.param_at_length(np.linspace(0.0, self.total_length, count))

    def project(self, z) -> np.ndarray:
        """Parameter of the closest arc point to each z."""
        z = np.asarray(z, dtype=complex)
        best_t = np.zeros(z.shape)
        best_d = np.full(z.shape, np.inf)
        for i, piece in enumerate(self.pieces):
            s = piece.project(z)
            d = np.abs(z - piece.point(s))
            better = d < best_d
            best_d = np.where(better, d, best_d)
            best_t = np.where(better, i + s, best_t)
        return best_t

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.min(np.stack([p.distance(z) for p in self.pieces]), axis=0)

    def _check_injective(self, count: int = 2048) -> None:
        t = self.uniform_params(count)
        z = self.evaluate(t)
        a, b = z[:-1], z[1:]
        mid = 0.5 * (a + b)
        spacing = self.total_length / (count - 1)
        tree = cKDTree(np.column_stack([mid.real, mid.imag]))
        pairs = np.array(sorted(tree.query_pairs(r=1.01 * spacing)), dtype=int).reshape(-1, 2)
        pairs = pairs[np.abs(pairs[:, 0] - pairs[:, 1]) > 1]
        if len(pairs) == 0:
            return
        p1, p2 = a[pairs[:, 0]], b[pairs[:, 0]]
        q1, q2 = a[pairs[:, 1]], b[pairs[:, 1]]
        tol = 1e-14 * max(1.0, self.total_length) ** 2

        def cross(u, v):
            return u.real * v.imag - u.imag * v.real

        d1 = cross(p2 - p1, q1 - p1)
        d2 = cross(p2 - p1, q2 - p1)
        d3 = cross(q2 - q1, p1 - q1)
        d4 = cross(q2 - q1, p2 - q1)
        hits = (d1 * d2 <= tol) & (d3 * d4 <= tol)
        if np.any(hits):
            where = t[pairs[hits][0, 0]]
            raise ArcGeometryError(f"Arc intersects itself near parameter {where:.6f}")


def arc_eval(arc: Arc, t) -> np.ndarray:
    """Point(s) of the arc at parameter(s) t."""
    return arc.evaluate(t)


def subarc_length(arc: Arc, t1: float, t2: float) -> float:
    """
    Arclength from t1 to t2.

    Raises:
        ParameterRangeError: If t1 > t2 or either parameter lies outside [0, t_max]
    """
    t1, t2 = float(t1), float(t2)
    if t1 > t2 + PARAM_TOL:
        raise ParameterRangeError(f"Subarc parameters are reversed: t1={t1} > t2={t2}")
    return max(float(arc.length_at(t2) - arc.length_at(t1)), 0.0)


def quasi_smoothness_constant(arc: Arc, sample_count: int) -> float:
    """
    Sampled sup of subarc length over chord length.

    The sample is the arc endpoints and joints plus the first ``sample_count``
    points of the base-2 van der Corput sequence in arclength, so a larger count
    only adds points and the estimate never decreases.

    Args:
        arc: The arc
        sample_count: Number of low-discrepancy points (at least 2)

    Returns:
        The estimate, at least 1
    """
    if sample_count < 2:
        raise ParameterRangeError(f"sample_count must be at least 2, got {sample_count}")
    sequence = qmc.Halton(d=1, scramble=False).random(sample_count).ravel()
    lengths = np.concatenate([arc.cumulative, sequence * arc.total_length])
    lengths = np.unique(lengths)
    z = arc.evaluate(arc.param_at_length(lengths))
    chords = pdist(np.column_stack([z.real, z.imag]))
    arcs = pdist(lengths[:, None])
    ok = chords > 0
    return float(max(1.0, np.max(arcs[ok] / chords[ok])))


# ---------------------------------------------------------------------------
# Lemniscates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lemniscate:
    """Level set |P(z)| = R^N of P(z) = Π (z - c - R e^{2πik/N})."""
    order: int
    radius: float
    center: complex = 0j

    def __post_init__(self):
        if self.order < 1:
            raise ParameterRangeError(f"Lemniscate order must be positive, got {self.order}")
        if not self.radius > 0:
            raise ParameterRangeError(f"Lemniscate radius must be positive, got {self.radius}")

    @property
    def roots(self) -> np.ndarray:
        k = np.arange(self.order)
        return self.center + self.radius * np.exp(2j * np.pi * k / self.order)

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=complex)
        for root in self.roots:
            out = out * (z - root)
        return out

    def normalized(self, z) -> np.ndarray:
        """P(z) / R^N; the lemniscate is where this has modulus one."""
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=complex)
        for root in self.roots:
            out = out * ((z - root) / self.radius)
        return out

    def log_derivative(self, z) -> np.ndarray:
        """P'(z) / P(z)."""
        z = np.asarray(z, dtype=complex)
        return np.sum(1.0 / (z[..., None] - self.roots), axis=-1)

    def coefficients(self) -> np.ndarray:
        """Monomial coefficients of P / R^N, ascending."""
        coeffs = np.polynomial.polynomial.polypow(
            np.array([-self.center / self.radius, 1.0 / self.radius], dtype=complex), self.order)
        coeffs[0] -= 1.0
        return coeffs


def lemniscate_eval(lem: Lemniscate, z) -> np.ndarray:
    return lem.evaluate(z)


def lemniscate_classify(lem: Lemniscate, z, tol: float = 1e-12) -> np.ndarray:
    """Region of each point relative to the lemniscate, as LemniscateRegion values."""
    mod = np.abs(lem.normalized(z))
    return np.where(mod < 1.0 - tol, LemniscateRegion.INSIDE.value,
                    np.where(mod > 1.0 + tol, LemniscateRegion.OUTSIDE.value, LemniscateRegion.ON.value))


def d_of_E(lem: Lemniscate, points) -> float:
    """
    Damping margin min(1 - |P(z)|/R^N) over a compact set sample.

    Raises:
        AdmissibilityError: If the set touches or crosses the lemniscate
    """
    points = np.asarray(points, dtype=complex)
    if points.size == 0:
        raise ParameterRangeError("Compact set sample is empty")
    margin = float(np.min(1.0 - np.abs(lem.normalized(points))))
    if margin <= 1e-12:
        raise AdmissibilityError(f"Compact set touches the lemniscate (margin {margin:.3e})")
    return margin


@dataclass(frozen=True)
class AdmissibilityReport:
    samples: int
    max_modulus_far: float
    max_modulus_near: float
    min_ray_modulus: float
    admissible: bool
    reason: str = ""


def _admissibility_pass(lem: Lemniscate, arc: Arc, z0: complex, count: int,
                        ray_points: Optional[np.ndarray]) -> AdmissibilityReport:
    t = arc.uniform_params(count)
    z = arc.evaluate(t)
    radius_near = 1e-3 * max(arc.total_length, 1e-300)
    dist = np.abs(z - z0)
    mod = np.abs(lem.normalized(z))
    far = dist > radius_near
    near = (~far) & (dist > 0)
    max_far = float(np.max(mod[far])) if np.any(far) else 0.0
    max_near = float(np.max(mod[near])) if np.any(near) else 0.0
    reason = ""
    if max_far >= 1.0 - 1e-12:
        reason = f"arc reaches |P|/R^N = {max_far:.6g} away from the designated point"
    elif max_near > 1.0 + 1e-12:
        reason = f"arc leaves the lemniscate next to the designated point (|P|/R^N = {max_near:.6g})"
    min_ray = float("inf")
    if ray_points is not None and len(ray_points):
        rp = np.asarray(ray_points, dtype=complex)
        rmod = np.abs(lem.normalized(rp))
        rfar = np.abs(rp - z0) > radius_near
        min_ray = float(np.min(rmod))
        if np.any(rfar) and np.min(rmod[rfar]) <= 1.0:
            reason = reason or f"ray enters the lemniscate (|P|/R^N = {np.min(rmod[rfar]):.6g})"
        elif np.any(~rfar) and np.min(rmod[~rfar]) < 1.0 - 1e-12:
            reason = reason or f"ray enters the lemniscate near the designated point"
    return AdmissibilityReport(count, max_far, max_near, min_ray, reason == "", reason)


def check_admissibility(lem: Lemniscate, arc: Arc, singular_param: float,
                        ray_points: Optional[np.ndarray] = None,
                        samples: int = ADMISSIBILITY_SAMPLES,
                        raise_on_failure: bool = True) -> AdmissibilityReport:
    """
    Check that the arc lies inside the lemniscate except at the designated point,
    which must lie on it, and optionally that ray points lie outside.

    The sample density doubles until two successive passes agree.

    Raises:
        AdmissibilityError: If raise_on_failure and the check fails
    """
    z0 = complex(arc.evaluate(singular_param))
    on = abs(abs(complex(lem.normalized(z0))) - 1.0)
    if on > 1e-10:
        report = AdmissibilityReport(0, float("nan"), float("nan"), float("nan"), False,
                                     f"designated point is not on the lemniscate (||P|/R^N - 1| = {on:.3e})")
    else:
        report = _admissibility_pass(lem, arc, z0, samples, ray_points)
        count = samples
        while count < 16 * samples:
            count *= 2
            finer = _admissibility_pass(lem, arc, z0, count, ray_points)
            stable = finer.admissible == report.admissible
            report = finer
            if stable:
                break
    logger.debug(f"Admissibility with N={lem.order}, R={lem.radius}: {report}")
    if raise_on_failure and not report.admissible:
        raise AdmissibilityError(f"Lemniscate N={lem.order}, R={lem.radius} is not admissible: {report.reason}")
    return report


def wedge_lemniscate_order(angle: float) -> int:
    """
    Order N for two segments meeting at ``angle`` in (0, π]: the m with
    2π/(m+1) < angle <= 2π/m.
    """
    if not 0.0 < angle <= np.pi + 1e-15:
        raise ParameterRangeError(f"Wedge angle must lie in (0, π], got {angle}")
    return int(np.floor(2.0 * np.pi / angle + 1e-12))


# ---------------------------------------------------------------------------
# Piecewise analytic functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """An analytic branch with its disk of analyticity."""
    function: Callable[[np.ndarray], np.ndarray]
    center: complex
    radius: float
    label: str = ""

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.asarray(self.function(z), dtype=complex) * np.ones(z.shape)

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z, dtype=complex) - self.center) < self.radius


@dataclass(frozen=True)
class PiecewiseAnalyticFunction:
    """
    f = f_i on the subarc between consecutive singular parameters.

    ``orders[i]`` is the jump order k at ``singular_params[i]``, the joint
    between ``branches[i]`` and ``branches[i + 1]``.
    """
    arc: Arc
    singular_params: Tuple[float, ...]
    branches: Tuple[Branch, ...]
    orders: Tuple[int, ...]

    def __post_init__(self):
        params = tuple(float(t) for t in self.singular_params)
        object.__setattr__(self, "singular_params", params)
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "orders", tuple(int(k) for k in self.orders))
        if len(self.branches) != len(params) + 1:
            raise ParameterRangeError(
                f"{len(params)} singular points need {len(params) + 1} branches, got {len(self.branches)}")
        if len(self.orders) != len(params):
            raise ParameterRangeError(f"Expected {len(params)} jump orders, got {len(self.orders)}")
        if any(b <= a for a, b in zip(params[:-1], params[1:])):
            raise ParameterRangeError("Singular parameters must be strictly increasing")
        if params and (params[0] <= PARAM_TOL or params[-1] >= self.arc.t_max - PARAM_TOL):
            raise ParameterRangeError("Singular parameters must lie strictly inside the arc")
        if any(k < 0 for k in self.orders):
            raise JumpOrderError("Jump orders must be non-negative (f must be continuous)")
        edges = (0.0,) + params + (self.arc.t_max,)
        for i, branch in enumerate(self.branches):
            sub = self.arc.evaluate(np.linspace(edges[i], edges[i + 1], 257))
            if not np.all(branch.contains(sub)):
                raise ParameterRangeError(f"Branch {i} disk does not contain its subarc")

    @property
    def singular_points(self) -> np.ndarray:
        return self.arc.evaluate(np.array(self.singular_params))

    def branch_index(self, t) -> np.ndarray:
        return np.searchsorted(np.array(self.singular_params), np.asarray(t, dtype=float), side="left")

    def evaluate(self, t) -> np.ndarray:
        """f at arc parameters t."""
        t = np.asarray(t, dtype=float)
        z = self.arc.evaluate(t)
        index = self.branch_index(t)
        out = np.empty(t.shape, dtype=complex)
        for i, branch in enumerate(self.branches):
            mask = index == i
            if np.any(mask):
                out[mask] = branch(z[mask])
        return out

    def jump(self, index: int, zeta) -> np.ndarray:
        """f_{i-1}(ζ) - f_i(ζ) across singular point ``index``."""
        return self.branches[index](zeta) - self.branches[index + 1](zeta)

    def neighborhood_radius(self, index: int) -> float:
        """Radius of the largest disk about z_i inside both adjacent branch disks."""
        z0 = complex(self.singular_points[index])
        left, right = self.branches[index], self.branches[index + 1]
        return float(min(left.radius - abs(z0 - left.center), right.radius - abs(z0 - right.center)))


def taylor_coefficients(branch: Callable, z0: complex, radius: float, count: int = 32,
                        nodes: int = 64) -> np.ndarray:
    """
    Scaled Taylor coefficients f^{(r)}(z0) radius^r / r!, r < count, from the
    trapezoid rule on |ζ - z0| = radius.
    """
    nodes = max(nodes, 2 * count)
    w = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    values = np.asarray(branch(z0 + radius * w), dtype=complex)
    return (np.fft.fft(values) / nodes)[:count]


def jump_order(f: PiecewiseAnalyticFunction, index: int, tol: float = 1e-8,
               max_order: int = 32) -> int:
    """
    Largest k such that the two branches at singular point ``index`` agree to
    order k: the first Taylor order where they differ, minus one.

    Raises:
        JumpOrderError: If the branches agree to every tested order
    """
    if not 0 <= index < len(f.singular_params):
        raise ParameterRangeError(f"No singular point with index {index}")
    z0 = complex(f.singular_points[index])
    rho = 0.5 * min(f.neighborhood_radius(index), f.arc.diameter)
    if rho <= 0:
        raise ParameterRangeError(f"Singular point {index} is not inside both branch disks")
    a = taylor_coefficients(f.branches[index], z0, rho, max_order)
    b = taylor_coefficients(f.branches[index + 1], z0, rho, max_order)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
    mismatch = np.nonzero(np.abs(a - b) > tol * scale)[0]
    if len(mismatch) == 0:
        raise JumpOrderError(
            f"Branches agree to order {max_order - 1} at singular point {index}; "
            "they are probably one analytic function")
    return int(mismatch[0]) - 1


def taylor_jump_constant(f: PiecewiseAnalyticFunction, index: int, samples: int = 64) -> float:
    """Measured C in |f_{i-1}(ζ) - f_i(ζ)| <= C |ζ - z_i|^{k+1} on circles inside U_i."""
    z0 = complex(f.singular_points[index])
    rho = min(f.neighborhood_radius(index), f.arc.diameter)
    k = f.orders[index]
    w = np.exp(2j * np.pi * np.arange(samples) / samples)
    radii = rho * np.array([0.0625, 0.125, 0.25, 0.5, 0.9])
    zeta = (z0 + radii[:, None] * w[None, :]).ravel()
    ratio = np.abs(f.jump(index, zeta)) / np.abs(zeta - z0) ** (k + 1)
    return float(np.max(ratio))


def check_declared_orders(f: PiecewiseAnalyticFunction, tol: float = 1e-8) -> List[Tuple[int, int, int]]:
    """(index, declared, detected) for every singular point whose orders disagree."""
    mismatches = []
    for i, declared in enumerate(f.orders):
        detected = jump_order(f, i, tol)
        if detected != declared:
            mismatches.append((i, declared, detected))
    return mismatches
