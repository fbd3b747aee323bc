"""
Straightening a corner of a polyline arc onto a model wedge.

F sends the subarc before the singular point onto a segment of [0, ∞), the
subarc after it onto a segment at angle φ = 2π/κ, and the Γ-ray onto the
bisector at angle φ/2, each piece proportionally to arclength with F(z0) = 0.
A polynomial Q close to F then makes Q^κ nearly positive on the arc and
nearly negative on the ray, which is what the wedge damping factor needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from nearbest.bestapprox import ArnoldiPolynomial, discretize, orthonormal_basis
from nearbest.conformal import GammaRay
from nearbest.constants import MAX_KAPPA, PieceKind, WedgeLabel
from nearbest.exceptions import ArcGeometryError, ClassificationError, ParameterRangeError, RateFitError
from nearbest.geometry import Arc
from nearbest.logger import get_logger

logger = get_logger(__name__)

DEGREE_SWEEP = (4, 8, 16, 32, 64)
MIN_ALPHA_R2 = 0.8


@dataclass(frozen=True, eq=False)
class StraighteningMap:
    """Piecewise-affine-by-arclength map of L ∪ Γ onto the model wedge."""
    arc: Arc
    t0: float
    ray: GammaRay
    kappa: int
    lipschitz: Tuple[float, float] = (float("nan"), float("nan"))

    @property
    def angle(self) -> float:
        return 2.0 * np.pi / self.kappa

    @property
    def z0(self) -> complex:
        return complex(self.arc.evaluate(self.t0))

    @property
    def lengths(self) -> Tuple[float, float]:
        """(|L'|, |L''|): arclengths before and after the singular point."""
        s0 = float(self.arc.length_at(self.t0))
        return s0, self.arc.total_length - s0

    def on_arc(self, t) -> np.ndarray:
        """F at arc parameters."""
        t = np.asarray(t, dtype=float)
        s = self.arc.length_at(t) - float(self.arc.length_at(self.t0))
        return np.where(s <= 0, -s + 0j, s * np.exp(1j * self.angle))

    def on_ray(self, radii) -> np.ndarray:
        """F at ray points given by their radius |Φ|."""
        fine_r, cumulative = self.ray.arclength()
        s = np.interp(np.asarray(radii, dtype=float), fine_r, cumulative)
        return s * np.exp(0.5j * self.angle)

    def ray_radii(self, count: int = 256) -> np.ndarray:
        """Ray sample radii clustered toward z0."""
        return 1.0 + np.geomspace(1e-10, self.ray.lam - 1.0, count)

    def samples(self, count: int = 512) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(points, F values, is_arc) on clustered samples of L ∪ Γ."""
        disc = discretize(self.arc, count, [0.0, self.t0, self.arc.t_max])
        radii = self.ray_radii(count // 2)
        points = np.concatenate([disc.points, self.ray.at(radii)])
        values = np.concatenate([self.on_arc(disc.params), self.on_ray(radii)])
        is_arc = np.concatenate([np.ones(len(disc.points), dtype=bool), np.zeros(len(radii), dtype=bool)])
        return points, values, is_arc


def _lipschitz(points: np.ndarray, values: np.ndarray, count: int = 600) -> Tuple[float, float]:
    step = max(1, len(points) // count)
    p = points[::step]
    v = values[::step]
    dz = pdist(np.column_stack([p.real, p.imag]))
    dF = pdist(np.column_stack([v.real, v.imag]))
    keep = dz > 0
    ratio = dF[keep] / dz[keep]
    return float(np.min(ratio)), float(np.max(ratio))


def build_straightening_map(arc: Arc, t0: float, ray: GammaRay, kappa: int) -> StraighteningMap:
    """
    Build F for the singular point at parameter t0 and one of its Γ-rays.

    Returns:
        The map with its measured (inf, sup) Lipschitz ratios

    Raises:
        ArcGeometryError: If the arc is not a polyline
        ParameterRangeError: If κ < 2
    """
    if any(p.kind != PieceKind.SEGMENT for p in arc.pieces):
        raise ArcGeometryError("Wedge straightening needs a polyline arc")
    if kappa < 2:
        raise ParameterRangeError(f"κ must be at least 2, got {kappa}")
    fmap = StraighteningMap(arc, float(t0), ray, int(kappa))
    points, values, _ = fmap.samples(256)
    lipschitz = _lipschitz(points, values)
    if not lipschitz[0] > 0:
        raise ArcGeometryError(f"Straightening map is not one-to-one on samples (inf ratio {lipschitz[0]:.3e})")
    logger.debug(f"Straightening at t0={t0}, κ={kappa}: Lipschitz ratios {lipschitz}")
    return StraighteningMap(arc, float(t0), ray, int(kappa), lipschitz)


@dataclass(frozen=True, eq=False)
class StraighteningFit:
    polynomial: ArnoldiPolynomial
    sup_error: float
    alpha: float
    r_squared: float
    sweep: Dict[int, float] = field(default_factory=dict)

    @property
    def reliable(self) -> bool:
        return self.alpha > 0 and self.r_squared >= MIN_ALPHA_R2


def approximate_straightening(fmap: StraighteningMap, degree: int, sweep: Sequence[int] = DEGREE_SWEEP,
                              samples: int = 512) -> StraighteningFit:
    """
    Least-squares polynomial Q of degree ``degree`` approximating F on L ∪ Γ.

    The sup error over the samples is carried forward: when a lower degree
    of the sweep did better, its polynomial (padded) is returned. α comes from
    a log-log fit of the sweep's sup errors against degree.
    """
    if degree < 1:
        raise ParameterRangeError(f"Straightening degree must be positive, got {degree}")
    points, values, _ = fmap.samples(samples)
    degrees = sorted(set(int(d) for d in sweep if 1 <= d) | {int(degree)})
    top = degrees[-1]
    basis = orthonormal_basis(points, top)
    errors: Dict[int, float] = {}
    best: Optional[ArnoldiPolynomial] = None
    best_err = np.inf
    chosen: Optional[ArnoldiPolynomial] = None
    chosen_err = np.inf
    for d in degrees:
        poly = ArnoldiPolynomial(basis, basis.project(values, d))
        err = float(np.max(np.abs(basis.values[:, :d + 1] @ poly.coefficients - values)))
        if err < best_err:
            best, best_err = poly, err
        errors[d] = best_err
        if d == degree:
            chosen, chosen_err = best.padded(d), best_err
    sweep_degrees = np.array(sorted(set(int(d) for d in sweep if d >= 1)), dtype=float)
    sweep_errors = np.array([errors[int(d)] for d in sweep_degrees])
    alpha, r2 = float("nan"), 0.0
    if len(sweep_degrees) >= 3 and np.all(sweep_errors > 0):
        x, y = np.log(sweep_degrees), np.log(sweep_errors)
        slope, intercept = np.polyfit(x, y, 1)
        total = np.sum((y - y.mean()) ** 2)
        r2 = 1.0 - np.sum((y - slope * x - intercept) ** 2) / total if total > 0 else 1.0
        alpha = float(-slope)
    logger.debug(f"Straightening fit degree {degree}: sup error {chosen_err:.3e}, α={alpha:.3f}, R²={r2:.3f}")
    return StraighteningFit(chosen, chosen_err, alpha, float(r2), errors)


@dataclass(frozen=True)
class Theorem1Params:
    kappa: int
    beta: float
    anchor: float
    alpha: float
    sigma: float


def select_theorem1_params(sigma: float, alpha: float, lengths: Tuple[float, float] = (1.0, 1.0),
                           r_squared: Optional[float] = None) -> Theorem1Params:
    """
    Smallest κ >= 2 with 1 - σ > 1/(1 + κα), β the midpoint of
    (1/(1 + κα), 1 - σ) and ζ₀ = 2 max(|L'|^κ, |L''|^κ).

    Raises:
        ParameterRangeError: If σ is outside (0, 1), α <= 0 or κ would exceed 64
        RateFitError: If the α fit is unreliable (R² < 0.8)
    """
    if not 0.0 < sigma < 1.0:
        raise ParameterRangeError(f"σ must lie in (0, 1), got {sigma}")
    if r_squared is not None and r_squared < MIN_ALPHA_R2:
        raise RateFitError(f"Straightening rate fit has R² = {r_squared:.3f} < {MIN_ALPHA_R2}; α is unreliable")
    if not alpha > 0:
        raise ParameterRangeError(f"Straightening rate α must be positive, got {alpha}")
    for kappa in range(2, MAX_KAPPA + 1):
        low = 1.0 / (1.0 + kappa * alpha)
        if 1.0 - sigma > low:
            beta = 0.5 * (low + 1.0 - sigma)
            anchor = 2.0 * max(lengths[0] ** kappa, lengths[1] ** kappa)
            return Theorem1Params(kappa, beta, anchor, alpha, sigma)
    raise ParameterRangeError(f"No κ <= {MAX_KAPPA} satisfies 1 - σ > 1/(1 + κα) for σ={sigma}, α={alpha:.4g}")


@dataclass
class ClassificationReport:
    threshold: float
    counts: Dict[str, int]
    max_arc_angle: float
    max_ray_angle_gap: float
    labels_arc: np.ndarray
    labels_ray: np.ndarray

    def as_dict(self) -> Dict[str, object]:
        return {"threshold": self.threshold, "counts": dict(self.counts),
                "max_arc_angle": self.max_arc_angle, "max_ray_angle_gap": self.max_ray_angle_gap}


def classify_points(Q: ArnoldiPolynomial, kappa: int, fmap: StraighteningMap, sup_error: float,
                    arc_params: Optional[np.ndarray] = None, ray_radii: Optional[np.ndarray] = None,
                    raise_on_failure: bool = True) -> ClassificationReport:
    """
    Split arc samples into A1/A2/A3 and ray samples into B1/B2 and check the
    angle bounds arg Q^κ ∈ [-π/4, π/4] on A2 ∪ A3 and [3π/4, 5π/4] on B2.

    The threshold is C / sin(π/(4κ)) with C the larger of ``sup_error`` and the
    deviation |Q - F| measured on these samples.

    Raises:
        ClassificationError: On an angle-bound violation or an arc sample in no class
    """
    if arc_params is None:
        arc_params = fmap.arc.uniform_params(1024)
    if ray_radii is None:
        ray_radii = fmap.ray_radii(256)
    z = fmap.arc.evaluate(arc_params)
    zeta = fmap.ray.at(ray_radii)
    qz, qzeta = Q(z), Q(zeta)
    deviation = max(float(np.max(np.abs(qz - fmap.on_arc(arc_params)))),
                    float(np.max(np.abs(qzeta - fmap.on_ray(ray_radii)))))
    C = max(sup_error, deviation)
    threshold = C / np.sin(np.pi / (4 * kappa))
    len1, len2 = fmap.lengths
    direction = np.exp(1j * fmap.angle)

    def segment_distance(values: np.ndarray, unit: complex, length: float) -> np.ndarray:
        proj = np.clip(np.real(values * np.conj(unit)), 0.0, length)
        return np.abs(values - proj * unit)

    labels_arc = np.full(len(z), WedgeLabel.UNCLASSIFIED.value, dtype=object)
    small = np.abs(qz) < threshold
    labels_arc[small] = WedgeLabel.A1.value
    a2 = ~small & (segment_distance(qz, 1.0, len1) <= C)
    a3 = ~small & ~a2 & (segment_distance(qz, direction, len2) <= C)
    labels_arc[a2] = WedgeLabel.A2.value
    labels_arc[a3] = WedgeLabel.A3.value
    labels_ray = np.where(np.abs(qzeta) < threshold, WedgeLabel.B1.value, WedgeLabel.B2.value).astype(object)

    arc_angles = np.abs(np.angle(qz[a2 | a3] ** kappa))
    max_arc = float(np.max(arc_angles)) if arc_angles.size else 0.0
    b2 = labels_ray == WedgeLabel.B2.value
    ray_gap = np.abs(np.pi - np.abs(np.angle(qzeta[b2] ** kappa)))
    max_ray = float(np.max(ray_gap)) if ray_gap.size else 0.0
    counts = {label.value: int(np.count_nonzero(np.concatenate([labels_arc, labels_ray]) == label.value))
              for label in WedgeLabel}
    report = ClassificationReport(float(threshold), counts, max_arc, max_ray, labels_arc, labels_ray)
    problems: List[str] = []
    unclassified = np.nonzero(labels_arc == WedgeLabel.UNCLASSIFIED.value)[0]
    if unclassified.size:
        problems.append(f"arc sample at t={arc_params[unclassified[0]]:.6g} is in no class")
    if max_arc > np.pi / 4 + 1e-12:
        worst = int(np.argmax(np.abs(np.angle(qz ** kappa)) * (a2 | a3)))
        problems.append(f"arg Q^κ = {np.angle(qz[worst] ** kappa):.4f} at t={arc_params[worst]:.6g}")
    if max_ray > np.pi / 4 + 1e-12:
        worst = int(np.argmax(np.abs(np.pi - np.abs(np.angle(qzeta ** kappa))) * b2))
        problems.append(f"arg Q^κ = {np.angle(qzeta[worst] ** kappa):.4f} on the ray at r={ray_radii[worst]:.6g}")
    if problems and raise_on_failure:
        raise ClassificationError("; ".join(problems))
    return report
