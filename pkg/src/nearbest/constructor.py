"""
Near-best polynomial assembly.

Around each singular point z_j the function splits, by the Cauchy formula
over the two Γ-rays, into h1^j (the Cauchy integral of the jump
f_{j-1} - f_j) and an analytic remainder. The polynomial P_n replaces the
Cauchy kernel by a damped polynomial kernel on the outer part of the rays
(|ζ - z_j| >= d_n) and keeps only the damped polynomial first term on the
inner part; the analytic remainder h2 = f - Σ h1^j is approximated
separately at degree ⌈n/2⌉ and added.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from nearbest.bestapprox import (
    ArnoldiBasis,
    ArnoldiPolynomial,
    DiscretizedArc,
    MinimaxResult,
    discretize,
    lawson_minimax,
    orthonormal_basis,
)
from nearbest.conformal import ExteriorMap, FaberBasis, GammaRay, build_exterior_map, gamma_ray, rho_star
from nearbest.constants import (
    LAWSON_MAX_ITER,
    LAWSON_TOLERANCE,
    MAP_TOLERANCE,
    MAX_LAMBDA,
    MONOMIAL_DEGREE_LIMIT,
    NODES_PER_DEGREE,
    POLYNOMIAL_SCHEMA,
    QUADRATURE_ORDER,
    Mode,
    Side,
)
from nearbest.exceptions import (
    AdmissibilityError,
    ClassificationError,
    DegreeBudgetError,
    ParameterRangeError,
    SplitConsistencyError,
)
from nearbest.geometry import Arc, Lemniscate, PiecewiseAnalyticFunction, check_admissibility, d_of_E
from nearbest.kernels import (
    DampingFactor,
    dzyadyk_coefficients,
    lemniscate_damping,
    wedge_damping,
)
from nearbest.logger import get_logger, log_stage, stage_timer
from nearbest.quadrature import RayRule, panel_record, ray_rule
from nearbest.straightening import (
    StraighteningMap,
    Theorem1Params,
    approximate_straightening,
    build_straightening_map,
    classify_points,
    select_theorem1_params,
)

logger = get_logger(__name__)

SIDES = (Side.LEFT, Side.RIGHT)
DAMPING_SAFETY = 10.0
UNIT_DAMPING_SLACK = 1e-12


@dataclass(frozen=True)
class CompactSet:
    """Arc points with parameter in [t_lo, t_hi]."""
    label: str
    t_lo: float
    t_hi: float

    def mask(self, disc: DiscretizedArc) -> np.ndarray:
        return disc.mask_between(self.t_lo, self.t_hi)

    def points(self, arc: Arc, count: int = 512) -> np.ndarray:
        return arc.evaluate(np.linspace(self.t_lo, self.t_hi, count))


@dataclass(frozen=True, eq=False)
class SingularSetup:
    """A singular point with its neighborhood radius, ray radius λ and both rays."""
    index: int
    t0: float
    z0: complex
    order: int
    radius: float
    lam: float
    rays: Dict[Side, GammaRay]


@dataclass(frozen=True, eq=False)
class WedgeSetup:
    fmap: StraighteningMap
    params: Theorem1Params
    r_squared: float


@dataclass(eq=False)
class Scenario:
    name: str
    arc: Arc
    function: PiecewiseAnalyticFunction
    emap: ExteriorMap
    mode: Mode
    singularities: Tuple[SingularSetup, ...]
    discretization: DiscretizedArc
    basis: ArnoldiBasis
    values: np.ndarray
    faber: FaberBasis
    lemniscates: Tuple[Lemniscate, ...] = ()
    sigma: float = 0.5
    order: int = QUADRATURE_ORDER
    panels: int = 8
    compact_sets: Tuple[CompactSet, ...] = ()
    lawson_tol: float = LAWSON_TOLERANCE
    lawson_max_iter: int = LAWSON_MAX_ITER
    strict_classification: bool = False
    _wedges: Dict[Tuple[int, Side], WedgeSetup] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def max_degree(self) -> int:
        return self.basis.degree

    def compact_mask(self, compact: CompactSet) -> np.ndarray:
        return compact.mask(self.discretization)

    def wedge(self, index: int, side: Side) -> WedgeSetup:
        """Straightening map and Theorem 1 parameters for one ray, computed once."""
        key = (index, Side(side))
        with self._lock:
            if key not in self._wedges:
                self._wedges[key] = _select_wedge(self, self.singularities[index], Side(side))
            return self._wedges[key]


def choose_lambda(emap: ExteriorMap, t0: float, radius: float, count: int = 128) -> float:
    """
    Largest λ <= 2 keeping both rays at t0 inside the disk of the given radius,
    by bisection to 1e-3.

    Raises:
        ParameterRangeError: If even λ = 1.001 leaves the disk
    """
    z0 = complex(emap.arc.evaluate(t0))

    def inside(lam: float) -> bool:
        for side in SIDES:
            ray = gamma_ray(emap, t0, side, lam, count)
            if np.max(np.abs(ray.points - z0)) >= radius:
                return False
        return True

    if inside(MAX_LAMBDA):
        return MAX_LAMBDA
    lo, hi = 1.0, MAX_LAMBDA
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    if lo <= 1.0 + 1e-3:
        raise ParameterRangeError(f"Analyticity radius {radius:.3e} at t={t0} leaves no room for Γ-rays")
    return lo


def make_scenario(arc: Arc, function: PiecewiseAnalyticFunction, mode: Mode, max_degree: int,
                  lemniscates: Sequence[Lemniscate] = (), sigma: float = 0.5,
                  compact_sets: Sequence[CompactSet] = (), map_tolerance: float = MAP_TOLERANCE,
                  order: int = QUADRATURE_ORDER, panels: int = 8, nodes_per_degree: int = NODES_PER_DEGREE,
                  lawson_tol: float = LAWSON_TOLERANCE, lawson_max_iter: int = LAWSON_MAX_ITER,
                  name: str = "scenario", strict_classification: bool = False) -> Scenario:
    """
    Build the exterior map, rays, discretization and bases shared by every degree.

    Raises:
        AdmissibilityError: If a Theorem 2 lemniscate is missing or not admissible
        MapAccuracyError: If the exterior map misses map_tolerance
    """
    mode = Mode(mode)
    if max_degree < 1:
        raise ParameterRangeError(f"Maximum degree must be positive, got {max_degree}")
    with stage_timer("constructor", "map built") as timing:
        emap = build_exterior_map(arc, map_tolerance, extra_params=function.singular_params)
        timing["details"] = f"{type(emap).__name__}, accuracy {emap.accuracy:.2e}"
    singularities = []
    for i, t0 in enumerate(function.singular_params):
        radius = function.neighborhood_radius(i)
        lam = choose_lambda(emap, t0, radius)
        rays = {side: gamma_ray(emap, t0, side, lam) for side in SIDES}
        singularities.append(SingularSetup(i, t0, complex(arc.evaluate(t0)), function.orders[i], radius, lam, rays))
    lemniscates = tuple(lemniscates)
    if mode is Mode.THEOREM2:
        if len(lemniscates) != len(singularities):
            raise AdmissibilityError(
                f"Theorem 2 mode needs one lemniscate per singular point ({len(singularities)}), got {len(lemniscates)}")
        for setup, lem in zip(singularities, lemniscates):
            ray_points = np.concatenate([setup.rays[side].points for side in SIDES])
            check_admissibility(lem, arc, setup.t0, ray_points)
    count = nodes_per_degree * (max_degree + 1)
    disc = discretize(arc, count, (0.0,) + tuple(function.singular_params) + (arc.t_max,))
    basis = orthonormal_basis(disc.points, max_degree)
    values = function.evaluate(disc.params)
    faber = FaberBasis(emap, max(1, max_degree // 2))
    log_stage("constructor", "scenario ready", f"{name}: {len(disc)} nodes, {len(singularities)} singular points")
    return Scenario(name, arc, function, emap, mode, tuple(singularities), disc, basis, values, faber,
                    lemniscates, sigma, order, panels, tuple(compact_sets), lawson_tol, lawson_max_iter,
                    strict_classification)


def compute_dn(emap: ExteriorMap, z0: complex, n: int) -> float:
    """d_n = ρ*_{1/n}(z0)."""
    if n < 1:
        raise ParameterRangeError(f"Degree must be at least 1, got {n}")
    return rho_star(emap, z0, 1.0 / n)


# ---------------------------------------------------------------------------
# Cauchy split
# ---------------------------------------------------------------------------

def _cauchy_values(points: np.ndarray, zeta: np.ndarray, coefficients: np.ndarray, chunk: int = 512) -> np.ndarray:
    out = np.zeros(len(points), dtype=complex)
    for start in range(0, len(zeta), chunk):
        sl = slice(start, start + chunk)
        out += (1.0 / (zeta[None, sl] - points[:, None])) @ coefficients[sl]
    return out


def _jump_coefficients(scenario: Scenario, setup: SingularSetup, rule: RayRule) -> np.ndarray:
    return rule.weights * scenario.function.jump(setup.index, rule.zeta) / (2j * np.pi)


@dataclass(frozen=True, eq=False)
class CauchySplit:
    signs: Tuple[int, ...]
    rules: Tuple[Tuple[RayRule, RayRule], ...]
    h1: np.ndarray                    # Σ_j s_j h1^j at the scenario nodes
    h2: MinimaxResult
    h2_polynomial: ArnoldiPolynomial
    h2_decay: Tuple[float, float]     # (slope of log LS error vs degree, R²)
    separation: Tuple[float, ...]     # local fit error with the chosen sign over the flipped one

    @property
    def h2_degree(self) -> int:
        return self.h2.degree


def _local_fit_error(basis: ArnoldiBasis, values: np.ndarray, degree: int, mask: np.ndarray) -> float:
    coeffs = basis.project(values, degree)
    residual = values - basis.values[:, :degree + 1] @ coeffs
    return float(np.max(np.abs(residual[mask])))


def _decay(basis: ArnoldiBasis, values: np.ndarray, degree: int) -> Tuple[float, float]:
    degrees = sorted({max(1, degree // 4), max(1, degree // 2), degree})
    scale = max(float(np.max(np.abs(values))), 1e-300)
    errors = []
    for d in degrees:
        coeffs = basis.project(values, d)
        errors.append(float(np.max(np.abs(values - basis.values[:, :d + 1] @ coeffs))))
    errors = np.maximum(errors, 1e-16 * scale)
    if len(degrees) < 2 or np.max(errors) <= 1e-13 * scale:
        return 0.0, 1.0
    x, y = np.asarray(degrees, dtype=float), np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - slope * x - intercept) ** 2) / total if total > 0 else 1.0
    return float(slope), float(r2)


def cauchy_split(scenario: Scenario, n: int, rules: Sequence[Tuple[RayRule, RayRule]]) -> CauchySplit:
    """
    h1 from the Cauchy integrals of the jumps and a degree ⌈n/2⌉ minimax
    approximant of h2 = f - h1.

    The orientation of each contour Γ¹ ∪ Γ² is chosen per singular point as
    the sign that leaves h2 analytic there, measured as the smaller local
    least-squares error of h2 at degree ⌈n/2⌉.

    Raises:
        SplitConsistencyError: If neither orientation removes the singularity
    """
    basis = scenario.basis
    points = scenario.discretization.points
    h2_degree = min(math.ceil(n / 2), basis.degree)
    parts: List[np.ndarray] = []
    for setup, pair in zip(scenario.singularities, rules):
        zeta = np.concatenate([r.zeta for r in pair])
        coeffs = np.concatenate([_jump_coefficients(scenario, setup, r) for r in pair])
        parts.append(_cauchy_values(points, zeta, coeffs) if np.any(coeffs != 0) else np.zeros(len(points), complex))
    signs = [1] * len(parts)
    separation = [0.0] * len(parts)
    singular = np.array([s.z0 for s in scenario.singularities])
    for j, setup in enumerate(scenario.singularities):
        if not np.any(parts[j] != 0):
            continue
        others = np.abs(singular[np.arange(len(singular)) != j] - setup.z0)
        reach = 0.5 * min(float(np.min(others)) if others.size else np.inf, setup.radius, scenario.arc.diameter)
        mask = np.abs(points - setup.z0) < reach
        fits = {}
        for s in (1, -1):
            trial = list(signs)
            trial[j] = s
            h2 = scenario.values - sum(sj * p for sj, p in zip(trial, parts))
            fits[s] = _local_fit_error(basis, h2, h2_degree, mask)
        chosen = 1 if fits[1] <= fits[-1] else -1
        signs[j] = chosen
        separation[j] = fits[chosen] / max(fits[-chosen], 1e-300)
        if separation[j] > 0.9:
            raise SplitConsistencyError(
                f"Neither orientation makes h2 analytic at z={setup.z0} "
                f"(local errors {fits[1]:.3e} and {fits[-1]:.3e}); check the analyticity radius")
    h1 = sum((s * p for s, p in zip(signs, parts)), np.zeros(len(points), dtype=complex))
    h2_values = scenario.values - h1
    h2 = lawson_minimax(h2_values, basis, h2_degree, scenario.lawson_tol, scenario.lawson_max_iter)
    decay = _decay(basis, h2_values, h2_degree)
    if decay[0] > 0:
        logger.warning(f"h2 least-squares errors grow with degree (slope {decay[0]:.3e}) at n={n}")
    return CauchySplit(tuple(signs), tuple(tuple(pair) for pair in rules), h1, h2, h2.polynomial(basis),
                       decay, tuple(separation))


def build_rules(scenario: Scenario, n: int) -> Tuple[List[float], List[Tuple[RayRule, RayRule]]]:
    """(d_n per singular point, (Γ¹ rule, Γ² rule) per singular point); Γ¹ runs toward z_j."""
    dns: List[float] = []
    rules: List[Tuple[RayRule, RayRule]] = []
    for setup in scenario.singularities:
        dn = compute_dn(scenario.emap, setup.z0, n)
        dns.append(dn)
        rules.append(tuple(ray_rule(setup.rays[side], dn, scenario.order, scenario.panels,
                                    inward=(side is Side.LEFT)) for side in SIDES))
    return dns, rules


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass
class DampingReport:
    """Damping maxima recorded during assembly, per ray and per compact set."""
    kind: str
    exponents: Dict[str, int] = field(default_factory=dict)
    max_ratio_L: Dict[str, float] = field(default_factory=dict)
    compact: Dict[str, Dict[str, float]] = field(default_factory=dict)
    classification: Dict[str, Dict[str, object]] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.failures

    @property
    def exponent(self) -> int:
        return min(self.exponents.values()) if self.exponents else 0

    def exponent_at(self, index: int) -> int:
        """Smallest exponent over the two rays of singular point ``index``."""
        values = [m for key, m in self.exponents.items() if key.split(":")[0] == str(index)]
        return min(values) if values else 0

    def as_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "exponents": dict(self.exponents),
            "max_ratio_L": dict(self.max_ratio_L),
            "compact": {k: dict(v) for k, v in self.compact.items()},
            "classification": dict(self.classification),
            "failures": list(self.failures),
            "holds": self.holds,
        }


@dataclass(frozen=True, eq=False)
class NearBestPolynomial:
    degree: int
    mode: Mode
    polynomial: ArnoldiPolynomial
    d_n: Tuple[float, ...]
    kernel_degree: int
    split: CauchySplit
    damping: DampingReport
    panels: Tuple[Dict[str, object], ...]
    parameters: Dict[str, object]
    projection_residual: float
    quadrature_change: float = float("nan")

    @property
    def exponent(self) -> int:
        return self.damping.exponent

    def __call__(self, z) -> np.ndarray:
        return self.polynomial(z)

    def monomial_coefficients(self) -> np.ndarray:
        if self.degree > MONOMIAL_DEGREE_LIMIT:
            raise ParameterRangeError(f"Monomial export is limited to degree {MONOMIAL_DEGREE_LIMIT}")
        return self.polynomial.monomial_coefficients()

    def to_json(self) -> Dict[str, object]:
        """JSON-ready export: monomial coefficients when available plus the exact Arnoldi data."""
        def pairs(values) -> List[List[float]]:
            return [[float(v.real), float(v.imag)] for v in np.asarray(values, dtype=complex).ravel()]

        basis = self.polynomial.basis
        payload: Dict[str, object] = {
            "schema": POLYNOMIAL_SCHEMA,
            "degree": self.degree,
            "mode": self.mode.value,
            "d_n": list(self.d_n),
            "kernel_degree": self.kernel_degree,
            "h2_degree": self.split.h2_degree,
            "orientation": list(self.split.signs),
            "damping": self.damping.as_dict(),
            "panels": list(self.panels),
            "parameters": dict(self.parameters),
            "projection_residual": self.projection_residual,
            "quadrature_change": None if math.isnan(self.quadrature_change) else self.quadrature_change,
            "arnoldi": {
                "node_count": basis.node_count,
                "hessenberg": [pairs(row) for row in basis.hessenberg[:self.degree + 1, :self.degree]],
                "coefficients": pairs(self.polynomial.coefficients),
            },
        }
        payload["monomial_coefficients"] = pairs(self.monomial_coefficients()) \
            if self.degree <= MONOMIAL_DEGREE_LIMIT else None
        return payload


def eval_nearbest(P: NearBestPolynomial, z) -> np.ndarray:
    """P at z through the stored Arnoldi recurrence."""
    return P(z)


def _damping_matrix_sum(damping: DampingFactor, z: np.ndarray, zeta: np.ndarray, coefficients: np.ndarray,
                        kernel_values: Optional[np.ndarray], chunk: int = 256) -> np.ndarray:
    out = np.zeros(len(z), dtype=complex)
    for start in range(0, len(zeta), chunk):
        sl = slice(start, start + chunk)
        zc = zeta[None, sl]
        terms = damping.first_term(z[:, None], zc)
        if kernel_values is not None:
            terms = terms + damping.ratio(z[:, None], zc) * kernel_values[:, sl]
        out += terms @ coefficients[sl]
    return out


def _record_damping(report: DampingReport, scenario: Scenario, key: str, damping: DampingFactor,
                    rule: RayRule, lemniscate: Optional[Lemniscate]) -> None:
    m = damping.exponent
    report.exponents[key] = m
    gz = np.abs(damping.base(scenario.discretization.points))
    gzeta = float(np.min(np.abs(damping.base(rule.zeta))))
    top = float(np.max(gz)) / gzeta
    report.max_ratio_L[key] = top ** m
    if lemniscate is not None and top > 1.0 + UNIT_DAMPING_SLACK:
        report.failures.append(f"{key}: |P(z)/P(ζ)| reaches {top:.15g} > 1")
    for compact in scenario.compact_sets:
        mask = scenario.compact_mask(compact)
        if not np.any(mask):
            continue
        q = float(np.max(gz[mask])) / gzeta
        entry = {"q": q, "measured": q ** m}
        if lemniscate is not None:
            dE = d_of_E(lemniscate, scenario.discretization.points[mask])
            entry["d_E"] = dE
            entry["bound"] = DAMPING_SAFETY * (1.0 - dE) ** m
        else:
            if not q < 1.0:
                report.failures.append(f"{key}: compact set {compact.label} has q = {q:.6g} >= 1")
        if "bound" in entry and entry["measured"] > entry["bound"]:
            report.failures.append(f"{key}: compact set {compact.label} damping {entry['measured']:.3e} "
                                   f"exceeds {entry['bound']:.3e}")
        report.compact[f"{key}:{compact.label}"] = entry


def _lemniscate_factory(scenario: Scenario, n: int) -> Callable[[SingularSetup, Side], Tuple[DampingFactor, dict]]:
    def factory(setup: SingularSetup, side: Side) -> Tuple[DampingFactor, dict]:
        lem = scenario.lemniscates[setup.index]
        return lemniscate_damping(lem, n), {"N": lem.order, "R": lem.radius}
    return factory


def _select_wedge(scenario: Scenario, setup: SingularSetup, side: Side, rounds: int = 4) -> WedgeSetup:
    kappa = 2
    fmap = build_straightening_map(scenario.arc, setup.t0, setup.rays[side], kappa)
    params: Optional[Theorem1Params] = None
    fit = None
    for _ in range(rounds):
        fit = approximate_straightening(fmap, 8)
        params = select_theorem1_params(scenario.sigma, fit.alpha, fmap.lengths, fit.r_squared)
        if params.kappa == fmap.kappa:
            break
        fmap = build_straightening_map(scenario.arc, setup.t0, setup.rays[side], params.kappa)
    log_stage("constructor", "wedge selected",
              f"z={setup.z0}, side={int(side)}: κ={params.kappa}, β={params.beta:.4f}, α={params.alpha:.4f}")
    return WedgeSetup(fmap, params, fit.r_squared)


def _wedge_factory(scenario: Scenario, n: int) -> Callable[[SingularSetup, Side], Tuple[DampingFactor, dict]]:
    def factory(setup: SingularSetup, side: Side) -> Tuple[DampingFactor, dict]:
        wedge = scenario.wedge(setup.index, side)
        params = wedge.params
        q_degree = max(1, int(math.floor(n ** params.beta + 1e-12)))
        fit = approximate_straightening(wedge.fmap, q_degree, sweep=())
        report = classify_points(fit.polynomial, params.kappa, wedge.fmap, fit.sup_error,
                                 raise_on_failure=scenario.strict_classification)
        damping = wedge_damping(fit.polynomial, params.kappa, params.anchor, n, params.beta)
        meta = {"kappa": params.kappa, "beta": params.beta, "anchor": params.anchor, "alpha": params.alpha,
                "q_degree": q_degree, "C": fit.sup_error, "classification": report.as_dict(),
                "classified": report.max_arc_angle <= np.pi / 4 + 1e-12
                and report.max_ray_angle_gap <= np.pi / 4 + 1e-12
                and report.counts.get("unclassified", 0) == 0}
        return damping, meta
    return factory


def _assemble(scenario: Scenario, n: int, dns: List[float], rules: List[Tuple[RayRule, RayRule]],
              split: CauchySplit, factory, kind: str, report: Optional[DampingReport] = None,
              parameters: Optional[Dict[str, object]] = None) -> Tuple[np.ndarray, int]:
    z = scenario.discretization.points
    half = n // 2
    Fz = scenario.faber.evaluate(z, half)
    values = split.h2_polynomial(z).astype(complex)
    kernel_degree = split.h2_degree
    for setup, pair, sign in zip(scenario.singularities, rules, split.signs):
        for side, rule in zip(SIDES, pair):
            coeffs = sign * _jump_coefficients(scenario, setup, rule)
            damping, meta = factory(setup, side)
            damping.check_pole(rule.zeta)
            kernel_degree = max(kernel_degree, damping.degree - 1, damping.degree + half)
            key = f"{setup.index}:{int(side)}"
            if report is not None:
                _record_damping(report, scenario, key, damping, rule,
                                scenario.lemniscates[setup.index] if kind == "lemniscate" else None)
                if kind == "wedge":
                    report.classification[key] = meta.pop("classification")
                    if not meta.pop("classified"):
                        report.failures.append(f"{key}: wedge classification angle bounds fail")
            if parameters is not None:
                parameters[key] = meta
            if not np.any(coeffs != 0):
                continue
            outer = rule.outer
            if np.any(outer):
                A = dzyadyk_coefficients(scenario.emap, rule.zeta[outer], half, rule.w[outer])
                values += _damping_matrix_sum(damping, z, rule.zeta[outer], coeffs[outer], Fz @ A)
            inner = ~outer
            if np.any(inner):
                values += _damping_matrix_sum(damping, z, rule.zeta[inner], coeffs[inner], None)
    return values, kernel_degree


def construct(scenario: Scenario, n: int, check_quadrature: bool = False) -> NearBestPolynomial:
    """
    Near-best polynomial of degree n in the scenario's mode.

    Args:
        scenario: Prepared scenario (Theorem 1 or Theorem 2 mode)
        n: Target degree, at most the scenario's maximum degree
        check_quadrature: Also assemble with every panel halved and record the relative change

    Raises:
        DegreeBudgetError: If a damping exponent is zero or the degree arithmetic overflows n
        ClassificationError: In strict classification mode, on angle-bound violations
    """
    if scenario.mode is Mode.BESTAPPROX:
        raise ParameterRangeError("Best-approximation scenarios do not construct near-best polynomials")
    if not 1 <= n <= scenario.max_degree:
        raise ParameterRangeError(f"Degree {n} outside [1, {scenario.max_degree}]")
    if scenario.mode is Mode.THEOREM2:
        factory, kind = _lemniscate_factory(scenario, n), "lemniscate"
    else:
        factory, kind = _wedge_factory(scenario, n), "wedge"
    dns, rules = build_rules(scenario, n)
    split = cauchy_split(scenario, n, rules)
    report = DampingReport(kind)
    parameters: Dict[str, object] = {}
    values, kernel_degree = _assemble(scenario, n, dns, rules, split, factory, kind, report, parameters)
    if kernel_degree > n:
        raise DegreeBudgetError(f"Assembled degree {kernel_degree} exceeds {n}")
    basis = scenario.basis
    coefficients = basis.project(values, n)
    fitted = basis.values[:, :n + 1] @ coefficients
    scale = max(float(np.max(np.abs(values))), 1e-300)
    projection_residual = float(np.max(np.abs(fitted - values))) / scale
    change = float("nan")
    if check_quadrature:
        refined = [tuple(r.refined() for r in pair) for pair in rules]
        refined_values, _ = _assemble(scenario, n, dns, refined, split, factory, kind)
        change = float(np.max(np.abs(refined_values - values))) / scale
    panels = tuple(panel_record(r) for pair in rules for r in pair)
    log_stage("constructor", "polynomial assembled",
              f"{scenario.name}: n={n}, mode={scenario.mode.value}, kernel degree {kernel_degree}, "
              f"m={report.exponent}, damping holds={report.holds}")
    return NearBestPolynomial(n, scenario.mode, ArnoldiPolynomial(basis, coefficients), tuple(dns),
                              kernel_degree, split, report, panels, parameters, projection_residual, change)


def construct_theorem2(scenario: Scenario, n: int, check_quadrature: bool = False) -> NearBestPolynomial:
    """Lemniscate-damped construction; m = ⌊n/(2N)⌋ must be positive."""
    if scenario.mode is not Mode.THEOREM2:
        raise ParameterRangeError(f"Scenario {scenario.name} is in {scenario.mode.value} mode")
    return construct(scenario, n, check_quadrature)


def construct_theorem1(scenario: Scenario, n: int, check_quadrature: bool = False) -> NearBestPolynomial:
    """Wedge-damped construction with κ, β, ζ₀ chosen per ray from the measured straightening rate."""
    if scenario.mode is not Mode.THEOREM1:
        raise ParameterRangeError(f"Scenario {scenario.name} is in {scenario.mode.value} mode")
    return construct(scenario, n, check_quadrature)


def damping_report(P: NearBestPolynomial) -> DampingReport:
    return P.damping


def smallest_damping_degree(scenario: Scenario, degrees: Sequence[int]) -> Optional[int]:
    """Smallest tested degree at which every damping assertion holds, or None."""
    for n in sorted(int(d) for d in degrees):
        try:
            P = construct(scenario, n)
        except (DegreeBudgetError, ClassificationError) as exc:
            logger.debug(f"Degree {n} skipped for the damping threshold: {exc}")
            continue
        if P.damping.holds:
            return n
    return None


# ---------------------------------------------------------------------------
# Two-sided law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LawReport:
    k: int
    ratios: Dict[int, float]
    points: Dict[int, complex]

    @property
    def spread(self) -> float:
        values = [v for v in self.ratios.values() if v > 0 and np.isfinite(v)]
        if len(values) < 2:
            return float("nan")
        return max(values) / min(values)


def two_sided_law(rows: Sequence[Tuple[int, float]], emap: ExteriorMap,
                  singularities: Sequence[Tuple[complex, int]]) -> LawReport:
    """
    E_n / ρ*_{1/n}(z*)^{k+1} per degree, with k the smallest jump order and z*
    the singular point of that order with the largest ρ*_{1/n}.
    """
    if not singularities:
        raise ParameterRangeError("The two-sided law needs at least one singular point")
    k = min(order for _, order in singularities)
    candidates = [complex(z) for z, order in singularities if order == k]
    ratios: Dict[int, float] = {}
    points: Dict[int, complex] = {}
    for n, en in rows:
        values = [(rho_star(emap, z, 1.0 / n), z) for z in candidates]
        rho, z = max(values, key=lambda item: item[0])
        ratios[int(n)] = float(en) / rho ** (k + 1)
        points[int(n)] = z
    return LawReport(k, ratios, points)
