"""
Contour quadrature along Γ-rays.

A ray is parametrized by r = |Φ(ζ)| in (1, λ]. With s = r - 1 the outer part
|ζ - z0| >= d starts at the split s_d and is covered by geometrically growing
Gauss-Legendre panels; the inner part is covered by dyadic panels
[s_d/2^{j+1}, s_d/2^j] down to s = 1e-12, and the remaining piece between z0
and the innermost point is replaced by one node carrying the weight
(ζ_min - z0).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_legendre

from nearbest.conformal import GammaRay
from nearbest.constants import INNER_GAP, QUADRATURE_ORDER
from nearbest.exceptions import QuadratureError
from nearbest.logger import get_logger

logger = get_logger(__name__)

Panel = Tuple[float, float]


@lru_cache(maxsize=8)
def _gauss(order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(order)
    return x, w


@dataclass(frozen=True, eq=False)
class RayRule:
    """
    Nodes and complex weights dζ for one ray.

    ``outer`` marks the nodes with |ζ - z0| >= split; the last node is the
    tail node next to z0. Weights already include the orientation.
    """
    ray: GammaRay
    split: float
    split_s: float
    radii: np.ndarray
    zeta: np.ndarray
    weights: np.ndarray
    outer: np.ndarray
    outer_panels: Tuple[Panel, ...]
    inner_panels: Tuple[Panel, ...]
    order: int = QUADRATURE_ORDER
    inward: bool = False

    @property
    def w(self) -> np.ndarray:
        """Φ at the nodes."""
        return self.radii * np.exp(1j * self.ray.theta)

    @property
    def node_count(self) -> int:
        return len(self.zeta)

    def integrate(self, values) -> complex:
        return complex(np.sum(np.asarray(values) * self.weights))

    def refined(self) -> "RayRule":
        """The same rule with every panel halved."""
        return _assemble(self.ray, self.split, self.split_s, _halve(self.outer_panels),
                         _halve(self.inner_panels), self.order, self.inward)


def _halve(panels: Tuple[Panel, ...]) -> Tuple[Panel, ...]:
    out: List[Panel] = []
    for a, b in panels:
        mid = np.sqrt(a * b) if a > 0 else 0.5 * (a + b)
        out.extend([(a, mid), (mid, b)])
    return tuple(out)


def split_parameter(ray: GammaRay, split: float) -> float:
    """
    s = |Φ(ζ)| - 1 at which |ζ - z0| = split along the ray.

    Raises:
        QuadratureError: If split is not within the ray's extent
    """
    s_max = ray.lam - 1.0

    def gap(s: float) -> float:
        return abs(complex(ray.at(1.0 + s)) - ray.z0) - split

    hi = gap(s_max)
    lo = gap(INNER_GAP)
    if hi < 0:
        raise QuadratureError(f"Split radius {split:.3e} exceeds the ray's extent {hi + split:.3e}")
    if lo > 0:
        raise QuadratureError(f"Split radius {split:.3e} is inside the innermost ray point ({lo + split:.3e})")
    return float(brentq(gap, INNER_GAP, s_max, xtol=1e-15, rtol=1e-13))


def _assemble(ray: GammaRay, split: float, split_s: float, outer_panels: Tuple[Panel, ...],
              inner_panels: Tuple[Panel, ...], order: int, inward: bool) -> RayRule:
    x, wg = _gauss(order)
    panels = inner_panels + outer_panels
    s = np.concatenate([0.5 * (b - a) * x + 0.5 * (a + b) for a, b in panels])
    ws = np.concatenate([0.5 * (b - a) * wg for a, b in panels])
    radii = 1.0 + s
    zeta = ray.at(radii)
    weights = ws * ray.derivative(radii)
    outer = np.concatenate([np.zeros(len(inner_panels) * order, dtype=bool),
                            np.ones(len(outer_panels) * order, dtype=bool)])
    s_min = min(a for a, _ in panels) if panels else INNER_GAP
    tail = complex(ray.at(1.0 + s_min))
    radii = np.append(radii, 1.0 + s_min)
    zeta = np.append(zeta, tail)
    weights = np.append(weights, tail - ray.z0)
    outer = np.append(outer, False)
    if inward:
        weights = -weights
    return RayRule(ray, split, split_s, radii, zeta, weights, outer, outer_panels, inner_panels, order, inward)


def ray_rule(ray: GammaRay, split: float, order: int = QUADRATURE_ORDER, panels: int = 8,
             inward: bool = False) -> RayRule:
    """
    Quadrature rule for a ray split at |ζ - z0| = split.

    Args:
        ray: The Γ-ray
        split: Split radius d
        order: Gauss-Legendre nodes per panel
        panels: Minimum number of outer panels (more when the outer part spans
            more than that many octaves)
        inward: Orient the ray toward z0

    Raises:
        QuadratureError: If the split is outside the ray
    """
    if order < 1 or panels < 1:
        raise QuadratureError(f"Order and panel count must be positive, got {order}, {panels}")
    split_s = split_parameter(ray, split)
    s_max = ray.lam - 1.0
    octaves = int(np.ceil(np.log2(s_max / split_s))) if s_max > split_s else 1
    edges = np.geomspace(split_s, s_max, max(panels, octaves) + 1)
    outer_panels = tuple((float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]))
    inner: List[Panel] = []
    hi = split_s
    while hi > INNER_GAP * (1.0 + 1e-9):
        lo = max(0.5 * hi, INNER_GAP)
        inner.append((lo, hi))
        hi = lo
    inner_panels = tuple(reversed(inner))
    rule = _assemble(ray, split, split_s, outer_panels, inner_panels, order, inward)
    logger.debug(f"Ray rule at t0={ray.t0}, side={int(ray.side)}: {len(outer_panels)} outer and "
                 f"{len(inner_panels)} inner panels, split s={split_s:.3e}")
    return rule


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error: float
    nodes: int
    refinements: int


def quadrature_contour(integrand: Callable[[np.ndarray], np.ndarray], ray: GammaRay, split: float,
                       order: int = QUADRATURE_ORDER, panels: int = 8, tol: float = 1e-10,
                       max_refinements: int = 4, inward: bool = False) -> QuadratureResult:
    """
    ∫ integrand(ζ) dζ over the whole ray, with a panel-doubling error estimate.

    Panels are halved until the change falls below tol times the integral
    scale (the largest of |value| and the integral of |integrand|).

    Raises:
        QuadratureError: If refinement does not converge
    """
    rule = ray_rule(ray, split, order, panels, inward)
    values = np.asarray(integrand(rule.zeta), dtype=complex)
    current = rule.integrate(values)
    scale = max(abs(current), float(np.sum(np.abs(values * rule.weights))), 1e-300)
    change = float("inf")
    for refinement in range(1, max_refinements + 1):
        rule = rule.refined()
        values = np.asarray(integrand(rule.zeta), dtype=complex)
        finer = rule.integrate(values)
        change = abs(finer - current)
        current = finer
        if change <= tol * scale:
            return QuadratureResult(current, change, rule.node_count, refinement)
    raise QuadratureError(f"Panel refinement did not converge: last change {change:.3e}, "
                          f"scale {scale:.3e}, tolerance {tol:.1e}")


def panel_record(rule: RayRule) -> dict:
    """JSON-friendly summary of a rule's panels."""
    return {
        "t0": rule.ray.t0,
        "side": int(rule.ray.side),
        "split": rule.split,
        "split_s": rule.split_s,
        "outer_panels": len(rule.outer_panels),
        "inner_panels": len(rule.inner_panels),
        "nodes": rule.node_count,
        "inward": rule.inward,
    }
