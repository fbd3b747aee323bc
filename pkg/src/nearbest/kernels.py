"""
Polynomial kernels in z approximating the Cauchy kernel 1/(ζ - z).

The base kernel is the truncated Faber expansion
K_n(ζ, z) = Σ_{k<=n} F_k(z) Φ'(ζ)/Φ(ζ)^{k+1}. The damped kernels multiply it
by g(z)/g(ζ) raised to a power m, where g is either the lemniscate polynomial
P or Q^κ - ζ₀ for a polynomial Q straightening a wedge, and add the
polynomial (1 - (g(z)/g(ζ))^m)/(ζ - z) so the result still reproduces the
Cauchy kernel's singular behavior.

Every kernel carries exact degree accounting: the degree of each factor is
known as an integer, and a construction whose degrees overflow the bound n is
rejected with DegreeBudgetError rather than truncated.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from nearbest.bestapprox import ArnoldiPolynomial
from nearbest.conformal import ExteriorMap, FaberBasis, GammaRay
from nearbest.constants import MONOMIAL_DEGREE_LIMIT, KernelForm
from nearbest.exceptions import DegreeBudgetError, KernelDomainError, ParameterRangeError
from nearbest.geometry import Lemniscate
from nearbest.logger import get_logger

logger = get_logger(__name__)


def _log1p(x: np.ndarray) -> np.ndarray:
    """Complex log(1 + x), accurate for small |x|."""
    x = np.asarray(x, dtype=complex)
    series = x * (1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x)))
    return np.where(np.abs(x) < 1e-4, series, np.log(1.0 + x))


def _expm1(x: np.ndarray) -> np.ndarray:
    """Complex exp(x) - 1, accurate for small |x|."""
    x = np.asarray(x, dtype=complex)
    series = x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)))
    return np.where(np.abs(x) < 1e-4, series, np.exp(x) - 1.0)


# ---------------------------------------------------------------------------
# Faber kernel
# ---------------------------------------------------------------------------

def _domain_tolerance(emap: ExteriorMap) -> float:
    eps = emap.accuracy
    return float(eps) if np.isfinite(eps) and eps > 0 else 1e-14


def dzyadyk_coefficients(emap: ExteriorMap, zeta, n: int, w=None) -> np.ndarray:
    """
    Faber coefficients a_k(ζ) = Φ'(ζ)/Φ(ζ)^{k+1}, k = 0..n, one column per ζ.

    Args:
        emap: Exterior map
        zeta: Source points
        n: Truncation degree
        w: Φ(ζ) when already known (ray nodes), which spares the forward map

    Returns:
        Array of shape (n + 1, len(zeta))

    Raises:
        KernelDomainError: If some |Φ(ζ)| <= 1 + ε_map
    """
    if n < 0:
        raise ParameterRangeError(f"Kernel degree must be non-negative, got {n}")
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    if w is None:
        w = np.atleast_1d(emap.phi(zeta))
        dphi = np.atleast_1d(emap.dphi(zeta))
    else:
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        dphi = 1.0 / np.atleast_1d(emap.dpsi(w))
    modulus = np.abs(w)
    tol = _domain_tolerance(emap)
    if np.any(modulus <= 1.0 + tol):
        worst = int(np.argmin(modulus))
        raise KernelDomainError(f"Kernel pole {zeta[worst]} has |Φ| = {modulus[worst]:.3e} <= 1 + {tol:.1e}")
    k = np.arange(n + 1)[:, None]
    return dphi[None, :] / w[None, :] * w[None, :] ** (-k)


@dataclass(frozen=True, eq=False)
class DampingFactor(ABC):
    """
    g(z)/g(ζ) raised to a power: the polynomial g, its exponent m and the
    exact degree of g^m.
    """
    exponent: int

    kind = ""

    @property
    @abstractmethod
    def base_degree(self) -> int:
        """Degree of g."""

    @abstractmethod
    def base(self, z) -> np.ndarray:
        """g(z)."""

    @abstractmethod
    def log_ratio(self, z, zeta) -> np.ndarray:
        """log(g(z)/g(ζ)) up to multiples of 2πi, accurate when z is close to ζ."""

    @abstractmethod
    def base_log_derivative(self, zeta) -> np.ndarray:
        """g'(ζ)/g(ζ)."""

    @abstractmethod
    def base_coefficients(self) -> np.ndarray:
        """Ascending monomial coefficients of g."""

    @property
    def degree(self) -> int:
        return self.base_degree * self.exponent

    def check_pole(self, zeta) -> None:
        values = np.abs(self.base(np.atleast_1d(np.asarray(zeta, dtype=complex))))
        if np.any(values == 0.0):
            raise KernelDomainError(f"{self.kind} damping base vanishes at a kernel pole")

    def ratio(self, z, zeta) -> np.ndarray:
        """(g(z)/g(ζ))^m, broadcasting z against ζ."""
        return np.exp(self.exponent * self.log_ratio(z, zeta))

    def first_term(self, z, zeta) -> np.ndarray:
        """(1 - (g(z)/g(ζ))^m)/(ζ - z), with its limit m g'(ζ)/g(ζ) at z = ζ; broadcasts."""
        z = np.asarray(z, dtype=complex)
        zeta = np.asarray(zeta, dtype=complex)
        diff = zeta - z
        coincident = diff == 0
        safe_diff = np.where(coincident, 1.0, diff)
        out = -_expm1(self.exponent * self.log_ratio(z, zeta)) / safe_diff
        if np.any(coincident):
            limit = self.exponent * self.base_log_derivative(np.broadcast_to(zeta, diff.shape)[coincident])
            out[coincident] = limit
        return out

    def ratio_coefficients(self, zeta: complex) -> np.ndarray:
        """Monomial coefficients of (g(z)/g(ζ))^m in z."""
        g = self.base_coefficients()
        g_zeta = complex(npoly.polyval(zeta, g))
        if g_zeta == 0:
            raise KernelDomainError(f"{self.kind} damping base vanishes at ζ = {zeta}")
        return npoly.polypow(g / g_zeta, self.exponent) if self.exponent else np.array([1.0 + 0j])


@dataclass(frozen=True, eq=False)
class LemniscateDamping(DampingFactor):
    """g = P/R^N for the lemniscate polynomial P."""
    lemniscate: Lemniscate = None

    kind = "lemniscate"

    @property
    def base_degree(self) -> int:
        return self.lemniscate.order

    def base(self, z) -> np.ndarray:
        return self.lemniscate.normalized(z)

    def log_ratio(self, z, zeta) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        zeta = np.asarray(zeta, dtype=complex)
        diff = z - zeta
        out = np.zeros(diff.shape, dtype=complex)
        for root in self.lemniscate.roots:
            out = out + _log1p(diff / (zeta - root))
        return out

    def base_log_derivative(self, zeta) -> np.ndarray:
        return self.lemniscate.log_derivative(zeta)

    def base_coefficients(self) -> np.ndarray:
        return self.lemniscate.coefficients()


@dataclass(frozen=True, eq=False)
class WedgeDamping(DampingFactor):
    """g = Q^κ - ζ₀ for the straightening polynomial Q."""
    polynomial: ArnoldiPolynomial = None
    kappa: int = 2
    anchor: float = 1.0

    kind = "wedge"

    @property
    def base_degree(self) -> int:
        return self.polynomial.degree * self.kappa

    def base(self, z) -> np.ndarray:
        return self.polynomial(np.asarray(z, dtype=complex)) ** self.kappa - self.anchor

    def log_ratio(self, z, zeta) -> np.ndarray:
        qz = self.polynomial(np.asarray(z, dtype=complex)) ** self.kappa
        qzeta = self.polynomial(np.asarray(zeta, dtype=complex)) ** self.kappa
        return _log1p((qz - qzeta) / (qzeta - self.anchor))

    def base_log_derivative(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=complex)
        q = self.polynomial(zeta)
        return self.kappa * q ** (self.kappa - 1) * self.polynomial.derivative(zeta) / (q ** self.kappa - self.anchor)

    def base_coefficients(self) -> np.ndarray:
        g = npoly.polypow(self.polynomial.monomial_coefficients(), self.kappa)
        g = np.asarray(g, dtype=complex)
        g[0] -= self.anchor
        return g


@dataclass(frozen=True, eq=False)
class PolynomialKernel:
    """
    A polynomial in z of degree at most ``degree_bound`` attached to the pole ζ.

    FABER kernels hold coefficients a_k against a Faber basis; MONOMIAL kernels
    hold ascending monomial coefficients; FACTORED kernels combine a damping
    factor with an inner Faber kernel and are evaluated from the factors.
    """
    zeta: complex
    degree_bound: int
    degree: int
    form: KernelForm
    coefficients: Optional[np.ndarray] = None
    basis: Optional[FaberBasis] = None
    damping: Optional[DampingFactor] = None
    inner: Optional["PolynomialKernel"] = None

    def __post_init__(self):
        if self.degree > self.degree_bound:
            raise DegreeBudgetError(f"Kernel degree {self.degree} exceeds its bound {self.degree_bound}")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        flat = z.ravel()
        if self.form is KernelForm.FABER:
            values = self.basis.evaluate(flat, self.degree) @ self.coefficients
        elif self.form is KernelForm.MONOMIAL:
            values = npoly.polyval(flat, self.coefficients)
        else:
            values = self.damping.first_term(flat, self.zeta) \
                + self.damping.ratio(flat, self.zeta) * self.inner(flat)
        return values.reshape(shape)

    def to_monomial(self) -> np.ndarray:
        """Ascending monomial coefficients, padded to degree_bound + 1."""
        if self.degree_bound > MONOMIAL_DEGREE_LIMIT:
            raise ParameterRangeError(
                f"Monomial form is kept up to degree {MONOMIAL_DEGREE_LIMIT}, kernel bound is {self.degree_bound}")
        if self.form is KernelForm.MONOMIAL:
            coeffs = np.asarray(self.coefficients, dtype=complex)
        elif self.form is KernelForm.FABER:
            coeffs = np.zeros(self.degree + 1, dtype=complex)
            for k, a in enumerate(self.coefficients):
                fk = self.basis.monomial(k)
                coeffs[:len(fk)] += a * fk
        else:
            first = poly_divide_vanishing(npoly.polypow(self.damping.base_coefficients(), self.damping.exponent),
                                          self.zeta)
            second = npoly.polymul(self.damping.ratio_coefficients(self.zeta), self.inner.to_monomial())
            coeffs = npoly.polyadd(first, second)
        out = np.zeros(self.degree_bound + 1, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)[:self.degree_bound + 1]
        out[:len(coeffs)] = coeffs
        return out


def dzyadyk_kernel(emap: ExteriorMap, basis: FaberBasis, zeta: complex, n: int, w=None) -> PolynomialKernel:
    """
    Truncated Faber expansion of 1/(ζ - z) at degree n.

    Raises:
        KernelDomainError: If ζ lies on the arc up to the map accuracy
    """
    if n > basis.degree:
        raise ParameterRangeError(f"Faber basis holds degree {basis.degree}, kernel needs {n}")
    coeffs = dzyadyk_coefficients(emap, [zeta], n, None if w is None else [w])[:, 0]
    return PolynomialKernel(complex(zeta), n, n, KernelForm.FABER, coefficients=coeffs, basis=basis)


def poly_divide_vanishing(g, zeta: complex) -> np.ndarray:
    """
    q with q(z) = (1 - g(z)/g(ζ))/(ζ - z) for ascending monomial coefficients g.

    Raises:
        KernelDomainError: If g(ζ) = 0
    """
    g = np.atleast_1d(np.asarray(g, dtype=complex))
    g_zeta = complex(npoly.polyval(zeta, g))
    if g_zeta == 0:
        raise KernelDomainError(f"Division anchor g(ζ) vanishes at ζ = {zeta}")
    h = -g / g_zeta
    h[0] += 1.0
    if len(h) == 1:
        return np.zeros(1, dtype=complex)
    quotient, remainder = npoly.polydiv(h, np.array([-zeta, 1.0], dtype=complex))
    scale = max(float(np.max(np.abs(h))), 1.0)
    if np.max(np.abs(remainder)) > 1e-8 * scale * max(1.0, abs(zeta)) ** (len(h) - 1):
        logger.warning(f"Synthetic division left remainder {np.max(np.abs(remainder)):.3e}")
    q = -np.asarray(quotient, dtype=complex)
    out = np.zeros(len(g) - 1, dtype=complex)
    out[:len(q)] = q[:len(g) - 1]
    return out


def lemniscate_exponent(order: int, n: int) -> int:
    """m = ⌊n/(2N)⌋."""
    return n // (2 * order)


def lemniscate_damping(lem: Lemniscate, n: int) -> LemniscateDamping:
    """
    Raises:
        DegreeBudgetError: If m = ⌊n/(2N)⌋ is zero
    """
    m = lemniscate_exponent(lem.order, n)
    if m < 1:
        raise DegreeBudgetError(f"Degree {n} is too small for a lemniscate of order {lem.order}: "
                                f"m = ⌊{n}/{2 * lem.order}⌋ = 0")
    return LemniscateDamping(m, lem)


def wedge_exponent(n: int, beta: float, kappa: int) -> int:
    """m = ⌊n^{1-β}/(2κ)⌋."""
    return int(np.floor(n ** (1.0 - beta) / (2.0 * kappa) + 1e-12))


def wedge_damping(polynomial: ArnoldiPolynomial, kappa: int, anchor: float, n: int, beta: float) -> WedgeDamping:
    """
    Raises:
        DegreeBudgetError: If m = 0 or κ·deg Q·m + ⌊n/2⌋ > n
    """
    if kappa < 2:
        raise ParameterRangeError(f"κ must be at least 2, got {kappa}")
    m = wedge_exponent(n, beta, kappa)
    if m < 1:
        raise DegreeBudgetError(f"Degree {n} gives wedge exponent m = ⌊{n}^{1 - beta:.3f}/{2 * kappa}⌋ = 0")
    damping = WedgeDamping(m, polynomial, kappa, anchor)
    total = damping.degree + n // 2
    if total > n:
        raise DegreeBudgetError(f"Wedge kernel degree {kappa}·{polynomial.degree}·{m} + {n // 2} = {total} exceeds {n}")
    return damping


def damped_kernel(damping: DampingFactor, inner: PolynomialKernel, n: int) -> PolynomialKernel:
    """
    (1 - (g(z)/g(ζ))^m)/(ζ - z) + (g(z)/g(ζ))^m K(z) with degree max(deg g^m - 1, deg g^m + deg K).

    Raises:
        DegreeBudgetError: If the degree exceeds n
    """
    damping.check_pole(inner.zeta)
    degree = max(damping.degree - 1, damping.degree + inner.degree)
    if degree > n:
        raise DegreeBudgetError(f"Damped kernel degree {damping.degree} + {inner.degree} = {degree} exceeds {n}")
    return PolynomialKernel(inner.zeta, n, degree, KernelForm.FACTORED, damping=damping, inner=inner)


def lemniscate_kernel(lem: Lemniscate, kernel: PolynomialKernel, zeta: complex, n: int) -> PolynomialKernel:
    """
    Lemniscate-damped kernel of degree at most n.

    Args:
        lem: Admissible lemniscate
        kernel: Faber kernel of degree ⌊n/2⌋ at ζ
        zeta: The pole, outside the lemniscate
        n: Degree bound

    Raises:
        DegreeBudgetError: If m = 0
        KernelDomainError: If |P(ζ)| <= R^N
    """
    damping = lemniscate_damping(lem, n)
    modulus = abs(complex(lem.normalized(zeta)))
    if modulus <= 1.0:
        raise KernelDomainError(f"Pole {zeta} lies inside the lemniscate (|P|/R^N = {modulus:.6g})")
    return damped_kernel(damping, _with_zeta(kernel, zeta), n)


def wedge_kernel(polynomial: ArnoldiPolynomial, kappa: int, anchor: float, kernel: PolynomialKernel,
                 zeta: complex, n: int, beta: float) -> PolynomialKernel:
    """
    Wedge-damped kernel with g = Q^κ - ζ₀ and m = ⌊n^{1-β}/(2κ)⌋.

    Raises:
        DegreeBudgetError: If m = 0 or the degree arithmetic overflows n
        KernelDomainError: If Q^κ(ζ) = ζ₀
    """
    damping = wedge_damping(polynomial, kappa, anchor, n, beta)
    return damped_kernel(damping, _with_zeta(kernel, zeta), n)


def _with_zeta(kernel: PolynomialKernel, zeta: complex) -> PolynomialKernel:
    if abs(kernel.zeta - complex(zeta)) > 1e-14 * max(1.0, abs(zeta)):
        raise ParameterRangeError(f"Inner kernel was built for ζ = {kernel.zeta}, not {zeta}")
    return kernel


# ---------------------------------------------------------------------------
# Error profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    expected: float


def _line_fit(x, y, expected: float) -> DecayFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(residual ** 2) / total if total > 0 else 1.0
    return DecayFit(float(slope), float(intercept), float(r2), float(expected))


def kernel_error_profile(kernel: Callable, zeta: complex, points) -> Tuple[float, np.ndarray]:
    """(sup, pointwise) of |1/(ζ - z) - K(z)| over the sample points."""
    points = np.asarray(points, dtype=complex)
    curve = np.abs(1.0 / (zeta - points) - np.asarray(kernel(points)))
    return float(np.max(curve)), curve


def kernel_decay_rate(emap: ExteriorMap, basis: FaberBasis, zeta: complex, degrees: Sequence[int],
                      points) -> DecayFit:
    """
    Slope of log sup-error against n for Faber kernels at ζ, with the
    expected slope -log|Φ(ζ)|.
    """
    degrees = sorted(int(d) for d in degrees)
    points = np.asarray(points, dtype=complex)
    top = degrees[-1]
    Fz = basis.evaluate(points, top)
    a = dzyadyk_coefficients(emap, [zeta], top)[:, 0]
    exact = 1.0 / (zeta - points)
    errors = [float(np.max(np.abs(exact - Fz[:, :d + 1] @ a[:d + 1]))) for d in degrees]
    expected = -float(np.log(np.abs(emap.phi(zeta))))
    return _line_fit(degrees, np.log(np.maximum(errors, 1e-300)), expected)


def kernel_distance_law(emap: ExteriorMap, basis: FaberBasis, ray: GammaRay, n: int, points,
                        exponent: Optional[float] = None) -> DecayFit:
    """
    Slope of log sup-error of the degree-n Faber kernel against log|ζ - z0|
    along a Γ-ray; ``exponent`` is recorded as the expected slope.
    """
    points = np.asarray(points, dtype=complex)
    Fz = basis.evaluate(points, n)
    w = ray.radii * np.exp(1j * ray.theta)
    A = dzyadyk_coefficients(emap, ray.points, n, w)
    errors = np.max(np.abs(1.0 / (ray.points[None, :] - points[:, None]) - Fz @ A), axis=0)
    distance = np.abs(ray.points - ray.z0)
    keep = errors > 1e-15
    if np.count_nonzero(keep) < 3:
        raise ParameterRangeError("Too few ray samples above the rounding floor for a distance fit")
    return _line_fit(np.log(distance[keep]), np.log(errors[keep]),
                     float("nan") if exponent is None else exponent)
