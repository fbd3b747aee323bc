"""
Discrete best uniform approximation on an arc.

Polynomials live in a discretely orthonormal basis built by Arnoldi iteration
on the node set (Vandermonde with Arnoldi); the minimax problem is solved by
Lawson's iteratively reweighted least squares, which brackets E_n between a
weighted least-squares lower bound and the observed maximum residual.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence

import numpy as np

from nearbest.constants import (
    CLUSTER_LEVELS,
    CLUSTER_RATIO,
    LAWSON_BRACKET,
    LAWSON_MAX_ITER,
    LAWSON_TOLERANCE,
)
from nearbest.exceptions import ConvergenceError, ParameterRangeError
from nearbest.geometry import Arc
from nearbest.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class DiscretizedArc:
    """Sorted node parameters and points, with the number of cluster nodes added."""
    arc: Arc
    params: np.ndarray
    points: np.ndarray
    base_count: int
    cluster_count: int

    def __len__(self) -> int:
        return len(self.params)

    def mask_between(self, t_lo: float, t_hi: float, drop_endpoints: bool = True) -> np.ndarray:
        """Nodes with parameter in [t_lo, t_hi]; arc endpoints dropped if asked."""
        mask = (self.params >= t_lo - 1e-14) & (self.params <= t_hi + 1e-14)
        if drop_endpoints:
            mask &= (self.params > 1e-14) & (self.params < self.arc.t_max - 1e-14)
        return mask


def discretize(arc: Arc, count: int, cluster_params: Iterable[float] = ()) -> DiscretizedArc:
    """
    ``count`` nodes uniform in arclength plus geometric clusters.

    Around every cluster parameter (singular points and, usually, the arc
    endpoints) nodes are added at arclength offsets h·0.7^j, j = 12..23, with h
    half the arc length, on each side that stays on the arc.

    Args:
        arc: The arc
        count: Base node count, at least 2
        cluster_params: Parameters to cluster toward

    Returns:
        The discretization, nodes sorted along the arc
    """
    if count < 2:
        raise ParameterRangeError(f"Need at least two base nodes, got {count}")
    total = arc.total_length
    base = np.linspace(0.0, total, count)
    centers = np.unique(arc.length_at(np.asarray(list(cluster_params), dtype=float)))
    offsets = 0.5 * total * CLUSTER_RATIO ** np.asarray(CLUSTER_LEVELS, dtype=float)
    extra = [centers]
    for c in centers:
        extra.append(c - offsets)
        extra.append(c + offsets)
    extra = np.concatenate(extra)
    extra = extra[(extra >= 0.0) & (extra <= total)]
    lengths = np.unique(np.concatenate([base, extra]))
    keep = np.concatenate([[True], np.diff(lengths) > 1e-15 * total])
    lengths = lengths[keep]
    params = arc.param_at_length(lengths)
    return DiscretizedArc(arc, params, arc.evaluate(params), count, len(lengths) - count)


@dataclass(frozen=True, eq=False)
class ArnoldiBasis:
    """
    q_0..q_n orthonormal on the nodes: values[:, k] = q_k(nodes), q_0 = 1/√M and
    z q_k = Σ_{j<=k+1} H[j, k] q_j.
    """
    nodes: np.ndarray
    hessenberg: np.ndarray
    values: np.ndarray

    @property
    def degree(self) -> int:
        return self.values.shape[1] - 1

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def gram_condition(self) -> float:
        """2-norm condition number of the discrete Gram matrix Q^H Q."""
        return float(np.linalg.cond(self.values.conj().T @ self.values))

    def evaluate(self, z, degree: Optional[int] = None) -> np.ndarray:
        """Basis values at arbitrary points, shape (len(z), degree + 1)."""
        degree = self.degree if degree is None else degree
        self._check_degree(degree)
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        H = self.hessenberg
        W = np.empty((len(z), degree + 1), dtype=complex)
        W[:, 0] = 1.0 / np.sqrt(self.node_count)
        for k in range(degree):
            v = z * W[:, k] - W[:, :k + 1] @ H[:k + 1, k]
            W[:, k + 1] = v / H[k + 1, k]
        return W

    def derivative(self, z, degree: Optional[int] = None) -> np.ndarray:
        """Values of q_k' at the points."""
        degree = self.degree if degree is None else degree
        W = self.evaluate(z, degree)
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        H = self.hessenberg
        D = np.zeros_like(W)
        for k in range(degree):
            v = W[:, k] + z * D[:, k] - D[:, :k + 1] @ H[:k + 1, k]
            D[:, k + 1] = v / H[k + 1, k]
        return D

    def to_monomial(self, degree: Optional[int] = None) -> np.ndarray:
        """C with q_k(z) = Σ_i C[i, k] z^i (ill-conditioned at high degree; for export)."""
        degree = self.degree if degree is None else degree
        self._check_degree(degree)
        H = self.hessenberg
        C = np.zeros((degree + 1, degree + 1), dtype=complex)
        C[0, 0] = 1.0 / np.sqrt(self.node_count)
        for k in range(degree):
            shifted = np.zeros(degree + 1, dtype=complex)
            shifted[1:] = C[:-1, k]
            C[:, k + 1] = (shifted - C[:, :k + 1] @ H[:k + 1, k]) / H[k + 1, k]
        return C

    def project(self, values, degree: Optional[int] = None) -> np.ndarray:
        """Least-squares coefficients of node values in the first degree+1 basis vectors."""
        degree = self.degree if degree is None else degree
        self._check_degree(degree)
        return self.values[:, :degree + 1].conj().T @ np.asarray(values, dtype=complex)

    def _check_degree(self, degree: int) -> None:
        if not 0 <= degree <= self.degree:
            raise ParameterRangeError(f"Basis holds degree {self.degree}, asked for {degree}")


def orthonormal_basis(nodes, degree: int) -> ArnoldiBasis:
    """
    Arnoldi basis of degree ``degree`` on the node set.

    Raises:
        ParameterRangeError: If there are fewer distinct nodes than degree + 1
    """
    z = np.asarray(nodes, dtype=complex).ravel()
    if degree < 0:
        raise ParameterRangeError(f"Degree must be non-negative, got {degree}")
    distinct = len(np.unique(np.round(z, 14)))
    if distinct < degree + 1:
        raise ParameterRangeError(f"{distinct} distinct nodes cannot carry degree {degree}")
    M = len(z)
    Q = np.zeros((M, degree + 1), dtype=complex)
    H = np.zeros((degree + 1, degree), dtype=complex)
    Q[:, 0] = 1.0 / np.sqrt(M)
    scale = max(float(np.max(np.abs(z))), 1e-300)
    for k in range(degree):
        v = z * Q[:, k]
        # two Gram-Schmidt passes keep the columns orthonormal to working precision
        for _ in range(2):
            h = Q[:, :k + 1].conj().T @ v
            v = v - Q[:, :k + 1] @ h
            H[:k + 1, k] += h
        norm = np.linalg.norm(v)
        if norm <= 1e-13 * scale:
            raise ParameterRangeError(f"Node set is numerically rank deficient at degree {k + 1}")
        H[k + 1, k] = norm
        Q[:, k + 1] = v / norm
    return ArnoldiBasis(z, H, Q)


@dataclass(frozen=True, eq=False)
class ArnoldiPolynomial:
    """A polynomial stored by its coefficients in an ArnoldiBasis."""
    basis: ArnoldiBasis
    coefficients: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, z) -> np.ndarray:
        shape = np.shape(z)
        return (self.basis.evaluate(z, self.degree) @ self.coefficients).reshape(shape)

    def derivative(self, z) -> np.ndarray:
        shape = np.shape(z)
        return (self.basis.derivative(z, self.degree) @ self.coefficients).reshape(shape)

    def monomial_coefficients(self) -> np.ndarray:
        return self.basis.to_monomial(self.degree) @ self.coefficients

    def padded(self, degree: int) -> "ArnoldiPolynomial":
        if degree < self.degree:
            raise ParameterRangeError(f"Cannot pad degree {self.degree} down to {degree}")
        c = np.zeros(degree + 1, dtype=complex)
        c[:len(self.coefficients)] = self.coefficients
        return ArnoldiPolynomial(self.basis, c)


@dataclass(frozen=True, eq=False)
class MinimaxResult:
    degree: int
    coefficients: np.ndarray
    error: float            # observed max |residual| of the best iterate (upper bound)
    lower_bound: float      # weighted least-squares residual (lower bound)
    iterations: int
    converged: bool
    residual: np.ndarray

    @property
    def bracket_width(self) -> float:
        if self.error == 0.0:
            return 0.0
        return (self.error - self.lower_bound) / self.error

    @property
    def within_bracket(self) -> bool:
        return self.bracket_width < LAWSON_BRACKET

    def polynomial(self, basis: ArnoldiBasis) -> ArnoldiPolynomial:
        return ArnoldiPolynomial(basis, self.coefficients)


def lawson_minimax(values, basis: ArnoldiBasis, degree: Optional[int] = None,
                   tol: float = LAWSON_TOLERANCE, max_iter: int = LAWSON_MAX_ITER) -> MinimaxResult:
    """
    Discrete minimax approximation of node values by Lawson iteration.

    Each step solves a weighted least-squares problem (minimum-norm solution),
    then multiplies the weights by |residual|^γ. The exponent γ starts at 1 and
    grows toward 2 while progress stalls; it drops back to 1 whenever the
    maximum residual increases.

    Args:
        values: Function values at the basis nodes
        basis: Arnoldi basis on the nodes
        degree: Polynomial degree (defaults to the basis degree)
        tol: Stop when the relative change of max|r|, or the bracket width, drops below tol
        max_iter: Iteration cap

    Returns:
        MinimaxResult; converged is False when max_iter was hit

    Raises:
        ConvergenceError: If no finite iterate was produced
    """
    degree = basis.degree if degree is None else degree
    F = np.asarray(values, dtype=complex)
    if F.shape != (basis.node_count,):
        raise ParameterRangeError(f"Expected {basis.node_count} node values, got shape {F.shape}")
    A = basis.values[:, :degree + 1]
    M = len(F)
    w = np.full(M, 1.0 / M)
    scale = max(float(np.max(np.abs(F))), 1e-300)
    best_err = np.inf
    best_c: Optional[np.ndarray] = None
    best_r: Optional[np.ndarray] = None
    lower = 0.0
    previous: Optional[float] = None
    gamma = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        sw = np.sqrt(w)
        c = np.linalg.lstsq(A * sw[:, None], F * sw, rcond=None)[0]
        r = F - A @ c
        ar = np.abs(r)
        err = float(np.max(ar))
        if not np.isfinite(err):
            break
        lower = max(lower, float(np.sqrt(np.sum(w * ar ** 2))))
        if err < best_err:
            best_err, best_c, best_r = err, c, r
        if best_err <= 1e-14 * scale:
            lower = best_err
            converged = True
            break
        if (best_err - lower) <= tol * best_err:
            converged = True
            break
        if previous is not None:
            change = abs(previous - err) / err
            if change < tol:
                converged = True
                break
            if err > previous:
                gamma = 1.0
            elif change < 1e-3:
                gamma = min(2.0, gamma + 0.1)
        previous = err
        w = w * ar ** gamma
        total = w.sum()
        if not total > 0:
            break
        w = w / total
    if best_c is None:
        raise ConvergenceError(f"Lawson iteration produced no finite iterate at degree {degree}")
    lower = min(lower, best_err)
    if not converged:
        logger.warning(f"Lawson stopped at max_iter={max_iter} for degree {degree}; "
                       f"bracket width {(best_err - lower) / best_err:.3%}")
    return MinimaxResult(degree, best_c, best_err, lower, iterations, converged, best_r)


def en_table(values, basis: ArnoldiBasis, degrees: Sequence[int], tol: float = LAWSON_TOLERANCE,
             max_iter: int = LAWSON_MAX_ITER) -> List[MinimaxResult]:
    """
    E_n for each degree, sorted by degree.

    Upper bounds carry forward (p*_{n-1} is admissible at degree n) and lower
    bounds carry backward (E_n >= E_{n+1}), so the table is monotone.
    """
    results: List[MinimaxResult] = []
    for n in sorted(set(int(d) for d in degrees)):
        res = lawson_minimax(values, basis, n, tol, max_iter)
        if results and results[-1].error < res.error:
            prev = results[-1]
            carried = np.zeros(n + 1, dtype=complex)
            carried[:len(prev.coefficients)] = prev.coefficients
            res = replace(res, coefficients=carried, error=prev.error, residual=prev.residual)
        results.append(res)
    for i in range(len(results) - 2, -1, -1):
        if results[i + 1].lower_bound > results[i].lower_bound:
            results[i] = replace(results[i], lower_bound=results[i + 1].lower_bound)
    return results


def equioscillation_count(result: MinimaxResult, fraction: float = 0.9) -> int:
    """
    Number of alternating sign groups among nodes where the real residual
    reaches ``fraction`` of its maximum (nodes taken in arc order).
    """
    r = np.real(result.residual)
    peak = np.max(np.abs(r))
    if peak == 0:
        return 0
    signs = np.sign(r[np.abs(r) >= fraction * peak])
    if len(signs) == 0:
        return 0
    return int(1 + np.count_nonzero(signs[1:] != signs[:-1]))


def sup_error(values, approximation, mask: Optional[np.ndarray] = None) -> float:
    """max |values - approximation| over the (masked) nodes."""
    diff = np.abs(np.asarray(values) - np.asarray(approximation))
    if mask is not None:
        diff = diff[mask]
    if diff.size == 0:
        raise ParameterRangeError("Empty node set for a sup norm")
    return float(np.max(diff))
