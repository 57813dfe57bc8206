"""
Discrete AGP by piecewise Lagrange quadrature of the regularised τ-integral.

The half-line [0, a] is split into M subintervals whose widths grow
exponentially with τ, each carrying q+1 Chebyshev-Gauss nodes and the
exact integrals of their Lagrange basis polynomials as weights. The
negative-τ half is the mirror image with flipped sign.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import simpson

from cdkit.agp import AGPParams, GaugePotentialEval, coupling_data, regularised_factor
from cdkit.errors import DomainError, PreconditionWarning
from cdkit.operators import SpectralPath

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteAGPTerm:
    """One (κ, α) term: node τ and scalar b = ½ δτ_κ w_{κ,α} e^{-η|τ|} sgn τ."""

    kappa: int
    alpha: int
    tau: float
    b: float


@dataclass(frozen=True, eq=False)
class QuadratureScheme:
    """Partition, nodes and weights for the positive half [0, a]."""

    eta: float
    a: float
    M: int
    q: int
    partition: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.partition)

    @property
    def n_terms(self) -> int:
        """Terms on both halves, 2M(q+1)."""
        return 2 * self.M * (self.q + 1)

    def positive_coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flattened (τ, b) for τ > 0, in increasing τ."""
        taus = self.nodes.reshape(-1)
        bs = 0.5 * (self.deltas[:, None] * self.weights * np.exp(-self.eta * self.nodes)).reshape(-1)
        return taus, bs

    def coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        """(τ, b) over both halves in increasing τ."""
        taus, bs = self.positive_coefficients()
        return np.concatenate([-taus[::-1], taus]), np.concatenate([-bs[::-1], bs])

    def terms(self) -> List[DiscreteAGPTerm]:
        out = []
        for kappa in range(self.M, 0, -1):
            for alpha in range(self.q, -1, -1):
                tau, b = self._term(kappa, alpha)
                out.append(DiscreteAGPTerm(-kappa, alpha, -tau, -b))
        for kappa in range(1, self.M + 1):
            for alpha in range(self.q + 1):
                tau, b = self._term(kappa, alpha)
                out.append(DiscreteAGPTerm(kappa, alpha, tau, b))
        return out

    def _term(self, kappa: int, alpha: int) -> Tuple[float, float]:
        tau = float(self.nodes[kappa - 1, alpha])
        b = 0.5 * self.deltas[kappa - 1] * self.weights[kappa - 1, alpha] * math.exp(-self.eta * tau)
        return tau, float(b)

    def matches(self, params: AGPParams) -> bool:
        return math.isclose(self.eta, params.eta, rel_tol=1e-12) and math.isclose(self.a, params.a, rel_tol=1e-12)


# =============================================================================
# PARTITION, NODES, WEIGHTS
# =============================================================================

def _check_scheme_args(eta: float, a: float, M: int, q: int):
    if eta <= 0 or a <= 0:
        raise DomainError(f"η and a must be positive, got η={eta}, a={a}")
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")
    if int(q) != q or q < 0:
        raise DomainError(f"q must be a non-negative integer, got {q}")


def make_partition(eta: float, a: float, M: int, q: int) -> np.ndarray:
    """τ_κ = -((q+2)/η) log(1 - (κ/M)(1 - e^{-ηa/(q+2)})), κ = 0..M."""
    _check_scheme_args(eta, a, M, q)
    kappa = np.arange(M + 1)
    span = -np.expm1(-eta * a / (q + 2))
    tau = -((q + 2) / eta) * np.log1p(-(kappa / M) * span)
    tau[0] = 0.0
    tau[-1] = a
    return tau


def chebyshev_nodes(lo: float, hi: float, q: int) -> np.ndarray:
    """q+1 Chebyshev-Gauss points of [lo, hi], ascending."""
    alpha = np.arange(q + 1)
    x = np.sort(np.cos((2 * alpha + 1) * np.pi / (2 * (q + 1))))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x


def lagrange_weights(nodes, interval: Tuple[float, float]) -> np.ndarray:
    """
    Normalised integrals (1/δτ)∫ L_α over the interval of each Lagrange basis
    polynomial; they sum to one.

    Raises
    ------
    DomainError
        Nodes coincident, unsorted, or outside the interval.
    """
    nodes = np.asarray(nodes, dtype=float).reshape(-1)
    lo, hi = interval
    if not hi > lo:
        raise DomainError(f"Empty interval [{lo}, {hi}]")
    if np.any(np.diff(nodes) <= 0):
        raise DomainError("Interpolation nodes must be strictly increasing (no coincident nodes)")
    if nodes[0] < lo or nodes[-1] > hi:
        raise DomainError(f"Nodes {nodes} not inside [{lo}, {hi}]")

    # Work on [-1, 1]; then (1/δτ)∫dx = ½∫dt
    t = (2.0 * nodes - (lo + hi)) / (hi - lo)
    weights = np.empty(len(t))
    for alpha, t_alpha in enumerate(t):
        others = np.delete(t, alpha)
        basis = Polynomial.fromroots(others) / np.prod(t_alpha - others) if len(others) else Polynomial([1.0])
        antiderivative = basis.integ()
        weights[alpha] = 0.5 * (antiderivative(1.0) - antiderivative(-1.0))
    return weights


def build_scheme(eta: float, a: float, M: int, q: int) -> QuadratureScheme:
    partition = make_partition(eta, a, M, q)
    lo, hi = partition[:-1, None], partition[1:, None]
    unit = chebyshev_nodes(-1.0, 1.0, q)
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * unit
    # normalised weights are invariant under the affine map onto each subinterval
    weights = np.tile(lagrange_weights(unit, (-1.0, 1.0)), (M, 1))
    return QuadratureScheme(eta=eta, a=a, M=int(M), q=int(q), partition=partition, nodes=nodes, weights=weights)


# =============================================================================
# DISCRETE AGP
# =============================================================================

def discrete_factor(omega: np.ndarray, scheme: QuadratureScheme) -> np.ndarray:
    """Σ_τ b e^{-iωτ} over both halves, i.e. -2i Σ_{τ>0} b sin(ωτ)."""
    taus, bs = scheme.positive_coefficients()
    flat = omega.reshape(-1)
    total = np.empty(flat.shape)
    # chunk over ω pairs to bound the temporary (pairs x terms) array
    chunk = max(1, 2 ** 22 // max(len(taus), 1))
    for start in range(0, len(flat), chunk):
        block = flat[start:start + chunk]
        total[start:start + chunk] = np.sin(np.outer(block, taus)) @ bs
    return (-2j * total).reshape(omega.shape)


def assemble_discrete_agp(
    path: SpectralPath, lam: float, params: AGPParams, scheme: QuadratureScheme
) -> GaugePotentialEval:
    """A^{M,q}(λ) = Σ b e^{-iHτ} ∂_λH e^{iHτ}, conjugations done in the eigenbasis."""
    if not scheme.matches(params):
        raise DomainError(
            f"Scheme built for (η={scheme.eta}, a={scheme.a}), params are (η={params.eta}, a={params.a})"
        )
    vectors, omega, coupling = coupling_data(path, lam)
    eig = coupling * discrete_factor(omega, scheme)
    np.fill_diagonal(eig, 0.0)
    out = vectors @ eig @ vectors.conj().T
    return GaugePotentialEval(lam, 0.5 * (out + out.conj().T), eig, "discrete")


def select_M(q: int, a: float, epsilon: float, H_norm_inf_inf: float, dH_norm_n1: float, eta: float) -> int:
    """
    M = ceil(max{3e(2a)^{1+1/(q+1)} ‖H‖ ‖∂H‖^{1/(q+1)} / (ε^{1/(q+1)}(q+1)),
                 e^{ηa/(q+2)} - 1})
    """
    if int(q) != q or q < 0:
        raise DomainError(f"q must be a non-negative integer, got {q}")
    for label, value in (('a', a), ('epsilon', epsilon), ('H_norm_inf_inf', H_norm_inf_inf),
                         ('dH_norm_n1', dH_norm_n1), ('eta', eta)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{label} must be positive and finite, got {value}")
    if epsilon > 1:
        raise DomainError(f"epsilon must be at most 1, got {epsilon}")
    if eta > H_norm_inf_inf:
        # only the max norm is known here; the min-norm check lives in the pipeline
        logger.debug(f"η={eta:.6g} exceeds max‖H‖={H_norm_inf_inf:.6g}")

    inv = 1.0 / (q + 1)
    interpolation = (3.0 * math.e * (2.0 * a) ** (1.0 + inv) / (epsilon ** inv * (q + 1))
                     * H_norm_inf_inf * dH_norm_n1 ** inv)
    partition = math.expm1(eta * a / (q + 2))
    return int(math.ceil(max(interpolation, partition)))


def check_eta_precondition(eta: float, min_H_norm: float) -> bool:
    """Warn when η exceeds min_λ ‖H(λ)‖; returns whether the precondition holds."""
    if eta <= min_H_norm:
        return True
    message = f"η={eta:.6g} exceeds min‖H(λ)‖={min_H_norm:.6g}; quadrature bound not guaranteed"
    logger.warning(message)
    warnings.warn(message, PreconditionWarning, stacklevel=2)
    return False


# =============================================================================
# SCALAR CHECKS
# =============================================================================

def discrete_weight_sum(scheme: QuadratureScheme) -> Tuple[float, float]:
    """(Σ δτ w e^{-ητ}, (1 - e^{-ηa})/η) over the positive half."""
    approx = float(np.sum(scheme.deltas[:, None] * scheme.weights * np.exp(-scheme.eta * scheme.nodes)))
    exact = -math.expm1(-scheme.eta * scheme.a) / scheme.eta
    return approx, exact


def weight_sum_remainder_bound(eta: float, a: float, M: int, q: int) -> float:
    """η^{q+1}(2a)^{q+2} / (M^{q+1}(q+1)!)."""
    return eta ** (q + 1) * (2.0 * a) ** (q + 2) / (M ** (q + 1) * math.factorial(q + 1))


def lagrange_error_bound(interval: Tuple[float, float], q: int, derivative_max: float) -> float:
    """(b-a)^{q+2} max|f^{(q+1)}| / (q+1)! for one subinterval."""
    lo, hi = interval
    return (hi - lo) ** (q + 2) * derivative_max / math.factorial(q + 1)


def summation_error(path: SpectralPath, params: AGPParams, scheme: QuadratureScheme, n: int) -> float:
    """∫dλ ‖(A_{η,a}(λ) - A^{M,q}(λ))|n(λ)>‖ on the path grid."""
    values = np.empty(path.n_points)
    for j, lam in enumerate(path.grid):
        _, omega, coupling = coupling_data(path, float(lam))
        diff = coupling * (regularised_factor(omega, params.eta, params.a) - discrete_factor(omega, scheme))
        np.fill_diagonal(diff, 0.0)
        values[j] = np.linalg.norm(diff[:, n])
    return float(simpson(values, x=path.grid))
