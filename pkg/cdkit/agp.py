"""
Adiabatic gauge potentials.

Exact AGP from the Hellmann-Feynman matrix elements, the regularised
truncated AGP A_{η,a} through its closed-form eigenbasis kernel, cutoff
parameter selection, and the two reference propagators every bound check
compares against: the tracked eigenbasis transport and a step-halving
ordered exponential.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from cdkit.errors import ConvergenceError, DomainError, GaplessError
from cdkit.operators import SpectralPath, expm_hermitian, spectral_norm
from utils.constants import (
    COUPLING_TOL,
    DEGENERACY_TOL,
    ORDERED_EXP_INITIAL_STEPS,
    ORDERED_EXP_MAX_STEPS,
    ORDERED_EXP_TOL,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AGPParams:
    """Energy cutoff η, time truncation a, and the ε they were selected for."""

    eta: float
    a: float
    epsilon: Optional[float] = None

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise DomainError(f"η must be positive and finite, got {self.eta}")
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"a must be positive and finite, got {self.a}")

    @property
    def damping(self) -> float:
        """1 - e^{-ηa}."""
        return -math.expm1(-self.eta * self.a)

    def as_dict(self) -> dict:
        return {"eta": self.eta, "a": self.a, "epsilon": self.epsilon}


@dataclass(frozen=True, eq=False)
class GaugePotentialEval:
    """A gauge potential at one λ, in both bases."""

    lam: float
    matrix: np.ndarray
    eigenbasis: np.ndarray
    variant: str


# =============================================================================
# EIGENBASIS HELPERS
# =============================================================================

def coupling_data(path: SpectralPath, lam: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (vectors, ω_mn, G_mn = <m|∂_λH|n>) at λ.

    Gauge potentials are invariant under phase (or in-cluster unitary)
    changes of the eigenvectors, so off-grid points use a fresh eigh.
    """
    h = path.hamiltonian
    j = path.grid_index(lam)
    if j is not None:
        energies, vectors = path.energies[j], path.vectors[j]
    else:
        h.check_domain(lam)
        energies, vectors = np.linalg.eigh(h.to_dense(lam))
    coupling = vectors.conj().T @ h.derivative(lam, 1) @ vectors
    omega = energies[:, None] - energies[None, :]
    return vectors, omega, coupling


def _degenerate_mask(omega: np.ndarray, coupling: np.ndarray, lam: float) -> np.ndarray:
    """Off-diagonal pairs with ω_mn ≈ 0; raises if such a pair is coupled."""
    scale = max(1.0, float(np.max(np.abs(omega))))
    mask = np.abs(omega) < DEGENERACY_TOL * scale
    np.fill_diagonal(mask, False)
    if np.any(np.abs(coupling[mask]) > COUPLING_TOL):
        raise GaplessError(f"Degenerate levels with nonzero ∂_λH coupling at λ={lam:.12g}")
    return mask


def _to_computational(vectors: np.ndarray, eig_matrix: np.ndarray) -> np.ndarray:
    out = vectors @ eig_matrix @ vectors.conj().T
    return 0.5 * (out + out.conj().T)


# =============================================================================
# GAUGE POTENTIALS
# =============================================================================

def exact_agp(path: SpectralPath, lam: float) -> GaugePotentialEval:
    """A_mn = <m|∂_λH|n> / (i ω_mn) off the diagonal, zero on it."""
    vectors, omega, coupling = coupling_data(path, lam)
    skip = _degenerate_mask(omega, coupling, lam)
    np.fill_diagonal(skip, True)
    safe_omega = np.where(skip, 1.0, omega)
    eig = np.where(skip, 0.0, coupling / (1j * safe_omega))
    return GaugePotentialEval(lam, _to_computational(vectors, eig), eig, "exact")


def kernel_c(omega, eta: float, a: float):
    """
    c_{η,a}(ω) = 1/ω - ω/(ω²+η²) + e^{-ηa}(ω cos aω + η sin aω)/(ω²+η²).

    Satisfies (A - A_{η,a})_mn = -i c_{η,a}(ω_mn) <m|∂_λH|n>.
    """
    omega = np.asarray(omega, dtype=float)
    if eta <= 0 or a <= 0:
        raise DomainError(f"η and a must be positive, got η={eta}, a={a}")
    if np.any(omega == 0):
        raise DomainError("kernel_c is undefined at ω = 0")
    denom = omega ** 2 + eta ** 2
    tail = np.exp(-eta * a) * (omega * np.cos(a * omega) + eta * np.sin(a * omega)) / denom
    value = 1.0 / omega - omega / denom + tail
    return float(value) if value.ndim == 0 else value


def kernel_bound_g(omega, eta: float, a: float):
    """g_{η,a}(ω) = η²/|ω|³ + e^{-ηa}(1/|ω| + 1/η), an upper bound on |c|."""
    w = np.abs(np.asarray(omega, dtype=float))
    if np.any(w == 0):
        raise DomainError("kernel_bound_g is undefined at ω = 0")
    value = eta ** 2 / w ** 3 + np.exp(-eta * a) * (1.0 / w + 1.0 / eta)
    return float(value) if value.ndim == 0 else value


def regularised_factor(omega: np.ndarray, eta: float, a: float) -> np.ndarray:
    """(ω - e^{-ηa}[ω cos aω + η sin aω]) / (i(ω²+η²)), the A_{η,a} multiplier."""
    decay = np.exp(-eta * a)
    numer = omega - decay * (omega * np.cos(a * omega) + eta * np.sin(a * omega))
    return numer / (1j * (omega ** 2 + eta ** 2))


def reg_trunc_agp(path: SpectralPath, lam: float, params: AGPParams) -> GaugePotentialEval:
    """A_{η,a}(λ) from the closed-form eigenbasis kernel."""
    vectors, omega, coupling = coupling_data(path, lam)
    _degenerate_mask(omega, coupling, lam)
    eig = coupling * regularised_factor(omega, params.eta, params.a)
    np.fill_diagonal(eig, 0.0)
    return GaugePotentialEval(lam, _to_computational(vectors, eig), eig, "regularised")


def tau_integral_factor(omega: float, eta: float, a: float) -> complex:
    """
    ½∫_{-a}^{a} e^{-η|τ|} sgn(τ) e^{-iωτ} dτ by adaptive quadrature.

    The even part cancels, leaving -i∫_0^a e^{-ητ} sin(ωτ) dτ, which is
    integrated with the oscillatory-weight rule.
    """
    if omega == 0:
        return 0j
    value, _ = quad(lambda t: np.exp(-eta * t), 0.0, a, weight='sin', wvar=omega,
                    epsabs=1e-13, epsrel=1e-12, limit=500)
    return -1j * value


def agp_element_by_tau_quadrature(path: SpectralPath, lam: float, params: AGPParams) -> np.ndarray:
    """A_{η,a}(λ) in the computational basis, each eigenbasis element integrated over τ."""
    vectors, omega, coupling = coupling_data(path, lam)
    dim = omega.shape[0]
    eig = np.zeros((dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(dim):
            if m != n and abs(coupling[m, n]) > 0:
                eig[m, n] = coupling[m, n] * tau_integral_factor(omega[m, n], params.eta, params.a)
    return _to_computational(vectors, eig)


def regularised_agp_norm_bound(path: SpectralPath, lam: float, params: AGPParams) -> float:
    """(1 - e^{-ηa})/η · ‖∂_λH(λ)‖."""
    return params.damping / params.eta * spectral_norm(path.hamiltonian.derivative(lam, 1))


# =============================================================================
# PARAMETER SELECTION
# =============================================================================

def select_eta_a(gap: float, epsilon: float, dH_norm_n1: float) -> AGPParams:
    """
    Cutoffs that keep the regularisation error of the transported state
    below ε:

        η = Δ^{3/2} ε^{1/2} ‖∂H‖_{n,1}^{-1/2} / √2
        a = log(2(Δ+η)‖∂H‖_{n,1} / (Δ ε η)) / η
    """
    for label, value in (('gap', gap), ('epsilon', epsilon), ('dH_norm_n1', dH_norm_n1)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{label} must be positive and finite, got {value}")
    if epsilon > 1:
        raise DomainError(f"epsilon must be at most 1, got {epsilon}")

    eta = gap ** 1.5 * math.sqrt(epsilon) / math.sqrt(dH_norm_n1) / math.sqrt(2.0)
    argument = 2.0 * (gap + eta) * dH_norm_n1 / (gap * epsilon * eta)
    if argument <= 1.0:
        raise DomainError(f"Truncation time would be non-positive (log argument {argument:.6g})")
    a = math.log(argument) / eta
    return AGPParams(eta=eta, a=a, epsilon=epsilon)


# =============================================================================
# REFERENCE PROPAGATORS
# =============================================================================

def reference_transport(path: SpectralPath, start: int = 0, stop: int = -1) -> np.ndarray:
    """Σ_n |n(λ_stop)><n(λ_start)| in the path's gauge."""
    return path.vectors[stop] @ path.vectors[start].conj().T


def _midpoint_product(generator, lam_i: float, lam_f: float, steps: int) -> np.ndarray:
    h = (lam_f - lam_i) / steps
    u = None
    for j in range(steps):
        mid = lam_i + (j + 0.5) * h
        factor = expm_hermitian(generator(mid), h)
        u = factor if u is None else factor @ u
    return u


def ordered_exp_reference(
    generator: Callable[[float], np.ndarray],
    lam_i: float,
    lam_f: float,
    tol: float = ORDERED_EXP_TOL,
    initial_steps: int = ORDERED_EXP_INITIAL_STEPS,
    max_steps: int = ORDERED_EXP_MAX_STEPS,
) -> np.ndarray:
    """
    Path-ordered 𝒯exp[-i∫A(λ)dλ] by midpoint products with step halving.

    Raises
    ------
    ConvergenceError
        Successive halvings still differ by ``tol`` at ``max_steps``.
    """
    if lam_f == lam_i:
        return np.eye(np.asarray(generator(lam_i)).shape[0], dtype=complex)

    steps = initial_steps
    previous = _midpoint_product(generator, lam_i, lam_f, steps)
    delta = math.inf
    while steps < max_steps:
        steps *= 2
        current = _midpoint_product(generator, lam_i, lam_f, steps)
        delta = spectral_norm(current - previous)
        previous = current
        if delta < tol:
            logger.debug(f"ordered_exp_reference converged: {steps} steps, delta={delta:.3e}")
            return current
    raise ConvergenceError(
        f"Ordered exponential not converged after {steps} steps (last delta {delta:.3e})",
        last_delta=delta,
        steps=steps,
    )


def agp_generator(path: SpectralPath, params: Optional[AGPParams] = None) -> Callable[[float], np.ndarray]:
    """λ ↦ A(λ) (exact) or A_{η,a}(λ) as a generator for ordered_exp_reference."""
    if params is None:
        return lambda lam: exact_agp(path, lam).matrix
    return lambda lam: reg_trunc_agp(path, lam, params).matrix
