"""
Gate-cost accounting and the parameter rules for the product formula.

The qubitisation cost of one time-independent exponential of an ℓ-term LCU
is modelled as ceil(C·(‖β‖₁|θ| + log(1/ε̃))·ℓ); no circuits are built.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Sequence, Union

import numpy as np

from cdkit.agp import AGPParams
from cdkit.errors import DomainError, PreconditionWarning
from cdkit.lts import BRotation, GateSequence, HEvolution
from cdkit.operators import LCUHamiltonian, spectral_norm
from utils.constants import DEFAULT_COST_CONSTANT, DEFAULT_LOG_BASE

logger = logging.getLogger(__name__)

_LOG_BASES = {"e": 1.0, "2": math.log(2.0), "10": math.log(10.0)}


def warn_precondition(message: str):
    """Log and warn about a violated assumption; never aborts."""
    logger.warning(message)
    warnings.warn(message, PreconditionWarning, stacklevel=3)


# =============================================================================
# COST MODEL
# =============================================================================

@dataclass(frozen=True)
class GateCostModel:
    """
    cost(θ) = ceil(C·(‖β‖₁·|θ| + log_b(1/ε̃))·ℓ).

    ``h_one_norm`` gives ‖β(λ)‖₁ for H-evolutions and ``dh_one_norm`` gives
    ‖∂_λβ(λ)‖₁ for ∂H rotations.
    """

    n_terms: int
    h_one_norm: Callable[[float], float]
    dh_one_norm: Callable[[float], float]
    epsilon_tilde: float
    constant: float = DEFAULT_COST_CONSTANT
    log_base: Union[str, float] = DEFAULT_LOG_BASE

    def __post_init__(self):
        if self.n_terms < 1:
            raise DomainError(f"ℓ must be at least 1, got {self.n_terms}")
        if not 0 < self.epsilon_tilde < 1:
            raise DomainError(f"ε̃ must lie in (0, 1), got {self.epsilon_tilde}")
        if self.constant <= 0:
            raise DomainError(f"Cost constant must be positive, got {self.constant}")
        self._log_scale()

    @classmethod
    def for_hamiltonian(
        cls,
        h: LCUHamiltonian,
        epsilon_tilde: float,
        n_terms: Optional[int] = None,
        constant: float = DEFAULT_COST_CONSTANT,
        log_base: Union[str, float] = DEFAULT_LOG_BASE,
    ) -> "GateCostModel":
        return cls(
            n_terms=n_terms or h.n_terms,
            h_one_norm=h.one_norm,
            dh_one_norm=h.derivative_one_norm,
            epsilon_tilde=epsilon_tilde,
            constant=constant,
            log_base=log_base,
        )

    def _log_scale(self) -> float:
        key = str(self.log_base)
        if key in _LOG_BASES:
            return _LOG_BASES[key]
        try:
            base = float(self.log_base)
        except (TypeError, ValueError):
            raise DomainError(f"Unknown log base {self.log_base!r}")
        if base <= 1:
            raise DomainError(f"Log base must exceed 1, got {base}")
        return math.log(base)

    @property
    def precision_term(self) -> float:
        return math.log(1.0 / self.epsilon_tilde) / self._log_scale()

    def costs(self, theta, norm: float) -> np.ndarray:
        theta = np.abs(np.asarray(theta, dtype=float))
        return np.ceil(self.constant * (norm * theta + self.precision_term) * self.n_terms)

    def cost(self, theta: float, norm: float) -> int:
        return int(self.costs(theta, norm))


def _block_durations(seq: GateSequence) -> np.ndarray:
    taus = seq.taus
    if not seq.cancelled:
        return np.repeat(np.abs(taus), 4)
    steps = np.abs(np.diff(taus))
    return np.concatenate([[abs(taus[0])], steps, steps, [abs(taus[0])]])


def gate_cost(seq: Union[GateSequence, Iterable], model: GateCostModel) -> int:
    """
    Total modelled gate count of a sequence.

    A GateSequence is costed block-wise; any other iterable is treated as a
    literal list of HEvolution / BRotation factors.
    """
    if not isinstance(seq, GateSequence):
        total = 0
        for factor in seq:
            if isinstance(factor, HEvolution):
                total += model.cost(factor.duration, model.h_one_norm(factor.lam))
            elif isinstance(factor, BRotation):
                total += model.cost(factor.angle, model.dh_one_norm(factor.lam))
            else:
                raise DomainError(f"Cannot cost factor of type {type(factor).__name__}")
        return total

    if seq.n_blocks == 0:
        return 0
    durations = _block_durations(seq)
    total = 0
    for lam_start, step in seq.blocks:
        lam = float(lam_start + 0.5 * step)
        total += int(np.sum(model.costs(durations, model.h_one_norm(lam))))
        angles = seq.bs * (0.5 * step)
        total += 2 * int(np.sum(model.costs(angles, model.dh_one_norm(lam))))
    return total


# =============================================================================
# PRODUCT-FORMULA PARAMETERS
# =============================================================================

@dataclass
class PathNorms:
    """Grid maxima of ‖∂_λ^p H‖ for p = 0..p_max and min ‖H‖."""

    derivative_max: Dict[int, float]
    H_max: float
    H_min: float
    beta_one_max: float


def path_norms(h: LCUHamiltonian, grid: Sequence[float], p_max: int) -> PathNorms:
    """Spectral-norm maxima on a grid; ∂^pH = f^(p) H_p for p ≥ 1."""
    grid = np.asarray(grid, dtype=float)
    h.schedule.require_order(p_max)
    h_norms = np.array([spectral_norm(h.to_dense(lam)) for lam in grid])
    derivative_max = {0: float(h_norms.max())}
    for p in range(1, p_max + 1):
        f_p = max(abs(h.schedule.derivative(lam, p)) for lam in grid)
        derivative_max[p] = float(f_p * h.problem_norm)
    return PathNorms(
        derivative_max=derivative_max,
        H_max=float(h_norms.max()),
        H_min=float(h_norms.min()),
        beta_one_max=float(max(h.one_norm(lam) for lam in grid)),
    )


@dataclass
class LTSBoundInputs:
    """Quantities feeding the product-formula step count and the complexity bound."""

    gamma: Dict[int, float]
    p_star: int
    theorem_lambda_tilde: float
    lambda_tilde: float
    Lambda: float
    dlam: float
    flags: Dict[str, bool] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "p_star": self.p_star,
            "lambda_tilde": self.lambda_tilde,
            "theorem_lambda_tilde": self.theorem_lambda_tilde,
            "Lambda": self.Lambda,
            "dlam": self.dlam,
        }


def compute_lambda_tilde(
    h: LCUHamiltonian,
    params: AGPParams,
    k: int,
    epsilon: float,
    gap: float,
    dH_norm_n1: float,
    q: int = 2,
    grid: Optional[Sequence[float]] = None,
) -> LTSBoundInputs:
    """
    γ_p = (√2 Δ^{-3/2} ‖∂H‖_{n,1}^{1/2} ‖∂^pH‖_{∞,∞})^{1/p} for p = 1..2k+1,
    p* = argmax ε^{-1/2p} γ_p, and the sufficient
    Λ̃ = max_p (2(1-e^{-ηa})/η ‖∂^pH‖_{∞,∞})^{1/p} used to pick r.

    Only interpolating Hamiltonians H_i + f(λ)H_p are representable, so
    every input satisfies the interpolation requirement.

    Raises
    ------
    CapabilityError
        The schedule lacks derivatives up to order 2k+1.
    """
    p_max = 2 * k + 1
    h.schedule.require_order(p_max)
    if grid is None:
        grid = np.linspace(h.lam_i, h.lam_f, 129)
    norms = path_norms(h, grid, p_max)

    gamma = {}
    for p in range(1, p_max + 1):
        base = math.sqrt(2.0) * gap ** -1.5 * math.sqrt(dH_norm_n1) * norms.derivative_max[p]
        gamma[p] = base ** (1.0 / p)
    p_star = max(gamma, key=lambda p: epsilon ** (-1.0 / (2 * p)) * gamma[p])
    theorem_lambda_tilde = epsilon ** (-1.0 / (2 * p_star)) * gamma[p_star]

    weight = 2.0 * params.damping / params.eta
    lambda_tilde = max((weight * norms.derivative_max[p]) ** (1.0 / p) for p in range(1, p_max + 1))
    Lambda = max(norms.derivative_max[p] ** (1.0 / p) for p in range(1, p_max + 1))
    dlam = h.lam_f - h.lam_i

    cond_a = min(((9.0 / 10.0) * (5.0 / 3.0) ** k * gamma[p_star] * dlam) ** (1.0 - 1.0 / (2 * p_star + 1)), 1.0)
    flags = {
        "a": epsilon <= cond_a,
        "b": dH_norm_n1 >= 3.0 ** (-2.0 * (q + 1) / 3.0) * gap * epsilon ** (1.0 / 3.0),
        "c": norms.H_min >= gap ** 1.5 * math.sqrt(epsilon) / math.sqrt(dH_norm_n1),
    }
    return LTSBoundInputs(
        gamma=gamma,
        p_star=p_star,
        theorem_lambda_tilde=theorem_lambda_tilde,
        lambda_tilde=lambda_tilde,
        Lambda=Lambda,
        dlam=dlam,
        flags=flags,
    )


def select_r(k: int, lambda_tilde: float, dlam: float, epsilon: float) -> int:
    """r = ceil(5k·Λ̃δλ·(5/3)^k·(Λ̃δλ/ε)^{1/2k})."""
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    for label, value in (('lambda_tilde', lambda_tilde), ('dlam', dlam), ('epsilon', epsilon)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{label} must be positive and finite, got {value}")
    x = lambda_tilde * dlam
    if epsilon > min((9.0 / 10.0) * (5.0 / 3.0) ** k * x, 1.0):
        warn_precondition(
            f"ε={epsilon:.6g} exceeds min{{(9/10)(5/3)^k Λ̃δλ, 1}}; product-formula bound not guaranteed"
        )
    r = 5.0 * k * x * (5.0 / 3.0) ** k * (x / epsilon) ** (1.0 / (2 * k))
    return max(1, int(math.ceil(r)))


def lemma4_gradient_condition(dH_norm_n1: float, eta: float, a: float, q: int) -> bool:
    """‖∂H‖_{n,1} ≥ 3^{-(q+1)} η / (1 - e^{-ηa})."""
    return dH_norm_n1 >= 3.0 ** (-(q + 1)) * eta / -math.expm1(-eta * a)


def theorem_gate_bound(
    k: int,
    Lambda: float,
    dlam: float,
    dH_norm_n1: float,
    epsilon: float,
    gap: float,
    q: int,
    beta_one_max: float,
) -> float:
    """
    Leading-order CD gate complexity with unit constant:
    (25/3)^k k (Λδλ)^{1+1/2k} ‖∂H‖^{1+1/4k+3/(2(q+1))}
    / (ε^{1+3/4k+3/(2(q+1))} Δ^{3+3/4k+3/(2(q+1))}) · ‖β‖_{1,∞}
    """
    quad_exp = 3.0 / (2.0 * (q + 1))
    numer = (25.0 / 3.0) ** k * k * (Lambda * dlam) ** (1.0 + 1.0 / (2 * k))
    numer *= dH_norm_n1 ** (1.0 + 1.0 / (4 * k) + quad_exp)
    denom = epsilon ** (1.0 + 3.0 / (4 * k) + quad_exp) * gap ** (3.0 + 3.0 / (4 * k) + quad_exp)
    return numer / denom * beta_one_max


def dominant_term_count(n_terms: int, k: int, r: int, M: int, q: int) -> float:
    """ℓ·5^{k-1}·r·M·(q+1), the scaling the modelled count must follow."""
    return float(n_terms * 5 ** (k - 1) * r * M * (q + 1))
