"""
Gate-based adiabatic baseline.

The evolution 𝒯exp[-i∫₀ᵀ H(λ(t))dt] is split over the LCU terms with the
same Suzuki recursion as the CD sequence; each factor is a single Pauli
rotation exp(-i θ β_i(t) V_i) applied as cos θβ_i ψ - i sin θβ_i V_i ψ.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial

from cdkit.cd import run_cd
from cdkit.costs import GateCostModel, select_r
from cdkit.errors import CapabilityError, CDKitError, DomainError
from cdkit.lts import LTSConfig, first_order_blocks
from cdkit.models import ModelSpec
from cdkit.operators import LCUHamiltonian, Schedule, SpectralPath, min_gap, sqrt_infidelity, track_path
from cdkit.results import RunResult, bound_margin
from utils.constants import (
    BISECTION_MAX_ITER,
    BISECTION_REL_TOL,
    DEFAULT_C_T,
    DEFAULT_COST_CONSTANT,
    DEFAULT_LOG_BASE,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AQCSchedule:
    """
    λ(t) = λ_i + (λ_f - λ_i) g(t/T) on t ∈ [0, T], with g(0)=0 and g(1)=1.
    """

    T: float
    lam_i: float
    lam_f: float
    shape: Optional[Schedule] = None

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise DomainError(f"T must be positive and finite, got {self.T}")
        shape = self.shape or Schedule.linear()
        if abs(shape.value(0.0)) > 1e-12 or abs(shape.value(1.0) - 1.0) > 1e-12:
            raise DomainError("Schedule shape must satisfy g(0)=0 and g(1)=1")
        object.__setattr__(self, 'shape', shape)

    @property
    def span(self) -> float:
        return self.lam_f - self.lam_i

    def lam(self, t: float) -> float:
        return self.lam_i + self.span * self.shape.value(t / self.T)

    def is_linear(self) -> bool:
        return self.shape.polynomial is not None and self.shape.polynomial.degree() <= 1


def composite_derivative(h: LCUHamiltonian, sched: AQCSchedule, t: float, order: int) -> float:
    """d^p/dt^p f(λ(t))."""
    if order == 0:
        return h.schedule.value(sched.lam(t))
    if sched.is_linear():
        rate = sched.span / sched.T
        return h.schedule.derivative(sched.lam(t), order) * rate ** order
    f_poly, g_poly = h.schedule.polynomial, sched.shape.polynomial
    if f_poly is None or g_poly is None:
        raise CapabilityError(
            "Non-linear time schedules need polynomial f and g for exact composite derivatives"
        )
    composed = f_poly(Polynomial([sched.lam_i]) + sched.span * g_poly)
    return float(composed.deriv(order)(t / sched.T)) / sched.T ** order


def reichardt_time(epsilon: float, gap: float, Gamma: float, K: int, C_T: float = DEFAULT_C_T) -> float:
    """T = C_T ε^{-1/K} Δ^{-(2+1/K)} Γ^{1+1/K}."""
    for label, value in (('epsilon', epsilon), ('gap', gap), ('Gamma', Gamma), ('K', K), ('C_T', C_T)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{label} must be positive and finite, got {value}")
    return C_T * epsilon ** (-1.0 / K) * gap ** (-(2.0 + 1.0 / K)) * Gamma ** (1.0 + 1.0 / K)


def gamma_bound(h: LCUHamiltonian, K: int, grid: Optional[Sequence[float]] = None) -> float:
    """Γ = max_{1≤p≤K+1} ‖∂_λ^p H‖_{∞,∞}."""
    h.schedule.require_order(K + 1)
    grid = np.linspace(h.lam_i, h.lam_f, 129) if grid is None else grid
    best = 0.0
    for p in range(1, K + 2):
        f_p = max(abs(h.schedule.derivative(lam, p)) for lam in grid)
        best = max(best, f_p * h.problem_norm)
    return best


def aqc_lambda(h: LCUHamiltonian, sched: AQCSchedule, k: int, n_points: int = 129) -> float:
    """Λ = max_{0≤p≤2k} ‖∂_t^p β‖_{1,∞}^{1/(p+1)}."""
    times = np.linspace(0.0, sched.T, n_points)
    c_problem = np.abs(h.problem)
    best = 0.0
    for p in range(2 * k + 1):
        if p == 0:
            norm = max(h.one_norm(sched.lam(t)) for t in times)
        else:
            norm = max(abs(composite_derivative(h, sched, t, p)) for t in times) * float(np.sum(c_problem))
        best = max(best, norm ** (1.0 / (p + 1)))
    return best


def aqc_gate_bound(n_terms: int, k: int, Lambda: float, Gamma: float, epsilon: float, gap: float) -> float:
    """
    ℓ (25/3)^k k Λ^{1+1/2k} Γ^{(1+1/2k)²} / (ε^{(1/2k)(2+1/2k)} Δ^{(2+1/2k)(1+1/2k)}),
    unit constant.
    """
    x = 1.0 / (2 * k)
    return (n_terms * (25.0 / 3.0) ** k * k * Lambda ** (1 + x) * Gamma ** ((1 + x) ** 2)
            / (epsilon ** (x * (2 + x)) * gap ** ((2 + x) * (1 + x))))


# =============================================================================
# SEQUENCES
# =============================================================================

@dataclass(frozen=True)
class PauliRotation:
    """exp(-i angle V_term)."""

    t: float
    term: int
    angle: float


@dataclass(frozen=True, eq=False)
class AQCSequence:
    """Base blocks (t_start, step) of the term-split evolution."""

    hamiltonian: LCUHamiltonian
    schedule: AQCSchedule
    blocks: np.ndarray
    k: int
    r: int

    @property
    def n_terms(self) -> int:
        return self.hamiltonian.n_terms

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_factors(self) -> int:
        return 2 * self.n_terms * self.n_blocks

    def block_angles(self, j: int) -> Tuple[float, np.ndarray]:
        t_start, step = self.blocks[j]
        t_mid = float(t_start + 0.5 * step)
        beta = self.hamiltonian.coefficients(self.schedule.lam(t_mid))
        return t_mid, beta * (0.5 * step)

    def factors(self) -> Iterator[PauliRotation]:
        order = list(range(self.n_terms)) + list(range(self.n_terms - 1, -1, -1))
        for j in range(self.n_blocks):
            t_mid, angles = self.block_angles(j)
            for i in order:
                yield PauliRotation(t_mid, i, float(angles[i]))


def build_aqc_sequence(h: LCUHamiltonian, sched: AQCSchedule, cfg: LTSConfig) -> AQCSequence:
    dt = sched.T / cfg.r
    blocks = []
    for seg in range(cfg.r):
        blocks.extend(first_order_blocks(cfg.k, seg * dt, dt))
    return AQCSequence(h, sched, np.asarray(blocks, dtype=float), cfg.k, cfg.r)


def apply_aqc_sequence(seq: AQCSequence, state: np.ndarray) -> np.ndarray:
    """Apply the sequence to a state vector or, column-wise, to a matrix."""
    out = np.array(state, dtype=complex)
    paulis = seq.hamiltonian.paulis
    order = list(range(seq.n_terms)) + list(range(seq.n_terms - 1, -1, -1))
    for j in range(seq.n_blocks):
        _, angles = seq.block_angles(j)
        for i in order:
            theta = angles[i]
            if theta == 0.0:
                continue
            if paulis[i].is_identity:
                out *= np.exp(-1j * theta)
            else:
                out = math.cos(theta) * out - 1j * math.sin(theta) * paulis[i].apply(out)
    return out


def aqc_gate_cost(seq: AQCSequence, constant: float = DEFAULT_COST_CONSTANT,
                  log_base: str = DEFAULT_LOG_BASE, epsilon_tilde: Optional[float] = None) -> int:
    """Each Pauli rotation costed as a one-term LCU exponential."""
    if seq.n_blocks == 0:
        return 0
    epsilon_tilde = epsilon_tilde or 1.0 / max(seq.n_factors, 2)
    model = GateCostModel(
        n_terms=1, h_one_norm=lambda _: 1.0, dh_one_norm=lambda _: 1.0,
        epsilon_tilde=epsilon_tilde, constant=constant, log_base=log_base,
    )
    total = 0
    for j in range(seq.n_blocks):
        _, angles = seq.block_angles(j)
        total += 2 * int(np.sum(model.costs(angles, 1.0)))
    return total


# =============================================================================
# PIPELINE
# =============================================================================

def _unpack(model: Union[ModelSpec, LCUHamiltonian], level: Optional[int]):
    if isinstance(model, ModelSpec):
        return model.hamiltonian, model.name, model.level if level is None else level
    return model, model.name, 0 if level is None else level


def run_aqc(
    model: Union[ModelSpec, LCUHamiltonian],
    level: Optional[int] = None,
    T: Optional[float] = None,
    epsilon: float = 0.1,
    k: int = 1,
    r: Optional[int] = None,
    C_T: float = DEFAULT_C_T,
    path: Optional[SpectralPath] = None,
    shape: Optional[Schedule] = None,
    cost_constant: float = DEFAULT_COST_CONSTANT,
    log_base: str = DEFAULT_LOG_BASE,
    seed: Optional[int] = None,
) -> RunResult:
    """
    Adiabatic evolution of eigenstate ``level`` for time T (Reichardt time
    with constant C_T when not given), Trotterised to order k with r from
    the product-formula rule unless fixed.
    """
    start = time.perf_counter()
    h, name, n = _unpack(model, level)
    path = path or track_path(h)
    gap = min_gap(path, n)
    Gamma = gamma_bound(h, 2 * k, path.grid)
    if T is None:
        T = reichardt_time(epsilon, gap, max(Gamma, 1e-300), 2 * k, C_T)
    sched = AQCSchedule(T, h.lam_i, h.lam_f, shape)
    Lambda = aqc_lambda(h, sched, k)
    r = r or select_r(k, Lambda, T, epsilon)
    seq = build_aqc_sequence(h, sched, LTSConfig(k=k, r=r))
    logger.info(f"AQC {name} n={n} T={T:.6g}: r={r} ({seq.n_factors:,} Pauli rotations)")

    psi = apply_aqc_sequence(seq, path.initial_state(n))
    psi /= np.linalg.norm(psi)
    infidelity = sqrt_infidelity(psi, path.final_state(n))
    gates = aqc_gate_cost(seq, cost_constant, log_base, epsilon_tilde=min(epsilon / seq.n_factors, 0.5))

    return RunResult(
        pipeline="aqc", model=name, level=n, epsilon=epsilon, k=k, seed=seed,
        sqrt_infidelity=infidelity,
        gate_count=gates,
        params={
            "T": T,
            "C_T": C_T,
            "r": r,
            "gap": gap,
            "Gamma": Gamma,
            "Lambda": Lambda,
            "n_terms": h.n_terms,
            "n_factors": seq.n_factors,
            "aqc_bound": aqc_gate_bound(h.n_terms, k, Lambda, max(Gamma, 1e-300), epsilon, gap),
        },
        margins={"end_to_end": bound_margin(epsilon, infidelity)},
        wall_time=time.perf_counter() - start,
    )


def matched_aqc(
    model: Union[ModelSpec, LCUHamiltonian],
    level: Optional[int],
    epsilon: float,
    k: int = 1,
    C_T: float = DEFAULT_C_T,
    path: Optional[SpectralPath] = None,
    rel_tol: float = BISECTION_REL_TOL,
    max_iter: int = BISECTION_MAX_ITER,
) -> Tuple[RunResult, bool]:
    """
    Bisect on T for the shortest evolution whose infidelity reaches ε.

    Returns the accepted run and whether the bracket closed to ``rel_tol``.
    """
    h, _, n = _unpack(model, level)
    path = path or track_path(h)

    def attempt(T):
        return run_aqc(model, level, T=T, epsilon=epsilon, k=k, C_T=C_T, path=path)

    gap = min_gap(path, n)
    Gamma = gamma_bound(h, 2 * k, path.grid)
    T_hi = reichardt_time(epsilon, gap, max(Gamma, 1e-300), 2 * k, C_T)
    hi = attempt(T_hi)
    T_lo = None
    iterations = 0
    while hi.sqrt_infidelity > epsilon and iterations < max_iter:
        T_lo, T_hi = T_hi, 2.0 * T_hi
        hi = attempt(T_hi)
        iterations += 1
    if hi.sqrt_infidelity > epsilon:
        return hi, False
    if T_lo is None:
        T_lo = T_hi / 2.0
        while iterations < max_iter:
            lo = attempt(T_lo)
            iterations += 1
            if lo.sqrt_infidelity > epsilon:
                break
            hi, T_hi, T_lo = lo, T_lo, T_lo / 2.0
        else:
            return hi, False
    while T_hi / T_lo - 1.0 > rel_tol and iterations < max_iter:
        T_mid = math.sqrt(T_lo * T_hi)
        mid = attempt(T_mid)
        iterations += 1
        if mid.sqrt_infidelity <= epsilon:
            hi, T_hi = mid, T_mid
        else:
            T_lo = T_mid
    return hi, T_hi / T_lo - 1.0 <= rel_tol


def compare_cd_aqc(
    model: ModelSpec,
    epsilon_grid: Sequence[float],
    level: Optional[int] = None,
    q: int = 2,
    k: int = 1,
    C_T: float = DEFAULT_C_T,
) -> pd.DataFrame:
    """Per ε: CD and matched-infidelity AQC gate counts and infidelities."""
    path = track_path(model.hamiltonian)
    rows = []
    for epsilon in epsilon_grid:
        row = {"epsilon": epsilon}
        try:
            cd = run_cd(model, level, epsilon=epsilon, q=q, k=k, path=path)
            row.update(cd_gate_count=cd.gate_count, cd_sqrt_infidelity=cd.sqrt_infidelity)
        except CDKitError as e:
            row.update(cd_gate_count=np.nan, cd_sqrt_infidelity=np.nan, error=f"cd: {e}")
        try:
            aqc, converged = matched_aqc(model, level, epsilon, k=k, C_T=C_T, path=path)
            row.update(
                aqc_T=aqc.params["T"],
                aqc_gate_count=aqc.gate_count,
                aqc_sqrt_infidelity=aqc.sqrt_infidelity,
                bisection_converged=converged,
            )
        except CDKitError as e:
            row.update(aqc_T=np.nan, aqc_gate_count=np.nan, aqc_sqrt_infidelity=np.nan,
                       bisection_converged=False, error=f"aqc: {e}")
        row.setdefault("error", "")
        rows.append(row)
    return pd.DataFrame(rows)
