"""
Randomised (qDRIFT-style) gate-based CD channel.

Each of r rounds covers one uniform λ subinterval. A round samples λ from
the gradient-weighted density restricted to its subinterval and τ from the
two-sided truncated exponential, then applies

    e^{-iHτ} exp[-i (1-e^{-ηa}) sgn τ / (p_j(λ) η) ∂_λH] e^{iHτ}

so that the expected generator equals the regularised AGP integrated over
the subinterval. Trajectories are averaged into a density matrix.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from cdkit.agp import AGPParams, coupling_data, select_eta_a
from cdkit.cd import path_inputs
from cdkit.costs import GateCostModel
from cdkit.errors import DomainError
from cdkit.models import ModelSpec
from cdkit.operators import LCUHamiltonian, SpectralPath, projector, trace_distance, track_path
from cdkit.results import RunResult, bound_margin
from utils.constants import (
    CDF_GRID_POINTS,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_COST_CONSTANT,
    DEFAULT_LOG_BASE,
    DEFAULT_N_BOOTSTRAP,
    DEFAULT_N_TRAJECTORIES,
    DEFAULT_SEED,
)
from utils.logging_utils import ProgressLogger

logger = logging.getLogger(__name__)

_BOOTSTRAP_STREAM = 2 ** 63


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory; independent of run order."""
    return np.random.Generator(np.random.Philox(key=master_seed, counter=[0, 0, 0, index]))


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """Sampling tables for τ and λ plus the round count."""

    eta: float
    a: float
    r: int
    grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    dH_norm_inf1: float
    seed: int = DEFAULT_SEED

    @property
    def damping(self) -> float:
        return -math.expm1(-self.eta * self.a)

    @property
    def lam_i(self) -> float:
        return float(self.grid[0])

    @property
    def lam_f(self) -> float:
        return float(self.grid[-1])

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lam_i, self.lam_f, self.r + 1)

    def tau_density(self, tau):
        """P(τ) = η e^{-η|τ|} / (2(1 - e^{-ηa})) on [-a, a]."""
        tau = np.asarray(tau, dtype=float)
        inside = np.abs(tau) <= self.a
        return np.where(inside, self.eta * np.exp(-self.eta * np.abs(tau)) / (2.0 * self.damping), 0.0)

    def lambda_density(self, lam):
        """p(λ) = ‖∂_λH(λ)‖ / ‖∂_λH‖_{∞,1}."""
        return np.interp(lam, self.grid, self.density) / self.dH_norm_inf1

    def tau_from_uniform(self, u_abs, u_sign):
        magnitude = -np.log1p(-np.asarray(u_abs) * self.damping) / self.eta
        return np.where(np.asarray(u_sign) < 0.5, -magnitude, magnitude)

    def window_mass(self, window: int) -> float:
        lo, hi = self.edges[window], self.edges[window + 1]
        return float(np.interp(hi, self.grid, self.cdf) - np.interp(lo, self.grid, self.cdf))

    def lambda_from_uniform(self, u, window: Optional[int] = None):
        """Inverse transform on the tabulated CDF, optionally within one subinterval."""
        u = np.asarray(u, dtype=float)
        if window is None:
            return np.clip(np.interp(u, self.cdf, self.grid), self.lam_i, self.lam_f)
        lo, hi = self.edges[window], self.edges[window + 1]
        c_lo = np.interp(lo, self.grid, self.cdf)
        c_hi = np.interp(hi, self.grid, self.cdf)
        if c_hi - c_lo <= 0:
            return lo + u * (hi - lo)
        return np.clip(np.interp(c_lo + u * (c_hi - c_lo), self.cdf, self.grid), lo, hi)

    def window_density(self, lam, window: int):
        """Conditional density of λ within subinterval ``window``."""
        mass = self.window_mass(window)
        if mass <= 0:
            return np.full(np.shape(lam), np.inf)
        return self.lambda_density(lam) / mass


def build_plan(
    h: LCUHamiltonian,
    params: AGPParams,
    r: int,
    seed: int = DEFAULT_SEED,
    n_points: int = CDF_GRID_POINTS,
) -> SamplingPlan:
    """
    Tabulate ‖∂_λH(λ)‖ = |f'(λ)| ‖H_p‖ and its normalised CDF.

    Raises
    ------
    DomainError
        ∂_λH vanishes on the whole domain.
    """
    if int(r) != r or r < 1:
        raise DomainError(f"r must be a positive integer, got {r}")
    grid = np.linspace(h.lam_i, h.lam_f, n_points)
    density = np.array([abs(h.schedule.derivative(lam, 1)) for lam in grid]) * h.problem_norm
    total = float(trapezoid(density, grid))
    if total <= 0:
        raise DomainError("∂_λH vanishes on the whole domain; λ sampling is undefined")
    cdf = cumulative_trapezoid(density, grid, initial=0.0) / total
    cdf[-1] = 1.0
    return SamplingPlan(
        eta=params.eta, a=params.a, r=int(r), grid=grid, density=density,
        cdf=cdf, dH_norm_inf1=total, seed=seed,
    )


def sample_tau(plan: SamplingPlan, rng: np.random.Generator, size=None):
    """τ ∈ [-a, a] with density ∝ e^{-η|τ|}."""
    u = rng.random(size)
    s = rng.random(size)
    tau = plan.tau_from_uniform(u, s)
    return float(tau) if size is None else tau


def sample_lambda(plan: SamplingPlan, rng: np.random.Generator, size=None, window: Optional[int] = None):
    """λ ∝ ‖∂_λH(λ)‖, on the whole domain or within one subinterval."""
    lam = plan.lambda_from_uniform(rng.random(size), window)
    return float(lam) if size is None else lam


def qdrift_r(eta: float, a: float, epsilon: float, dH_norm_inf1: float) -> int:
    """r = ceil(4(1-e^{-ηa})² ‖∂H‖²_{∞,1} / (η² ε))."""
    for label, value in (('eta', eta), ('a', a), ('epsilon', epsilon), ('dH_norm_inf1', dH_norm_inf1)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{label} must be positive and finite, got {value}")
    damping = -math.expm1(-eta * a)
    return max(1, int(math.ceil(4.0 * damping ** 2 * dH_norm_inf1 ** 2 / (eta ** 2 * epsilon))))


def qdrift_gate_bound(
    gap: float, epsilon: float, dH_norm_inf1: float, n_terms: int, beta_one_max: float, dbeta_ratio_max: float
) -> float:
    """
    Δ^{-9/2} ε^{-5/2} ‖∂H‖_{∞,1}^{7/2} ℓ [max‖β‖₁ + ‖∂H‖_{∞,1} max(‖∂β‖₁/‖∂H(λ)‖)],
    unit constant.
    """
    return (gap ** -4.5 * epsilon ** -2.5 * dH_norm_inf1 ** 3.5 * n_terms
            * (beta_one_max + dH_norm_inf1 * dbeta_ratio_max))


# =============================================================================
# SAMPLED OPERATOR
# =============================================================================

def sampled_b_operator(h: LCUHamiltonian, lam: float, tau: float, params: AGPParams, p_lambda: float = 1.0) -> np.ndarray:
    """B(λ, τ) = (1-e^{-ηa}) sgn τ / (p η) · e^{-iHτ} ∂_λH e^{iHτ}; E_τ[B] = A_{η,a}(λ) at p = 1."""
    energies, vectors = np.linalg.eigh(h.to_dense(lam))
    evolve = (vectors * np.exp(-1j * energies * tau)) @ vectors.conj().T
    scale = params.damping * np.sign(tau) / (p_lambda * params.eta)
    return scale * evolve @ h.derivative(lam, 1) @ evolve.conj().T


def sampled_b_mean(
    path: SpectralPath, lam: float, params: AGPParams, taus: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample mean of B(λ, τ) over ``taus`` and the element-wise standard error,
    both in the computational basis.
    """
    vectors, omega, coupling = coupling_data(path, lam)
    taus = np.asarray(taus, dtype=float)
    phases = np.sign(taus)[:, None, None] * np.exp(-1j * omega[None] * taus[:, None, None])
    scale = params.damping / params.eta
    mean_eig = scale * coupling * phases.mean(axis=0)
    # element-wise error after rotation back: propagate via sample of the full matrices
    samples = scale * np.einsum('ab,sbc,dc->sad', vectors, coupling[None] * phases, vectors.conj())
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(len(taus))
    mean = vectors @ mean_eig @ vectors.conj().T
    return mean, stderr


# =============================================================================
# CHANNEL
# =============================================================================

@dataclass
class ChannelResult:
    """Trajectory-averaged output state and its distance to the target."""

    rho: np.ndarray
    trace_distance: float
    bootstrap_se: float
    n_trajectories: int
    r: int
    seed: int
    trajectory_keys: List[Tuple[int, int]] = field(default_factory=list)
    mean_gate_count: float = 0.0


def qdrift_gate_count(cost_model: GateCostModel, lam, tau, weight) -> float:
    """
    Cost of sampled rounds (λ_j, τ_j, w_j): two H-evolutions of duration |τ|
    and one rotation exp(-i w ∂_λH(λ)) per round.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    h_norms = np.array([cost_model.h_one_norm(x) for x in lam])
    dh_norms = np.array([cost_model.dh_one_norm(x) for x in lam])
    total = 2 * np.sum(cost_model.costs(tau, h_norms)) + np.sum(cost_model.costs(weight, dh_norms))
    return float(total)


def _trajectory_chunk(h: LCUHamiltonian, plan: SamplingPlan, psi0: np.ndarray, indices: List[int],
                      cost_model: Optional[GateCostModel] = None) -> Tuple[List[int], np.ndarray, float]:
    """Run trajectories ``indices``; returns (indices, final states, summed gate cost)."""
    draws = np.stack([trajectory_rng(plan.seed, i).random((plan.r, 3)) for i in indices])
    states = np.tile(np.asarray(psi0, dtype=complex), (len(indices), 1))
    mu, w = np.linalg.eigh(h.dense_problem)
    gates = 0.0
    for j in range(plan.r):
        lam = plan.lambda_from_uniform(draws[:, j, 0], window=j)
        tau = plan.tau_from_uniform(draws[:, j, 1], draws[:, j, 2])
        f_val = np.array([h.schedule.value(x) for x in lam])
        f_der = np.array([h.schedule.derivative(x, 1) for x in lam])
        with np.errstate(divide='ignore', invalid='ignore'):
            weight = np.where(
                np.isfinite(plan.window_density(lam, j)),
                plan.damping / (plan.window_density(lam, j) * plan.eta),
                0.0,
            )
        # rotation angle multiplying H_p
        theta = weight * np.sign(tau) * f_der

        stack = h.dense_initial[None] + f_val[:, None, None] * h.dense_problem[None]
        energies, vectors = np.linalg.eigh(stack)
        coeffs = np.einsum('sba,sb->sa', vectors.conj(), states)
        states = np.einsum('sab,sb->sa', vectors, np.exp(1j * energies * tau[:, None]) * coeffs)
        coeffs = (states @ w.conj()) * np.exp(-1j * theta[:, None] * mu[None])
        states = coeffs @ w.T
        coeffs = np.einsum('sba,sb->sa', vectors.conj(), states)
        states = np.einsum('sab,sb->sa', vectors, np.exp(-1j * energies * tau[:, None]) * coeffs)

        if cost_model is not None:
            gates += qdrift_gate_count(cost_model, lam, tau, weight)
    return indices, states, gates


def _density(states: np.ndarray) -> np.ndarray:
    rho = states.T @ states.conj() / len(states)
    return 0.5 * (rho + rho.conj().T)


def apply_channel(
    h: LCUHamiltonian,
    path: SpectralPath,
    n: int,
    plan: Optional[SamplingPlan],
    n_trajectories: int = DEFAULT_N_TRAJECTORIES,
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int = 1,
    cost_model: Optional[GateCostModel] = None,
    seed: int = DEFAULT_SEED,
) -> ChannelResult:
    """
    Average ``n_trajectories`` sampled r-round trajectories started in
    |n(λ_i)> and compare with the transported projector |n(λ_f)><n(λ_f)|.
    """
    psi0 = path.initial_state(n)
    target = projector(path.final_state(n))
    if plan is None:
        if not h.is_constant:
            raise DomainError("A sampling plan is required unless the Hamiltonian is constant")
        states = np.tile(psi0, (n_trajectories, 1))
        rho = _density(states)
        return ChannelResult(rho, trace_distance(rho, target), 0.0, n_trajectories, 0, seed)

    indices = list(range(n_trajectories))
    chunks = [indices[i:i + chunk_size] for i in range(0, n_trajectories, chunk_size)]
    states = np.empty((n_trajectories, h.dim), dtype=complex)
    gates = 0.0
    progress = ProgressLogger(logger, total=n_trajectories, step=chunk_size, label="qDRIFT trajectories")

    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_trajectory_chunk, h, plan, psi0, chunk, cost_model) for chunk in chunks]
            for future in as_completed(futures):
                idx, chunk_states, chunk_gates = future.result()
                states[idx] = chunk_states
                gates += chunk_gates
                progress.update(len(idx))
    else:
        for chunk in chunks:
            idx, chunk_states, chunk_gates = _trajectory_chunk(h, plan, psi0, chunk, cost_model)
            states[idx] = chunk_states
            gates += chunk_gates
            progress.update(len(idx))

    rho = _density(states)
    distance = trace_distance(rho, target)

    boot_rng = trajectory_rng(plan.seed, _BOOTSTRAP_STREAM)
    boot = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        sample = states[boot_rng.integers(0, n_trajectories, n_trajectories)]
        boot[b] = trace_distance(_density(sample), target)
    se = float(boot.std(ddof=1)) if n_bootstrap > 1 else 0.0

    return ChannelResult(
        rho=rho,
        trace_distance=distance,
        bootstrap_se=se,
        n_trajectories=n_trajectories,
        r=plan.r,
        seed=plan.seed,
        trajectory_keys=[(plan.seed, i) for i in indices],
        mean_gate_count=gates / n_trajectories,
    )


def _unpack(model: Union[ModelSpec, LCUHamiltonian], level: Optional[int]):
    if isinstance(model, ModelSpec):
        return model.hamiltonian, model.name, model.level if level is None else level, model.n_terms
    return model, model.name, 0 if level is None else level, model.n_terms


def run_qdrift(
    model: Union[ModelSpec, LCUHamiltonian],
    level: Optional[int] = None,
    epsilon: float = 0.1,
    n_trajectories: int = DEFAULT_N_TRAJECTORIES,
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    path: Optional[SpectralPath] = None,
    overrides: Optional[dict] = None,
    cost_constant: float = DEFAULT_COST_CONSTANT,
    log_base: str = DEFAULT_LOG_BASE,
) -> Tuple[RunResult, ChannelResult]:
    """
    Randomised CD with r from the round-count rule; margin is (2ε + 3σ)/distance.

    ``sqrt_infidelity`` of the returned result holds the trace distance of
    the averaged channel output from the target projector.
    """
    start = time.perf_counter()
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    h, name, n, n_terms = _unpack(model, level)
    path = path or track_path(h)

    if h.is_constant:
        channel = apply_channel(h, path, n, None, n_trajectories, seed=seed)
        result = RunResult(
            pipeline="qdrift", model=name, level=n, epsilon=epsilon, seed=seed,
            sqrt_infidelity=channel.trace_distance, params={"r": 0},
            margins={"end_to_end": bound_margin(2 * epsilon, channel.trace_distance)},
            wall_time=time.perf_counter() - start,
        )
        return result, channel

    inputs = path_inputs(path, n)
    params = select_eta_a(inputs["gap"], epsilon, inputs["dH_norm_n1"])
    if "eta" in overrides or "a" in overrides:
        params = AGPParams(overrides.get("eta", params.eta), overrides.get("a", params.a), epsilon)
    unit_plan = build_plan(h, params, 1, seed)
    r = overrides.get("r") or qdrift_r(params.eta, params.a, epsilon, unit_plan.dH_norm_inf1)
    plan = build_plan(h, params, r, seed)
    logger.info(f"qDRIFT {name} n={n} ε={epsilon:.6g}: η={params.eta:.6g} a={params.a:.6g} r={r}")

    cost_model = GateCostModel.for_hamiltonian(
        h, epsilon_tilde=epsilon / (3 * r), n_terms=n_terms, constant=cost_constant, log_base=log_base
    )
    channel = apply_channel(
        h, path, n, plan, n_trajectories, n_bootstrap, chunk_size, workers, cost_model, seed
    )

    grid = plan.grid
    beta_one_max = max(h.one_norm(x) for x in grid[::64])
    dH_pointwise = plan.density
    ratios = [h.derivative_one_norm(x) / d for x, d in zip(grid[::64], dH_pointwise[::64]) if d > 0]
    result = RunResult(
        pipeline="qdrift", model=name, level=n, epsilon=epsilon, seed=seed,
        sqrt_infidelity=channel.trace_distance,
        gate_count=int(round(channel.mean_gate_count)),
        params={
            "eta": params.eta,
            "a": params.a,
            "r": r,
            "gap": inputs["gap"],
            "dH_norm_n1": inputs["dH_norm_n1"],
            "dH_norm_inf1": plan.dH_norm_inf1,
            "n_trajectories": n_trajectories,
            "bootstrap_se": channel.bootstrap_se,
            "n_terms": n_terms,
            "qdrift_bound": qdrift_gate_bound(
                inputs["gap"], epsilon, plan.dH_norm_inf1, n_terms, beta_one_max, max(ratios, default=0.0)
            ),
        },
        margins={"end_to_end": bound_margin(2 * epsilon + 3 * channel.bootstrap_se, channel.trace_distance)},
        overrides=overrides,
        wall_time=time.perf_counter() - start,
    )
    return result, channel
