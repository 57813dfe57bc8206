"""Tests for the Trotterised adiabatic baseline."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cdkit.aqc import (
    AQCSchedule,
    PauliRotation,
    aqc_gate_bound,
    aqc_gate_cost,
    aqc_lambda,
    apply_aqc_sequence,
    build_aqc_sequence,
    composite_derivative,
    compare_cd_aqc,
    gamma_bound,
    matched_aqc,
    reichardt_time,
    run_aqc,
)
from cdkit.costs import GateCostModel
from cdkit.errors import DomainError
from cdkit.lts import LTSConfig
from cdkit.operators import Schedule, expm_hermitian, is_unitary


def test_reichardt_time():
    assert reichardt_time(0.1, 0.5, 1.0, K=1, C_T=1.0) == pytest.approx(80.0)
    assert reichardt_time(0.1, 0.5, 1.0, K=1, C_T=2.5) == pytest.approx(200.0)
    with pytest.raises(DomainError):
        reichardt_time(0.1, 0.0, 1.0, K=1)


def test_schedule_validation():
    with pytest.raises(DomainError):
        AQCSchedule(0.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        AQCSchedule(1.0, -1.0, 1.0, shape=Schedule.from_polynomial([0.0, 0.5]))


def test_composite_derivative_linear(lz):
    sched = AQCSchedule(4.0, -1.0, 1.0)
    assert sched.lam(2.0) == pytest.approx(0.0)
    assert composite_derivative(lz.hamiltonian, sched, 1.0, 1) == pytest.approx(0.5)
    assert composite_derivative(lz.hamiltonian, sched, 1.0, 2) == pytest.approx(0.0)


def test_composite_derivative_quadratic_shape(lz):
    sched = AQCSchedule(2.0, -1.0, 1.0, shape=Schedule.from_polynomial([0.0, 0.0, 1.0]))
    # λ(t) = -1 + 2(t/T)², so dλ/dt = 4t/T²
    assert composite_derivative(lz.hamiltonian, sched, 1.0, 1) == pytest.approx(1.0)
    assert composite_derivative(lz.hamiltonian, sched, 1.0, 2) == pytest.approx(1.0)


def test_gamma_and_lambda_landau_zener(lz):
    assert gamma_bound(lz.hamiltonian, 2) == pytest.approx(1.0)
    sched = AQCSchedule(10.0, -1.0, 1.0)
    # ‖β‖₁ peaks at 2 on the endpoints and dominates every derivative term
    assert aqc_lambda(lz.hamiltonian, sched, 1) == pytest.approx(2.0)


def test_sequence_matches_dense_exponentials(lz):
    sched = AQCSchedule(1.5, -1.0, 1.0)
    seq = build_aqc_sequence(lz.hamiltonian, sched, LTSConfig(k=1, r=3))
    assert seq.n_factors == 2 * 2 * 3

    u = np.eye(2, dtype=complex)
    paulis = lz.hamiltonian.paulis
    for factor in seq.factors():
        assert isinstance(factor, PauliRotation)
        u = expm_hermitian(paulis[factor.term].to_dense(), factor.angle) @ u
    assert is_unitary(u)
    assert_allclose(apply_aqc_sequence(seq, np.eye(2)), u, atol=1e-12)


@pytest.mark.parametrize("k, r", [(1, 4), (2, 3)])
def test_factor_count_is_exact(lz, k, r):
    seq = build_aqc_sequence(lz.hamiltonian, AQCSchedule(2.0, -1.0, 1.0), LTSConfig(k=k, r=r))
    n_terms = len(lz.hamiltonian.paulis)
    assert seq.n_factors == 2 * n_terms * 5 ** (k - 1) * r
    assert len(list(seq.factors())) == seq.n_factors


def test_identity_term_is_a_phase():
    from cdkit.models import grover
    spec = grover(2)
    seq = build_aqc_sequence(spec.hamiltonian, AQCSchedule(1.0, 0.05, 0.95), LTSConfig(k=1, r=2))
    out = apply_aqc_sequence(seq, np.eye(4))
    assert is_unitary(out)


def test_gate_cost_is_sum_of_one_term_rotations(lz):
    sched = AQCSchedule(1.0, -1.0, 1.0)
    seq = build_aqc_sequence(lz.hamiltonian, sched, LTSConfig(k=1, r=3))
    model = GateCostModel(n_terms=1, h_one_norm=lambda _: 1.0, dh_one_norm=lambda _: 1.0, epsilon_tilde=1e-3)
    expected = sum(model.cost(f.angle, 1.0) for f in seq.factors())
    assert aqc_gate_cost(seq, epsilon_tilde=1e-3) == expected


def test_gate_bound_grows_as_gap_closes():
    wide = aqc_gate_bound(2, 1, 2.0, 1.0, 0.1, 1.0)
    narrow = aqc_gate_bound(2, 1, 2.0, 1.0, 0.1, 0.5)
    assert narrow / wide == pytest.approx(2.0 ** (2.5 * 1.5))


def test_run_records_parameters(lz, lz_path):
    result = run_aqc(lz, T=2.0, epsilon=0.1, r=20, path=lz_path, seed=5)
    assert result.pipeline == "aqc"
    assert result.params["T"] == 2.0
    assert result.params["r"] == 20
    assert result.params["n_factors"] == 2 * 2 * 20
    assert result.params["gap"] == pytest.approx(2.0)
    assert result.gate_count > 0
    assert result.seed == 5


def test_default_time_uses_reichardt_rule(lz, lz_path):
    result = run_aqc(lz, epsilon=0.3, C_T=2.0, path=lz_path, r=10)
    # Γ = 1, Δ = 2, K = 2k = 2
    assert result.params["T"] == pytest.approx(reichardt_time(0.3, 2.0, 1.0, 2, 2.0))


def test_longer_evolution_is_more_adiabatic(lz, lz_path):
    fast = run_aqc(lz, T=1.0, epsilon=0.1, path=lz_path)
    slow = run_aqc(lz, T=50.0, epsilon=0.1, path=lz_path)
    assert slow.sqrt_infidelity < fast.sqrt_infidelity
    assert slow.sqrt_infidelity < 0.05


@pytest.mark.slow
def test_matched_time_reaches_target(lz, lz_path):
    result, converged = matched_aqc(lz, 0, 0.1, path=lz_path)
    assert converged
    assert result.sqrt_infidelity <= 0.1


@pytest.mark.slow
def test_compare_table(lz):
    frame = compare_cd_aqc(lz, [0.3, 0.1])
    assert list(frame["epsilon"]) == [0.3, 0.1]
    assert {"cd_gate_count", "aqc_gate_count", "aqc_T", "bisection_converged", "error"} <= set(frame.columns)
    assert (frame["error"] == "").all()


@pytest.mark.slow
def test_long_evolution_converges(lz, lz_path):
    result = run_aqc(lz, T=320.0, epsilon=0.1, path=lz_path)
    assert result.sqrt_infidelity < 1e-2
