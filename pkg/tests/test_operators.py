"""Tests for cdkit.operators."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import unitary_group

from cdkit.errors import CapabilityError, DomainError, GaplessError
from cdkit.operators import (
    LCUHamiltonian,
    PauliString,
    Schedule,
    derivative_operator,
    expm_hermitian,
    is_unitary,
    min_gap,
    norms,
    projector,
    spectral_norm,
    sqrt_infidelity,
    trace_distance,
    track_path,
)

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)


# =============================================================================
# PAULI STRINGS
# =============================================================================

@pytest.mark.parametrize("a, b, phase, product", [
    ("X", "Y", 1j, "Z"),
    ("Y", "X", -1j, "Z"),
    ("ZZ", "XI", 1j, "YZ"),
    ("XYZ", "XYZ", 1, "III"),
])
def test_pauli_product(a, b, phase, product):
    got_phase, got = PauliString(a) * PauliString(b)
    assert got_phase == pytest.approx(phase)
    assert got == PauliString(product)
    assert_allclose(PauliString(a).to_dense() @ PauliString(b).to_dense(), got_phase * got.to_dense())


@pytest.mark.parametrize("label", ["X", "Y", "Z", "XYZ", "IZY", "YYI"])
def test_pauli_apply_matches_dense(label, rng):
    p = PauliString(label)
    dim = 2 ** p.n_qubits
    state = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    assert_allclose(p.apply(state), p.to_dense() @ state, atol=1e-14)

    stack = rng.normal(size=(dim, 3)) + 1j * rng.normal(size=(dim, 3))
    assert_allclose(p.apply(stack), p.to_dense() @ stack, atol=1e-14)


def test_pauli_rejects_bad_labels():
    with pytest.raises(DomainError):
        PauliString("XQ")
    with pytest.raises(DomainError):
        PauliString("")
    with pytest.raises(DomainError):
        PauliString("X") * PauliString("XX")


# =============================================================================
# HAMILTONIANS
# =============================================================================

def test_dense_form_matches_pauli_sum(lz):
    h = lz.hamiltonian
    for lam in (-1.0, -0.3, 0.0, 0.7, 1.0):
        expected = lam * PauliString("Z").to_dense() + PauliString("X").to_dense()
        assert_allclose(h.to_dense(lam), expected)
        assert_allclose(h.pauli_sum(lam), expected)
    assert h.one_norm(0.5) == pytest.approx(1.5)
    assert h.derivative_one_norm(0.5) == pytest.approx(1.0)


def test_outside_domain_raises(lz):
    with pytest.raises(DomainError):
        lz.hamiltonian.to_dense(1.5)


def test_lambda_z_energies(commuting_h):
    for lam in (0.5, 1.0, 1.5):
        assert_allclose(np.linalg.eigvalsh(commuting_h.to_dense(lam)), [-lam, lam])
    assert not commuting_h.is_constant


def test_constant_hamiltonian_flag(constant_h):
    assert constant_h.is_constant
    assert_allclose(constant_h.derivative(0.5), np.zeros((2, 2)))


def test_coefficient_shape_mismatch():
    with pytest.raises(DomainError):
        LCUHamiltonian(("X", "Z"), [1.0], [0.0, 1.0], Schedule.linear(), (0.0, 1.0))


def test_schedule_missing_derivative():
    sched = Schedule.from_derivatives([np.sin, np.cos], name="sine")
    assert sched.derivative(0.0, 1) == pytest.approx(1.0)
    with pytest.raises(CapabilityError):
        sched.derivative(0.0, 2)
    with pytest.raises(CapabilityError):
        sched.require_order(3)


def test_expm_hermitian_is_unitary(lz):
    u = expm_hermitian(lz.hamiltonian.to_dense(0.4), 1.3)
    assert is_unitary(u)


# =============================================================================
# SPECTRAL TRACKING
# =============================================================================

def test_unsorted_grid_raises(lz):
    with pytest.raises(DomainError):
        track_path(lz.hamiltonian, [0.0, -0.5, 0.5])


def test_landau_zener_min_gap(lz_path):
    assert min_gap(lz_path, 0) == pytest.approx(2.0, abs=1e-12)


def test_gaps_follow_closed_form(lz, lz_path):
    assert_allclose(lz_path.gaps(0), lz.gap_formula(lz_path.grid), atol=1e-12)
    with pytest.raises(DomainError):
        lz_path.gaps(2)


def test_eigensystem_off_grid_keeps_tracked_order(lz_path):
    energies, vectors = lz_path.eigensystem(0.123)
    assert energies[0] < energies[1]
    assert_allclose(energies, [-np.hypot(0.123, 1.0), np.hypot(0.123, 1.0)], atol=1e-12)
    j = int(np.argmin(np.abs(lz_path.grid - 0.123)))
    assert abs(np.vdot(lz_path.state(j, 0), vectors[:, 0])) > 0.9


def test_tracked_states_are_continuous(lz_path):
    overlaps = [
        abs(np.vdot(lz_path.state(j, 0), lz_path.state(j + 1, 0)))
        for j in range(lz_path.n_points - 1)
    ]
    assert min(overlaps) > 0.9


def test_degenerate_level_is_gapless():
    h = LCUHamiltonian(("ZZ",), [1.0], [0.0], Schedule.linear(), (0.0, 1.0), name="zz")
    path = track_path(h, np.linspace(0.0, 1.0, 5))
    with pytest.raises(GaplessError):
        min_gap(path, 0)


# =============================================================================
# NORMS AND DISTANCES
# =============================================================================

def test_norm_of_identity(lz_path):
    eye = np.eye(2)
    assert norms(eye, lz_path, p=1) == pytest.approx(2.0)
    assert norms(eye, lz_path, p=np.inf) == pytest.approx(1.0)
    assert norms(eye, lz_path, n=0, p=2) == pytest.approx(np.sqrt(2.0))


def test_norm_of_lambda_identity(lz_path):
    family = lambda lam: lam * np.eye(2)  # noqa: E731
    assert norms(family, lz_path, p=1) == pytest.approx(1.0, rel=1e-10)
    assert norms(family, lz_path, p=np.inf) == pytest.approx(1.0)


def test_derivative_norm_on_level(lz_path):
    assert norms(derivative_operator(lz_path.hamiltonian), lz_path, 0, p=1) == pytest.approx(2.0)


def test_norm_rejects_bad_p(lz_path):
    with pytest.raises(DomainError):
        norms(np.eye(2), lz_path, p=0)


@pytest.mark.parametrize("psi, phi, expected", [
    (KET0, KET0, 0.0),
    (KET0, KET1, 1.0),
    (KET0, PLUS, 0.7071068),
])
def test_sqrt_infidelity(psi, phi, expected):
    assert sqrt_infidelity(psi, phi) == pytest.approx(expected, abs=1e-7)


def test_sqrt_infidelity_ignores_global_phase():
    assert sqrt_infidelity(PLUS, np.exp(0.8j) * PLUS) == pytest.approx(0.0, abs=1e-8)


def test_sqrt_infidelity_rejects_unnormalized():
    with pytest.raises(DomainError):
        sqrt_infidelity(np.array([1.0, 1.0]), KET0)


def test_trace_distance_of_pure_states():
    for psi, phi in ((KET0, KET1), (KET0, PLUS), (PLUS, PLUS)):
        assert trace_distance(projector(psi), projector(phi)) == pytest.approx(sqrt_infidelity(psi, phi), abs=1e-12)


# =============================================================================
# RANDOMISED PROPERTIES
# =============================================================================

def _random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _random_hermitian(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.5 * (g + g.conj().T)
    return h / spectral_norm(h)


def _nuclear_norm(matrix):
    return float(np.sum(np.linalg.svd(matrix, compute_uv=False)))


def test_telescoping_on_random_unitaries(rng):
    for _ in range(100):
        u1, u2 = unitary_group.rvs(8, size=2, random_state=rng)
        v1 = expm_hermitian(_random_hermitian(rng, 8), rng.uniform(0.0, 0.5)) @ u1
        v2 = expm_hermitian(_random_hermitian(rng, 8), rng.uniform(0.0, 0.5)) @ u2
        lhs = spectral_norm(u1 @ u2 - v1 @ v2)
        assert lhs <= spectral_norm(u1 - v1) + spectral_norm(u2 - v2) + 1e-12


def test_trace_norm_holder_on_random_pairs(rng):
    for dim in (2, 5, 8):
        for _ in range(30):
            o = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            q = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            assert _nuclear_norm(o @ q) <= spectral_norm(o) * _nuclear_norm(q) * (1 + 1e-12)


def test_trace_distance_is_half_nuclear_norm(rng):
    for _ in range(20):
        psi, phi = _random_state(rng, 8), _random_state(rng, 8)
        rho = 0.7 * projector(psi) + 0.3 * projector(_random_state(rng, 8))
        sigma = projector(phi)
        assert trace_distance(rho, sigma) == pytest.approx(0.5 * _nuclear_norm(rho - sigma), abs=1e-12)


def test_sqrt_infidelity_below_euclidean_distance(rng):
    for _ in range(100):
        psi = _random_state(rng, 8)
        phi = psi + rng.uniform(0.0, 1.0) * _random_state(rng, 8)
        phi = phi / np.linalg.norm(phi)
        measured = sqrt_infidelity(psi, phi)
        assert 0.0 <= measured <= np.linalg.norm(psi - phi) + 1e-12
        assert measured == pytest.approx(trace_distance(projector(psi), projector(phi)), abs=1e-10)


@pytest.mark.parametrize("n_qubits", [1, 4, 8])
def test_eigensystems_of_random_hermitian(n_qubits, rng):
    dim = 2 ** n_qubits
    h = LCUHamiltonian(
        paulis=("I" * n_qubits,),
        initial=[0.0],
        problem=[0.0],
        schedule=Schedule.linear(),
        domain=(0.0, 1.0),
        dense_initial=_random_hermitian(rng, dim),
        dense_problem=np.zeros((dim, dim)),
        name="random",
    )
    path = track_path(h, grid=[0.0, 1.0])
    dense = h.to_dense(0.5)
    eye = np.eye(dim)
    for j in range(path.n_points):
        energies, vectors = path.energies[j], path.vectors[j]
        assert spectral_norm(dense @ vectors - vectors * energies) <= 1e-10
        assert spectral_norm(vectors.conj().T @ vectors - eye) <= 1e-10
    assert is_unitary(expm_hermitian(dense, 3.0))
