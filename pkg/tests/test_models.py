"""Tests for the benchmark model registry."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cdkit.errors import ConfigError, DomainError
from cdkit.models import MODELS, gap_integral, get_model, grover, tfim
from cdkit.operators import min_gap, track_path


def test_registry_names():
    assert set(MODELS) == {"landau_zener", "tfim", "grover"}


def test_unknown_model_lists_registry():
    with pytest.raises(ConfigError, match="Available models: grover, landau_zener, tfim"):
        get_model("heisenberg")


def test_bad_model_parameter():
    with pytest.raises(ConfigError):
        get_model("tfim", n_qubits=3, bogus=1)


def test_landau_zener_annotations(lz):
    assert lz.n_qubits == 1
    assert lz.lam_range == (-1.0, 1.0)
    assert lz.annotations["min_gap"] == 2.0


def test_landau_zener_gap_integral(lz_path):
    # ∫ (2√(λ²+1))^-3 dλ over [-1, 1] = 1/(4√2)
    assert gap_integral(lz_path, 0) == pytest.approx(1.0 / (4.0 * np.sqrt(2.0)), rel=1e-6)


@pytest.mark.parametrize("n_qubits", [2, 3, 4])
def test_grover_term_count(n_qubits):
    spec = grover(n_qubits)
    assert spec.n_terms == 2 ** (n_qubits + 1) - 1


def test_grover_min_gap():
    spec = grover(3)
    path = track_path(spec.hamiltonian)
    assert min_gap(path, 0) == pytest.approx(1.0 / np.sqrt(8.0), rel=1e-9)


def test_grover_gap_is_symmetric():
    path = track_path(grover(3).hamiltonian)
    assert_allclose(path.grid, 1.0 - path.grid[::-1], atol=1e-14)
    gaps = path.gaps(0)
    assert_allclose(gaps, gaps[::-1], atol=1e-12)
    assert np.argmin(gaps) == len(gaps) // 2


def test_grover_final_state_is_marked():
    spec = grover(2, marked=2, lam_range=(0.05, 1.0))
    path = track_path(spec.hamiltonian)
    assert abs(path.final_state(0)[2]) == pytest.approx(1.0, abs=1e-9)


def test_grover_rejects_bad_marked_index():
    with pytest.raises(DomainError):
        grover(2, marked=4)
    with pytest.raises(DomainError):
        grover(7)


def test_tfim_ground_state_at_start():
    spec = tfim(3, lam_range=(0.0, 0.5))
    path = track_path(spec.hamiltonian)
    assert path.energies[0, 0] == pytest.approx(-3.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    expected = np.kron(np.kron(minus, minus), minus)
    assert abs(np.vdot(expected, path.initial_state(0))) == pytest.approx(1.0, abs=1e-10)


def test_tfim_gap_formula_matches_spectrum(small_tfim):
    h = small_tfim.hamiltonian
    for lam in np.linspace(h.lam_i, h.lam_f, 5):
        energies = np.linalg.eigvalsh(h.to_dense(lam))
        assert small_tfim.gap_formula(lam) == pytest.approx(energies[1] - energies[0], abs=1e-8)


def test_tfim_size_limits():
    with pytest.raises(DomainError):
        tfim(1)
    with pytest.raises(DomainError):
        tfim(9)


def test_tfim_longitudinal_field_adds_terms():
    assert tfim(3, h_z=0.5).n_terms == tfim(3).n_terms + 3


def test_lam_range_list_is_accepted():
    spec = get_model("grover", n_qubits=2, lam_range=[0.1, 0.9])
    assert_allclose(spec.lam_range, (0.1, 0.9))
