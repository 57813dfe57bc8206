"""Tests for the end-to-end counterdiabatic pipeline and the per-lemma checks."""

import math

import pytest

from cdkit.cd import path_inputs, run_cd, select_parameters, verify_lemma2, verify_lemma3, verify_lemma4
from cdkit.costs import select_r
from cdkit.harness import recheck_parameters
from cdkit.operators import track_path
from cdkit.quadrature import build_scheme, discrete_weight_sum, select_M, weight_sum_remainder_bound


def test_path_inputs_landau_zener(lz_path):
    inputs = path_inputs(lz_path, 0)
    assert inputs["gap"] == pytest.approx(2.0)
    assert inputs["dH_norm_n1"] == pytest.approx(2.0)


def test_parameter_selection_landau_zener(lz_path):
    sel = select_parameters(lz_path, 0, 0.1, q=2, k=1)
    assert sel["params"].eta == pytest.approx(math.sqrt(0.2), rel=1e-9)
    assert sel["params"].a == pytest.approx(10.5, abs=0.1)
    assert sel["M"] == select_M(2, sel["params"].a, 0.1, sel["H_norm_max"], sel["dH_norm_n1"], sel["params"].eta)
    assert sel["r"] == select_r(1, sel["bounds"].lambda_tilde, 2.0, 0.1)
    assert 500 < sel["M"] < 700
    assert 600 < sel["r"] < 800
    assert sel["overrides"] == {}


def test_overrides_replace_rules(lz_path):
    sel = select_parameters(lz_path, 0, 0.1, q=2, k=1, overrides={"M": 12, "r": 5, "eta": None})
    assert sel["M"] == 12
    assert sel["r"] == 5
    assert sel["overrides"] == {"M": 12, "r": 5}


def test_constant_hamiltonian_needs_no_gates(constant_h):
    result = run_cd(constant_h, epsilon=0.1)
    assert result.gate_count == 0
    assert result.sqrt_infidelity == pytest.approx(0.0, abs=1e-12)
    assert result.params == {"M": 0, "r": 0}
    assert result.margins["end_to_end"] == math.inf


def test_small_run_records_parameters(lz, lz_path):
    result = run_cd(lz, epsilon=0.3, q=1, k=1, path=lz_path, overrides={"M": 16, "r": 40}, seed=3)
    assert result.ok
    assert result.params["M"] == 16
    assert result.params["r"] == 40
    assert result.overrides == {"M": 16, "r": 40}
    assert result.params["n_brotations"] == 2 * (2 * 16 * 2) * 40
    assert result.gate_count > 0
    assert 0.0 <= result.sqrt_infidelity <= 1.0
    assert recheck_parameters(result) == {}

    row = result.to_row()
    assert row["pipeline"] == "cd"
    assert row["seed"] == 3
    assert "margin_end_to_end" in row


def test_regularised_transport_within_epsilon(lz_path):
    check = verify_lemma2(lz_path, 0, 0.1)
    assert check.lemma == "2"
    assert check.holds
    assert check.margin >= 1.0


@pytest.mark.slow
@pytest.mark.parametrize("path_fixture", ["lz_path", "small_tfim_path"])
@pytest.mark.parametrize("epsilon", [0.1, 0.03, 0.01])
def test_regularised_transport_epsilon_grid(path_fixture, epsilon, request):
    path = request.getfixturevalue(path_fixture)
    check = verify_lemma2(path, 0, epsilon)
    assert check.measured <= epsilon
    assert check.margin >= 1.0


def test_quadrature_error_within_epsilon(lz_path):
    check = verify_lemma3(lz_path, 0, 0.1, q=2)
    assert check.holds
    assert check.params["q"] == 2


@pytest.mark.slow
@pytest.mark.parametrize("q", [0, 2])
@pytest.mark.parametrize("epsilon", [0.1, 0.03])
def test_quadrature_error_epsilon_grid(lz_path, q, epsilon):
    check = verify_lemma3(lz_path, 0, epsilon, q=q)
    assert check.measured <= epsilon
    eta, a, M = check.params["eta"], check.params["a"], check.params["M"]
    approx, exact = discrete_weight_sum(build_scheme(eta, a, M, q))
    remainder = weight_sum_remainder_bound(eta, a, M, q)
    assert abs(approx - exact) <= remainder <= epsilon


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2])
def test_product_formula_error_within_epsilon(lz_path, k):
    check = verify_lemma4(lz_path, 0, 0.1, q=2, k=k)
    assert check.holds
    assert check.params["k"] == k
    assert check.params["r"] == select_parameters(lz_path, 0, 0.1, 2, k)["r"]


@pytest.mark.slow
def test_landau_zener_end_to_end(lz):
    result = run_cd(lz, epsilon=0.1, q=2, k=1, verify=True)
    assert result.sqrt_infidelity <= 0.3
    assert result.margins["end_to_end"] >= 1.0
    for lemma in ("lemma2", "lemma3", "lemma4"):
        assert result.margins[lemma] >= 1.0
    assert result.gate_count > 0
    assert result.params["theorem_bound"] > 0


@pytest.mark.slow
def test_tfim_end_to_end(small_tfim):
    path = track_path(small_tfim.hamiltonian)
    result = run_cd(small_tfim, epsilon=0.2, path=path)
    assert result.sqrt_infidelity <= 0.6


@pytest.mark.slow
@pytest.mark.parametrize("model_fixture", ["lz", "small_tfim"])
def test_epsilon_sweep_tightens_infidelity(model_fixture, request):
    model = request.getfixturevalue(model_fixture)
    path = track_path(model.hamiltonian)
    infidelities = []
    for epsilon in (0.3, 0.1, 0.03):
        result = run_cd(model, epsilon=epsilon, q=2, k=1, path=path)
        assert result.sqrt_infidelity <= 3 * epsilon
        assert result.margins["end_to_end"] >= 1.0
        infidelities.append(result.sqrt_infidelity)
    assert infidelities == sorted(infidelities, reverse=True)
