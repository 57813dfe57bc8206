"""Tests for the piecewise Lagrange quadrature of the regularised AGP."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cdkit.agp import AGPParams, reg_trunc_agp, regularised_factor
from cdkit.errors import DomainError, PreconditionWarning
from cdkit.operators import track_path
from cdkit.quadrature import (
    assemble_discrete_agp,
    build_scheme,
    chebyshev_nodes,
    check_eta_precondition,
    discrete_factor,
    discrete_weight_sum,
    lagrange_error_bound,
    lagrange_weights,
    make_partition,
    select_M,
    summation_error,
    weight_sum_remainder_bound,
)


# =============================================================================
# PARTITION, NODES, WEIGHTS
# =============================================================================

@pytest.mark.parametrize("eta, a, M, q", [(0.5, 10.0, 8, 2), (0.07, 113.0, 40, 0), (2.0, 1.5, 3, 4)])
def test_partition_endpoints_and_growth(eta, a, M, q):
    tau = make_partition(eta, a, M, q)
    assert len(tau) == M + 1
    assert tau[0] == 0.0
    assert tau[-1] == a
    widths = np.diff(tau)
    assert np.all(widths > 0)
    assert np.all(np.diff(widths) >= -1e-12)


def test_partition_rejects_bad_arguments():
    with pytest.raises(DomainError):
        make_partition(0.5, 10.0, 0, 2)
    with pytest.raises(DomainError):
        make_partition(0.5, 10.0, 4, -1)
    with pytest.raises(DomainError):
        make_partition(-0.5, 10.0, 4, 2)


def test_chebyshev_nodes_inside_interval():
    nodes = chebyshev_nodes(1.0, 3.0, 3)
    assert len(nodes) == 4
    assert np.all(np.diff(nodes) > 0)
    assert nodes[0] > 1.0 and nodes[-1] < 3.0
    assert_allclose(nodes + nodes[::-1], 4.0)


def test_single_node_weight_is_one():
    assert_allclose(lagrange_weights([0.4], (0.0, 1.0)), [1.0])


def test_endpoint_nodes_give_trapezoid():
    assert_allclose(lagrange_weights([2.0, 5.0], (2.0, 5.0)), [0.5, 0.5])


def test_three_endpoint_nodes_give_simpson():
    assert_allclose(lagrange_weights([0.0, 0.5, 1.0], (0.0, 1.0)), [1 / 6, 2 / 3, 1 / 6])


@pytest.mark.parametrize("q", [0, 1, 2, 5])
def test_weights_sum_to_one(q):
    nodes = chebyshev_nodes(0.2, 0.9, q)
    assert np.sum(lagrange_weights(nodes, (0.2, 0.9))) == pytest.approx(1.0)


def test_coincident_nodes_raise():
    with pytest.raises(DomainError):
        lagrange_weights([0.3, 0.3], (0.0, 1.0))
    with pytest.raises(DomainError):
        lagrange_weights([0.1, 1.2], (0.0, 1.0))


def test_interpolation_error_within_remainder_bound():
    lo, hi, q = 0.0, 0.5, 2
    nodes = chebyshev_nodes(lo, hi, q)
    estimate = (hi - lo) * np.dot(lagrange_weights(nodes, (lo, hi)), np.exp(nodes))
    error = abs(estimate - np.expm1(hi))
    bound = lagrange_error_bound((lo, hi), q, np.exp(hi))
    assert bound == pytest.approx(0.5 ** 4 * np.exp(0.5) / 6)
    assert 0 < error <= bound


def test_scheme_shapes():
    scheme = build_scheme(0.5, 10.0, 6, 2)
    assert scheme.nodes.shape == (6, 3)
    assert scheme.n_terms == 36
    taus, bs = scheme.coefficients()
    assert len(taus) == 36
    assert np.all(np.diff(taus) > 0)
    assert_allclose(bs, -bs[::-1])
    terms = scheme.terms()
    assert [t.tau for t in terms] == pytest.approx(list(taus))
    assert terms[0].kappa == -6 and terms[-1].kappa == 6


# =============================================================================
# DISCRETE AGP
# =============================================================================

def test_weight_sum_within_remainder_bound():
    eta, a, M, q = 0.5, 10.0, 16, 2
    approx, exact = discrete_weight_sum(build_scheme(eta, a, M, q))
    assert abs(approx - exact) <= weight_sum_remainder_bound(eta, a, M, q)


def test_discrete_factor_converges_in_M():
    eta, a, q = 0.5, 20.0, 2
    omega = np.array([0.5, 1.0, 2.0])
    reference = regularised_factor(omega, eta, a)
    errors = [
        np.max(np.abs(discrete_factor(omega, build_scheme(eta, a, M, q)) - reference))
        for M in (8, 16, 32, 64)
    ]
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
    assert errors[-1] < errors[0] / 20


def test_discrete_agp_approaches_regularised(lz_path):
    params = AGPParams(eta=0.5, a=12.0)
    scheme = build_scheme(params.eta, params.a, 128, 3)
    for lam in (-0.5, 0.0, 0.6):
        discrete = assemble_discrete_agp(lz_path, lam, params, scheme).matrix
        assert_allclose(discrete, reg_trunc_agp(lz_path, lam, params).matrix, atol=1e-4)


def test_discrete_agp_rejects_mismatched_scheme(lz_path):
    scheme = build_scheme(0.5, 12.0, 8, 2)
    with pytest.raises(DomainError):
        assemble_discrete_agp(lz_path, 0.0, AGPParams(0.6, 12.0), scheme)


def test_commuting_family_discrete_agp_is_zero(commuting_h):
    path = track_path(commuting_h)
    params = AGPParams(0.5, 6.0)
    scheme = build_scheme(params.eta, params.a, 8, 2)
    assert_allclose(assemble_discrete_agp(path, 1.0, params, scheme).matrix, np.zeros((2, 2)), atol=1e-14)
    assert summation_error(path, params, scheme, 0) == pytest.approx(0.0, abs=1e-14)


def test_summation_error_shrinks_with_M(lz_path):
    params = AGPParams(eta=0.45, a=10.5)
    coarse = summation_error(lz_path, params, build_scheme(params.eta, params.a, 8, 2), 0)
    fine = summation_error(lz_path, params, build_scheme(params.eta, params.a, 64, 2), 0)
    assert fine < coarse


# =============================================================================
# PARAMETER RULES
# =============================================================================

def test_select_M_constant():
    assert select_M(q=0, a=1.0, epsilon=0.1, H_norm_inf_inf=1.0, dH_norm_n1=1.0, eta=0.01) == 327


def test_select_M_partition_branch():
    # e^{ηa/(q+2)} - 1 dominates when ηa is large
    assert select_M(q=0, a=1.0, epsilon=1.0, H_norm_inf_inf=1e-6, dH_norm_n1=1e-6, eta=20.0) == int(
        np.ceil(np.expm1(10.0))
    )


def test_select_M_rejects_bad_epsilon():
    with pytest.raises(DomainError):
        select_M(q=2, a=1.0, epsilon=2.0, H_norm_inf_inf=1.0, dH_norm_n1=1.0, eta=0.1)


def test_eta_precondition_warns():
    assert check_eta_precondition(0.5, 1.0)
    with pytest.warns(PreconditionWarning):
        assert not check_eta_precondition(2.0, 1.0)
