"""Tests for the Lie-Trotter-Suzuki gate sequences."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cdkit.agp import AGPParams, ordered_exp_reference
from cdkit.errors import DomainError
from cdkit.lts import (
    BRotation,
    HEvolution,
    LTSConfig,
    build_sequence,
    dense_product,
    exponential_identity_error,
    first_order_blocks,
    first_order_segment,
    ordered_product,
    s_coefficient,
    segment_count_formula,
    sequence_unitary,
)
from cdkit.operators import expm_hermitian, is_unitary, spectral_norm
from cdkit.quadrature import assemble_discrete_agp, build_scheme

TERMS = ([-1.0, -0.3, 0.3, 1.0], [-0.2, -0.1, 0.1, 0.2])


def test_s_coefficient_values():
    assert s_coefficient(1) == pytest.approx(0.414490, abs=1e-6)
    values = [s_coefficient(k) for k in range(1, 8)]
    assert all(v < 0.5 for v in values)
    assert values[-1] == pytest.approx(1.0 / 3.0, abs=0.02)
    with pytest.raises(DomainError):
        s_coefficient(0)


def test_config_validation():
    assert LTSConfig(k=3, r=2).blocks_per_segment == 25
    with pytest.raises(DomainError):
        LTSConfig(k=0, r=1)
    with pytest.raises(DomainError):
        LTSConfig(k=1, r=0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_suzuki_blocks_cover_step(k):
    blocks = first_order_blocks(k, 0.25, 0.5)
    assert len(blocks) == 5 ** (k - 1)
    assert sum(step for _, step in blocks) == pytest.approx(0.5)
    assert blocks[0][0] == 0.25
    for (start, step), (next_start, _) in zip(blocks, blocks[1:]):
        assert start + step == pytest.approx(next_start)


def test_single_term_structure():
    seg = first_order_segment(([0.5], [0.2]), 0.0, 0.4, cancel=True)
    assert list(seg.factors()) == [
        HEvolution(0.2, -0.5),
        BRotation(0.2, pytest.approx(0.04)),
        BRotation(0.2, pytest.approx(0.04)),
        HEvolution(0.2, 0.5),
    ]


def test_factor_counts():
    seq = build_sequence(TERMS, -1.0, 1.0, LTSConfig(k=2, r=3))
    n = len(TERMS[0])
    assert seq.n_blocks == 15
    assert seq.n_brotations == 2 * n * 15
    assert seq.n_hevolutions == 2 * n * 15
    assert seq.uncancelled().n_hevolutions == 4 * n * 15
    factors = list(seq.factors())
    assert sum(isinstance(f, BRotation) for f in factors) == seq.n_brotations
    assert sum(isinstance(f, HEvolution) for f in factors) == seq.n_hevolutions


def test_segment_count_formula():
    scheme = build_scheme(0.5, 10.0, 4, 2)
    seq = build_sequence(scheme, 0.0, 1.0, LTSConfig(k=2, r=3))
    assert seq.n_brotations == segment_count_formula(4, 2, 2, 3)


def test_cancelled_and_uncancelled_agree(lz):
    seq = build_sequence(TERMS, -1.0, 1.0, LTSConfig(k=2, r=2))
    h = lz.hamiltonian
    assert_allclose(dense_product(seq, h), dense_product(seq.uncancelled(), h), atol=1e-12)


def test_batched_product_matches_dense(lz, small_tfim):
    for spec, (lam_i, lam_f) in ((lz, (-1.0, 1.0)), (small_tfim, (0.05, 0.25))):
        seq = build_sequence(TERMS, lam_i, lam_f, LTSConfig(k=1, r=3))
        u = sequence_unitary(seq, spec.hamiltonian)
        assert is_unitary(u)
        assert_allclose(u, dense_product(seq, spec.hamiltonian), atol=1e-10)


def test_zero_step_is_identity(lz):
    seg = first_order_segment(TERMS, 0.3, 0.0)
    assert_allclose(dense_product(seg, lz.hamiltonian), np.eye(2), atol=1e-12)


def test_commuting_family_gives_identity(commuting_h):
    seq = build_sequence(TERMS, 0.5, 1.5, LTSConfig(k=1, r=4))
    assert_allclose(sequence_unitary(seq, commuting_h), np.eye(2), atol=1e-12)


def test_ordered_product_order(rng):
    mats = [expm_hermitian(np.diag(rng.normal(size=2)) + rng.normal() * np.array([[0, 1], [1, 0]]))
            for _ in range(5)]
    expected = mats[4] @ mats[3] @ mats[2] @ mats[1] @ mats[0]
    assert_allclose(ordered_product(np.stack(mats)), expected, atol=1e-12)


def test_exponential_identity(lz):
    o = lz.hamiltonian.to_dense(0.3)
    u = expm_hermitian(lz.hamiltonian.derivative(0.3), 0.7)
    assert exponential_identity_error(o, u) < 1e-12


def test_converges_to_discrete_ordered_exponential(lz_path):
    params = AGPParams(eta=1.0, a=5.0)
    scheme = build_scheme(params.eta, params.a, 4, 1)
    h = lz_path.hamiltonian
    reference = ordered_exp_reference(
        lambda lam: assemble_discrete_agp(lz_path, lam, params, scheme).matrix, h.lam_i, h.lam_f
    )
    errors = [
        spectral_norm(sequence_unitary(build_sequence(scheme, h.lam_i, h.lam_f, LTSConfig(k=1, r=r)), h) - reference)
        for r in (2, 8)
    ]
    assert errors[1] < errors[0] / 4


# =============================================================================
# ERROR ORDER
# =============================================================================

SEGMENT_STEPS = np.array([0.4, 0.2, 0.1, 0.05])
SEGMENT_START = -0.2


@pytest.fixture(scope="module")
def segment_setup(lz_path):
    params = AGPParams(eta=1.0, a=5.0)
    scheme = build_scheme(params.eta, params.a, 4, 1)

    def generator(lam):
        return assemble_discrete_agp(lz_path, lam, params, scheme).matrix

    references = [
        ordered_exp_reference(generator, SEGMENT_START, SEGMENT_START + dlam, tol=1e-10)
        for dlam in SEGMENT_STEPS
    ]
    return scheme, references


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2])
def test_single_segment_error_order(k, lz_path, segment_setup):
    scheme, references = segment_setup
    errors = []
    for dlam, reference in zip(SEGMENT_STEPS, references):
        seq = build_sequence(scheme, SEGMENT_START, SEGMENT_START + dlam, LTSConfig(k=k, r=1))
        errors.append(spectral_norm(sequence_unitary(seq, lz_path.hamiltonian) - reference))
    assert np.all(np.diff(errors) < 0)
    slope = np.polyfit(np.log(SEGMENT_STEPS), np.log(errors), 1)[0]
    assert slope == pytest.approx(2 * k + 1, abs=0.4)
