import pickle
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ibclab.exceptions import DimensionMismatchError, RankError, SpectrumError
from ibclab.services.ibc_core import (
    apply_am,
    apply_b,
    apply_lm,
    apply_lm_rebased,
    check_assumptions,
    deficiency_indices,
    dirichlet_op,
    domain_vector,
    dtn_op,
    embed,
    embed_pairs,
    green_residual,
    pair_lift_dirichlet,
    rebase,
    resolvent,
    resolvent_factor,
    setting_from_arrays,
)
from ibclab.services.numkernel import ComplexMatrix, WeightedSpace, hermiticity_deviation
from ibclab.utils.random_settings import random_complex, random_setting


def _random_vector(s, rng):
    return domain_vector(s, random_complex(rng, s.n), random_complex(rng, s.n_boundary))


def test_scalar_setting_caches_g0(one_dim):
    assert_allclose(one_dim.G0.entries, [[-0.5]])
    assert_allclose(dirichlet_op(one_dim, 0.0).entries, [[-0.5]])


def test_lambda0_in_spectrum_is_rejected():
    with pytest.raises(SpectrumError):
        setting_from_arrays([[2.0]], [[1.0]], [[0.0]], [[-0.5]], 2.0)


def test_rank_deficient_a_is_rejected():
    with pytest.raises(RankError):
        setting_from_arrays(np.eye(2), np.zeros((1, 2)), np.zeros((2, 1)), [[0.0]], -1.0)


def test_dtn_scalar_value(one_dim):
    assert_allclose(dirichlet_op(one_dim, -2.0).entries, [[-0.25]])
    assert_allclose(dtn_op(one_dim, -2.0).entries, [[-0.25]])
    assert dtn_op(one_dim, one_dim.lambda0) is one_dim.T


def test_dirichlet_resolvent_identity(seeded):
    lam, mu = seeded.lambda0 + 1j, seeded.lambda0 - 0.5 + 2j
    G_lam, G_mu = dirichlet_op(seeded, lam), dirichlet_op(seeded, mu)
    rhs = (mu - lam) * (resolvent(seeded, mu) @ G_lam)
    assert (G_lam - G_mu - rhs).norm() <= 1e-10 * (1 + G_lam.norm())


def test_trace_is_left_inverse_of_lift(seeded, rng):
    lift = pair_lift_dirichlet(seeded, seeded.lambda0 + 1j)
    for _ in range(10):
        phi = random_complex(rng, seeded.n_boundary)
        assert_allclose(seeded.b_pair @ (lift @ phi), phi, atol=1e-10)


def test_dtn_hermitian_for_real_lambda(seeded):
    assert hermiticity_deviation(dtn_op(seeded, seeded.lambda0 - 0.7)) <= 1e-10


def test_embed_and_traces(seeded, rng):
    f0 = random_complex(rng, seeded.n)
    phi = random_complex(rng, seeded.n_boundary)
    zero_f, zero_phi = np.zeros(seeded.n), np.zeros(seeded.n_boundary)
    assert_allclose(embed(seeded, domain_vector(seeded, f0, zero_phi)), f0)
    assert_allclose(embed(seeded, domain_vector(seeded, zero_f, phi)), seeded.G0 @ phi)

    v = domain_vector(seeded, f0, zero_phi)
    assert_allclose(apply_lm(seeded, v), seeded.L @ f0)
    assert_allclose(apply_b(seeded, v), 0.0)
    assert_allclose(apply_am(seeded, v), seeded.A @ f0)

    w = domain_vector(seeded, zero_f, phi)
    assert_allclose(apply_lm(seeded, w), seeded.lambda0 * embed(seeded, w), atol=1e-12)


def test_rebase_preserves_vector_and_action(seeded, rng):
    v = _random_vector(seeded, rng)
    for mu in (seeded.lambda0 + 2j, seeded.lambda0 - 1.5):
        f0, phi = rebase(seeded, v, mu)
        rebuilt = f0 + dirichlet_op(seeded, mu) @ phi
        assert_allclose(rebuilt, embed(seeded, v), atol=1e-10)
        reference = apply_lm(seeded, v)
        assert np.linalg.norm(apply_lm_rebased(seeded, f0, phi, mu) - reference) <= 1e-10 * (
            1 + np.linalg.norm(reference)
        )
    f0, phi = rebase(seeded, v, seeded.lambda0)
    assert_allclose(f0, v.f0)


def test_green_residual_vanishes(seeded, rng):
    for _ in range(25):
        v, w = _random_vector(seeded, rng), _random_vector(seeded, rng)
        scale = (1 + np.linalg.norm(embed(seeded, v))) * (1 + np.linalg.norm(embed(seeded, w)))
        scale *= 1 + seeded.L.norm() + seeded.T.norm()
        assert abs(green_residual(seeded, v, w)) <= 1e-10 * scale


def test_domain_vector_shape_is_checked(seeded):
    with pytest.raises(DimensionMismatchError):
        domain_vector(seeded, np.zeros(seeded.n + 1), np.zeros(seeded.n_boundary))


def test_assumptions_pass_on_generated_settings(seeded, one_dim):
    assert check_assumptions(seeded, 1e-10).passed
    report = check_assumptions(one_dim, 1e-14)
    assert report.passed, report.flagged()


def test_assumptions_flag_non_hermitian_t():
    s = setting_from_arrays(np.diag([2.0, 3.0]), np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), 0.0)
    corrupted = replace(s, T=ComplexMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]), s.dH, s.dH))
    report = check_assumptions(corrupted)
    assert "T_hermitian" in report.flagged()
    assert not report.passed


def test_deficiency_indices_equal_boundary_dimension(seeded):
    assert deficiency_indices(seeded) == (seeded.n_boundary, seeded.n_boundary)


@pytest.mark.parametrize("seed", range(100))
def test_assumptions_on_sampled_settings(seed):
    s = random_setting(1000 + seed, n=6, n_boundary=2, weighted=seed % 2 == 0)
    report = check_assumptions(s, 1e-10)
    assert report.passed, report.flagged()


def test_resolvent_factors_are_cached_and_bounded(seeded, monkeypatch):
    monkeypatch.setattr("ibclab.config.FACTOR_CACHE", 2)
    first = resolvent_factor(seeded, 1j)
    assert resolvent_factor(seeded, 1j) is first
    resolvent_factor(seeded, 2j)
    resolvent_factor(seeded, 3j)
    assert len(seeded._factors) == 2
    assert resolvent_factor(seeded, 1j) is not first


def test_embed_pairs_matches_embedding(seeded, rng):
    pairs = ComplexMatrix(random_complex(rng, seeded.n + seeded.n_boundary, 3), WeightedSpace.unit(3), seeded.pair)
    assert_allclose(embed_pairs(seeded, pairs).entries, (seeded.embedding @ pairs).entries, atol=1e-12)
    with pytest.raises(DimensionMismatchError):
        embed_pairs(seeded, ComplexMatrix.identity(seeded.H))


def test_setting_pickles_without_factors(seeded):
    lam = seeded.lambda0 + 1j
    expected = dirichlet_op(seeded, lam)
    restored = pickle.loads(pickle.dumps(seeded))
    assert restored._factors == {}
    assert_allclose(dirichlet_op(restored, lam).entries, expected.entries, atol=1e-12)
