import numpy as np
import pandas as pd
import pytest

from ibclab.exceptions import ParameterError, SpectrumError
from ibclab.models.polaron import (
    G_CONTINUUM_RTOL,
    PolaronConfig,
    attractive_experiment,
    bounded_below_report,
    build_polaron,
    dtn_continuum_bound,
    g_continuum_norm,
    g_mu_norm,
    local_b_estimate,
    pointwise_robin_relation,
    polaron_invariance_report,
    polaron_sector_dtn,
    refinement_study,
)
from ibclab.routers.polaron import G_NORM_CEILING, b_estimate_ratio, refinement_checks
from ibclab.routers.relations import repulsive_cosine
from ibclab.services.ibc_core import check_assumptions, dirichlet_op, domain_vector
from ibclab.services.numkernel import LUFactor, hermitian_eig, lowest_eigenvalue
from ibclab.services.realization import relative_deviation
from ibclab.services.relations import (
    DIRICHLET_IBC,
    assemble_hr,
    default_classification_lambda,
    hr_constraint,
    hr_resolvent,
    rel_is_selfadjoint,
    s_op,
)
from ibclab.services.robin import assemble_ibc, ibc_constraint, ibc_resolvent


@pytest.mark.parametrize(
    "kwargs, error",
    [({"n_x": 3}, ParameterError), ({"n_max": 0}, ParameterError), ({"lambda0": 0.5}, SpectrumError),
     ({"laplacian_bc": "periodic"}, ParameterError)],
)
def test_config_validation(kwargs, error):
    with pytest.raises(error):
        PolaronConfig(**kwargs)


def test_sector_dimensions(small_polaron, two_sector_polaron):
    assert small_polaron.sector_dims == (8, 64)
    assert small_polaron.setting.n == 72
    assert small_polaron.setting.n_boundary == 8
    assert two_sector_polaron.sector_dims == (6, 36, 126)
    assert PolaronConfig().sector_dims() == (16, 256, 2176)
    assert PolaronConfig(n_x=16).refined().n_x == 31


def test_assumptions_hold(small_polaron):
    report = check_assumptions(small_polaron.setting, 1e-8)
    assert report.passed, report.flagged()


def test_dtn_blocks_are_nonpositive(two_sector_polaron):
    for n in range(2):
        block = polaron_sector_dtn(two_sector_polaron, -1.0, n)
        values, _ = hermitian_eig(0.5 * (block + block.H), tol=1e-8)
        assert values[-1] <= 1e-10


def test_dtn_rejects_positive_half_line(small_polaron):
    with pytest.raises(SpectrumError):
        polaron_sector_dtn(small_polaron, 1.0, 0)


def test_continuum_values():
    assert dtn_continuum_bound(0, -1.0) == pytest.approx(1 / (2 * np.sqrt(2)))
    assert g_continuum_norm(0, -1.0) == pytest.approx(2 ** (-7 / 4))
    assert g_mu_norm(1.0) == pytest.approx(0.5)


def test_invariance_report(two_sector_polaron):
    report = polaron_invariance_report(two_sector_polaron, -1.0)
    assert report.passed, [c.name for c in report.failed_checks]
    assert report.check("nilpotent").residual <= 1e-12
    for n in range(2):
        block = report.check(f"block_norm_{n}")
        assert block.gated and block.residual <= G_CONTINUUM_RTOL
    assert "block_norms_decrease" not in {c.name for c in report.checks}


def test_identification_raises_particle_number(small_polaron):
    s = small_polaron.setting
    X = dirichlet_op(s, -2.0) @ s.i_star
    assert np.abs(X.entries[small_polaron.sector_slice(0), :]).max() <= 1e-14 * X.norm()


def test_unit_sum_profile_keeps_setting(small_polaron):
    relation, ps = pointwise_robin_relation(small_polaron, repulsive_cosine, lambda x: 1 - repulsive_cosine(x))
    assert ps is small_polaron
    assert rel_is_selfadjoint(relation)
    assert assemble_hr(ps.setting, relation).hermiticity() <= 1e-8


def test_profile_rescales_identification(small_polaron):
    relation, ps = pointwise_robin_relation(small_polaron, np.full(8, 2.0), np.full(8, 1.0))
    assert ps is not small_polaron
    np.testing.assert_allclose(ps.setting.I.entries, small_polaron.setting.I.entries / 3.0)
    assert rel_is_selfadjoint(relation)


def test_profile_needs_grid_values(small_polaron):
    with pytest.raises(ParameterError):
        small_polaron.lift_grid_function(np.ones(5))


def test_dirichlet_ibc_bounded_below(small_polaron):
    report = bounded_below_report(small_polaron, DIRICHLET_IBC)
    assert report.error is None
    assert report.passed, [c.name for c in report.failed_checks]


def test_attractive_experiment_is_informational(small_polaron):
    report = attractive_experiment(small_polaron, 0.5)
    assert report.passed
    assert all(not check.gated for check in report.checks)
    with pytest.raises(ParameterError):
        attractive_experiment(small_polaron, 1.5)


def test_refinement_study_table():
    table = refinement_study(PolaronConfig(n_x=8), levels=2)
    assert list(table["n_x"]) == [8, 15]
    assert (table["t_max_eig"] <= 1e-10).all()
    assert (table["t_norm"] <= 1.2 * table["t_bound"]).all()
    assert list(table["g_norm"]) == pytest.approx([0.3097, 0.3057], rel=5e-3)
    records = refinement_checks(table)
    assert {r.name for r in records} == {"g_refinement_0", "t_refinement_0"}
    assert all(r.passed for r in records), [r.detail for r in records]


def test_sector_cap(monkeypatch):
    monkeypatch.setattr("ibclab.config.SECTOR_CAP", 100)
    with pytest.raises(ParameterError):
        build_polaron(PolaronConfig(n_x=8, n_max=2))


@pytest.mark.slow
def test_trace_stencil_converges_at_first_order():
    assert 1.5 <= b_estimate_ratio(PolaronConfig()) <= 3.0


@pytest.mark.slow
def test_desk_scale_g_norm():
    ps = build_polaron(PolaronConfig())
    assert dirichlet_op(ps.setting, -1.0).norm() <= G_NORM_CEILING


def _refinement_table(g_norms, t_norms):
    return pd.DataFrame({
        "n_x": [8, 15, 29], "sector": 0, "g_norm": g_norms, "g_continuum": 0.3,
        "t_norm": t_norms, "t_bound": 0.35,
    })


def test_refinement_checks_gate_diverging_norms():
    records = {r.name: r for r in refinement_checks(_refinement_table([0.31, 0.305, 0.302], [0.3, 0.3, 0.3]))}
    assert records["g_refinement_0"].passed and records["t_refinement_0"].passed
    records = {r.name: r for r in refinement_checks(_refinement_table([0.31, 0.32, 0.34], [0.3, 0.3, 0.3]))}
    assert not records["g_refinement_0"].passed
    records = {r.name: r for r in refinement_checks(_refinement_table([0.31, 0.305, 0.302], [0.3, 0.5, 0.6]))}
    assert not records["t_refinement_0"].passed


def test_weyl_function_is_nonpositive(small_polaron):
    S = s_op(small_polaron.setting, default_classification_lambda(small_polaron.setting))
    values, _ = hermitian_eig(0.5 * (S + S.H), tol=1e-8)
    assert values[-1] <= 1e-10 * max(1.0, S.norm())


def test_pointwise_robin_resolvent(small_polaron):
    relation, ps = pointwise_robin_relation(small_polaron, repulsive_cosine, lambda x: 1 - repulsive_cosine(x))
    lam = lowest_eigenvalue(assemble_hr(ps.setting, relation).matrix, tol=1e-6) - 1.0
    krein = hr_resolvent(ps.setting, relation, lam)
    assert relative_deviation(krein, hr_constraint(ps.setting, relation).resolvent(lam)) <= 1e-8


def test_trace_stencil_without_boundary_part(small_polaron):
    s = small_polaron.setting
    estimate, deviation = local_b_estimate(small_polaron, domain_vector(s, np.zeros(s.n), np.zeros(s.n_boundary)), 1)
    assert not estimate.any() and deviation == 0.0
    grid = small_polaron.config.grid
    f0 = np.zeros(s.n)
    f0[small_polaron.sector_slice(1)] = np.exp(-(grid[:, None] ** 2 + grid[None, :] ** 2)).ravel()
    estimate, deviation = local_b_estimate(small_polaron, domain_vector(s, f0, np.zeros(s.n_boundary)), 1)
    weights = s.dH.weights[small_polaron.boundary_slice(1)]
    assert deviation == pytest.approx(np.sqrt(np.sum(weights * np.abs(estimate) ** 2)))
    assert deviation > 0


def test_large_operator_paths_match_dense(small_polaron, monkeypatch):
    dense_matrix = assemble_ibc(small_polaron.setting, DIRICHLET_IBC).matrix
    bottom = lowest_eigenvalue(dense_matrix, tol=1e-6)
    lam = bottom - 1.0
    dense_resolvent = ibc_constraint(small_polaron.setting, DIRICHLET_IBC).resolvent(lam)

    monkeypatch.setattr("ibclab.config.DENSE_LIMIT", 16)
    s = build_polaron(small_polaron.config).setting
    assert LUFactor(lam - s.L).sparse
    realized = assemble_ibc(s, DIRICHLET_IBC)
    assert relative_deviation(realized.matrix, dense_matrix) <= 1e-10
    assert lowest_eigenvalue(realized.matrix, tol=1e-6) == pytest.approx(bottom, abs=1e-8)
    assert relative_deviation(ibc_constraint(s, DIRICHLET_IBC).resolvent(lam), dense_resolvent) <= 1e-9
    assert relative_deviation(ibc_resolvent(s, DIRICHLET_IBC, lam), dense_resolvent) <= 1e-8


@pytest.mark.slow
def test_trace_stencil_on_smooth_field_converges_at_first_order():
    deviations = []
    for cfg in (PolaronConfig(n_max=1), PolaronConfig(n_max=1).refined()):
        ps = build_polaron(cfg)
        f0 = np.zeros(ps.setting.n)
        f0[ps.sector_slice(1)] = np.exp(-(cfg.grid[:, None] ** 2 + cfg.grid[None, :] ** 2)).ravel()
        deviations.append(local_b_estimate(ps, domain_vector(ps.setting, f0, np.zeros(ps.setting.n_boundary)), 1)[1])
    assert 1.5 <= deviations[0] / deviations[1] <= 3.0
