import logging
from dataclasses import replace
from typing import List, Optional

import numpy as np
import pandas as pd

from ibclab.models.polaron import (
    G_CONTINUUM_RTOL,
    PolaronConfig,
    PolaronSetting,
    attractive_experiment,
    bounded_below_report,
    build_polaron,
    dtn_continuum_bound,
    local_b_estimate,
    pointwise_robin_relation,
    polaron_invariance_report,
    polaron_sector_dtn,
    refinement_study,
)
from ibclab.routers.base import RunContext, SuiteOutcome, SuiteRouter
from ibclab.routers.relations import repulsive_cosine
from ibclab.schemas.report import CheckRecord
from ibclab.services.ibc_core import check_assumptions, dirichlet_op, domain_vector
from ibclab.services.numkernel import hermitian_eig, lowest_eigenvalue
from ibclab.services.realization import relative_deviation
from ibclab.services.relations import (
    DIRICHLET_IBC,
    assemble_hr,
    default_classification_lambda,
    hr_constraint,
    hr_resolvent,
    s_op,
)
from ibclab.services.robin import BoundaryParams

logger = logging.getLogger(__name__)

router = SuiteRouter(tags=["polaron"])

POLARON_LAMBDA = -1.0
DTN_SLACK = 1.2
G_NORM_CEILING = 0.55
# h-halving brackets for the O(h) boundary-trace stencil
B_RATIO_BRACKET = (1.5, 3.0)


def _max_eig(m) -> float:
    values, _ = hermitian_eig(0.5 * (m + m.H), tol=1e-8)
    return float(values[-1])


def _smooth_boundary_vector(ps: PolaronSetting) -> np.ndarray:
    """exp(-x^2) on the n = 1 boundary block, zero elsewhere."""
    phi = np.zeros(ps.setting.n_boundary, dtype=complex)
    phi[ps.boundary_slice(1)] = np.exp(-ps.config.grid**2)
    return phi


def b_estimate_ratio(cfg: PolaronConfig) -> float:
    """Deviation of the local trace stencil at h over the one at h/2, for v = (0, phi)."""
    deviations = []
    for level in (replace(cfg, n_max=1), replace(cfg, n_max=1).refined()):
        ps = build_polaron(level)
        v = domain_vector(ps.setting, np.zeros(ps.setting.n), _smooth_boundary_vector(ps))
        deviations.append(local_b_estimate(ps, v, 1)[1])
    logger.debug("Trace stencil deviations %s", deviations)
    return deviations[0] / deviations[1]


def _sector_checks(ps: PolaronSetting, tol: float, outcome: SuiteOutcome):
    lam = POLARON_LAMBDA
    for n in range(ps.config.n_max):
        def nonpositive(n=n):
            top = _max_eig(polaron_sector_dtn(ps, lam, n))
            return CheckRecord.from_residual(
                f"dtn_nonpositive_{n}", "dtn-nonpositive", max(top, 0.0), tol, detail=f"max eigenvalue {top:.3e}",
            )

        def bounded(n=n):
            ratio = polaron_sector_dtn(ps, lam, n).norm() / dtn_continuum_bound(n, lam)
            return CheckRecord.from_residual(
                f"dtn_bound_{n}", "dtn-sector-bound", ratio, DTN_SLACK, detail="norm over continuum bound",
            )

        outcome.guard(f"dtn_nonpositive_{n}", "dtn-nonpositive", nonpositive)
        outcome.guard(f"dtn_bound_{n}", "dtn-sector-bound", bounded)

    outcome.guard("g_norm", "dirichlet-norm-bound", lambda: CheckRecord.from_residual(
        "g_norm", "dirichlet-norm-bound", dirichlet_op(ps.setting, lam).norm(), G_NORM_CEILING,
    ))


def refinement_checks(table: pd.DataFrame) -> List[CheckRecord]:
    """Gates on a refinement_study table: G approaches its continuum norm, T stays under the slack bound."""
    records = []
    for sector, rows in table.groupby("sector", sort=True):
        rows = rows.sort_values("n_x")
        errors = (rows["g_norm"] - rows["g_continuum"]).abs() / rows["g_continuum"]
        converging = bool((errors.diff().dropna() <= 0).all()) and errors.iloc[-1] <= G_CONTINUUM_RTOL
        records.append(CheckRecord.from_flag(
            f"g_refinement_{sector}", "dirichlet-norm-bound", converging,
            detail="relative errors " + ", ".join(f"{e:.4f}" for e in errors)
                   + f" against {rows['g_continuum'].iloc[0]:.5f}",
        ))
        ratio = float((rows["t_norm"] / rows["t_bound"]).max())
        records.append(CheckRecord.from_residual(
            f"t_refinement_{sector}", "dtn-sector-bound", ratio, DTN_SLACK,
            detail=f"max norm over continuum bound at n_x {', '.join(str(n) for n in rows['n_x'])}",
        ))
    return records


def _weyl_nonpositive(ps: PolaronSetting, tol: float, dirichlet_bottom: Optional[float] = None) -> CheckRecord:
    if dirichlet_bottom is None:
        lam = default_classification_lambda(ps.setting)
    else:
        lam = dirichlet_bottom - 1.0
    S = s_op(ps.setting, lam)
    top = _max_eig(S)
    return CheckRecord.from_residual(
        "weyl_nonpositive", "weyl-nonpositive", max(top, 0.0), tol * max(1.0, S.norm()),
        detail=f"lambda={lam:.6g} max eigenvalue {top:.3e}",
    )


def _pointwise_robin(ps: PolaronSetting, tol: float, resolvent_tol: float, outcome: SuiteOutcome):
    relation, rescaled = pointwise_robin_relation(ps, repulsive_cosine, lambda x: 1.0 - repulsive_cosine(x))
    s = rescaled.setting
    realized = None

    def hermitian():
        nonlocal realized
        realized = assemble_hr(s, relation)
        return CheckRecord.from_residual("pointwise_hermitian", "pointwise-robin", realized.hermiticity(), tol)

    outcome.guard("pointwise_hermitian", "pointwise-robin", hermitian)
    if realized is None:
        return

    def resolvent():
        lam = lowest_eigenvalue(realized.matrix, tol=1e-6) - 1.0
        deviation = relative_deviation(hr_resolvent(s, relation, lam), hr_constraint(s, relation).resolvent(lam))
        return CheckRecord.from_residual(
            "pointwise_resolvent", "generalized-ibc-resolvent", deviation, resolvent_tol, detail=f"lambda={lam:.6g}",
        )

    outcome.guard("pointwise_resolvent", "generalized-ibc-resolvent", resolvent)


@router.suite("polaron_bounds")
def polaron_bounds_suite(ctx: RunContext) -> SuiteOutcome:
    ps, tol = ctx.polaron, ctx.tol
    outcome = SuiteOutcome()
    assumptions = check_assumptions(ps.setting, tol)
    outcome.checks.extend(
        record.model_copy(update={"name": f"assumption_{name}"}) for name, record in assumptions.clauses.items()
    )
    _sector_checks(ps, tol, outcome)

    dirichlet_bottom = None
    for label, p in (("dirichlet", DIRICHLET_IBC), ("repulsive", BoundaryParams.symmetric(-1.0, 2.0))):
        report = bounded_below_report(ps, p, tol, ctx.config.resolvent_tolerance)
        if p is DIRICHLET_IBC:
            dirichlet_bottom = report.config.get("bottom")
        outcome.checks.extend(r.model_copy(update={"name": f"{r.name}_{label}"}) for r in report.checks)
        if report.error:
            outcome.checks.append(CheckRecord(
                name=f"bounded_below_{label}", anchor="polaron-ibc-self-adjoint", passed=False, error=report.error,
            ))

    outcome.guard("weyl_nonpositive", "weyl-nonpositive", lambda: _weyl_nonpositive(ps, tol, dirichlet_bottom))
    outcome.checks.extend(polaron_invariance_report(ps, POLARON_LAMBDA, tol).checks)
    _pointwise_robin(ps, tol, ctx.config.resolvent_tolerance, outcome)

    def trace_stencil():
        ratio = b_estimate_ratio(ps.config)
        low, high = B_RATIO_BRACKET
        return CheckRecord.from_flag(
            "b_estimate_ratio", "trace-stencil-convergence", low <= ratio <= high, detail=f"ratio {ratio:.4f}",
        )

    outcome.guard("b_estimate_ratio", "trace-stencil-convergence", trace_stencil)
    table = refinement_study(ps.config, POLARON_LAMBDA)
    outcome.checks.extend(refinement_checks(table))
    outcome.table = table
    return outcome


@router.suite("polaron_experiment")
def polaron_experiment_suite(ctx: RunContext) -> SuiteOutcome:
    report = attractive_experiment(ctx.polaron, ctx.config.attractive_c)
    return SuiteOutcome(checks=report.checks)
