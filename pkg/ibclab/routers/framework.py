import logging
from typing import List

import numpy as np

from ibclab.exceptions import GammaUndefinedError, ResolventError, SingularMatrixError
from ibclab.models.moshinsky_yafaev import my_scalar_suite
from ibclab.routers.base import RunContext, SuiteOutcome, SuiteRouter
from ibclab.schemas.report import CheckRecord
from ibclab.schemas.run_config import ModelKind
from ibclab.services.ibc_core import (
    apply_lm,
    apply_lm_rebased,
    check_assumptions,
    deficiency_indices,
    domain_vector,
    green_form_residual,
    green_residual,
    rebase,
)
from ibclab.services.numkernel import ComplexMatrix, WeightedSpace, lowest_eigenvalue
from ibclab.services.realization import relative_deviation
from ibclab.services.relations import qbt_verify
from ibclab.services.robin import (
    BoundaryParams,
    assemble_ibc,
    check_symmetry_params,
    conjugate_domain_distance,
    delta_elimination_residual,
    gamma_domain_distance,
    hermiticity_of_ibc,
    ibc_constraint,
    ibc_resolvent,
    minimal_restriction_residual,
    perturbation_residual,
    relative_bound_report,
    robin_constraint,
    robin_dirichlet_pairs,
    robin_resolvent,
)
from ibclab.utils.random_settings import random_complex

logger = logging.getLogger(__name__)

router = SuiteRouter(tags=["framework"])

SCALAR_LAMBDAS = (-1.0, -4.0, -16 * np.pi**2)


@router.suite("assumptions")
def assumptions_suite(ctx: RunContext) -> SuiteOutcome:
    report = check_assumptions(ctx.setting, ctx.tol, ctx.config.lambda_values() or None)
    return SuiteOutcome(checks=list(report.clauses.values()))


@router.suite("green")
def green_suite(ctx: RunContext) -> SuiteOutcome:
    s, tol, rng = ctx.setting, ctx.tol, ctx.rng
    outcome = SuiteOutcome()
    samples = WeightedSpace.unit(ctx.config.samples, "samples")
    left = ComplexMatrix(random_complex(rng, s.pair.dim, samples.dim), samples, s.pair)
    right = ComplexMatrix(random_complex(rng, s.pair.dim, samples.dim), samples, s.pair)

    outcome.guard("green_identity", "second-green-identity", lambda: CheckRecord.from_residual(
        "green_identity", "second-green-identity",
        green_form_residual(s.lm_pair, s.embedding, s.b_pair, s.am_pair, left, right), tol,
    ))

    vectors = [domain_vector(s, random_complex(rng, s.n), random_complex(rng, s.n_boundary)) for _ in range(2)]

    def scalar_green():
        v, w = vectors
        scale = 1.0 + s.H.norm(apply_lm(s, v)) * s.H.norm(apply_lm(s, w)) + s.L.norm() * s.T.norm()
        return CheckRecord.from_residual("green_vectors", "second-green-identity", abs(green_residual(s, v, w)) / scale, tol)

    outcome.guard("green_vectors", "second-green-identity", scalar_green)

    def rebased():
        v = vectors[0]
        reference = apply_lm(s, v)
        worst = 0.0
        for mu in ctx.lambdas():
            f0, phi = rebase(s, v, mu)
            deviation = np.linalg.norm(apply_lm_rebased(s, f0, phi, mu) - reference)
            worst = max(worst, deviation / (1.0 + np.linalg.norm(reference)))
        return CheckRecord.from_residual("rebase_consistency", "decomposition-independence", worst, tol)

    outcome.guard("rebase_consistency", "decomposition-independence", rebased)

    def deficiency():
        plus, minus = deficiency_indices(s)
        return CheckRecord.from_flag(
            "deficiency_indices", "minimal-operator-defect", plus == minus == s.n_boundary,
            detail=f"({plus}, {minus})",
        )

    outcome.guard("deficiency_indices", "minimal-operator-defect", deficiency)
    triple = qbt_verify(s, s.b_pair, s.am_pair, s.lm_pair, name="L_m", tol=tol)
    outcome.checks.extend(triple.checks)
    return outcome


def _scalar_robin(ctx: RunContext) -> SuiteOutcome:
    outcome = SuiteOutcome()
    lambdas = ctx.config.lambda_values() or list(SCALAR_LAMBDAS)
    for i, p in enumerate(ctx.boundary_params()):
        for lam in lambdas:
            for record in my_scalar_suite(p, lam).checks:
                outcome.checks.append(record.model_copy(update={"name": f"{record.name}[{i}]"}))
    return outcome


@router.suite("robin")
def robin_suite(ctx: RunContext) -> SuiteOutcome:
    if ctx.config.model == ModelKind.moshinsky_yafaev:
        return _scalar_robin(ctx)
    s, tol = ctx.setting, ctx.tol
    outcome = SuiteOutcome()
    for i, p in enumerate(ctx.boundary_params()):
        for j, lam in enumerate(ctx.lambdas()):
            tag = f"[{i},{j}]"

            def krein(p=p, lam=lam, tag=tag):
                direct = robin_constraint(s, p.alpha, p.beta).resolvent(lam)
                deviation = relative_deviation(robin_resolvent(s, p.alpha, p.beta, lam), direct)
                return CheckRecord.from_residual(
                    f"robin_resolvent{tag}", "krein-robin-resolvent", deviation, ctx.config.resolvent_tolerance
                )

            outcome.guard(f"robin_resolvent{tag}", "krein-robin-resolvent", krein)
            if not check_symmetry_params(p):
                continue

            def solution_operator(p=p, lam=lam, tag=tag):
                lift = robin_dirichlet_pairs(s, p, lam)
                kernel = ((lam * s.embedding - s.lm_pair) @ lift).norm()
                trace = ((p.alpha * s.am_pair + p.beta * s.b_pair) @ lift - 1.0).norm()
                return CheckRecord.from_residual(
                    f"robin_dirichlet{tag}", "robin-dirichlet-solution", max(kernel, trace) / (1.0 + lift.norm()), tol
                )

            outcome.guard(f"robin_dirichlet{tag}", "robin-dirichlet-solution", solution_operator)
            outcome.guard(f"gamma_domain{tag}", "gamma-domain-transform", lambda p=p, lam=lam, tag=tag: (
                CheckRecord.from_residual(f"gamma_domain{tag}", "gamma-domain-transform",
                                          gamma_domain_distance(s, p, lam), tol * 1e2)
            ))

        if check_symmetry_params(p):
            outcome.guard(f"ibc_hermitian[{i}]", "symmetric-parameters-hermitian", lambda p=p, i=i: (
                CheckRecord.from_residual(f"ibc_hermitian[{i}]", "symmetric-parameters-hermitian",
                                          hermiticity_of_ibc(s, p), tol)
            ))
        if abs((p.alpha * np.conj(p.beta)).imag) <= 1e-12:
            outcome.guard(f"conjugate_domain[{i}]", "conjugate-robin-domain", lambda p=p, i=i: (
                CheckRecord.from_residual(f"conjugate_domain[{i}]", "conjugate-robin-domain",
                                          conjugate_domain_distance(s, p.alpha, p.beta), tol * 1e2)
            ))
    return outcome


def _eigenvalue_control(ctx: RunContext, p: BoundaryParams) -> CheckRecord:
    """At an exact eigenvalue of H_IBC the resolvent formula must refuse."""
    s = ctx.setting
    realized = assemble_ibc(s, p)
    try:
        ibc_resolvent(s, p, lowest_eigenvalue(realized.matrix, tol=1e-6))
    except (ResolventError, GammaUndefinedError, SingularMatrixError) as exc:
        return CheckRecord.from_flag("eigenvalue_control", "ibc-invertibility-condition", True,
                                     detail=type(exc).__name__)
    return CheckRecord.from_residual("eigenvalue_control", "ibc-invertibility-condition", 1.0, 0.0, gated=False,
                                     detail="resolvent formula returned at an eigenvalue")


@router.suite("resolvents")
def resolvents_suite(ctx: RunContext) -> SuiteOutcome:
    s, tol = ctx.setting, ctx.tol
    outcome = SuiteOutcome()
    params: List[BoundaryParams] = [p for p in ctx.boundary_params() if check_symmetry_params(p)]
    for i, p in enumerate(params):
        for j, lam in enumerate(ctx.lambdas()):
            tag = f"[{i},{j}]"
            outcome.guard(f"ibc_resolvent{tag}", "ibc-krein-resolvent", lambda p=p, lam=lam, tag=tag: (
                CheckRecord.from_residual(
                    f"ibc_resolvent{tag}", "ibc-krein-resolvent",
                    relative_deviation(ibc_resolvent(s, p, lam), ibc_constraint(s, p).resolvent(lam)),
                    ctx.config.resolvent_tolerance,
                )
            ))
            outcome.guard(f"perturbation_split{tag}", "ibc-perturbation-split", lambda p=p, lam=lam, tag=tag: (
                CheckRecord.from_residual(f"perturbation_split{tag}", "ibc-perturbation-split",
                                          perturbation_residual(s, p, lam), 1e-9)
            ))
        if p.beta != 0:
            outcome.guard(f"delta_elimination[{i}]", "delta-elimination", lambda p=p, i=i: (
                CheckRecord.from_residual(f"delta_elimination[{i}]", "delta-elimination",
                                          delta_elimination_residual(s, p), tol)
            ))
        total = p.alpha + p.beta
        if abs(total) > 1e-12:
            normalized = BoundaryParams.symmetric(p.alpha / total, p.beta / total)
            outcome.guard(f"minimal_restriction[{i}]", "minimal-domain-action", lambda q=normalized, i=i: (
                CheckRecord.from_residual(f"minimal_restriction[{i}]", "minimal-domain-action",
                                          minimal_restriction_residual(s, q), tol)
            ))
        outcome.guard(f"eigenvalue_control[{i}]", "ibc-invertibility-condition", lambda p=p, i=i: (
            _eigenvalue_control(ctx, p).model_copy(update={"name": f"eigenvalue_control[{i}]"})
        ))

    def relative_bound():
        lam = s.lambda0 - 1.0
        bound = relative_bound_report(s, BoundaryParams.symmetric(-1.0, 1.0), lam)
        return CheckRecord.from_residual(
            "relative_bound", "infinitesimal-relative-bound", bound.a_proxy, 1.0, gated=False,
            detail=f"dtn_norm={bound.dtn_norm:.6g} beta_distance={bound.beta_distance:.6g}",
        )

    outcome.guard("relative_bound", "infinitesimal-relative-bound", relative_bound)
    return outcome
