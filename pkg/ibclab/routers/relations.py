import logging
from typing import Tuple

import numpy as np

from ibclab.exceptions import ConfigError
from ibclab.models.polaron import pointwise_robin_relation
from ibclab.routers.base import RunContext, SuiteOutcome, SuiteRouter
from ibclab.schemas.report import CheckRecord
from ibclab.schemas.run_config import ModelKind, RelationSpec, to_complex
from ibclab.services.ibc_core import Setting
from ibclab.services.numkernel import ComplexMatrix, WeightedSpace, hermiticity_deviation, inverse
from ibclab.services.realization import relative_deviation
from ibclab.services.relations import (
    LinearRelation,
    boundary_traces,
    classify_selfadjoint,
    f_op,
    f_op_adjoint_route,
    f_op_bordered,
    hm_action,
    hr_constraint,
    hr_resolvent,
    push_through_residual,
    qbt_verify,
    rel_add,
    rel_adjoint,
    rel_compose,
    rel_from_coefficients,
    rel_from_operator,
    rel_inverse,
    rel_is_selfadjoint,
    rel_is_symmetric,
    s_op,
    weyl_identity_residual,
)
from ibclab.utils.random_settings import (
    random_complex,
    random_relation,
    random_selfadjoint_relation,
    random_symmetric_relation,
)

logger = logging.getLogger(__name__)

router = SuiteRouter(tags=["relations"])


def _matrix(rows, space: WeightedSpace, label: str) -> ComplexMatrix:
    entries = np.array([[to_complex(z) for z in row] for row in rows], dtype=complex)
    if entries.shape != (space.dim, space.dim):
        raise ConfigError(f"{label} must be {space.dim}x{space.dim}, got {entries.shape}")
    return ComplexMatrix(entries, space, space)


def repulsive_cosine(x: np.ndarray) -> np.ndarray:
    return -1.0 - 0.5 * (1.0 + np.cos(x))


def build_relation(ctx: RunContext, spec: RelationSpec) -> Tuple[LinearRelation, Setting]:
    """The relation a run config asks for, with the setting it lives on."""
    s = ctx.setting
    if spec.kind == "random_symmetric":
        return random_symmetric_relation(ctx.rng, s.dH), s
    if spec.kind == "random":
        return random_relation(ctx.rng, s.dH, spec.dim), s
    if spec.kind == "operator":
        if spec.matrix is None:
            raise ConfigError("relation kind 'operator' needs 'matrix'")
        return rel_from_operator(_matrix(spec.matrix, s.dH, "matrix")), s
    if spec.kind == "coefficients":
        if spec.alpha is None or spec.beta is None:
            raise ConfigError("relation kind 'coefficients' needs 'alpha' and 'beta'")
        return rel_from_coefficients(_matrix(spec.alpha, s.dH, "alpha"), _matrix(spec.beta, s.dH, "beta")), s
    # pointwise
    if ctx.config.model != ModelKind.polaron:
        raise ConfigError("pointwise relations need model=polaron")
    if spec.profile == "repulsive_cosine":
        alpha = repulsive_cosine
        beta = lambda x: 1.0 - repulsive_cosine(x)  # noqa: E731
    elif spec.profile == "dirichlet":
        alpha, beta = np.zeros_like, np.ones_like
    elif spec.alpha_values is not None and spec.beta_values is not None:
        alpha = [to_complex(z) for z in spec.alpha_values]
        beta = [to_complex(z) for z in spec.beta_values]
    else:
        raise ConfigError("pointwise relation needs a profile or alpha_values/beta_values")
    relation, ps = pointwise_robin_relation(ctx.polaron, alpha, beta)
    return relation, ps.setting


def adjoint_oracle_defect(r: LinearRelation) -> float:
    """max |<xi, phi> - <psi, eta>| over basis pairs of R and R*, from the defining condition."""
    adjoint = rel_adjoint(r)
    W = r.ambient.weights[:, None]
    psi, xi = r.first, r.second
    phi, eta = adjoint.first, adjoint.second
    defect = xi.conj().T @ (W * phi) - psi.conj().T @ (W * eta)
    return float(np.max(np.abs(defect), initial=0.0))


@router.suite("relations")
def relations_suite(ctx: RunContext) -> SuiteOutcome:
    s, tol, rng = ctx.setting, ctx.tol, ctx.rng
    space = s.dH
    outcome = SuiteOutcome()
    for i in range(ctx.config.samples):
        r = random_relation(rng, space)

        def oracle(r=r, i=i):
            dims_ok = rel_adjoint(r).dim == 2 * space.dim - r.dim
            return CheckRecord.from_residual(
                f"adjoint_oracle[{i}]", "relation-adjoint", adjoint_oracle_defect(r) if dims_ok else np.inf, tol,
                detail=f"dim R = {r.dim}",
            )

        outcome.guard(f"adjoint_oracle[{i}]", "relation-adjoint", oracle)
        outcome.guard(f"adjoint_involution[{i}]", "relation-adjoint", lambda r=r, i=i: CheckRecord.from_residual(
            f"adjoint_involution[{i}]", "relation-adjoint", rel_adjoint(rel_adjoint(r)).graph.distance(r.graph), tol,
        ))

    M1 = ComplexMatrix(random_complex(rng, space.dim, space.dim), space, space)
    M2 = ComplexMatrix(random_complex(rng, space.dim, space.dim), space, space)
    outcome.guard("compose_product", "relation-calculus", lambda: CheckRecord.from_residual(
        "compose_product", "relation-calculus",
        rel_compose(rel_from_operator(M1), rel_from_operator(M2)).graph.distance(rel_from_operator(M1 @ M2).graph),
        tol,
    ))
    outcome.guard("add_sum", "relation-calculus", lambda: CheckRecord.from_residual(
        "add_sum", "relation-calculus",
        rel_add(rel_from_operator(M1), rel_from_operator(M2)).graph.distance(rel_from_operator(M1 + M2).graph),
        tol,
    ))
    outcome.guard("inverse_graph", "relation-calculus", lambda: CheckRecord.from_residual(
        "inverse_graph", "relation-calculus",
        rel_inverse(rel_from_operator(M1)).graph.distance(rel_from_operator(inverse(M1)).graph),
        tol * 1e2,
    ))
    outcome.guard("selfadjoint_sample", "relation-adjoint", lambda: CheckRecord.from_flag(
        "selfadjoint_sample", "relation-adjoint",
        rel_is_selfadjoint(random_selfadjoint_relation(rng, space, int(rng.integers(0, space.dim + 1)))),
    ))
    return outcome


def _triple_identities(ctx: RunContext, s: Setting, outcome: SuiteOutcome):
    tol = ctx.tol
    for j, lam in enumerate(ctx.lambdas()):
        tag = f"[{j}]"

        def bordered(lam=lam, tag=tag):
            F = s.embedding @ f_op(s, lam)
            return CheckRecord.from_residual(
                f"f_bordered{tag}", "solution-operator", relative_deviation(F, s.embedding @ f_op_bordered(s, lam)),
                tol * 1e2,
            )

        def adjoint_route(lam=lam, tag=tag):
            F = s.embedding @ f_op(s, lam)
            return CheckRecord.from_residual(
                f"f_adjoint{tag}", "solution-operator", relative_deviation(F, f_op_adjoint_route(s, lam)), tol * 1e2,
            )

        def kernel(lam=lam, tag=tag):
            F = f_op(s, lam)
            trace_b, _ = boundary_traces(s)
            residual = max(
                ((lam * s.embedding - hm_action(s)) @ F).norm() / (1.0 + F.norm()),
                (trace_b @ F - 1.0).norm(),
            )
            return CheckRecord.from_residual(f"f_kernel{tag}", "solution-operator", residual, tol * 1e2)

        outcome.guard(f"f_bordered{tag}", "solution-operator", bordered)
        outcome.guard(f"f_adjoint{tag}", "solution-operator", adjoint_route)
        outcome.guard(f"f_kernel{tag}", "solution-operator", kernel)
        outcome.guard(f"push_through{tag}", "gamma-commutation", lambda lam=lam, tag=tag: CheckRecord.from_residual(
            f"push_through{tag}", "gamma-commutation", push_through_residual(s, lam), tol,
        ))
        mu = np.conj(lam) + 0.5j
        outcome.guard(f"weyl_identity{tag}", "weyl-difference-identity", lambda lam=lam, mu=mu, tag=tag: (
            CheckRecord.from_residual(f"weyl_identity{tag}", "weyl-difference-identity",
                                      weyl_identity_residual(s, lam, mu), tol * 1e2)
        ))

    trace_b, trace_a = boundary_traces(s)
    report = qbt_verify(s, trace_b, trace_a, hm_action(s), name="H_m", tol=tol)
    outcome.checks.extend(report.checks)


@router.suite("classify")
def classify_suite(ctx: RunContext) -> SuiteOutcome:
    tol = ctx.tol
    outcome = SuiteOutcome()
    spec = ctx.config.relation
    if spec is None and ctx.stored_relations:
        name, relation = sorted(ctx.stored_relations.items())[0]
        s = ctx.setting
        logger.info("Classifying stored relation %s", name)
    else:
        relation, s = build_relation(ctx, spec or RelationSpec())

    symmetric = rel_is_symmetric(relation)
    outcome.checks.append(CheckRecord.from_flag(
        "rel_is_symmetric", "symmetric-relation", symmetric, detail=f"dim R = {relation.dim}",
    ))
    if not symmetric:
        return outcome

    verdict = None

    def classify():
        nonlocal verdict
        verdict = classify_selfadjoint(s, relation, tol=tol)
        return CheckRecord.from_flag(
            "verdicts_agree", "self-adjointness-criterion", verdict.agree,
            detail=(
                f"theorem={verdict.is_selfadjoint_by_theorem} direct={verdict.is_selfadjoint_direct} "
                f"lambda={verdict.lam:.6g} cond(M)={verdict.m_condition:.3e}"
            ),
        )

    outcome.guard("verdicts_agree", "self-adjointness-criterion", classify)
    if verdict is not None and verdict.is_selfadjoint_by_theorem:
        lam = verdict.lam
        outcome.guard("hr_resolvent", "generalized-ibc-resolvent", lambda: CheckRecord.from_residual(
            "hr_resolvent", "generalized-ibc-resolvent",
            relative_deviation(hr_resolvent(s, relation, lam), hr_constraint(s, relation).resolvent(lam)),
            ctx.config.resolvent_tolerance, detail=f"lambda={lam:.6g}",
        ))
        outcome.guard("weyl_hermitian", "weyl-difference-identity", lambda: CheckRecord.from_residual(
            "weyl_hermitian", "weyl-difference-identity", hermiticity_deviation(s_op(s, lam)), tol * 1e2,
        ))
    _triple_identities(ctx, s, outcome)
    return outcome
