# ibclab/services/relations.py
"""Linear relations in dH and the classification of generalized IBC operators.

A relation is a subspace of dH + dH, stored as a graph basis [X; Y] whose columns are
the pairs (X c, Y c). The boundary maps of the IBC triple are

    Gamma0 = B - I*        Gamma1 = A_m - I*

on the pair space, and H_R is H_m restricted to {v : (Gamma0 v, Gamma1 v) in R}.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from ibclab import config
from ibclab.exceptions import (
    DimensionMismatchError,
    MultivaluedError,
    RangeError,
    RealizationError,
    RelationError,
    ResolventError,
    SingularMatrixError,
)
from ibclab.schemas.report import CheckRecord, VerificationReport
from ibclab.services.ibc_core import (
    Setting,
    apply_resolvent,
    dirichlet_op,
    dtn_op,
    embed_pairs,
    green_form_residual,
    pair_lift_dirichlet,
)
from ibclab.services.numkernel import (
    ComplexMatrix,
    Subspace,
    WeightedSpace,
    condition_number,
    hermiticity_deviation,
    in_resolvent_set,
    inverse,
    lowest_eigenvalue,
    rank,
    solve,
    sqrt_psd,
)
from ibclab.services.realization import ConstrainedOperator, RealizedOperator
from ibclab.services.robin import BoundaryParams, gamma_factors, ibc_constraint, ibc_resolvent

logger = logging.getLogger(__name__)

DIRICHLET_IBC = BoundaryParams(0.0, 1.0, 1.0, 0.0)


def _doubled(space: WeightedSpace) -> WeightedSpace:
    return space.direct_sum(space, f"{space.name}^2")


@dataclass(frozen=True, eq=False)
class LinearRelation:
    ambient: WeightedSpace
    graph: Subspace

    def __post_init__(self):
        if self.graph.ambient.dim != 2 * self.ambient.dim:
            raise DimensionMismatchError(f"graph of dimension {self.graph.ambient.dim} for {self.ambient!r}")

    @classmethod
    def from_pairs(cls, first: np.ndarray, second: np.ndarray, ambient: WeightedSpace) -> "LinearRelation":
        stacked = np.vstack([np.asarray(first, dtype=complex), np.asarray(second, dtype=complex)])
        return cls(ambient, Subspace.span(stacked, _doubled(ambient)))

    @property
    def dim(self) -> int:
        return self.graph.dim

    @property
    def first(self) -> np.ndarray:
        return self.graph.basis.entries[: self.ambient.dim]

    @property
    def second(self) -> np.ndarray:
        return self.graph.basis.entries[self.ambient.dim:]

    def _tilde(self, block: np.ndarray) -> np.ndarray:
        return self.ambient.sqrt_weights[:, None] * block

    def _kernel_coeffs(self, block: np.ndarray) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((0, 0), dtype=complex)
        return sla.null_space(self._tilde(block), rcond=config.RANK_RTOL)

    def domain(self) -> Subspace:
        return Subspace.span(self.first, self.ambient)

    def range(self) -> Subspace:
        return Subspace.span(self.second, self.ambient)

    def kernel(self) -> Subspace:
        return Subspace.span(self.first @ self._kernel_coeffs(self.second), self.ambient)

    def multivalued_part(self) -> Subspace:
        return Subspace.span(self.second @ self._kernel_coeffs(self.first), self.ambient)

    def is_single_valued(self) -> bool:
        return self.multivalued_part().dim == 0

    def equals(self, other: "LinearRelation", tol: float = None) -> bool:
        return self.graph.equals(other.graph, tol)

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """The unique y with (x, y) in R for each column x; the relation must be single-valued."""
        if not self.is_single_valued():
            raise MultivaluedError(f"relation has a multivalued part of dimension {self.multivalued_part().dim}")
        vectors = np.asarray(vectors, dtype=complex)
        single = vectors.ndim == 1
        rhs = vectors.reshape(self.ambient.dim, -1)
        coeffs, *_ = sla.lstsq(self._tilde(self.first), self._tilde(rhs))
        defect = np.linalg.norm(self._tilde(self.first @ coeffs - rhs), axis=0)
        scale = np.maximum(np.linalg.norm(self._tilde(rhs), axis=0), 1.0)
        if np.any(defect > config.DEFAULT_TOL * 1e2 * scale):
            raise RangeError(f"vector not in the domain of the relation (defect {defect.max():.3e})")
        result = self.second @ coeffs
        return result[:, 0] if single else result


def rel_from_operator(m: ComplexMatrix) -> LinearRelation:
    if not m.is_square:
        raise DimensionMismatchError(f"relation graph needs an operator on dH, got {m!r}")
    return LinearRelation.from_pairs(np.eye(m.domain.dim), m.entries, m.domain)


def rel_from_coefficients(alpha_op: ComplexMatrix, beta_op: ComplexMatrix) -> LinearRelation:
    """{(alpha f, -beta f) : f in dH}."""
    if not (alpha_op.is_square and beta_op.is_square and alpha_op.domain.same_as(beta_op.domain)):
        raise DimensionMismatchError("coefficient operators must act on the same space")
    if rank(ComplexMatrix.vstack([alpha_op, -beta_op], _doubled(alpha_op.domain))) == 0:
        raise RelationError("coefficient operators span the zero relation")
    return LinearRelation.from_pairs(alpha_op.entries, -beta_op.entries, alpha_op.domain)


def _check_ambient(r: LinearRelation, s: LinearRelation):
    if not r.ambient.same_as(s.ambient):
        raise DimensionMismatchError(f"relations live on different spaces {r.ambient!r} and {s.ambient!r}")


def _null_pairs(left: np.ndarray, right: np.ndarray, ambient: WeightedSpace) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficients (c1, c2) with left c1 = right c2."""
    d = ambient.sqrt_weights[:, None]
    k1 = left.shape[1]
    if k1 == 0 or right.shape[1] == 0:
        return np.zeros((k1, 0)), np.zeros((right.shape[1], 0))
    kernel = sla.null_space(np.hstack([d * left, -d * right]), rcond=config.RANK_RTOL)
    return kernel[:k1], kernel[k1:]


def rel_add(r: LinearRelation, s: LinearRelation) -> LinearRelation:
    """{(phi, xi + eta) : (phi, xi) in R, (phi, eta) in S}."""
    _check_ambient(r, s)
    c1, c2 = _null_pairs(r.first, s.first, r.ambient)
    return LinearRelation.from_pairs(r.first @ c1, r.second @ c1 + s.second @ c2, r.ambient)


def rel_neg(r: LinearRelation) -> LinearRelation:
    return LinearRelation.from_pairs(r.first, -r.second, r.ambient)


def rel_compose(r: LinearRelation, s: LinearRelation) -> LinearRelation:
    """R S = {(phi, eta) : (phi, xi) in S and (xi, eta) in R for some xi}."""
    _check_ambient(r, s)
    cs, cr = _null_pairs(s.second, r.first, r.ambient)
    return LinearRelation.from_pairs(s.first @ cs, r.second @ cr, r.ambient)


def rel_inverse(r: LinearRelation) -> LinearRelation:
    return LinearRelation.from_pairs(r.second, r.first, r.ambient)


def rel_adjoint(r: LinearRelation) -> LinearRelation:
    """{(phi, eta) : <xi, phi> = <psi, eta> for all (psi, xi) in R}.

    This is the weighted orthogonal complement of {(xi, -psi)}.
    """
    flipped = Subspace.span(np.vstack([r.second, -r.first]), r.graph.ambient)
    return LinearRelation(r.ambient, flipped.complement())


def rel_is_symmetric(r: LinearRelation, tol: float = None) -> bool:
    return rel_adjoint(r).graph.contains(r.graph, tol)


def rel_is_selfadjoint(r: LinearRelation, tol: float = None) -> bool:
    return rel_adjoint(r).equals(r, tol)


def boundary_traces(s: Setting) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """(B - I*, A_m - I*) as maps on the pair space."""
    return s.b_pair - s.i_star_pair, s.am_pair - s.i_star_pair


def hm_action(s: Setting) -> ComplexMatrix:
    return s.lm_pair + s.I @ s.i_star_pair + s.I @ (s.am_pair - s.b_pair)


def assemble_hm(s: Setting) -> ConstrainedOperator:
    """H_m on the whole pair space; it never realizes over H, so the constrained form is returned."""
    return ConstrainedOperator.unconstrained(s, "H_m", hm_action(s))


def h0_constraint(s: Setting) -> ConstrainedOperator:
    """D(H_0) = {A_m f = B f = I* f}, acting as H_m."""
    trace_b, trace_a = boundary_traces(s)
    constraint = ComplexMatrix.vstack([trace_a, trace_b], _doubled(s.dH))
    return ConstrainedOperator(s, "H_0", hm_action(s), constraint)


def h0_embeds(s: Setting) -> bool:
    """Finite-dimensional stand-in for density of D(H_0): full column rank of its embedding."""
    h0 = h0_constraint(s)
    return h0.domain.dim == s.n - s.n_boundary and rank(h0.embedding) == h0.domain.dim


def h01_lift(s: Setting, u: ComplexMatrix) -> ComplexMatrix:
    """Pair representatives of vectors u in D(H_IBC^{0,1}): (u - G0 I* u, I* u)."""
    boundary = s.i_star @ u
    return ComplexMatrix.vstack([u - s.G0 @ boundary, boundary], s.pair)


def push_through_residual(s: Setting, lam: complex) -> float:
    """(Id - G I*)^{-1} G = G (Id - I* G)^{-1}."""
    G = dirichlet_op(s, lam)
    try:
        lhs = inverse(1.0 - G @ s.i_star) @ G
        rhs = G @ inverse(1.0 - s.i_star @ G)
    except SingularMatrixError as exc:
        raise ResolventError(f"1 - G I* is singular at lambda={lam}") from exc
    return (lhs - rhs).norm() / (1.0 + lhs.norm())


def f_op(s: Setting, lam: complex) -> ComplexMatrix:
    """F_lam = adj((A_m - I*) R(conj lam, H_IBC^{0,1})) as a map dH -> pair."""
    G = dirichlet_op(s, lam)
    I_T = s.I @ dtn_op(s, lam)
    gamma = gamma_factors(s, DIRICHLET_IBC, lam)
    gamma_conj = gamma_factors(s, DIRICHLET_IBC, np.conj(lam))
    R_h = ibc_resolvent(s, DIRICHLET_IBC, lam)
    # theta = Gamma G + Gamma R(lam, L) adj(Gamma_conj) I T_lam
    theta = gamma.apply(G + apply_resolvent(s, lam, gamma_conj.apply_adjoint(I_T)))
    F = theta + R_h @ (I_T @ (s.i_star @ theta)) - R_h @ s.I
    try:
        psi = inverse(1.0 - s.i_star @ G)
    except SingularMatrixError as exc:
        raise ResolventError(f"Id - I* G_lam is not invertible at lambda={lam}") from exc
    return pair_lift_dirichlet(s, lam) @ psi + h01_lift(s, F - G @ psi)


def f_op_adjoint_route(s: Setting, lam: complex) -> ComplexMatrix:
    """adj((A_m - I*) R(conj lam, H_IBC^{0,1})) from the bordered resolvent, as a map dH -> H."""
    _, trace_a = boundary_traces(s)
    pair_res = ibc_constraint(s, DIRICHLET_IBC).pair_resolvent(np.conj(lam))
    return (trace_a @ pair_res).H


def f_op_bordered(s: Setting, lam: complex) -> ComplexMatrix:
    """Solves (lam - H_m) v = 0, (B - I*) v = phi on the pair space."""
    trace_b, _ = boundary_traces(s)
    target = s.H.direct_sum(s.dH, "bordered")
    system = ComplexMatrix.vstack([lam * s.embedding - hm_action(s), trace_b], target)
    rhs = ComplexMatrix.vstack([ComplexMatrix.zeros(s.dH, s.H), ComplexMatrix.identity(s.dH)], target)
    try:
        return solve(system, rhs)
    except SingularMatrixError as exc:
        raise ResolventError(f"lambda={lam} is not in the resolvent set of H_IBC^(0,1)") from exc


def s_op(s: Setting, lam: complex) -> ComplexMatrix:
    """S_lam = (A_m - I*) F_lam."""
    _, trace_a = boundary_traces(s)
    return trace_a @ f_op(s, lam)


def weyl_identity_residual(s: Setting, lam: complex, mu: complex) -> float:
    """S_lam - adj(S_mu) = (conj(mu) - lam) adj(F_mu) F_lam."""
    F_lam = s.embedding @ f_op(s, lam)
    F_mu = s.embedding @ f_op(s, mu)
    lhs = s_op(s, lam) - s_op(s, mu).H
    rhs = (np.conj(mu) - lam) * (F_mu.H @ F_lam)
    return (lhs - rhs).norm() / (1.0 + lhs.norm())


def hr_constraint(s: Setting, relation: LinearRelation) -> ConstrainedOperator:
    if not relation.ambient.same_as(s.dH):
        raise DimensionMismatchError("relation must live on the boundary space of the setting")
    trace_b, trace_a = boundary_traces(s)
    traces = ComplexMatrix.vstack([trace_b, trace_a], relation.graph.ambient)
    complement = relation.graph.complement().basis
    return ConstrainedOperator(s, f"H_R(dim {relation.dim})", hm_action(s), complement.H @ traces)


def assemble_hr(s: Setting, relation: LinearRelation) -> RealizedOperator:
    return hr_constraint(s, relation).realize()


def hr_resolvent(s: Setting, relation: LinearRelation, lam: complex) -> ComplexMatrix:
    """(Id + F_lam (R - S_lam)^{-1} (A_m - I*)) R(lam, H_IBC^{0,1})."""
    _, trace_a = boundary_traces(s)
    pair_res = ibc_constraint(s, DIRICHLET_IBC).pair_resolvent(lam)
    F = f_op(s, lam)
    shifted = rel_add(relation, rel_neg(rel_from_operator(trace_a @ F)))
    inverse_relation = rel_inverse(shifted)
    if not inverse_relation.is_single_valued():
        raise MultivaluedError(f"R - S_lam is not one-to-one at lambda={lam}")
    boundary = trace_a @ pair_res
    try:
        coeffs = inverse_relation.apply(boundary.entries)
    except RangeError as exc:
        raise RangeError(f"range of adj(F_lam) is not inside rg(R - S_lam) at lambda={lam}") from exc
    correction = F @ ComplexMatrix(coeffs, s.H, s.dH)
    return embed_pairs(s, pair_res + correction)


@dataclass(frozen=True)
class ClassificationVerdict:
    lam: float
    is_symmetric: bool
    is_selfadjoint_by_theorem: bool
    is_selfadjoint_direct: bool
    m_condition: float
    residuals: Dict[str, float] = field(default_factory=dict)
    detail: Optional[str] = None

    @property
    def agree(self) -> bool:
        return self.is_selfadjoint_by_theorem == self.is_selfadjoint_direct


def default_classification_lambda(s: Setting) -> float:
    h01 = ibc_constraint(s, DIRICHLET_IBC).realize()
    return lowest_eigenvalue(h01.matrix, tol=1e-9) - 1.0


def m_transform(s: Setting) -> ComplexMatrix:
    """M = (adj(F_i) F_i)^{1/2} on dH."""
    F_i = s.embedding @ f_op(s, 1j)
    gram = F_i.H @ F_i
    return sqrt_psd(0.5 * (gram + gram.H), tol=1e-8)


def classify_selfadjoint(
    s: Setting, relation: LinearRelation, lam: Optional[float] = None, tol: float = None
) -> ClassificationVerdict:
    tol = config.DEFAULT_TOL if tol is None else tol
    if not h0_embeds(s):
        raise RealizationError("D(H_0) does not embed with full rank; classification refused")
    lam = default_classification_lambda(s) if lam is None else float(lam)

    M = m_transform(s)
    m_condition = condition_number(M)
    try:
        M_inv = inverse(M)
    except SingularMatrixError as exc:
        raise RealizationError("M = (F_i* F_i)^(1/2) is numerically singular although F_i is injective") from exc
    S = s_op(s, lam)
    shifted = rel_add(relation, rel_neg(rel_from_operator(S)))
    transformed = rel_compose(rel_from_operator(M_inv), rel_compose(shifted, rel_from_operator(M_inv)))
    theorem_distance = rel_adjoint(transformed).graph.distance(transformed.graph)
    by_theorem = bool(theorem_distance <= tol * 1e2)

    residuals = {"theorem_adjoint_distance": theorem_distance, "S_hermiticity": hermiticity_deviation(S)}
    detail = None
    try:
        realized = assemble_hr(s, relation)
        herm = realized.hermiticity()
        residuals["direct_hermiticity"] = herm
        direct = bool(herm <= tol and in_resolvent_set(realized.matrix, lam))
    except RealizationError as exc:
        detail = str(exc)
        direct = False

    verdict = ClassificationVerdict(
        lam=lam,
        is_symmetric=bool(rel_is_symmetric(relation)),
        is_selfadjoint_by_theorem=by_theorem,
        is_selfadjoint_direct=direct,
        m_condition=m_condition,
        residuals=residuals,
        detail=detail,
    )
    if not verdict.agree:
        logger.warning("Classification verdicts disagree at lambda=%g: theorem=%s direct=%s (%s)",
                       lam, by_theorem, direct, detail)
    return verdict


def qbt_verify(
    s: Setting,
    trace_b: ComplexMatrix,
    trace_a: ComplexMatrix,
    pair_action: ComplexMatrix,
    name: str = "triple",
    tol: float = None,
) -> VerificationReport:
    """Quasi-boundary-triple checks on a pair action, one record per identity."""
    tol = config.DEFAULT_TOL if tol is None else tol
    report = VerificationReport(suite=f"qbt:{name}")
    identity = ComplexMatrix.identity(s.pair)
    try:
        residual = green_form_residual(pair_action, s.embedding, trace_b, trace_a, identity, identity)
        report.checks.append(CheckRecord.from_residual("green_identity", "second-green-identity", residual, tol))
    except Exception as exc:
        report.checks.append(CheckRecord.from_error("green_identity", "second-green-identity", exc))

    joint = ComplexMatrix.vstack([trace_a, trace_b], _doubled(s.dH))
    joint_rank = rank(joint)
    report.checks.append(CheckRecord.from_flag(
        "joint_range", "joint-trace-surjectivity", joint_rank == 2 * s.n_boundary,
        detail=f"rank {joint_rank} of {2 * s.n_boundary}",
    ))

    try:
        restricted = ConstrainedOperator(s, f"{name}|ker", pair_action, trace_b).realize()
        herm = restricted.hermiticity()
        ok = herm <= tol * 1e2 and in_resolvent_set(restricted.matrix, 1j)
        report.checks.append(CheckRecord(
            name="selfadjoint_restriction", anchor="self-adjoint-kernel-restriction",
            residual=herm, tolerance=tol * 1e2, passed=bool(ok),
        ))
    except Exception as exc:
        report.checks.append(CheckRecord.from_error("selfadjoint_restriction", "self-adjoint-kernel-restriction", exc))
    logger.info("Triple %s verified: passed=%s", name, report.passed)
    return report
