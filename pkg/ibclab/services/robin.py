# ibclab/services/robin.py
"""Robin-type interior-boundary conditions.

    L_{a,b}:     a A_m f + b B f = 0,           acting as L_m
    H_IBC^{abcd}: a A_m f + b B f = I* f,        acting as L_m + c I A_m + d I B

with the Krein-type resolvent formulas built from G_lam and T_lam.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as sla

from ibclab import config
from ibclab.exceptions import (
    GammaUndefinedError,
    InvertibilityConditionError,
    ParameterError,
    ResolventError,
    SingularMatrixError,
)
from ibclab.services.ibc_core import (
    Setting,
    dirichlet_op,
    dtn_op,
    pair_lift_dirichlet,
    resolvent,
)
from ibclab.services.numkernel import ComplexMatrix, Subspace, hermiticity_deviation, inverse, solve
from ibclab.services.realization import ConstrainedOperator, RealizedOperator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundaryParams:
    alpha: complex
    beta: complex
    gamma: complex = 1.0
    delta: complex = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        if self.alpha == 0 and self.beta == 0:
            raise ParameterError("(alpha, beta) must not both vanish")

    @classmethod
    def symmetric(cls, alpha: complex, beta: complex) -> "BoundaryParams":
        """Completes (alpha, beta) by (gamma, delta) with beta conj(gamma) - conj(alpha) delta = 1.

        Raises ParameterError unless alpha conj(beta) is real.
        """
        alpha, beta = complex(alpha), complex(beta)
        if beta != 0:
            params = cls(alpha, beta, 1.0 / np.conj(beta), 0.0)
        else:
            params = cls(alpha, beta, 0.0, -1.0 / np.conj(alpha))
        if not check_symmetry_params(params):
            raise ParameterError(f"no symmetric completion of ({alpha}, {beta}): alpha conj(beta) is not real")
        return params

    def as_tuple(self) -> Tuple[complex, complex, complex, complex]:
        return self.alpha, self.beta, self.gamma, self.delta


def check_symmetry_params(p: BoundaryParams, tol: float = 1e-12) -> bool:
    a, b, c, d = p.as_tuple()
    return bool(
        abs((np.conj(a) * c).imag) <= tol
        and abs((np.conj(b) * d).imag) <= tol
        and abs(b * np.conj(c) - np.conj(a) * d - 1) <= tol
    )


def _require_symmetric(p: BoundaryParams, what: str):
    if not check_symmetry_params(p):
        raise ParameterError(f"{what} needs symmetric parameters, got {p}")


def robin_constraint(s: Setting, alpha: complex, beta: complex) -> ConstrainedOperator:
    BoundaryParams(alpha, beta)
    constraint = alpha * s.am_pair + beta * s.b_pair
    return ConstrainedOperator(s, f"L_({alpha},{beta})", s.lm_pair, constraint)


def assemble_robin(s: Setting, alpha: complex, beta: complex) -> RealizedOperator:
    return robin_constraint(s, alpha, beta).realize()


def robin_resolvent(s: Setting, alpha: complex, beta: complex, lam: complex) -> ComplexMatrix:
    """(Id - alpha G_lam (alpha T_lam + beta)^{-1} A) R(lam, L)."""
    R = resolvent(s, lam)
    try:
        boundary = solve(alpha * dtn_op(s, lam) + beta, s.A @ R)
    except SingularMatrixError as exc:
        raise ResolventError(f"lambda={lam} is not in rho(L_({alpha},{beta})): alpha T_lam + beta is singular") from exc
    return R - alpha * (dirichlet_op(s, lam) @ boundary)


def _robin_denominator(s: Setting, p: BoundaryParams, lam: complex) -> ComplexMatrix:
    """(alpha adj(T_{conj(lam)}) + beta)^{-1}."""
    try:
        return inverse(p.alpha * dtn_op(s, np.conj(lam)).H + p.beta)
    except SingularMatrixError as exc:
        raise ResolventError(f"alpha adj(T) + beta is singular at lambda={lam} for {p}") from exc


def robin_dirichlet(s: Setting, p: BoundaryParams, lam: complex) -> ComplexMatrix:
    """G_lam^{a,b} = G_lam (alpha adj(T_{conj(lam)}) + beta)^{-1}."""
    _require_symmetric(p, "robin_dirichlet")
    return dirichlet_op(s, lam) @ _robin_denominator(s, p, lam)


def robin_dirichlet_pairs(s: Setting, p: BoundaryParams, lam: complex) -> ComplexMatrix:
    _require_symmetric(p, "robin_dirichlet")
    return pair_lift_dirichlet(s, lam) @ _robin_denominator(s, p, lam)


def robin_dtn(s: Setting, p: BoundaryParams, lam: complex) -> ComplexMatrix:
    """T_lam^{a,b} = (gamma T_lam + delta)(alpha adj(T_{conj(lam)}) + beta)^{-1}."""
    _require_symmetric(p, "robin_dtn")
    return (p.gamma * dtn_op(s, lam) + p.delta) @ _robin_denominator(s, p, lam)


def robin_dtn_zero_alpha(s: Setting, beta: complex, delta: complex, lam: complex) -> ComplexMatrix:
    """Closed form for alpha = 0: T^{0,b}_lam = |beta|^{-2} T_lam + delta / beta."""
    return dtn_op(s, lam) / abs(beta) ** 2 + delta / beta


def _neumann_sum(X: ComplexMatrix):
    """Sum of X^k when the powers die out; None when they do not within the dimension."""
    cap = X.domain.dim + 1
    total = ComplexMatrix.identity(X.domain)
    term = total
    for _ in range(cap):
        term = term @ X
        size = term.frobenius()
        if size < config.NEUMANN_TOL:
            return total
        if size > 1e8:
            return None
        total = total + term
    return None


@dataclass(frozen=True, eq=False)
class GammaFactors:
    """Gamma = (Id - G I*)^{-1} = Id + G S I* with S = (Id - I* G)^{-1} on dH.

    Products with Gamma and adj(Gamma) go through dH and never form an n x n inverse.
    """

    G: ComplexMatrix
    S: ComplexMatrix
    I: ComplexMatrix
    i_star: ComplexMatrix

    def apply(self, m: ComplexMatrix) -> ComplexMatrix:
        """Gamma @ m."""
        return m + self.G @ (self.S @ (self.i_star @ m))

    def apply_adjoint(self, m: ComplexMatrix) -> ComplexMatrix:
        """adj(Gamma) @ m."""
        return m + self.I @ (self.S.H @ (self.G.H @ m))

    def right_apply_adjoint(self, m: ComplexMatrix) -> ComplexMatrix:
        """m @ adj(Gamma)."""
        return m + ((m @ self.I) @ self.S.H) @ self.G.H

    def dense(self) -> ComplexMatrix:
        return 1.0 + self.G @ (self.S @ self.i_star)


def gamma_factors(s: Setting, p: BoundaryParams, lam: complex) -> GammaFactors:
    G = robin_dirichlet(s, p, lam)
    Y = s.i_star @ G
    S = _neumann_sum(Y)
    if S is None:
        try:
            S = inverse(1.0 - Y)
        except SingularMatrixError as exc:
            raise GammaUndefinedError(
                f"Gamma undefined: 1 is in the spectrum of G^{{a,b}}_lam I* at lambda={lam}"
            ) from exc
    return GammaFactors(G, S, s.I, s.i_star)


def gamma_transform(s: Setting, p: BoundaryParams, lam: complex) -> ComplexMatrix:
    """Gamma_lam^{a,b} = (Id - G_lam^{a,b} I*)^{-1}."""
    return gamma_factors(s, p, lam).dense()


def gamma_pairs(s: Setting, p: BoundaryParams, lam: complex) -> ComplexMatrix:
    """Gamma acting on pair representatives: v -> v + lift(G^{a,b}) I* Gamma E v."""
    lift = robin_dirichlet_pairs(s, p, lam)
    correction = lift @ (s.i_star @ gamma_factors(s, p, lam).apply(s.embedding))
    return 1.0 + correction


def ibc_constraint(s: Setting, p: BoundaryParams) -> ConstrainedOperator:
    constraint = p.alpha * s.am_pair + p.beta * s.b_pair - s.i_star_pair
    action = s.lm_pair + p.gamma * (s.I @ s.am_pair) + p.delta * (s.I @ s.b_pair)
    return ConstrainedOperator(s, f"H_IBC{p.as_tuple()}", action, constraint)


def assemble_ibc(s: Setting, p: BoundaryParams) -> RealizedOperator:
    return ibc_constraint(s, p).realize()


def gamma_domain_distance(s: Setting, p: BoundaryParams, lam: complex) -> float:
    """Projector distance between D(H_IBC) and Gamma D(L_{a,b}) in the pair space."""
    robin_domain = robin_constraint(s, p.alpha, p.beta).domain
    image = Subspace.span((gamma_pairs(s, p, lam) @ robin_domain.basis).entries, s.pair)
    return image.distance(ibc_constraint(s, p).domain)


def conjugate_domain_distance(s: Setting, alpha: complex, beta: complex) -> float:
    """Distance between D(L_{a,b}) and D(L_{conj a, conj b})."""
    first = robin_constraint(s, alpha, beta).domain
    second = robin_constraint(s, np.conj(alpha), np.conj(beta)).domain
    return first.distance(second)


def perturbation_split(s: Setting, p: BoundaryParams, lam: complex) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """principal = adj(Id - G^{ab}_{conj lam} I*)(L_{a,b} - lam)(Id - G^{ab}_lam I*) and I T^{ab}_lam I*.

    The principal part is evaluated on D(H_IBC) through the pair representation and
    returned as an operator on H.
    """
    _require_symmetric(p, "perturbation_split")
    realized = assemble_ibc(s, p)
    basis = realized.coords
    lift = robin_dirichlet_pairs(s, p, lam)
    # (Id - G^{ab}_lam I*) moves D(H_IBC) into D(L_{a,b}), on pair representatives
    shifted = basis - lift @ (s.i_star_pair @ basis)
    inner = s.lm_pair @ shifted - lam * (s.embedding @ shifted)
    outer = 1.0 - (robin_dirichlet(s, p, np.conj(lam)) @ s.i_star).H
    principal = outer @ inner @ inverse(realized.embedding)
    correction = s.I @ robin_dtn(s, p, lam) @ s.i_star
    return principal, correction


def perturbation_residual(s: Setting, p: BoundaryParams, lam: complex) -> float:
    principal, correction = perturbation_split(s, p, lam)
    target = assemble_ibc(s, p).matrix - lam
    return (principal + correction - target).norm() / (1.0 + target.norm())


def delta_elimination_residual(s: Setting, p: BoundaryParams) -> float:
    """On D(H_IBC), beta != 0: delta I B = delta/beta (I I* - alpha I A_m)."""
    if p.beta == 0:
        raise ParameterError("delta elimination needs beta != 0")
    basis = ibc_constraint(s, p).domain.basis
    lhs = p.delta * (s.I @ s.b_pair @ basis)
    rhs = (p.delta / p.beta) * (s.I @ s.i_star_pair @ basis - p.alpha * (s.I @ s.am_pair @ basis))
    return (lhs - rhs).norm() / (1.0 + lhs.norm())


def ibc_resolvent(s: Setting, p: BoundaryParams, lam: complex) -> ComplexMatrix:
    """Gamma R_ab (Id - adj(Gamma_conj) I T^{ab} I* Gamma R_ab)^{-1} adj(Gamma_conj).

    The loop factors as U V with U = adj(Gamma_conj) I T^{ab} and V = I* Gamma R_ab, and
    (Id - U V)^{-1} = Id + U (Id - V U)^{-1} V is inverted on dH.
    """
    _require_symmetric(p, "ibc_resolvent")
    R_ab = robin_resolvent(s, p.alpha, p.beta, lam)
    gamma = gamma_factors(s, p, lam)
    gamma_conj = gamma_factors(s, p, np.conj(lam))
    left = gamma.apply(R_ab)
    U = gamma_conj.apply_adjoint(s.I @ robin_dtn(s, p, lam))
    V = s.i_star @ left
    try:
        middle = inverse(1.0 - V @ U)
    except SingularMatrixError as exc:
        raise InvertibilityConditionError(
            f"1 is in the spectrum of adj(Gamma) I T^{{a,b}} I* Gamma R(lambda, L_ab) at lambda={lam}"
        ) from exc
    return gamma_conj.right_apply_adjoint(left + (left @ U) @ (middle @ V))


def minimal_restriction_residual(s: Setting, p: BoundaryParams) -> float:
    """On D(H_0) (with alpha + beta = 1) H_IBC acts as L_m + (gamma + delta) I I*."""
    if abs(p.alpha + p.beta - 1) > 1e-12:
        raise ParameterError(f"alpha + beta must equal 1, got {p.alpha + p.beta}")
    constraint = ComplexMatrix.vstack(
        [s.am_pair - s.i_star_pair, s.b_pair - s.i_star_pair],
        s.dH.direct_sum(s.dH, "boundary^2"),
    )
    basis = ConstrainedOperator(s, "H_0", s.lm_pair, constraint).domain.basis
    action = ibc_constraint(s, p).pair_action @ basis
    expected = s.lm_pair @ basis + (p.gamma + p.delta) * (s.I @ s.i_star_pair @ basis)
    return (action - expected).norm() / (1.0 + action.norm())


@dataclass(frozen=True)
class RelativeBound:
    a_proxy: float
    dtn_norm: float
    beta_distance: float


def relative_bound_report(s: Setting, p: BoundaryParams, lam: complex) -> RelativeBound:
    principal, correction = perturbation_split(s, p, lam)
    try:
        a_proxy = (correction @ inverse(principal)).norm()
    except SingularMatrixError as exc:
        raise ResolventError(f"principal part is singular at lambda={lam}") from exc
    T_lam = dtn_op(s, lam)
    spectrum = sla.eigvals((p.alpha * T_lam).tilde())
    distance = float(np.min(np.abs(-p.beta - spectrum)))
    bound = RelativeBound(a_proxy=a_proxy, dtn_norm=robin_dtn(s, p, lam).norm(), beta_distance=distance)
    logger.info(
        "Relative bound at lambda=%s: a=%.4f |T^ab|=%.4f dist=%.4f", lam, bound.a_proxy, bound.dtn_norm, distance
    )
    return bound


def hermiticity_of_ibc(s: Setting, p: BoundaryParams) -> float:
    return hermiticity_deviation(assemble_ibc(s, p).matrix)
