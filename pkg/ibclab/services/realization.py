"""Operators given as (pair-space constraint, pair action) and their realization over H."""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from ibclab import config
from ibclab.exceptions import RealizationError, ResolventError, SingularMatrixError
from ibclab.services.ibc_core import Setting, embed_pairs
from ibclab.services.numkernel import (
    ComplexMatrix,
    LUFactor,
    Subspace,
    WeightedSpace,
    condition_number,
    hermiticity_deviation,
    inverse,
    nullspace,
    solve,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RealizedOperator:
    """``matrix`` = action @ inverse(embedding) on the domain coordinates ``coords``."""

    name: str
    matrix: ComplexMatrix
    coords: ComplexMatrix
    embedding: ComplexMatrix
    action: ComplexMatrix
    condition: float

    @cached_property
    def domain_basis(self) -> Subspace:
        return Subspace.span(self.coords.entries, self.coords.codomain)

    def action_residual(self) -> float:
        """Relative defect of matrix @ embedding against the declared action."""
        defect = (self.matrix @ self.embedding - self.action).norm()
        return defect / (1.0 + self.action.norm())

    def hermiticity(self) -> float:
        return hermiticity_deviation(self.matrix)


def _split_columns(m: ComplexMatrix, s: Setting):
    """Blocks of a map on the pair space acting on f0 and on phi."""
    f_part = ComplexMatrix(m.entries[:, : s.n], s.H, m.codomain)
    phi_part = ComplexMatrix(m.entries[:, s.n :], s.dH, m.codomain)
    return f_part, phi_part


@dataclass(frozen=True, eq=False)
class ConstrainedOperator:
    """Domain = ker(constraint) inside the pair space, action = pair_action on it."""

    setting: Setting
    name: str
    pair_action: ComplexMatrix
    constraint: ComplexMatrix

    @classmethod
    def unconstrained(cls, setting: Setting, name: str, pair_action: ComplexMatrix) -> "ConstrainedOperator":
        empty = WeightedSpace.unit(0, "empty")
        return cls(setting, name, pair_action, ComplexMatrix.zeros(setting.pair, empty))

    @cached_property
    def domain(self) -> Subspace:
        return nullspace(self.constraint)

    @property
    def embedding(self) -> ComplexMatrix:
        return self.setting.embedding @ self.domain.basis

    @property
    def action(self) -> ComplexMatrix:
        return self.pair_action @ self.domain.basis

    def symmetry_defect(self) -> float:
        """max |<K u, E w> - <E u, K w>| over orthonormal domain coordinates, relative."""
        K, E = self.action, self.embedding
        defect = K.H @ E - E.H @ K
        scale = 1.0 + K.norm() * E.norm()
        return float(np.max(np.abs(defect.entries), initial=0.0) / scale)

    def _boundary_elimination(self) -> Optional[ComplexMatrix]:
        """Phi with C (f, Phi f) = 0, when the constraint solves for phi; None otherwise."""
        s = self.setting
        if self.constraint.codomain.dim != s.n_boundary or s.n_boundary == 0:
            return None
        C_f, C_phi = _split_columns(self.constraint, s)
        try:
            return -solve(C_phi, C_f, cond_guard=config.ELIMINATION_COND)
        except SingularMatrixError:
            return None

    def realize(self) -> RealizedOperator:
        phi_of_f = self._boundary_elimination()
        if phi_of_f is None:
            return self._realize_from_kernel()
        return self._realize_as_graph(phi_of_f)

    def _realize_as_graph(self, phi_of_f: ComplexMatrix) -> RealizedOperator:
        # domain = {(f, Phi f)}: E = Id + G0 Phi, inverted through Id + Phi G0 on dH
        s = self.setting
        K_f, K_phi = _split_columns(self.pair_action, s)
        E = 1.0 + s.G0 @ phi_of_f
        K = K_f + K_phi @ phi_of_f
        try:
            folded = solve(1.0 + phi_of_f @ s.G0, phi_of_f)
        except SingularMatrixError as exc:
            raise RealizationError(
                f"domain does not realize as graph over H: embedding of {self.name} is singular"
            ) from exc
        E_inv = 1.0 - s.G0 @ folded
        cond = E.norm() * E_inv.norm()
        if not cond <= config.COND_GUARD:
            raise RealizationError(
                f"domain does not realize as graph over H: embedding of {self.name} has condition {cond:.3e}"
            )
        matrix = K - (K @ s.G0) @ folded
        coords = ComplexMatrix.vstack([ComplexMatrix.identity(s.H), phi_of_f], s.pair)
        logger.info("Realized %s over H as a graph (dim %d, embedding condition %.3e)", self.name, s.n, cond)
        return RealizedOperator(self.name, matrix, coords, E, K, cond)

    def _realize_from_kernel(self) -> RealizedOperator:
        s = self.setting
        dim = self.domain.dim
        if dim != s.n:
            raise RealizationError(
                f"domain does not realize as graph over H: {self.name} has domain dimension {dim}, H has {s.n}"
            )
        E, K = self.embedding, self.action
        cond = condition_number(E)
        if not cond <= config.COND_GUARD:
            raise RealizationError(
                f"domain does not realize as graph over H: embedding of {self.name} has condition {cond:.3e}"
            )
        matrix = K @ inverse(E)
        logger.info("Realized %s over H (dim %d, embedding condition %.3e)", self.name, s.n, cond)
        return RealizedOperator(self.name, matrix, self.domain.basis, E, K, cond)

    def _check_bordered_shape(self):
        s = self.setting
        if self.constraint.codomain.dim != s.n_boundary:
            raise RealizationError(
                f"{self.name}: {self.constraint.codomain.dim} constraints for {s.n_boundary} boundary dimensions"
            )

    def bordered(self, lam: complex) -> ComplexMatrix:
        """[(lam E - K); C] on the pair space."""
        s = self.setting
        self._check_bordered_shape()
        target = s.H.direct_sum(self.constraint.codomain, "bordered")
        return ComplexMatrix.vstack([lam * s.embedding - self.pair_action, self.constraint], target)

    def pair_resolvent(self, lam: complex) -> ComplexMatrix:
        """Solves (lam - K) v = g, C v = 0 for every g in H; returns the map H -> pair."""
        s = self.setting
        self._check_bordered_shape()
        if s.n > config.DENSE_LIMIT:
            eliminated = self._eliminated_pair_resolvent(lam)
            if eliminated is not None:
                return eliminated
        system = self.bordered(lam)
        rhs = ComplexMatrix.vstack(
            [ComplexMatrix.identity(s.H), ComplexMatrix.zeros(s.H, self.constraint.codomain)],
            system.codomain,
        )
        try:
            return solve(system, rhs)
        except SingularMatrixError as exc:
            raise ResolventError(f"lambda={lam} is not in the resolvent set of {self.name}") from exc

    def _eliminated_pair_resolvent(self, lam: complex) -> Optional[ComplexMatrix]:
        """Bordered solve through the LU factors of P = lam - K_f and the Schur complement on dH.

        None when P is dense or too badly conditioned to eliminate.
        """
        s = self.setting
        K_f, K_phi = _split_columns(self.pair_action, s)
        C_f, C_phi = _split_columns(self.constraint, s)
        factor = LUFactor(lam - K_f)
        if not factor.sparse or not factor.condition <= config.ELIMINATION_COND:
            logger.debug("%s: f-block at lambda=%s not eliminated (condition %.3e)", self.name, lam, factor.condition)
            return None
        Q = lam * s.G0 - K_phi
        P_inv_Q = factor.solve(Q)
        C_f_P_inv = factor.solve_left(C_f)
        try:
            phi = -solve(C_phi - C_f @ P_inv_Q, C_f_P_inv)
        except SingularMatrixError as exc:
            raise ResolventError(f"lambda={lam} is not in the resolvent set of {self.name}") from exc
        f = factor.solve(ComplexMatrix.identity(s.H)) - P_inv_Q @ phi
        return ComplexMatrix.vstack([f, phi], s.pair)

    def resolvent(self, lam: complex) -> ComplexMatrix:
        return embed_pairs(self.setting, self.pair_resolvent(lam))


def relative_deviation(candidate: ComplexMatrix, reference: ComplexMatrix) -> float:
    return (candidate - reference).norm() / max(reference.norm(), np.finfo(float).tiny)
