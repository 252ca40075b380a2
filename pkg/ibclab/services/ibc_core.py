# ibclab/services/ibc_core.py
"""The abstract setting (H, dH, L, A, I, T, lambda0) and the pair representation.

An element of the maximal domain D(L_m) is carried as a pair ``(f0, phi)`` standing for
``f = f0 + G0 phi`` with ``G0 = G_{lambda0}``. On pairs

    L_m (f0, phi) = L f0 + lambda0 G0 phi
    B   (f0, phi) = phi
    A_m (f0, phi) = A f0 + T phi

and all constrained operators below are subspaces of the pair space H + dH.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from ibclab import config
from ibclab.exceptions import (
    DimensionMismatchError,
    HermiticityError,
    RankError,
    SingularMatrixError,
    SpectrumError,
)
from ibclab.schemas.report import AssumptionReport, CheckRecord
from ibclab.services.numkernel import (
    ComplexMatrix,
    LUFactor,
    Subspace,
    WeightedSpace,
    distance_to_spectrum,
    factorize,
    hermiticity_deviation,
    nullspace,
    rank,
)

logger = logging.getLogger(__name__)

SAMPLE_OFFSETS = (1j, -0.5 + 2j, 1.5 - 1j)


@dataclass(frozen=True, eq=False)
class Setting:
    H: WeightedSpace
    dH: WeightedSpace
    L: ComplexMatrix
    A: ComplexMatrix
    I: ComplexMatrix
    T: ComplexMatrix
    lambda0: float
    G0: ComplexMatrix
    # LU factors of lambda - L, most recently used last
    _factors: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        expected = {
            "L": (self.H, self.H),
            "A": (self.H, self.dH),
            "I": (self.dH, self.H),
            "T": (self.dH, self.dH),
            "G0": (self.dH, self.H),
        }
        for label, (domain, codomain) in expected.items():
            op = getattr(self, label)
            if not (op.domain.same_as(domain) and op.codomain.same_as(codomain)):
                raise DimensionMismatchError(f"{label} must map {domain!r} -> {codomain!r}, got {op!r}")

    @property
    def n(self) -> int:
        return self.H.dim

    @property
    def n_boundary(self) -> int:
        return self.dH.dim

    @cached_property
    def pair(self) -> WeightedSpace:
        return self.H.direct_sum(self.dH, "pair")

    @cached_property
    def embedding(self) -> ComplexMatrix:
        """E = [Id, G0]: pair -> H."""
        return ComplexMatrix.hstack([ComplexMatrix.identity(self.H), self.G0], self.pair)

    @cached_property
    def lm_pair(self) -> ComplexMatrix:
        return ComplexMatrix.hstack([self.L, self.lambda0 * self.G0], self.pair)

    @cached_property
    def b_pair(self) -> ComplexMatrix:
        return ComplexMatrix.hstack([ComplexMatrix.zeros(self.H, self.dH), ComplexMatrix.identity(self.dH)], self.pair)

    @cached_property
    def am_pair(self) -> ComplexMatrix:
        return ComplexMatrix.hstack([self.A, self.T], self.pair)

    @cached_property
    def i_star(self) -> ComplexMatrix:
        return self.I.H

    @cached_property
    def i_star_pair(self) -> ComplexMatrix:
        """I* composed with the embedding, as a map on pairs."""
        return self.i_star @ self.embedding

    def with_identification(self, identification: ComplexMatrix) -> "Setting":
        clone = Setting(self.H, self.dH, self.L, self.A, identification, self.T, self.lambda0, self.G0)
        # same L, same factors
        object.__setattr__(clone, "_factors", self._factors)
        return clone

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_factors"] = {}
        return state


@dataclass(frozen=True)
class DomainVector:
    f0: np.ndarray
    phi: np.ndarray
    base_lambda: float


def build_setting(
    L: ComplexMatrix,
    A: ComplexMatrix,
    I: ComplexMatrix,
    T: ComplexMatrix,
    lambda0: float,
) -> Setting:
    """Validate the operator data and cache G0 = adj(A (lambda0 - L)^{-1})."""
    if isinstance(lambda0, complex):
        if lambda0.imag != 0:
            raise SpectrumError(f"lambda0 must be real, got {lambda0}")
        lambda0 = lambda0.real
    lambda0 = float(lambda0)
    H, dH = L.domain, A.codomain
    if not L.is_square:
        raise DimensionMismatchError(f"L must be an operator on H, got {L!r}")

    deviation = hermiticity_deviation(L)
    if deviation > config.HERMITIAN_TOL:
        raise HermiticityError(f"L is not weighted-Hermitian: deviation {deviation:.3e}")
    deviation = hermiticity_deviation(T)
    if deviation > config.HERMITIAN_TOL:
        raise HermiticityError(f"T is not weighted-Hermitian: deviation {deviation:.3e}")

    gap = distance_to_spectrum(L, lambda0)
    if gap <= config.SPECTRAL_GAP:
        raise SpectrumError(f"lambda0={lambda0} collides with spec(L): distance {gap:.3e}")

    if rank(A) != dH.dim:
        raise RankError(f"A must have full row rank {dH.dim}, got rank {rank(A)}")

    # G0 = R(lambda0, L) A*, the adjoint of A R(lambda0, L)
    factor = factorize(lambda0 - L)
    setting = Setting(H, dH, L, A, I, T, lambda0, factor.solve(A.H))
    setting._factors[complex(lambda0)] = factor
    logger.info("Built setting n=%d n_boundary=%d lambda0=%g (gap to spec(L) %.3e)", H.dim, dH.dim, lambda0, gap)
    return setting


def setting_from_arrays(
    L,
    A,
    I,
    T,
    lambda0: float,
    h_weights: Optional[Sequence[float]] = None,
    dh_weights: Optional[Sequence[float]] = None,
) -> Setting:
    L, A = np.asarray(L, dtype=complex), np.asarray(A, dtype=complex)
    n, n_boundary = L.shape[0], A.shape[0]
    H = WeightedSpace(np.ones(n) if h_weights is None else h_weights, "H")
    dH = WeightedSpace(np.ones(n_boundary) if dh_weights is None else dh_weights, "dH")
    return build_setting(
        ComplexMatrix(L, H, H),
        ComplexMatrix(A, H, dH),
        ComplexMatrix(I, dH, H),
        ComplexMatrix(T, dH, dH),
        lambda0,
    )


def resolvent_factor(s: Setting, lam: complex) -> LUFactor:
    """LU factors of lam - L, cached per setting."""
    key = complex(lam)
    factor = s._factors.pop(key, None)
    if factor is None:
        try:
            factor = factorize(lam - s.L)
        except SingularMatrixError as exc:
            raise SpectrumError(f"lambda={lam} lies in the spectrum of L") from exc
    s._factors[key] = factor
    while len(s._factors) > config.FACTOR_CACHE:
        s._factors.pop(next(iter(s._factors)))
    return factor


def apply_resolvent(s: Setting, lam: complex, rhs):
    """R(lam, L) rhs for a ComplexMatrix or ndarray right-hand side."""
    return resolvent_factor(s, lam).solve(rhs)


def resolvent(s: Setting, lam: complex) -> ComplexMatrix:
    """R(lam, L) = (lam - L)^{-1}."""
    return apply_resolvent(s, lam, ComplexMatrix.identity(s.H))


def dirichlet_op(s: Setting, lam: complex) -> ComplexMatrix:
    """G_lam = adj(A R(conj(lam), L)) = R(lam, L) A*."""
    if lam == s.lambda0:
        return s.G0
    return apply_resolvent(s, lam, s.A.H)


def dtn_op(s: Setting, lam: complex) -> ComplexMatrix:
    """T_lam = T + (lambda0 - lam) A R(lambda0, L) G_lam."""
    if lam == s.lambda0:
        return s.T
    # A R(lambda0, L) = adj(G0) because lambda0 is real
    return s.T + (s.lambda0 - lam) * (s.G0.H @ dirichlet_op(s, lam))


def pair_lift_dirichlet(s: Setting, lam: complex) -> ComplexMatrix:
    """Pair representation (G_lam - G0, Id) of G_lam, a map dH -> pair."""
    return ComplexMatrix.vstack([dirichlet_op(s, lam) - s.G0, ComplexMatrix.identity(s.dH)], s.pair)


def embed_pairs(s: Setting, pairs: ComplexMatrix) -> ComplexMatrix:
    """E @ pairs evaluated blockwise as f0 + G0 phi."""
    if not pairs.codomain.same_as(s.pair):
        raise DimensionMismatchError(f"embed_pairs expects a map into the pair space, got {pairs!r}")
    top = ComplexMatrix(pairs.entries[: s.n], pairs.domain, s.H)
    bottom = ComplexMatrix(pairs.entries[s.n :], pairs.domain, s.dH)
    return top + s.G0 @ bottom


def domain_vector(s: Setting, f0, phi) -> DomainVector:
    v = DomainVector(np.asarray(f0, dtype=complex), np.asarray(phi, dtype=complex), s.lambda0)
    _validate(s, v)
    return v


def _validate(s: Setting, v: DomainVector):
    if v.f0.shape != (s.n,) or v.phi.shape != (s.n_boundary,):
        raise DimensionMismatchError(
            f"domain vector of shape ({v.f0.shape}, {v.phi.shape}) for setting ({s.n}, {s.n_boundary})"
        )
    if v.base_lambda != s.lambda0:
        raise DimensionMismatchError(f"domain vector based at {v.base_lambda}, setting at {s.lambda0}")


def as_pair(s: Setting, v: DomainVector) -> np.ndarray:
    _validate(s, v)
    return np.concatenate([v.f0, v.phi])


def embed(s: Setting, v: DomainVector) -> np.ndarray:
    _validate(s, v)
    return v.f0 + s.G0 @ v.phi


def apply_lm(s: Setting, v: DomainVector) -> np.ndarray:
    _validate(s, v)
    return s.L @ v.f0 + s.lambda0 * (s.G0 @ v.phi)


def apply_b(s: Setting, v: DomainVector) -> np.ndarray:
    _validate(s, v)
    return v.phi.copy()


def apply_am(s: Setting, v: DomainVector) -> np.ndarray:
    _validate(s, v)
    return s.A @ v.f0 + s.T @ v.phi


def rebase(s: Setting, v: DomainVector, mu: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Decomposition of embed(v) relative to ker(mu - L_m): f0' = f0 + (mu - lambda0) R(mu, L) G0 phi."""
    _validate(s, v)
    if mu == s.lambda0:
        return v.f0.copy(), v.phi.copy()
    shift = (mu - s.lambda0) * apply_resolvent(s, mu, s.G0 @ v.phi)
    return v.f0 + shift, v.phi.copy()


def apply_lm_rebased(s: Setting, f0: np.ndarray, phi: np.ndarray, mu: complex) -> np.ndarray:
    """L_m action of f0 + G_mu phi, computed in the mu-based decomposition."""
    return s.L @ f0 + mu * (dirichlet_op(s, mu) @ phi)


def green_residual(s: Setting, v: DomainVector, w: DomainVector) -> complex:
    """<L_m v, w> - <v, L_m w> - <B v, A_m w> + <A_m v, B w>."""
    H, dH = s.H, s.dH
    ev, ew = embed(s, v), embed(s, w)
    return (
        H.inner(apply_lm(s, v), ew)
        - H.inner(ev, apply_lm(s, w))
        - dH.inner(apply_b(s, v), apply_am(s, w))
        + dH.inner(apply_am(s, v), apply_b(s, w))
    )


def green_form_residual(
    pair_action: ComplexMatrix,
    embedding: ComplexMatrix,
    trace_b: ComplexMatrix,
    trace_a: ComplexMatrix,
    left: ComplexMatrix,
    right: ComplexMatrix,
) -> float:
    """Largest Green-identity defect over column pairs of ``left`` and ``right`` (pair vectors).

    Scaled by the norms of the columns so the value is a relative residual.
    """
    K_left, K_right = pair_action @ left, pair_action @ right
    E_left, E_right = embedding @ left, embedding @ right
    defect = (
        K_left.H @ E_right
        - E_left.H @ K_right
        - (trace_b @ left).H @ (trace_a @ right)
        + (trace_a @ left).H @ (trace_b @ right)
    )
    scale = 1.0 + max(K_left.norm(), E_left.norm(), K_right.norm(), E_right.norm()) ** 2
    return float(np.max(np.abs(defect.entries), initial=0.0) / scale)


def minimal_domain(s: Setting) -> Subspace:
    """D(L_0) = ker A."""
    return nullspace(s.A)


def deficiency_indices(s: Setting) -> Tuple[int, int]:
    """dim ker(L_m -/+ i) on the pair space, the defect numbers of L_0."""
    plus = nullspace(s.lm_pair - 1j * s.embedding).dim
    minus = nullspace(s.lm_pair + 1j * s.embedding).dim
    return plus, minus


def sample_lambdas(s: Setting) -> Tuple[complex, ...]:
    return tuple(s.lambda0 + offset for offset in SAMPLE_OFFSETS)


def check_assumptions(s: Setting, tol: float = None, lambdas: Optional[Iterable[complex]] = None) -> AssumptionReport:
    tol = config.DEFAULT_TOL if tol is None else tol
    lambdas = tuple(sample_lambdas(s) if lambdas is None else lambdas)
    clauses = {}

    def guarded(name: str, anchor: str, compute, gated: bool = True):
        try:
            clauses[name] = CheckRecord.from_residual(name, anchor, compute(), tol, gated=gated)
        except Exception as exc:  # report-only: every clause is recorded
            logger.warning("Assumption clause %s failed to evaluate: %s", name, exc)
            clauses[name] = CheckRecord.from_error(name, anchor, exc)

    guarded("L_hermitian", "self-adjoint-L", lambda: hermiticity_deviation(s.L))
    guarded("T_hermitian", "symmetric-dtn-datum", lambda: hermiticity_deviation(s.T))
    guarded("A_relative_bound", "relative-boundedness-of-A", lambda: s.G0.norm(), gated=False)
    guarded("I_norm", "bounded-identification", lambda: s.I.norm(), gated=False)

    def kernel_residual():
        worst = (s.lambda0 * s.embedding - s.lm_pair) @ pair_lift_dirichlet(s, s.lambda0)
        residuals = [worst.norm() / (1.0 + s.G0.norm())]
        for lam in lambdas:
            lift = pair_lift_dirichlet(s, lam)
            residuals.append(((lam * s.embedding - s.lm_pair) @ lift).norm() / (1.0 + (s.embedding @ lift).norm()))
        return max(residuals)

    def right_inverse_residual():
        return max((s.b_pair @ pair_lift_dirichlet(s, lam) - 1.0).norm() for lam in lambdas)

    def dirichlet_adjoint_residual():
        scale = 1.0 + s.A.norm()
        return max(((dirichlet_op(s, lam).H @ (np.conj(lam) - s.L)) - s.A).norm() / scale for lam in lambdas)

    def dtn_difference_residual():
        worst = 0.0
        for lam in lambdas:
            for mu in lambdas:
                if lam == mu:
                    continue
                lhs = dtn_op(s, lam) - dtn_op(s, mu)
                rhs = (mu - lam) * (s.A @ apply_resolvent(s, mu, dirichlet_op(s, lam)))
                worst = max(worst, (lhs - rhs).norm() / (1.0 + dtn_op(s, lam).norm()))
        return worst

    guarded("maximal_kernel", "dirichlet-range-in-kernel", kernel_residual)
    guarded("trace_right_inverse", "trace-right-inverse", right_inverse_residual)
    guarded("dirichlet_adjoint", "dirichlet-adjoint-identity", dirichlet_adjoint_residual)
    guarded("dtn_difference", "dtn-difference-identity", dtn_difference_residual)

    report = AssumptionReport(tolerance=tol, clauses=clauses)
    if not report.passed:
        logger.warning("Assumption clauses flagged: %s", ", ".join(report.flagged()))
    return report
