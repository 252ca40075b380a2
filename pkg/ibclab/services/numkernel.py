"""Complex linear algebra over weighted inner-product spaces.

A vector of a :class:`WeightedSpace` lives in C^n with the inner product
``<f, g> = sum_i w_i conj(f_i) g_i``. Every factorization is carried out in
"tilde" coordinates ``x~ = W^{1/2} x`` where that inner product becomes the
Euclidean one, and mapped back afterwards. All values are immutable.
"""
import logging
import warnings
from dataclasses import dataclass
from numbers import Number
from typing import Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning
from scipy.linalg.lapack import get_lapack_funcs
from scipy.sparse.linalg import (
    ArpackError,
    LinearOperator,
    eigsh,
    onenormest,
    splu,
    svds,
)

from ibclab import config
from ibclab.exceptions import (
    DimensionMismatchError,
    HermiticityError,
    IbcLabError,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    """Finite-dimensional Hilbert space given by strictly positive quadrature weights."""

    weights: np.ndarray
    name: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if not np.all(w > 0):
            raise IbcLabError(f"weights of space {self.name or '<anonymous>'} must be strictly positive")
        object.__setattr__(self, "weights", _readonly(w))

    @classmethod
    def unit(cls, dim: int, name: str = "") -> "WeightedSpace":
        return cls(np.ones(dim), name)

    @property
    def dim(self) -> int:
        return int(self.weights.size)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def same_as(self, other: "WeightedSpace") -> bool:
        return self is other or (self.dim == other.dim and np.array_equal(self.weights, other.weights))

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.vdot(f, self.weights * g))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(f) ** 2)))

    def direct_sum(self, other: "WeightedSpace", name: str = "") -> "WeightedSpace":
        label = name or f"{self.name}+{other.name}"
        return WeightedSpace(np.concatenate([self.weights, other.weights]), label)

    def __repr__(self) -> str:
        return f"WeightedSpace(name={self.name!r}, dim={self.dim})"


def _check_same(expected: WeightedSpace, got: WeightedSpace, what: str):
    if not expected.same_as(got):
        raise DimensionMismatchError(f"{what}: expected space {expected!r}, got {got!r}")


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    """A linear map ``domain -> codomain`` stored in plain (untilded) coordinates."""

    # numpy defers binary operators to the methods below
    __array_ufunc__ = None

    entries: np.ndarray
    domain: WeightedSpace
    codomain: WeightedSpace

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionMismatchError(
                f"entries of shape {a.shape} do not match {self.codomain!r} <- {self.domain!r}"
            )
        object.__setattr__(self, "entries", _readonly(a))

    @classmethod
    def identity(cls, space: WeightedSpace) -> "ComplexMatrix":
        return cls(np.eye(space.dim), space, space)

    @classmethod
    def zeros(cls, domain: WeightedSpace, codomain: WeightedSpace) -> "ComplexMatrix":
        return cls(np.zeros((codomain.dim, domain.dim)), domain, codomain)

    @classmethod
    def from_tilde(cls, tilde: np.ndarray, domain: WeightedSpace, codomain: WeightedSpace) -> "ComplexMatrix":
        return cls(tilde / codomain.sqrt_weights[:, None] * domain.sqrt_weights[None, :], domain, codomain)

    @classmethod
    def hstack(cls, blocks, domain: WeightedSpace) -> "ComplexMatrix":
        codomain = blocks[0].codomain
        for block in blocks[1:]:
            _check_same(codomain, block.codomain, "hstack codomain")
        return cls(np.hstack([b.entries for b in blocks]), domain, codomain)

    @classmethod
    def vstack(cls, blocks, codomain: WeightedSpace) -> "ComplexMatrix":
        domain = blocks[0].domain
        for block in blocks[1:]:
            _check_same(domain, block.domain, "vstack domain")
        return cls(np.vstack([b.entries for b in blocks]), domain, codomain)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    @property
    def is_square(self) -> bool:
        return self.domain.same_as(self.codomain)

    def tilde(self) -> np.ndarray:
        return self.codomain.sqrt_weights[:, None] * self.entries / self.domain.sqrt_weights[None, :]

    @property
    def H(self) -> "ComplexMatrix":
        return weighted_adjoint(self)

    def norm(self) -> float:
        """Weighted operator norm."""
        if 0 in self.shape:
            return 0.0
        return _spectral_norm(self.tilde())

    def frobenius(self) -> float:
        """Weighted Hilbert-Schmidt norm, an upper bound for :meth:`norm`."""
        return float(np.linalg.norm(self.tilde()))

    def apply(self, vector: np.ndarray) -> np.ndarray:
        vector = np.asarray(vector)
        if vector.shape[0] != self.domain.dim:
            raise DimensionMismatchError(f"vector of length {vector.shape[0]} applied to {self.domain!r}")
        return self.entries @ vector

    def __matmul__(self, other):
        if isinstance(other, ComplexMatrix):
            _check_same(self.domain, other.codomain, "matrix product")
            return ComplexMatrix(self.entries @ other.entries, other.domain, self.codomain)
        return self.apply(other)

    def __add__(self, other):
        if isinstance(other, ComplexMatrix):
            _check_same(self.domain, other.domain, "sum domain")
            _check_same(self.codomain, other.codomain, "sum codomain")
            return ComplexMatrix(self.entries + other.entries, self.domain, self.codomain)
        if isinstance(other, Number):
            if not self.is_square:
                raise DimensionMismatchError("scalar shift of a non-square operator")
            return ComplexMatrix(self.entries + other * np.eye(self.domain.dim), self.domain, self.codomain)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> "ComplexMatrix":
        return ComplexMatrix(-self.entries, self.domain, self.codomain)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return ComplexMatrix(scalar * self.entries, self.domain, self.codomain)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return ComplexMatrix(self.entries / scalar, self.domain, self.codomain)

    def __repr__(self) -> str:
        return f"ComplexMatrix({self.codomain.name or '?'} <- {self.domain.name or '?'}, shape={self.shape})"


def weighted_adjoint(m: ComplexMatrix) -> ComplexMatrix:
    """adj(M) = W_dom^{-1} M^H W_cod, so that <adj(M) y, x>_dom = <y, M x>_cod."""
    entries = m.entries.conj().T * m.codomain.weights[None, :] / m.domain.weights[:, None]
    return ComplexMatrix(entries, m.codomain, m.domain)


def _arpack_start(n: int, dtype) -> np.ndarray:
    """Seeded generic start vector for ARPACK."""
    return np.random.default_rng(0).standard_normal(n).astype(dtype)


def _spectral_norm(t: np.ndarray) -> float:
    if min(t.shape) <= config.DENSE_LIMIT:
        return float(np.linalg.norm(t, 2))
    scale = float(np.linalg.norm(t))
    if scale == 0.0:
        return 0.0
    start = _arpack_start(min(t.shape), t.dtype)
    try:
        top = svds(t / scale, k=1, v0=start, return_singular_vectors=False)
    except ArpackError:
        logger.debug("ARPACK norm of a %s map did not converge, using a full SVD", t.shape)
        return float(np.linalg.norm(t, 2))
    return float(top[0]) * scale


def _lu_with_condition(tilde: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = sla.lu_factor(tilde, check_finite=False)
    anorm = np.linalg.norm(tilde, 1)
    if anorm == 0 or not np.all(np.isfinite(lu)):
        return (lu, piv), np.inf
    gecon, = get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0:
        return (lu, piv), np.inf
    return (lu, piv), 1.0 / rcond


def _superlu_with_condition(tilde: np.ndarray):
    try:
        lu = splu(sp.csc_matrix(tilde))
    except RuntimeError:
        return None, np.inf
    n = tilde.shape[0]
    inverse_map = LinearOperator(
        (n, n),
        matvec=lambda x: lu.solve(np.asarray(x, dtype=complex)),
        rmatvec=lambda y: lu.solve(np.asarray(y, dtype=complex), trans="H"),
        dtype=complex,
    )
    cond = float(np.abs(tilde).sum(axis=0).max()) * float(onenormest(inverse_map))
    return lu, (cond if np.isfinite(cond) else np.inf)


class LUFactor:
    """LU factors of a square map, reusable across right-hand sides.

    Large sparse maps are factored by SuperLU with a 1-norm condition estimate,
    everything else by LAPACK ``getrf``/``gecon``.
    """

    def __init__(self, m: ComplexMatrix):
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"LU factors need a square operator, got {m!r}")
        self.operator = m
        t = m.tilde()
        n = t.shape[0]
        self.sparse = n > config.DENSE_LIMIT and np.count_nonzero(t) <= config.SPARSE_DENSITY * n * n
        if n == 0:
            self._factors, cond = None, 1.0
        elif self.sparse:
            self._factors, cond = _superlu_with_condition(t)
        else:
            self._factors, cond = _lu_with_condition(t)
        self.condition = float(cond)

    def _solve_tilde(self, b: np.ndarray, adjoint: bool = False) -> np.ndarray:
        if self._factors is None:
            raise SingularMatrixError(f"operator {self.operator!r} is exactly singular", self.condition)
        if self.sparse:
            return self._factors.solve(np.asarray(b, dtype=complex), trans="H" if adjoint else "N")
        return sla.lu_solve(self._factors, b, trans=2 if adjoint else 0, check_finite=False)

    def solve(self, rhs: Union[ComplexMatrix, np.ndarray]):
        m = self.operator
        if isinstance(rhs, ComplexMatrix):
            _check_same(m.codomain, rhs.codomain, "solve right-hand side")
            b = rhs.entries
        else:
            b = np.asarray(rhs, dtype=complex)
            if b.shape[0] != m.codomain.dim:
                raise DimensionMismatchError(f"right-hand side of length {b.shape[0]} for {m!r}")
        if m.shape[0] == 0:
            x = np.zeros(b.shape, dtype=complex)
        else:
            dc = m.codomain.sqrt_weights
            x_tilde = self._solve_tilde((dc if b.ndim == 1 else dc[:, None]) * b)
            dd = m.domain.sqrt_weights
            x = x_tilde / (dd if b.ndim == 1 else dd[:, None])
        if isinstance(rhs, ComplexMatrix):
            return ComplexMatrix(x, rhs.domain, m.domain)
        return x

    def solve_left(self, lhs: ComplexMatrix) -> ComplexMatrix:
        """``lhs @ inverse(operator)`` through the adjoint system."""
        m = self.operator
        _check_same(m.domain, lhs.domain, "left solve")
        if m.shape[0] == 0:
            return ComplexMatrix.zeros(m.codomain, lhs.codomain)
        b = weighted_adjoint(lhs).entries * m.domain.sqrt_weights[:, None]
        z = self._solve_tilde(b, adjoint=True) / m.codomain.sqrt_weights[:, None]
        return weighted_adjoint(ComplexMatrix(z, lhs.codomain, m.codomain))


def factorize(m: ComplexMatrix, cond_guard: float = None) -> LUFactor:
    """LU factors of ``m``; :class:`SingularMatrixError` above the condition guard."""
    guard = config.COND_GUARD if cond_guard is None else cond_guard
    factor = LUFactor(m)
    if not factor.condition <= guard:
        raise SingularMatrixError(f"operator {m!r} is singular to tolerance", factor.condition)
    return factor


def condition_number(m: ComplexMatrix) -> float:
    """1-norm condition estimate of a square map in tilde coordinates."""
    return LUFactor(m).condition


def solve(m: ComplexMatrix, rhs: Union[ComplexMatrix, np.ndarray], cond_guard: float = None):
    """Solve ``m @ x = rhs`` by LU factorization.

    Raises :class:`SingularMatrixError` when the condition estimate exceeds the guard.
    A plain ndarray right-hand side yields a plain ndarray solution.
    """
    return factorize(m, cond_guard).solve(rhs)


def inverse(m: ComplexMatrix, cond_guard: float = None) -> ComplexMatrix:
    return solve(m, ComplexMatrix.identity(m.codomain), cond_guard=cond_guard)


def hermiticity_deviation(m: ComplexMatrix) -> float:
    """Relative Frobenius deviation of ``m`` from its weighted adjoint."""
    if not m.is_square:
        raise DimensionMismatchError(f"hermiticity of non-square {m!r}")
    t = m.tilde()
    scale = np.linalg.norm(t)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(t - t.conj().T) / scale)


def _hermitian_tilde(m: ComplexMatrix, tol: float = None) -> np.ndarray:
    tol = config.HERMITIAN_TOL if tol is None else tol
    deviation = hermiticity_deviation(m)
    if deviation > tol:
        raise HermiticityError(f"operator {m!r} is not weighted-Hermitian: deviation {deviation:.3e} > {tol:.1e}")
    t = m.tilde()
    return 0.5 * (t + t.conj().T)


def hermitian_eig(m: ComplexMatrix, tol: float = None) -> Tuple[np.ndarray, ComplexMatrix]:
    """Eigenvalues (ascending) and weighted-orthonormal eigenvectors of a weighted-Hermitian map."""
    values, vectors = sla.eigh(_hermitian_tilde(m, tol))
    coords = WeightedSpace.unit(len(values), "eigen")
    return values, ComplexMatrix(vectors / m.domain.sqrt_weights[:, None], coords, m.domain)


def lowest_eigenvalue(m: ComplexMatrix, tol: float = None) -> float:
    """Bottom of the spectrum of a weighted-Hermitian map (Lanczos above DENSE_LIMIT)."""
    t = _hermitian_tilde(m, tol)
    n = t.shape[0]
    if n == 0:
        raise DimensionMismatchError("lowest eigenvalue of an operator on the zero space")
    if n > config.DENSE_LIMIT:
        try:
            value = eigsh(t, k=1, which="SA", v0=_arpack_start(n, t.dtype), return_eigenvectors=False)
            return float(np.real(value[0]))
        except ArpackError:
            logger.debug("ARPACK bottom eigenvalue of dimension %d did not converge, using eigvalsh", n)
    return float(sla.eigvalsh(t, subset_by_index=[0, 0])[0])


def distance_to_spectrum(m: ComplexMatrix, point: float, tol: float = None) -> float:
    """min |point - mu| over the eigenvalues mu of a weighted-Hermitian map."""
    t = _hermitian_tilde(m, tol)
    n = t.shape[0]
    if n == 0:
        return np.inf
    if n > config.DENSE_LIMIT and np.count_nonzero(t) <= config.SPARSE_DENSITY * n * n:
        try:
            nearest = eigsh(
                sp.csc_matrix(t), k=1, sigma=point, which="LM", v0=_arpack_start(n, t.dtype),
                return_eigenvectors=False,
            )
            return float(np.min(np.abs(np.real(nearest) - point)))
        except ArpackError:
            logger.debug("shift-invert Lanczos at %g did not converge, using eigvalsh", point)
        except RuntimeError:
            # point - M is exactly singular
            return 0.0
    return float(np.min(np.abs(sla.eigvalsh(t) - point)))


def eigenvalues(m: ComplexMatrix) -> np.ndarray:
    """All eigenvalues of a square map, ordered by (real part, imaginary part)."""
    if not m.is_square:
        raise DimensionMismatchError(f"eigenvalues of non-square {m!r}")
    values = sla.eigvals(m.tilde())
    return values[np.lexsort((values.imag, values.real))]


def singular_values(m: ComplexMatrix) -> np.ndarray:
    if 0 in m.shape:
        return np.zeros(0)
    return sla.svdvals(m.tilde())


def rank(m: ComplexMatrix, rtol: float = None) -> int:
    rtol = config.RANK_RTOL if rtol is None else rtol
    s = singular_values(m)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def sqrt_psd(m: ComplexMatrix, tol: float = None) -> ComplexMatrix:
    """Principal square root of a weighted-Hermitian positive semidefinite map."""
    values, vectors = hermitian_eig(m, tol)
    floor = -1e-10 * max(1.0, float(np.max(np.abs(values), initial=0.0)))
    if values.size and values[0] < floor:
        raise HermiticityError(f"operator {m!r} is not positive semidefinite: min eigenvalue {values[0]:.3e}")
    root = ComplexMatrix(np.diag(np.sqrt(np.clip(values, 0.0, None))), vectors.domain, vectors.domain)
    return vectors @ root @ vectors.H


def pinv(m: ComplexMatrix, rtol: float = None) -> ComplexMatrix:
    """Weighted Moore-Penrose pseudo-inverse ``codomain -> domain``."""
    rtol = config.RANK_RTOL if rtol is None else rtol
    if 0 in m.shape:
        return ComplexMatrix.zeros(m.codomain, m.domain)
    p = sla.pinv(m.tilde(), atol=0.0, rtol=rtol)
    return ComplexMatrix.from_tilde(p, m.codomain, m.domain)


def in_resolvent_set(m: ComplexMatrix, lam: complex, rtol: float = None) -> bool:
    """lam is in rho(M) iff sigma_min(lam - M) > rtol * ||M||."""
    rtol = config.RESOLVENT_RTOL if rtol is None else rtol
    if m.shape[0] == 0:
        return True
    s = singular_values(lam - m)
    return bool(s[-1] > rtol * m.norm())


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace carried by a weighted-orthonormal basis ``coords -> ambient``."""

    basis: ComplexMatrix

    @classmethod
    def _from_tilde_columns(cls, q: np.ndarray, ambient: WeightedSpace) -> "Subspace":
        coords = WeightedSpace.unit(q.shape[1], "coords")
        return cls(ComplexMatrix(q / ambient.sqrt_weights[:, None], coords, ambient))

    @classmethod
    def _span_tilde(cls, t: np.ndarray, ambient: WeightedSpace, rtol: float = None) -> "Subspace":
        rtol = config.RANK_RTOL if rtol is None else rtol
        if t.shape[1] == 0:
            return cls.zero(ambient)
        u, s, _ = sla.svd(t, full_matrices=False)
        r = 0 if s[0] == 0 else int(np.sum(s > rtol * s[0]))
        return cls._from_tilde_columns(u[:, :r], ambient)

    @classmethod
    def span(cls, vectors: np.ndarray, ambient: WeightedSpace, rtol: float = None) -> "Subspace":
        """Column space of ``vectors`` (plain coordinates) with a relative rank cutoff."""
        vectors = np.asarray(vectors, dtype=complex).reshape(ambient.dim, -1)
        return cls._span_tilde(ambient.sqrt_weights[:, None] * vectors, ambient, rtol)

    @classmethod
    def zero(cls, ambient: WeightedSpace) -> "Subspace":
        return cls._from_tilde_columns(np.zeros((ambient.dim, 0), dtype=complex), ambient)

    @classmethod
    def full(cls, ambient: WeightedSpace) -> "Subspace":
        return cls._from_tilde_columns(np.eye(ambient.dim, dtype=complex), ambient)

    @property
    def ambient(self) -> WeightedSpace:
        return self.basis.codomain

    @property
    def dim(self) -> int:
        return self.basis.domain.dim

    def tilde_basis(self) -> np.ndarray:
        return self.ambient.sqrt_weights[:, None] * self.basis.entries

    def projector(self) -> ComplexMatrix:
        return self.basis @ self.basis.H

    def complement(self) -> "Subspace":
        q = self.tilde_basis()
        if self.dim == 0:
            return Subspace.full(self.ambient)
        u, _, _ = sla.svd(q, full_matrices=True)
        return Subspace._from_tilde_columns(u[:, self.dim:], self.ambient)

    def join(self, other: "Subspace", rtol: float = None) -> "Subspace":
        _check_same(self.ambient, other.ambient, "subspace sum")
        return Subspace._span_tilde(np.hstack([self.tilde_basis(), other.tilde_basis()]), self.ambient, rtol)

    def intersect(self, other: "Subspace", rtol: float = None) -> "Subspace":
        _check_same(self.ambient, other.ambient, "subspace intersection")
        rtol = config.RANK_RTOL if rtol is None else rtol
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.ambient)
        q1, q2 = self.tilde_basis(), other.tilde_basis()
        kernel = sla.null_space(np.hstack([q1, -q2]), rcond=rtol)
        return Subspace._span_tilde(q1 @ kernel[: self.dim], self.ambient, rtol)

    def _residual_outside(self, q: np.ndarray) -> float:
        if q.shape[1] == 0:
            return 0.0
        mine = self.tilde_basis()
        rest = q - mine @ (mine.conj().T @ q)
        return float(np.linalg.norm(rest, 2))

    def contains(self, other: "Subspace", tol: float = None) -> bool:
        tol = config.DEFAULT_TOL if tol is None else tol
        _check_same(self.ambient, other.ambient, "subspace inclusion")
        return self._residual_outside(other.tilde_basis()) <= tol

    def contains_vectors(self, vectors: np.ndarray, tol: float = None) -> bool:
        tol = config.DEFAULT_TOL if tol is None else tol
        t = self.ambient.sqrt_weights[:, None] * np.asarray(vectors).reshape(self.ambient.dim, -1)
        scale = max(float(np.linalg.norm(t, 2)) if t.size else 0.0, 1.0)
        return self._residual_outside(t) <= tol * scale

    def distance(self, other: "Subspace") -> float:
        """Spectral-norm distance of the orthogonal projectors."""
        _check_same(self.ambient, other.ambient, "subspace distance")
        if self.dim != other.dim:
            return 1.0
        return max(self._residual_outside(other.tilde_basis()), other._residual_outside(self.tilde_basis()))

    def equals(self, other: "Subspace", tol: float = None) -> bool:
        tol = config.DEFAULT_TOL if tol is None else tol
        return self.distance(other) <= tol


def nullspace(m: ComplexMatrix, rtol: float = None) -> Subspace:
    """Kernel of ``m`` as a subspace of its domain."""
    rtol = config.RANK_RTOL if rtol is None else rtol
    n = m.domain.dim
    if m.shape[0] == 0:
        return Subspace.full(m.domain)
    _, s, vh = sla.svd(m.tilde(), full_matrices=True)
    r = 0 if s.size == 0 or s[0] == 0 else int(np.sum(s > rtol * s[0]))
    if r == n:
        return Subspace.zero(m.domain)
    return Subspace._from_tilde_columns(vh[r:].conj().T, m.domain)


def column_space(m: ComplexMatrix, rtol: float = None) -> Subspace:
    return Subspace.span(m.entries, m.codomain, rtol)
