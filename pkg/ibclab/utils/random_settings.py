import logging
from typing import Optional, Union

import numpy as np

from ibclab.services.ibc_core import Setting, build_setting
from ibclab.services.numkernel import ComplexMatrix, WeightedSpace
from ibclab.services.relations import LinearRelation

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator]


def make_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_complex(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    m = random_complex(rng, n, n)
    return 0.5 * (m + m.conj().T)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(random_complex(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_weights(rng: np.random.Generator, n: int, name: str, weighted: bool = True) -> WeightedSpace:
    return WeightedSpace(rng.uniform(0.5, 2.0, n) if weighted else np.ones(n), name)


def random_setting(seed: Seed, n: int = 8, n_boundary: int = 3, weighted: bool = True) -> Setting:
    """Random weighted-Hermitian L and T, full-rank A, bounded I, and lambda0 below spec(L)."""
    rng = make_rng(seed)
    H = random_weights(rng, n, "H", weighted)
    dH = random_weights(rng, n_boundary, "dH", weighted)
    L = ComplexMatrix.from_tilde(random_hermitian(rng, n), H, H)
    T = ComplexMatrix.from_tilde(random_hermitian(rng, n_boundary), dH, dH)
    A = ComplexMatrix(random_complex(rng, n_boundary, n), H, dH)
    I = ComplexMatrix(0.5 * random_complex(rng, n, n_boundary), dH, H)
    bottom = float(np.linalg.eigvalsh(L.tilde()).min())
    lambda0 = bottom - 1.0 - rng.uniform(0.0, 1.0)
    return build_setting(L, A, I, T, lambda0)


def toy_setting(T: float = 0.25, lambda0: float = -1.0) -> Setting:
    """n = n_boundary = 1 with L = 0, A = I = 1."""
    H, dH = WeightedSpace.unit(1, "H"), WeightedSpace.unit(1, "dH")
    return build_setting(
        ComplexMatrix([[0.0]], H, H),
        ComplexMatrix([[1.0]], H, dH),
        ComplexMatrix([[1.0]], dH, H),
        ComplexMatrix([[T]], dH, dH),
        lambda0,
    )


def _relation_from_tilde(first: np.ndarray, second: np.ndarray, space: WeightedSpace) -> LinearRelation:
    d = space.sqrt_weights[:, None]
    return LinearRelation.from_pairs(first / d, second / d, space)


def random_relation(seed: Seed, space: WeightedSpace, dim: Optional[int] = None) -> LinearRelation:
    rng = make_rng(seed)
    k = int(rng.integers(0, 2 * space.dim + 1)) if dim is None else dim
    return _relation_from_tilde(random_complex(rng, space.dim, k), random_complex(rng, space.dim, k), space)


def random_selfadjoint_relation(seed: Seed, space: WeightedSpace, multivalued_dim: int = 0) -> LinearRelation:
    """{(u, M u + k) : u in K^perp, k in K} with M Hermitian on K^perp."""
    rng = make_rng(seed)
    n = space.dim
    if not 0 <= multivalued_dim <= n:
        raise ValueError(f"multivalued_dim must lie in 0..{n}, got {multivalued_dim}")
    Q = random_unitary(rng, n)
    Q1, Q2 = Q[:, : n - multivalued_dim], Q[:, n - multivalued_dim:]
    M = random_hermitian(rng, n - multivalued_dim)
    first = np.hstack([Q1, np.zeros((n, multivalued_dim))])
    second = np.hstack([Q1 @ M, Q2])
    return _relation_from_tilde(first, second, space)


def random_symmetric_relation(seed: Seed, space: WeightedSpace, drop: Optional[int] = None) -> LinearRelation:
    """A subspace of a random self-adjoint relation; drop = 0 keeps it self-adjoint."""
    rng = make_rng(seed)
    n = space.dim
    multivalued_dim = int(rng.integers(0, n + 1))
    full = random_selfadjoint_relation(rng, space, multivalued_dim)
    drop = int(rng.integers(0, 2)) if drop is None else drop
    keep = random_complex(rng, n, n - drop)
    basis = full.graph.basis.entries @ keep
    return LinearRelation.from_pairs(basis[:n], basis[n:], space)


def random_nonsymmetric_relation(seed: Seed, space: WeightedSpace) -> LinearRelation:
    """Graph of a weighted non-Hermitian operator."""
    rng = make_rng(seed)
    n = space.dim
    M = random_hermitian(rng, n) + 1j * np.eye(n)
    return _relation_from_tilde(np.eye(n), M, space)
