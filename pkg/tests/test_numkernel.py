import numpy as np
import pytest
from numpy.testing import assert_allclose

from ibclab.exceptions import DimensionMismatchError, HermiticityError, SingularMatrixError
from ibclab.services.numkernel import (
    ComplexMatrix,
    LUFactor,
    Subspace,
    WeightedSpace,
    distance_to_spectrum,
    factorize,
    hermitian_eig,
    in_resolvent_set,
    inverse,
    lowest_eigenvalue,
    nullspace,
    solve,
    sqrt_psd,
    weighted_adjoint,
)
from ibclab.utils.random_settings import random_complex, random_hermitian


def test_adjoint_of_identity_and_scalar():
    space = WeightedSpace.unit(3)
    assert_allclose(weighted_adjoint(ComplexMatrix.identity(space)).entries, np.eye(3))
    line = WeightedSpace.unit(1)
    assert_allclose(ComplexMatrix([[2j]], line, line).H.entries, [[-2j]])


def test_adjoint_inner_product_identity(rng):
    dom = WeightedSpace(np.array([1.0, 3.0, 2.0]), "dom")
    cod = WeightedSpace(np.array([1.0, 2.0, 1.0, 1.0]), "cod")
    M = ComplexMatrix(random_complex(rng, 4, 3), dom, cod)
    for _ in range(20):
        x, y = random_complex(rng, 3), random_complex(rng, 4)
        lhs = cod.inner(y, M @ x)
        rhs = dom.inner(M.H @ y, x)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_solve_scaled_identity():
    space = WeightedSpace.unit(3)
    M = 2.0 * ComplexMatrix.identity(space)
    assert_allclose(solve(M, ComplexMatrix.identity(space)).entries, 0.5 * np.eye(3))


def test_solve_singular_raises():
    line = WeightedSpace.unit(1)
    with pytest.raises(SingularMatrixError) as info:
        inverse(ComplexMatrix([[0.0]], line, line))
    assert info.value.condition == np.inf


def test_solve_random_system_residual(rng):
    space = WeightedSpace(rng.uniform(0.5, 2.0, 8))
    M = ComplexMatrix(random_complex(rng, 8, 8) + 8 * np.eye(8), space, space)
    b = random_complex(rng, 8)
    x = solve(M, b)
    assert np.linalg.norm(M @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_dimension_mismatch():
    space = WeightedSpace.unit(2)
    with pytest.raises(DimensionMismatchError):
        solve(ComplexMatrix.identity(space), np.ones(3))


def test_hermitian_eig_diagonal():
    space = WeightedSpace.unit(3)
    values, _ = hermitian_eig(ComplexMatrix(np.diag([3.0, 1.0, 2.0]), space, space))
    assert_allclose(values, [1.0, 2.0, 3.0])
    values, _ = hermitian_eig(ComplexMatrix.zeros(space, space))
    assert_allclose(values, 0.0)


def test_hermitian_eig_reconstruction(rng):
    space = WeightedSpace(rng.uniform(0.5, 2.0, 10))
    M = ComplexMatrix.from_tilde(random_hermitian(rng, 10), space, space)
    values, vectors = hermitian_eig(M)
    diag = ComplexMatrix(np.diag(values), vectors.domain, vectors.domain)
    rebuilt = vectors @ diag @ vectors.H
    assert (rebuilt - M).norm() <= 1e-10 * M.norm()


def test_hermitian_eig_rejects_non_hermitian():
    space = WeightedSpace.unit(2)
    with pytest.raises(HermiticityError):
        hermitian_eig(ComplexMatrix([[0.0, 1.0], [0.0, 0.0]], space, space))


def test_sqrt_psd_squares_back(rng):
    space = WeightedSpace(rng.uniform(0.5, 2.0, 5))
    X = ComplexMatrix(random_complex(rng, 5, 5), space, space)
    gram = X.H @ X
    root = sqrt_psd(0.5 * (gram + gram.H), tol=1e-10)
    assert (root @ root - gram).norm() <= 1e-9 * gram.norm()


def test_subspace_complement_and_distance(rng):
    ambient = WeightedSpace(rng.uniform(0.5, 2.0, 6))
    U = Subspace.span(random_complex(rng, 6, 2), ambient)
    V = U.complement()
    assert V.dim == 4
    assert U.intersect(V).dim == 0
    assert U.join(V).dim == 6
    assert U.distance(Subspace.span(U.basis.entries @ random_complex(rng, 2, 2), ambient)) <= 1e-10
    assert U.distance(V) == 1.0


def test_nullspace_of_rank_deficient_map(rng):
    dom, cod = WeightedSpace.unit(5), WeightedSpace.unit(3)
    M = ComplexMatrix(random_complex(rng, 3, 2) @ random_complex(rng, 2, 5), dom, cod)
    kernel = nullspace(M)
    assert kernel.dim == 3
    assert np.linalg.norm((M @ kernel.basis).entries) <= 1e-10 * M.norm()


def test_matrices_are_read_only():
    space = WeightedSpace.unit(2)
    M = ComplexMatrix.identity(space)
    with pytest.raises(ValueError):
        M.entries[0, 0] = 5.0


def _weighted_chain(rng, n):
    space = WeightedSpace(rng.uniform(0.5, 2.0, n), "chain")
    tilde = np.diag(3.0 + rng.uniform(-0.5, 0.5, n)).astype(complex)
    hops = rng.uniform(0.5, 1.0, n - 1) * np.exp(1j * rng.uniform(0, 2 * np.pi, n - 1))
    tilde += np.diag(hops, 1) + np.diag(hops.conj(), -1)
    return ComplexMatrix.from_tilde(tilde, space, space), tilde


def test_zero_space_edge_cases():
    empty = WeightedSpace.unit(0)
    M = ComplexMatrix.zeros(empty, empty)
    assert in_resolvent_set(M, 1.0) is True
    assert distance_to_spectrum(M, 0.0) == np.inf
    with pytest.raises(DimensionMismatchError):
        lowest_eigenvalue(M)
    assert LUFactor(M).condition == 1.0


def test_lu_factor_solves_both_sides(rng):
    space = WeightedSpace(rng.uniform(0.5, 2.0, 5), "H")
    target = WeightedSpace.unit(2)
    M = ComplexMatrix(random_complex(rng, 5, 5) + 5 * np.eye(5), space, space)
    factor = factorize(M)
    rhs = ComplexMatrix(random_complex(rng, 5, 3), WeightedSpace.unit(3), space)
    assert_allclose(factor.solve(rhs).entries, (inverse(M) @ rhs).entries, atol=1e-12)
    lhs = ComplexMatrix(random_complex(rng, 2, 5), space, target)
    assert_allclose((factor.solve_left(lhs) @ M).entries, lhs.entries, atol=1e-12)


def test_factorize_rejects_singular():
    space = WeightedSpace.unit(2)
    with pytest.raises(SingularMatrixError):
        factorize(ComplexMatrix([[1.0, 2.0], [2.0, 4.0]], space, space))


def test_large_sparse_paths_match_dense(rng, monkeypatch):
    monkeypatch.setattr("ibclab.config.DENSE_LIMIT", 16)
    M, tilde = _weighted_chain(rng, 80)
    values = np.linalg.eigvalsh(tilde)

    factor = LUFactor(M)
    assert factor.sparse
    exact = np.linalg.cond(tilde, 1)
    assert exact / 3 <= factor.condition <= exact * (1 + 1e-8)

    b = random_complex(rng, 80)
    assert_allclose(M.entries @ factor.solve(b), b, atol=1e-10)
    lhs = ComplexMatrix(random_complex(rng, 3, 80), M.domain, WeightedSpace.unit(3))
    assert_allclose((factor.solve_left(lhs) @ M).entries, lhs.entries, atol=1e-10)

    assert M.norm() == pytest.approx(np.linalg.norm(tilde, 2), rel=1e-8)
    assert lowest_eigenvalue(M) == pytest.approx(values[0], rel=1e-8)
    assert distance_to_spectrum(M, 2.5) == pytest.approx(np.min(np.abs(values - 2.5)), abs=1e-8)
