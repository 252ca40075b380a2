from dataclasses import FrozenInstanceError

import numpy as np
import pytest

from ibclab.exceptions import DimensionMismatchError, MultivaluedError, RangeError, RelationError
from ibclab.routers.relations import adjoint_oracle_defect
from ibclab.services.numkernel import ComplexMatrix, WeightedSpace, hermiticity_deviation
from ibclab.services.realization import relative_deviation
from ibclab.services.relations import (
    DIRICHLET_IBC,
    LinearRelation,
    boundary_traces,
    classify_selfadjoint,
    default_classification_lambda,
    f_op,
    f_op_adjoint_route,
    f_op_bordered,
    h0_embeds,
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
from ibclab.services.robin import ibc_resolvent
from ibclab.utils.random_settings import (
    random_complex,
    random_hermitian,
    random_nonsymmetric_relation,
    random_relation,
    random_selfadjoint_relation,
    random_symmetric_relation,
)


@pytest.fixture
def space(rng):
    return WeightedSpace(rng.uniform(0.5, 2.0, 4), "dH")


def _operator(rng, space, hermitian=False):
    tilde = random_hermitian(rng, space.dim) if hermitian else random_complex(rng, space.dim, space.dim)
    return ComplexMatrix.from_tilde(tilde, space, space)


def test_coefficient_relations(space):
    zero, identity = ComplexMatrix.zeros(space, space), ComplexMatrix.identity(space)
    dirichlet = rel_from_coefficients(zero, identity)
    assert dirichlet.domain().dim == 0
    assert dirichlet.multivalued_part().dim == space.dim
    neumann = rel_from_coefficients(identity, zero)
    assert neumann.kernel().dim == space.dim
    assert rel_is_selfadjoint(dirichlet) and rel_is_selfadjoint(neumann)
    with pytest.raises(RelationError):
        rel_from_coefficients(zero, zero)


def test_hermitian_graph_is_selfadjoint(rng, space):
    r = rel_from_operator(_operator(rng, space, hermitian=True))
    assert r.is_single_valued()
    assert rel_is_symmetric(r)
    assert rel_is_selfadjoint(r)


def test_non_hermitian_graph_is_not_symmetric(rng, space):
    assert not rel_is_symmetric(random_nonsymmetric_relation(rng, space))
    assert not rel_is_symmetric(rel_from_operator(_operator(rng, space)))


def test_graph_needs_square_operator(space):
    with pytest.raises(DimensionMismatchError):
        rel_from_operator(ComplexMatrix.zeros(space, WeightedSpace.unit(2)))


@pytest.mark.parametrize("seed", range(5))
def test_inverse_and_adjoint_are_involutions(seed, space):
    r = random_relation(seed, space)
    assert rel_inverse(rel_inverse(r)).equals(r)
    assert rel_adjoint(rel_adjoint(r)).equals(r)
    assert adjoint_oracle_defect(r) <= 1e-10


def test_adjoint_of_graph_is_graph_of_adjoint(rng, space):
    M = _operator(rng, space)
    assert rel_adjoint(rel_from_operator(M)).equals(rel_from_operator(M.H))


def test_sum_and_product_of_graphs(rng, space):
    M, N = _operator(rng, space), _operator(rng, space)
    assert rel_add(rel_from_operator(M), rel_from_operator(N)).equals(rel_from_operator(M + N))
    assert rel_compose(rel_from_operator(M), rel_from_operator(N)).equals(rel_from_operator(M @ N))


def test_sum_with_multivalued_relation(rng, space):
    zero, identity = ComplexMatrix.zeros(space, space), ComplexMatrix.identity(space)
    vertical = rel_from_coefficients(zero, identity)
    assert rel_add(vertical, rel_from_operator(_operator(rng, space))).equals(vertical)


@pytest.mark.parametrize("multivalued_dim", [0, 1, 3])
def test_generated_relations(space, multivalued_dim):
    r = random_selfadjoint_relation(3, space, multivalued_dim)
    assert r.dim == space.dim
    assert r.multivalued_part().dim == multivalued_dim
    assert rel_is_selfadjoint(r)
    strict = random_symmetric_relation(3, space, drop=1)
    assert rel_is_symmetric(strict) and not rel_is_selfadjoint(strict)


def test_apply_single_valued(rng, space):
    M = _operator(rng, space)
    x = random_complex(rng, space.dim)
    np.testing.assert_allclose(rel_from_operator(M).apply(x), M @ x, atol=1e-10)


def test_apply_errors(space):
    identity = ComplexMatrix.identity(space)
    with pytest.raises(MultivaluedError):
        rel_from_coefficients(ComplexMatrix.zeros(space, space), identity).apply(np.ones(space.dim))
    e1 = np.eye(space.dim)[:, :1]
    partial = LinearRelation.from_pairs(e1, e1, space)
    with pytest.raises(RangeError):
        partial.apply(np.eye(space.dim)[:, 1])


def test_gamma_field_routes_agree(seeded):
    lam = seeded.lambda0 + 0.3 + 1j
    explicit = seeded.embedding @ f_op(seeded, lam)
    assert relative_deviation(explicit, f_op_adjoint_route(seeded, lam)) <= 1e-9
    assert relative_deviation(explicit, seeded.embedding @ f_op_bordered(seeded, lam)) <= 1e-10


def test_gamma_field_is_a_right_inverse_of_the_first_trace(seeded):
    trace_b, _ = boundary_traces(seeded)
    lam = seeded.lambda0 + 2j
    F = f_op(seeded, lam)
    assert (trace_b @ F - 1.0).norm() <= 1e-9
    assert ((lam * seeded.embedding - hm_action(seeded)) @ F).norm() <= 1e-9 * (1 + F.norm())


def test_push_through_and_weyl_identities(seeded):
    lam = seeded.lambda0 + 1j
    assert push_through_residual(seeded, lam) <= 1e-10
    assert weyl_identity_residual(seeded, lam, np.conj(lam) + 0.5j) <= 1e-8
    assert hermiticity_deviation(s_op(seeded, default_classification_lambda(seeded))) <= 1e-8


def test_dirichlet_relation_gives_h01_resolvent(seeded):
    zero, identity = ComplexMatrix.zeros(seeded.dH, seeded.dH), ComplexMatrix.identity(seeded.dH)
    relation = rel_from_coefficients(zero, identity)
    lam = seeded.lambda0 + 1j
    assert relative_deviation(hr_resolvent(seeded, relation, lam), ibc_resolvent(seeded, DIRICHLET_IBC, lam)) <= 1e-8


def test_hr_resolvent_matches_direct_solve(seeded, rng):
    relation = rel_from_operator(_operator(rng, seeded.dH, hermitian=True))
    lam = seeded.lambda0 + 0.5 + 2j
    krein = hr_resolvent(seeded, relation, lam)
    direct = hr_constraint(seeded, relation).resolvent(lam)
    assert relative_deviation(krein, direct) <= 1e-8


def test_classification_of_selfadjoint_relation(seeded, rng):
    assert h0_embeds(seeded)
    relation = rel_from_operator(_operator(rng, seeded.dH, hermitian=True))
    verdict = classify_selfadjoint(seeded, relation)
    assert verdict.is_symmetric
    assert verdict.is_selfadjoint_by_theorem and verdict.is_selfadjoint_direct
    assert verdict.agree


def test_classification_of_strictly_symmetric_relation(seeded):
    relation = random_symmetric_relation(11, seeded.dH, drop=1)
    verdict = classify_selfadjoint(seeded, relation)
    assert verdict.is_symmetric
    assert not verdict.is_selfadjoint_by_theorem
    assert verdict.agree


def test_triple_for_hm(seeded):
    trace_b, trace_a = boundary_traces(seeded)
    report = qbt_verify(seeded, trace_b, trace_a, hm_action(seeded), name="H_m")
    assert report.passed, [c.name for c in report.failed_checks]


def test_triple_rejects_shifted_action(seeded):
    trace_b, trace_a = boundary_traces(seeded)
    shifted = hm_action(seeded) + 1j * seeded.embedding
    report = qbt_verify(seeded, trace_b, trace_a, shifted, name="shifted")
    failed = {c.name for c in report.failed_checks}
    assert {"green_identity", "selfadjoint_restriction"} <= failed


@pytest.mark.parametrize("seed", range(17))
def test_hr_resolvent_on_generated_relations(seeded, seed):
    relation = random_selfadjoint_relation(100 + seed, seeded.dH, multivalued_dim=seed % 3)
    lam = seeded.lambda0 + 0.5 + 2j
    krein = hr_resolvent(seeded, relation, lam)
    direct = hr_constraint(seeded, relation).resolvent(lam)
    assert relative_deviation(krein, direct) <= 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_classification_on_generated_relations(seeded, seed):
    drop = seed % 2
    verdict = classify_selfadjoint(seeded, random_symmetric_relation(200 + seed, seeded.dH, drop=drop))
    assert verdict.is_symmetric
    assert verdict.is_selfadjoint_by_theorem == (drop == 0)
    assert verdict.agree


def test_classification_of_non_hermitian_graph(seeded):
    verdict = classify_selfadjoint(seeded, random_nonsymmetric_relation(5, seeded.dH))
    assert not verdict.is_symmetric
    assert not verdict.is_selfadjoint_by_theorem
    assert not verdict.is_selfadjoint_direct


def test_classification_of_dirichlet_relation(seeded):
    zero, identity = ComplexMatrix.zeros(seeded.dH, seeded.dH), ComplexMatrix.identity(seeded.dH)
    verdict = classify_selfadjoint(seeded, rel_from_coefficients(zero, identity))
    assert verdict.is_selfadjoint_by_theorem and verdict.is_selfadjoint_direct


def test_verdict_is_frozen(seeded):
    verdict = classify_selfadjoint(seeded, random_symmetric_relation(3, seeded.dH, drop=0))
    with pytest.raises(FrozenInstanceError):
        verdict.is_selfadjoint_direct = not verdict.is_selfadjoint_direct
