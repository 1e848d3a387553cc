import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcompress.algebra import (MultiplicityMismatchError, algebra_generation_test,
                               algebra_hermitian_basis, block_diagonalize, compound_invariant,
                               compound_matrix, reduce_multiplicities, reduced_observable_set)
from qcompress.generators import (degree3_example, generic_pair, random_block_instance,
                                  two_projections)
from qcompress.matcore import ObservableSet, dag, random_hermitian, random_unitary


def hidden_blocks(blocks, rng, n_ops=2):
    dim = sum(d * m for d, m in blocks)
    u = random_unitary(dim, rng)
    ops = []
    for _ in range(n_ops):
        parts = [np.kron(random_hermitian(d, rng), np.eye(m)) for d, m in blocks]
        out = np.zeros((dim, dim), dtype=complex)
        pos = 0
        for p in parts:
            k = p.shape[0]
            out[pos:pos + k, pos:pos + k] = p
            pos += k
        ops.append(u @ out @ dag(u))
    return ops


def test_full_algebra_from_generic_pair():
    a, b = generic_pair(4, 0)
    bs = block_diagonalize(ObservableSet.from_matrices([a, b]))
    assert bs.blocks == ((4, 1),)
    assert bs.is_full
    assert bs.algebra_dim == 16


def test_commuting_operators_give_scalar_blocks():
    rng = np.random.default_rng(0)
    u = random_unitary(4, rng)
    ops = [u @ np.diag(rng.standard_normal(4)) @ dag(u) for _ in range(2)]
    bs = block_diagonalize(ObservableSet.from_matrices(ops))
    assert sorted(bs.blocks) == [(1, 1)] * 4


@pytest.mark.parametrize("blocks", [[(2, 1), (1, 1)], [(2, 2)], [(3, 1), (2, 1)],
                                    [(2, 1), (2, 1)], [(1, 2), (2, 1)]])
def test_block_pattern_recovered(blocks):
    rng = np.random.default_rng(len(blocks) + blocks[0][0])
    ops = hidden_blocks(blocks, rng)
    bs = block_diagonalize(ObservableSet.from_matrices(ops))
    assert sorted(bs.blocks) == sorted(blocks)
    dims = bs.block_dims
    assert dims == sorted(dims, reverse=True)
    assert bs.unitary.shape == (sum(d * m for d, m in blocks),) * 2
    np.testing.assert_allclose(bs.unitary @ dag(bs.unitary), np.eye(bs.ambient_dim), atol=1e-10)


def test_reduction_and_reassembly():
    rng = np.random.default_rng(5)
    ops = hidden_blocks([(2, 2), (1, 1)], rng)
    obs = ObservableSet.from_matrices(ops)
    red = reduced_observable_set(obs)
    canon = obs.canonical()
    assert red.reduced_dim == 3
    assert red.num_blocks == 2
    for k, op in enumerate(canon.operators):
        np.testing.assert_allclose(red.reassemble(k), op, atol=1e-9)
    np.testing.assert_allclose(red.block(0, 0), np.eye(2), atol=1e-12)


def test_reduction_detects_wrong_structure():
    rng = np.random.default_rng(6)
    ops = hidden_blocks([(2, 2)], rng)
    obs = ObservableSet.from_matrices(ops)
    bs = block_diagonalize(obs.canonical())
    bad = obs.canonical().operators + (random_hermitian(4, rng),)
    with pytest.raises(MultiplicityMismatchError):
        reduce_multiplicities(ObservableSet(4, bad, True), bs)


def test_block_diagonalize_is_deterministic():
    a, b = two_projections(6, 3)
    obs = ObservableSet.from_matrices([a, b])
    u1 = block_diagonalize(obs, seed=4).unitary
    u2 = block_diagonalize(obs, seed=4).unitary
    np.testing.assert_array_equal(u1, u2)


def test_algebra_basis_dimension():
    a, b = degree3_example()
    assert len(algebra_hermitian_basis([np.eye(3), a, b])) == 9


def test_compound_matrix_properties():
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    # Cauchy-Binet: C_k(AB) = C_k(A) C_k(B)
    np.testing.assert_allclose(compound_matrix(a @ b, 2),
                               compound_matrix(a, 2) @ compound_matrix(b, 2), atol=1e-10)
    assert compound_matrix(a, 4).shape == (1, 1)
    assert compound_matrix(a, 4)[0, 0] == pytest.approx(np.linalg.det(a))


def test_compound_invariant_detects_shared_subspace():
    rng = np.random.default_rng(8)
    ops = hidden_blocks([(2, 1), (1, 1)], rng)
    ratio1, _ = compound_invariant(*ops, 1)
    ratio2, _ = compound_invariant(*ops, 2)
    assert ratio1 < 1e-10 and ratio2 < 1e-10
    a, b = generic_pair(3, 1)
    assert min(compound_invariant(a, b, k)[0] for k in (1, 2)) > 1e-6


def test_generation_test_two_projections():
    p, q = two_projections(8, 8)
    v = algebra_generation_test([p, q])
    assert not v.full
    assert v.vanishing_k == (2, 4, 6)
    assert v.consistent


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_generation_test_consistent_on_random_blocks(seed):
    rng = np.random.default_rng(seed)
    ops, blocks = random_block_instance(rng, max_dim=5)
    if ops[0].shape[0] < 2:
        return
    v = algebra_generation_test(ops, seed)
    assert v.consistent
    assert sorted(v.blocks) == sorted(blocks)
    assert bool(v) == (blocks == [(ops[0].shape[0], 1)])
