import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcompress.algebra import reduced_observable_set
from qcompress.dimension import (InterpolationProblem, choi_apply, compression_dimension,
                                 dimension_from_reduced, solve_psd_feasibility,
                                 verify_interpolation)
from qcompress.generators import (degree3_example, generic_pair, planted_instance,
                                  random_block_instance, two_projections)
from qcompress.matcore import ObservableSet, dag, random_unitary


def test_identity_only_gives_one():
    rep = compression_dimension(ObservableSet.from_matrices([np.eye(3)]))
    assert rep.compression_dimension == 1
    assert rep.blocks == ((1, 3),)


def test_commutative_set_gives_one():
    rng = np.random.default_rng(0)
    u = random_unitary(4, rng)
    ops = [u @ np.diag(rng.random(4)) @ dag(u) for _ in range(3)]
    rep = compression_dimension(ObservableSet.from_matrices(ops))
    assert rep.compression_dimension == 1
    assert rep.classical_register == 4


def test_full_algebra_is_incompressible():
    rep = compression_dimension(ObservableSet.from_matrices(list(degree3_example())))
    assert rep.compression_dimension == 3
    assert rep.redundant_blocks == ()
    assert rep.outcomes == {}


def test_two_projections_give_two():
    p, q = two_projections(6, 1)
    rep = compression_dimension(ObservableSet.from_matrices([p, q]))
    assert rep.compression_dimension == 2
    assert rep.lower_bound_min_block == rep.upper_bound_max_block == 2


def test_planted_redundant_block_has_valid_certificate():
    inst = planted_instance("claim1", 1)
    rep = compression_dimension(ObservableSet.from_matrices(list(inst.operators)))
    assert rep.redundant_blocks == (0,)
    cert = rep.certificates[0]
    check = verify_interpolation(InterpolationProblem(rep.reduced, 0), cert)
    assert check.ok
    assert check.choi_min_eig > -1e-9
    assert check.unitality < 1e-7
    assert cert.objective_residual >= -1e-6


def test_noncommutative_block_not_rebuilt_from_scalars():
    inst = planted_instance("claim3", 2)
    rep = compression_dimension(ObservableSet.from_matrices(list(inst.operators)))
    out = rep.outcomes[0]
    assert not out.feasible
    assert out.objective_residual < -1e-4
    assert out.witness is not None


def test_trine_block_not_redundant():
    inst = planted_instance("claim2", 3)
    rep = compression_dimension(ObservableSet.from_matrices(list(inst.operators)))
    assert rep.compression_dimension == 2
    assert not rep.outcomes[0].feasible


def test_choi_apply_identity_map():
    d = 3
    omega = np.eye(d).reshape(-1, 1)
    choi = omega @ omega.T  # unnormalized Choi of the identity map
    x = np.arange(9).reshape(3, 3).astype(complex)
    np.testing.assert_allclose(choi_apply(choi, x), x)


def test_problem_validation():
    red = reduced_observable_set(ObservableSet.from_matrices(list(two_projections(4, 0))))
    with pytest.raises(ValueError):
        InterpolationProblem(red, 0, frozenset({0}))
    with pytest.raises(IndexError):
        InterpolationProblem(red, 5)
    prob = InterpolationProblem(red, 0)
    assert prob.kept_blocks == [1]
    assert len(prob.sources()) == len(prob.targets()) == red.num_operators


def test_solver_rejects_non_identity_first():
    red = reduced_observable_set(ObservableSet.from_matrices(list(two_projections(4, 0))))
    swapped = type(red)(red.structure, red.reduced_operators[::-1])
    with pytest.raises(ValueError):
        solve_psd_feasibility(InterpolationProblem(swapped, 0))


def test_report_to_dict_is_plain():
    inst = planted_instance("claim1", 0)
    d = compression_dimension(ObservableSet.from_matrices(list(inst.operators))).to_dict()
    assert d["compression_dimension"] == 1
    assert d["redundant_blocks"] == [0]
    assert set(d["sdp"]) == {"0", "1"}


def test_generic_pair_full():
    rep = compression_dimension(ObservableSet.from_matrices(list(generic_pair(5, 3))))
    assert rep.compression_dimension == 5


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_dimension_sandwich(seed):
    rng = np.random.default_rng(seed)
    ops, blocks = random_block_instance(rng, max_dim=5, n_ops=2)
    rep = compression_dimension(ObservableSet.from_matrices(ops), seed=seed % 1000)
    dims = [b[0] for b in rep.blocks]
    assert min(dims) <= rep.compression_dimension <= max(dims)
    assert rep.compression_dimension in dims
    assert sorted(rep.blocks) == sorted(blocks)
    # redundant blocks form a prefix of the sorted list
    assert rep.redundant_blocks == tuple(range(len(rep.redundant_blocks)))


def test_loop_requires_sorted_blocks():
    inst = planted_instance("claim1")
    red = reduced_observable_set(ObservableSet.from_matrices(list(inst.operators)))
    bs = red.structure
    flipped = type(bs)(bs.ambient_dim, bs.unitary, bs.blocks[::-1], bs.algebra_dim)
    bad = type(red)(flipped, tuple(ops[::-1] for ops in red.reduced_operators))
    with pytest.raises(ValueError):
        dimension_from_reduced(bad)
