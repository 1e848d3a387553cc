import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcompress.curvebound import (PathTrackingError, TrackSettings, branch_points,
                                  discriminant_coefficients, expansion_first_order,
                                  expansion_self_test, extract_curve, factor_by_monodromy,
                                  gen_irreducible_example, geometric_lower_bound,
                                  merge_branch_points, polish_branch_point, real_crossings, shifted_pencil,
                                  squarefree_part)
from qcompress.dimension import compression_dimension
from qcompress.generators import degree3_example, generic_pair, two_projections
from qcompress.matcore import ObservableSet, dag, random_hermitian, random_unitary


def block_pair(dims, seed):
    rng = np.random.default_rng(seed)
    dim = sum(dims)
    e1 = np.zeros((dim, dim), dtype=complex)
    e2 = np.zeros((dim, dim), dtype=complex)
    pos = 0
    for d in dims:
        e1[pos:pos + d, pos:pos + d] = random_hermitian(d, rng)
        e2[pos:pos + d, pos:pos + d] = random_hermitian(d, rng)
        pos += d
    u = random_unitary(dim, rng)
    return u @ e1 @ dag(u), u @ e2 @ dag(u)


def test_degree3_curve_coefficients():
    # det[x - A + zB] = (x + 1/2)(x^2 - 1 - z^2)
    a, b = degree3_example()
    curve = extract_curve(a, -b)
    expected = np.zeros((4, 4))
    expected[3, 0] = 1
    expected[2, 0] = 0.5
    expected[1, 0] = -1
    expected[1, 2] = -1
    expected[0, 0] = -0.5
    expected[0, 2] = -0.5
    np.testing.assert_allclose(curve.coefficients, expected, atol=1e-12)


def test_curve_matches_determinant():
    e1, e2 = generic_pair(4, 1)
    curve = extract_curve(e1, e2)
    for x, z in [(0.3, -1.2), (1 + 1j, 0.5j), (-2.0, 3.0)]:
        direct = np.linalg.det(x * np.eye(4) - e1 - z * e2)
        assert abs(curve(x, z) - direct) < 1e-8 * max(1, abs(direct))


def test_hermitian_pencil_is_hyperbolic():
    e1, e2 = generic_pair(5, 2)
    curve = extract_curve(e1, e2)
    assert curve.hyperbolicity_residual(np.linspace(-3, 3, 13)) < 1e-6


def test_squarefree_part_of_repeated_factor():
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    y = np.diag([1.0, -1.0])
    e1, e2 = np.kron(np.diag([0.0, 1.0]) + x, np.eye(2)), np.kron(y, np.eye(2))
    sq = squarefree_part(extract_curve(e1, e2))
    assert sq.multiplicity_pattern == (2, 2)
    assert sq.reduced_degree == 2


def test_discriminant_vanishes_at_branch_points():
    e1, e2 = generic_pair(3, 3)
    curve = extract_curve(e1, e2)
    rest, crossings = branch_points(curve)
    assert crossings == []
    assert len(rest) == 6
    # at a branch point two roots coincide
    for z in rest:
        r = np.sort_complex(curve.roots(z))
        gaps = np.abs(r[:, None] - r[None, :]) + np.eye(3) * 1e9
        assert gaps.min() < 1e-3
    # no branch point of a Hermitian pencil lies on the real axis
    assert np.abs(rest.imag).min() > 1e-6


def test_real_crossings_found_for_block_pencil():
    e1, e2 = block_pair([1, 1], 4)
    curve = extract_curve(e1, e2)
    cr = real_crossings(curve, 10.0)
    assert len(cr) == 1
    assert cr[0][1] == 2


def test_discriminant_degree_bound():
    e1, e2 = generic_pair(4, 5)
    coef = discriminant_coefficients(extract_curve(e1, e2))
    assert len(coef) == 4 * 3 + 1


def test_merge_branch_points_clusters_rings():
    center = 1.0 + 1.0j
    ring = center + 1e-4 * np.exp(2j * np.pi * np.arange(5) / 5)
    merged = merge_branch_points(np.concatenate([ring, [5.0 + 0j]]))
    assert len(merged) == 2
    assert abs(merged[0] - center) < 1e-12


@pytest.mark.parametrize("dim", [2, 3, 4, 5, 6])
def test_irreducible_family(dim):
    a, b = gen_irreducible_example(dim)
    fac = factor_by_monodromy(extract_curve(-a, -b))
    assert fac.real_factor_degrees == (dim,)
    assert fac.min_real_degree == dim


def test_irreducible_pencil_shape():
    a, b = gen_irreducible_example(4)
    np.testing.assert_allclose(a + 1j * b + 0.7 * np.eye(4), shifted_pencil(0.7, 4))


@pytest.mark.parametrize("dim", [2, 3, 4, 5, 6])
def test_expansion_identity(dim):
    chk = expansion_self_test(dim, x=0.3, eps=(1e-4, 1e-5))
    assert chk.derivative_residual <= 1e-6
    assert chk.ok


def test_expansion_first_order_by_direct_difference():
    _, b = gen_irreducible_example(3)
    x, h = 0.7 - 0.2j, 1e-6
    f = lambda e: np.linalg.det(shifted_pencil(x, 3) + e * b)  # noqa: E731
    assert abs((f(h) - f(-h)) / (2 * h) - expansion_first_order(x, 3)) < 1e-6


def test_degree3_factors():
    a, b = degree3_example()
    fac = factor_by_monodromy(extract_curve(a, -b))
    assert sorted(fac.real_factor_degrees) == [1, 2]
    assert fac.degree == 3


@pytest.mark.parametrize("dims", [[2, 3], [1, 1, 1], [1, 2, 2, 1]])
def test_block_pencils_factor_by_blocks(dims):
    e1, e2 = block_pair(dims, sum(dims))
    fac = factor_by_monodromy(extract_curve(e1, e2))
    assert sorted(fac.real_factor_degrees) == sorted(dims)
    assert sum(fac.complex_orbit_sizes) == sum(dims)


def test_close_real_crossings_resolved():
    # three crossings within 0.04 of each other near z = 0.4
    e1, e2 = block_pair([1, 2, 2, 1], 6)
    curve = extract_curve(e1, e2)
    rest, cr = branch_points(curve)
    near = [z for z, _ in cr if 0.38 < z < 0.44]
    assert len(near) == 3
    assert np.abs(rest.imag).min() > 0.5
    assert len(rest) + sum(k for _, k in cr) == 30
    fac = factor_by_monodromy(curve)
    assert sorted(fac.real_factor_degrees) == [1, 1, 2, 2]


def test_polish_branch_point_makes_roots_meet():
    a, b = degree3_example()
    curve = extract_curve(a, -b)
    # x^2 = 1 + z^2 has branch points at z = +-i
    z = polish_branch_point(curve, 0.001 + 1.003j)
    assert abs(z - 1j) < 1e-9
    r = np.sort_complex(curve.roots(z))
    assert min(abs(r[i] - r[j]) for i in range(3) for j in range(i)) < 1e-6


def test_zero_second_operator():
    e1 = np.diag([0.1, 0.5, -1.0])
    fac = factor_by_monodromy(extract_curve(e1, np.zeros((3, 3))))
    assert fac.real_factor_degrees == (1, 1, 1)


def test_repeated_factor_multiplicity():
    x = np.array([[0.2, 1.0, 0.0], [1.0, -0.3, 0.5], [0.0, 0.5, 0.9]])
    y = np.array([[1.0, 0.0, 0.4], [0.0, -1.0, 0.0], [0.4, 0.0, 0.2]])
    fac = factor_by_monodromy(extract_curve(np.kron(x, np.eye(2)), np.kron(y, np.eye(2))))
    assert fac.real_factor_degrees == (3,)
    assert fac.multiplicities == (2,)
    assert fac.degree == 6


def test_step_budget_raises():
    e1, e2 = generic_pair(3, 6)
    with pytest.raises(PathTrackingError):
        factor_by_monodromy(extract_curve(e1, e2), TrackSettings(max_steps=3))


@pytest.mark.parametrize("dim", [4, 6, 8])
def test_two_projection_bound(dim):
    p, q = two_projections(dim, dim)
    gb = geometric_lower_bound(ObservableSet.from_matrices([p, q]), ceiling=2)
    assert gb.bound == 2


def test_generic_bound_is_full():
    e1, e2 = generic_pair(4, 7)
    gb = geometric_lower_bound(ObservableSet.from_matrices([e1, e2]), pair_choice="given")
    assert gb.bound == 4


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dims=st.sampled_from([[1, 2], [2, 2], [1, 1, 2], [3]]))
def test_orbits_partition_and_bound_below_dimension(seed, dims):
    e1, e2 = block_pair(dims, seed)
    obs = ObservableSet.from_matrices([e1, e2])
    fac = geometric_lower_bound(obs, seed=seed % 1000, draws=1).factorization
    assert fac.degree == sum(dims)
    assert sum(fac.complex_orbit_sizes) == sum(fac.real_factor_degrees)
    d = compression_dimension(obs).compression_dimension
    assert fac.min_real_degree <= d
