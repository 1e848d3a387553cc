import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcompress.matcore import (DimensionError, NotHermitianError, ObservableSet,
                               QuantumChannel, SpectralRadiusError, apply_channel,
                               as_hermitian, cesaro_mean, channel_from_transfer, choi_matrix,
                               conjugation_channel, dag, depolarizing_channel, dual_channel,
                               identity_channel, independent_hermitian_basis, is_cptp,
                               is_unital, partial_trace, random_density_matrix,
                               random_hermitian, random_unitary, transfer_matrix,
                               transpose_map, unitary_channel, unvec, vec)


def random_channel(dim_in, dim_out, rng, count=3):
    g = [rng.standard_normal((dim_out, dim_in)) + 1j * rng.standard_normal((dim_out, dim_in))
         for _ in range(count)]
    s = sum(dag(k) @ k for k in g)
    w, v = np.linalg.eigh(s)
    inv_half = (v / np.sqrt(w)) @ dag(v)
    return QuantumChannel.from_kraus([k @ inv_half for k in g])


def test_vec_is_column_stacking():
    a = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(vec(a), [1, 3, 2, 4])
    np.testing.assert_array_equal(unvec(vec(a), 2), a)


def test_vec_kron_identity():
    # vec(A X B) = (B^T ⊗ A) vec(X) for column stacking
    rng = np.random.default_rng(0)
    a, x, b = (rng.standard_normal((3, 3)) for _ in range(3))
    np.testing.assert_allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x), atol=1e-12)


def test_as_hermitian_rejects_and_symmetrizes():
    with pytest.raises(NotHermitianError):
        as_hermitian(np.array([[0, 1], [0, 0]]))
    h = as_hermitian(np.array([[1, 1 + 1e-12], [1, 2]]))
    np.testing.assert_array_equal(h, dag(h))
    with pytest.raises(DimensionError):
        as_hermitian(np.ones((2, 3)))


def test_partial_trace():
    rng = np.random.default_rng(1)
    a, b = random_density_matrix(2, rng), random_density_matrix(3, rng)
    ab = np.kron(a, b)
    np.testing.assert_allclose(partial_trace(ab, (2, 3), 0), b, atol=1e-12)
    np.testing.assert_allclose(partial_trace(ab, (2, 3), 1), a, atol=1e-12)


def test_random_objects():
    rng = np.random.default_rng(2)
    u = random_unitary(4, rng)
    np.testing.assert_allclose(u @ dag(u), np.eye(4), atol=1e-12)
    rho = random_density_matrix(4, rng)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.linalg.eigvalsh(rho).min() > -1e-12
    h = random_hermitian(4, rng)
    np.testing.assert_allclose(h, dag(h))


def test_observable_set_canonical_puts_identity_first():
    rng = np.random.default_rng(3)
    e = random_hermitian(3, rng)
    obs = ObservableSet.from_matrices([e, np.eye(3) - e, 2 * e])
    canon = obs.canonical()
    np.testing.assert_allclose(canon.operators[0], np.eye(3))
    assert len(canon.operators) == 2


def test_independent_basis_drops_dependent():
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    basis = independent_hermitian_basis([a, b, a + b, 3 * a])
    assert len(basis) == 2


def test_observable_set_rejects_mixed_dims():
    with pytest.raises(DimensionError):
        ObservableSet.from_matrices([np.eye(2), np.eye(3)])


def test_standard_channels_are_cptp():
    rng = np.random.default_rng(4)
    for ch in (identity_channel(3), depolarizing_channel(3),
               unitary_channel(random_unitary(3, rng)), random_channel(3, 2, rng)):
        assert is_cptp(ch)
    # an isometry conjugation is trace preserving
    v = random_unitary(4, rng)[:, :2]
    assert is_cptp(conjugation_channel(dag(v)))


def test_depolarizing_output():
    rng = np.random.default_rng(5)
    rho = random_density_matrix(3, rng)
    np.testing.assert_allclose(apply_channel(depolarizing_channel(3), rho), np.eye(3) / 3,
                               atol=1e-12)


def test_transpose_is_positive_but_not_cp():
    t = transpose_map(2)
    assert t.kraus is None
    diag = is_cptp(t)
    assert not diag
    assert diag.choi_min_eig == pytest.approx(-0.5)
    rho = random_density_matrix(2, np.random.default_rng(6))
    np.testing.assert_allclose(apply_channel(t, rho), rho.T, atol=1e-12)


def test_choi_round_trip():
    rng = np.random.default_rng(7)
    ch = random_channel(2, 3, rng)
    back = QuantumChannel.from_choi(choi_matrix(ch), 2, 3)
    rho = random_density_matrix(2, rng)
    np.testing.assert_allclose(apply_channel(back, rho), apply_channel(ch, rho), atol=1e-10)
    assert abs(np.trace(choi_matrix(ch)) - 1) < 1e-10


def test_transfer_matrix_round_trip():
    rng = np.random.default_rng(8)
    ch = random_channel(3, 2, rng)
    tm = transfer_matrix(ch)
    back = channel_from_transfer(tm, 3, 2)
    rho = random_density_matrix(3, rng)
    np.testing.assert_allclose(apply_channel(back, rho), apply_channel(ch, rho), atol=1e-10)
    np.testing.assert_allclose(tm @ vec(rho), vec(apply_channel(ch, rho)), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d_in=st.integers(1, 3), d_out=st.integers(1, 3))
def test_dual_channel_adjointness(seed, d_in, d_out):
    rng = np.random.default_rng(seed)
    ch = random_channel(d_in, d_out, rng)
    rho = random_density_matrix(d_in, rng)
    e = random_hermitian(d_out, rng)
    lhs = np.trace(apply_channel(ch, rho) @ e)
    rhs = np.trace(rho @ apply_channel(dual_channel(ch), e))
    assert abs(lhs - rhs) < 1e-10
    assert is_unital(dual_channel(ch)) or d_in != d_out


def test_dual_of_choi_only_map():
    t = transpose_map(2)
    d = dual_channel(t)
    a = random_hermitian(2, np.random.default_rng(9))
    np.testing.assert_allclose(apply_channel(d, a), a.T, atol=1e-12)


def test_cesaro_mean_of_unitary_channel():
    # fixed points of a diagonal unitary conjugation are the diagonal matrices
    u = np.diag(np.exp(1j * np.array([0.1, 0.7, 2.0])))
    tm = transfer_matrix(unitary_channel(u))
    p = cesaro_mean(tm)
    assert np.linalg.matrix_rank(p, tol=1e-8) == 3
    x = np.arange(9).reshape(3, 3).astype(complex)
    np.testing.assert_allclose(unvec(p @ vec(x), 3), np.diag(np.diag(x)), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_cesaro_idempotent_and_absorbing(seed):
    rng = np.random.default_rng(seed)
    tm = transfer_matrix(random_channel(2, 2, rng, count=2))
    p = cesaro_mean(tm)
    np.testing.assert_allclose(p @ p, p, atol=1e-8)
    np.testing.assert_allclose(tm @ p, p, atol=1e-8)
    np.testing.assert_allclose(p @ tm, p, atol=1e-8)


def test_cesaro_rejects_expanding_map():
    with pytest.raises(SpectralRadiusError):
        cesaro_mean(2 * np.eye(4))
