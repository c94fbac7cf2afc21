import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentqm.symplectic import (
    AngleTrack,
    CompatibleJ,
    NotSymplecticError,
    SiegelPoint,
    SpAlgebra,
    SympMatrix,
    UndersampledError,
    algebra_residual,
    check_compatible,
    conj_action,
    det_complex,
    j0,
    j_to_siegel,
    mat_exp,
    mobius,
    polar_unitary,
    random_algebra,
    random_compatible,
    random_symplectic,
    siegel_to_j,
    sp_inverse,
    symplectic_residual,
    transvection_to,
    varangle,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.sampled_from([1, 2, 3])


def test_j0_squares_to_minus_identity():
    for n in (1, 2, 3):
        J = j0(n)
        assert np.array_equal(J @ J, -np.eye(2 * n))
        assert np.array_equal(J.T, -J)


@given(seeds, dims)
def test_random_symplectic_preserves_j0(seed, n):
    g = random_symplectic(np.random.default_rng(seed), n)
    assert symplectic_residual(g) < 1e-10 * max(1, np.abs(g).max() ** 2)
    assert np.allclose(sp_inverse(g) @ g, np.eye(2 * n), atol=1e-9)


@given(seeds, dims)
def test_exponential_of_algebra_is_symplectic(seed, n):
    X = random_algebra(np.random.default_rng(seed), n, 0.5)
    assert algebra_residual(X) < 1e-12
    assert symplectic_residual(mat_exp(X)) < 1e-10


def test_typed_wrappers_reject_bad_input():
    with pytest.raises(NotSymplecticError):
        SympMatrix(np.diag([2.0, 3.0]))
    with pytest.raises(ValueError):
        SpAlgebra(np.eye(2))
    with pytest.raises(ValueError):
        CompatibleJ(np.eye(2))
    with pytest.raises(ValueError):
        CompatibleJ(-j0(1))  # J^2 = -I but the metric is negative
    with pytest.raises(ValueError):
        SiegelPoint([[0.0]], [[-1.0]])


def test_mat_exp_overflow_is_reported():
    with pytest.raises(FloatingPointError):
        mat_exp(np.array([[800.0, 0.0], [0.0, -800.0]]))


@given(seeds, dims)
def test_siegel_round_trip(seed, n):
    J = random_compatible(np.random.default_rng(seed), n)
    Z = j_to_siegel(J)
    assert np.allclose(siegel_to_j(Z).entries, J, atol=1e-9 * np.abs(J).max())


@given(seeds, dims)
def test_siegel_map_is_equivariant(seed, n):
    rng = np.random.default_rng(seed)
    J = random_compatible(rng, n, 0.5)
    g = random_symplectic(rng, n, 0.5)
    Z = j_to_siegel(J)
    lhs = siegel_to_j(mobius(g, Z)).entries
    rhs = conj_action(g, J)
    assert np.allclose(lhs, rhs, atol=1e-8 * max(1.0, np.abs(rhs).max()))


def test_siegel_base_point():
    assert np.allclose(siegel_to_j(np.array([[1j]])).entries, j0(1))
    z = j_to_siegel(j0(2))
    assert np.allclose(z.Z, 1j * np.eye(2))


@given(seeds, dims)
def test_polar_factor_is_unitary_symplectic(seed, n):
    g = random_symplectic(np.random.default_rng(seed), n)
    U, P = polar_unitary(g)
    assert np.allclose(P @ U, g, atol=1e-9 * np.abs(g).max())
    assert np.allclose(U @ j0(n), j0(n) @ U, atol=1e-9)
    assert np.all(np.linalg.eigvalsh(P) > 0)
    assert abs(abs(det_complex(U, tol=1e-8)) - 1) < 1e-8


def test_det_complex_of_rotation():
    t = 0.3
    U = mat_exp(t * j0(2))
    # J0 acts as multiplication by i on C^2, so exp(t J0) is e^{it} I
    assert np.isclose(det_complex(U), np.exp(2j * t))


def test_varangle_counts_turns():
    t = np.linspace(0, 1, 200)
    assert np.isclose(varangle(np.exp(2j * np.pi * 3 * t)), 3.0)
    assert np.isclose(varangle(np.exp(-2j * np.pi * t)), -1.0)
    assert np.isclose(AngleTrack(np.exp(1j * np.linspace(0, 1, 20))).turns, 1 / (2 * np.pi))
    with pytest.raises(UndersampledError):
        varangle(np.exp(2j * np.pi * np.array([0.0, 0.5])))


def test_transvection_moves_j0(rng):
    J = random_compatible(rng, 2)
    h = transvection_to(J)
    assert np.allclose(h, h.T)
    assert np.allclose(conj_action(h, j0(2)), J, atol=1e-9)
    check_compatible(J)
