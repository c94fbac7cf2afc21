import numpy as np
import pytest

from momentqm.engine import GroupPath
from momentqm.ham2d import (
    FlowError,
    HamFlowSpec,
    Hamiltonian,
    SurfaceGrid,
    check_step,
    forward_map,
    integrate_flow,
    inverse_map,
    symplectic_drift,
)
from momentqm.ham2d.flow import bump_hamiltonian, fourier_hamiltonian, vector_field
from momentqm.ham2d.grid import poly_bump
from momentqm.ham2d.invariants import polar_angle


def bump(a, R, k=8):
    return Hamiltonian(lambda x, y: a * poly_bump(np.hypot(x, y), R, k), label="bump")


def test_hamiltonian_algebra():
    H = Hamiltonian(lambda x, y: x * y, label="xy")
    assert (-H)(2.0, 3.0) == pytest.approx(-6.0)
    assert H.scaled(2.0)(1.0, 1.0) == pytest.approx(2.0)
    assert H.translated((1.0, 0.0))(1.0, 5.0) == pytest.approx(0.0)
    assert Hamiltonian(lambda x, y: x, scale=0.0).is_zero


def test_vector_field_and_derivatives():
    H = Hamiltonian(lambda x, y: x**2 * y + np.sin(y))
    z = np.array([[0.3, -0.2]])
    X, DX = vector_field(H, z)
    x, y = z[0]
    assert np.allclose(X[0], [-(x * x + np.cos(y)), 2 * x * y], atol=1e-10)
    assert np.allclose(DX[0], [[-2 * x, np.sin(y)], [2 * y, 2 * x]], atol=1e-7)


def test_torus_normalisation_has_zero_mean():
    g = SurfaceGrid("torus", 32)
    H = Hamiltonian(lambda x, y: 1.0 + np.cos(2 * np.pi * x)).normalized(g)
    assert np.mean(H(*g.xy)) == pytest.approx(0.0, abs=1e-14)


def test_disk_normalisation_rejects_leaking_support():
    g = SurfaceGrid("disk", 32)
    with pytest.raises(ValueError):
        Hamiltonian(lambda x, y: x).normalized(g)


def test_centre_rotates_at_the_predicted_rate():
    """Near the centre a * (1 - r^2/R^2)^k turns clockwise at 2 k a / R^2."""
    g = SurfaceGrid("disk", 32)
    a, R, k, T = 0.005, 0.3, 8, 1.0
    path = HamFlowSpec.autonomous(bump(a, R, k), T, dt=1e-2).compile(g)
    _, A = forward_map(g, path, [T], 1e-2)
    centre = g.N // 2
    assert g.axis[centre] == 0.0
    assert polar_angle(A[0, centre, centre]) == pytest.approx(-2 * k * a * T / R**2, rel=1e-8)


def test_inverse_map_composes_to_identity():
    g = SurfaceGrid("disk", 32)
    path = HamFlowSpec([(0.6, bump(0.02, 0.3)), (0.4, bump(-0.01, 0.25))]).compile(g)
    st = integrate_flow(g, path, times=[0.3, 1.0], dt=1e-2)
    assert st.drift < 1e-8
    back = path.then(~path)
    phis, As = forward_map(g, back, [back.duration], 1e-2)
    x, y = g.xy
    assert np.allclose(phis[0], np.stack([x, y], -1), atol=1e-10)
    # inverse along the path is the flow of the reversed path
    psi, B = inverse_map(g, path, [1.0], 1e-2)
    phi2, A2 = forward_map(g, ~path, [1.0], 1e-2)
    assert np.allclose(psi, phi2, atol=1e-12)
    assert np.allclose(B, A2, atol=1e-10)


def test_symplectic_drift():
    A = np.array([[[2.0, 0.0], [0.0, 0.5]], [[1.0, 1e-3], [0.0, 1.0]]])
    assert symplectic_drift(A) == pytest.approx(0.0)
    assert symplectic_drift(2 * A) == pytest.approx(3.0)


def test_step_bound():
    g = SurfaceGrid("torus", 16)
    H = Hamiltonian(lambda x, y: 50 * np.sin(2 * np.pi * x))
    with pytest.raises(FlowError):
        check_step(g, GroupPath.single(H), 1e-2)
    check_step(g, GroupPath.single(H), 1e-5)


def test_time_dependent_spec_freezes_midpoints():
    spec = HamFlowSpec.time_dependent(lambda t, x, y: t * x, m=4, label="tx")
    assert [d for d, _ in spec.segments] == [0.25] * 4
    assert spec.segments[1][1](1.0, 0.0) == pytest.approx(0.375)


def test_random_families(rng):
    g = SurfaceGrid("disk", 32)
    for _ in range(5):
        H = bump_hamiltonian(rng, 0.4, amplitude=0.02)
        H.normalized(g)  # support stays inside the disk
    F = fourier_hamiltonian(rng, amplitude=0.01)
    t = SurfaceGrid("torus", 32)
    assert np.max(np.abs(F(*t.xy))) > 0
    assert abs(np.mean(F(*t.xy))) < 1e-15
