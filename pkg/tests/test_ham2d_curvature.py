import numpy as np
import pytest

from momentqm.ham2d import JField, SurfaceGrid, hermitian_scalar_curvature, moment_map_ham
from momentqm.ham2d.curvature import gaussian_curvature, metric_coefficients


def warped(N, amp=0.3):
    g = SurfaceGrid("torus", N)
    x, _ = g.xy
    w = 2 * np.pi
    f = amp * np.sin(w * x)
    fp, fpp = amp * w * np.cos(w * x), -amp * w * w * np.sin(w * x)
    # metric e^-f dx^2 + e^f dy^2 has K = -(f'' + f'^2) e^f / 2
    K = -0.5 * (fpp + fp**2) * np.exp(f)
    return g, JField(g, np.zeros_like(x), np.exp(f)), K


def test_flat_structure_has_zero_curvature():
    g = SurfaceGrid("torus", 16)
    assert np.all(hermitian_scalar_curvature(JField.constant(g)) == 0)
    assert moment_map_ham(g, np.ones((16, 16)), JField.constant(g)) == 0.0


def test_constant_shear_is_flat():
    g = SurfaceGrid("torus", 16)
    assert np.allclose(hermitian_scalar_curvature(JField.constant(g, 0.4, 2.0)), 0.0, atol=1e-12)


def test_metric_has_unit_area_density(rng):
    X, Y = rng.normal(size=4), np.exp(rng.normal(size=4))
    E, F, G = metric_coefficients(X, Y)
    assert np.allclose(E * G - F * F, 1.0)


@pytest.mark.parametrize("method,tol", [("spectral", 1e-9), ("fd4", 5e-3)])
def test_warped_metric_curvature(method, tol):
    g, J, K = warped(64)
    S = hermitian_scalar_curvature(J, method)
    assert np.allclose(S, 2 * K, atol=tol * np.max(np.abs(K)))


def test_gauss_bonnet_on_torus(rng):
    g = SurfaceGrid("torus", 48)
    J = JField.random_smooth(g, rng, amplitude=0.3)
    S = hermitian_scalar_curvature(J)
    assert abs(g.integrate(S)) < 1e-10 * g.integrate(np.abs(S))


def test_gaussian_curvature_of_sphere_chart():
    """Stereographic metric 4 / (1 + r^2)^2 has K = 1; checked away from the box edge."""
    g = SurfaceGrid("disk", 64, R=0.4)
    x, y = g.xy
    lam = 4.0 / (1 + x * x + y * y) ** 2
    K = gaussian_curvature(g, lam, np.zeros_like(lam), lam, method="fd4")
    m = np.hypot(x, y) < 0.2
    assert np.allclose(K[m], 1.0, atol=1e-3)
