import numpy as np
import pytest

from momentqm.ham2d import JField, SurfaceGrid, read_grid, smooth_bump, write_grid
from momentqm.ham2d.grid import J2_to_siegel, poly_bump, siegel_to_J2


def test_grid_geometry():
    t = SurfaceGrid("torus", 32)
    assert t.h == pytest.approx(1 / 32)
    assert t.integrate(np.ones((32, 32))) == pytest.approx(1.0)
    d = SurfaceGrid("disk", 32, R=0.4)
    assert d.period == pytest.approx(1.0)
    assert 0.0 in d.axis
    assert d.inside.sum() * d.dA == pytest.approx(np.pi * 0.16, rel=0.05)
    with pytest.raises(ValueError):
        SurfaceGrid("sphere", 32)
    with pytest.raises(ValueError):
        SurfaceGrid("torus", 8)


@pytest.mark.parametrize("method,tol", [("spectral", 1e-10), ("fd4", 2e-3)])
def test_derivatives_of_trig_field(method, tol):
    g = SurfaceGrid("torus", 48)
    x, y = g.xy
    w = 2 * np.pi
    f = np.sin(w * x) * np.cos(2 * w * y)
    assert np.allclose(g.deriv(f, 1, 0, method), w * np.cos(w * x) * np.cos(2 * w * y), atol=tol * w)
    assert np.allclose(g.deriv(f, 0, 2, method), -4 * w * w * f, atol=tol * 4 * w * w)
    assert np.allclose(g.deriv(f, 1, 1, method), -2 * w * w * np.cos(w * x) * np.sin(2 * w * y), atol=tol * 2 * w * w)


def test_unknown_method():
    with pytest.raises(ValueError):
        SurfaceGrid().deriv(np.zeros((64, 64)), 1, 0, "cheb")


def test_interpolation_is_periodic():
    g = SurfaceGrid("torus", 32)
    x, y = g.xy
    f = np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)
    pts = np.array([0.013, 0.77, 1.013, -0.23])
    v = g.interpolate(f, pts, 0.25 * np.ones(4))
    assert np.allclose(v, np.cos(2 * np.pi * pts), atol=1e-5)


def test_siegel_matrix_conversions(rng):
    X = rng.normal(size=(5, 5))
    Y = np.exp(rng.normal(size=(5, 5)))
    J = siegel_to_J2(X, Y)
    assert np.allclose(J @ J, -np.eye(2))
    # compatibility: -J0 J is symmetric positive definite
    G = -np.array([[0, -1], [1, 0]]) @ J
    assert np.allclose(G, np.swapaxes(G, -1, -2))
    assert np.all(np.linalg.eigvalsh(G) > 0)
    X2, Y2 = J2_to_siegel(J)
    assert np.allclose(X2, X) and np.allclose(Y2, Y)
    assert np.allclose(siegel_to_J2(0.0, 1.0), [[0, -1], [1, 0]])


def test_jfield_validation(rng):
    g = SurfaceGrid("torus", 16)
    with pytest.raises(ValueError):
        JField(g, np.zeros((16, 16)), np.zeros((16, 16)))
    with pytest.raises(ValueError):
        JField(g, np.zeros((8, 8)), np.ones((8, 8)))
    assert JField.constant(g).is_flat()
    f = JField.random_smooth(g, rng)
    assert not f.is_flat()
    assert f.spectral_tail() < 1e-20


def test_random_disk_field_is_supported(rng):
    g = SurfaceGrid("disk", 32)
    JField.random_smooth(g, rng).check_support()
    bad = JField(g, np.full((32, 32), 0.1), np.ones((32, 32)))
    with pytest.raises(ValueError):
        bad.check_support()


def test_grid_file_round_trip(tmp_path, rng):
    g = SurfaceGrid("disk", 16)
    f = JField.random_smooth(g, rng)
    f.save(tmp_path / "f.bin")
    raw = (tmp_path / "f.bin").read_bytes()
    assert raw[:8] == b"MQMGRID1" and len(raw) == 16 + 2 * 16 * 16 * 8
    h = JField.load(tmp_path / "f.bin")
    assert h.grid == g
    assert np.array_equal(h.X, f.X) and np.array_equal(h.Y, f.Y)


def test_grid_file_errors(tmp_path):
    g = SurfaceGrid("torus", 16)
    with pytest.raises(ValueError):
        write_grid(tmp_path / "a.bin", g, np.zeros((3, 3)))
    (tmp_path / "b.bin").write_bytes(b"NOTAGRID" + bytes(8))
    with pytest.raises(ValueError):
        read_grid(tmp_path / "b.bin")
    write_grid(tmp_path / "c.bin", g, np.zeros((16, 16)))
    (tmp_path / "c.bin").write_bytes((tmp_path / "c.bin").read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_grid(tmp_path / "c.bin")


def test_bumps():
    assert smooth_bump(np.array([0.0, 0.5, 1.0]), 1.0).tolist() == pytest.approx([1.0, np.exp(1 - 1 / 0.75), 0.0])
    g = SurfaceGrid("disk", 128)
    x, y = g.xy
    R, k = 0.3, 8
    assert g.integrate(poly_bump(np.hypot(x, y), R, k)) == pytest.approx(np.pi * R * R / (k + 1), rel=1e-8)
