"""Scalar curvature of the metric ``g(J) = omega(., J .)`` on a surface.

In real dimension two every almost complex structure is integrable, so the
Hermitian scalar curvature is the Riemannian one, ``S = 2 K``.  ``K`` comes
from the Brioschi formula, which needs only the metric coefficients and
their first and second derivatives.
"""

from __future__ import annotations

import numpy as np

from .grid import JField, SurfaceGrid


class CurvatureError(FloatingPointError):
    pass


def metric_coefficients(X, Y):
    """``(E, F, G)`` of ``g(J)`` for Siegel coordinates ``X + iY``; ``EG - F^2 = 1``."""
    return 1.0 / Y, -X / Y, Y + X * X / Y


def gaussian_curvature(grid: SurfaceGrid, E, F, G, method="spectral"):
    """Gaussian curvature of ``E dx^2 + 2F dx dy + G dy^2`` (Brioschi formula)."""
    d = lambda f, a, b: grid.deriv(f, a, b, method)  # noqa: E731
    Eu, Ev = d(E, 1, 0), d(E, 0, 1)
    Fu, Fv = d(F, 1, 0), d(F, 0, 1)
    Gu, Gv = d(G, 1, 0), d(G, 0, 1)
    Evv, Guu, Fuv = d(E, 0, 2), d(G, 2, 0), d(F, 1, 1)
    m1 = np.stack(
        [
            np.stack([-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev], -1),
            np.stack([Fv - 0.5 * Gu, E, F], -1),
            np.stack([0.5 * Gv, F, G], -1),
        ],
        -2,
    )
    zero = np.zeros_like(E)
    m2 = np.stack(
        [
            np.stack([zero, 0.5 * Ev, 0.5 * Gu], -1),
            np.stack([0.5 * Ev, E, F], -1),
            np.stack([0.5 * Gu, F, G], -1),
        ],
        -2,
    )
    K = (np.linalg.det(m1) - np.linalg.det(m2)) / (E * G - F * F) ** 2
    if not np.all(np.isfinite(K)):
        raise CurvatureError("curvature stencil produced non-finite values")
    return K


def hermitian_scalar_curvature(J: JField, method="spectral"):
    """Per-node ``S(J) = 2 K(g(J))``.

    ``method`` is ``"spectral"`` (default) or ``"fd4"``.  A flat field
    returns exact zeros.
    """
    if J.is_flat():
        return np.zeros_like(J.X)
    return 2.0 * gaussian_curvature(J.grid, *metric_coefficients(J.X, J.Y), method=method)


def moment_map_ham(grid: SurfaceGrid, H, J: JField, method="spectral") -> float:
    """``sum_nodes S(J) H dA``.

    For the fibrewise trace form the equivariant moment map is ``-1/2`` times
    this sum (see :data:`momentqm.ham2d.fiber.TRACE_MOMENT_FACTOR`).
    """
    H = np.asarray(H, dtype=float)
    if J.is_flat():
        return 0.0
    return float(grid.integrate(hermitian_scalar_curvature(J, method) * H))
