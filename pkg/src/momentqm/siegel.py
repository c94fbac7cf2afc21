"""The Siegel space of Sp(2n, R) modelled as compatible complex structures.

Points are real ``(2n, 2n)`` matrices ``J``; tangent vectors at ``J`` are
matrices ``A`` with ``A J + J A = 0`` and ``-J0 A`` symmetric.  Three invariant
Kähler forms are supported, all proportional:

=========  ==========================  =================
kind       value on ``(A, B)`` at J    scale vs. trace
=========  ==========================  =================
trace      ``tr(J A B) / 4``           1
siegel     ``2 * trace``               2
bergman    ``(n + 1) * trace``         n + 1
=========  ==========================  =================

With the conventions of :mod:`momentqm.symplectic` the pull-back of the
``siegel`` form to the upper half-plane (n = 1) is ``-dx^dy / y^2``; the sign
is an orientation convention and is recorded, not corrected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import QuadParams, QuadratureError, triangle_integral
from .symplectic import (
    CompatibleJ,
    TOL_SP,
    check_compatible,
    half_dim,
    j0,
    sp_sqrt_pd,
)

FORM_KINDS = ("trace", "siegel", "bergman")


def form_scale(kind: str, n: int) -> float:
    """Factor relating ``kind`` to the trace form."""
    if kind == "trace":
        return 1.0
    if kind == "siegel":
        return 2.0
    if kind == "bergman":
        return float(n + 1)
    raise ValueError(f"unknown form kind {kind!r}; expected one of {FORM_KINDS}")


def _mat(J):
    return J.entries if isinstance(J, CompatibleJ) else np.asarray(J, dtype=float)


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def check_tangent(J, A, tol=TOL_SP):
    J = _mat(J)
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.max(np.abs(A)))) * max(1.0, float(np.max(np.abs(J))))
    if np.max(np.abs(A @ J + J @ A)) > tol * scale:
        raise ValueError("vector does not anticommute with J: not tangent")
    S = -j0(half_dim(J)) @ A
    if np.max(np.abs(S - S.T)) > tol * scale:
        raise ValueError("vector is not metric-symmetric: not tangent")


class SiegelSpace:
    """Domic-Toledo space ``(J_c, sigma_kind, geodesics)`` for Sp(2n, R).

    Implements the point-set interface consumed by :mod:`momentqm.engine`:
    ``geodesic_fan``, ``tangent_step`` and ``form``, all batched over leading
    axes.
    """

    def __init__(self, n: int, kind: str = "trace"):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = int(n)
        self.kind = kind
        self.scale = form_scale(kind, n)
        self.J0 = j0(n)
        self.point_shape = (2 * n, 2 * n)

    def __repr__(self):
        return f"SiegelSpace(n={self.n}, kind={self.kind!r})"

    def describe(self, x) -> str:
        return "J0" if np.allclose(x, self.J0) else "J"

    def basepoint(self):
        return self.J0.copy()

    @property
    def triangle_bound(self):
        """Supremum of |triangle area|, known in closed form for n = 1 only."""
        if self.n == 1:
            # ideal hyperbolic triangle: pi for the siegel form
            return self.scale * np.pi / 2
        return None

    def with_kind(self, kind):
        return SiegelSpace(self.n, kind)

    # -- geometry ----------------------------------------------------------

    def geodesic_fan(self, x, y, s):
        """Points ``geodesic(x, y[...], s[k])`` with shape ``(len(s),) + y.shape``.

        ``x`` is mapped to ``J0`` by ``Gx^(1/2)``; the geodesic from ``J0`` is
        ``t -> J0 M^t`` on positive symplectic ``M``.  Inputs slightly off the
        manifold (finite-difference probes) are handled through the symmetric
        positive extension of the same formula.
        """
        x = _mat(x)
        y = np.asarray(y, dtype=float)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        Ga = _sym(-self.J0 @ x)
        Ah, Amh = sp_sqrt_pd(Ga)
        Gb = _sym(-self.J0 @ y)
        w, V = np.linalg.eigh(Amh @ Gb @ Amh)
        if np.any(w <= 0):
            raise ValueError("endpoint is not positive definite")
        lw = np.log(w)
        shape = (len(s),) + (1,) * (w.ndim)
        ws = np.exp(s.reshape(shape) * lw[None])
        Vt = np.swapaxes(V, -1, -2)
        Ms = (V[None] * ws[..., None, :]) @ Vt[None]
        return self.J0 @ (Ah @ Ms @ Ah)

    def fan_derivatives(self, x, y, s, ydot=None):
        """Geodesic fan with exact derivatives.

        Returns ``(D, D_s, D_t)`` where ``D[k] = geodesic(x, y, s[k])``,
        ``D_s`` its derivative in ``s`` and ``D_t`` the derivative when ``y``
        moves with velocity ``ydot`` (``None`` if not given).  The directional
        derivative of ``M -> M^s`` uses the divided differences of
        ``w -> w^s`` on the eigenvalues of ``M``.
        """
        x = _mat(x)
        y = np.asarray(y, dtype=float)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        Ga = _sym(-self.J0 @ x)
        Ah, Amh = sp_sqrt_pd(Ga)
        w, V = np.linalg.eigh(Amh @ _sym(-self.J0 @ y) @ Amh)
        if np.any(w <= 0):
            raise ValueError("endpoint is not positive definite")
        lw = np.log(w)
        Vt = np.swapaxes(V, -1, -2)
        sk = s.reshape((len(s),) + (1,) * w.ndim)
        ws = np.exp(sk * lw[None])
        left = self.J0 @ Ah
        D = left @ ((V[None] * ws[..., None, :]) @ Vt[None]) @ Ah
        Ds = left @ ((V[None] * (lw[None] * ws)[..., None, :]) @ Vt[None]) @ Ah
        Dt = None
        if ydot is not None:
            Mdot = Amh @ _sym(-self.J0 @ np.asarray(ydot, dtype=float)) @ Amh
            C = Vt @ Mdot @ V
            dl = lw[..., :, None] - lw[..., None, :]  # l_i - l_j
            sk2 = sk[..., None]
            # (w_i^s - w_j^s) / (w_i - w_j) = w_j^(s-1) expm1(s dl) / expm1(dl)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(np.abs(dl) > 1e-12, np.expm1(sk2 * dl) / np.expm1(dl), sk2)
            gamma = np.exp((sk2 - 1) * lw[None, ..., None, :]) * ratio
            Dt = left @ (V[None] @ (gamma * C[None]) @ Vt[None]) @ Ah
        return D, Ds, Dt

    def geodesic(self, x, y, s):
        return self.geodesic_fan(x, y, s)[0] if np.ndim(s) == 0 else self.geodesic_fan(x, y, s)

    def tangent_step(self, y, v, h):
        mag = np.max(np.abs(v), axis=(-2, -1), keepdims=True)
        return h / np.maximum(1.0, mag)

    def form(self, p, a, b):
        return 0.25 * self.scale * np.einsum("...ij,...jk,...ki->...", p, a, b)

    def distance(self, x, y):
        """Riemannian distance for the siegel-normalised metric (curvature -1 when n = 1)."""
        x, y = _mat(x), _mat(y)
        Ga = _sym(-self.J0 @ x)
        _, Amh = sp_sqrt_pd(Ga)
        w = np.linalg.eigvalsh(Amh @ _sym(-self.J0 @ y) @ Amh)
        if np.any(w <= 0):
            return float("inf")
        return float(np.sqrt(np.sum(np.log(w) ** 2) / 2))

    # -- group action ------------------------------------------------------

    def moment(self, J, Xi):
        return -0.5 * self.scale * np.einsum("...ij,...ji->...", Xi, _mat(J))


# ---------------------------------------------------------------------------
# functional API


def form_eval(kind, J, A, B, check=True) -> float:
    """Value of the invariant form ``kind`` on tangent vectors ``A``, ``B`` at ``J``."""
    Jm = _mat(J)
    if check:
        check_tangent(Jm, A)
        check_tangent(Jm, B)
    return float(SiegelSpace(half_dim(Jm), kind).form(Jm, np.asarray(A), np.asarray(B)))


def geodesic(x, y, t):
    """Symmetric-space geodesic from ``x`` (t = 0) to ``y`` (t = 1)."""
    xm, ym = _mat(x), _mat(y)
    space = SiegelSpace(half_dim(xm))
    out = space.geodesic_fan(xm, ym, np.atleast_1d(t))
    return out[0] if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class AreaResult:
    value: float
    error: float
    quad: QuadParams


def triangle_area(kind, x, y, z, quad: QuadParams | None = None) -> AreaResult:
    """Integral of ``sigma_kind`` over the geodesic-join triangle on ``x, y, z``.

    The surface is ``{geodesic(x, geodesic(y, z, t), s)}`` with the ``(s, t)``
    orientation, so the boundary runs ``x -> y -> z -> x``.
    """
    quad = (quad or QuadParams()).check()
    xm, ym, zm = (_mat(p) for p in (x, y, z))
    for p in (xm, ym, zm):
        check_compatible(p)
    space = SiegelSpace(half_dim(xm), kind)
    value, err = triangle_integral(space, xm, ym, zm, quad, with_error=True)
    if quad.tol is not None and err > quad.tol:
        raise QuadratureError(
            f"triangle area did not converge: error estimate {err:.3e} > tol {quad.tol:.3e}", value, err
        )
    return AreaResult(value, err, quad)


def moment_map_sp(J, Xi) -> float:
    """``-tr(Xi J) / 2``: the equivariant moment map for the trace form."""
    return float(SiegelSpace(half_dim(_mat(J))).moment(_mat(J), np.asarray(Xi, dtype=float)))


def infinitesimal_action(Xi, J) -> np.ndarray:
    """Velocity ``Xi J - J Xi`` of ``t -> exp(t Xi) J exp(-t Xi)`` at ``t = 0``."""
    Xi = np.asarray(Xi, dtype=float)
    Jm = _mat(J)
    return Xi @ Jm - Jm @ Xi
