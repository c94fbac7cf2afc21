"""Gauss-Legendre rules and geodesic-join surface integrals.

A *join* is the surface ``D(s, t) = geodesic(x, y(t), s)`` swept by geodesics
from a fixed point ``x`` to a curve ``y``.  Its integral against the space's
2-form is evaluated with a tensor Gauss-Legendre rule; the surface tangents are
central differences in the ambient coordinates.  Orientation follows the
``(s, t)`` parametrisation: the boundary is traversed ``x -> y(t0)``, along
``y``, then back to ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested tolerance.

    ``estimate`` and ``error`` carry the best value obtained.
    """

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadParams:
    s_nodes: int = 16
    t_nodes: int = 8
    panels_per_unit: float = 2.0
    fd_step: float = 1e-5
    error_estimate: bool = True
    tol: float | None = None
    chunk: int = 64
    adapt_tol: float = 1e-9
    adapt_rel: float = 1e-9
    max_panels: int = 4096

    def __post_init__(self):
        if self.s_nodes < 2 or self.t_nodes < 2:
            raise ValueError("quadrature orders must be >= 2")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")

    def check(self, minimum=4):
        if self.s_nodes < minimum or self.t_nodes < minimum:
            raise ValueError(f"quadrature orders must be >= {minimum}")
        return self

    def coarse(self) -> "QuadParams":
        return replace(
            self,
            s_nodes=max(2, self.s_nodes // 2),
            t_nodes=max(2, self.t_nodes // 2),
            error_estimate=False,
            tol=None,
        )

    def doubled(self) -> "QuadParams":
        return replace(self, s_nodes=2 * self.s_nodes, t_nodes=2 * self.t_nodes)


@lru_cache(maxsize=64)
def _gauss(q):
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


def gauss_legendre(q, a=0.0, b=1.0):
    """Nodes and weights of the ``q``-point rule on ``[a, b]``."""
    x, w = _gauss(int(q))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss(breaks, q, panels_per_unit=2.0):
    """Composite rule over consecutive intervals ``breaks[i]..breaks[i+1]``.

    Each interval gets ``max(1, ceil(length * density))`` panels of ``q``
    nodes, so no panel straddles a break.  ``panels_per_unit`` is either a
    scalar density or one density per interval.
    """
    nodes, weights = [], []
    dens = np.broadcast_to(np.asarray(panels_per_unit, dtype=float), (max(len(breaks) - 1, 0),))
    for a, b, rho in zip(breaks[:-1], breaks[1:], dens):
        length = b - a
        if length <= 0:
            continue
        npan = max(1, int(np.ceil(length * rho - 1e-12)))
        edges = np.linspace(a, b, npan + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(q, lo, hi)
            nodes.append(x)
            weights.append(w)
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class AdaptiveResult:
    value: np.ndarray
    error: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    panels: int


def adaptive_integral(f, breaks, q, density=2.0, tol=1e-9, max_panels=4096, rel=0.0):
    """Panel-bisection Gauss rule for a vector-valued integrand on ``[breaks[0], breaks[-1]]``.

    ``f(times)`` returns an array of shape ``(len(times), c)``.  A panel is
    accepted when the ``q``- and ``q // 2``-point rules agree to within its
    share ``tol * length / total`` of the tolerance, or to ``rel`` times the
    panel's integral of ``|f|`` (a floor for finite-difference roundoff), in
    every component; otherwise it is bisected.  Accepted panels are summed in time order.

    Raises
    ------
    QuadratureError
        When more than ``max_panels`` panels would be needed.
    """
    edges = []
    dens = np.broadcast_to(np.asarray(density, dtype=float), (len(breaks) - 1,))
    for a, b, rho in zip(breaks[:-1], breaks[1:], dens):
        if b > a:
            npan = max(1, int(np.ceil((b - a) * rho - 1e-12)))
            e = np.linspace(a, b, npan + 1)
            edges.extend(zip(e[:-1], e[1:]))
    total = float(breaks[-1] - breaks[0])
    if not edges:
        return AdaptiveResult(np.zeros(1), np.zeros(1), np.zeros(0), np.zeros(0), 0)
    xf, wf = _gauss(q)
    xc, wc = _gauss(max(2, q // 2))
    accepted = []
    pending = edges
    best = None
    while pending:
        if len(accepted) + len(pending) > max_panels:
            partial = sum(a[2] for a in accepted) if accepted else 0.0
            raise QuadratureError(
                f"adaptive rule needs more than {max_panels} panels",
                best if best is not None else partial,
                float("inf"),
            )
        lo = np.array([p[0] for p in pending])
        hi = np.array([p[1] for p in pending])
        half = 0.5 * (hi - lo)[:, None]
        tf = (lo[:, None] + half * (xf + 1)).ravel()
        tc = (lo[:, None] + half * (xc + 1)).ravel()
        vals = np.asarray(f(np.concatenate([tf, tc])), dtype=float)
        vals = vals.reshape(len(tf) + len(tc), -1)
        vf = vals[: len(tf)].reshape(len(pending), len(xf), -1)
        vc = vals[len(tf) :].reshape(len(pending), len(xc), -1)
        If = np.einsum("k,pkc->pc", wf, vf) * half
        Ic = np.einsum("k,pkc->pc", wc, vc) * half
        diff = np.abs(If - Ic)
        share = tol * (hi - lo) / total
        floor = rel * np.einsum("k,pkc->pc", wf, np.abs(vf)) * half
        ok = np.all(diff <= np.maximum(share[:, None], floor), axis=1)
        best = sum(a[2] for a in accepted) + If.sum(axis=0) if accepted else If.sum(axis=0)
        nxt = []
        for i, (a, b) in enumerate(pending):
            if ok[i]:
                accepted.append((a, b, If[i], diff[i], tf[i * len(xf) : (i + 1) * len(xf)], (half[i] * wf)))
            else:
                m = 0.5 * (a + b)
                nxt.extend([(a, m), (m, b)])
        pending = nxt
    accepted.sort(key=lambda r: r[0])
    value = np.sum([r[2] for r in accepted], axis=0)
    error = np.sum([r[3] for r in accepted], axis=0)
    nodes = np.concatenate([r[4] for r in accepted])
    weights = np.concatenate([r[5] for r in accepted])
    return AdaptiveResult(value, error, nodes, weights, len(accepted))


def join_profile(space, x, ys, ydots, quad: QuadParams, s_nodes=None):
    """Inner integrals ``int_0^1 form(dD/ds, dD/dt) ds`` of the join at each curve node.

    ``ys[k]``, ``ydots[k]`` are the curve point and velocity at node ``k``.
    """
    ys = np.asarray(ys, dtype=float)
    ydots = np.asarray(ydots, dtype=float)
    out = np.zeros(len(ys))
    if len(ys) == 0:
        return out
    s, ws = gauss_legendre(s_nodes or quad.s_nodes)
    exact = getattr(space, "fan_derivatives", None)
    h = quad.fd_step
    s_all = np.concatenate([s, s + h, s - h])
    q = len(s)
    chunk = min(quad.chunk, getattr(space, "max_chunk", quad.chunk))
    for lo in range(0, len(ys), chunk):
        y = ys[lo : lo + chunk]
        v = ydots[lo : lo + chunk]
        if exact is not None:
            Dc, d_s, d_t = exact(x, y, s, v)
            out[lo : lo + chunk] = ws @ space.form(Dc, d_s, d_t)
            continue
        fan = space.geodesic_fan(x, y, s_all)
        Dc, Dp, Dm = fan[:q], fan[q : 2 * q], fan[2 * q :]
        d_s = (Dp - Dm) / (2 * h)
        step = space.tangent_step(y, v, h)
        Dtp = space.geodesic_fan(x, y + step * v, s)
        Dtm = space.geodesic_fan(x, y - step * v, s)
        d_t = (Dtp - Dtm) / (2 * step)
        out[lo : lo + chunk] = ws @ space.form(Dc, d_s, d_t)
    return out


def join_integral(space, x, ys, ydots, t_weights, quad: QuadParams):
    """Integral of the space's form over the join of ``x`` with a sampled curve."""
    return float(join_profile(space, x, ys, ydots, quad) @ np.asarray(t_weights, dtype=float))


def geodesic_side(space, y, z, h):
    """Curve ``t -> geodesic(y, z, t)`` with its velocity.

    The velocity is exact when the space provides ``fan_derivatives`` and a
    central difference with step ``h`` otherwise.
    """
    z = np.asarray(z, dtype=float)[None]
    exact = getattr(space, "fan_derivatives", None)

    def curve(t):
        if exact is not None:
            D, Ds, _ = exact(y, z, t)
            return D[:, 0], Ds[:, 0]
        t = np.asarray(t, dtype=float)
        q = len(t)
        side = space.geodesic_fan(y, z, np.concatenate([t, t + h, t - h]))[:, 0]
        return side[:q], (side[q : 2 * q] - side[2 * q :]) / (2 * h)

    return curve


def triangle_integral(space, x, y, z, quad: QuadParams, with_error=False):
    """Integral over the geodesic triangle ``{geodesic(x, geodesic(y, z, t), s)}``.

    The side ``y -> z`` is integrated adaptively; see :func:`adaptive_integral`.
    """
    curve = geodesic_side(space, y, z, quad.fd_step)

    def f(t):
        ys, yd = curve(t)
        return join_profile(space, x, ys, yd, quad)[:, None]

    res = adaptive_integral(
        f, np.array([0.0, 1.0]), quad.s_nodes, quad.panels_per_unit, quad.adapt_tol, quad.max_panels, quad.adapt_rel
    )
    value = float(res.value[0])
    if not with_error:
        return value
    err = float(res.error[0])
    if quad.error_estimate and len(res.nodes):
        ys, yd = curve(res.nodes)
        coarse = join_profile(space, x, ys, yd, quad, s_nodes=max(2, quad.s_nodes // 2)) @ res.weights
        err += abs(value - float(coarse))
    return value, err
