"""Quasimorphisms from equivariant moment maps, independent of the instance.

An *instance* is a point space exposing ``geodesic_fan``, ``tangent_step`` and
``form`` (see :class:`momentqm.siegel.SiegelSpace`).  An *action* knows how a
:class:`GroupPath` moves points and evaluates the moment map along the orbit:

``action.orbit(path, x, times) -> (points, velocities)``
    orbit ``g_t . x`` and its time derivative at the requested times.
``action.moment(path, x, times) -> values``
    ``mu(Xi_t)(g_t . x)`` at the requested times.
``action.endpoint_point(path, x)``
    ``g_1 . x``.
``action.conjugate_generator(generator, h)``
    generator of ``h g_t h^-1``.
``action.act(h, x)``
    ``h . x`` for a group element ``h``.
``action.inverse_element(h)``

For a path ``g~`` and basepoint ``x`` the value is

    nu_x(g~) = area(join of x with the orbit) - integral of the moment term,

where the orbit loop is closed by the geodesic from ``g_1 . x`` back to ``x``.
That closing geodesic lies inside the join, so it contributes no area.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .quadrature import (
    QuadParams,
    QuadratureError,
    adaptive_integral,
    composite_gauss,
    join_integral,
    join_profile,
    triangle_integral,
)


@dataclass(frozen=True)
class Segment:
    """A stretch of time ``duration`` during which the generator is constant.

    ``generator`` is right-trivialised: ``d/dt g_t = generator * g_t``.  Its
    type is instance specific (a matrix for Sp, a Hamiltonian for Ham).
    """

    duration: float
    generator: object

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")


@dataclass(frozen=True)
class GroupPath:
    """Piecewise-autonomous path in a group, starting at the identity.

    The path algebra acts on segment lists:

    * ``p1 * p2`` runs ``p2`` first and then ``p1`` translated by the end of
      ``p2``; in the universal cover this is the same element as running
      ``p1`` then ``g_1 p2``.
    * ``p ** k`` repeats the segments (fusing a repeated single generator).
    * ``~p`` (inverse) reverses the list and negates generators.

    Durations are kept as given; every quantity computed here is invariant
    under reparametrisation of time.
    """

    segments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def constant(cls):
        return cls(())

    @classmethod
    def single(cls, generator, duration=1.0):
        return cls((Segment(float(duration), generator),))

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def breaks(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def __len__(self):
        return len(self.segments)

    def __mul__(self, other: "GroupPath") -> "GroupPath":
        return GroupPath(other.segments + self.segments)

    def __pow__(self, k: int) -> "GroupPath":
        if k < 0:
            return (~self) ** (-k)
        return GroupPath(self.segments * int(k)).merged()

    def merged(self) -> "GroupPath":
        """Fuse consecutive segments that share the same generator object."""
        out = []
        for s in self.segments:
            if out and out[-1].generator is s.generator:
                out[-1] = Segment(out[-1].duration + s.duration, s.generator)
            else:
                out.append(s)
        return GroupPath(out)

    def __invert__(self) -> "GroupPath":
        return GroupPath(tuple(Segment(s.duration, -s.generator) for s in reversed(self.segments)))

    def then(self, other: "GroupPath") -> "GroupPath":
        """Run ``self`` and then ``other`` (right-translated)."""
        return GroupPath(self.segments + other.segments)

    def conjugate(self, action, h) -> "GroupPath":
        return GroupPath(
            tuple(Segment(s.duration, action.conjugate_generator(s.generator, h)) for s in self.segments)
        )

    def locate(self, times):
        """Segment index and local offset for each of the sorted ``times``."""
        b = self.breaks
        idx = np.clip(np.searchsorted(b, times, side="right") - 1, 0, max(len(self.segments) - 1, 0))
        return idx, np.asarray(times) - b[idx]


@dataclass(frozen=True)
class QmReport:
    value: float
    disk_term: float
    moment_term: float
    quad: QuadParams
    error: float = float("nan")
    basepoint: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isclose(self.value, self.disk_term - self.moment_term, rtol=0, atol=1e-12 * max(1.0, abs(self.value))):
            raise ValueError("report value must equal disk_term - moment_term")

    def as_row(self) -> dict:
        return {
            "value": self.value,
            "disk_term": self.disk_term,
            "moment_term": self.moment_term,
            "error": self.error,
            "s_nodes": self.quad.s_nodes,
            "t_nodes": self.quad.t_nodes,
            "basepoint": self.basepoint,
        }


def _time_density(path: GroupPath, quad: QuadParams, action=None):
    """Initial panels per unit time, denser on fast segments.

    ``action.speed(generator)`` (optional) estimates the orbit speed; a
    segment starts with ``panels_per_unit * max(1, speed)`` panels per unit
    time before adaptive bisection.
    """
    speed = getattr(action, "speed", None)
    if speed is None:
        return quad.panels_per_unit
    return quad.panels_per_unit * np.array([max(1.0, speed(s.generator)) for s in path.segments])


def _fixed_terms(inst, action, path, x, quad):
    t, w = composite_gauss(path.breaks, quad.t_nodes, _time_density(path, quad, action))
    ys, ydots = action.orbit(path, x, t)
    disk = join_integral(inst, x, ys, ydots, w, quad)
    moment = float(np.dot(w, action.moment(path, x, t)))
    return disk, moment


def _terms(inst, action, path, x, quad):
    """``(disk, moment, error, time_nodes)`` for the orbit join.

    Actions that can evaluate the orbit at arbitrary times get adaptive panel
    bisection in time; others (``action.adaptive = False``) use the fixed
    composite rule with a coarse-rule comparison as error estimate.
    """
    if len(path) == 0:
        return 0.0, 0.0, 0.0, 0
    if not getattr(action, "adaptive", True):
        disk, moment = _fixed_terms(inst, action, path, x, quad)
        err = float("nan")
        if quad.error_estimate:
            cd, cm = _fixed_terms(inst, action, path, x, quad.coarse())
            err = abs((disk - moment) - (cd - cm))
        return disk, moment, err, -1

    def f(t):
        ys, ydots = action.orbit(path, x, t)
        prof = join_profile(inst, x, ys, ydots, quad)
        return np.stack([prof, action.moment(path, x, t)], axis=-1)

    res = adaptive_integral(
        f, path.breaks, quad.t_nodes, _time_density(path, quad, action), quad.adapt_tol, quad.max_panels, quad.adapt_rel
    )
    disk, moment = (float(v) for v in res.value)
    err = float(res.error.sum())
    if quad.error_estimate:
        ys, ydots = action.orbit(path, x, res.nodes)
        coarse = join_profile(inst, x, ys, ydots, quad, s_nodes=max(2, quad.s_nodes // 2)) @ res.weights
        err += abs(disk - float(coarse))
    return disk, moment, err, len(res.nodes)


def nu_x(inst, action, path: GroupPath, x, quad: QuadParams | None = None) -> QmReport:
    """Evaluate ``nu_x`` on a path via the geodesic-join filling disk.

    Raises
    ------
    QuadratureError
        If ``quad.tol`` is set and the error estimate exceeds it.
    """
    quad = (quad or QuadParams()).check()
    disk, moment, err, nodes = _terms(inst, action, path, x, quad)
    if quad.tol is not None and err > quad.tol:
        raise QuadratureError(
            f"nu_x did not converge: error estimate {err:.3e} > tol {quad.tol:.3e}",
            disk - moment,
            err,
        )
    describe = getattr(inst, "describe", lambda p: "")
    return QmReport(disk - moment, disk, moment, quad, err, describe(x), {"time_nodes": nodes})


def action_homomorphism(inst, action, loop: GroupPath, x, quad=None, tol=1e-8) -> float:
    """Value of the action homomorphism on a loop of group elements.

    The loop's endpoint must be the identity; this is checked on the orbit of
    ``x`` and, when the action exposes ``endpoint``, on the group element.
    """
    if hasattr(action, "endpoint"):
        g = action.endpoint(loop)
        if np.max(np.abs(g - np.eye(g.shape[0]))) > tol:
            raise ValueError("path does not close at the identity")
    return nu_x(inst, action, loop, x, quad).value


def defect(inst, action, p1: GroupPath, p2: GroupPath, x, quad=None):
    """Return ``(defect, triangle)`` for the pair ``p1, p2``.

    ``defect = nu(p1 p2) - nu(p1) - nu(p2)`` and ``triangle`` is the area of
    the geodesic triangle on ``x, g x, g h x`` (``g``, ``h`` endpoints of
    ``p1``, ``p2``).
    """
    quad = (quad or QuadParams()).check()
    a = nu_x(inst, action, p1 * p2, x, quad).value
    b = nu_x(inst, action, p1, x, quad).value
    c = nu_x(inst, action, p2, x, quad).value
    gx = action.endpoint_point(p1, x)
    ghx = action.endpoint_point(p1 * p2, x)
    tri = triangle_integral(inst, x, gx, ghx, quad)
    return a - b - c, tri


@dataclass(frozen=True)
class HomogenizeResult:
    estimate: float
    half_width: float
    ks: tuple
    values: tuple
    defect_bound: float

    def __iter__(self):
        return iter((self.estimate, self.half_width))


def power_schedule(k_max: int):
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    ks = [1]
    while ks[-1] * 2 <= k_max:
        ks.append(ks[-1] * 2)
    if ks[-1] != k_max:
        ks.append(int(k_max))
    return ks


def homogenize(inst, action, path: GroupPath, x, k_max: int, quad=None, threads=1) -> HomogenizeResult:
    """Estimate the homogenisation ``lim nu_x(path^k) / k``.

    The half-width is ``D / k_max`` where ``D`` is the larger of the observed
    doubling defects ``|nu(p^2j) - 2 nu(p^j)|`` and the instance's triangle
    bound when one is known (``inst.triangle_bound``).
    """
    ks = power_schedule(k_max)
    quad = (quad or QuadParams()).check()

    def one(k):
        return nu_x(inst, action, path**k, x, quad).value

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            vals = list(ex.map(one, ks))
    else:
        vals = [one(k) for k in ks]
    by_k = dict(zip(ks, vals))
    observed = [abs(by_k[2 * k] - 2 * by_k[k]) for k in ks if 2 * k in by_k]
    bound = getattr(inst, "triangle_bound", None)
    D = max(observed + ([bound] if bound is not None else []) + [0.0])
    k = ks[-1]
    return HomogenizeResult(by_k[k] / k, D / k, tuple(ks), tuple(vals), D)


def conjugation_transport(inst, action, path: GroupPath, h, x, quad=None):
    """Return ``(nu_x(h g h^-1), nu_{h^-1 x}(g))``; these agree exactly in theory."""
    lhs = nu_x(inst, action, path.conjugate(action, h), x, quad).value
    y = action.act(action.inverse_element(h), x)
    rhs = nu_x(inst, action, path, y, quad).value
    return lhs, rhs
