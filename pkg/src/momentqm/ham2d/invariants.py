"""Classical invariants of grid Hamiltonian flows and the local-type comparison.

* :func:`calabi`: space-time integral of a compactly supported Hamiltonian.
* :func:`barge_ghys_tau`: area-weighted homogenised Maslov turns of the
  linearised flow, in the flat trivialisation of the plane or torus chart.
* :func:`local_type_report`: homogenised quasimorphism against the
  calibrated Maslov prediction.
* :func:`sobolev_norm_22`: time integral of the discrete ``L^2_2`` norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import GroupPath, homogenize, power_schedule
from ..quadrature import QuadParams
from ..symplectic import UndersampledError
from .fiber import ham_instance
from .flow import HamFlowSpec, check_step, forward_map
from .grid import JField, SurfaceGrid


def _compile(grid, spec, dt=None):
    if isinstance(spec, HamFlowSpec):
        return spec.compile(grid), spec.dt if dt is None else dt
    return spec, 1e-2 if dt is None else dt


def calabi(grid: SurfaceGrid, spec, support=None, tol=1e-10) -> float:
    """``sum_i duration_i * sum_p H_i(p) dA`` for a compactly supported flow.

    On the disk domain the support is the disk itself.  On the torus the
    flow must be supported in an embedded disk ``support = (centre, radius)``;
    the raw Hamiltonians are used there, since the zero-mean normalisation of
    the torus would shift them.

    Raises
    ------
    ValueError
        If some ``H`` does not vanish outside the support.
    """
    segments = spec.segments if isinstance(spec, HamFlowSpec) else [(s.duration, s.generator) for s in spec.segments]
    x, y = grid.xy
    if grid.domain == "disk":
        inside = grid.inside
    else:
        if support is None:
            raise ValueError("on the torus the Calabi invariant needs an embedded disk: pass support=(centre, radius)")
        (cx, cy), rad = support
        dx = (x - cx + 0.5) % 1.0 - 0.5
        dy = (y - cy + 0.5) % 1.0 - 0.5
        if not 0 < rad < 0.5:
            raise ValueError("support radius must lie in (0, 1/2) to embed in the torus")
        inside = np.hypot(dx, dy) < rad
    total = 0.0
    for duration, H in segments:
        v = H(x, y)
        bound = tol * max(1.0, float(np.max(np.abs(v))))
        if np.any(~inside) and np.max(np.abs(v[~inside])) > bound:
            raise ValueError("Hamiltonian does not vanish outside its support disk")
        total += float(duration) * float(grid.integrate(v))
    return total


def polar_angle(A) -> np.ndarray:
    """Angle of the rotation factor ``U`` in the polar decomposition ``A = P U`` (2x2)."""
    return np.arctan2(A[..., 1, 0] - A[..., 0, 1], A[..., 0, 0] + A[..., 1, 1])


@dataclass(frozen=True)
class TauResult:
    """Homogenised Barge-Ghys value with its power sequence.

    ``density`` holds the per-node turns per period at ``k_max``; ``value``
    is its ``dA``-weighted sum.
    """

    value: float
    half_width: float
    ks: tuple
    values: tuple
    density: np.ndarray

    def __iter__(self):
        return iter((self.value, self.half_width))


def barge_ghys_tau(grid: SurfaceGrid, spec, k_max=8, dt=None) -> TauResult:
    """Area-weighted Maslov turns of ``A(p, t)`` along ``path^k``, divided by ``k``.

    One forward march of ``path^k_max`` tracks the polar angle of every
    linearisation; the turns of ``det_C(U)^2`` at each power in the doubling
    schedule give the sequence, and the last one is the estimate.  A single
    node's Maslov defect is below one turn, so the half-width is
    ``area / k_max`` or the largest observed doubling defect if larger.

    Raises
    ------
    UndersampledError
        If the polar angle moves by a quarter turn or more in one step; the
        message names the node.
    """
    path, dt = _compile(grid, spec, dt)
    check_step(grid, path, dt)
    if len(path) == 0 or all(s.generator.is_zero for s in path.segments):
        ks = tuple(power_schedule(k_max))
        return TauResult(0.0, 0.0, ks, (0.0,) * len(ks), np.zeros((grid.N, grid.N)))
    ks = power_schedule(k_max)
    T = path.duration
    big = path**k_max
    stops = np.array([k * T for k in ks])
    state = {"theta": np.zeros((grid.N, grid.N)), "acc": np.zeros((grid.N, grid.N))}

    def track(t, z, A):
        th = polar_angle(A)
        step = np.angle(np.exp(1j * (th - state["theta"])))
        bad = np.abs(step) >= np.pi / 2
        if np.any(bad):
            i, j = (int(v) for v in np.argwhere(bad)[0])
            px, py = grid.xy
            raise UndersampledError(
                f"linearisation angle jumps {step[i, j]:.3f} rad in one step at node ({i}, {j}) "
                f"= ({px[i, j]:.4g}, {py[i, j]:.4g}), t = {t:.4g}; reduce the time step",
                index=(i, j),
            )
        state["acc"] += step
        state["theta"] = th
        hit = np.nonzero(np.abs(stops - t) <= 1e-9 * max(1.0, T))[0]
        if len(hit):
            record[int(hit[0])] = state["acc"].copy()

    record = {}
    forward_map(grid, big, stops, dt, callback=track)
    turns = {k: record[i] / np.pi for i, k in enumerate(ks)}
    values = tuple(float(grid.integrate(turns[k])) / k for k in ks)
    totals = dict(zip(ks, (v * k for v, k in zip(values, ks))))
    observed = [abs(totals[2 * k] - 2 * totals[k]) for k in ks if 2 * k in totals]
    D = max(observed + [grid.area])
    return TauResult(values[-1], D / ks[-1], tuple(ks), values, turns[ks[-1]] / ks[-1])


@dataclass(frozen=True)
class LocalTypeReport:
    """Homogenised quasimorphism next to its local-type prediction."""

    frak_s: float
    frak_s_half_width: float
    tau: float
    tau_half_width: float
    kappa: float
    calabi: float
    c: float
    prediction: float
    difference: float
    relative: float
    ks: tuple
    frak_s_values: tuple

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in (
            "frak_s", "frak_s_half_width", "tau", "tau_half_width", "kappa",
            "calabi", "c", "prediction", "difference", "relative",
        )}


def local_type_report(grid: SurfaceGrid, spec, ledger, k_max=8, quad: QuadParams | None = None, J=None, dt=None, threads=1):
    """Compare homogenised ``frak_S`` with ``kappa_trace * tau_B - c * Cal_B``.

    ``kappa_trace`` comes from the calibration ledger (value per Maslov turn
    for the trace form, ``n = 1``).  The base structure is flat, so the
    average scalar curvature ``c`` is zero and the Calabi term is reported
    but does not enter.
    """
    if ledger.n != 1:
        raise ValueError("the surface fibers are n = 1; use a ledger calibrated for n = 1")
    if grid.domain != "disk":
        raise ValueError("the local-type comparison needs a disk-supported flow on the disk domain")
    path, dt = _compile(grid, spec, dt)
    check_step(grid, path, dt)
    J = JField.constant(grid) if J is None else J
    if not J.is_flat():
        raise ValueError("the local-type comparison is implemented for the flat base structure only")
    inst, action = ham_instance(grid, dt)
    hom = homogenize(inst, action, path, J.ambient(), k_max, quad, threads)
    tau = barge_ghys_tau(grid, path, k_max, dt)
    kappa = float(ledger.kappa_trace)
    cal = calabi(grid, path)
    c = 0.0
    pred = kappa * tau.value - c * cal
    diff = hom.estimate - pred
    rel = abs(diff) / abs(pred) if pred != 0 else (0.0 if diff == 0 else float("inf"))
    return LocalTypeReport(
        hom.estimate, hom.half_width, tau.value, tau.half_width, kappa, cal, c, pred, diff, rel, hom.ks, hom.values
    )


def sobolev_norm_22(grid: SurfaceGrid, spec, method="fd4") -> float:
    """``sum_i duration_i * sqrt(sum_p (H^2 + |grad H|^2 + |Hess H|^2) dA)``.

    Derivatives are taken on the grid (flat Euclidean reference metric, no
    covariant corrections); ``|Hess H|^2 = Hxx^2 + 2 Hxy^2 + Hyy^2``.
    """
    path, _ = _compile(grid, spec)
    x, y = grid.xy
    total = 0.0
    for seg in path.segments:
        H = seg.generator
        if H.is_zero:
            continue
        h = H(x, y)
        d = lambda a, b: grid.deriv(h, a, b, method)  # noqa: E731
        dens = h**2 + d(1, 0) ** 2 + d(0, 1) ** 2 + d(2, 0) ** 2 + 2 * d(1, 1) ** 2 + d(0, 2) ** 2
        total += seg.duration * float(np.sqrt(grid.integrate(dens)))
    return total


def embedding_pair(spec_disk, N, R=0.4, quad=None, dt=None):
    """``(frak_S on the disk, frak_S on the torus)`` for the same flow.

    With ``R = 0.4`` the disk box is ``[-1/2, 1/2)^2``, so the torus grid of
    the same ``N`` carries the same nodes after translating by ``(1/2, 1/2)``.
    """
    from .fiber import frak_S

    disk = SurfaceGrid("disk", N, R=R)
    if not np.isclose(disk.period, 1.0):
        raise ValueError("embedding comparison needs a disk box of side 1 (R = 0.4 with the default box ratio)")
    torus = SurfaceGrid("torus", N)
    path_disk, dt = _compile(disk, spec_disk, dt)
    shifted = GroupPath.constant()
    for seg in path_disk.segments:
        shifted = shifted.then(GroupPath.single(seg.generator.translated((0.5, 0.5)), seg.duration))
    a = frak_S(disk, None, path_disk, quad, dt)
    torus_path = HamFlowSpec([(s.duration, s.generator) for s in shifted.segments], dt).compile(torus)
    b = frak_S(torus, None, torus_path, quad, dt)
    return a, b
