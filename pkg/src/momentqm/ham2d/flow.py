"""Hamiltonian flows on the grid and their linearisations.

A flow is a :class:`momentqm.engine.GroupPath` whose generators are
:class:`Hamiltonian` objects, constant on each segment.  Trajectories obey
``z' = X_H(z)`` with ``X_H = J0 grad H = (-H_y, H_x)``, so that
``omega(X_H, .) = -dH`` for ``omega = dx ^ dy``; the linearisation obeys
``A' = J0 Hess(H) A``.  Both are advanced with classical RK4.

Derivatives of ``H`` are central differences of the closed form (fourth
order, step ``FD_STEP``), so ``H`` only needs to be evaluable pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import GroupPath, Segment
from .grid import SurfaceGrid, poly_bump

FD_STEP = 1e-3
TOL_FLOW = 1e-6


class FlowError(RuntimeError):
    pass


class Hamiltonian:
    """Autonomous Hamiltonian ``(x, y) -> scale * f(x - a, y - b) - offset``.

    ``f`` is a vectorised callable.  Negation and translation return new
    objects sharing ``f``; ``offset`` stores a normalisation constant (it has
    no effect on the flow).
    """

    def __init__(self, f, scale=1.0, shift=(0.0, 0.0), offset=0.0, label=""):
        self.f = f
        self.scale = float(scale)
        self.shift = (float(shift[0]), float(shift[1]))
        self.offset = float(offset)
        self.label = label

    def __repr__(self):
        return f"Hamiltonian({self.label or self.f!r}, scale={self.scale:g}, shift={self.shift})"

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.scale == 0.0:
            return np.zeros(np.broadcast(x, y).shape) - self.offset
        return self.scale * np.asarray(self.f(x - self.shift[0], y - self.shift[1]), dtype=float) - self.offset

    def __neg__(self):
        return Hamiltonian(self.f, -self.scale, self.shift, -self.offset, self.label)

    def scaled(self, c):
        return Hamiltonian(self.f, c * self.scale, self.shift, c * self.offset, self.label)

    def translated(self, a):
        """``H o tau_a^-1`` for the translation ``tau_a(p) = p + a``."""
        return Hamiltonian(self.f, self.scale, (self.shift[0] + a[0], self.shift[1] + a[1]), self.offset, self.label)

    def normalized(self, grid: SurfaceGrid, collar_tol=1e-10) -> "Hamiltonian":
        """Zero grid mean on the torus; compact support inside the disk otherwise."""
        x, y = grid.xy
        v = self(x, y)
        if grid.domain == "torus":
            return Hamiltonian(self.f, self.scale, self.shift, self.offset + float(np.mean(v)), self.label)
        outside = ~grid.inside
        bound = collar_tol * max(1.0, float(np.max(np.abs(v))))
        if np.any(outside) and np.max(np.abs(v[outside])) > bound:
            raise ValueError("Hamiltonian does not vanish outside the disk (compact support violated)")
        return self

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0

    def derivatives(self, x, y, h=FD_STEP):
        """``(Hx, Hy, Hxx, Hxy, Hyy)`` by fourth-order central differences."""
        if self.is_zero:
            z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
            return z, z, z, z, z
        c = self(x, y)
        xp1, xm1, xp2, xm2 = self(x + h, y), self(x - h, y), self(x + 2 * h, y), self(x - 2 * h, y)
        yp1, ym1, yp2, ym2 = self(x, y + h), self(x, y - h), self(x, y + 2 * h), self(x, y - 2 * h)
        Hx = (-xp2 + 8 * xp1 - 8 * xm1 + xm2) / (12 * h)
        Hy = (-yp2 + 8 * yp1 - 8 * ym1 + ym2) / (12 * h)
        Hxx = (-xp2 + 16 * xp1 - 30 * c + 16 * xm1 - xm2) / (12 * h * h)
        Hyy = (-yp2 + 16 * yp1 - 30 * c + 16 * ym1 - ym2) / (12 * h * h)

        def cross(k):
            return (
                self(x + k, y + k) - self(x + k, y - k) - self(x - k, y + k) + self(x - k, y - k)
            ) / (4 * k * k)

        Hxy = (4 * cross(h) - cross(2 * h)) / 3
        return Hx, Hy, Hxx, Hxy, Hyy


def vector_field(H: Hamiltonian, z):
    """``X_H(z)`` and ``DX_H(z) = J0 Hess H`` for points ``z[..., 2]``."""
    Hx, Hy, Hxx, Hxy, Hyy = H.derivatives(z[..., 0], z[..., 1])
    X = np.stack([-Hy, Hx], axis=-1)
    DX = np.empty(z.shape[:-1] + (2, 2))
    DX[..., 0, 0] = -Hxy
    DX[..., 0, 1] = -Hyy
    DX[..., 1, 0] = Hxx
    DX[..., 1, 1] = Hxy
    return X, DX


def rk4_step(H, z, A, dt):
    """One RK4 step of ``z' = X_H(z)``, ``A' = DX_H(z) A``."""
    X1, D1 = vector_field(H, z)
    K1 = D1 @ A
    X2, D2 = vector_field(H, z + 0.5 * dt * X1)
    K2 = D2 @ (A + 0.5 * dt * K1)
    X3, D3 = vector_field(H, z + 0.5 * dt * X2)
    K3 = D3 @ (A + 0.5 * dt * K2)
    X4, D4 = vector_field(H, z + dt * X3)
    K4 = D4 @ (A + dt * K3)
    z = z + dt / 6 * (X1 + 2 * X2 + 2 * X3 + X4)
    A = A + dt / 6 * (K1 + 2 * K2 + 2 * K3 + K4)
    return z, A


def march(H, z, A, duration, dt, stops=(), callback=None):
    """Advance ``(z, A)`` along the flow of ``H`` for ``duration``.

    Steps are at most ``dt`` and land exactly on every time in ``stops``
    (sorted, within ``[0, duration]``).  Returns the states at the stops and
    the final state; ``callback(t, z, A)`` runs after every step.
    """
    stops = list(np.asarray(stops, dtype=float))
    targets = sorted(set(stops + [float(duration)]))
    out = {}
    t = 0.0
    for target in targets:
        while not H.is_zero and t < target - 1e-15:
            n = max(1, int(np.ceil((target - t) / dt - 1e-9)))
            h = (target - t) / n
            z, A = rk4_step(H, z, A, h)
            t = t + h if n > 1 else target
            if callback is not None:
                callback(t, z, A)
        out[target] = (z, A)
    return [out[s] for s in stops], (z, A)


def symplectic_drift(A) -> float:
    """``max |A^T J0 A - J0|``, which for 2x2 matrices is ``max |det A - 1|``."""
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return float(np.max(np.abs(det - 1.0))) if det.size else 0.0


def inv2(A):
    """Inverse of a stack of 2x2 matrices."""
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 1, 1] = A[..., 0, 0]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    return out / det[..., None, None]


# ---------------------------------------------------------------------------
# flow specifications


@dataclass
class HamFlowSpec:
    """A Hamiltonian isotopy given segment by segment.

    Parameters
    ----------
    segments : list of (duration, Hamiltonian or callable)
        Autonomous pieces, run in order.
    dt : float
        RK4 step bound.
    """

    segments: list = field(default_factory=list)
    dt: float = 1e-2

    @classmethod
    def autonomous(cls, H, duration=1.0, dt=1e-2):
        return cls([(duration, H)], dt)

    @classmethod
    def time_dependent(cls, fn, m=16, duration=1.0, dt=1e-2, label=""):
        """Freeze ``fn(t, x, y)`` at the midpoints of ``m`` equal steps."""
        step = duration / m
        segs = []
        for i in range(m):
            tm = (i + 0.5) * step
            segs.append((step, Hamiltonian(lambda x, y, tm=tm: fn(tm, x, y), label=f"{label}@{tm:.4g}")))
        return cls(segs, dt)

    def compile(self, grid: SurfaceGrid) -> GroupPath:
        """Normalise every piece for ``grid`` and build the group path."""
        segs = []
        for duration, H in self.segments:
            if not isinstance(H, Hamiltonian):
                H = Hamiltonian(H)
            segs.append(Segment(float(duration), H.normalized(grid)))
        return GroupPath(segs)


def fourier_hamiltonian(rng, modes=2, amplitude=0.01, label="fourier"):
    """Random torus Hamiltonian ``sum (a cos + b sin)(2 pi (kx x + ky y))``.

    Coefficients are Gaussian divided by ``kx^2 + ky^2``; the sum is scaled so
    that its largest coefficient magnitude is ``amplitude``.
    """
    ks = [(kx, ky) for kx in range(-modes, modes + 1) for ky in range(0, modes + 1) if ky > 0 or kx > 0]
    coef = rng.normal(size=(len(ks), 2)) / np.array([[kx * kx + ky * ky] for kx, ky in ks])
    coef *= amplitude / np.max(np.abs(coef))
    kv = np.array(ks, dtype=float)

    def f(x, y):
        phase = 2 * np.pi * (np.multiply.outer(x, kv[:, 0]) + np.multiply.outer(y, kv[:, 1]))
        return np.cos(phase) @ coef[:, 0] + np.sin(phase) @ coef[:, 1]

    return Hamiltonian(f, label=label)


def bump_hamiltonian(rng, R, amplitude=0.02, power=8, label="bump"):
    """Random disk Hamiltonian ``(c + b . p) * (1 - |p - p0|^2 / rho^2)^power`` inside the disk of radius ``R``.

    The centre ``p0`` and radius ``rho`` keep the support inside the disk;
    ``c`` sets a rotation and ``b`` a shear, both of size ``amplitude``.
    """
    centre = rng.uniform(-0.25, 0.25, size=2) * R
    rho = R - np.hypot(*centre) - 0.05 * R
    c, b1, b2 = amplitude * rng.uniform(-1, 1, size=3)
    b1, b2 = b1 / R, b2 / R

    def f(x, y):
        return (c + b1 * x + b2 * y) * poly_bump(np.hypot(x - centre[0], y - centre[1]), rho, power)

    return Hamiltonian(f, label=label)


def check_step(grid: SurfaceGrid, path: GroupPath, dt: float, limit=1.0):
    """CFL-style bound ``dt * max |DX_H| <= limit`` on the grid."""
    x, y = grid.xy
    z = np.stack([x, y], -1)
    for seg in path.segments:
        _, DX = vector_field(seg.generator, z)
        rate = float(np.max(np.abs(DX))) if DX.size else 0.0
        if dt * rate > limit:
            raise FlowError(
                f"time step {dt:g} too large for |DX_H| = {rate:.3g}; use dt <= {limit / rate:.3g}"
            )


@dataclass
class FlowState:
    """Sampled flow from the grid nodes.

    ``phi[k]`` and ``A[k]`` are positions and linearisations at ``times[k]``;
    ``psi[k]`` and ``B[k]`` are the same for the inverse map ``phi_t^-1``.
    """

    grid: SurfaceGrid
    times: np.ndarray
    phi: np.ndarray
    A: np.ndarray
    psi: np.ndarray
    B: np.ndarray
    drift: float = 0.0


def grid_points(grid: SurfaceGrid):
    x, y = grid.xy
    return np.stack([x, y], -1)


def forward_map(grid, path: GroupPath, times, dt, callback=None):
    """``phi_t`` and ``D phi_t`` at the grid nodes for sorted ``times``."""
    times = np.asarray(times, dtype=float)
    z = grid_points(grid)
    A = np.broadcast_to(np.eye(2), z.shape[:-1] + (2, 2)).copy()
    b = path.breaks
    phis = np.empty((len(times),) + z.shape)
    As = np.empty((len(times),) + A.shape)
    if len(path) == 0:
        phis[:] = z
        As[:] = A
        return phis, As
    idx, off = path.locate(times)
    for i, seg in enumerate(path.segments):
        sel = np.nonzero(idx == i)[0]
        cb = None if callback is None else (lambda t, zz, AA, t0=b[i]: callback(t0 + t, zz, AA))
        states, (z, A) = march(seg.generator, z, A, seg.duration, dt, off[sel], cb)
        for k, (zz, AA) in zip(sel, states):
            phis[k], As[k] = zz, AA
    return phis, As


def inverse_map_chunks(grid, path: GroupPath, times, dt, chunk=32):
    """Yield ``(index, psi_t, D psi_t)`` in blocks of at most ``chunk`` times.

    ``index`` refers to positions in ``times`` (any order).  Within segment
    ``i`` the inverse is the backward flow of ``H_i`` for the elapsed time,
    followed by the full backward flows of the earlier segments; the backward
    march of each segment is resumed from block to block, so memory stays at
    ``chunk`` copies of the grid.
    """
    times = np.asarray(times, dtype=float)
    p = grid_points(grid)
    eye = np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2))
    if len(path) == 0:
        for lo in range(0, len(times), chunk):
            sel = np.arange(lo, min(lo + chunk, len(times)))
            yield sel, np.broadcast_to(p, (len(sel),) + p.shape), np.broadcast_to(eye, (len(sel),) + eye.shape)
        return
    idx, off = path.locate(times)
    segs = path.segments
    for i in np.unique(idx):
        sel = np.nonzero(idx == i)[0]
        sel = sel[np.argsort(off[sel], kind="stable")]
        gen = -segs[i].generator
        z, A, t = p, eye.copy(), 0.0
        for lo in range(0, len(sel), chunk):
            block = sel[lo : lo + chunk]
            stops = off[block] - t
            states, (z, A) = march(gen, z, A, float(stops[-1]), dt, stops)
            t = float(off[block[-1]])
            zs = np.stack([s[0] for s in states])
            Bs = np.stack([s[1] for s in states])
            for j in range(i - 1, -1, -1):
                _, (zs, Bs) = march(-segs[j].generator, zs, Bs, segs[j].duration, dt)
            yield block, zs, Bs


def inverse_map(grid, path: GroupPath, times, dt):
    """``psi_t = phi_t^-1`` and ``D psi_t`` at the grid nodes for ``times``."""
    times = np.asarray(times, dtype=float)
    p = grid_points(grid)
    psis = np.empty((len(times),) + p.shape)
    Bs = np.empty((len(times),) + p.shape[:-1] + (2, 2))
    for sel, z, B in inverse_map_chunks(grid, path, times, dt, chunk=max(1, len(times))):
        psis[sel] = z
        Bs[sel] = B
    return psis, Bs


def integrate_flow(grid: SurfaceGrid, spec, times=None, dt=None, tol_flow=TOL_FLOW) -> FlowState:
    """RK4 flow of ``spec`` from the grid nodes, with its inverse.

    ``times`` defaults to the segment breaks.  Raises :class:`FlowError` when
    the step bound fails or the symplectic drift exceeds ``tol_flow``.
    """
    if isinstance(spec, HamFlowSpec):
        dt = spec.dt if dt is None else dt
        path = spec.compile(grid)
    else:
        path = spec
        dt = 1e-2 if dt is None else dt
    check_step(grid, path, dt)
    times = path.breaks if times is None else np.asarray(times, dtype=float)
    phi, A = forward_map(grid, path, times, dt)
    psi, B = inverse_map(grid, path, times, dt)
    drift = max(symplectic_drift(A), symplectic_drift(B))
    if drift > tol_flow:
        raise FlowError(f"symplectic drift {drift:.3e} exceeds {tol_flow:.1e}; reduce the time step")
    return FlowState(grid, times, phi, A, psi, B, drift)
