"""The product of hyperbolic fibers over the grid, acted on by Hamiltonian flows.

A point is a :class:`JField`, stored for the engine as the ambient array
``(2, N, N)`` of Siegel coordinates ``(X, Y)``.  Geodesics are fibrewise
hyperbolic geodesics and the 2-form is the ``dA``-weighted sum of the
fibrewise trace forms, ``-(1/2) dX ^ dY / Y^2`` per node.

A flow acts by push-forward, ``(phi . J)(p) = B^-1 J(q) B`` with
``q = phi^-1(p)`` and ``B = D(phi^-1)(p)``.
"""

from __future__ import annotations

import numpy as np

from ..engine import GroupPath, QmReport, nu_x
from ..quadrature import QuadParams
from .curvature import hermitian_scalar_curvature
from .flow import FlowError, FlowState, HamFlowSpec, check_step, inv2, inverse_map_chunks, vector_field
from .grid import J2_to_siegel, JField, SurfaceGrid, siegel_to_J2

# factor turning sum S(J) H dA into the moment map of the fibrewise trace form
TRACE_MOMENT_FACTOR = -0.5
# largest spectral tail accepted for a field that is interpolated at a segment start
RESOLUTION_TOL = 1e-5


class FiberSpace:
    """Engine instance: ``dA``-weighted product of upper half-planes."""

    max_chunk = 4

    def __init__(self, grid: SurfaceGrid):
        self.grid = grid
        self.point_shape = (2, grid.N, grid.N)

    def __repr__(self):
        return f"FiberSpace({self.grid})"

    def basepoint(self):
        return JField.constant(self.grid).ambient()

    def describe(self, x) -> str:
        return "J0" if np.allclose(x[0], 0) and np.allclose(x[1], 1) else "J"

    @property
    def triangle_bound(self):
        # per fiber pi/2 for the trace form (ideal triangle), weighted by area
        return self.grid.area * np.pi / 2

    def fan_derivatives(self, x, y, s, ydot=None):
        """Fibrewise geodesic fan with exact ``s`` and ``t`` derivatives.

        The geodesic from ``z1`` to ``z2`` is the image of the radial segment
        from 0 to ``w = (z2 - z1) / (z2 - conj z1)`` under the inverse Cayley
        map ``w -> (z1 - w conj z1) / (1 - w)``.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        z1 = x[0] + 1j * x[1]
        z2 = y[..., 0, :, :] + 1j * y[..., 1, :, :]
        c1 = np.conj(z1)
        w = (z2 - z1) / (z2 - c1)
        r = np.abs(w)
        small = r < 1e-6
        u = np.where(small, 1.0, w / np.where(small, 1.0, r))
        a = np.arctanh(np.minimum(r, 1 - 1e-16))
        sk = s.reshape((-1,) + (1,) * w.ndim)
        g = np.tanh(sk * a)
        ws = g * u
        num = z1 - c1  # 2i Y1
        jac = num / (1 - ws) ** 2
        z = (z1 - ws * c1) / (1 - ws)
        sech2 = 1.0 / np.cosh(sk * a) ** 2
        zs = jac * (a * sech2 * u)
        D = np.stack([z.real, z.imag], axis=-3)
        Ds = np.stack([zs.real, zs.imag], axis=-3)
        Dt = None
        if ydot is not None:
            ydot = np.asarray(ydot, dtype=float)
            dz2 = ydot[..., 0, :, :] + 1j * ydot[..., 1, :, :]
            dw = num / (z2 - c1) ** 2 * dz2
            rs = np.where(small, 1.0, r)
            rho = np.where(small, sk + (sk - sk**3) * r**2 / 3, g / rs)
            gprime = sk * sech2 / (1 - np.minimum(r, 1 - 1e-16) ** 2)
            drho = np.where(small, 2 * (sk - sk**3) * r / 3, (gprime * rs - g) / rs**2)
            radial = np.real(np.conj(w) * dw) / rs
            dws = rho * dw + drho * radial * w
            zt = jac * dws
            Dt = np.stack([zt.real, zt.imag], axis=-3)
        return D, Ds, Dt

    def geodesic_fan(self, x, y, s):
        return self.fan_derivatives(x, y, s)[0]

    def form(self, p, a, b):
        Y = p[..., 1, :, :]
        dens = -0.5 * (a[..., 0, :, :] * b[..., 1, :, :] - a[..., 1, :, :] * b[..., 0, :, :]) / (Y * Y)
        return dens.sum(axis=(-2, -1)) * self.grid.dA


class HamAction:
    """Push-forward action of grid Hamiltonian flows on :class:`FiberSpace` points.

    Parameters
    ----------
    grid : SurfaceGrid
    dt : float
        RK4 step bound for the flows.
    method : {"spectral", "fd4"}
        Spatial derivatives for curvature and Lie derivatives.
    """

    def __init__(self, grid: SurfaceGrid, dt=1e-2, method="spectral", cache_size=2048, chunk=32):
        self.grid = grid
        self.chunk = chunk
        self.dt = float(dt)
        self.method = method
        self.cache_size = cache_size
        self._cache_key = None
        self._cache = {}
        self._gen = {}

    # -- helpers -----------------------------------------------------------

    def _generator_data(self, H):
        key = id(H)
        if key not in self._gen or self._gen[key][0] is not H:
            x, y = self.grid.xy
            z = np.stack([x, y], -1)
            X, DX = vector_field(H, z)
            self._gen[key] = (H, X, DX, H(x, y))
        return self._gen[key][1:]

    def speed(self, H) -> float:
        _, DX, _ = self._generator_data(H)
        return float(np.max(np.abs(DX))) / np.pi if DX.size else 0.0

    def _start_fields(self, path, x):
        """Fields ``y_i = phi_{t_i} . x`` at the segment starts, with their data.

        For each segment this holds the field, whether it is flat, its scalar
        curvature and the spectral gradients of its matrix entries.  Each
        ``y_{i+1}`` is the push-forward of ``y_i`` by the whole segment ``i``.
        """
        key = (id(path), id(x))
        if getattr(self, "_starts_key", None) == key:
            return self._starts
        out = []
        field = JField.from_ambient(self.grid, x)
        for i, seg in enumerate(path.segments):
            flat = field.is_flat()
            S = grads = None
            if not flat:
                S = hermitian_scalar_curvature(field, self.method)
                J = field.J()
                grads = np.array([
                    [[self.grid.deriv(J[..., r, c], *d, method="spectral") for c in range(2)] for r in range(2)]
                    for d in ((1, 0), (0, 1))
                ])
            out.append((field, flat, S, grads))
            if i + 1 < len(path.segments):
                single = GroupPath.single(seg.generator, seg.duration)
                (_, psi, B), = inverse_map_chunks(self.grid, single, [seg.duration], self.dt, 1)
                field = JField(self.grid, *J2_to_siegel(self._pushed(field, flat, psi[0], B[0])))
                tail = field.spectral_tail()
                if tail > RESOLUTION_TOL:
                    raise FlowError(
                        f"field entering segment {i + 2} of {len(path)} is under-resolved (spectral tail {tail:.1e} > "
                        f"{RESOLUTION_TOL:.0e}); refine the grid or use gentler or shorter segments"
                    )
        self._starts_key = key
        self._starts = out
        self._keep = (path, x)
        return out

    def _pushed(self, field, flat, q, B):
        if flat:
            Jq = np.broadcast_to(siegel_to_J2(0.0, 1.0), B.shape)
        else:
            Jq = siegel_to_J2(*field.sample(q[..., 0], q[..., 1]))
        return inv2(B) @ Jq @ B

    def _compute(self, path, x, times):
        """Orbit points, velocities and moments at ``times``.

        Inside segment ``i`` the orbit is ``J_t = phi_s . y_i`` with ``phi_s``
        the flow of the autonomous ``H_i``, so ``J_t(p) = B^-1 y_i(q) B`` with
        ``q = psi_s(p)``, ``B = D psi_s(p)``.  Because ``H_i`` is autonomous,
        ``d/ds (phi_s . y) = phi_s . W`` with ``W = [DX, y] - (X . grad) y``
        taken on the smooth start field, and ``S(phi . y) = S(y) o psi``.
        Nothing is differentiated after the flow, so sheared orbits stay
        accurate.
        """
        starts = self._start_fields(path, x)
        times = np.asarray(times, dtype=float)
        idx, off = path.locate(times)
        shape = (2, self.grid.N, self.grid.N)
        pos = np.empty((len(times),) + shape)
        vel = np.empty((len(times),) + shape)
        mom = np.zeros(len(times))
        for i in np.unique(idx):
            seg = path.segments[i]
            field, flat, S, grads = starts[i]
            _, _, Hgrid = self._generator_data(seg.generator)
            sel = np.nonzero(idx == i)[0]
            single = GroupPath.single(seg.generator, seg.duration)
            for block, psi, B in inverse_map_chunks(self.grid, single, off[sel], self.dt, self.chunk):
                for j, q, Bk in zip(sel[block], psi, B):
                    Xq, DXq = vector_field(seg.generator, q)
                    if flat:
                        Yq = np.broadcast_to(siegel_to_J2(0.0, 1.0), Bk.shape)
                        W = DXq @ Yq - Yq @ DXq
                    else:
                        Yq = siegel_to_J2(*field.sample(q[..., 0], q[..., 1]))
                        g = np.array([[[self.grid.interpolate(grads[d, r, c], q[..., 0], q[..., 1]) for c in range(2)]
                                       for r in range(2)] for d in range(2)])
                        conv = np.moveaxis(g[0] * Xq[..., 0] + g[1] * Xq[..., 1], (0, 1), (-2, -1))
                        W = DXq @ Yq - Yq @ DXq - conv
                        Sq = self.grid.interpolate(S, q[..., 0], q[..., 1])
                        mom[j] = TRACE_MOMENT_FACTOR * float(self.grid.integrate(Sq * Hgrid))
                    Binv = inv2(Bk)
                    Jt = Binv @ Yq @ Bk
                    dJ = Binv @ W @ Bk
                    Xs, Ys = J2_to_siegel(Jt)
                    dY = -(Ys**2) * dJ[..., 1, 0]
                    dX = -dY * Jt[..., 1, 1] - Ys * dJ[..., 1, 1]
                    pos[j] = (Xs, Ys)
                    vel[j] = (dX, dY)
        return [(pos[k], vel[k], mom[k]) for k in range(len(times))]

    def _lookup(self, path, x, times):
        times = np.asarray(times, dtype=float)
        key = (id(path), id(x))
        if key != self._cache_key:
            self._cache_key = key
            self._cache = {}
            self._keep = (path, x)
        missing = sorted({float(t) for t in times if float(t) not in self._cache})
        if missing:
            if len(path) == 0:
                for t in missing:
                    self._cache[t] = (np.array(x), np.zeros_like(x), 0.0)
            else:
                for t, val in zip(missing, self._compute(path, x, np.array(missing))):
                    self._cache[t] = val
            if len(self._cache) > self.cache_size:
                keep = {float(t) for t in times}
                self._cache = {t: v for t, v in self._cache.items() if t in keep}
        return [self._cache[float(t)] for t in times]

    # -- engine interface --------------------------------------------------

    def orbit(self, path, x, times):
        vals = self._lookup(path, x, times)
        return np.stack([v[0] for v in vals]), np.stack([v[1] for v in vals])

    def moment(self, path, x, times):
        return np.array([v[2] for v in self._lookup(path, x, times)])

    def endpoint_point(self, path, x):
        if len(path) == 0:
            return np.array(x)
        return self.orbit(path, x, [path.duration])[0][0]

    def act(self, a, x):
        """Translation ``tau_a``: ``(tau_a . J)(p) = J(p - a)``."""
        a = np.asarray(a, dtype=float)
        shift = a / self.grid.h
        if np.allclose(shift, np.round(shift)):
            sx, sy = (int(v) for v in np.round(shift))
            return np.roll(np.asarray(x), (sx, sy), axis=(-2, -1))
        px, py = self.grid.xy
        X, Y = JField.from_ambient(self.grid, x).sample(px - a[0], py - a[1])
        return np.stack([X, Y])

    def inverse_element(self, a):
        return -np.asarray(a, dtype=float)

    def conjugate_generator(self, H, a):
        return H.translated(a)


def ham_instance(grid: SurfaceGrid, dt=1e-2, method="spectral"):
    return FiberSpace(grid), HamAction(grid, dt, method)


def pushforward_J(state: FlowState, k: int, J: JField) -> JField:
    """``phi_t . J`` at the ``k``-th saved time of ``state``."""
    if J.grid != state.grid:
        raise ValueError("field and flow live on different grids")
    psi, B = state.psi[k], state.B[k]
    if J.is_flat():
        Jq = np.broadcast_to(siegel_to_J2(0.0, 1.0), B.shape)
    else:
        Xq, Yq = J.sample(psi[..., 0], psi[..., 1])
        Jq = siegel_to_J2(Xq, Yq)
    return JField.from_J(J.grid, inv2(B) @ Jq @ B)


def frak_S(grid: SurfaceGrid, J: JField | None, spec, quad: QuadParams | None = None, dt=None, method="spectral") -> QmReport:
    """Quasimorphism value ``nu_J`` of the flow ``spec`` on the fiber product.

    ``spec`` is a :class:`HamFlowSpec` or an already compiled path.
    """
    if isinstance(spec, HamFlowSpec):
        dt = spec.dt if dt is None else dt
        path = spec.compile(grid)
    else:
        path = spec
        dt = 1e-2 if dt is None else dt
    check_step(grid, path, dt)
    J = JField.constant(grid) if J is None else J
    inst, action = ham_instance(grid, dt, method)
    return nu_x(inst, action, path, J.ambient(), quad)
