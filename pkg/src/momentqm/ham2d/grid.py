"""Structured grids on a flat torus or on a box around a planar disk.

Both domains are discretised as periodic ``N x N`` grids: the torus is
``[0, 1)^2`` with nodes at ``i / N``; the disk of radius ``R`` sits inside the
box ``[-L, L)^2`` (``L = box_ratio * R``) with a node at the origin.  Fields
on the disk domain are trivial (zero, or ``J0``) near the box boundary, so
the periodic extension is exact and the same spectral and fourth-order
stencils serve both domains.

Arrays follow ``indexing="ij"``: ``f[..., i, j]`` is the value at
``(x_i, y_j)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage

DOMAIN_TAGS = {"torus": 0, "disk": 1}
MAGIC = b"MQMGRID1"


@dataclass(frozen=True)
class SurfaceGrid:
    """Uniform grid with area form ``dx ^ dy``.

    Parameters
    ----------
    domain : {"torus", "disk"}
    N : int
        Nodes per side (at least 16).
    R : float
        Disk radius (ignored on the torus).
    box_ratio : float
        Half-width of the computational box in units of ``R``.
    """

    domain: str = "torus"
    N: int = 64
    R: float = 0.4
    box_ratio: float = 1.25

    def __post_init__(self):
        if self.domain not in DOMAIN_TAGS:
            raise ValueError(f"domain must be one of {sorted(DOMAIN_TAGS)}")
        if int(self.N) != self.N or self.N < 16:
            raise ValueError("N must be an integer >= 16")
        if self.domain == "disk" and not (self.R > 0 and self.box_ratio > 1):
            raise ValueError("disk needs R > 0 and box_ratio > 1")

    @property
    def tag(self) -> int:
        return DOMAIN_TAGS[self.domain]

    @property
    def period(self) -> float:
        return 1.0 if self.domain == "torus" else 2.0 * self.R * self.box_ratio

    @property
    def origin(self) -> float:
        if self.domain == "torus":
            return 0.0
        return -0.5 * self.period

    @property
    def h(self) -> float:
        return self.period / self.N

    @property
    def dA(self) -> float:
        return self.h**2

    @property
    def area(self) -> float:
        return 1.0 if self.domain == "torus" else float(np.pi * self.R**2)

    @cached_property
    def axis(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.N)

    @cached_property
    def xy(self):
        """Node coordinates ``(x, y)``, each of shape ``(N, N)``."""
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def inside(self) -> np.ndarray:
        """Nodes in the domain proper (all nodes on the torus)."""
        if self.domain == "torus":
            return np.ones((self.N, self.N), dtype=bool)
        x, y = self.xy
        return x**2 + y**2 < self.R**2

    def wrap(self, x):
        """Map coordinates into the fundamental box."""
        lo = 0.0 if self.domain == "torus" else -0.5 * self.period
        return lo + np.mod(np.asarray(x) - lo, self.period)

    def refine(self, factor=2) -> "SurfaceGrid":
        return SurfaceGrid(self.domain, self.N * factor, self.R, self.box_ratio)

    def integrate(self, f) -> np.ndarray:
        """``sum f dA`` over the trailing two axes."""
        return np.sum(f, axis=(-2, -1)) * self.dA

    # -- derivatives -------------------------------------------------------

    @cached_property
    def _k(self):
        k = 2 * np.pi * np.fft.fftfreq(self.N, d=self.h)
        k1 = k.copy()
        if self.N % 2 == 0:
            k1[self.N // 2] = 0.0  # odd derivatives drop the Nyquist mode
        return k1, k

    def spectral(self, f, dx=0, dy=0):
        """Spectral derivative ``d^(dx+dy) f / dx^dx dy^dy`` of periodic data."""
        if dx == 0 and dy == 0:
            return np.array(f, dtype=float, copy=True)
        k1, k = self._k
        F = np.fft.fft2(f, axes=(-2, -1))
        kx = (k1 if dx % 2 else k)[:, None]
        ky = (k1 if dy % 2 else k)[None, :]
        F = F * (1j * kx) ** dx * (1j * ky) ** dy
        return np.real(np.fft.ifft2(F, axes=(-2, -1)))

    def fd4(self, f, dx=0, dy=0):
        """Fourth-order periodic central differences, up to second order per axis."""
        out = np.asarray(f, dtype=float)
        for axis, order in ((-2, dx), (-1, dy)):
            if order == 0:
                continue
            r = lambda s: np.roll(out, -s, axis=axis)  # noqa: E731  f[i + s]
            if order == 1:
                out = (-r(2) + 8 * r(1) - 8 * r(-1) + r(-2)) / (12 * self.h)
            elif order == 2:
                out = (-r(2) + 16 * r(1) - 30 * out + 16 * r(-1) - r(-2)) / (12 * self.h**2)
            else:
                raise ValueError("fd4 supports derivative orders up to 2 per axis")
        return out

    def deriv(self, f, dx=0, dy=0, method="spectral"):
        if method == "spectral":
            return self.spectral(f, dx, dy)
        if method == "fd4":
            return self.fd4(f, dx, dy)
        raise ValueError(f"unknown derivative method {method!r}")

    # -- interpolation -----------------------------------------------------

    def interpolate(self, f, x, y, order=5):
        """Periodic spline interpolation of node data at points ``(x, y)``."""
        ix = (self.wrap(x) - self.origin) / self.h
        iy = (self.wrap(y) - self.origin) / self.h
        return ndimage.map_coordinates(
            np.asarray(f, dtype=float), [np.ravel(ix), np.ravel(iy)], order=order, mode="grid-wrap"
        ).reshape(np.shape(x))


@dataclass
class JField:
    """Compatible complex structure per node, in Siegel coordinates ``z = X + iY``.

    ``J0`` corresponds to ``X = 0, Y = 1``.
    """

    grid: SurfaceGrid
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        shape = (self.grid.N, self.grid.N)
        if self.X.shape != shape or self.Y.shape != shape:
            raise ValueError(f"fields must have shape {shape}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y)) and np.all(self.Y > 0)):
            raise ValueError("every fiber value needs finite X and Y > 0")

    @classmethod
    def constant(cls, grid, X=0.0, Y=1.0):
        return cls(grid, np.full((grid.N,) * 2, float(X)), np.full((grid.N,) * 2, float(Y)))

    @classmethod
    def from_ambient(cls, grid, a):
        return cls(grid, a[0], a[1])

    @classmethod
    def from_J(cls, grid, J):
        """From per-node matrices ``J`` of shape ``(N, N, 2, 2)``."""
        return cls(grid, *J2_to_siegel(J))

    @classmethod
    def random_smooth(cls, grid, rng, amplitude=0.3, modes=2):
        """Random smooth field from a few Fourier modes (times a bump on the disk)."""
        x, y = grid.xy
        w = 2 * np.pi / grid.period
        fields = []
        for _ in range(2):
            f = np.zeros_like(x)
            for kx in range(-modes, modes + 1):
                for ky in range(-modes, modes + 1):
                    if kx == ky == 0:
                        continue
                    a, b = rng.normal(size=2) / (kx * kx + ky * ky)
                    f += a * np.cos(w * (kx * x + ky * y)) + b * np.sin(w * (kx * x + ky * y))
            f *= amplitude / max(np.max(np.abs(f)), 1e-300)
            if grid.domain == "disk":
                f = f * smooth_bump(np.hypot(x, y), 0.9 * grid.R)
            fields.append(f)
        return cls(grid, fields[0], np.exp(fields[1]))

    def ambient(self) -> np.ndarray:
        return np.stack([self.X, self.Y])

    def J(self) -> np.ndarray:
        """Per-node matrices ``J0 G`` with ``G = [[1/Y, -X/Y], [-X/Y, Y + X^2/Y]]``."""
        return siegel_to_J2(self.X, self.Y)

    def is_flat(self, tol=0.0) -> bool:
        return bool(np.max(np.abs(self.X)) <= tol and np.max(np.abs(self.Y - 1)) <= tol)

    def check_support(self, tol=1e-10):
        if self.grid.domain == "disk":
            out = ~self.grid.inside
            if np.max(np.abs(self.X[out])) > tol or np.max(np.abs(self.Y[out] - 1)) > tol:
                raise ValueError("J field differs from J0 outside the disk")

    def spectral_tail(self) -> float:
        """Largest fraction of Fourier energy above a third of the grid band, over ``X`` and ``log Y``.

        A resolved field has a negligible tail; sheared push-forwards grow one.
        """
        out = 0.0
        for f in (self.X, np.log(self.Y)):
            f = f - f.mean()
            F = np.abs(np.fft.fft2(f)) ** 2
            total = F.sum()
            if total == 0:
                continue
            k = np.abs(np.fft.fftfreq(self.grid.N) * self.grid.N)
            K = np.maximum(k[:, None], k[None, :])
            out = max(out, float(F[K > self.grid.N / 3].sum() / total))
        return out

    def sample(self, x, y, order=5):
        """Interpolate in ``(X, log Y)`` at arbitrary points."""
        X = self.grid.interpolate(self.X, x, y, order)
        Y = np.exp(self.grid.interpolate(np.log(self.Y), x, y, order))
        return X, Y

    def save(self, path):
        write_grid(path, self.grid, self.ambient())

    @classmethod
    def load(cls, path, R=0.4, box_ratio=1.25):
        grid, data = read_grid(path, R=R, box_ratio=box_ratio)
        if data.shape[0] != 2:
            raise ValueError("a J field file holds exactly two arrays (X, Y)")
        return cls(grid, data[0], data[1])


def siegel_to_J2(X, Y):
    """Stack of 2x2 complex structures for Siegel coordinates ``X + iY``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    out = np.empty(X.shape + (2, 2))
    # J = J0 G with J0 = [[0, -1], [1, 0]]
    out[..., 0, 0] = X / Y
    out[..., 0, 1] = -(Y + X * X / Y)
    out[..., 1, 0] = 1.0 / Y
    out[..., 1, 1] = -X / Y
    return out


def J2_to_siegel(J):
    """Inverse of :func:`siegel_to_J2`: ``G = -J0 J`` has ``G11 = 1/Y``, ``G12 = -X/Y``."""
    J = np.asarray(J, dtype=float)
    Y = 1.0 / J[..., 1, 0]
    return -Y * J[..., 1, 1], Y


def smooth_bump(r, R):
    """``exp(1 - 1 / (1 - (r/R)^2))`` inside ``r < R``, zero outside; equals 1 at 0."""
    rho2 = (np.asarray(r, dtype=float) / R) ** 2
    out = np.zeros_like(rho2)
    m = rho2 < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - rho2[m]))
    return out


def poly_bump(r, R, k=8):
    """``(1 - (r/R)^2)^k`` inside ``r < R``, zero outside; ``C^(k-1)`` with integral ``pi R^2 / (k + 1)``."""
    rho2 = (np.asarray(r, dtype=float) / R) ** 2
    return np.maximum(0.0, 1.0 - rho2) ** k


# ---------------------------------------------------------------------------
# binary grid files


def write_grid(path, grid: SurfaceGrid, data):
    """Write ``data`` (``(N, N)`` or ``(k, N, N)``) after a 16-byte header.

    Header: 8-byte magic ``MQMGRID1``, little-endian uint32 ``N`` and uint32
    domain tag (0 torus, 1 disk).  Payload: row-major little-endian float64;
    the number of stacked arrays follows from the file size.
    """
    data = np.asarray(data, dtype="<f8")
    if data.shape[-2:] != (grid.N, grid.N):
        raise ValueError("data does not match the grid")
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", grid.N, grid.tag))
        fh.write(np.ascontiguousarray(data).tobytes())


def read_grid(path, R=0.4, box_ratio=1.25):
    """Read a grid file; returns ``(grid, data)`` with ``data`` of shape ``(k, N, N)``."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise ValueError("not a grid file (bad magic)")
    N, tag = struct.unpack("<II", raw[8:16])
    domains = {v: k for k, v in DOMAIN_TAGS.items()}
    if tag not in domains:
        raise ValueError(f"unknown domain tag {tag}")
    payload = np.frombuffer(raw[16:], dtype="<f8")
    if N == 0 or payload.size % (N * N):
        raise ValueError("payload size is not a multiple of N*N")
    grid = SurfaceGrid(domains[tag], N, R, box_ratio)
    return grid, payload.reshape(-1, N, N).astype(float)
