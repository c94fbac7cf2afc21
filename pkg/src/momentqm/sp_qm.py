"""Sp(2n, R) acting on compatible complex structures.

The action is ``g . J = g J g^-1`` with moment map ``-tr(Xi J) / 2`` scaled
by the form kind.  Besides the engine instance this module provides two
winding-number invariants of symplectic paths:

* :func:`maslov_turns`, the variation of ``det_C(U_t)^2`` where ``U_t`` is the
  unitary polar factor of ``g_t``;
* :func:`rotation_number_nu`, the rotation number of the isotropy action on
  the tangent space at the basepoint after parallel transport along
  geodesics.  It reproduces ``nu_x`` without any surface quadrature.

:func:`calibrate` measures the proportionality constants between the two and
stores them in a :class:`CalibrationLedger`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg

from .engine import GroupPath, Segment, homogenize, nu_x
from .quadrature import QuadParams
from .siegel import FORM_KINDS, SiegelSpace, form_scale
from .symplectic import (
    TOL_SP,
    NotSymplecticError,
    UndersampledError,
    algebra_residual,
    conj_action,
    det_complex,
    half_dim,
    j0,
    mat_exp,
    polar_unitary,
    random_algebra,
    sp_inverse,
    symplectic_residual,
    transvection_to,
    varangle,
)


class SpAction:
    """Conjugation action of Sp(2n, R) on a :class:`SiegelSpace`."""

    def __init__(self, space: SiegelSpace):
        self.space = space
        self.n = space.n

    def _starts(self, path: GroupPath):
        g = np.eye(2 * self.n)
        out = [g]
        for seg in path.segments:
            g = mat_exp(seg.duration * seg.generator) @ g
            out.append(g)
        return out

    def speed(self, generator) -> float:
        """Orbit speed bound used to size time panels (spectral norm / pi)."""
        return float(np.linalg.norm(generator, 2)) / np.pi

    def endpoint(self, path: GroupPath) -> np.ndarray:
        return self._starts(path)[-1]

    def elements(self, path: GroupPath, times):
        """Group elements ``g_t`` and generators ``Xi_t`` at sorted ``times``."""
        times = np.asarray(times, dtype=float)
        if len(path) == 0:
            eye = np.broadcast_to(np.eye(2 * self.n), times.shape + (2 * self.n,) * 2)
            return eye.copy(), np.zeros_like(eye)
        starts = np.stack(self._starts(path)[:-1])
        gens = np.stack([np.asarray(s.generator, dtype=float) for s in path.segments])
        idx, off = path.locate(times)
        Xi = gens[idx]
        g = mat_exp(off[:, None, None] * Xi) @ starts[idx]
        return g, Xi

    def orbit(self, path, x, times):
        g, Xi = self.elements(path, times)
        y = g @ x @ sp_inverse(g)
        return y, Xi @ y - y @ Xi

    def moment(self, path, x, times):
        g, Xi = self.elements(path, times)
        y = g @ x @ sp_inverse(g)
        return self.space.moment(y, Xi)

    def endpoint_point(self, path, x):
        return conj_action(self.endpoint(path), x)

    def act(self, h, x):
        return conj_action(h, x)

    def inverse_element(self, h):
        return sp_inverse(h)

    def conjugate_generator(self, generator, h):
        return h @ generator @ sp_inverse(h)


def sp_instance(n: int, kind: str = "trace"):
    """``(space, action)`` pair ready for :mod:`momentqm.engine`."""
    space = SiegelSpace(n, kind)
    return space, SpAction(space)


# ---------------------------------------------------------------------------
# path specifications


@dataclass
class SpPathSpec:
    """Description of a path in Sp(2n, R) starting at the identity.

    Exactly one of ``segments``, ``generator`` or ``samples`` is used:

    segments
        list of ``(duration, Xi)`` with ``Xi`` in sp(2n).
    generator
        callable ``t -> Xi(t)`` on ``[0, 1]``; frozen at the midpoints of
        ``m`` equal steps.
    samples
        group elements ``g_0 = I, ..., g_m`` on a uniform grid; each step is
        replaced by the one-parameter subgroup joining consecutive samples.
    """

    n: int
    segments: list | None = None
    generator: object = None
    samples: np.ndarray | None = None
    m: int = 64

    def compile(self) -> GroupPath:
        given = [self.segments is not None, self.generator is not None, self.samples is not None]
        if sum(given) != 1:
            raise ValueError("give exactly one of segments, generator or samples")
        if self.segments is not None:
            segs = [Segment(float(d), np.asarray(X, dtype=float)) for d, X in self.segments]
        elif self.generator is not None:
            dt = 1.0 / self.m
            segs = [Segment(dt, np.asarray(self.generator((i + 0.5) * dt), dtype=float)) for i in range(self.m)]
        else:
            segs = _segments_from_samples(np.asarray(self.samples, dtype=float))
        for s in segs:
            if s.generator.shape != (2 * self.n, 2 * self.n):
                raise ValueError(f"generator has shape {s.generator.shape}, expected {(2 * self.n,) * 2}")
            if algebra_residual(s.generator) > TOL_SP * max(1.0, np.max(np.abs(s.generator))):
                raise ValueError("generator is not in sp(2n)")
        return GroupPath(segs)


def _segments_from_samples(g, tol=1e-8):
    if np.max(np.abs(g[0] - np.eye(g.shape[-1]))) > tol:
        raise ValueError("sampled path must start at the identity")
    for gi in g:
        if symplectic_residual(gi) > TOL_SP * max(1.0, np.max(np.abs(gi)) ** 2):
            raise NotSymplecticError("sample is not symplectic")
    dt = 1.0 / (len(g) - 1)
    segs = []
    for a, b in zip(g[:-1], g[1:]):
        step = b @ sp_inverse(a)
        L = scipy.linalg.logm(step)
        if np.max(np.abs(np.imag(L))) > 1e-10:
            raise ValueError("consecutive samples too far apart for a real logarithm")
        Xi = np.real(L) / dt
        Xi = j0(half_dim(Xi)) @ _sym(-j0(half_dim(Xi)) @ Xi)  # project onto sp(2n)
        if np.max(np.abs(mat_exp(dt * Xi) @ a - b)) > 1e-8 * max(1.0, np.max(np.abs(b))):
            raise ValueError("samples violate the interpolation contract")
        segs.append(Segment(dt, Xi))
    return segs


def _sym(a):
    return 0.5 * (a + a.T)


def rotation_loop(n: int, m: int = 1, block: int | None = None) -> GroupPath:
    """``exp(2 pi m t K)`` with ``K = J0`` or, with ``block``, the rotation in one plane."""
    K = j0(n)
    if block is not None:
        K = np.zeros((2 * n, 2 * n))
        K[block, n + block] = -1.0
        K[n + block, block] = 1.0
    return GroupPath.single(2 * np.pi * m * K)


def random_sp_path(
    rng, n: int, segments: int = 2, rotation: float = 2.0, noise: float = 0.5, reach=None, power: int = 16
) -> GroupPath:
    """Random piecewise-constant path of total duration 1.

    Each generator is ``J0 (a I + S)`` with ``a`` uniform in
    ``[-rotation, rotation]`` and ``S`` Gaussian symmetric of size ``noise``.

    With ``reach`` set, draws are rejected until the orbit of ``J0`` under
    ``path ** power`` stays within that distance of ``J0``.  Far orbits
    would otherwise need matrix entries beyond double precision.
    """
    J = j0(n)
    for _ in range(1000):
        d = rng.dirichlet(np.ones(segments))
        segs = []
        for di in d:
            a = rng.uniform(-rotation, rotation)
            X = a * J + random_algebra(rng, n, noise)
            segs.append(Segment(float(max(di, 1e-3)), X))
        path = GroupPath(segs)
        if reach is None or orbit_reach(path**power, n) <= reach:
            return path
    raise RuntimeError("no path within reach; lower noise or raise reach")


def orbit_reach(path: GroupPath, n: int, samples_per_unit: int = 16) -> float:
    """Largest sampled distance from ``J0`` along the orbit of ``J0``."""
    space = SiegelSpace(n, "siegel")
    t = np.linspace(0.0, path.duration, int(np.ceil(path.duration * samples_per_unit)) + 1)
    ys, _ = SpAction(space).orbit(path, j0(n), t)
    return max(space.distance(j0(n), y) for y in ys)


def _as_path(path) -> GroupPath:
    return path.compile() if isinstance(path, SpPathSpec) else path


def _n_of(path: GroupPath, n=None):
    if n is not None:
        return n
    if len(path) == 0:
        raise ValueError("cannot infer n from an empty path; pass n")
    return half_dim(path.segments[0].generator)


def _sample_times(path: GroupPath, per_radian: float):
    """Grid containing every break, refined according to generator size."""
    pieces = []
    b = path.breaks
    for seg, lo, hi in zip(path.segments, b[:-1], b[1:]):
        rate = np.linalg.norm(seg.generator, 2) * seg.duration
        m = max(4, int(np.ceil(rate * per_radian)))
        pieces.append(np.linspace(lo, hi, m + 1)[:-1])
    pieces.append([b[-1]])
    return np.concatenate(pieces)


def _winding(path, fn, per_radian=8.0, max_refine=6):
    """varangle of ``fn(times)`` with refinement on undersampling."""
    for _ in range(max_refine):
        t = _sample_times(path, per_radian)
        try:
            return varangle(fn(t))
        except UndersampledError:
            per_radian *= 4
    raise UndersampledError("winding could not be resolved by refinement")


def maslov_turns(path, n=None) -> float:
    """Turns of ``det_C(U_t)^2`` where ``g_t = P_t U_t`` is the polar decomposition.

    Examples
    --------
    >>> round(maslov_turns(rotation_loop(1)), 12)
    2.0
    """
    path = _as_path(path)
    if len(path) == 0:
        return 0.0
    n = _n_of(path, n)
    action = SpAction(SiegelSpace(n))

    def det2(t):
        g, _ = action.elements(path, t)
        U, _ = polar_unitary(g, check=False)
        return det_complex(U, tol=1e-7) ** 2

    return _winding(path, det2)


@lru_cache(maxsize=8)
def _tangent_frame(n):
    """Basis of the +i eigenspace of ``A -> J0 A`` on the tangent space at J0."""
    J = j0(n)
    d = 2 * n
    # tangent vectors at J0 are J0 S with S symmetric and anticommuting with J0
    basis = []
    for i in range(d):
        for k in range(i, d):
            S = np.zeros((d, d))
            S[i, k] = S[k, i] = 1.0
            S = 0.5 * (S + J @ S @ J)  # projection onto {S : S J0 = -J0 S}
            basis.append((J @ S).ravel())
    Uq, s, _ = np.linalg.svd(np.array(basis).T, full_matrices=False)
    E = Uq[:, s > 1e-10].T.reshape(-1, d, d)
    assert len(E) == n * (n + 1)
    Jm = np.einsum("jab,kab->jk", E, J @ E)
    w, V = np.linalg.eig(Jm)
    W = V[:, np.isclose(w, 1j)]
    return E, W, np.linalg.pinv(W)


def isotropy_det(U) -> np.ndarray:
    """Complex determinant of ``A -> U A U^-1`` on the tangent space at J0.

    ``U`` may be a stack of unitary symplectic matrices.
    """
    U = np.asarray(U, dtype=float)
    n = half_dim(U)
    E, W, Wp = _tangent_frame(n)
    moved = U[..., None, :, :] @ E @ np.swapaxes(U, -1, -2)[..., None, :, :]
    L = np.einsum("jab,...kab->...jk", E, moved)
    return np.linalg.det(Wp @ L @ W)


def rotation_number_nu(path, x=None, kind="trace", n=None) -> float:
    """``nu_x`` as a rotation number of the parallel-transported isotropy action.

    With ``x = h J0 h^-1`` (``h`` positive), the differential of ``g_t`` moved
    back to ``J0`` along the geodesic is the unitary polar factor ``U_t`` of
    ``h^-1 g_t h``.  The determinant of its action on the tangent space winds
    ``n + 1`` times per turn of ``det_C U_t``, while the moment integral over a
    full U(1) turn is ``2 pi n``; hence the factor ``-2 pi / (n + 1)`` per turn
    for the trace form.
    """
    path = _as_path(path)
    if len(path) == 0:
        return 0.0
    n = _n_of(path, n)
    x = j0(n) if x is None else np.asarray(x, dtype=float)
    h = transvection_to(x)
    hi = sp_inverse(h)
    action = SpAction(SiegelSpace(n))

    def dets(t):
        g, _ = action.elements(path, t)
        U, _ = polar_unitary(hi @ g @ h, check=False)
        return isotropy_det(U)

    turns = _winding(path, dets, per_radian=8.0 * (n + 1))
    return -form_scale(kind, n) * 2 * np.pi / (n + 1) * turns


def guichardet_wigner_restriction(loop, n=None, tol=TOL_SP) -> dict:
    """Winding of ``det_C`` along a loop in U(n) and the derived reference values.

    Returns a dict with ``winding`` (turns of ``det_C k_t``), ``ref_det2``
    (``-2 * winding``, the convention ``v = det_C^2``) and ``ref_det_n1``
    (``(n + 1) * winding``, the convention ``v = det_C^-(n+1)``).
    """
    loop = _as_path(loop)
    if len(loop) == 0:
        return {"winding": 0.0, "ref_det2": 0.0, "ref_det_n1": 0.0}
    n = _n_of(loop, n)
    action = SpAction(SiegelSpace(n))
    J = j0(n)
    for seg in loop.segments:
        X = seg.generator
        if np.max(np.abs(X @ J - J @ X)) > tol * max(1.0, np.max(np.abs(X))):
            raise ValueError("loop leaves U(n): generator does not commute with J0")
    end = action.endpoint(loop)
    if np.max(np.abs(end - np.eye(2 * n))) > 1e-8:
        raise ValueError("path does not close at the identity")

    def dets(t):
        g, _ = action.elements(loop, t)
        return det_complex(g, tol=1e-8)

    w = _winding(loop, dets)
    return {"winding": w, "ref_det2": -2.0 * w, "ref_det_n1": (n + 1) * w}


# ---------------------------------------------------------------------------
# calibration


@dataclass
class CalibrationLedger:
    """Frozen constants ``kappa[kind] = nu_kind / maslov_turns`` for one ``n``."""

    n: int
    kappa: dict
    provenance: list = field(default_factory=list)
    k_max: int = 16
    version: str = ""

    @property
    def kappa_trace(self):
        return self.kappa["trace"]

    @property
    def kappa_siegel(self):
        return self.kappa["siegel"]

    @property
    def kappa_bergman(self):
        return self.kappa["bergman"]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "CalibrationLedger":
        data = json.loads(Path(path).read_text())
        return cls(**data)


class CalibrationError(RuntimeError):
    pass


def _maslov_homogenized(path, n, k_max):
    """``maslov_turns(path^k) / k`` and a half-width from doubling defects."""
    ks = [1]
    while ks[-1] * 2 <= k_max:
        ks.append(ks[-1] * 2)
    vals = {k: maslov_turns(path**k, n) for k in ks}
    D = max([abs(vals[2 * k] - 2 * vals[k]) for k in ks if 2 * k in vals] + [0.0])
    # the defect of the Maslov quasimorphism is at most n turns
    D = max(D, float(n))
    return vals[ks[-1]] / ks[-1], D / ks[-1]


def calibrate(n: int, loops, paths, k_max=16, quad=None, kinds=FORM_KINDS, threads=1) -> CalibrationLedger:
    """Measure ``kappa`` per form kind and check it is constant on the suite.

    ``loops`` (closed at the identity, typically U(1) rotation loops) fix
    the constants, since both invariants are homomorphisms there.  Every item
    of ``loops + paths`` must then satisfy
    ``|nu_hom - kappa tau_hom| <= w_nu + |kappa| w_tau``.
    """
    from . import __version__

    if not loops:
        raise ValueError("calibration needs at least one loop")
    quad = quad or QuadParams()
    x = j0(n)
    items = [("loop", p) for p in loops] + [("path", p) for p in paths]
    taus = []
    for label, p in items:
        if label == "loop":
            t = maslov_turns(p, n)
            taus.append((t, 1e-6))
        else:
            taus.append(_maslov_homogenized(p, n, k_max))
    kappa = {}
    records = [
        {"index": i, "type": label, "segments": len(p), "tau": t, "tau_half_width": tw}
        for i, ((label, p), (t, tw)) in enumerate(zip(items, taus))
    ]
    for kind in kinds:
        space, action = sp_instance(n, kind)
        nus = []
        for label, p in items:
            if label == "loop":
                nus.append((nu_x(space, action, p, x, quad).value, 1e-6))
            else:
                r = homogenize(space, action, p, x, k_max, quad, threads=threads)
                nus.append((r.estimate, r.half_width))
        loop_ratios = [v / t for (v, _), (t, _) in zip(nus[: len(loops)], taus) if abs(t) > 0.5]
        if not loop_ratios:
            raise CalibrationError("calibration loops have zero Maslov index")
        k = float(np.mean(loop_ratios))
        if max(abs(r - k) for r in loop_ratios) > 1e-6 * abs(k):
            raise CalibrationError(f"{kind}: loop ratios disagree: {loop_ratios}")
        kappa[kind] = k
        for rec, (v, vw), (t, tw) in zip(records, nus, taus):
            miss = abs(v - k * t)
            allowed = vw + abs(k) * tw + 1e-6
            rec[f"nu_{kind}"] = v
            rec[f"nu_{kind}_half_width"] = vw
            rec[f"ok_{kind}"] = bool(miss <= allowed)
            if miss > allowed:
                raise CalibrationError(
                    f"{kind}: ratio not constant at item {rec['index']}: "
                    f"|{v:.6g} - {k:.6g} * {t:.6g}| = {miss:.3g} > {allowed:.3g}"
                )
    return CalibrationLedger(n, kappa, records, k_max, __version__)


def frozen_ledger(n: int) -> CalibrationLedger:
    """The calibration ledger shipped with the package for ``n`` (``n = 1, 2``).

    Regenerate with ``python -m momentqm.cli run configs/acceptance/c06_calibrate_n<n>.toml``.
    """
    from importlib.resources import files

    res = files("momentqm") / "data" / f"calibration_n{n}.json"
    if not res.is_file():
        raise FileNotFoundError(f"no frozen calibration ledger for n = {n}; run the calibrate scenario")
    return CalibrationLedger(**json.loads(res.read_text()))
