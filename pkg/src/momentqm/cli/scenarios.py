"""Scenario implementations.

Each scenario takes a validated :class:`ScenarioConfig` and a thread count and
returns a :class:`ScenarioResult`: the CSV rows (see ``csv_columns.json``),
optional plot series and optional extra files (the calibration ledger).
Random inputs come from splitmix64 sub-streams of the config seed: stream 0
for paths and flows, 1 for basepoints and fields, 2 for conjugators.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..engine import GroupPath, homogenize, nu_x
from ..expr import parse
from ..ham2d import (
    HamFlowSpec,
    Hamiltonian,
    JField,
    SurfaceGrid,
    barge_ghys_tau,
    calabi,
    forward_map,
    frak_S,
    hermitian_scalar_curvature,
    local_type_report,
    moment_map_ham,
    pushforward_J,
    sobolev_norm_22,
)
from ..ham2d.flow import FlowState, bump_hamiltonian, fourier_hamiltonian, inverse_map
from ..quadrature import QuadParams, triangle_integral
from ..siegel import SiegelSpace, form_scale, triangle_area
from ..sp_qm import (
    CalibrationLedger,
    SpPathSpec,
    calibrate,
    frozen_ledger,
    guichardet_wigner_restriction,
    random_sp_path,
    rotation_loop,
    rotation_number_nu,
    sp_instance,
)
from ..symplectic import j0, random_compatible, random_symplectic, siegel_to_j
from .config import ScenarioConfig
from .seeds import substream

COLUMNS = (
    "scenario", "index", "label", "digest", "value", "error", "reference", "residual",
    "n", "kind", "domain", "N", "dt", "s_nodes", "t_nodes", "k_max", "evals",
)
NAN = float("nan")


@dataclass
class Row:
    label: str
    value: float
    error: float = NAN
    reference: float = NAN
    residual: float = NAN
    k_max: int | None = None
    evals: int | None = None
    inputs: object = None


@dataclass
class ScenarioResult:
    rows: list
    plot: list = field(default_factory=list)  # (series, x, y)
    files: dict = field(default_factory=dict)  # suffix -> text


def digest(obj) -> str:
    """First 16 hex digits of the SHA-256 of ``obj`` in canonical JSON."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable).encode()).hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def pmap(fn, items, threads):
    """Order-preserving map, concurrent when ``threads > 1``."""
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def quad_params(cfg: ScenarioConfig) -> QuadParams:
    return QuadParams(**cfg.quad).check()


def path_inputs(path: GroupPath):
    return [[s.duration, np.asarray(s.generator)] for s in path.segments]


# ---------------------------------------------------------------------------
# Sp(2n, R)


def _sp(cfg):
    n = int(cfg.instance.get("n", 1))
    kind = cfg.instance.get("kind", "trace")
    return n, kind


def sp_paths(cfg, n):
    """``[(label, path, reference_nu_trace or None)]`` from the ``path`` table."""
    spec = cfg.path
    kind = spec["type"]
    if kind == "rotation":
        ms = spec.get("m", 1)
        ms = ms if isinstance(ms, list) else [ms]
        block = spec.get("block")
        out = []
        for m in ms:
            # nu_trace = -(integral of the moment) with Xi = 2 pi m K and orbit fixed at J0
            ref = -2 * np.pi * m * (n if block is None else 1)
            out.append((f"rotation/m{m}", rotation_loop(n, m, block), ref))
        return out
    if kind == "segments":
        segs = [(s["duration"], np.array(s["generator"], dtype=float)) for s in spec["segments"]]
        return [("segments", SpPathSpec(n, segments=segs).compile(), None)]
    rng = substream(cfg.seed, 0)
    out = []
    for i in range(spec.get("count", 1)):
        p = random_sp_path(
            rng, n, spec.get("pieces", 2), spec.get("rotation", 2.0), spec.get("noise", 0.5), spec.get("reach")
        )
        out.append((f"path{i}", p, None))
    return out


def _basepoints(cfg, n, count):
    rng = substream(cfg.seed, 1)
    scale = cfg.params.get("basepoint_scale", 0.7)
    return [j0(n)] + [random_compatible(rng, n, scale) for _ in range(count - 1)]


def _evals(rep):
    return int(rep.extra.get("time_nodes", -1))


def run_triangle_area(cfg, threads):
    n, kind = _sp(cfg)
    quad = quad_params(cfg)
    bound = SiegelSpace(n, kind).triangle_bound
    if "points" in cfg.params:
        tris = [[siegel_to_j(np.array([[complex(*p)]])).entries for p in tri] for tri in cfg.params["points"]]
    else:
        rng = substream(cfg.seed, 0)
        scale = cfg.params.get("scale", 1.5)
        tris = [[random_compatible(rng, n, scale) for _ in range(3)] for _ in range(cfg.params.get("count", 1))]

    def one(tri):
        return triangle_area(kind, *tri, quad)

    rows = []
    for i, (tri, res) in enumerate(zip(tris, pmap(one, tris, threads))):
        ref = NAN if bound is None else bound
        rows.append(Row(f"triangle{i}", res.value, res.error, ref, abs(res.value) - ref, inputs=tri))
    return ScenarioResult(rows)


def run_nu(cfg, threads):
    n, kind = _sp(cfg)
    quad = quad_params(cfg)
    space, action = sp_instance(n, kind)
    scale = form_scale(kind, n)
    x = _basepoints(cfg, n, 2)[1] if cfg.params.get("basepoint", "J0") == "random" else j0(n)
    oracle = cfg.params.get("oracle", True)
    items = sp_paths(cfg, n)

    def one(item):
        label, p, ref = item
        rep = nu_x(space, action, p, x, quad)
        if ref is not None and np.allclose(x, j0(n)):
            ref = scale * ref
        elif oracle:
            ref = rotation_number_nu(p, x, kind, n)
        else:
            ref = NAN
        inv = nu_x(space, action, ~p, x, quad) if cfg.params.get("inverse", False) else None
        return rep, ref, inv

    rows = []
    for (label, p, _), (rep, ref, inv) in zip(items, pmap(one, items, threads)):
        inputs = {"path": path_inputs(p), "x": x}
        rows.append(Row(label, rep.value, rep.error, ref, rep.value - ref, evals=_evals(rep), inputs=inputs))
        if inv is not None:
            s = rep.value + inv.value
            rows.append(Row(f"{label}/inverse", s, rep.error + inv.error, 0.0, s, evals=_evals(inv), inputs=inputs))
    return ScenarioResult(rows)


def _ledger(cfg, n):
    name = cfg.params.get("ledger", "builtin")
    if name == "builtin":
        return frozen_ledger(n)
    p = Path(name)
    if not p.is_absolute() and cfg.source is not None:
        p = cfg.source.parent / p
    return CalibrationLedger.load(p)


def run_action_hom(cfg, threads):
    n, kind = _sp(cfg)
    quad = quad_params(cfg)
    space, action = sp_instance(n, kind)
    kappa = _ledger(cfg, n).kappa[kind]
    rows = []
    for label, loop, _ in sp_paths(cfg, n):
        gw = guichardet_wigner_restriction(loop, n)
        rep = nu_x(space, action, loop, j0(n), quad)
        end = action.endpoint(loop)
        if np.max(np.abs(end - np.eye(2 * n))) > 1e-8:
            raise ValueError(f"{label}: path does not close at the identity")
        w = gw["winding"]
        # Maslov turns of a U(n) loop are twice the det_C winding
        ref = kappa * 2 * w
        inputs = path_inputs(loop)
        rows.append(Row(f"{label}/A", rep.value, rep.error, ref, rep.value - ref, evals=_evals(rep), inputs=inputs))
        rows.append(Row(f"{label}/winding", w, 0.0, float(round(w)), w - round(w), inputs=inputs))
    return ScenarioResult(rows)


def run_defect_scan(cfg, threads):
    n, kind = _sp(cfg)
    quad = quad_params(cfg)
    space, action = sp_instance(n, kind)
    x = _basepoints(cfg, n, 2)[1] if cfg.params.get("basepoint", "J0") == "random" else j0(n)
    spec = dict(cfg.path)
    count = spec.get("count", 1)
    rng = substream(cfg.seed, 0)
    pairs = [
        tuple(random_sp_path(rng, n, spec.get("pieces", 2), spec.get("rotation", 2.0), spec.get("noise", 0.5), spec.get("reach"))
              for _ in range(2))
        for _ in range(count)
    ]

    def one(pair):
        p1, p2 = pair
        a = nu_x(space, action, p1 * p2, x, quad)
        b = nu_x(space, action, p1, x, quad)
        c = nu_x(space, action, p2, x, quad)
        gx = action.endpoint_point(p1, x)
        ghx = action.endpoint_point(p1 * p2, x)
        tri, terr = triangle_integral(space, x, gx, ghx, quad, with_error=True)
        return a, b, c, tri, terr

    rows = []
    worst = 0.0
    for i, (pair, (a, b, c, tri, terr)) in enumerate(zip(pairs, pmap(one, pairs, threads))):
        d = a.value - b.value - c.value
        worst = max(worst, abs(d))
        err = a.error + b.error + c.error + terr
        rows.append(Row(f"pair{i}", d, err, tri, d - tri, evals=_evals(a) + _evals(b) + _evals(c),
                        inputs={"p1": path_inputs(pair[0]), "p2": path_inputs(pair[1]), "x": x}))
    bound = SiegelSpace(n, kind).triangle_bound
    ref = NAN if bound is None else bound
    rows.append(Row("max_defect", worst, NAN, ref, worst - ref, inputs={"pairs": count}))
    return ScenarioResult(rows)


def run_homogenize(cfg, threads):
    n, kind = _sp(cfg)
    quad = quad_params(cfg)
    space, action = sp_instance(n, kind)
    k_max = cfg.params.get("k_max", 16)
    xs = _basepoints(cfg, n, cfg.params.get("basepoints", 1))
    rng_h = substream(cfg.seed, 2)
    hs = [random_symplectic(rng_h, n, cfg.params.get("conjugation_scale", 0.5)) for _ in range(cfg.params.get("conjugations", 0))]
    items = sp_paths(cfg, n)
    jobs = []
    for pi, (label, p, _) in enumerate(items):
        for b, x in enumerate(xs):
            jobs.append((pi, f"{label}/x{b}", p, x))
        for c, h in enumerate(hs):
            jobs.append((pi, f"{label}/conj{c}", p.conjugate(action, h), j0(n)))

    def one(job):
        return homogenize(space, action, job[2], job[3], k_max, quad)

    results = pmap(one, jobs, threads)
    rows, plot = [], []
    base = {}
    for (pi, label, p, x), r in zip(jobs, results):
        if pi not in base:
            base[pi] = r
        r0 = base[pi]
        err = r.half_width + (r0.half_width if r is not r0 else 0.0)
        rows.append(Row(label, r.estimate, err, r0.estimate, r.estimate - r0.estimate, k_max=k_max,
                        inputs={"path": path_inputs(p), "x": x, "k_max": k_max}))
        plot.extend((label, float(k), float(v) / k) for k, v in zip(r.ks, r.values))
    return ScenarioResult(rows, plot)


def run_calibrate(cfg, threads):
    n, _ = _sp(cfg)
    quad = quad_params(cfg)
    k_max = cfg.params.get("k_max", 16)
    ms = cfg.params.get("loops", [1, 2, 3])
    kinds = tuple(cfg.params.get("kinds", ["trace", "siegel", "bergman"]))
    if "trace" not in kinds:
        kinds = ("trace",) + kinds
    loops = [rotation_loop(n, m) for m in ms]
    paths = [p for _, p, _ in sp_paths(cfg, n)] if cfg.path else []
    ledger = calibrate(n, loops, paths, k_max, quad, kinds, threads)
    rows = []
    kt = ledger.kappa_trace
    for kind in kinds:
        ratio = ledger.kappa[kind] / kt
        rows.append(Row(f"kappa/{kind}", ledger.kappa[kind], NAN, NAN, NAN, k_max=k_max, inputs={"kind": kind}))
        rows.append(Row(f"ratio/{kind}", ratio, 0.0, form_scale(kind, n), ratio - form_scale(kind, n), inputs={"kind": kind}))
    for rec in ledger.provenance:
        if rec["type"] == "loop":
            m = ms[rec["index"]]
            rows.append(Row(f"loop{m}/nu_trace", rec["nu_trace"], rec["nu_trace_half_width"], -2 * np.pi * m * n,
                            rec["nu_trace"] + 2 * np.pi * m * n, inputs={"loop": m}))
            rows.append(Row(f"loop{m}/maslov", rec["tau"], rec["tau_half_width"], 2.0 * m * n, rec["tau"] - 2.0 * m * n,
                            inputs={"loop": m}))
        else:
            i = rec["index"] - len(ms)
            pred = kt * rec["tau"]
            err = rec["nu_trace_half_width"] + abs(kt) * rec["tau_half_width"]
            rows.append(Row(f"path{i}", rec["nu_trace"], err, pred, rec["nu_trace"] - pred, k_max=k_max,
                            inputs=path_inputs(paths[i])))
    return ScenarioResult(rows, files={"ledger.json": ledger.to_json() + "\n"})


# ---------------------------------------------------------------------------
# surfaces


def _grid(cfg, default_domain):
    inst = cfg.instance
    return SurfaceGrid(inst.get("domain", default_domain), int(inst.get("N", 32)), R=inst.get("R", 0.4))


def _hamiltonian_spec(item, dt, label):
    if "segments" in item:
        segs = []
        for j, s in enumerate(item["segments"]):
            e = parse(s["H"])
            segs.append((s["duration"], Hamiltonian(e.of_xy(0.0), label=f"{label}/{j}")))
        return HamFlowSpec(segs, dt)
    e = parse(item["H"])
    duration = item.get("duration", 1.0)
    if e.autonomous:
        return HamFlowSpec([(duration, Hamiltonian(e.of_xy(0.0), label=label))], dt)
    return HamFlowSpec.time_dependent(e, item.get("steps", 16), duration, dt, label)


def flows(cfg, grid):
    """``[(label, HamFlowSpec, inputs)]`` from the ``flow`` table."""
    spec = cfg.flow
    dt = float(cfg.instance.get("dt", 1e-2))
    kind = spec["type"]
    if kind == "expression":
        return [("flow0", _hamiltonian_spec(spec, dt, "flow0"), {k: v for k, v in spec.items()})]
    if kind == "list":
        out = []
        for i, item in enumerate(spec["items"]):
            label = item.get("label", f"flow{i}")
            out.append((label, _hamiltonian_spec(item, dt, label), item))
        return out
    rng = substream(cfg.seed, 0)
    out = []
    pieces = spec.get("pieces", 1)
    for i in range(spec.get("count", 1)):
        segs = []
        for j in range(pieces):
            if kind == "fourier":
                H = fourier_hamiltonian(rng, spec.get("modes", 2), spec.get("amplitude", 0.01), f"fourier{i}/{j}")
            else:
                H = bump_hamiltonian(rng, grid.R, spec.get("amplitude", 0.02), spec.get("power", 8), f"bump{i}/{j}")
            segs.append((spec.get("duration", 1.0) / pieces, H))
        out.append((f"flow{i}", HamFlowSpec(segs, dt), {"seed": cfg.seed, "flow": spec, "index": i}))
    return out


def _fields(cfg, grid):
    spec = cfg.field or {"type": "flat"}
    if spec["type"] == "flat":
        return [("J0", JField.constant(grid))]
    out = []
    for i in range(spec.get("count", 1)):
        # a fresh sub-stream per field so that refined grids redraw the same field
        rng = substream(cfg.seed, 16 + i)
        out.append((f"field{i}", JField.random_smooth(grid, rng, spec.get("amplitude", 0.3), spec.get("modes", 2))))
    return out


def _ham_row(cfg, grid, label, value, error=NAN, reference=NAN, residual=NAN, **kw):
    return Row(label, value, error, reference, residual, **kw)


def _equivariance(grid, spec, J, probe, dt, method):
    """``(mu(H)(phi . J), mu(H o phi)(J))`` for the time-one map ``phi`` of ``spec``."""
    path = spec.compile(grid)
    T = path.duration
    phi, A = forward_map(grid, path, [T], dt)
    psi, B = inverse_map(grid, path, [T], dt)
    state = FlowState(grid, np.array([T]), phi, A, psi, B)
    x, y = grid.xy
    pushed = pushforward_J(state, 0, J)
    lhs = moment_map_ham(grid, probe(0.0, x, y), pushed, method)
    rhs = moment_map_ham(grid, probe(0.0, phi[0][..., 0], phi[0][..., 1]), J, method)
    return lhs, rhs


def run_ham2d(cfg, threads):
    grid = _grid(cfg, "torus")
    quad = quad_params(cfg)
    method = cfg.instance.get("method", "spectral")
    dt = float(cfg.instance.get("dt", 1e-2))
    params = cfg.params
    fields = _fields(cfg, grid)
    rows = []
    if params.get("curvature", False):
        for label, J in fields:
            S = hermitian_scalar_curvature(J, method)
            total = float(grid.integrate(S))
            scale = float(grid.integrate(np.abs(S)))
            rows.append(Row(f"{label}/gauss_bonnet", total, NAN, 0.0, total, inputs={"field": cfg.field, "N": grid.N}))
            if params.get("refine", False):
                fine = grid.refine(2)
                Jf = dict(_fields(cfg, fine))[label]
                tf = float(fine.integrate(hermitian_scalar_curvature(Jf, method)))
                # residual <= 0 when the refined sum is at most half the coarse one
                rows.append(Row(f"{label}/gauss_bonnet_2N", tf, NAN, total, abs(tf) - 0.5 * abs(total),
                                inputs={"field": cfg.field, "N": fine.N}))
            rows.append(Row(f"{label}/abs_curvature", scale, NAN, NAN, NAN, inputs={"field": cfg.field}))
        flat = hermitian_scalar_curvature(JField.constant(grid), method)
        rows.append(Row("J0/max_abs_S", float(np.max(np.abs(flat))), 0.0, 0.0, float(np.max(np.abs(flat))), inputs={}))
    if cfg.flow is None:
        return ScenarioResult(rows)
    items = flows(cfg, grid)
    probe = parse(params["probe"]) if "probe" in params else None

    def one(item):
        label, spec, inputs = item
        out = []
        for flabel, J in fields:
            tag = label if len(fields) == 1 else f"{label}/{flabel}"
            inp = {"flow": inputs, "field": flabel, "N": grid.N, "dt": dt}
            if params.get("frak_s", True):
                rep = frak_S(grid, J, spec, quad, dt, method)
                out.append(Row(f"{tag}/frak_s", rep.value, rep.error, evals=_evals(rep), inputs=inp))
                if params.get("inverse", False):
                    inv = frak_S(grid, J, ~spec.compile(grid), quad, dt, method)
                    s = rep.value + inv.value
                    out.append(Row(f"{tag}/inverse", s, rep.error + inv.error, 0.0, s, evals=_evals(inv), inputs=inp))
            if probe is not None:
                lhs, rhs = _equivariance(grid, spec, J, probe, dt, method)
                rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
                out.append(Row(f"{tag}/equivariance", lhs, NAN, rhs, rel, inputs={**inp, "probe": params["probe"]}))
                if params.get("coarsen", False):
                    coarse = SurfaceGrid(grid.domain, grid.N // 2, grid.R, grid.box_ratio)
                    Jc = dict(_fields(cfg, coarse))[flabel]
                    lc, rc = _equivariance(coarse, spec, Jc, probe, 2 * dt, method)
                    relc = abs(lc - rc) / max(abs(rc), 1e-300)
                    # residual < 0 when the finer grid and step improve the relative error
                    out.append(Row(f"{tag}/equivariance_coarse", relc, NAN, rel, rel - relc,
                                   inputs={**inp, "probe": params["probe"], "N": coarse.N, "dt": 2 * dt}))
        if params.get("calabi", False):
            support = None
            if "support" in params:
                cx, cy, r = params["support"]
                support = ((cx, cy), r)
            out.append(Row(f"{label}/calabi", calabi(grid, spec, support), NAN, inputs=inputs))
        if params.get("sobolev", False):
            out.append(Row(f"{label}/sobolev22", sobolev_norm_22(grid, spec), NAN, inputs=inputs))
        return out

    for chunk in pmap(one, items, threads):
        rows.extend(chunk)
    return ScenarioResult(rows)


def run_local_type(cfg, threads):
    grid = _grid(cfg, "disk")
    quad = quad_params(cfg)
    dt = float(cfg.instance.get("dt", 1e-2))
    k_max = cfg.params.get("k_max", 8)
    ledger = _ledger(cfg, 1)
    rows, plot = [], []
    for label, spec, inputs in flows(cfg, grid):
        rep = local_type_report(grid, spec, ledger, k_max, quad, dt=dt, threads=threads)
        inp = {"flow": inputs, "N": grid.N, "dt": dt, "k_max": k_max}
        rows.append(Row(label, rep.frak_s, rep.frak_s_half_width, rep.prediction, rep.difference, k_max=k_max, inputs=inp))
        rows.append(Row(f"{label}/tau", rep.tau, rep.tau_half_width, NAN, NAN, k_max=k_max, inputs=inp))
        rows.append(Row(f"{label}/calabi", rep.calabi, NAN, NAN, NAN, inputs=inp))
        plot.extend((label, float(k), float(v) / k) for k, v in zip(rep.ks, rep.frak_s_values))
    return ScenarioResult(rows, plot)


def run_sobolev_scan(cfg, threads):
    grid = _grid(cfg, "torus")
    quad = quad_params(cfg)
    dt = float(cfg.instance.get("dt", 1e-2))
    method = cfg.params.get("method", "fd4")
    items = flows(cfg, grid)

    def one(item):
        label, spec, inputs = item
        rep = frak_S(grid, None, spec, quad, dt)
        return rep, sobolev_norm_22(grid, spec, method)

    rows, plot, ratios = [], [], []
    for (label, spec, inputs), (rep, norm) in zip(items, pmap(one, items, threads)):
        ratio = abs(rep.value) / norm if norm > 0 else NAN
        ratios.append(ratio)
        rows.append(Row(label, rep.value, rep.error, norm, ratio, evals=_evals(rep), inputs={"flow": inputs, "N": grid.N}))
        plot.append(("running_max_ratio", float(len(ratios)), float(np.nanmax(ratios))))
    half = len(ratios) // 2
    if half >= 1:
        first, second = max(ratios[:half]), max(ratios[half:])
        rows.append(Row("bound_ratio", second, NAN, first, second / first if first > 0 else math.inf,
                        inputs={"count": len(ratios)}))
    return ScenarioResult(rows, plot)


DISPATCH = {
    "triangle-area": run_triangle_area,
    "nu": run_nu,
    "action-hom": run_action_hom,
    "defect-scan": run_defect_scan,
    "homogenize": run_homogenize,
    "calibrate": run_calibrate,
    "ham2d-run": run_ham2d,
    "local-type": run_local_type,
    "sobolev-scan": run_sobolev_scan,
}


def common_columns(cfg: ScenarioConfig, quad: QuadParams) -> dict:
    """Instance and quadrature columns shared by every row of a scenario."""
    ham = cfg.scenario in ("ham2d-run", "local-type", "sobolev-scan")
    if ham:
        default_domain = "disk" if cfg.scenario == "local-type" else "torus"
        return {
            "n": 1, "kind": "trace", "domain": cfg.instance.get("domain", default_domain),
            "N": int(cfg.instance.get("N", 32)), "dt": float(cfg.instance.get("dt", 1e-2)),
            "s_nodes": quad.s_nodes, "t_nodes": quad.t_nodes,
        }
    return {
        "n": int(cfg.instance.get("n", 1)), "kind": cfg.instance.get("kind", "trace"), "domain": "",
        "N": "", "dt": "", "s_nodes": quad.s_nodes, "t_nodes": quad.t_nodes,
    }
