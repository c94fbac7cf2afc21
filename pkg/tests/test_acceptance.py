"""Acceptance suite: one test per criterion, each reporting a pass/fail line.

Criteria 1 and 2 call the library directly; the others run the shipped
configurations in ``configs/acceptance`` through :func:`momentqm.cli.run`
and re-check the tolerances on the written CSV, independently of the
assertions embedded in the configurations.
"""

import csv
import fnmatch
import time
from pathlib import Path

import numpy as np
import pytest

from momentqm.cli import run
from momentqm.siegel import form_eval, infinitesimal_action, moment_map_sp
from momentqm.symplectic import conj_action, mat_exp, random_algebra, random_compatible, random_symplectic

CONFIGS = Path(__file__).resolve().parents[1] / "configs" / "acceptance"


def execute(name, tmp_path):
    t0 = time.perf_counter()
    outcome = run(CONFIGS / f"{name}.toml", tmp_path / name)
    elapsed = time.perf_counter() - t0
    assert outcome.exit_code == 0, outcome.message
    with open(tmp_path / name / f"{outcome.name}.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows, elapsed


def pick(rows, pattern):
    out = [r for r in rows if fnmatch.fnmatchcase(r["label"], pattern)]
    assert out, f"no rows match {pattern}"
    return out


def col(rows, name):
    return np.array([float(r[name]) for r in rows])


def test_criterion_01_moment_map_identity(criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    h = 1e-5
    for i in range(200):
        n = (1, 2, 3)[i % 3]
        J = random_compatible(rng, n, 0.5)
        Xi = random_algebra(rng, n)
        C = random_algebra(rng, n)
        B = infinitesimal_action(C, J)

        def mu(e):
            return moment_map_sp(conj_action(mat_exp(e * C), J), Xi)

        d = (mu(h) - mu(-h)) / (2 * h)
        expected = -form_eval("trace", J, infinitesimal_action(Xi, J), B, check=False)
        worst = max(worst, abs(d - expected) / abs(expected))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 10
    criterion(1, ok, f"max relative error {worst:.2e} over 200 instances, {elapsed:.2f} s")
    assert ok


def test_criterion_02_moment_map_equivariance(criterion):
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(200):
        n = (1, 2, 3)[i % 3]
        J = random_compatible(rng, n, 0.5)
        Xi = random_algebra(rng, n)
        g = random_symplectic(rng, n, 0.5)
        lhs = moment_map_sp(conj_action(g, J), g @ Xi @ np.linalg.inv(g))
        worst = max(worst, abs(lhs - moment_map_sp(J, Xi)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 1
    criterion(2, ok, f"max residual {worst:.2e} over 200 instances, {elapsed:.2f} s")
    assert ok


def test_criterion_03_defect_identity(tmp_path, criterion):
    r1, t1 = execute("c03_defect_n1", tmp_path)
    r2, t2 = execute("c03_defect_n2", tmp_path)
    p1, p2 = pick(r1, "pair*"), pick(r2, "pair*")
    worst = max(np.max(np.abs(col(p1, "residual"))), np.max(np.abs(col(p2, "residual"))))
    ok = len(p1) == 100 and len(p2) == 30 and worst < 1e-4 and t1 + t2 < 300
    criterion(3, ok, f"{len(p1)} + {len(p2)} pairs, max |defect - area| {worst:.2e}, {t1 + t2:.0f} s")
    assert ok


def test_criterion_04_triangle_bound(tmp_path, criterion):
    rows, t = execute("c04_triangle_bound", tmp_path)
    tri = pick(rows, "triangle*")
    worst = np.max(np.abs(col(tri, "value")))
    ok = len(tri) == 1000 and worst < np.pi + 1e-3 and t < 60
    criterion(4, ok, f"{len(tri)} triangles, max |area| {worst:.4f} (bound pi + 1e-3), {t:.0f} s")
    assert ok


def within_widths(rows):
    return np.abs(col(rows, "residual")) <= col(rows, "error")


def test_criterion_05_basepoint_independence(tmp_path, criterion):
    rows, t = execute("c05_homogenize_basepoints", tmp_path)
    others = [r for r in pick(rows, "*/x*") if not r["label"].endswith("/x0")]
    paths = {r["label"].split("/")[0] for r in rows}
    ok = bool(np.all(within_widths(others))) and len(paths) == 20 and len(others) == 40 and t < 600
    worst = np.max(np.abs(col(others, "residual")) / col(others, "error"))
    criterion(5, ok, f"20 paths x 3 basepoints, k_max 16, max |diff| / width {worst:.3f}, {t:.0f} s")
    assert ok


def test_criterion_06_calibration(tmp_path, criterion):
    details, ok = [], True
    total = 0.0
    for n in (1, 2):
        rows, t = execute(f"c06_calibrate_n{n}", tmp_path)
        total += t
        by = {r["label"]: r for r in rows}
        s = float(by["ratio/siegel"]["value"])
        b = float(by["ratio/bergman"]["value"])
        paths = pick(rows, "path*")
        ok &= abs(s - 2) < 1e-3 and abs(b - (n + 1)) < 1e-3 and bool(np.all(within_widths(paths)))
        if n == 1:
            loops = pick(rows, "loop*")
            ok &= bool(np.all(np.abs(col(loops, "residual")) < 1e-6))
        details.append(f"n={n}: siegel/trace {s:.6f}, bergman/trace {b:.6f}, {len(paths)} paths within widths")
    ok &= total < 600
    criterion(6, ok, "; ".join(details) + f", {total:.0f} s")
    assert ok


def test_criterion_07_conjugation_invariance(tmp_path, criterion):
    rows, t = execute("c07_conjugation", tmp_path)
    conj = pick(rows, "*/conj*")
    ok = len(conj) == 20 and bool(np.all(within_widths(conj))) and t < 600
    worst = np.max(np.abs(col(conj, "residual")) / col(conj, "error"))
    criterion(7, ok, f"{len(conj)} conjugations, max |diff| / width {worst:.3f}, {t:.0f} s")
    assert ok


def test_criterion_08_guichardet_wigner(tmp_path, criterion):
    worst_a = worst_w = 0.0
    total = 0.0
    for name in ("c08_action_hom_n1", "c08_action_hom_n2", "c08_action_hom_n2_block"):
        rows, t = execute(name, tmp_path)
        total += t
        worst_a = max(worst_a, np.max(np.abs(col(pick(rows, "*/A"), "residual"))))
        worst_w = max(worst_w, np.max(np.abs(col(pick(rows, "*/winding"), "residual"))))
    ok = worst_a < 1e-6 and worst_w < 1e-6 and total < 60
    criterion(8, ok, f"n = 1, 2: max |A - reference| {worst_a:.1e}, max winding offset {worst_w:.1e}, {total:.0f} s")
    assert ok


def test_criterion_09_curvature(tmp_path, criterion):
    rows, t = execute("c09_curvature", tmp_path)
    flat = float(pick(rows, "J0/max_abs_S")[0]["value"])
    gb = pick(rows, "*/gauss_bonnet")
    fine = pick(rows, "*/gauss_bonnet_2N")
    sums = np.abs(col(gb, "value"))
    halved = np.abs(col(fine, "value")) <= 0.5 * np.abs(col(fine, "reference"))
    ok = flat == 0.0 and len(gb) == 10 and bool(np.all(sums < 1e-2)) and bool(np.all(halved)) and t < 300
    criterion(9, ok, f"S(J0) max {flat:g}, 10 fields: max |sum| {sums.max():.1e} at N=64, halved at N=128: "
                     f"{int(halved.sum())}/10, {t:.0f} s")
    assert ok


def test_criterion_10_ham_equivariance(tmp_path, criterion):
    rows, t = execute("c10_equivariance", tmp_path)
    fine = col(pick(rows, "*/equivariance"), "residual")
    coarse = col(pick(rows, "*/equivariance_coarse"), "value")
    ok = bool(np.all(fine < 0.02)) and bool(np.all(fine <= coarse)) and t < 600
    criterion(10, ok, f"relative error {fine.max():.1e} at N=64, dt=1e-3 vs {coarse.max():.1e} at N=32, dt=2e-3, {t:.0f} s")
    assert ok


def test_criterion_11_local_type(tmp_path, criterion):
    rows, t = execute("c11_local_type", tmp_path)
    by = {r["label"]: r for r in rows}
    flows = [r for r in rows if "/" not in r["label"]]
    rel = []
    for r in flows:
        half_tau = 0.5 * float(by[r["label"] + "/tau"]["value"])
        rel.append(abs(float(r["residual"])) / abs(half_tau))
    rel = np.array(rel)
    ok = len(flows) == 3 and bool(np.all(rel < 0.05)) and t < 1800
    criterion(11, ok, f"3 bump flows, k_max 8, N=64: max |frak_S - kappa tau| / |tau / 2| {rel.max():.1e}, {t:.0f} s")
    assert ok


def test_criterion_12_sobolev_bound(tmp_path, criterion):
    rows, t = execute("c12_sobolev", tmp_path)
    flows = [r for r in rows if r["label"] != "bound_ratio"]
    ratio = float(pick(rows, "bound_ratio")[0]["residual"])
    ok = len(flows) == 30 and ratio <= 2.0 and t < 900
    criterion(12, ok, f"30 torus flows: second-half max / first-half max = {ratio:.3f}, {t:.0f} s")
    assert ok


def test_criterion_13_inversion(tmp_path, criterion):
    sp, t1 = execute("c13_inversion_sp", tmp_path)
    ham, t2 = execute("c13_inversion_ham", tmp_path)
    a = np.abs(col(pick(sp, "*/inverse"), "residual"))
    b = np.abs(col(pick(ham, "*/inverse"), "residual"))
    ok = len(a) == 50 and len(b) == 5 and a.max() < 1e-4 and b.max() < 1e-4 and t1 + t2 < 600
    criterion(13, ok, f"50 Sp paths max {a.max():.1e}, 5 ham2d flows max {b.max():.1e}, {t1 + t2:.0f} s")
    assert ok
