"""``run`` and ``suite``: execute scenarios, write outputs, check assertions.

Exit codes: 0 success, 1 an embedded assertion failed, 2 invalid
configuration or input, 3 numerical failure (quadrature or flow tolerance not
met, calibration inconsistent, undersampled winding).
"""

from __future__ import annotations

import csv
import fnmatch
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..expr import ExprError
from ..ham2d import FlowError
from ..quadrature import QuadratureError
from ..sp_qm import CalibrationError
from ..symplectic import UndersampledError
from .config import ConfigError, load_config
from .scenarios import COLUMNS, DISPATCH, common_columns, digest, quad_params

EXIT_OK, EXIT_ASSERT, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3
NUMERICAL = (QuadratureError, FlowError, CalibrationError, UndersampledError, FloatingPointError, np.linalg.LinAlgError)
THREADS_ENV = "MOMENTQM_THREADS"
SUMMARY_COLUMNS = ("config", "name", "scenario", "status", "exit_code", "assertions_passed", "assertions_total", "message")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class RunOutcome:
    exit_code: int
    message: str = ""
    name: str = ""
    scenario: str = ""
    assertions: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return {EXIT_OK: "pass", EXIT_ASSERT: "fail", EXIT_INVALID: "invalid", EXIT_NUMERIC: "numerical-failure"}[self.exit_code]


def fmt(v) -> str:
    """Deterministic text for a CSV cell: shortest round-trip repr for floats."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _csv_text(header, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in records:
        w.writerow([fmt(r.get(c)) for c in header])
    return buf.getvalue()


def table(cfg, result):
    """Rows as dicts over :data:`COLUMNS`."""
    common = common_columns(cfg, quad_params(cfg))
    out = []
    for i, r in enumerate(result.rows):
        d = dict(common)
        d.update(
            scenario=cfg.scenario, index=i, label=r.label, digest=digest({"label": r.label, "inputs": r.inputs}),
            value=r.value, error=r.error, reference=r.reference, residual=r.residual,
            k_max=r.k_max if r.k_max is not None else "", evals=r.evals if r.evals is not None else "",
        )
        out.append(d)
    return out


def check_assertion(a, records):
    """``(passed, detail)`` for one ``[[assert]]`` entry over the matching rows."""
    pattern = a.get("label", "*")
    rows = [r for r in records if fnmatch.fnmatchcase(r["label"], pattern)]
    if not rows:
        return False, f"no rows match label {pattern!r}"
    col, check = a["column"], a["check"]
    exp, tol = a.get("expected", 0.0), a.get("tol", 0.0)
    bad = []
    for r in rows:
        v = float(r[col])
        if check == "close":
            ok = abs(v - exp) <= tol
        elif check == "abs_below":
            ok = abs(v) <= tol
        elif check == "below":
            ok = v <= exp + tol
        elif check == "above":
            ok = v >= exp - tol
        elif check == "within_error":
            ok = abs(v) <= float(r["error"]) + tol
        else:  # rel_below
            ok = abs(v) <= tol * abs(float(r["reference"]))
        if not ok:
            bad.append(f"{r['label']}: {col}={fmt(v)}")
    if bad:
        more = f" (+{len(bad) - 3} more)" if len(bad) > 3 else ""
        return False, f"{check} failed on {len(bad)}/{len(rows)} rows: " + "; ".join(bad[:3]) + more
    return True, f"{len(rows)} rows"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(text: str) -> str:
    import hashlib

    return hashlib.sha256(text.encode()).hexdigest()


def run(config, out=None, seed=None, threads=None, log=sys.stderr) -> RunOutcome:
    """Validate and execute one configuration; see the module docstring for exit codes.

    Outputs go to ``out`` (default ``runs/<name>``): ``<name>.csv``, the plot
    series ``<name>.plot.csv``, any scenario files (``<name>.ledger.json``) and
    the run record ``<name>.run.json``.  Nothing is written when validation
    or the computation fails.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    try:
        cfg = load_config(config, seed=seed)
    except ConfigError as exc:
        print(f"invalid configuration {config}: {exc}", file=log)
        return RunOutcome(EXIT_INVALID, str(exc))
    out = Path(out) if out is not None else Path("runs") / cfg.name
    t0 = time.perf_counter()
    try:
        with np.errstate(over="raise", invalid="ignore", divide="ignore"):
            result = DISPATCH[cfg.scenario](cfg, threads)
    except UndersampledError as exc:
        print(f"{cfg.name}: numerical failure: {exc}", file=log)
        return RunOutcome(EXIT_NUMERIC, str(exc), cfg.name, cfg.scenario)
    except NUMERICAL as exc:
        print(f"{cfg.name}: numerical failure: {exc}", file=log)
        return RunOutcome(EXIT_NUMERIC, str(exc), cfg.name, cfg.scenario)
    except (ConfigError, ExprError, ValueError, FileNotFoundError) as exc:
        print(f"{cfg.name}: invalid input: {exc}", file=log)
        return RunOutcome(EXIT_INVALID, str(exc), cfg.name, cfg.scenario)
    except RuntimeError as exc:
        print(f"{cfg.name}: numerical failure: {exc}", file=log)
        return RunOutcome(EXIT_NUMERIC, str(exc), cfg.name, cfg.scenario)
    wall = time.perf_counter() - t0

    records = table(cfg, result)
    files = {f"{cfg.name}.csv": _csv_text(COLUMNS, records)}
    if cfg.plot and result.plot:
        pts = [{"series": s, "x": x, "y": y} for s, x, y in result.plot]
        files[f"{cfg.name}.plot.csv"] = _csv_text(("series", "x", "y"), pts)
    for suffix, text in result.files.items():
        files[f"{cfg.name}.{suffix}"] = text

    checks = []
    for a in cfg.assertions:
        ok, detail = check_assertion(a, records)
        checks.append({**a, "passed": ok, "detail": detail})
    code = EXIT_OK if all(c["passed"] for c in checks) else EXIT_ASSERT

    for name, text in files.items():
        _atomic_write(out / name, text)
    manifest = [{"file": name, "sha256": _sha256(text), "bytes": len(text.encode())} for name, text in files.items()]
    record = {
        "name": cfg.name,
        "scenario": cfg.scenario,
        "config": str(cfg.source) if cfg.source else "",
        "config_sha256": cfg.digest,
        "seed": cfg.seed,
        "version": __version__,
        "threads": threads,
        "wall_time_s": round(wall, 3),
        "rows": len(records),
        "outputs": manifest,
        "assertions": checks,
        "exit_code": code,
    }
    _atomic_write(out / f"{cfg.name}.run.json", json.dumps(record, indent=2, sort_keys=True) + "\n")

    for c in checks:
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"{cfg.name}: {mark} {c.get('label', '*')} {c['column']} {c['check']}: {c['detail']}", file=log)
    msg = "" if code == EXIT_OK else "; ".join(c["detail"] for c in checks if not c["passed"])
    return RunOutcome(code, msg, cfg.name, cfg.scenario, checks, sorted(files) + [f"{cfg.name}.run.json"])


def suite(directory, out=None, seed=None, threads=None, log=sys.stderr) -> int:
    """Run every ``*.toml`` in ``directory`` and write ``suite_summary.csv``.

    Configurations run concurrently on ``threads`` workers, one thread each;
    every configuration writes into its own subdirectory of ``out``.  A
    broken configuration is reported and does not stop the others.
    """
    directory = Path(directory)
    if not directory.is_dir():
        print(f"not a directory: {directory}", file=log)
        return EXIT_INVALID
    threads = default_threads() if threads is None else max(1, int(threads))
    out = Path(out) if out is not None else Path("runs") / directory.name
    configs = sorted(directory.glob("*.toml"))

    def one(path):
        try:
            return run(path, out / path.stem, seed=seed, threads=1, log=log)
        except Exception as exc:  # isolation: one broken scenario must not stop the suite
            return RunOutcome(EXIT_NUMERIC, f"{type(exc).__name__}: {exc}")

    if threads > 1 and len(configs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            outcomes = list(ex.map(one, configs))
    else:
        outcomes = [one(p) for p in configs]

    rows = []
    for path, o in zip(configs, outcomes):
        rows.append({
            "config": path.name, "name": o.name, "scenario": o.scenario, "status": o.status, "exit_code": o.exit_code,
            "assertions_passed": sum(c["passed"] for c in o.assertions), "assertions_total": len(o.assertions),
            "message": o.message.replace("\n", " "),
        })
        print(f"{o.status.upper():>17}  {path.name}", file=log)
    _atomic_write(out / "suite_summary.csv", _csv_text(SUMMARY_COLUMNS, rows))
    failed = [r for r in rows if r["exit_code"] != EXIT_OK]
    for r in failed:
        print(f"failed: {r['config']} ({r['status']}): {r['message']}", file=log)
    return EXIT_ASSERT if failed else EXIT_OK
