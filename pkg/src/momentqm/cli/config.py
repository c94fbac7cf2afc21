"""Scenario configuration: TOML loading and schema validation.

A configuration is one TOML document.  The top-level schema rejects unknown
keys; the ``path``, ``flow``, ``field`` and ``params`` tables are then checked
against the schema of their declared ``type`` (or of the scenario, for
``params``), so keys that do not apply are rejected as well.  The schemas are
ordinary JSON Schema documents and are listed by ``python -m momentqm.cli
schema``.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import tomli

from ..expr import ExprError, parse

SCENARIOS = (
    "triangle-area", "nu", "action-hom", "defect-scan", "homogenize",
    "calibrate", "ham2d-run", "local-type", "sobolev-scan",
)
SP_SCENARIOS = SCENARIOS[:6]
HAM_SCENARIOS = SCENARIOS[6:]

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_COUNT = {"type": "integer", "minimum": 1}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_EXPR = {"type": "string", "minLength": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


INSTANCE = _obj({
    "n": {"type": "integer", "minimum": 1, "maximum": 4},
    "kind": {"enum": ["trace", "siegel", "bergman"]},
    "domain": {"enum": ["torus", "disk"]},
    "N": {"type": "integer", "minimum": 8, "maximum": 512},
    "R": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
    "dt": _POS,
    "method": {"enum": ["spectral", "fd4"]},
})

QUAD = _obj({
    "s_nodes": {"type": "integer", "minimum": 4},
    "t_nodes": {"type": "integer", "minimum": 4},
    "panels_per_unit": _POS,
    "adapt_tol": _POS,
    "adapt_rel": _NONNEG,
    "max_panels": _COUNT,
    "tol": _POS,
    "fd_step": _POS,
})

ASSERTION = _obj({
    "label": {"type": "string"},
    "column": {"enum": ["value", "error", "reference", "residual"]},
    "check": {"enum": ["close", "abs_below", "below", "above", "within_error", "rel_below"]},
    "expected": {"type": "number"},
    "tol": _NONNEG,
}, required=("column", "check"))

TOP = _obj({
    "scenario": {"enum": list(SCENARIOS)},
    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    "description": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "instance": INSTANCE,
    "quad": QUAD,
    "path": {"type": "object", "required": ["type"], "properties": {"type": {"enum": ["rotation", "segments", "random"]}}},
    "flow": {"type": "object", "required": ["type"], "properties": {"type": {"enum": ["expression", "list", "fourier", "bump"]}}},
    "field": {"type": "object", "required": ["type"], "properties": {"type": {"enum": ["flat", "random"]}}},
    "params": {"type": "object"},
    "output": _obj({"plot": {"type": "boolean"}}),
    "assert": {"type": "array", "items": ASSERTION},
}, required=("scenario",))

_SEGMENT_SP = _obj({"duration": _POS, "generator": _MATRIX}, required=("duration", "generator"))
PATH = {
    "rotation": _obj({
        "type": {"const": "rotation"},
        "m": {"oneOf": [{"type": "integer"}, {"type": "array", "items": {"type": "integer"}, "minItems": 1}]},
        "block": {"type": "integer", "minimum": 0},
    }, required=("type",)),
    "segments": _obj({
        "type": {"const": "segments"},
        "segments": {"type": "array", "items": _SEGMENT_SP, "minItems": 1},
    }, required=("type", "segments")),
    "random": _obj({
        "type": {"const": "random"},
        "count": _COUNT,
        "pieces": _COUNT,
        "rotation": _NONNEG,
        "noise": _NONNEG,
        "reach": _POS,
    }, required=("type",)),
}

_SEGMENT_H = _obj({"duration": _POS, "H": _EXPR}, required=("duration", "H"))
_FLOW_ITEM = _obj({
    "label": {"type": "string"},
    "segments": {"type": "array", "items": _SEGMENT_H, "minItems": 1},
    "H": _EXPR,
    "steps": _COUNT,
    "duration": _POS,
})
FLOW = {
    "expression": _obj({
        "type": {"const": "expression"},
        "segments": {"type": "array", "items": _SEGMENT_H, "minItems": 1},
        "H": _EXPR,
        "steps": _COUNT,
        "duration": _POS,
    }, required=("type",)),
    "list": _obj({"type": {"const": "list"}, "items": {"type": "array", "items": _FLOW_ITEM, "minItems": 1}},
                 required=("type", "items")),
    "fourier": _obj({
        "type": {"const": "fourier"},
        "count": _COUNT,
        "modes": _COUNT,
        "amplitude": _POS,
        "pieces": _COUNT,
        "duration": _POS,
    }, required=("type",)),
    "bump": _obj({
        "type": {"const": "bump"},
        "count": _COUNT,
        "amplitude": _POS,
        "power": {"type": "integer", "minimum": 3},
        "pieces": _COUNT,
        "duration": _POS,
    }, required=("type",)),
}

FIELD = {
    "flat": _obj({"type": {"const": "flat"}}, required=("type",)),
    "random": _obj({
        "type": {"const": "random"},
        "count": _COUNT,
        "amplitude": _POS,
        "modes": _COUNT,
    }, required=("type",)),
}

_BASEPOINT = {"enum": ["J0", "random"]}
_KMAX = {"type": "integer", "minimum": 2, "maximum": 1024}
_LEDGER = {"type": "string", "minLength": 1}
PARAMS = {
    "triangle-area": _obj({"count": _COUNT, "scale": _POS, "points": {"type": "array", "items": _MATRIX}}),
    "nu": _obj({"basepoint": _BASEPOINT, "basepoint_scale": _POS, "inverse": {"type": "boolean"}, "oracle": {"type": "boolean"}}),
    "action-hom": _obj({"ledger": _LEDGER}),
    "defect-scan": _obj({"basepoint": _BASEPOINT, "basepoint_scale": _POS}),
    "homogenize": _obj({
        "k_max": _KMAX, "basepoints": _COUNT, "basepoint_scale": _POS,
        "conjugations": {"type": "integer", "minimum": 0}, "conjugation_scale": _POS,
    }),
    "calibrate": _obj({
        "loops": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "k_max": _KMAX,
        "kinds": {"type": "array", "items": {"enum": ["trace", "siegel", "bergman"]}, "minItems": 1},
    }),
    "ham2d-run": _obj({
        "inverse": {"type": "boolean"},
        "calabi": {"type": "boolean"},
        "support": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "sobolev": {"type": "boolean"},
        "probe": _EXPR,
        "coarsen": {"type": "boolean"},
        "curvature": {"type": "boolean"},
        "refine": {"type": "boolean"},
        "frak_s": {"type": "boolean"},
    }),
    "local-type": _obj({"k_max": _KMAX, "ledger": _LEDGER}),
    "sobolev-scan": _obj({"method": {"enum": ["spectral", "fd4"]}}),
}

# which optional tables each scenario reads
USES = {
    "triangle-area": {"instance", "quad", "params"},
    "nu": {"instance", "quad", "path", "params"},
    "action-hom": {"instance", "quad", "path", "params"},
    "defect-scan": {"instance", "quad", "path", "params"},
    "homogenize": {"instance", "quad", "path", "params"},
    "calibrate": {"instance", "quad", "path", "params"},
    "ham2d-run": {"instance", "quad", "flow", "field", "params"},
    "local-type": {"instance", "quad", "flow", "params"},
    "sobolev-scan": {"instance", "quad", "flow", "params"},
}
REQUIRES = {
    "nu": {"path"}, "action-hom": {"path"}, "defect-scan": {"path"}, "homogenize": {"path"},
    "local-type": {"flow"}, "sobolev-scan": {"flow"},
}


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


@dataclass
class ScenarioConfig:
    scenario: str
    name: str
    seed: int
    instance: dict
    quad: dict
    path: dict | None
    flow: dict | None
    field: dict | None
    params: dict
    plot: bool
    assertions: list
    source: Path | None = None
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the validated configuration."""
        return hashlib.sha256(canonical_json(self.raw).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _where(err) -> str:
    loc = "/".join(str(p) for p in err.absolute_path)
    return f"{loc or '<top>'}: {err.message}"


def _validate(doc, schema, prefix=""):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(prefix + _where(e) for e in errors))


def _check_expr(text, where, allow_t=True):
    try:
        e = parse(text)
    except ExprError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if not allow_t and not e.autonomous:
        raise ConfigError(f"{where}: segment Hamiltonians are autonomous; use 'H' with 'steps' for time dependence")


def _semantic(doc):
    sc = doc["scenario"]
    for table in ("path", "flow", "field", "params"):
        if table in doc and table not in USES[sc]:
            raise ConfigError(f"{table}: table does not apply to scenario {sc!r}")
    for table in REQUIRES.get(sc, ()):
        if table not in doc:
            raise ConfigError(f"{table}: scenario {sc!r} needs a [{table}] table")
    inst = doc.get("instance", {})
    sp_keys = {"n", "kind"}
    ham_keys = {"domain", "N", "R", "dt", "method"}
    bad = set(inst) & (ham_keys if sc in SP_SCENARIOS else sp_keys)
    if bad:
        raise ConfigError(f"instance: keys {sorted(bad)} do not apply to scenario {sc!r}")
    if "path" in doc:
        _validate(doc["path"], PATH[doc["path"]["type"]], "path/")
    if "flow" in doc:
        flow = doc["flow"]
        _validate(flow, FLOW[flow["type"]], "flow/")
        items = flow.get("items", [flow]) if flow["type"] in ("expression", "list") else []
        for i, item in enumerate(items):
            has_seg, has_h = "segments" in item, "H" in item
            where = f"flow/items/{i}" if flow["type"] == "list" else "flow"
            if has_seg == has_h:
                raise ConfigError(f"{where}: give exactly one of 'segments' or 'H'")
            if has_seg and ("steps" in item or "duration" in item):
                raise ConfigError(f"{where}: 'steps' and 'duration' go with 'H', not with 'segments'")
            for j, seg in enumerate(item.get("segments", [])):
                _check_expr(seg["H"], f"{where}/segments/{j}/H", allow_t=False)
            if has_h:
                _check_expr(item["H"], f"{where}/H")
    if "field" in doc:
        _validate(doc["field"], FIELD[doc["field"]["type"]], "field/")
    _validate(doc.get("params", {}), PARAMS[sc], "params/")
    params = doc.get("params", {})
    if sc == "local-type" and inst.get("domain", "disk") != "disk":
        raise ConfigError("instance/domain: local-type runs on the disk")
    if sc == "sobolev-scan" and inst.get("domain", "torus") != "torus":
        raise ConfigError("instance/domain: sobolev-scan runs on the torus")
    if sc == "calibrate" and doc.get("path", {}).get("type", "random") != "random":
        raise ConfigError("path/type: calibrate draws random paths")
    if sc == "defect-scan" and doc["path"]["type"] != "random":
        raise ConfigError("path/type: defect-scan draws random path pairs")
    if sc == "action-hom" and doc["path"]["type"] == "random":
        raise ConfigError("path/type: action-hom needs a loop (rotation or segments)")
    if sc == "triangle-area" and "points" in params:
        if inst.get("n", 1) != 1:
            raise ConfigError("params/points: explicit points are upper half-plane points (n = 1)")
        for i, tri in enumerate(params["points"]):
            if len(tri) != 3 or any(len(p) != 2 or p[1] <= 0 for p in tri):
                raise ConfigError(f"params/points/{i}: expected three [x, y] pairs with y > 0")
    if sc == "ham2d-run":
        if "flow" not in doc and not params.get("curvature", False):
            raise ConfigError("ham2d-run needs a [flow] table or params.curvature = true")
        if params.get("refine") and not params.get("curvature"):
            raise ConfigError("params/refine: only used with params.curvature")
        if params.get("coarsen") and "probe" not in params:
            raise ConfigError("params/coarsen: only used with params.probe")
        if "probe" in params:
            _check_expr(params["probe"], "params/probe")
        if "support" in params and not 0 < params["support"][2] < 0.5:
            raise ConfigError("params/support: radius must lie in (0, 1/2)")
        if params.get("calabi") and inst.get("domain", "torus") == "torus" and "support" not in params:
            raise ConfigError("params/calabi: on the torus give params.support = [cx, cy, radius]")
    for i, a in enumerate(doc.get("assert", [])):
        if a["check"] in ("close", "below", "above") and "expected" not in a:
            raise ConfigError(f"assert/{i}: check {a['check']!r} needs 'expected'")
        if a["check"] in ("abs_below", "rel_below") and "tol" not in a:
            raise ConfigError(f"assert/{i}: check {a['check']!r} needs 'tol'")
    if "path" in doc and doc["path"]["type"] == "segments":
        n = inst.get("n", 1)
        for j, seg in enumerate(doc["path"]["segments"]):
            G = seg["generator"]
            if len(G) != 2 * n or any(len(r) != 2 * n for r in G):
                raise ConfigError(f"path/segments/{j}/generator: expected a {2 * n}x{2 * n} matrix")
    if "path" in doc and doc["path"]["type"] == "rotation":
        b = doc["path"].get("block")
        if b is not None and b >= inst.get("n", 1):
            raise ConfigError("path/block: must be below n")


def load_config(path, seed=None) -> ScenarioConfig:
    """Read, validate and normalise a configuration file.

    ``seed`` overrides the file's seed.  Raises :class:`ConfigError`.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path.name}: TOML syntax error: {exc}") from None
    return build_config(doc, source=path, seed=seed)


def build_config(doc: dict, source=None, seed=None) -> ScenarioConfig:
    doc = copy.deepcopy(doc)
    _validate(doc, TOP)
    _semantic(doc)
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must lie in [0, 2^64)")
        doc["seed"] = int(seed)
    doc.setdefault("seed", 0)
    name = doc.get("name") or (Path(source).stem if source else doc["scenario"])
    return ScenarioConfig(
        scenario=doc["scenario"],
        name=name,
        seed=int(doc["seed"]),
        instance=dict(doc.get("instance", {})),
        quad=dict(doc.get("quad", {})),
        path=doc.get("path"),
        flow=doc.get("flow"),
        field=doc.get("field"),
        params=dict(doc.get("params", {})),
        plot=bool(doc.get("output", {}).get("plot", True)),
        assertions=list(doc.get("assert", [])),
        source=Path(source) if source else None,
        raw=doc,
    )


def schema_document() -> dict:
    """All schemas in one JSON-serialisable document."""
    return {"top": TOP, "path": PATH, "flow": FLOW, "field": FIELD, "params": PARAMS}
