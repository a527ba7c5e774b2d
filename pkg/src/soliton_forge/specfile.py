"""Spec files: JSON documents describing a chart, a potential and sampling.

The schema is published as :data:`SCHEMA` (and in docs/spec-files.md).
Validation happens before any numerics and unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import jsonschema

from . import geometry as geo
from . import synthesize as sy
from . import warped
from .soliton import SolitonData


class SpecError(ValueError):
    """Invalid or unreadable spec file (CLI exit code 2)."""


@dataclass(frozen=True)
class Tolerances:
    riemann_symmetry: float = 1e-9     # relative to 1 + |Riem|
    weyl_trace: float = 1e-8           # relative to 1 + |W|
    weyl_3d: float = 1e-9
    duality_route: float = 1e-9        # relative to 1 + |W|
    duality_block: float = 1e-8        # relative to 1 + |W|
    half_flat: float = 1e-7            # tau_dual, relative to 1 + |Riem|
    soliton: float = 1e-6              # tau_sol, relative to 1 + |Riem|
    d_trace: float = 1e-8              # relative to 1 + |D|
    d_weyl: float = 1e-6               # D = W(grad f), relative to 1 + |Riem|
    chain: float = 1e-8
    warped_identity: float = 1e-6      # relative to 1 + |Riem|
    fiber: float = 1e-8
    levelset: float = 1e-9
    backend: float = 1e-5              # jet vs finite differences, relative
    negative_control: float = 1e-3

    def with_overrides(self, overrides: dict | None = None, tol: float | None = None):
        out = replace(self, **(overrides or {}))
        if tol is not None:
            out = replace(out, soliton=tol, d_weyl=tol, warped_identity=tol)
        return out


TOLERANCE_KEYS = [f.name for f in fields(Tolerances)]

_number = {"type": "number"}
_m_value = {"oneOf": [{"type": "number", "not": {"const": 0}}, {"enum": ["inf", "infinity"]}]}
_interval = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["sampling"],
    "properties": {
        "name": {"type": "string"},
        "dimension": {"enum": [3, 4]},
        "coordinates": {"type": "array", "items": {"type": "string"}, "minItems": 3, "maxItems": 4},
        "domain": {"type": "array", "items": _interval, "minItems": 3, "maxItems": 4},
        "metric": {"type": "array", "items": {"type": "array", "items": {"type": ["string", "number"]}},
                   "minItems": 3, "maxItems": 4},
        "orientation": {"enum": [1, -1]},
        "params": {"type": "object", "additionalProperties": _number},
        "potential": {"type": "string"},
        "lambda": _number,
        "m": _m_value,
        "expect_soliton": {"type": "boolean"},
        "warped": {
            "type": "object",
            "additionalProperties": False,
            "required": ["fiber", "interval"],
            "properties": {
                "phi": {"type": "string"},
                "fiber": {"enum": list(warped.FIBER_KINDS)},
                "kappa": _number,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "interval": _interval,
                "profile_csv": {"type": "string"},
            },
        },
        "profile": {
            "type": "object",
            "additionalProperties": False,
            "required": ["init", "lambda", "interval"],
            "properties": {
                "init": {"type": "array", "items": _number, "minItems": 3, "maxItems": 3},
                "lambda": _number,
                "m": _m_value,
                "fiber": {"enum": list(warped.FIBER_KINDS)},
                "kappa": _number,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "interval": _interval,
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "required": ["seed"],
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "expect": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scalar": _number,
                "einstein": _number,
                "sectional": _number,
                "weyl_zero": {"type": "boolean"},
                "weyl_min": _number,
                "half_flat": {"enum": ["self-dual", "anti-self-dual", "conformally-flat"]},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in TOLERANCE_KEYS},
        },
    },
}


@dataclass
class LoadedSpec:
    name: str
    chart: geo.Chart | None
    soliton: SolitonData | None = None
    wchart: warped.WarpedChart | None = None
    profile: sy.SolitonProfile | None = None
    profile_request: dict | None = None
    count: int = 40
    seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)
    source: str = ""
    expect: dict = field(default_factory=dict)


def _m(value) -> float:
    if value is None:
        return math.inf
    if isinstance(value, str):
        return math.inf
    return float(value)


def validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        lines = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise SpecError("spec failed schema validation:\n  " + "\n  ".join(lines))
    has_metric = "metric" in doc
    has_warped = "warped" in doc
    has_profile = "profile" in doc
    if sum((has_metric, has_warped, has_profile)) != 1:
        raise SpecError("spec needs exactly one of 'metric', 'warped' or 'profile'")
    if has_metric:
        for key in ("dimension", "coordinates", "domain"):
            if key not in doc:
                raise SpecError(f"a 'metric' spec needs '{key}'")
        n = doc["dimension"]
        if len(doc["coordinates"]) != n or len(doc["domain"]) != n or len(doc["metric"]) != n \
                or any(len(row) != n for row in doc["metric"]):
            raise SpecError(f"coordinates, domain and metric must all have dimension {n}")
    elif doc.get("dimension", 4) != 4:
        raise SpecError("warped and profile specs are 4-dimensional")
    if "potential" in doc and "lambda" not in doc:
        raise SpecError("a potential needs 'lambda'")


def load_document(doc: dict, base_dir: Path | str = ".", source: str = "<spec>") -> LoadedSpec:
    validate(doc)
    base_dir = Path(base_dir)
    params = dict(doc.get("params", {}))
    name = doc.get("name", source)
    tol = Tolerances().with_overrides(doc.get("tolerances"))
    sampling = doc["sampling"]
    out = LoadedSpec(name, None, count=sampling.get("count", 40), seed=sampling["seed"],
                     tolerances=tol, source=source, expect=dict(doc.get("expect", {})))
    try:
        if "metric" in doc:
            out.chart = geo.Chart.from_strings(name, doc["coordinates"], doc["domain"], doc["metric"],
                                               params, orientation=doc.get("orientation", 1))
        elif "warped" in doc:
            w = doc["warped"]
            fb = warped.fiber(w["fiber"], kappa=w.get("kappa"), radius=w.get("radius"))
            functions = {}
            phi = w.get("phi")
            if "profile_csv" in w:
                pparams = sy.ProfileParams(doc.get("lambda", 0.0), _m(doc.get("m")), fb.kappa_eff)
                out.profile = sy.SolitonProfile.from_csv(base_dir / w["profile_csv"], pparams)
                functions = out.profile.functions()
                phi = phi or "phi(r)"
            if phi is None:
                raise SpecError("warped block needs 'phi' or 'profile_csv'")
            out.wchart = warped.build_warped(phi, fb, w["interval"], params, functions, name=name)
            out.chart = out.wchart.chart
            if doc.get("orientation", 1) == -1:
                out.chart = out.chart.with_orientation(-1)
                out.wchart.chart = out.chart
        else:
            out.profile_request = dict(doc["profile"])
            return out
        if "potential" in doc:
            f = out.chart.parse(doc["potential"])
            out.soliton = SolitonData(f, doc["lambda"], _m(doc.get("m")),
                                      doc.get("expect_soliton", True), name)
        elif out.profile is not None:
            out.soliton = SolitonData(out.chart.parse("F(r)"), doc.get("lambda", 0.0),
                                      _m(doc.get("m")), True, name)
    except SpecError:
        raise
    except (ValueError, KeyError, OSError) as err:
        raise SpecError(f"{source}: {err}") from err
    return out


def load(path) -> LoadedSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise SpecError(f"cannot read spec {path}: {err.strerror or err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(f"{path}: not valid JSON ({err})") from err
    if not isinstance(doc, dict):
        raise SpecError(f"{path}: top level must be an object")
    return load_document(doc, p.parent, str(path))


# Known closed-form values of the catalog charts, used as anchors.
CATALOG_EXPECT = {
    "cylinder-shrinker": {"scalar": 6.0},
    "quasi-cylinder": {"scalar": 6.0},
    "flat-yamabe": {"scalar": 0.0, "einstein": 0.0, "sectional": 0.0, "weyl_zero": True},
    "round-sphere-trivial": {"scalar": 12.0, "einstein": 3.0, "sectional": 1.0, "weyl_zero": True},
    "fubini-study": {"scalar": 24.0, "einstein": 6.0, "half_flat": "self-dual"},
    "s2xs2": {"scalar": 4.0, "einstein": 1.0, "weyl_min": 0.1},
}


def from_catalog(name: str, count: int = 40, seed: int = 0) -> LoadedSpec:
    """Catalog entry as a loaded spec (cylinder entries keep their warped view)."""
    chart, s = sy.catalog(name)
    wchart = None
    if name in ("cylinder-shrinker", "quasi-cylinder"):
        wchart = sy.catalog_warped(name)
        chart = wchart.chart
    return LoadedSpec(name, chart, s, wchart, count=count, seed=seed, source=f"catalog:{name}",
                      expect=dict(CATALOG_EXPECT[name]))


def resolve(target: str, count: int | None = None, seed: int | None = None) -> LoadedSpec:
    """Load a spec path, or a catalog entry when ``target`` names one and no such file exists."""
    if target in sy.CATALOG and not Path(target).exists():
        spec = from_catalog(target)
    else:
        spec = load(target)
    if count is not None:
        spec.count = count
    if seed is not None:
        spec.seed = seed
    return spec
