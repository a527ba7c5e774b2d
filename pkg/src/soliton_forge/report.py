"""Check records and the JSON report document."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__

# Everything a reader needs to reproduce signs and orderings. Hashed into
# every report so that a convention change is visible in the output.
CONVENTIONS = {
    "riemann": "R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik; "
               "R_ijkl = -g_lm R^m_ijk; unit sphere has R_ijij = +1",
    "ricci": "Ric_jl = g^ik R_ijkl; R = g^jl Ric_jl",
    "weyl": "W = Riem - (Ric o g)/(n-2) + R (g o g)/(2 (n-1)(n-2)) (Kulkarni-Nomizu form)",
    "bivector_basis": "[12, 13, 14, 23, 24, 34], eps_1234 = +1, *(e1^e2) = e3^e4",
    "self_dual_basis": "(e12+e34, e13+e42, e32+e41)/sqrt2; anti-self-dual with minus signs",
    "soliton": "Hess f - (1/m) df df = (R - lambda) g, 1/m = 0 for m = inf",
    "frame_norms": "residual norms are Frobenius norms of orthonormal-frame components",
}


def conventions_hash() -> str:
    blob = json.dumps(CONVENTIONS, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class Check:
    name: str
    anchor: str
    points_tested: int
    max_residual: float
    tolerance: float
    passed: bool
    diagnostic: bool = False
    comparison: str = "<="   # "<=": residual at most tolerance; ">": residual must exceed it
    note: str = ""
    subject: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "subject": self.subject,
            "anchor": self.anchor,
            "points_tested": int(self.points_tested),
            "max_residual": _num(self.max_residual),
            "comparison": self.comparison,
            "tolerance": _num(self.tolerance),
            "pass": bool(self.passed),
            "diagnostic": bool(self.diagnostic),
            "note": self.note,
        }


def check(name, anchor, values, tolerance, *, subject="", diagnostic=False, note="",
          comparison="<=", points=None) -> Check:
    """Build a check from per-point residual values (max is compared)."""
    vals = np.atleast_1d(np.asarray(values, dtype=float))
    if comparison == "<=":
        worst = float(np.max(vals)) if vals.size else math.nan
        ok = bool(vals.size) and bool(np.all(np.isfinite(vals))) and worst <= tolerance
    elif comparison == ">":
        worst = float(np.min(vals)) if vals.size else math.nan
        ok = bool(vals.size) and bool(np.all(np.isfinite(vals))) and worst > tolerance
    else:
        raise ValueError(f"unknown comparison {comparison!r}")
    n = points if points is not None else vals.size
    return Check(name, anchor, n, worst, float(tolerance), ok, diagnostic, comparison, note, subject)


@dataclass
class Report:
    command: str
    settings: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def add(self, *checks: Check):
        self.checks.extend(checks)

    def extend(self, checks):
        self.checks.extend(checks)

    @property
    def verdict(self) -> bool:
        return not self.errors and all(c.passed for c in self.checks if not c.diagnostic)

    def failures(self):
        return [c for c in self.checks if not c.diagnostic and not c.passed]

    def to_dict(self, timestamp: bool = True):
        doc = {
            "tool": "soliton-forge",
            "version": __version__,
            "conventions_sha256": conventions_hash(),
            "command": self.command,
            "settings": self.settings,
            "verdict": "pass" if self.verdict else "fail",
            "checks": [c.to_dict() for c in self.checks],
            "errors": list(self.errors),
        }
        if timestamp:
            doc["generated_at"] = datetime.now(timezone.utc).isoformat()
        return doc

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2) + "\n"

    def summary_lines(self):
        for c in self.checks:
            status = "PASS" if c.passed else ("info" if c.diagnostic else "FAIL")
            tag = " (diagnostic)" if c.diagnostic else ""
            yield (f"{status:4}  {c.subject:24} {c.name:34} max={c.max_residual:.3e} "
                   f"{c.comparison} {c.tolerance:.1e}{tag}")
