"""Command-line front end.

Exit codes: 0 when every non-diagnostic check passes, 1 when a check fails,
2 for usage or input errors (unreadable or invalid spec, numerics rejected
by the input such as a degenerate metric).
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

from . import __version__
from . import duality as du
from . import expr as ex
from . import geometry as geo
from . import soliton as so
from . import suites
from . import synthesize as sy
from . import warped
from .report import Report
from .specfile import LoadedSpec, SpecError, Tolerances, from_catalog, resolve

INPUT_ERRORS = (ex.ExprError, geo.GeometryError, du.DualityError, so.SolitonError,
                warped.WarpedError, sy.ProfileError)
SUBCOMMANDS = ("check-curvature", "check-duality", "check-soliton", "check-warped", "synthesize", "suite")


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="override the soliton, D = W(grad f) and warped-identity tolerances")
    common.add_argument("--samples", type=int, default=None, help="sample points per subject (default 40)")
    common.add_argument("--seed", type=int, default=None, help="sampling seed (overrides the spec)")
    common.add_argument("--backend", choices=("jet", "fd", "both"), default="jet",
                        help="derivative backend; 'both' adds agreement checks")
    common.add_argument("--report", type=Path, default=None, help="write the JSON report here")
    common.add_argument("--quiet", action="store_true", help="print only the verdict line")

    p = argparse.ArgumentParser(prog="soliton-forge",
                                description="Verify curvature identities on (quasi) Yamabe solitons.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "check-curvature": "curvature invariants of a chart",
        "check-duality": "Hodge star and self-dual / anti-self-dual Weyl suite (4d)",
        "check-soliton": "soliton residual, D-tensor identities and the half-flat chain",
        "check-warped": "warped Weyl identity, fiber checks and level sets",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("spec", help="spec file path or catalog entry name")
    sp = sub.add_parser("synthesize", parents=[common], help="integrate a profile, write CSV and spec")
    sp.add_argument("spec", help="spec file with a 'profile' block, or a built-in profile label")
    sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
    sub.add_parser("suite", parents=[common], help="every check on the shipped catalog")
    return p


def _samples(args, default):
    n = args.samples if args.samples is not None else default
    if n < 1:
        raise UsageError("--samples must be positive")
    return n


def _tolerances(spec_tol: Tolerances, args) -> Tolerances:
    if args.tol is not None and not (args.tol > 0 and math.isfinite(args.tol)):
        raise UsageError("--tol must be a positive number")
    return spec_tol.with_overrides(tol=args.tol)


def evaluate(spec: LoadedSpec, kinds, backend: str, tol: Tolerances, report: Report) -> None:
    """Run the requested check families on one subject, recording input errors."""
    try:
        pts = spec.chart.sample(spec.count, spec.seed)
        primary = "fd" if backend == "fd" else "jet"
        b = suites.pooled_curvature(spec.chart, pts, primary)
        if "curvature" in kinds:
            report.extend(suites.curvature_checks(spec, pts, tol, b, spec.seed))
        if "duality" in kinds and spec.chart.n == 4:
            report.extend(suites.duality_checks(spec, pts, tol, b))
        if "soliton" in kinds and spec.soliton is not None:
            report.extend(suites.soliton_checks(spec, pts, tol, b, primary))
        if "warped" in kinds and spec.wchart is not None:
            report.extend(suites.warped_checks(spec, pts, tol, b, primary, spec.seed))
        if backend == "both":
            report.extend(suites.backend_checks(spec, pts, tol, b))
    except INPUT_ERRORS as err:
        report.errors.append(f"{spec.name}: {type(err).__name__}: {err}")


def _settings(args, count, seed):
    return {"samples": count, "seed": seed, "backend": args.backend, "tol": args.tol}


def cmd_check(args, kind) -> Report:
    spec = resolve(args.spec, args.samples, args.seed)
    _samples(args, spec.count)
    if spec.chart is None:
        raise UsageError(f"{args.spec}: spec has no chart (a 'profile' spec is for synthesize)")
    if kind == "duality" and spec.chart.n != 4:
        raise UsageError("check-duality needs a 4-dimensional chart")
    if kind == "soliton" and spec.soliton is None:
        raise UsageError("check-soliton needs a potential")
    if kind == "warped" and spec.wchart is None:
        raise UsageError("check-warped needs a warped spec")
    tol = _tolerances(spec.tolerances, args)
    report = Report(f"check-{kind}", {"spec": spec.name, **_settings(args, spec.count, spec.seed)})
    if kind == "duality":
        report.extend(suites.algebra_checks())
    evaluate(spec, {kind}, args.backend, tol, report)
    return report


def _slug(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name).strip("-") or "profile"


def _profile_request(args):
    for label, init, params, fiber_kind, interval in sy.SYNTH_PROFILES:
        if args.spec == label and not Path(args.spec).exists():
            req = {"init": list(init), "lambda": params.lam, "m": params.m, "fiber": fiber_kind,
                   "kappa": params.kappa, "interval": list(interval)}
            return label, req, 0, None, Tolerances()
    spec = resolve(args.spec, args.samples, args.seed)
    if spec.profile_request is None:
        raise UsageError(f"{args.spec}: synthesize needs a spec with a 'profile' block")
    return spec.name, spec.profile_request, spec.seed, spec.count, spec.tolerances


def cmd_synthesize(args) -> Report:
    name, req, seed, count, spec_tol = _profile_request(args)
    seed = args.seed if args.seed is not None else seed
    count = _samples(args, count or 40)
    m = req.get("m", math.inf)
    m = math.inf if isinstance(m, str) else float(m)
    kind = req.get("fiber", "S3")
    kappa = req.get("kappa", 1.0)
    fb = sy.fiber_for_profile(kind, kappa, req.get("radius"))
    params = sy.ProfileParams(float(req["lambda"]), m, fb.kappa_eff)
    prof = sy.integrate_profile(req["init"], params, req["interval"], req.get("tol", 1e-10))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    slug = _slug(name)
    csv_path = out / f"{slug}.csv"
    spec_path = out / f"{slug}.json"
    prof.to_csv(csv_path)
    warped_block = {"fiber": kind, "interval": list(prof.interval), "profile_csv": csv_path.name}
    if kind == "S2xE1":
        warped_block["radius"] = 1.0 / math.sqrt(3.0 * fb.kappa_eff)
    elif kind != "R3":
        warped_block["kappa"] = fb.kappa
    doc = {
        "name": name,
        "warped": warped_block,
        "potential": "F(r)",
        "lambda": params.lam,
        "m": "inf" if math.isinf(m) else m,
        "sampling": {"count": count, "seed": seed},
    }
    spec_path.write_text(json.dumps(doc, indent=2) + "\n")
    tol = _tolerances(spec_tol, args)
    report = Report("synthesize", {"spec": name, "csv": csv_path.name, "assembled_spec": spec_path.name,
                                   "nodes": int(prof.r.size), **_settings(args, count, seed)})
    report.extend(suites.profile_checks(name, prof))
    assembled = resolve(str(spec_path))
    evaluate(assembled, {"curvature", "soliton", "warped"}, args.backend, tol, report)
    return report


# warped subjects of the suite: (name, phi, fiber kind, interval)
SUITE_WARPED = (
    ("warped-S3-sin", "sin(r)", "S3", (0.3, 1.5)),
    ("warped-R3-cosh", "cosh(r)", "R3", (0.0, 1.0)),
    ("warped-H3-cosh", "cosh(r)", "H3", (0.0, 1.0)),
    ("warped-S2xE1-const", "1", "S2xE1", (0.0, 1.0)),
    ("warped-S2xE1-exp", "exp(r)", "S2xE1", (0.0, 1.0)),
)


def suite_subjects(count: int, seed: int):
    """Every subject of the suite, in a fixed order: (spec, check families)."""
    out = []
    for name in sy.CATALOG:
        out.append((from_catalog(name, count, seed), {"curvature", "duality", "soliton", "warped"}))
    for kind in warped.FIBER_KINDS:
        fb = warped.fiber(kind)
        out.append((LoadedSpec(f"fiber-{kind}", fb.chart, count=count, seed=seed), {"curvature"}))
    for name, phi, kind, interval in SUITE_WARPED:
        w = warped.build_warped(phi, warped.fiber(kind), interval, name=name)
        out.append((LoadedSpec(name, w.chart, wchart=w, count=count, seed=seed), {"curvature", "warped"}))
    for label, *_ in sy.SYNTH_PROFILES:
        prof, w, s = sy.synthesized(label)
        out.append((LoadedSpec(label, w.chart, s, w, prof, count=count, seed=seed),
                    {"curvature", "duality", "soliton", "warped"}))
    for k, (init, params, prof) in enumerate(sy.random_inits(seed)):
        label = f"random-{seed}-{k}"
        w, s = sy.assemble(prof, name=label)
        out.append((LoadedSpec(label, w.chart, s, w, prof, count=count, seed=seed),
                    {"curvature", "soliton", "warped"}))
    return out


def cmd_suite(args) -> Report:
    count = _samples(args, 40)
    seed = args.seed if args.seed is not None else 0
    tol = _tolerances(Tolerances(), args)
    report = Report("suite", _settings(args, count, seed))
    report.extend(suites.algebra_checks())
    report.extend(suites.integrator_order_check())
    report.extend(suites.closed_form_profile_checks())
    for spec, kinds in suite_subjects(count, seed):
        if spec.profile is not None:
            report.extend(suites.profile_checks(spec.name, spec.profile))
        evaluate(spec, kinds, args.backend, tol, report)
    return report


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "suite":
            report = cmd_suite(args)
        elif args.command == "synthesize":
            report = cmd_synthesize(args)
        else:
            report = cmd_check(args, args.command.removeprefix("check-"))
    except (SpecError, UsageError) as err:
        print(f"soliton-forge: error: {err}", file=sys.stderr)
        return 2
    except INPUT_ERRORS as err:
        print(f"soliton-forge: error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    if args.report is not None:
        args.report.parent.mkdir(parents=True, exist_ok=True)
        args.report.write_text(report.to_json())
    if not args.quiet:
        for line in report.summary_lines():
            print(line, file=stdout)
        for err in report.errors:
            print(f"ERROR {err}", file=stdout)
    n_fail = len(report.failures())
    print(f"verdict: {'pass' if report.verdict else 'fail'} ({len(report.checks)} checks, "
          f"{n_fail} failed, {len(report.errors)} errors)", file=stdout)
    if report.errors:
        return 2
    return 0 if report.verdict else 1


def main() -> None:
    sys.exit(run())
