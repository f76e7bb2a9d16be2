"""Command-line entry point: ``hypalg build|spectrum|analyze|scan|mean``.

Configuration is a JSON file; numbers may be JSON numbers, decimal strings or
``p/q`` strings.  Example::

    {
      "family": {"preset": "perturbed-chebyshev", "params": {"lambda1": "1"}},
      "max_level": 64,
      "truncations": [128, 256, 512],
      "window": 512,
      "tolerances": {"tol": 1e-12, "ctol": 1e-4, "sep": 1e-3, "match_tol": 1e-6,
                     "margin": 0.05, "B": 1000},
      "scan": {"x_min": "-0.9", "x_max": "0.9", "step": "0.3", "x": ["-2/3"]},
      "arithmetic": "float",
      "output": "out"
    }
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .amenability import (DEFAULT_BOUND, DEFAULT_CTOL, DEFAULT_MARGIN, OUTSIDE_DUAL, ClassFlags,
                          character_norms, classify_family, construct_mean, corollary_check,
                          dual_points, resolve_character, verdict)
from .builders import PRESETS, build_table, preset
from .core import FLOAT, RATIONAL, to_fraction, verify_axioms
from .errors import ConfigError, HypergroupError, InvalidParameter, NotL2, OutsideDual
from .spectral import DEFAULT_EPS, DEFAULT_MATCH_TOL, SupportEstimate, support_for

log = logging.getLogger("hypalg")

COMMANDS = ("build", "spectrum", "analyze", "scan", "mean")
TOLERANCE_KEYS = ("tol", "ctol", "sep", "eps", "match_tol", "margin", "B")
DEFAULT_TOLERANCES = {"tol": 1e-12, "ctol": DEFAULT_CTOL, "sep": DEFAULT_EPS, "eps": DEFAULT_EPS,
                      "match_tol": DEFAULT_MATCH_TOL, "margin": DEFAULT_MARGIN,
                      "B": DEFAULT_BOUND}
KNOWN_KEYS = {"family", "max_level", "truncations", "window", "tolerances", "scan", "arithmetic",
              "output", "display_cap", "axiom_level", "mean", "workers"}

NOT_L2_NOTE = ("a unique alpha-mean exists only when alpha lies in l1(h) and l2(h) and is "
               "isolated in the dual; for alpha = 1 this would force the hypergroup to be compact")


@dataclass
class AnalysisConfig:
    family: dict
    max_level: int = 64
    truncations: list = field(default_factory=lambda: [128, 256, 512])
    window: int = 512
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    scan: Optional[dict] = None
    arithmetic: str = FLOAT
    output: str = "out"
    display_cap: int = 16
    axiom_level: int = 32
    mean: Optional[dict] = None
    workers: int = 4
    raw: dict = field(default_factory=dict, repr=False)

    def tol(self, key: str) -> float:
        return self.tolerances[key]


def _field_error(name: str, msg: str) -> ConfigError:
    return InvalidParameter(f"config field {name!r}: {msg}")


def _positive_int(raw: dict, name: str, default: int) -> int:
    value = raw.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise _field_error(name, f"expected a positive integer, got {value!r}")
    return value


def _number(value, name: str) -> Fraction:
    try:
        return to_fraction(value)
    except (ValueError, TypeError, ZeroDivisionError, InvalidParameter) as exc:
        raise _field_error(name, f"not a number: {value!r}") from exc


def load_config(path: str) -> AnalysisConfig:
    """Parse and validate a JSON config; errors name the line or the field."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> AnalysisConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise _field_error(unknown[0], "unknown key")
    fam = raw.get("family")
    if isinstance(fam, str):
        fam = {"preset": fam}
    if not isinstance(fam, dict) or "preset" not in fam:
        raise _field_error("family", "expected {\"preset\": name, \"params\": {...}}")
    if fam["preset"] not in PRESETS:
        raise _field_error("family.preset", f"unknown preset {fam['preset']!r}; "
                                            f"known: {', '.join(PRESETS)}")
    if not isinstance(fam.get("params", {}), dict):
        raise _field_error("family.params", "expected a mapping")

    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in (raw.get("tolerances") or {}).items():
        if key not in TOLERANCE_KEYS:
            raise _field_error(f"tolerances.{key}", "unknown tolerance")
        v = float(_number(value, f"tolerances.{key}"))
        if not v > 0:
            raise _field_error(f"tolerances.{key}", "must be positive")
        tolerances[key] = v
    if "eps" not in (raw.get("tolerances") or {}):
        tolerances["eps"] = tolerances["sep"]

    truncations = raw.get("truncations", [128, 256, 512])
    if not isinstance(truncations, list) or not all(
            isinstance(t, int) and not isinstance(t, bool) and t > 0 for t in truncations):
        raise _field_error("truncations", "expected a list of positive integers")
    if len(set(truncations)) < 2:
        raise _field_error("truncations", "support estimation needs at least two sizes")

    arithmetic = raw.get("arithmetic", FLOAT)
    if arithmetic not in (FLOAT, RATIONAL):
        raise _field_error("arithmetic", f"expected 'rational' or 'float', got {arithmetic!r}")

    scan = raw.get("scan")
    if scan is not None and not isinstance(scan, dict):
        raise _field_error("scan", "expected a mapping")

    cfg = AnalysisConfig(
        family=fam,
        max_level=_positive_int(raw, "max_level", 64),
        truncations=truncations,
        window=_positive_int(raw, "window", 512),
        tolerances=tolerances,
        scan=scan,
        arithmetic=arithmetic,
        output=str(raw.get("output", "out")),
        display_cap=_positive_int(raw, "display_cap", 16),
        axiom_level=_positive_int(raw, "axiom_level", 32),
        mean=raw.get("mean"),
        workers=_positive_int(raw, "workers", 4),
        raw=raw,
    )
    return cfg


def scan_points(cfg: AnalysisConfig, flags: Optional[ClassFlags] = None) -> list[float]:
    """Grid ``x_min, x_min + step, ... <= x_max`` plus explicit points, in order.

    The grid is generated in exact arithmetic so repeated runs give identical
    points.  With ``"variable": "x_tilde"`` grid values are mapped through the
    essential-interval affine map.
    """
    scan = cfg.scan or {}
    pts: list[Fraction] = []
    if "x_min" in scan or "x_max" in scan or "step" in scan:
        for key in ("x_min", "x_max", "step"):
            if key not in scan:
                raise _field_error(f"scan.{key}", "missing")
        lo, hi = _number(scan["x_min"], "scan.x_min"), _number(scan["x_max"], "scan.x_max")
        step = _number(scan["step"], "scan.step")
        if step <= 0 or hi < lo:
            raise _field_error("scan", "need step > 0 and x_min <= x_max")
        i = 0
        while lo + i * step <= hi:
            pts.append(lo + i * step)
            i += 1
    for i, v in enumerate(scan.get("x", []) or []):
        pts.append(_number(v, f"scan.x[{i}]"))
    variable = scan.get("variable", "x")
    if variable not in ("x", "x_tilde"):
        raise _field_error("scan.variable", "expected 'x' or 'x_tilde'")
    if variable == "x_tilde":
        if flags is None or flags.lambda_limit is None:
            raise _field_error("scan.variable", "x_tilde needs tail limits of the family")
        if flags.nevai_M01:
            return [float(p) for p in pts]
        return [flags.beta_limit + 2.0 * flags.lambda_limit * float(p) for p in pts]
    return [float(p) for p in pts]


# ---------------------------------------------------------------- emission

def fmt(value) -> str:
    """CSV cell: floats with 17 significant digits, rationals as ``p/q``."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_text(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else fmt(v)
    return str(value)


def write_json(path: str, data: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=False)
        fh.write("\n")


# ---------------------------------------------------------------- commands

def _family(cfg: AnalysisConfig):
    return preset(cfg.family["preset"], cfg.family.get("params", {}))


def _prepare_out(cfg: AnalysisConfig) -> str:
    os.makedirs(cfg.output, exist_ok=True)
    return cfg.output


def _support(cfg: AnalysisConfig, family) -> SupportEstimate:
    return support_for(family, cfg.truncations, cfg.tol("eps"), cfg.tol("match_tol"),
                       cfg.tol("ctol"))


def cmd_build(cfg: AnalysisConfig) -> int:
    family = _family(cfg)
    table = build_table(family, cfg.max_level, cfg.arithmetic)
    report = verify_axioms(table, cfg.tol("tol"))
    out = _prepare_out(cfg)
    cap = min(cfg.display_cap, cfg.max_level)
    rows = []
    for j, k, lo, vals in table.iter_rows(cap):
        for i, v in enumerate(vals):
            if v != 0:
                rows.append((j, k, lo + i, v))
    write_csv(os.path.join(out, "table.csv"), ["j", "k", "n", "g"], rows)
    lines = [f"family: {family.name}", f"backend: {cfg.arithmetic}"] + report.lines()
    write_text(os.path.join(out, "axioms.txt"), lines)
    print("\n".join(lines))
    return 0 if report.passed else 2


def cmd_spectrum(cfg: AnalysisConfig) -> int:
    family = _family(cfg)
    support = _support(cfg, family)
    out = _prepare_out(cfg)
    rows = []
    for n in sorted(support.eigenvalues):
        rows.extend((n, i, ev) for i, ev in enumerate(support.eigenvalues[n]))
    write_csv(os.path.join(out, "spectrum.csv"), ["truncation", "index", "eigenvalue"], rows)
    write_csv(os.path.join(out, "masspoints.csv"), ["x", "w", "stable"],
              [(mp.x, mp.weight, mp.stable) for mp in support.mass_points])
    lo, hi = support.essential_interval
    print(f"essential interval [{fmt(lo)}, {fmt(hi)}] ({support.interval_source}); "
          f"{len(support.stable_points())} stable mass points")
    return 0


AXIOMS_SKIPPED = ("family is in orthonormal gauge (not normalized); hypergroup axioms do not "
                  "apply, mean identities are checked directly")


def _check_axioms(cfg: AnalysisConfig, family) -> Optional[int]:
    if not getattr(family, "normalized", True):
        log.info(AXIOMS_SKIPPED)
        return None
    level = min(cfg.axiom_level, cfg.max_level)
    report = verify_axioms(build_table(family, level, cfg.arithmetic), cfg.tol("tol"), level)
    if not report.passed:
        print("axiom failure: not a hypergroup", file=sys.stderr)
        print("\n".join(report.lines()), file=sys.stderr)
        return 2
    return None


def _support_dict(support: SupportEstimate) -> dict:
    return {
        "essential_interval": list(support.essential_interval),
        "interval_source": support.interval_source,
        "exact": support.exact,
        "resolution": list(support.resolution),
        "eps": support.eps,
        "match_tol": support.match_tol,
        "mass_points": [{"x": mp.x, "weight": mp.weight, "stable": mp.stable}
                        for mp in support.mass_points],
        "max_gaps": support.max_gaps,
    }


def _flags_dict(flags: ClassFlags) -> dict:
    return {"compact_type": flags.compact_type, "nevai_M01": flags.nevai_M01,
            "bounded_variation": flags.bounded_variation, "haar_bounded": flags.haar_bounded,
            "lambda_limit": flags.lambda_limit, "beta_limit": flags.beta_limit,
            "window": flags.window, "ctol": flags.ctol, "evidence": flags.evidence}


def _run_verdicts(cfg: AnalysisConfig, points: list[float]) -> int:
    family = _family(cfg)
    code = _check_axioms(cfg, family)
    if code is not None:
        return code
    timings = {}
    t0 = time.perf_counter()
    flags = classify_family(family, cfg.window, cfg.tol("ctol"))
    support = _support(cfg, family)
    timings["classify_and_support"] = time.perf_counter() - t0
    if not points:
        points = scan_points(cfg, flags) if cfg.scan else [1.0] + dual_points(family, support)
    haar = family.haar(cfg.window, cfg.arithmetic)
    table = build_table(family, min(cfg.window, 256), cfg.arithmetic)

    def one(x):
        return verdict(x, family, flags, support, haar=haar, table=table, window=cfg.window,
                       bound=cfg.tol("B"), sep=cfg.tol("sep"), margin=cfg.tol("margin"),
                       backend=cfg.arithmetic)

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        reports = list(pool.map(one, points))
    timings["verdicts"] = time.perf_counter() - t0

    out = _prepare_out(cfg)
    rows = [(r.x, r.verdict, r.norms.l1 if r.norms else None,
             r.norms.l2sq if r.norms else None, r.isolated, r.clause) for r in reports]
    write_csv(os.path.join(out, "verdicts.csv"),
              ["x", "verdict", "l1", "l2sq", "isolated", "clause"], rows)
    corollary = corollary_check(reports, support)
    bundle = {
        "config": cfg.raw,
        "family": {"name": family.name, "kind": family.kind, "params": family.params},
        "flags": _flags_dict(flags),
        "support": _support_dict(support),
        "reports": [{"x": r.x, "verdict": r.verdict, "clause": r.clause,
                     "isolated": r.isolated, "evidence": r.evidence} for r in reports],
        "corollary_check": corollary,
        "axiom_precheck": ("skipped: " + AXIOMS_SKIPPED
                           if not getattr(family, "normalized", True)
                           else f"passed to level {min(cfg.axiom_level, cfg.max_level)}"),
        "versions": {"hypalg": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "timings": timings,
    }
    write_json(os.path.join(out, "report.json"), bundle)
    for r in reports:
        print(f"{fmt(r.x)}\t{r.verdict}\t{r.clause}")
    print(f"corollary_check: {corollary}")
    return 0


def cmd_analyze(cfg: AnalysisConfig, xs: list[float]) -> int:
    points = list(xs)
    if not points and cfg.scan and cfg.scan.get("x"):
        points = [float(_number(v, "scan.x")) for v in cfg.scan["x"]]
    return _run_verdicts(cfg, points)


def cmd_scan(cfg: AnalysisConfig, xs: list[float]) -> int:
    if not cfg.scan and not xs:
        raise _field_error("scan", "scan command needs a grid or an x list")
    family = _family(cfg)
    flags = classify_family(family, cfg.window, cfg.tol("ctol")) if cfg.scan else None
    points = (scan_points(cfg, flags) if cfg.scan else []) + list(xs)
    if not points:
        raise _field_error("scan", "grid is empty")
    return _run_verdicts(cfg, points)


def cmd_mean(cfg: AnalysisConfig, xs: list[float]) -> int:
    if not xs and cfg.mean and "x" in cfg.mean:
        xs = [float(_number(cfg.mean["x"], "mean.x"))]
    if len(xs) != 1:
        raise ConfigError("mean needs exactly one --x (or mean.x in the config)")
    family = _family(cfg)
    code = _check_axioms(cfg, family)
    if code is not None:
        return code
    support = _support(cfg, family)
    flags = classify_family(family, cfg.window, cfg.tol("ctol"))
    evidence: dict = {}
    x, _, _ = resolve_character(xs[0], family, support, cfg.window, cfg.tol("B"),
                                cfg.arithmetic, evidence)
    haar = family.haar(cfg.window, cfg.arithmetic)
    table = build_table(family, min(cfg.window, 256), cfg.arithmetic)
    norms = character_norms(x, family, haar, cfg.window, cfg.tol("margin"), support, flags,
                            cfg.arithmetic)
    mean = construct_mean(x, family, haar, table, cfg.window, support, norms, cfg.tol("margin"))
    out = _prepare_out(cfg)
    dens = mean.density.density
    write_csv(os.path.join(out, "mean.csv"), ["n", "m", "h"],
              [(n, dens[n], haar[n]) for n in range(len(dens))])
    lines = [f"x: {fmt(x)}", f"truncation: {mean.truncation}",
             f"tail_bound: {fmt(mean.tail_bound)}", f"l2_norm_sq: {fmt(mean.l2_norm_sq)}"]
    lines += [f"{k}: {fmt(v)}" for k, v in mean.residuals.items()]
    lines.append(f"verified: {mean.verified}")
    if "snapped_to_mass_point" in evidence:
        lines.append(f"snapped_to_mass_point: {fmt(evidence['snapped_to_mass_point'])}")
    write_text(os.path.join(out, "residuals.txt"), lines)
    print("\n".join(lines))
    return 0 if mean.verified else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypalg",
        description="Discrete commutative hypergroups on the nonnegative integers: "
                    "construction, spectra and alpha-amenability.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--x", action="append", default=[], metavar="REAL",
                        help="character parameter; repeatable (decimal or p/q)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--backend", choices=(RATIONAL, FLOAT),
                        help="arithmetic backend (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output = args.out
        if args.backend:
            cfg.arithmetic = args.backend
        xs = [float(_number(v, "--x")) for v in args.x]
        if args.command == "build":
            return cmd_build(cfg)
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg, xs)
        if args.command == "scan":
            return cmd_scan(cfg, xs)
        return cmd_mean(cfg, xs)
    except OutsideDual as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"verdict: {OUTSIDE_DUAL}", file=sys.stderr)
        return exc.exit_code
    except NotL2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"note: {NOT_L2_NOTE}", file=sys.stderr)
        return exc.exit_code
    except HypergroupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
