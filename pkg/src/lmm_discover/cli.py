"""Command-line entry point: analyze, discover, convergence, longtime."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

from . import __version__
from .analysis import Direction, classify_stability, consistency_report, direction_roots
from .discovery import DiscoveryProblem, error_vs_truth, exact_initial_dynamics, solve_discovery
from .experiments import (
    DEFAULT_DOMAIN,
    DEFAULT_H_VALUES,
    DEFAULT_LONGTIME_H,
    DEFAULT_T_VALUES,
    ConvergenceConfig,
    LongTimeConfig,
    convergence_concordance,
    longtime_concordance,
    run_convergence,
    run_longtime,
    thread_count,
)
from .reference import (
    DEFAULT_REFINE,
    SYSTEMS,
    ReferenceConvergenceError,
    exact_dynamics_on_grid,
    get_system,
    integrate_reference,
    steps_between,
)
from .schemes import MAX_STEPS, Family, make_scheme

HEADER = "# lmm-discover v1"
SCHEMA = "lmm-discover v1"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    """Invalid flag combination, reported before any computation starts."""


def _num(v: float) -> str:
    # repr is the shortest round-trip form, so output is exact and stable
    return repr(float(v))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_family(text: str) -> Family:
    try:
        return Family.parse(text)
    except ValueError:
        raise ConfigError(f"unknown family {text!r}: expected AB, AM or BDF") from None


def parse_m_range(text: str) -> list[int]:
    """'3' or '2..5' (inclusive)."""
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise ConfigError(f"--M must be an integer or a range like 2..5, got {text!r}") from None
    if b < a:
        raise ConfigError(f"--M range {text!r} is empty")
    return list(range(a, b + 1))


def _check_m(family: Family, Ms: Sequence[int]) -> None:
    lo = 0 if family is Family.AM else 1
    bad = [M for M in Ms if not lo <= M <= MAX_STEPS]
    if bad:
        raise ConfigError(f"M={bad[0]} out of range for {family.value}: allowed {lo}..{MAX_STEPS}")


def _float_list(text: str, flag: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{flag} must be a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{flag} is empty")
    return vals


def _check_grid(t0: float, t1: float, h: float) -> None:
    if not h > 0:
        raise ConfigError(f"mesh size must be positive, got h={h}")
    if not t1 > t0:
        raise ConfigError(f"--t1 must exceed --t0, got [{t0}, {t1}]")
    try:
        steps_between(t0, t1, h)
    except ValueError:
        raise ConfigError(f"(t1 - t0)/h = {(t1 - t0) / h!r} is not an integer for h={h}") from None


@dataclass
class RunConfig:
    subcommand: str
    family: Family
    Ms: list[int]
    system: str = "cubic_2d"
    t0: float = 0.0
    t1: float | None = None
    h: float | None = None
    h_list: list[float] = field(default_factory=list)
    T_list: list[float] = field(default_factory=list)
    directions: list[Direction] = field(default_factory=lambda: [Direction.FORWARD])
    perturb: float = 0.0
    refine: int = DEFAULT_REFINE
    output: str | None = None
    check: bool = False
    as_json: bool = False


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lmm-discover", description="Linear multistep methods for dynamics discovery.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--family", required=True, help="AB, AM or BDF")
        sp.add_argument("--M", required=True, help="step count or inclusive range a..b")
        sp.add_argument("--output", help="write here instead of standard output")
        sp.add_argument("--json", action="store_true", help="structured JSON instead of CSV")

    def system_flags(sp):
        sp.add_argument("--system", default="cubic_2d", help=f"one of {', '.join(SYSTEMS)}")
        sp.add_argument("--refine", type=int, default=DEFAULT_REFINE, help="RK4 substeps per output step")
        sp.add_argument("--perturb-initial", type=float, default=0.0, metavar="EPS",
                        help="shift supplied initial dynamics by EPS")

    a = sub.add_parser("analyze", help="consistency order and stability class")
    common(a)
    a.add_argument("--direction", default="Forward", help="Forward, Terminal or both")

    d = sub.add_parser("discover", help="recover dynamics on one grid")
    common(d)
    system_flags(d)
    d.add_argument("--t0", type=float, default=0.0)
    d.add_argument("--t1", type=float, required=True)
    d.add_argument("--h", type=float, required=True)

    c = sub.add_parser("convergence", help="mesh-refinement study")
    common(c)
    system_flags(c)
    c.add_argument("--t0", type=float, default=DEFAULT_DOMAIN[0])
    c.add_argument("--t1", type=float, default=DEFAULT_DOMAIN[1])
    c.add_argument("--h-list", default=",".join(map(str, DEFAULT_H_VALUES)))
    c.add_argument("--check", action="store_true", help="exit 1 unless fitted orders match the classification")

    lt = sub.add_parser("longtime", help="fixed-mesh growth over increasing horizons")
    common(lt)
    system_flags(lt)
    lt.add_argument("--t0", type=float, default=0.0)
    lt.add_argument("--h", type=float, default=DEFAULT_LONGTIME_H)
    lt.add_argument("--T-list", default=",".join(map(str, DEFAULT_T_VALUES)))
    lt.add_argument("--check", action="store_true", help="exit 1 unless growth matches the classification")
    return p


def to_config(ns: argparse.Namespace) -> RunConfig:
    family = parse_family(ns.family)
    Ms = parse_m_range(ns.M)
    _check_m(family, Ms)
    cfg = RunConfig(ns.subcommand, family, Ms, output=ns.output, as_json=ns.json)
    if ns.subcommand == "analyze":
        text = ns.direction.lower()
        if text == "both":
            cfg.directions = [Direction.FORWARD, Direction.TERMINAL]
        else:
            try:
                cfg.directions = [Direction.parse(ns.direction)]
            except ValueError:
                raise ConfigError(f"unknown direction {ns.direction!r}: expected Forward, Terminal or both") from None
        return cfg

    if ns.system not in SYSTEMS:
        raise ConfigError(f"unknown system {ns.system!r}: expected one of {', '.join(SYSTEMS)}")
    if ns.refine < 1:
        raise ConfigError(f"--refine must be >= 1, got {ns.refine}")
    if not math.isfinite(ns.perturb_initial):
        raise ConfigError("--perturb-initial must be finite")
    cfg.system, cfg.refine, cfg.perturb, cfg.t0 = ns.system, ns.refine, ns.perturb_initial, ns.t0
    try:
        thread_count()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    if ns.subcommand == "discover":
        if len(Ms) != 1:
            raise ConfigError("discover takes a single --M, not a range")
        cfg.t1, cfg.h = ns.t1, ns.h
        _check_grid(cfg.t0, cfg.t1, cfg.h)
        s = make_scheme(family, Ms[0])
        n = steps_between(cfg.t0, cfg.t1, cfg.h)
        if n < s.span:
            raise ConfigError(f"grid has {n} steps but {s.name} needs at least {s.span}")
    elif ns.subcommand == "convergence":
        cfg.t1, cfg.check = ns.t1, ns.check
        cfg.h_list = _float_list(ns.h_list, "--h-list")
        if len(cfg.h_list) < 2:
            raise ConfigError("--h-list needs at least 2 mesh sizes")
        if any(not b < a for a, b in zip(cfg.h_list, cfg.h_list[1:])):
            raise ConfigError(f"--h-list must be strictly decreasing, got {ns.h_list}")
        for h in cfg.h_list:
            _check_grid(cfg.t0, cfg.t1, h)
    else:
        cfg.h, cfg.check = ns.h, ns.check
        cfg.T_list = _float_list(ns.T_list, "--T-list")
        if any(not b > a for a, b in zip(cfg.T_list, cfg.T_list[1:])):
            raise ConfigError(f"--T-list must be strictly increasing, got {ns.T_list}")
        for T in cfg.T_list:
            _check_grid(cfg.t0, cfg.t0 + T, cfg.h)
    return cfg


# ---------------------------------------------------------------------------
# subcommands; each returns (text, check failures)
# ---------------------------------------------------------------------------

def _csv(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(payload: dict) -> str:
    return json.dumps({"schema": SCHEMA, **payload}, indent=2, sort_keys=True, allow_nan=False,
                      default=str) + "\n"


def _jnum(v: float):
    """JSON has no inf/nan; spell them as strings."""
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def cmd_analyze(cfg: RunConfig) -> tuple[str, list[str]]:
    rows = []
    for M in cfg.Ms:
        s = make_scheme(cfg.family, M)
        order = consistency_report(s).order
        for d in cfg.directions:
            roots = direction_roots(s, d)
            cls = classify_stability(s, d)
            top = roots.largest() if roots.roots else None
            rows.append({
                "family": s.family.value,
                "M": M,
                "direction": d.value,
                "consistency_order": order,
                "stability_class": str(cls),
                "max_root_modulus": None if top is None else top.modulus,
                "witness_multiplicity": None if cls.witness is None else cls.witness.multiplicity,
            })
    if cfg.as_json:
        return _json({"subcommand": "analyze", "rows": rows}), []
    cols = list(rows[0]) if rows else []
    body = [["" if r[c] is None else (_num(r[c]) if isinstance(r[c], float) else str(r[c])) for c in cols]
            for r in rows]
    return _csv(cols, body), []


def cmd_discover(cfg: RunConfig) -> tuple[str, list[str]]:
    s = make_scheme(cfg.family, cfg.Ms[0])
    system = get_system(cfg.system)
    x = integrate_reference(system, cfg.t0, cfg.t1, cfg.h, cfg.refine)
    f = exact_dynamics_on_grid(system, x)
    res = solve_discovery(DiscoveryProblem(s, x, exact_initial_dynamics(s, f, cfg.perturb)))
    rep = error_vs_truth(res, f)
    truth = f.values[res.indices]
    if cfg.as_json:
        return _json({
            "subcommand": "discover",
            "scheme": s.name,
            "system": cfg.system,
            "h": cfg.h,
            "t": [_jnum(t) for t in res.t],
            "f_hat": [[_jnum(v) for v in row] for row in res.f_hat],
            "f_true": [[_jnum(v) for v in row] for row in truth],
            "linf": _jnum(rep.linf),
            "l1": _jnum(rep.l1),
            "residual_norm": _jnum(res.residual_norm),
        }), []
    dim = x.dim
    cols = ["t"] + [f"f_hat_{i + 1}" for i in range(dim)] + [f"f_true_{i + 1}" for i in range(dim)] + ["abs_err"]
    body = [
        [_num(t)] + [_num(v) for v in fh] + [_num(v) for v in ft] + [_num(e)]
        for t, fh, ft, e in zip(res.t, res.f_hat, truth, rep.per_index)
    ]
    return _csv(cols, body), []


def _schemes(cfg: RunConfig):
    return [(cfg.family.value, M) for M in cfg.Ms]


def _check_lines(checks) -> list[str]:
    return [f"{c.scheme}: expected {c.expected}, observed {c.observed}" for c in checks if not c.passed]


def cmd_convergence(cfg: RunConfig) -> tuple[str, list[str]]:
    study = run_convergence(ConvergenceConfig(
        _schemes(cfg), tuple(cfg.h_list), (cfg.t0, cfg.t1), cfg.system, cfg.refine, cfg.perturb))
    failures = _check_lines(convergence_concordance(study)) if cfg.check else []

    def order_text(name):
        fit = study.estimated_order[name]
        return "" if fit is None else _num(fit.slope)

    if cfg.as_json:
        return _json({
            "subcommand": "convergence",
            "system": cfg.system,
            "domain": list(study.config.domain),
            "h_values": list(study.h_values),
            "cells": [
                {"family": c.family, "M": c.M, "h": c.h, "linf_error": _jnum(c.linf),
                 "log10_linf_error": _jnum(c.log10_linf), "overflow": c.overflow,
                 "floor_limited": c.floor_limited, "skipped": c.skipped}
                for c in study.cells
            ],
            "estimated_order": {
                k: None if v is None else {"slope": v.slope, "r_squared": v.r_squared, "n_points": v.n_points}
                for k, v in study.estimated_order.items()
            },
            "flags": {k: list(v) for k, v in study.flags.items()},
        }), failures
    body = [[c.family, str(c.M), _num(c.h), _num(c.linf), order_text(f"{c.family}-{c.M}")] for c in study.cells]
    return _csv(["family", "M", "h_or_T", "linf_error", "estimated_order_or_growth"], body), failures


def cmd_longtime(cfg: RunConfig) -> tuple[str, list[str]]:
    study = run_longtime(LongTimeConfig(
        _schemes(cfg), cfg.h, tuple(cfg.T_list), cfg.t0, cfg.system, cfg.refine, cfg.perturb))
    failures = _check_lines(longtime_concordance(study)) if cfg.check else []
    if cfg.as_json:
        return _json({
            "subcommand": "longtime",
            "system": cfg.system,
            "h": cfg.h,
            "T_values": list(study.config.T_values),
            "cells": [
                {"family": c.family, "M": c.M, "T": c.T, "linf_error": _jnum(c.linf),
                 "log10_linf_error": _jnum(c.log10_linf), "overflow": c.overflow, "skipped": c.skipped}
                for c in study.cells
            ],
            "growth": {k: v.value for k, v in study.growth.items()},
            "log10_growth_rate": {k: v for k, v in study.growth_rate.items()},
        }), failures
    body = [[c.family, str(c.M), _num(c.T), _num(c.linf), study.growth[f"{c.family}-{c.M}"].value]
            for c in study.cells]
    return _csv(["family", "M", "h_or_T", "linf_error", "estimated_order_or_growth"], body), failures


COMMANDS = {
    "analyze": cmd_analyze,
    "discover": cmd_discover,
    "convergence": cmd_convergence,
    "longtime": cmd_longtime,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = to_config(ns)
    except ConfigError as exc:
        print(f"lmm-discover: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        text, failures = COMMANDS[cfg.subcommand](cfg)
    except (ReferenceConvergenceError, ValueError) as exc:
        print(f"lmm-discover: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if failures:
        for line in failures:
            print(f"check failed: {line}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
