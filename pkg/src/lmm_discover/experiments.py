"""Mesh-refinement and long-time error studies for dynamics discovery.

Both studies break into independent (scheme, h) or (scheme, T) cells.  Cells
are computed on a thread pool and assembled by key, so the result does not
depend on scheduling.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .analysis import StabilityTag, classify_stability, consistency_report
from .discovery import (
    DiscoveryProblem,
    error_vs_truth,
    exact_initial_dynamics,
    solve_discovery,
)
from .reference import (
    DEFAULT_REFINE,
    GridFunction,
    exact_dynamics_on_grid,
    get_system,
    integrate_reference,
    steps_between,
)
from .schemes import Family, Scheme, make_scheme

DEFAULT_DOMAIN = (0.0, 0.2)
DEFAULT_H_VALUES = (0.02, 0.01, 0.005, 0.0025)
DEFAULT_LONGTIME_H = 0.01
DEFAULT_T_VALUES = (12.5, 25.0, 37.5)
ORDER_TOL = 0.35
FLOOR_FACTOR = 1e-12
GROWTH_THRESHOLD = 0.1  # log10(error) per unit T
THREADS_ENV = "LMM_DISCOVER_THREADS"


def thread_count() -> int:
    """Worker cap from LMM_DISCOVER_THREADS, else the machine's CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _parallel_map(fn: Callable, keys: Sequence, threads: int | None) -> dict:
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(keys) <= 1:
        return {k: fn(k) for k in keys}
    with ThreadPoolExecutor(max_workers=min(threads, len(keys))) as pool:
        futures = {k: pool.submit(fn, k) for k in keys}
        return {k: futures[k].result() for k in keys}


# ---------------------------------------------------------------------------
# order fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderFit:
    slope: float
    r_squared: float
    n_points: int


def estimate_order(errors: Iterable[float], hs: Iterable[float]) -> OrderFit:
    """Least-squares slope of log(error) against log(h) over finite positive pairs."""
    e = np.asarray(list(errors), dtype=float)
    h = np.asarray(list(hs), dtype=float)
    if e.shape != h.shape:
        raise ValueError(f"{e.size} errors but {h.size} mesh sizes")
    keep = np.isfinite(e) & (e > 0) & np.isfinite(h) & (h > 0)
    if keep.sum() < 2:
        raise ValueError(f"order fit needs at least 2 finite positive points, got {int(keep.sum())}")
    lx, ly = np.log(h[keep]), np.log(e[keep])
    if np.ptp(lx) == 0:
        raise ValueError("order fit needs at least two distinct mesh sizes")
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return OrderFit(float(slope), r2, int(keep.sum()))


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

SchemeKey = tuple[str, int]


def _normalize_schemes(schemes: Iterable) -> tuple[SchemeKey, ...]:
    out = []
    for item in schemes:
        if isinstance(item, Scheme):
            key = (item.family.value, item.M)
        else:
            fam, M = item
            fam = Family.parse(fam) if isinstance(fam, str) else fam
            key = (fam.value, int(M))
        make_scheme(*key)  # range check
        if key not in out:
            out.append(key)
    if not out:
        raise ValueError("at least one scheme is required")
    return tuple(out)


def _name(key: SchemeKey) -> str:
    return f"{key[0]}-{key[1]}"


@dataclass(frozen=True)
class CellError:
    linf: float  # +inf when the double-precision value overflowed
    log10_linf: float
    overflow: bool


def _solve_cell(s: Scheme, x: GridFunction, f: GridFunction, perturb: float, extended: bool) -> CellError:
    prob = DiscoveryProblem(s, x, exact_initial_dynamics(s, f, perturb))
    res = solve_discovery(prob)
    overflow = not res.finite
    if overflow and extended:
        res = solve_discovery(prob, extended_range=True)
    rep = error_vs_truth(res, f)
    if overflow and not extended:
        return CellError(math.inf, math.inf, True)
    return CellError(rep.linf, rep.log10_linf, overflow or not math.isfinite(rep.linf))


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceConfig:
    schemes: tuple[SchemeKey, ...]
    h_values: tuple[float, ...] = DEFAULT_H_VALUES
    domain: tuple[float, float] = DEFAULT_DOMAIN
    system: str = "cubic_2d"
    refine: int = DEFAULT_REFINE
    perturb: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "schemes", _normalize_schemes(self.schemes))
        hs = tuple(float(h) for h in self.h_values)
        object.__setattr__(self, "h_values", hs)
        if len(hs) < 2:
            raise ValueError(f"need at least 2 mesh sizes, got {len(hs)}")
        if any(not b < a for a, b in zip(hs, hs[1:])):
            raise ValueError(f"mesh sizes must be strictly decreasing, got {list(hs)}")
        t0, t1 = (float(v) for v in self.domain)
        if not t1 > t0:
            raise ValueError(f"domain end must exceed start, got [{t0}, {t1}]")
        object.__setattr__(self, "domain", (t0, t1))
        for h in hs:
            steps_between(t0, t1, h)
        get_system(self.system)
        if self.refine < 1:
            raise ValueError(f"refine must be >= 1, got {self.refine}")


@dataclass(frozen=True)
class ConvergenceCell:
    family: str
    M: int
    h: float
    linf: float  # nan when the grid is too short for the scheme
    log10_linf: float
    overflow: bool = False
    floor_limited: bool = False
    skipped: bool = False


@dataclass(frozen=True)
class ConvergenceStudy:
    config: ConvergenceConfig
    cells: tuple[ConvergenceCell, ...]
    estimated_order: dict[str, OrderFit | None]
    flags: dict[str, tuple[str, ...]] = field(default_factory=dict)
    reference_scale: float = 1.0

    @property
    def schemes(self) -> tuple[SchemeKey, ...]:
        return self.config.schemes

    @property
    def h_values(self) -> tuple[float, ...]:
        return self.config.h_values

    def errors(self, name: str) -> list[float]:
        return [c.linf for c in self.cells if f"{c.family}-{c.M}" == name]

    @property
    def results(self) -> dict[tuple[str, float], float]:
        return {(f"{c.family}-{c.M}", c.h): c.linf for c in self.cells}


def _reference_pair(system: str, t0: float, t1: float, h: float, refine: int):
    sys = get_system(system)
    x = integrate_reference(sys, t0, t1, h, refine)
    return x, exact_dynamics_on_grid(sys, x)


def run_convergence(cfg: ConvergenceConfig, threads: int | None = None) -> ConvergenceStudy:
    t0, t1 = cfg.domain
    refs = _parallel_map(lambda h: _reference_pair(cfg.system, t0, t1, h, cfg.refine), cfg.h_values, threads)
    scale = max(float(np.max(np.abs(f.values))) for _, f in refs.values())
    floor = FLOOR_FACTOR * max(scale, 1.0)
    schemes = {k: make_scheme(*k) for k in cfg.schemes}

    def cell(key):
        sk, h = key
        s = schemes[sk]
        x, f = refs[h]
        if x.N < s.span:
            return ConvergenceCell(sk[0], sk[1], h, math.nan, math.nan, skipped=True)
        ce = _solve_cell(s, x, f, cfg.perturb, extended=False)
        return ConvergenceCell(
            sk[0], sk[1], h, ce.linf, ce.log10_linf, overflow=ce.overflow,
            floor_limited=(not ce.overflow and ce.linf < floor),
        )

    keys = [(sk, h) for sk in cfg.schemes for h in cfg.h_values]
    by_key = _parallel_map(cell, keys, threads)
    cells = tuple(by_key[k] for k in keys)

    orders: dict[str, OrderFit | None] = {}
    flags: dict[str, tuple[str, ...]] = {}
    for sk in cfg.schemes:
        mine = [by_key[(sk, h)] for h in cfg.h_values]
        notes = []
        if any(c.overflow for c in mine):
            notes.append("overflow")
        if any(c.skipped for c in mine):
            notes.append("grid_too_short")
        if any(c.floor_limited for c in mine):
            notes.append("roundoff_floor")
        usable = [c for c in mine if not (c.overflow or c.skipped or c.floor_limited)]
        try:
            orders[_name(sk)] = estimate_order([c.linf for c in usable], [c.h for c in usable])
        except ValueError:
            orders[_name(sk)] = None
            notes.append("no_fit")
        flags[_name(sk)] = tuple(notes)
    return ConvergenceStudy(cfg, cells, orders, flags, scale)


# ---------------------------------------------------------------------------
# long time
# ---------------------------------------------------------------------------

class Growth(str, enum.Enum):
    CONSTANT = "Constant"
    EXPONENTIAL = "Exponential"


@dataclass(frozen=True)
class LongTimeConfig:
    schemes: tuple[SchemeKey, ...]
    h: float = DEFAULT_LONGTIME_H
    T_values: tuple[float, ...] = DEFAULT_T_VALUES
    t0: float = 0.0
    system: str = "cubic_2d"
    refine: int = DEFAULT_REFINE
    perturb: float = 0.0
    # re-solve overflowing cells with an unbounded exponent so growth stays measurable
    extended_range: bool = True

    def __post_init__(self):
        object.__setattr__(self, "schemes", _normalize_schemes(self.schemes))
        Ts = tuple(float(T) for T in self.T_values)
        object.__setattr__(self, "T_values", Ts)
        if not Ts:
            raise ValueError("need at least one horizon T")
        if any(not b > a for a, b in zip(Ts, Ts[1:])):
            raise ValueError(f"horizons must be strictly increasing, got {list(Ts)}")
        if not self.h > 0:
            raise ValueError(f"mesh size must be positive, got {self.h}")
        for T in Ts:
            steps_between(self.t0, self.t0 + T, self.h)
        get_system(self.system)
        if self.refine < 1:
            raise ValueError(f"refine must be >= 1, got {self.refine}")


@dataclass(frozen=True)
class LongTimeCell:
    family: str
    M: int
    T: float
    linf: float
    log10_linf: float
    overflow: bool = False
    skipped: bool = False


@dataclass(frozen=True)
class LongTimeStudy:
    config: LongTimeConfig
    cells: tuple[LongTimeCell, ...]
    growth: dict[str, Growth]
    growth_rate: dict[str, float | None]  # fitted d log10(error) / dT

    @property
    def schemes(self) -> tuple[SchemeKey, ...]:
        return self.config.schemes

    def errors(self, name: str) -> list[float]:
        return [c.linf for c in self.cells if f"{c.family}-{c.M}" == name]

    def log10_errors(self, name: str) -> list[float]:
        return [c.log10_linf for c in self.cells if f"{c.family}-{c.M}" == name]


def classify_growth(T_values: Sequence[float], log10_errors: Sequence[float], overflow: bool = False):
    """(Growth, slope) from a linear fit of log10(error) against T."""
    T = np.asarray(T_values, dtype=float)
    y = np.asarray(log10_errors, dtype=float)
    keep = np.isfinite(y)
    slope = None
    if keep.sum() >= 2 and np.ptp(T[keep]) > 0:
        slope = float(np.polyfit(T[keep], y[keep], 1)[0])
    if overflow or np.any(y == math.inf):
        return Growth.EXPONENTIAL, slope
    if slope is not None and slope > GROWTH_THRESHOLD:
        return Growth.EXPONENTIAL, slope
    return Growth.CONSTANT, slope


def run_longtime(cfg: LongTimeConfig, threads: int | None = None) -> LongTimeStudy:
    """Errors on [t0, t0 + T] for each T, from slices of one trajectory over the longest horizon."""
    T_max = cfg.T_values[-1]
    x_all, f_all = _reference_pair(cfg.system, cfg.t0, cfg.t0 + T_max, cfg.h, cfg.refine)
    ends = {T: steps_between(cfg.t0, cfg.t0 + T, cfg.h) for T in cfg.T_values}
    schemes = {k: make_scheme(*k) for k in cfg.schemes}

    def cell(key):
        sk, T = key
        s = schemes[sk]
        n = ends[T]
        if n < s.span:
            return LongTimeCell(sk[0], sk[1], T, math.nan, math.nan, skipped=True)
        ce = _solve_cell(s, x_all.slice(n), f_all.slice(n), cfg.perturb, cfg.extended_range)
        return LongTimeCell(sk[0], sk[1], T, ce.linf, ce.log10_linf, overflow=ce.overflow)

    keys = [(sk, T) for sk in cfg.schemes for T in cfg.T_values]
    by_key = _parallel_map(cell, keys, threads)
    cells = tuple(by_key[k] for k in keys)

    growth, rate = {}, {}
    for sk in cfg.schemes:
        mine = [by_key[(sk, T)] for T in cfg.T_values]
        g, slope = classify_growth(
            cfg.T_values, [c.log10_linf for c in mine],
            overflow=any(c.overflow and not math.isfinite(c.log10_linf) for c in mine),
        )
        growth[_name(sk)] = g
        rate[_name(sk)] = slope
    return LongTimeStudy(cfg, cells, growth, rate)


# ---------------------------------------------------------------------------
# concordance with the stability/consistency classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcordanceCheck:
    scheme: str
    expected: str
    observed: str
    passed: bool


_CONVERGENT = (StabilityTag.STABLE, StabilityTag.MARGINAL)


def convergence_concordance(study: ConvergenceStudy, tol: float = ORDER_TOL) -> list[ConcordanceCheck]:
    """Fitted slope against consistency order for every Stable or MarginallyStable scheme.

    Schemes outside those classes carry no order claim and are not checked.
    """
    out = []
    for sk in study.schemes:
        s = make_scheme(*sk)
        if classify_stability(s).tag not in _CONVERGENT:
            continue
        p = consistency_report(s).order
        fit = study.estimated_order[_name(sk)]
        observed = "no fit" if fit is None else f"{fit.slope:.4f}"
        ok = fit is not None and p is not None and abs(fit.slope - p) <= tol
        out.append(ConcordanceCheck(_name(sk), f"{p} +/- {tol}", observed, ok))
    return out


def longtime_concordance(study: LongTimeStudy) -> list[ConcordanceCheck]:
    """Constant growth for Stable/MarginallyStable schemes, Exponential for Unstable ones."""
    out = []
    for sk in study.schemes:
        tag = classify_stability(make_scheme(*sk)).tag
        if tag in _CONVERGENT:
            want = Growth.CONSTANT
        elif tag is StabilityTag.UNSTABLE:
            want = Growth.EXPONENTIAL
        else:
            continue
        got = study.growth[_name(sk)]
        out.append(ConcordanceCheck(_name(sk), want.value, got.value, got is want))
    return out
