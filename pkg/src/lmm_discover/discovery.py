"""Recover dynamics values from exact states by solving the LMM system for f.

For equations n = K..N (K the stencil span) the unknowns satisfy

    sum_{m=m0}^{M0} beta_m f_{n-m} = (1/h) sum_m alpha_m x_{n-m}

The learned indices are I = {K-m0, ..., N-m0}; the indices
I_M = {K-M0, ..., K-m0-1} must be supplied as initial dynamics and are moved
to the right-hand side.  The matrix acting on the learned values is banded
lower triangular with beta_{m0} on the diagonal, so forward substitution
solves it in O(N * bandwidth * d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import mpmath
import numpy as np

from .reference import GridFunction
from .schemes import Scheme


def initial_indices(s: Scheme) -> range:
    """Indices whose dynamics must be supplied (may be empty)."""
    K = s.span
    return range(K - s.M0, K - s.m0)


def learned_indices(s: Scheme, N: int) -> range:
    K = s.span
    return range(K - s.m0, N - s.m0 + 1)


@dataclass(frozen=True)
class DiscoveryProblem:
    scheme: Scheme
    state: GridFunction
    initial_dynamics: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        s = self.scheme
        if self.state.N < s.span:
            raise ValueError(f"{s.name} needs N >= {s.span}, grid has N = {self.state.N}")
        needed = set(initial_indices(s))
        given = set(self.initial_dynamics)
        missing = sorted(needed - given)
        if missing:
            raise ValueError(f"missing initial dynamics for index {missing[0]} (need {sorted(needed)})")
        extra = sorted(given - needed)
        if extra:
            raise ValueError(f"unexpected initial dynamics for index {extra[0]} (need {sorted(needed)})")
        d = self.state.dim
        clean = {}
        for j, v in self.initial_dynamics.items():
            v = np.asarray(v, dtype=float).reshape(-1)
            if v.shape != (d,):
                raise ValueError(f"initial dynamics at index {j} has shape {v.shape}, expected ({d},)")
            clean[j] = v
        object.__setattr__(self, "initial_dynamics", clean)

    @property
    def n_equations(self) -> int:
        return self.state.N - self.scheme.span + 1


@dataclass(frozen=True)
class DiscoveryResult:
    scheme: Scheme
    f_hat: np.ndarray  # (N_M, d); object dtype of mpf when solved in extended range
    indices: np.ndarray
    t: np.ndarray
    residual_norm: float

    @property
    def finite(self) -> bool:
        if self.f_hat.dtype == object:
            return all(mpmath.isfinite(v) for v in self.f_hat.ravel())
        return bool(np.all(np.isfinite(self.f_hat)))


@dataclass(frozen=True)
class ErrorReport:
    linf: float
    l1: float
    per_index: np.ndarray
    log10_linf: float  # finite even when linf overflows a double


def exact_initial_dynamics(s: Scheme, f_true: GridFunction, perturb: float = 0.0) -> dict[int, np.ndarray]:
    """Initial dynamics read off the true grid, each component shifted by ``perturb``."""
    return {j: f_true.values[j] + perturb for j in initial_indices(s)}


def assemble_rhs(p: DiscoveryProblem) -> np.ndarray:
    """(1/h) A x - g, one row per equation n = K..N."""
    s, x = p.scheme, p.state
    K, N = s.span, x.N
    rhs = np.zeros((N - K + 1, x.dim))
    for m, a in enumerate(s.alpha_float()):
        if a:
            rhs += a * x.values[K - m : N + 1 - m]
    rhs /= x.h
    beta = s.beta_float()
    for j, fj in p.initial_dynamics.items():
        # equation n sees f_j through beta_{n-j}, m0 <= n-j <= M0
        for m in range(s.m0, s.M0 + 1):
            n = j + m
            if K <= n <= N and beta[m]:
                rhs[n - K] -= beta[m] * fj
    return rhs


def _band(s: Scheme) -> list[float]:
    return [float(b) for b in s.reduced_beta]


def apply_banded(s: Scheme, v: np.ndarray) -> np.ndarray:
    """Multiply learned-index values by the banded lower-triangular system matrix."""
    band = _band(s)
    out = band[0] * v
    for k in range(1, len(band)):
        if band[k]:
            out[k:] = out[k:] + band[k] * v[:-k]
    return out


def forward_substitute(band, rhs: np.ndarray) -> np.ndarray:
    """Solve the banded lower-triangular Toeplitz system row by row."""
    n = rhs.shape[0]
    out = np.empty_like(rhs)
    diag = band[0]
    width = len(band)
    for r in range(n):
        acc = rhs[r]
        for k in range(1, min(r, width - 1) + 1):
            acc = acc - band[k] * out[r - k]
        out[r] = acc / diag
    return out


def solve_discovery(p: DiscoveryProblem, extended_range: bool = False) -> DiscoveryResult:
    """Solve B f = (1/h) A x - g for the learned dynamics.

    With ``extended_range`` the substitution runs on 53-bit mpmath floats,
    which round like doubles but cannot overflow; unstable schemes on long
    grids then still yield finite (astronomically large) values.
    """
    s = p.scheme
    rhs = assemble_rhs(p)
    band = _band(s)
    if extended_range:
        with mpmath.workprec(53):
            rhs_x = np.vectorize(mpmath.mpf, otypes=[object])(rhs)
            band_x = [mpmath.mpf(b) for b in band]
            f_hat = forward_substitute(band_x, rhs_x)
            residual = _residual_extended(band_x, f_hat, rhs_x)
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            f_hat = forward_substitute(band, rhs)
            res = apply_banded(s, f_hat) - rhs
            residual = float(np.max(np.abs(res))) if res.size else 0.0
        if not np.isfinite(residual):
            residual = math.inf
    idx = np.asarray(learned_indices(s, p.state.N))
    return DiscoveryResult(s, f_hat, idx, p.state.t0 + p.state.h * idx, residual)


def _residual_extended(band, f_hat, rhs) -> float:
    worst = mpmath.mpf(0)
    for r in range(rhs.shape[0]):
        acc = band[0] * f_hat[r]
        for k in range(1, min(r, len(band) - 1) + 1):
            acc = acc + band[k] * f_hat[r - k]
        worst = max(worst, max(abs(v) for v in acc - rhs[r]))
    return float(worst) if mpmath.isfinite(worst) and worst < 1e308 else math.inf


def _to_log10(v) -> float:
    if isinstance(v, mpmath.mpf):
        return float(mpmath.log10(v)) if v > 0 else -math.inf
    v = float(v)
    if v == 0:
        return -math.inf
    return math.log10(v) if math.isfinite(v) else math.inf


def error_vs_truth(r: DiscoveryResult, f_true: GridFunction | np.ndarray) -> ErrorReport:
    """Discrete max and l1 errors over the learned indices.

    ``f_true`` is either the full dynamics grid (restricted here to the
    learned indices) or an array already matching ``r.f_hat``.
    """
    if isinstance(f_true, GridFunction):
        if r.indices.size and r.indices[-1] > f_true.N:
            raise ValueError(f"truth grid ends at {f_true.N}, result needs index {r.indices[-1]}")
        truth = f_true.values[r.indices]
    else:
        truth = np.asarray(f_true, dtype=float)
    if truth.shape != r.f_hat.shape:
        raise ValueError(f"shape mismatch: truth {truth.shape} vs learned {r.f_hat.shape}")
    if r.f_hat.dtype == object:
        with mpmath.workprec(53):
            diff = np.abs(r.f_hat - truth)
            per = np.array([max(row) for row in diff], dtype=object)
            top = max(per) if per.size else mpmath.mpf(0)
            total = sum(per, mpmath.mpf(0))
            as_float = np.array([float(v) if v < 1e308 else math.inf for v in per])
            return ErrorReport(
                float(top) if top < 1e308 else math.inf,
                float(total) if total < 1e308 else math.inf,
                as_float,
                _to_log10(top),
            )
    with np.errstate(invalid="ignore", over="ignore"):
        diff = np.abs(r.f_hat - truth)
        per = diff.max(axis=1) if diff.size else np.zeros(0)
        per = np.where(np.isnan(per), np.inf, per)
        linf = float(per.max()) if per.size else 0.0
        l1 = float(per.sum()) if per.size else 0.0
    return ErrorReport(linf, l1, per, _to_log10(linf))
