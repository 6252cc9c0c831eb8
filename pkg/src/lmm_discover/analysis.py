"""Characteristic polynomials, truncation constants and discovery stability.

Stability for dynamics discovery is governed by the reduced second
characteristic polynomial (the beta coefficients), not by rho.  The
classes, from strongest to weakest:

    Stable            all roots strictly inside the unit disc
    MarginallyStable  no root outside, unit-modulus roots simple
    WeaklyStable(k)   no root outside, unit-modulus roots of multiplicity k-1 >= 2
    Unstable          some root outside the closed unit disc
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .polynomials import CharPoly, Root, RootSet, poly_roots
from .schemes import Scheme

TOL_UNIT = 1e-8


class Direction(str, enum.Enum):
    FORWARD = "Forward"
    TERMINAL = "Terminal"

    @classmethod
    def parse(cls, name: str) -> "Direction":
        for d in cls:
            if d.value.lower() == name.lower():
                return d
        raise ValueError(f"unknown direction {name!r}; expected Forward or Terminal")


class StabilityTag(str, enum.Enum):
    STABLE = "Stable"
    MARGINAL = "MarginallyStable"
    WEAK = "WeaklyStable"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityClass:
    tag: StabilityTag
    witness: Root | None = None
    k: int | None = None  # only for WeaklyStable: unit roots have multiplicity k - 1

    def __str__(self) -> str:
        if self.tag is StabilityTag.WEAK:
            return f"WeaklyStable(-{self.k})"
        return self.tag.value


@dataclass(frozen=True)
class ConsistencyReport:
    constants: tuple[Fraction, ...]
    order: int | None
    exceeds_max_order: bool = False

    @property
    def degree(self) -> int | None:
        return self.order

    @property
    def consistent(self) -> bool:
        return self.order is None or self.order >= 1

    @property
    def strongly_consistent(self) -> bool:
        return self.order is None or self.order >= 2


@dataclass(frozen=True)
class PowerNormProfile:
    max_norm: float
    sum_norm: float
    per_step: np.ndarray
    overflow_step: int | None = None

    def running_sum(self) -> np.ndarray:
        return np.cumsum(self.per_step)


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

def first_char_poly(s: Scheme) -> CharPoly:
    """rho(z) = sum_m alpha_m z^(K - m) with K the stencil span."""
    return CharPoly(s.alpha)


def second_char_poly(s: Scheme) -> CharPoly:
    """sigma(z) = sum_m beta_m z^(K - m), leading zeros stripped."""
    coeffs = list(s.beta)
    while len(coeffs) > 1 and coeffs[0] == 0:
        coeffs.pop(0)
    return CharPoly(tuple(coeffs))


def reduced_second_char_poly(s: Scheme) -> CharPoly:
    """sigma-hat(r) = sum_{m=m0}^{M0} beta_m r^(M0 - m)."""
    return CharPoly(s.reduced_beta)


def _direction_poly(s: Scheme, direction: Direction | str) -> CharPoly:
    direction = Direction.parse(direction) if isinstance(direction, str) else direction
    p = reduced_second_char_poly(s)
    return p.reversed() if direction is Direction.TERMINAL else p


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------

def classify_roots(roots: RootSet, tol_unit: float = TOL_UNIT) -> StabilityClass:
    if not roots.roots:
        return StabilityClass(StabilityTag.STABLE)
    outside = [r for r in roots.roots if not r.unit_certified and r.modulus > 1 + tol_unit]
    if outside:
        return StabilityClass(StabilityTag.UNSTABLE, max(outside, key=lambda r: r.modulus))
    on_circle = [r for r in roots.roots if r.unit_certified or r.modulus >= 1 - tol_unit]
    if not on_circle:
        return StabilityClass(StabilityTag.STABLE, roots.largest())
    worst = max(on_circle, key=lambda r: r.multiplicity)
    if worst.multiplicity == 1:
        return StabilityClass(StabilityTag.MARGINAL, worst)
    return StabilityClass(StabilityTag.WEAK, worst, k=worst.multiplicity + 1)


def direction_roots(s: Scheme, direction: Direction | str = Direction.FORWARD) -> RootSet:
    return poly_roots(_direction_poly(s, direction))


def classify_stability(s: Scheme, direction: Direction | str = Direction.FORWARD) -> StabilityClass:
    """Root-condition class of the scheme for forward or terminal-data discovery.

    Terminal data reverses the recurrence, which replaces each root of
    sigma-hat by its reciprocal.  Unit-modulus roots that are roots of unity
    are certified in exact arithmetic before the float tolerance applies.
    """
    return classify_roots(direction_roots(s, direction))


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------

def truncation_constants(s: Scheme, count: int) -> list[Fraction]:
    """C_0, ..., C_{count-1} of the local truncation error expansion."""
    out = [sum(s.alpha, Fraction(0))]
    for m in range(1, count):
        a = sum((Fraction(k) ** m * ak for k, ak in enumerate(s.alpha)), Fraction(0))
        b = sum((Fraction(k) ** (m - 1) * bk for k, bk in enumerate(s.beta)), Fraction(0))
        out.append((-1) ** m * (a / math.factorial(m) + b / math.factorial(m - 1)))
    return out


def consistency_report(s: Scheme, max_order: int = 30) -> ConsistencyReport:
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    consts = []
    for m, c in enumerate(truncation_constants(s, max_order + 2)):
        consts.append(c)
        if c != 0:
            return ConsistencyReport(tuple(consts), m - 1)
    return ConsistencyReport(tuple(consts), None, exceeds_max_order=True)


def exp_series_order(s: Scheme, max_order: int = 30) -> int | None:
    """Order p with rho(e^z) - z sigma(e^z) = O(z^(p+1)), from exact Taylor coefficients."""
    K = s.span
    for j in range(max_order + 2):
        rho_j = sum((a * Fraction(K - m) ** j for m, a in enumerate(s.alpha)), Fraction(0))
        rho_j /= math.factorial(j)
        if j == 0:
            sig_j = Fraction(0)
        else:
            sig_j = sum((b * Fraction(K - m) ** (j - 1) for m, b in enumerate(s.beta)), Fraction(0))
            sig_j /= math.factorial(j - 1)
        if rho_j - sig_j != 0:
            return j - 1
    return None


# ---------------------------------------------------------------------------
# companion matrix
# ---------------------------------------------------------------------------

def companion_matrix(s: Scheme) -> np.ndarray:
    """Companion matrix of the beta recurrence, shape (M0 - m0, M0 - m0)."""
    rb = s.reduced_beta
    n = len(rb) - 1
    Z = np.zeros((n, n))
    if n == 0:
        return Z
    Z[0, :] = [-float(b / rb[0]) for b in rb[1:]]
    Z[1:, :-1] = np.eye(n - 1)
    return Z


def power_norm_profile(s: Scheme, n_max: int) -> PowerNormProfile:
    """||Z^n||_inf for n = 1..n_max with running max and sum."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    Z = companion_matrix(s)
    norms = np.zeros(n_max)
    if Z.size == 0:
        return PowerNormProfile(0.0, 0.0, norms)
    P = np.eye(Z.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_max):
            P = Z @ P
            v = np.abs(P).sum(axis=1).max()
            if not np.isfinite(v):
                norms[n:] = np.inf
                return PowerNormProfile(math.inf, math.inf, norms, overflow_step=n + 1)
            norms[n] = v
    return PowerNormProfile(float(norms.max()), float(norms.sum()), norms)
