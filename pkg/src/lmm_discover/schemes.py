"""Exact coefficients for Adams-Bashforth, Adams-Moulton and BDF schemes.

A scheme is written as

    sum_m alpha_m x_{n-m} = h * sum_m beta_m f(x_{n-m}),   m = 0..M

and every coefficient is kept as a :class:`fractions.Fraction`.  Floating
point versions are only produced on request (``Scheme.alpha_float`` etc.).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

MAX_STEPS = 20


class Family(str, enum.Enum):
    AB = "AB"
    AM = "AM"
    BDF = "BDF"

    @classmethod
    def parse(cls, name: str) -> "Family":
        try:
            return cls(name.upper())
        except ValueError:
            raise ValueError(f"unknown scheme family {name!r}; expected one of AB, AM, BDF") from None


class Lattice(str, enum.Enum):
    """Interpolation node sets relative to t_n.

    ``IMPLICIT`` is {-M, ..., 0} (includes the current node) and
    ``EXPLICIT`` is {-M, ..., -1}.
    """

    IMPLICIT = "implicit"
    EXPLICIT = "explicit"

    def nodes(self, M: int) -> list[int]:
        if self is Lattice.IMPLICIT:
            return list(range(-M, 1))
        return list(range(-M, 0))


# ---------------------------------------------------------------------------
# exact polynomial helpers (coefficients in ascending powers)
# ---------------------------------------------------------------------------

def _poly_mul(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _scaled_basis(k: int, nodes: Sequence[int]) -> list[Fraction]:
    """Ascending coefficients in u of prod_{i != k} (u - 1 - i) / (k - i)."""
    poly = [Fraction(1)]
    for i in nodes:
        if i == k:
            continue
        d = k - i
        poly = _poly_mul(poly, [Fraction(-1 - i, d), Fraction(1, d)])
    return poly


def lagrange_basis_integral(k: int, lattice: Lattice | str, M: int) -> Fraction:
    """Integral over u in [0, 1] of the unit-mesh Lagrange basis polynomial for node ``k``.

    The product of linear factors is expanded exactly and integrated with
    the monomial rule ``u**n -> 1/(n+1)``.
    """
    lattice = Lattice(lattice)
    if M < 0:
        raise ValueError(f"step count must be non-negative, got {M}")
    nodes = lattice.nodes(M)
    if k not in nodes:
        raise ValueError(f"node {k} is not in the {lattice.value} lattice for M={M} (nodes {nodes})")
    poly = _scaled_basis(k, nodes)
    return sum((c / (n + 1) for n, c in enumerate(poly)), Fraction(0))


def _basis_derivative_at_one(k: int, nodes: Sequence[int]) -> Fraction:
    poly = _scaled_basis(k, nodes)
    return sum((n * c for n, c in enumerate(poly) if n > 0), Fraction(0))


# ---------------------------------------------------------------------------
# schemes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scheme:
    """An M-step linear multistep method with exact rational coefficients."""

    family: Family
    M: int
    alpha: tuple[Fraction, ...]
    beta: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(Fraction(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(Fraction(b) for b in self.beta))
        if len(self.alpha) != len(self.beta) or len(self.alpha) < max(self.M + 1, 2):
            raise ValueError(
                f"alpha and beta need equal length >= max(M+1, 2), "
                f"got {len(self.alpha)} and {len(self.beta)} for M={self.M}"
            )
        if self.alpha[0] == 0:
            raise ValueError("alpha_0 must be nonzero")
        if all(b == 0 for b in self.beta):
            raise ValueError("at least one beta coefficient must be nonzero")

    @property
    def name(self) -> str:
        return f"{self.family.value}-{self.M}"

    @property
    def span(self) -> int:
        """Number of mesh intervals covered by the stencil.

        Equal to ``M`` except for AM-0, which still couples x_n and x_{n-1}.
        """
        return len(self.alpha) - 1

    @property
    def m0(self) -> int:
        """Smallest index with a nonzero beta."""
        return next(m for m, b in enumerate(self.beta) if b != 0)

    @property
    def M0(self) -> int:
        """Largest index with a nonzero beta."""
        return max(m for m, b in enumerate(self.beta) if b != 0)

    @property
    def reduced_beta(self) -> tuple[Fraction, ...]:
        return self.beta[self.m0 : self.M0 + 1]

    @property
    def explicit(self) -> bool:
        return self.beta[0] == 0

    def alpha_float(self) -> list[float]:
        return [float(a) for a in self.alpha]

    def beta_float(self) -> list[float]:
        return [float(b) for b in self.beta]

    def scaled(self, c) -> "Scheme":
        """Same method with (alpha, beta) multiplied by the nonzero constant ``c``."""
        c = Fraction(c)
        if c == 0:
            raise ValueError("scaling constant must be nonzero")
        return Scheme(
            self.family, self.M, tuple(a * c for a in self.alpha), tuple(b * c for b in self.beta)
        )

    def to_json(self) -> str:
        return json.dumps(scheme_to_dict(self))


def _check_M(M: int, lo: int, family: str) -> None:
    if not isinstance(M, int) or isinstance(M, bool):
        raise TypeError(f"step count must be an int, got {type(M).__name__}")
    if not lo <= M <= MAX_STEPS:
        raise ValueError(f"{family} step count must lie in [{lo}, {MAX_STEPS}], got {M}")


def ab_scheme(M: int) -> Scheme:
    """Adams-Bashforth with M steps (explicit, beta_0 = 0)."""
    _check_M(M, 1, "AB")
    alpha = [Fraction(1), Fraction(-1)] + [Fraction(0)] * (M - 1)
    beta = [Fraction(0)] + [lagrange_basis_integral(-m, Lattice.EXPLICIT, M) for m in range(1, M + 1)]
    return Scheme(Family.AB, M, tuple(alpha), tuple(beta))


def am_scheme(M: int) -> Scheme:
    """Adams-Moulton with M steps; M = 0 is backward Euler."""
    _check_M(M, 0, "AM")
    span = max(M, 1)
    alpha = [Fraction(1), Fraction(-1)] + [Fraction(0)] * (span - 1)
    beta = [lagrange_basis_integral(-m, Lattice.IMPLICIT, M) for m in range(M + 1)]
    beta += [Fraction(0)] * (span + 1 - len(beta))
    return Scheme(Family.AM, M, tuple(alpha), tuple(beta))


def bdf_scheme(M: int) -> Scheme:
    """Backward differentiation formula with M steps, normalized to beta_0 = 1."""
    _check_M(M, 1, "BDF")
    nodes = Lattice.IMPLICIT.nodes(M)
    # d/dt of the basis at t_n is (1/h) * d/du at u = 1, so the unit-mesh
    # derivative weights are alpha directly with beta_0 = 1.
    alpha = [_basis_derivative_at_one(-m, nodes) for m in range(M + 1)]
    beta = [Fraction(1)] + [Fraction(0)] * M
    return Scheme(Family.BDF, M, tuple(alpha), tuple(beta))


def make_scheme(family: Family | str, M: int) -> Scheme:
    family = Family.parse(family) if isinstance(family, str) else family
    return {Family.AB: ab_scheme, Family.AM: am_scheme, Family.BDF: bdf_scheme}[family](M)


def catalogue(max_steps: int = MAX_STEPS) -> list[Scheme]:
    """AB-1..max, AM-0..max and BDF-1..max."""
    out = [ab_scheme(M) for M in range(1, max_steps + 1)]
    out += [am_scheme(M) for M in range(0, max_steps + 1)]
    out += [bdf_scheme(M) for M in range(1, max_steps + 1)]
    return out


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def parse_rational(s: str) -> Fraction:
    num, _, den = s.partition("/")
    return Fraction(int(num), int(den) if den else 1)


def scheme_to_dict(s: Scheme) -> dict:
    return {
        "family": s.family.value,
        "M": s.M,
        "alpha": [format_rational(a) for a in s.alpha],
        "beta": [format_rational(b) for b in s.beta],
    }


def scheme_from_dict(d: dict) -> Scheme:
    alpha = tuple(parse_rational(a) for a in d["alpha"])
    beta = tuple(parse_rational(b) for b in d["beta"])
    return Scheme(Family.parse(d["family"]), int(d["M"]), alpha, beta)
