"""Exact rational polynomials and their complex roots.

Root finding runs Aberth-Ehrlich on each square-free factor of the exact
polynomial (so multiplicities come from exact arithmetic, not from float
clustering), falls back to companion-matrix eigenvalues, and certifies
roots of unity exactly by cyclotomic divisibility.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

ABERTH_MAX_ITER = 500
ABERTH_STEP_TOL = 1e-14
CLUSTER_TOL = 1e-6
UNIT_CANDIDATE_TOL = 1e-6
MAX_CYCLOTOMIC_ORDER = 24


class RootFindingError(RuntimeError):
    """Neither Aberth-Ehrlich nor the companion fallback produced acceptable roots."""


# ---------------------------------------------------------------------------
# exact helpers, coefficients highest degree first
# ---------------------------------------------------------------------------

def _trim(c: Sequence[Fraction]) -> list[Fraction]:
    c = list(c)
    while len(c) > 1 and c[0] == 0:
        c.pop(0)
    return c


def _derivative(c: Sequence[Fraction]) -> list[Fraction]:
    n = len(c) - 1
    if n == 0:
        return [Fraction(0)]
    return [a * (n - i) for i, a in enumerate(c[:-1])]


def _divmod(num: Sequence[Fraction], den: Sequence[Fraction]) -> tuple[list[Fraction], list[Fraction]]:
    num, den = _trim(num), _trim(den)
    if den == [0]:
        raise ZeroDivisionError("polynomial division by zero")
    if len(num) < len(den):
        return [Fraction(0)], num
    rem = list(num)
    quot = []
    lead = den[0]
    for i in range(len(num) - len(den) + 1):
        q = rem[i] / lead
        quot.append(q)
        if q:
            for j, d in enumerate(den):
                rem[i + j] -= q * d
    rem = _trim(rem[len(quot):]) if len(quot) < len(rem) else [Fraction(0)]
    return quot, rem


def _monic(c: Sequence[Fraction]) -> list[Fraction]:
    c = _trim(c)
    return [a / c[0] for a in c]


def _gcd(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    a, b = _trim(a), _trim(b)
    while b != [0]:
        _, r = _divmod(a, b)
        a, b = b, r
    return _monic(a)


def _is_zero(c: Sequence[Fraction]) -> bool:
    return all(x == 0 for x in c)


_PRIME = 2_147_483_647


def _squarefree_mod_prime(c: Sequence[Fraction]) -> bool:
    """True if gcd(f, f') is constant modulo a large prime.

    That implies f is square-free over the rationals; False is inconclusive.
    """
    den = math.lcm(*(x.denominator for x in c))
    ints = [int(x * den) % _PRIME for x in c]
    if ints[0] == 0:
        return False
    n = len(ints) - 1
    deriv = [(a * (n - i)) % _PRIME for i, a in enumerate(ints[:-1])]

    def trim(p):
        while p and p[0] == 0:
            p = p[1:]
        return p

    a, b = trim(ints), trim(deriv)
    if len(b) != n:
        return False
    while b:
        inv = pow(b[0], -1, _PRIME)
        r = list(a)
        for i in range(len(a) - len(b) + 1):
            q = r[i] * inv % _PRIME
            if q:
                for j, d in enumerate(b):
                    r[i + j] = (r[i + j] - q * d) % _PRIME
        a, b = b, trim(r[len(a) - len(b) + 1:])
    return len(a) == 1


def squarefree_decomposition(c: Sequence[Fraction]) -> list[tuple[list[Fraction], int]]:
    """Yun's algorithm: monic square-free factors with their multiplicities.

    Only factors of positive degree are returned; the product of
    ``f**i`` equals ``c`` up to the leading coefficient.
    """
    f = _monic(c)
    if len(f) == 1:
        return []
    if _squarefree_mod_prime(f):
        return [(f, 1)]
    out = []
    fp = _derivative(f)
    a = _gcd(f, fp)
    b, _ = _divmod(f, a)
    cc, _ = _divmod(fp, a)
    d = _sub(cc, _derivative(b))
    i = 1
    while len(b) > 1:
        a = _gcd(b, d)
        b, _ = _divmod(b, a)
        if len(a) > 1:
            out.append((a, i))
        cc, _ = _divmod(d, a)
        d = _sub(cc, _derivative(b))
        i += 1
    return out


def _sub(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    n = max(len(a), len(b))
    a = [Fraction(0)] * (n - len(a)) + list(a)
    b = [Fraction(0)] * (n - len(b)) + list(b)
    return _trim([x - y for x, y in zip(a, b)])


@lru_cache(maxsize=None)
def cyclotomic(n: int) -> tuple[int, ...]:
    """Integer coefficients (highest first) of the n-th cyclotomic polynomial."""
    num = [Fraction(1)] + [Fraction(0)] * (n - 1) + [Fraction(-1)]
    for d in range(1, n):
        if n % d == 0:
            num, rem = _divmod(num, [Fraction(x) for x in cyclotomic(d)])
            assert _is_zero(rem)
    return tuple(int(x) for x in num)


def _cyclotomic_multiplicity(c: Sequence[Fraction], q: int) -> int:
    phi = [Fraction(x) for x in cyclotomic(q)]
    mult = 0
    cur = _trim(c)
    while len(cur) >= len(phi):
        quot, rem = _divmod(cur, phi)
        if not _is_zero(rem):
            break
        mult += 1
        cur = quot
    return mult


# ---------------------------------------------------------------------------
# CharPoly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CharPoly:
    """Polynomial with exact rational coefficients, highest degree first."""

    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        c = tuple(Fraction(x) for x in self.coeffs)
        if not c:
            raise ValueError("a polynomial needs at least one coefficient")
        if c[0] == 0 and len(c) > 1:
            raise ValueError("leading coefficient must be nonzero")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        """Horner evaluation; exact for Fraction/int input, float/complex otherwise."""
        if isinstance(x, (int, Fraction)):
            acc = Fraction(0)
            for c in self.coeffs:
                acc = acc * x + c
            return acc
        acc = 0j if isinstance(x, complex) else 0.0
        for c in self.float_coeffs():
            acc = acc * x + c
        return acc

    def float_coeffs(self) -> list[float]:
        return [float(c) for c in self.coeffs]

    def magnitude_at(self, x) -> float:
        """sum |c_i| |x|^i, the roundoff scale of evaluating at ``x``."""
        r = abs(x)
        acc = 0.0
        for c in self.coeffs:
            acc = acc * r + abs(float(c))
        return acc

    def derivative(self) -> "CharPoly":
        return CharPoly(tuple(_trim(_derivative(self.coeffs))))

    def reversed(self) -> "CharPoly":
        """r**deg * p(1/r); requires a nonzero constant term."""
        if self.coeffs[-1] == 0:
            raise ValueError("reversal needs a nonzero constant coefficient")
        return CharPoly(tuple(reversed(self.coeffs)))

    def __str__(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            p = self.degree - i
            if c == 0:
                continue
            mono = "" if p == 0 else ("z" if p == 1 else f"z^{p}")
            terms.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(terms) or "0"


# ---------------------------------------------------------------------------
# roots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Root:
    value: complex
    multiplicity: int
    unit_certified: bool = False

    @property
    def modulus(self) -> float:
        return 1.0 if self.unit_certified else abs(self.value)


@dataclass(frozen=True)
class RootSet:
    roots: tuple[Root, ...]
    residual_bound: float
    relative_residual: float = 0.0
    method: str = "aberth"

    @property
    def total_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    def max_modulus(self) -> float:
        return max((r.modulus for r in self.roots), default=0.0)

    def largest(self) -> Root | None:
        return max(self.roots, key=lambda r: r.modulus, default=None)


def _horner_with_derivative(a: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.full_like(z, a[0])
    dp = np.zeros_like(z)
    for c in a[1:]:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def aberth_ehrlich(
    coeffs: Sequence[float],
    max_iter: int = ABERTH_MAX_ITER,
    step_tol: float = ABERTH_STEP_TOL,
) -> tuple[np.ndarray, bool, int]:
    """Simultaneous Aberth-Ehrlich iteration for all roots.

    A root counts as settled once its correction is below ``step_tol``
    relative to ``max(1, |z|)`` or its residual is at the rounding level of
    Horner evaluation.  Returns ``(roots, converged, iterations)``.
    """
    a = np.asarray(coeffs, dtype=complex)
    a = a / a[0]
    n = len(a) - 1
    if n == 0:
        return np.empty(0, dtype=complex), True, 0
    absa = np.abs(a)
    # Fujiwara-style radius for the starting circle
    radius = 2.0 * max(abs(a[k]) ** (1.0 / k) for k in range(1, n + 1))
    radius = max(radius, 1e-3)
    ang = 2.0 * np.pi * np.arange(n) / n + 0.4
    z = 0.5 * radius * np.exp(1j * ang)
    eps = np.finfo(float).eps
    for it in range(1, max_iter + 1):
        p, dp = _horner_with_derivative(a, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            w = ratio / (1.0 - ratio * s)
        w = np.where(np.isfinite(w), w, 0.0)
        z = z - w
        scale = np.maximum(1.0, np.abs(z))
        p_new, _ = _horner_with_derivative(a, z)
        noise = 4 * (n + 1) * eps * np.polyval(absa, np.abs(z)).real
        settled = (np.abs(w) <= step_tol * scale) | (np.abs(p_new) <= noise)
        if settled.all() and np.all(np.isfinite(z)):
            return z, True, it
    return z, False, max_iter


def companion_eigenvalues(coeffs: Sequence[float]) -> np.ndarray:
    a = np.asarray(coeffs, dtype=float)
    a = a / a[0]
    n = len(a) - 1
    if n == 0:
        return np.empty(0, dtype=complex)
    C = np.zeros((n, n))
    C[0, :] = -a[1:]
    C[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(C).astype(complex)


def _newton_polish(a: np.ndarray, z: np.ndarray, steps: int = 3) -> np.ndarray:
    for _ in range(steps):
        p, dp = _horner_with_derivative(a, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = p / dp
        z = z - np.where(np.isfinite(w), w, 0.0)
    return z


def _simple_roots(factor: Sequence[Fraction]) -> tuple[np.ndarray, str]:
    fc = [float(x) for x in factor]
    if len(fc) == 2:
        return np.array([complex(-factor[1] / factor[0])]), "exact"
    z, ok, _ = aberth_ehrlich(fc)
    if ok:
        return z, "aberth"
    z = _newton_polish(np.asarray(fc, dtype=complex) / fc[0], companion_eigenvalues(fc))
    return z, "companion"


def _certify_unit(root: complex, exact: Sequence[Fraction]) -> tuple[bool, complex]:
    """Exact check that ``root`` is a root of unity of ``exact`` (order <= 24)."""
    if abs(abs(root) - 1.0) > UNIT_CANDIDATE_TOL:
        return False, root
    turn = Fraction(cmath.phase(root) / (2 * math.pi)).limit_denominator(MAX_CYCLOTOMIC_ORDER) % 1
    q = turn.denominator
    if abs(cmath.exp(2j * math.pi * float(turn)) - root) > UNIT_CANDIDATE_TOL:
        return False, root
    if _cyclotomic_multiplicity(exact, q) == 0:
        return False, root
    value = cmath.exp(2j * math.pi * float(turn))
    if q == 1:
        value = 1 + 0j
    elif q == 2:
        value = -1 + 0j
    return True, value


def _merge_clusters(p: CharPoly, roots: list[Root]) -> list[Root]:
    """Merge roots closer than CLUSTER_TOL if derivatives confirm the multiplicity."""
    merged: list[Root] = []
    used = [False] * len(roots)
    derivs = [p]
    for _ in range(p.degree):
        derivs.append(derivs[-1].derivative())
    for i, r in enumerate(roots):
        if used[i]:
            continue
        group = [r]
        for j in range(i + 1, len(roots)):
            if not used[j] and abs(roots[j].value - r.value) < CLUSTER_TOL:
                group.append(roots[j])
                used[j] = True
        if len(group) == 1:
            merged.append(r)
            continue
        m = sum(g.multiplicity for g in group)
        centre = sum(g.value * g.multiplicity for g in group) / m
        ok = all(
            abs(derivs[k](centre)) <= 1e-6 * max(1.0, derivs[k].magnitude_at(centre))
            for k in range(m)
        )
        if ok:
            merged.append(Root(centre, m, any(g.unit_certified for g in group)))
        else:
            merged.extend(group)
    return merged


def _relative_residual(p: CharPoly, z: complex) -> float:
    val = abs(p(z))
    return 0.0 if val == 0 else val / p.magnitude_at(z)


def poly_roots(p: CharPoly) -> RootSet:
    """All complex roots of ``p`` with multiplicities.

    Raises
    ------
    RootFindingError
        If the roots of some square-free factor cannot be found to
        rounding-level backward error by either method.
    """
    if p.degree == 0:
        return RootSet((), 0.0, 0.0, "none")
    roots: list[Root] = []
    methods = set()
    # exact roots at zero are split off first; the backward-error test below
    # is meaningless for a factor whose constant coefficient vanishes
    coeffs = list(p.coeffs)
    zeros = 0
    while coeffs[-1] == 0:
        coeffs.pop()
        zeros += 1
    if zeros:
        roots.append(Root(0j, zeros))
        methods.add("exact")
    for factor, mult in squarefree_decomposition(coeffs):
        values, method = _simple_roots(factor)
        methods.add(method)
        fpoly = CharPoly(tuple(factor))
        rel = max(abs(fpoly(complex(v))) / max(fpoly.magnitude_at(v), 1e-300) for v in values)
        if not np.all(np.isfinite(values)) or rel > 1e-10:
            raise RootFindingError(
                f"root finding failed for factor of degree {fpoly.degree} (backward error {rel:.2e})"
            )
        for v in values:
            certified, v = _certify_unit(complex(v), p.coeffs)
            roots.append(Root(complex(v), mult, certified))
    roots = _merge_clusters(p, roots)
    residual = max(abs(p(r.value)) for r in roots)
    relative = max(_relative_residual(p, r.value) for r in roots)
    method = "companion" if "companion" in methods else ("aberth" if "aberth" in methods else "exact")
    roots.sort(key=lambda r: (-r.modulus, r.value.real, r.value.imag))
    return RootSet(tuple(roots), float(residual), float(relative), method)
