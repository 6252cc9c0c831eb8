import math
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from lmm_discover.schemes import (
    MAX_STEPS,
    Family,
    Lattice,
    Scheme,
    ab_scheme,
    am_scheme,
    bdf_scheme,
    catalogue,
    format_rational,
    lagrange_basis_integral,
    make_scheme,
    parse_rational,
    scheme_from_dict,
    scheme_to_dict,
)

F = Fraction
u = sp.Symbol("u")


# --- independent oracles -----------------------------------------------------

def sympy_basis_integral(k, nodes):
    expr = sp.Integer(1)
    for i in nodes:
        if i != k:
            expr *= (u - 1 - i) / sp.Integer(k - i)
    return sp.Rational(sp.integrate(sp.expand(expr), (u, 0, 1)))


def sympy_constants(alpha, beta, count):
    out = [sum(alpha)]
    for m in range(1, count):
        a = sum(sp.Integer(k) ** m * ak for k, ak in enumerate(alpha))
        b = sum((sp.Integer(k) ** (m - 1) if (k, m - 1) != (0, 0) else 1) * bk for k, bk in enumerate(beta))
        out.append((-1) ** m * (a / sp.factorial(m) + b / sp.factorial(m - 1)))
    return out


def order_condition_oracle(family, M):
    """Coefficients from solving C_0 = ... = C_q = 0 as an exact linear system."""
    if family == "AB":
        bs = sp.symbols(f"b1:{M + 1}")
        alpha = [1, -1] + [0] * (M - 1)
        beta = [0, *bs]
        eqs = sympy_constants(alpha, beta, M + 1)[1:]
        sol = sp.solve(eqs, bs, dict=True)[0]
        return alpha, [0] + [sol[b] for b in bs]
    if family == "AM":
        bs = sp.symbols(f"b0:{M + 1}")
        span = max(M, 1)
        alpha = [1, -1] + [0] * (span - 1)
        beta = list(bs) + [0] * (span + 1 - len(bs))
        eqs = sympy_constants(alpha, beta, M + 2)[1:]
        sol = sp.solve(eqs, bs, dict=True)[0]
        return alpha, [sol[b] for b in bs] + [0] * (span + 1 - len(bs))
    a_s = sp.symbols(f"a0:{M + 1}")
    beta = [1] + [0] * M
    eqs = sympy_constants(list(a_s), beta, M + 1)
    sol = sp.solve(eqs, a_s, dict=True)[0]
    return [sol[a] for a in a_s], beta


def as_fracs(seq):
    return [F(int(sp.numer(v)), int(sp.denom(v))) for v in map(sp.Rational, seq)]


# --- lagrange_basis_integral -------------------------------------------------

@pytest.mark.parametrize(
    "k,lattice,M,expected",
    [
        (0, "implicit", 0, F(1)),
        (0, "implicit", 2, F(5, 12)),
        (-1, "implicit", 2, F(8, 12)),
        (-1, "explicit", 2, F(3, 2)),
        (-2, "explicit", 2, F(-1, 2)),
    ],
)
def test_basis_integral_examples(k, lattice, M, expected):
    assert lagrange_basis_integral(k, lattice, M) == expected


@pytest.mark.parametrize("M", range(0, 7))
def test_basis_integral_matches_sympy(M):
    for lattice in Lattice:
        nodes = lattice.nodes(M)
        for k in nodes:
            assert lagrange_basis_integral(k, lattice, M) == sympy_basis_integral(k, nodes)


def test_basis_integral_rejects_node_outside_lattice():
    with pytest.raises(ValueError, match="node 0"):
        lagrange_basis_integral(0, Lattice.EXPLICIT, 3)
    with pytest.raises(ValueError):
        lagrange_basis_integral(-4, Lattice.IMPLICIT, 3)


# --- generators --------------------------------------------------------------

def test_named_examples():
    assert ab_scheme(1).alpha == (1, -1) and ab_scheme(1).beta == (0, 1)
    assert ab_scheme(2).beta == (0, F(3, 2), F(-1, 2))
    assert am_scheme(1).beta == (F(1, 2), F(1, 2))
    assert am_scheme(2).beta == (F(5, 12), F(8, 12), F(-1, 12))
    assert bdf_scheme(1).alpha == (1, -1) and bdf_scheme(1).beta == (1, 0)
    assert bdf_scheme(2).alpha == (F(3, 2), -2, F(1, 2)) and bdf_scheme(2).beta == (1, 0, 0)
    # backward Euler two ways
    assert am_scheme(0).alpha == bdf_scheme(1).alpha and am_scheme(0).beta == bdf_scheme(1).beta
    assert am_scheme(0).reduced_beta == (1,)


@pytest.mark.parametrize("family", ["AB", "AM", "BDF"])
@pytest.mark.parametrize("M", range(1, 7))
def test_coefficients_match_order_condition_oracle(family, M):
    s = make_scheme(family, M)
    alpha, beta = order_condition_oracle(family, M)
    assert list(s.alpha) == as_fracs(alpha)
    assert list(s.beta) == as_fracs(beta)


def test_am0_matches_oracle():
    alpha, beta = order_condition_oracle("AM", 0)
    s = am_scheme(0)
    assert list(s.alpha) == as_fracs(alpha) and list(s.beta) == as_fracs(beta)


@pytest.mark.parametrize("s", catalogue(), ids=lambda s: s.name)
def test_scheme_invariants(s):
    assert s.alpha[0] != 0
    assert sum(s.alpha) == 0
    c1 = sum(k * a for k, a in enumerate(s.alpha)) + sum(s.beta)
    assert c1 == 0  # rho'(1) = sigma(1)
    assert s.beta[s.m0] != 0 and s.beta[s.M0] != 0
    assert all(b == 0 for m, b in enumerate(s.beta) if m < s.m0 or m > s.M0)
    for q in s.alpha + s.beta:
        assert q.denominator > 0 and math.gcd(q.numerator, q.denominator) == 1
    if s.family is Family.AB:
        assert s.explicit and s.m0 == 1 and sum(s.beta) == 1
    elif s.family is Family.AM:
        assert not s.explicit and s.m0 == 0 and sum(s.beta) == 1
    else:
        assert s.beta[0] == 1 and all(b == 0 for b in s.beta[1:])
        assert s.reduced_beta == (1,)


@pytest.mark.parametrize("M", range(2, MAX_STEPS + 1))
def test_adams_moulton_coefficient_lemma(M):
    b = am_scheme(M).beta
    assert b[1] > b[0] > 0
    for m in range(1, M):
        assert (b[m + 1] > 0) != (b[m] > 0) and b[m + 1] != 0
    assert b[0] > abs(b[M])


@pytest.mark.parametrize("M", range(2, MAX_STEPS + 1))
def test_adams_bashforth_coefficient_lemma(M):
    b = ab_scheme(M).beta
    assert b[0] == 0
    assert b[1] > abs(b[M])


def test_generation_is_deterministic():
    assert catalogue() == catalogue()
    assert [s.beta for s in catalogue()] == [make_scheme(s.family, s.M).beta for s in catalogue()]


def test_catalogue_contents():
    names = [s.name for s in catalogue()]
    assert len(names) == 61
    assert names[0] == "AB-1" and "AM-0" in names and names[-1] == "BDF-20"


# --- errors ------------------------------------------------------------------

@pytest.mark.parametrize("fn,M", [(ab_scheme, 0), (ab_scheme, 21), (am_scheme, -1), (am_scheme, 21),
                                  (bdf_scheme, 0), (bdf_scheme, 21)])
def test_step_count_out_of_range(fn, M):
    with pytest.raises(ValueError, match="step count"):
        fn(M)


def test_step_count_type():
    with pytest.raises(TypeError):
        ab_scheme(2.0)
    with pytest.raises(TypeError):
        bdf_scheme(True)


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown scheme family"):
        make_scheme("RK", 2)


def test_scheme_validation():
    with pytest.raises(ValueError, match="alpha_0"):
        Scheme(Family.AB, 1, (0, 1), (0, 1))
    with pytest.raises(ValueError, match="beta"):
        Scheme(Family.AB, 1, (1, -1), (0, 0))
    with pytest.raises(ValueError, match="equal length"):
        Scheme(Family.AB, 2, (1, -1), (0, 1))


def test_scaled_keeps_ratios():
    s = am_scheme(3).scaled(F(-7, 3))
    assert s.alpha[0] == F(-7, 3)
    assert [b / s.beta[0] for b in s.beta] == [b / am_scheme(3).beta[0] for b in am_scheme(3).beta]
    with pytest.raises(ValueError):
        s.scaled(0)


# --- JSON --------------------------------------------------------------------

@pytest.mark.parametrize("s", catalogue(), ids=lambda s: s.name)
def test_json_round_trip(s):
    d = scheme_to_dict(s)
    assert set(d) == {"family", "M", "alpha", "beta"}
    assert all("/" in v for v in d["alpha"] + d["beta"])
    assert scheme_from_dict(d) == s


def test_json_format_example():
    assert scheme_to_dict(ab_scheme(2)) == {
        "family": "AB", "M": 2, "alpha": ["1/1", "-1/1", "0/1"], "beta": ["0/1", "3/2", "-1/2"],
    }


@given(st.fractions())
def test_rational_text_round_trip(q):
    text = format_rational(q)
    assert parse_rational(text) == q
    num, den = map(int, text.split("/"))
    assert den > 0 and math.gcd(num, den) == 1
