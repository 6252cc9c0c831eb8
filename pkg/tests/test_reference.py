import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lmm_discover.analysis import consistency_report
from lmm_discover.reference import (
    GridFunction,
    ReferenceConvergenceError,
    constant_system,
    cubic_2d,
    exact_dynamics_on_grid,
    get_system,
    grid_from_csv,
    grid_to_csv,
    integrate_reference,
    linear_scalar,
    rk4_grid,
    rotation_2d,
    steps_between,
    truncation_on_grid,
)
from lmm_discover.schemes import ab_scheme, am_scheme, bdf_scheme, catalogue


def test_cubic_dynamics_examples():
    sys = cubic_2d()
    assert sys.dim == 2 and sys.x0 == (2.0, 0.0)
    assert np.allclose(sys([2.0, 0.0]), [-0.8, -16.0], rtol=0, atol=1e-15)
    assert np.array_equal(sys([0.0, 0.0]), [0.0, 0.0])
    assert np.allclose(sys([1.0, 1.0]), [1.9, -2.1], rtol=0, atol=1e-15)


def test_point_kernel_matches_vectorized():
    sys = cubic_2d()
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(20, 2)):
        assert np.allclose(sys.f_point(list(x)), sys(x), rtol=1e-15, atol=0)


def test_constant_system_is_exact():
    x = integrate_reference(constant_system(3, (1.0, -2.0, 0.5)), 0.0, 1.0, 0.1, refine=3)
    assert np.array_equal(x.values, np.tile([1.0, -2.0, 0.5], (11, 1)))


def test_linear_system_reaches_e():
    x = integrate_reference(linear_scalar(), 0.0, 1.0, 0.01)
    assert abs(x.values[-1, 0] - math.e) < 1e-10


def test_rotation_closed_form():
    sys = rotation_2d()
    x = integrate_reference(sys, 0.0, 2.0, 0.05)
    assert np.max(np.abs(x.values - sys.solution(x.t))) < 1e-10


def test_cubic_reference_self_consistent():
    sys = cubic_2d()
    a = rk4_grid(sys, 0.0, 0.2, 0.01, 100)
    b = rk4_grid(sys, 0.0, 0.2, 0.01, 200)
    assert np.max(np.abs(a.values - b.values)) <= 1e-10 * np.max(np.abs(b.values))
    assert np.array_equal(integrate_reference(sys, 0.0, 0.2, 0.01).values, b.values)


def test_reference_rejects_unconverged_refinement():
    with pytest.raises(ReferenceConvergenceError, match="refine=1 and refine=2 differ"):
        integrate_reference(cubic_2d(), 0.0, 0.2, 0.05, refine=1)


def test_rk4_order_four():
    sys = cubic_2d()
    truth = rk4_grid(sys, 0.0, 0.2, 0.02, 400).values
    refines = [1, 2, 4]
    errs = [np.max(np.abs(rk4_grid(sys, 0.0, 0.2, 0.02, r).values - truth)) for r in refines]
    dts = [0.02 / r for r in refines]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 4) <= 0.2


def test_generic_array_path_matches_point_kernel():
    sys = cubic_2d()
    from dataclasses import replace
    no_kernel = replace(sys, f_point=None)
    a = rk4_grid(sys, 0.0, 0.1, 0.01, 5).values
    b = rk4_grid(no_kernel, 0.0, 0.1, 0.01, 5).values
    assert np.allclose(a, b, rtol=1e-14, atol=1e-14)


def test_exact_dynamics_against_central_differences():
    sys = cubic_2d()
    errs = []
    for h in (0.004, 0.002):
        x = integrate_reference(sys, 0.0, 0.2, h)
        f = exact_dynamics_on_grid(sys, x)
        fd = (x.values[2:] - x.values[:-2]) / (2 * h)
        errs.append(np.max(np.abs(fd - f.values[1:-1])))
    assert 3.6 < errs[0] / errs[1] < 4.4


def test_exact_dynamics_dimension_check():
    x = GridFunction(np.zeros((3, 1)), 0.0, 0.1)
    with pytest.raises(ValueError, match="dimension"):
        exact_dynamics_on_grid(cubic_2d(), x)


def test_get_system():
    assert get_system("linear").dim == 1
    with pytest.raises(ValueError, match="unknown system"):
        get_system("lorenz")


# --- grid -------------------------------------------------------------------

def test_grid_function_basics():
    g = GridFunction(np.arange(5.0), 1.0, 0.5)
    assert g.N == 4 and g.dim == 1
    assert np.allclose(g.t, [1.0, 1.5, 2.0, 2.5, 3.0])
    assert g.slice(2).N == 2
    with pytest.raises(ValueError):
        g.slice(5)
    with pytest.raises(ValueError):
        GridFunction(np.zeros(3), 0.0, 0.0)
    with pytest.raises(ValueError):
        g.values[0] = 1.0


def test_steps_between():
    assert steps_between(0.0, 0.2, 0.0025) == 80
    assert steps_between(0.0, 37.5, 0.01) == 3750
    with pytest.raises(ValueError, match="not a positive integer"):
        steps_between(0.0, 0.2, 0.03)
    with pytest.raises(ValueError):
        steps_between(0.0, 1.0, -0.1)


# --- truncation -------------------------------------------------------------

def test_truncation_vanishes_on_linear_state():
    t = 0.3 + 0.05 * np.arange(30)
    x = GridFunction(np.stack([2.0 - 3.0 * t, 0.5 * t], axis=1), 0.3, 0.05)
    f = GridFunction(np.tile([-3.0, 0.5], (30, 1)), 0.3, 0.05)
    for s in [ab_scheme(4), am_scheme(3), bdf_scheme(5)]:
        assert np.max(np.abs(truncation_on_grid(s, x, f))) < 1e-12


def test_truncation_rows_and_errors():
    x = GridFunction(np.zeros((6, 1)), 0.0, 0.1)
    assert truncation_on_grid(ab_scheme(3), x, x).shape == (3, 1)
    with pytest.raises(ValueError, match="N=5"):
        truncation_on_grid(bdf_scheme(6), x, x)
    with pytest.raises(ValueError, match="same grid"):
        truncation_on_grid(ab_scheme(1), x, GridFunction(np.zeros((6, 1)), 0.0, 0.2))


def test_ab2_truncation_quarters(cubic_ladder):
    n = [np.max(np.abs(truncation_on_grid(ab_scheme(2), *cubic_ladder[h]))) for h in (0.01, 0.005)]
    assert 3.5 < n[0] / n[1] < 4.5


def test_am1_l1_truncation_is_first_order(cubic_ladder):
    hs = (0.02, 0.01, 0.005, 0.0025)
    l1 = [np.sum(np.max(np.abs(truncation_on_grid(am_scheme(1), *cubic_ladder[h])), axis=1)) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(l1), 1)[0]
    assert abs(slope - 1) < 0.1


@pytest.fixture(scope="module")
def unit_interval_refs():
    sys = cubic_2d()
    out = {}
    for h in (0.02, 0.01, 0.005):
        x = integrate_reference(sys, 0.0, 1.0, h)
        out[h] = (x, exact_dynamics_on_grid(sys, x))
    return out


def _truncation_slopes(refs, schemes):
    out = {}
    for s in schemes:
        norms = [np.max(np.abs(truncation_on_grid(s, *refs[h]))) for h in refs]
        out[s.name] = (np.polyfit(np.log(list(refs)), np.log(norms), 1)[0], consistency_report(s).order)
    return out


def test_truncation_order_matches_consistency_catalogue(unit_interval_refs):
    """Every catalogued scheme, cubic_2d on [0, 1], h in {0.02, 0.01, 0.005}, slope within 0.3."""
    slopes = _truncation_slopes(unit_interval_refs, catalogue())
    bad = {k: (round(v, 2), p) for k, (v, p) in slopes.items() if abs(v - p) > 0.3}
    assert not bad, f"slope, order off by more than 0.3: {bad}"


def test_truncation_order_matches_consistency_up_to_six(unit_interval_refs):
    schemes = [s for s in catalogue() if consistency_report(s).order <= 6]
    slopes = _truncation_slopes(unit_interval_refs, schemes)
    for name, (slope, p) in slopes.items():
        assert abs(slope - p) <= 0.3, name


# --- CSV --------------------------------------------------------------------

def test_csv_round_trip_reference():
    x = integrate_reference(cubic_2d(), 0.0, 0.2, 0.01)
    text = grid_to_csv(x)
    assert text.splitlines()[1] == "t,x_1,x_2"
    y = grid_from_csv(text)
    assert np.array_equal(x.values, y.values) and y.h == x.h and y.t0 == x.t0


def test_csv_skips_comments_and_validates():
    g = grid_from_csv("# note\nt,x_1\n0,1\n0.5,2\n1,3\n")
    assert g.h == 0.5 and g.N == 2
    with pytest.raises(ValueError, match="equidistant"):
        grid_from_csv("t,x_1\n0,1\n0.5,2\n1.7,3\n")
    with pytest.raises(ValueError, match="header"):
        grid_from_csv("s,x_1\n0,1\n1,2\n")


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 3)),
           elements=st.floats(-1e6, 1e6, allow_nan=False)),
    st.sampled_from([0.1, 0.01, 0.0025, 0.5, 1.0 / 3.0]),
    st.sampled_from([0.0, 1.0, -2.5]),
)
def test_csv_round_trip_random(values, h, t0):
    g = GridFunction(values, t0, h)
    back = grid_from_csv(grid_to_csv(g))
    assert np.array_equal(back.values, g.values)
    assert np.array_equal(back.t, g.t)
