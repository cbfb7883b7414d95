import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import plf_integral, quad_power_integral
from sharpmax.funcrep import (
    GeneratorParams,
    PiecewiseLinearFn,
    discrete_convexity,
    evaluate,
    integral,
    is_peak_shaped,
    is_unimodal,
    lp_norm_p,
    make_plf,
    random_peak_shaped,
    random_unimodal,
    truncated_power,
)


def test_tent_construction(tent):
    assert tent.support == (-1.0, 1.0)
    assert tent.peak_location == 0.0
    assert tent.max_value == 1.0


@pytest.mark.parametrize(
    "xs, ys, k",
    [
        ([-1.0, 0.5, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0], 1),  # unsorted
        ([-1.0, 0.0, 1.0], [0.0, -1.0, 0.0], 1),  # negative value
        ([-1.0, 0.0, 1.0], [0.5, 1.0, 0.0], 1),  # nonzero endpoint
        ([-1.0, -1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 2.0, 3.0, 0.0], 2),  # two repeats
        ([-1.0, -0.5, -0.5, 1.0], [0.0, 1.0, 2.0, 0.0], 3),  # jump away from the peak
        ([-1.0, 1.0], [0.0, 0.0], 0),  # too short
    ],
)
def test_make_plf_rejects(xs, ys, k):
    with pytest.raises(ValueError):
        make_plf(xs, ys, k)


@pytest.mark.parametrize("k", [1, 2])
def test_peak_jump(k):
    f = make_plf([-1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 2.0, 0.0], k)
    assert f(0.0, side="left") == 1.0
    assert f(0.0, side="right") == 2.0
    assert f.peak_limits == (1.0, 2.0)
    assert evaluate(f, -0.5) == pytest.approx(0.5)
    assert evaluate(f, 0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("x, expected", [(0.5, 0.5), (3.0, 0.0), (-0.25, 0.75), (-1.0, 0.0), (1.0, 0.0)])
def test_eval_tent(tent, x, expected):
    assert evaluate(tent, x) == pytest.approx(expected, abs=1e-15)


def test_eval_vectorized(tent):
    np.testing.assert_allclose(tent(np.array([-2.0, -0.5, 0.0, 0.25])), [0.0, 0.5, 1.0, 0.75])


@pytest.mark.parametrize("a, b, expected", [(-1.0, 1.0, 1.0), (0.0, 0.5, 0.375), (1.0, 3.0, 0.0), (-5.0, 5.0, 1.0), (-0.5, 0.5, 0.75)])
def test_integral_tent(tent, a, b, expected):
    assert integral(tent, a, b) == pytest.approx(expected, abs=1e-15)


def test_integral_rejects_reversed(tent):
    with pytest.raises(ValueError):
        integral(tent, 1.0, 0.0)


@pytest.mark.parametrize("p, expected", [(1, 1.0), (2, 2.0 / 3.0), (3, 0.5)])
def test_lp_norm_tent(tent, p, expected):
    assert lp_norm_p(tent, p).value == pytest.approx(expected, rel=1e-14)


def test_lp_norm_rejects_small_p(tent):
    with pytest.raises(ValueError):
        lp_norm_p(tent, 0.5)


def test_norm_property(tent):
    nv = lp_norm_p(tent, 2)
    assert nv.norm == pytest.approx(math.sqrt(2.0 / 3.0))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_lp_norm_matches_quadrature(p):
    for seed in range(100):
        f = random_peak_shaped(seed) if seed % 2 else random_unimodal(seed)
        ref = quad_power_integral(f.breakpoints, f.values, p)
        assert lp_norm_p(f, p).value == pytest.approx(ref, rel=1e-9)


def test_lp_norm_p1_is_mass():
    for seed in range(20):
        f = random_peak_shaped(seed)
        assert lp_norm_p(f, 1).value == pytest.approx(integral(f, -1e3, 1e3), rel=1e-12)


def test_peak_shape_examples(tent, ramp_indicator):
    rep = is_peak_shaped(tent)
    assert rep.is_peak_shaped and rep.peak_location == 0.0
    assert not is_peak_shaped(ramp_indicator).is_peak_shaped


def test_discrete_convexity_sign():
    xs = np.array([0.0, 1.0, 2.0, 3.0])
    assert discrete_convexity(xs, xs**2) == 0.0
    assert discrete_convexity(xs, -(xs**2)) < 0


def test_generator_determinism_and_class():
    f1, f2 = random_peak_shaped(1), random_peak_shaped(1)
    assert f1 == f2
    assert random_peak_shaped(2) != f1
    for seed in range(300):
        assert is_peak_shaped(random_peak_shaped(seed), 0.0).is_peak_shaped
    assert lp_norm_p(random_peak_shaped(2), 2).value > 0


def test_generator_rejects_degenerate_params():
    with pytest.raises(ValueError):
        GeneratorParams(segments=(0, 0))
    with pytest.raises(ValueError):
        GeneratorParams(decay=(0.5, 1.5))


def test_generator_jumps_occur():
    jumps = [random_peak_shaped(s) for s in range(40)]
    assert any(f.peak_limits[0] != f.peak_limits[1] for f in jumps)


def test_random_unimodal_is_unimodal():
    for seed in range(50):
        assert is_unimodal(random_unimodal(seed))


def test_truncated_power_examples():
    f = truncated_power(2, 10, 64)
    assert f(1.0) == 1.0
    assert is_peak_shaped(f, 0.0).is_peak_shaped
    assert f(0.0) == 10.0
    assert f(-0.25) == f(0.25)


def test_truncated_power_rejects():
    with pytest.raises(ValueError):
        truncated_power(1.0, 10, 64)
    with pytest.raises(ValueError):
        truncated_power(2, 0.5, 64)
    with pytest.raises(ValueError):
        truncated_power(2, 10, 8)


def test_json_round_trip():
    f = random_peak_shaped(5)
    g = PiecewiseLinearFn.from_json(f.to_json())
    assert g == f
    np.testing.assert_array_equal(g.breakpoints, f.breakpoints)


def test_immutable(tent):
    with pytest.raises(AttributeError):
        tent.peak_index = 0
    with pytest.raises(ValueError):
        tent.values[1] = 2.0


def test_scaled(tent):
    assert lp_norm_p(tent.scaled(3.0), 2).value == pytest.approx(9 * 2.0 / 3.0)


seeds = st.integers(min_value=0, max_value=10_000)


@given(seeds, st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_integral_additive(seed, u, v, w):
    f = random_unimodal(seed)
    lo, hi = f.support
    a, b, c = sorted(lo - 0.2 + (hi - lo + 0.4) * np.array([u, v, w]))
    whole = integral(f, a, c)
    assert integral(f, a, b) + integral(f, b, c) == pytest.approx(whole, rel=1e-12, abs=1e-14)


@given(seeds, st.floats(-3.0, 3.0), st.floats(0.0, 3.0))
def test_integral_matches_oracle(seed, a, width):
    f = random_peak_shaped(seed)
    ref = plf_integral(f.breakpoints, f.values, a, a + width)
    assert integral(f, a, a + width) == pytest.approx(float(ref), rel=1e-12, abs=1e-14)


@given(seeds, st.floats(0.01, 100.0), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_norm_scaling(seed, c, p):
    f = random_peak_shaped(seed)
    assert lp_norm_p(f.scaled(c), p).norm == pytest.approx(c * lp_norm_p(f, p).norm, rel=1e-12)
