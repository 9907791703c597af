import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from driftless_sde.coefficients import DiffusionSpec
from driftless_sde.errors import DataError, DomainError, ParameterError
from driftless_sde.simulate import SimConfig, Statistic
from driftless_sde.stability import (
    RateWarning,
    Regime,
    cantor_family,
    fit_rate,
    holder_constants,
    nlg_constants,
    run_rate_experiment,
    shift_family,
    steps_for_rule,
    theoretical_bound,
    yw_build,
    yw_paper_choice,
    yw_sandwich_check,
)


def closed_form_c(H, a, b):
    if H == 0.5:
        return math.log(b / a)
    p = 1 - 2 * H
    return (b**p - a**p) / p


def test_yw_documented_values():
    a = math.exp(-4)
    f = yw_build(0.5, a, math.sqrt(a))
    assert f.c_norm == pytest.approx(2.0, rel=1e-14)
    g = yw_build(1.0, 0.1, 0.2)
    assert g.c_norm == pytest.approx(5.0, rel=1e-14)
    assert g.phi(0.1) == 0.0 and g.phi(-0.05) == 0.0


@pytest.mark.parametrize("args", [(0.5, 0.2, 0.1), (0.5, 0.0, 0.1), (0.5, 0.1, 1.5), (0.4, 0.1, 0.2), (1.1, 0.1, 0.2)])
def test_yw_bad_parameters(args):
    with pytest.raises(ParameterError):
        yw_build(*args)


@given(st.floats(0.5, 1.0), st.floats(-12, -0.5))
def test_c_norm_matches_closed_form_and_quadrature(H, log_a):
    a = 10.0**log_a
    b = min(1.0, 2 * a) if H > 0.5 else math.sqrt(a)
    f = yw_build(H, a, b)
    # integrate in u = log y so the integrand is smooth
    ref = quad(lambda u: math.exp((1 - 2 * H) * u), math.log(a), math.log(b), epsabs=0, epsrel=1e-13)[0]
    assert f.c_norm == pytest.approx(ref, rel=1e-10)
    if abs(1 - 2 * H) > 1e-3:
        assert f.c_norm == pytest.approx(closed_form_c(H, a, b), rel=1e-10)


@given(st.floats(0.5, 1.0), st.floats(-10, -0.4), st.integers(0, 1000))
def test_sandwich_and_derivatives(H, log_a, seed):
    a = 10.0**log_a
    b = math.sqrt(a) if H == 0.5 else min(1.0, 2 * a)
    rep = yw_sandwich_check(yw_build(H, a, b), samples=600, seed=seed)
    assert rep.sandwich_violations == 0
    assert rep.max_abs_dphi <= 1.0
    assert rep.max_rel_d2_error < 1e-4


def test_phi_symmetric_and_linear_tail():
    f = yw_build(0.75, 0.01, 0.02)
    xs = np.linspace(-1, 1, 2001)
    assert np.array_equal(f.phi(xs), f.phi(-xs))
    assert f.phi(2 * f.b) >= 2 * f.b - f.b
    assert f.dphi(3 * f.b) == 1.0 and f.dphi(-3 * f.b) == -1.0
    assert f.d2phi(0.5 * f.a) == 0.0 and f.d2phi(2 * f.b) == 0.0


def test_phi_near_half_exponent_is_continuous_in_H():
    a, b = 1e-6, 1e-3
    f0 = yw_build(0.5, a, b)
    f1 = yw_build(0.5 + 1e-12, a, b)
    xs = np.linspace(-2e-3, 2e-3, 101)
    np.testing.assert_allclose(f1.phi(xs), f0.phi(xs), rtol=1e-9, atol=1e-18)


@given(st.floats(1e-12, 0.99))
def test_mean_value_bracket_half(a):
    b = math.sqrt(a)
    c = yw_build(0.5, a, b).c_norm
    assert (b - a) <= c * (1 + 1e-12)
    assert c <= (b - a) / a * (1 + 1e-12)


@given(st.floats(0.5, 1.0), st.floats(1e-12, 0.5))
def test_b_times_c_at_most_one(H, a):
    if H == 0.5:
        f = yw_build(0.5, a, math.sqrt(a))
    else:
        f = yw_build(H, a, 2 * a)
    assert f.b * f.c_norm <= 1.0 + 1e-12


def test_paper_choice():
    f = yw_paper_choice(0.5, 0.01)
    assert f.a == pytest.approx(1e-4) and f.b == pytest.approx(1e-2)
    g = yw_paper_choice(1.0, 0.01)
    assert g.b == pytest.approx(2 * g.a)


def test_bound_exponents_and_thresholds():
    assert theoretical_bound("holder_above", 1.0, H=1.0).exponent == 0.5
    nlg = theoretical_bound("nlg_positive", 1.0, H=0.5, epsilon=0.25)
    assert nlg.exponent == pytest.approx(1 / 3, abs=1e-15)
    assert nlg.threshold == pytest.approx(2 ** -0.75)
    half = theoretical_bound(Regime.HOLDER_HALF, 1.0)
    assert half.log_form and half.exponent is None
    with pytest.raises(DomainError):
        half(2 ** -0.5)
    with pytest.raises(DomainError):
        half(-0.1)
    assert half(0.0) == 0.0
    assert theoretical_bound("nlg_zero", 1.0, epsilon=0.5).threshold == pytest.approx(2 ** -0.5)


@given(st.floats(0.5, 1.0))
def test_holder_exponent_map(H):
    e = theoretical_bound("holder_above", 1.0, H=max(H, 0.5 + 1e-9)).exponent
    assert -1e-8 <= e <= 0.5


def test_bound_constants_follow_formulas():
    c1, c2 = holder_constants(2.0, 1.5, 3.0)
    assert c1 == pytest.approx(2 / math.log(2) * (1 + 2 * 2.25 + 2))
    assert c2 == pytest.approx(4 * (2 * 2.25 + 4 * 9 + 2) * 2 * math.sqrt(c1))
    cl, c3, c4 = nlg_constants(4.0, 1.0, 2.0, 0.5)
    assert cl == 3.0
    assert c3 == pytest.approx(2 / math.log(2) * (1 + 2 * 3 + 4))
    assert c4 == pytest.approx(4 * (3 * 2 + 4 * 0.25 * 4 + 8) * math.sqrt(c3))
    b1 = theoretical_bound("nlg_positive", 1.0, H=0.5, epsilon=0.5)
    b2 = theoretical_bound("nlg_positive", 1.0, H=0.5, epsilon=0.25)
    assert b2(0.1) == pytest.approx(8 * b1(0.1))


def test_bound_parameter_errors():
    with pytest.raises(ParameterError):
        theoretical_bound("nlg_positive", 1.0, H=0.5)
    with pytest.raises(ParameterError):
        theoretical_bound("holder_above", 1.0, H=0.5)
    with pytest.raises(ParameterError):
        theoretical_bound("holder_half", 0.0)
    with pytest.raises(ValueError):
        theoretical_bound("sharp", 1.0)


def test_fit_exact_power_data():
    d = 2.0 ** -np.arange(2, 9)
    fit = fit_rate(d, d**0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    fit = fit_rate(d, 3 * d ** (1 / 3))
    assert fit.slope == pytest.approx(1 / 3, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)


def test_fit_log_regime_exact():
    d = 2.0 ** -np.arange(2, 8)
    fit = fit_rate(d, 0.7 * (-np.log(d)) ** -0.5, log_regime=True)
    assert fit.slope == pytest.approx(0.7, rel=1e-13)
    assert fit.max_rel_residual < 1e-12


def test_fit_noisy_coverage():
    rng = np.random.default_rng(0)
    d = 2.0 ** -np.arange(2, 10)
    hits = 0
    for _ in range(400):
        e = d**0.4 * np.exp(rng.normal(0, 0.1, d.size))
        f = fit_rate(d, e)
        hits += abs(f.slope - 0.4) <= 2 * f.slope_stderr
    # nominal coverage of +-2 stderr with 6 residual dof is about 0.91
    assert hits / 400 > 0.85


@pytest.mark.parametrize(
    "d,e",
    [([0.1, 0.2, 0.0], [1, 2, 3]), ([0.1, 0.2, 0.3], [1, -2, 3]), ([0.1, 0.2], [1, 2]), ([0.1, 0.1, 0.2], [1, 1, 2])],
)
def test_fit_rejects_bad_data(d, e):
    with pytest.raises(DataError):
        fit_rate(d, e)


def test_steps_rule_is_strict():
    for T, dmin in ((1 / 64, 2**-8), (1.0, 0.1), (0.25, 2**-7)):
        n = steps_for_rule(T, dmin)
        assert math.sqrt(T / n) < dmin / 10
        assert math.sqrt(T / (n - 1)) >= dmin / 10 or n == 1


def test_null_family_refuses_fit():
    s = DiffusionSpec.power_law(1.0)
    from driftless_sde.stability import FamilyMember

    fam = [FamilyMember(n, s, s) for n in (2, 3, 4)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RateWarning)
        with pytest.raises(DataError):
            run_rate_experiment(fam, SimConfig(steps=50, paths=50), theoretical_bound("holder_above", 1.0, H=1.0))


def test_constant_family_linear_propagation():
    fam = shift_family(DiffusionSpec.constant(1.0), range(2, 7))
    bound = theoretical_bound("holder_above", 1.0, H=1.0)
    with pytest.warns(RateWarning):
        res = run_rate_experiment(fam, SimConfig(steps=200, paths=500, seed=1), bound, Statistic.MEAN_SUP)
    assert res.fitted_slope == pytest.approx(1.0, abs=1e-9)
    assert [p.n for p in res.points] == [2, 3, 4, 5, 6]
    assert np.all(np.diff(res.deltas) <= 0)
    for p in res.points:
        assert p.bound == pytest.approx(bound(p.delta))
    assert res.summary()["pass"]
    sq = res.secondary_fit(Statistic.MEAN_SUP_SQUARED)
    assert sq.slope == pytest.approx(2.0, abs=1e-9)


@pytest.mark.filterwarnings("ignore:sqrt\\(h\\)")
def test_threshold_exclusion_warns():
    fam = shift_family(DiffusionSpec.constant(1.0), range(0, 5))
    bound = theoretical_bound("holder_above", 1.0, H=1.0)  # threshold 1/2
    with pytest.warns(RateWarning, match="excluded"):
        res = run_rate_experiment(fam, SimConfig(steps=100, paths=100), bound, Statistic.MEAN_SUP)
    assert res.excluded == [0, 1]
    assert [p.n for p in res.points] == [2, 3, 4]


def test_cantor_family_shares_reference():
    fam = cantor_family(0.5, [2, 3], shift=0.25)
    assert fam[0].sigma is fam[1].sigma
    assert fam[1].sigma_n.params["iterate"] == 3


def test_nonincreasing_helper():
    fam = shift_family(DiffusionSpec.constant(1.0), range(2, 5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RateWarning)
        res = run_rate_experiment(fam, SimConfig(steps=50, paths=200), theoretical_bound("holder_above", 1.0, H=1.0))
    assert res.nonincreasing()
