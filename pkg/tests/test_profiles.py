import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyheat.errors import ConfigurationError, DomainError
from levyheat.profiles import (
    LevyProfile,
    check_condition_A,
    check_condition_B,
    check_condition_C,
    convolution_domination_constant,
    eval_profile,
    fractional,
    local_ratio_constant,
    shipped_profiles,
    tempered,
)


def test_fractional_values():
    p = fractional(1.0)
    assert eval_profile(p, 0.5) == pytest.approx(4.0, rel=1e-15)
    assert eval_profile(p, 2.0) == pytest.approx(0.25, rel=1e-15)


def test_tempered_splice_is_continuous():
    p = tempered(1.0, 1.0, m=1.0, eta=0.5)
    assert eval_profile(p, 1.0) == pytest.approx(1.0, rel=1e-15)
    below, above = eval_profile(p, 1 - 1e-12), eval_profile(p, 1 + 1e-12)
    assert abs(below - above) < 1e-9


@pytest.mark.parametrize("r", [0.0, -1.0, math.inf, math.nan])
def test_invalid_radius(r):
    with pytest.raises(DomainError):
        eval_profile(fractional(1.0), r)


@pytest.mark.parametrize(
    "kw",
    [
        {"family": "fractional", "alpha": 2.5},
        {"family": "tempered", "alpha": 1.0, "m": 0.0},
        {"family": "tempered", "alpha": 1.0, "m": 1.0, "beta": 1.5},
        {"family": "fractional", "alpha": 1.0, "alpha1": 1.2, "alpha2": 0.8},
        {"family": "custom", "alpha": 1.0},
    ],
)
def test_invalid_profiles(kw):
    with pytest.raises(ConfigurationError):
        LevyProfile(**kw)


@pytest.mark.parametrize("name", list(shipped_profiles()))
def test_shipped_profiles_decrease(name):
    p = shipped_profiles()[name]
    r = np.geomspace(1e-4, 1e2, 400)
    f = p.f(r)
    assert np.all(f > 0)
    assert np.all(np.diff(f) < 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.95), st.floats(1e-3, 50.0), st.floats(1.001, 10.0))
def test_monotone_property(alpha, r, factor):
    p = fractional(alpha)
    assert eval_profile(p, r) > eval_profile(p, r * factor)


def test_condition_A_passes_for_cauchy_and_tempered():
    assert check_condition_A(fractional(1.0)).passed
    assert check_condition_A(tempered(1.0, 1.0, m=1.0, eta=0.5)).passed


def test_condition_A_fails_for_gaussian_tail():
    d, alpha = 1, 1.0
    p = LevyProfile(
        "custom",
        alpha=alpha,
        dim=d,
        func=lambda r: np.exp(-(r**2)) * r ** (-d - alpha),
        log_func=lambda r: -(r**2) - (d + alpha) * np.log(r),
    )
    rep = check_condition_A(p)
    assert not rep.passed
    assert rep.to_dict()["condition"] == "A"


def test_condition_B_power_law_constants_are_one():
    rep = check_condition_B(fractional(1.0, dim=2))
    assert rep.passed
    assert rep.fitted_constants["C4"] == pytest.approx(1.0, rel=1e-9)
    assert rep.fitted_constants["C5"] == pytest.approx(1.0, rel=1e-9)


def test_condition_B_tempered_stretched():
    rep = check_condition_B(tempered(0.5, 0.5, m=1.0, eta=0.0))
    assert rep.passed
    assert rep.fitted_constants["alpha1"] == rep.fitted_constants["alpha2"] == 0.5


def test_condition_B_fails_for_plateau():
    def f(r):
        r = np.asarray(r, dtype=float)
        return np.where(r < 0.5, r**-2.0, np.where(r <= 1.0, 4.0, 4.0 * r**-2.0))

    rep = check_condition_B(LevyProfile("custom", alpha=1.0, func=f))
    assert not rep.passed


@pytest.mark.parametrize("profile", [tempered(1.0, 1.0), fractional(1.0), fractional(0.5)], ids=lambda p: p.name)
def test_condition_C(profile):
    rep = check_condition_C(profile)
    assert rep.passed
    assert rep.fitted_constants["C6"] >= 1.0
    assert set(rep.to_dict()) >= {"condition", "passed", "constants", "worst_point", "grid"}


@pytest.mark.parametrize("R", [1.0, 5.0])
@pytest.mark.parametrize("name", list(shipped_profiles()))
def test_local_ratio_constant_stable(name, R):
    p = shipped_profiles()[name]
    c0, _ = local_ratio_constant(p, R, level=0)
    c1, _ = local_ratio_constant(p, R, level=1)
    assert math.isfinite(c0) and c0 >= 1.0
    assert abs(c1 / c0 - 1) <= 0.1


@pytest.mark.parametrize("cutoff", [0.5, 1.0])
def test_convolution_domination(cutoff):
    c0, _ = convolution_domination_constant(fractional(1.0), cutoff, level=0)
    c1, _ = convolution_domination_constant(fractional(1.0), cutoff, level=1)
    assert math.isfinite(c0) and c0 > 0
    assert abs(c1 / c0 - 1) <= 0.1
