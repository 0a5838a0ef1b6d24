import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyheat.errors import ConfigurationError, DomainError
from levyheat.kato import (
    Potential,
    constant,
    indicator_well,
    kato_membership,
    local_integral_sup,
    potential_kernel_V,
    power_well,
)


@pytest.mark.parametrize("r", [0.01, 0.1, 0.5])
def test_local_integral_constant(r):
    assert local_integral_sup(constant(1.0), r) == pytest.approx(2 * r, rel=1e-12)


@pytest.mark.parametrize("r", [0.01, 0.1, 0.5])
def test_local_integral_power_well(r):
    # centered ball: 2 int_0^r s^-1/2 ds
    assert local_integral_sup(power_well(0.5), r) == pytest.approx(4 * math.sqrt(r), rel=1e-9)


def test_nonintegrable_well():
    q = power_well(1.5)
    assert not q.locally_integrable
    assert local_integral_sup(q, 0.1) == math.inf


@pytest.mark.parametrize("kw", [{"form": "nope"}, {"form": "power_well", "gamma": -1.0, "radius": 1.0}, {"form": "indicator_well"}, {"form": "custom", "radius": 1.0}])
def test_invalid_potentials(kw):
    with pytest.raises(ConfigurationError):
        Potential(**kw)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, 0.9))
def test_dilation(kappa, gamma):
    q = power_well(gamma, radius=1.0)
    x = np.array([0.05, 0.3, 0.7])
    np.testing.assert_allclose(q.dilate(kappa)(x / kappa), q(x), rtol=1e-12)


def test_cell_averages_preserve_mass():
    axis = np.linspace(-4, 4, 801)
    for q in (indicator_well(2.0, 1.0), power_well(0.5)):
        dx = axis[1] - axis[0]
        total = q.cell_averages(axis).sum() * dx
        exact = q._antiderivative(np.array(4.0)) - q._antiderivative(np.array(-4.0))
        assert total == pytest.approx(float(exact), rel=1e-12)


def test_potential_kernel_monotone_in_time(cauchy):
    for x in (0.1, 1.0, 5.0):
        vals = [potential_kernel_V(cauchy, 2.0, t, x) for t in (0.01, 0.1, 0.5, 1.0)]
        assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        potential_kernel_V(cauchy, 2.0, 0.5, 0.0)
    with pytest.raises(DomainError):
        potential_kernel_V(cauchy, 0.5, 0.5, 1.0)


@pytest.mark.parametrize(
    "q, a, member",
    [
        (constant(1.0), 2.0, True),
        (indicator_well(2.0, 1.0), 2.0, True),
        (power_well(0.25), 2.0, True),
        (power_well(0.5), 1.0, True),
        (power_well(0.5), 2.0, False),
    ],
    ids=lambda v: getattr(v, "name", v),
)
def test_membership_verdicts(cauchy, q, a, member):
    rep = kato_membership(cauchy, q, a)
    assert rep.verdict == rep.time_verdict == member
    if member:
        assert rep.fitted_slope > 0
    d = rep.to_dict()
    assert d["verdict"] == ("member" if member else "non-member")


@pytest.mark.filterwarnings("ignore::levyheat.errors.ScopeWarning")
def test_steep_kernel_membership(tempered15):
    # V ~ |x|^(-(a - alpha)/a) near 0, so ball integrals of a bounded well decay like r^(1 - 0.625)
    rep = kato_membership(tempered15, indicator_well(2.0, 1.0), 4.0)
    assert rep.verdict and rep.time_verdict
    assert rep.fitted_slope == pytest.approx(0.375, abs=0.05)
