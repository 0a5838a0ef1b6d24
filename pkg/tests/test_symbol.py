import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyheat.errors import RangeError
from levyheat.profiles import fractional, tempered
from levyheat.symbol import (
    build_symbol_table,
    check_asymptotic_psi,
    check_doubling_h,
    check_f_of_h,
    check_h_integrals,
    check_h_vs_H,
    check_lower_phi,
    check_psi_moment,
    compute_symbol,
    psi_inverse,
    scale_H,
    scale_h,
    stable_constant,
)


@pytest.mark.parametrize("u, expected", [(1.0, math.pi), (2.0, 2 * math.pi), (0.01, 0.01 * math.pi), (50.0, 50 * math.pi)])
def test_cauchy_symbol_quadrature(u, expected):
    assert compute_symbol(fractional(1.0), u) == pytest.approx(expected, rel=1e-7)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_fractional_symbol_matches_stable_constant(alpha):
    p = fractional(alpha)
    for u in (0.3, 1.0, 7.0):
        assert compute_symbol(p, u) == pytest.approx(stable_constant(alpha, 1) * u**alpha, rel=1e-6)


def test_cauchy_table_scales(cauchy):
    assert float(cauchy.phi(1.0)) == pytest.approx(math.pi, rel=1e-6)
    assert float(cauchy.phi(2.0)) == pytest.approx(2 * math.pi, rel=1e-6)
    assert psi_inverse(cauchy, math.pi) == pytest.approx(1.0, rel=1e-6)
    assert scale_h(cauchy, 1.0) == pytest.approx(math.pi, rel=1e-6)
    for t in (1e-3, 0.1, 1.0):
        assert scale_H(cauchy, t) == pytest.approx(t, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_psi_dominates_phi(u):
    table = build_symbol_table(tempered(1.5, 1.0))
    # separate interpolants agree to interpolation accuracy between nodes
    assert float(table.psi(u)) >= float(table.phi(u)) * (1 - 1e-7)


def test_psi_is_running_max_at_nodes(tempered15):
    assert np.all(tempered15.psi_values >= tempered15.phi_values)
    assert np.all(np.diff(tempered15.psi_values) >= 0)


def test_psi_inverse_round_trip(tempered15):
    s = np.geomspace(float(tempered15.psi_values[0]) * 2, float(tempered15.psi_values[-1]) / 2, 25)
    r = tempered15.psi_inverse(s)
    np.testing.assert_allclose(tempered15.psi(r), s, rtol=1e-8)


def test_psi_outside_table_raises(cauchy):
    with pytest.raises(RangeError):
        cauchy.psi(cauchy.u[-1] * 10)


def test_symbol_csv(cauchy):
    text = cauchy.to_csv()
    assert text.splitlines()[0].count(",") >= 2


@pytest.mark.parametrize(
    "check",
    [check_asymptotic_psi, check_h_vs_H, check_doubling_h, check_f_of_h, check_psi_moment],
    ids=lambda f: f.__name__,
)
def test_two_sided_checks_stable(cauchy, check):
    for const in check(cauchy):
        assert const.stable, const.to_dict()


def test_cauchy_h_over_H_is_pi(cauchy):
    lower, upper = check_h_vs_H(cauchy)
    assert lower.value == pytest.approx(math.pi, rel=1e-5)
    assert upper.value == pytest.approx(math.pi, rel=1e-5)


def test_lower_phi_and_integrals(tempered15):
    assert check_lower_phi(tempered15).stable
    consts = check_h_integrals(tempered15)
    assert consts
    assert all(c.stable for c in consts.values())
