import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyheat.errors import ConfigurationError
from levyheat.free_kernel import (
    Envelope,
    GridSpec,
    chapman_kolmogorov_residual,
    check_two_sided,
    envelope_Gn,
    free_density,
    free_density_grid,
    free_gradient,
    gradient_fd_discrepancy,
    resolving_grid,
)


def cauchy_density(t, x):
    return t / ((math.pi * t) ** 2 + x**2)


def test_cauchy_origin(cauchy):
    assert free_density(cauchy, 1.0, 0.0) == pytest.approx(1 / math.pi**2, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(-20.0, 20.0))
def test_cauchy_closed_form(cauchy, t, x):
    assert free_density(cauchy, t, x) == pytest.approx(cauchy_density(t, x), rel=1e-5, abs=1e-9)


def test_cauchy_gradient(cauchy):
    assert free_gradient(cauchy, 1.0, 1.0) == pytest.approx(-2 / (math.pi**2 + 1) ** 2, rel=1e-6)
    assert free_gradient(cauchy, 1.0, -1.0) == pytest.approx(2 / (math.pi**2 + 1) ** 2, rel=1e-6)
    assert free_gradient(cauchy, 1.0, 0.0) == 0.0


def test_gradient_matches_finite_differences(tempered15):
    t = 0.2
    h = float(tempered15.h(t))
    gap, used = gradient_fd_discrepancy(tempered15, t, h * np.array([0.1, 0.3, 1.0, 3.0, 10.0]), 1e-3 * h)
    assert used == 5
    assert gap <= 1e-5


def test_envelope_at_origin(cauchy):
    env = Envelope(2.0, cauchy)
    for t in (0.1, 1.0):
        assert envelope_Gn(env, t, 0.0) == pytest.approx(2 / float(cauchy.H(t)), rel=1e-12)
    with pytest.raises(ConfigurationError):
        Envelope(0.0, cauchy)


def test_grid_slice_matches_closed_form(cauchy):
    kg = free_density_grid(cauchy, 1.0, GridSpec(1, 2**16, 2**15 * math.pi / (1.05 * cauchy.truncation_radius(1.0))))
    x = kg.axis()
    sel = np.abs(x) <= 10
    assert np.max(np.abs(kg.slice(1.0)[sel] - cauchy_density(1.0, x[sel]))) <= 1e-5


def test_grid_rejects_unresolved_time(cauchy):
    spec = resolving_grid(cauchy, 1.0)
    with pytest.raises(ConfigurationError):
        free_density_grid(cauchy, 0.01, spec)


def test_chapman_kolmogorov_on_resolving_grid(cauchy):
    kg = free_density_grid(cauchy, (0.2, 0.3, 0.5), resolving_grid(cauchy, 0.2))
    assert chapman_kolmogorov_residual(kg, 0.2, 0.3) <= 1e-4


def test_two_sided_constants_cauchy(cauchy):
    consts = check_two_sided(cauchy)
    assert all(c.stable for c in consts.values())
    lower = [c for c in consts.values() if c.kind == "lower"]
    assert all(0 < c.value <= 1.0 for c in lower)
