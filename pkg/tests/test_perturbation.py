import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyheat.errors import ConfigurationError, DomainError
from levyheat.kato import constant, indicator_well
from levyheat.perturbation import (
    apply_semigroup,
    chapman_kolmogorov,
    check_perturbed_bounds,
    choose_order,
    comparability_bounds,
    default_horizons,
    fit_envelope,
    generator_apply,
    perturbed_kernel,
    relative_kato_estimate,
    spectral_generator,
    term_bound,
    weak_solution_residual,
)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=3, max_size=8), st.floats(0.01, 1.0))
def test_envelope_lies_above_points(kappa, spacing):
    t = spacing * np.arange(1, len(kappa) + 1)
    eta, beta = fit_envelope(t, np.array(kappa))
    assert eta >= 0 and beta >= 0
    assert np.all(eta + beta * t >= np.array(kappa) - 1e-9)


def test_envelope_recovers_line():
    t = np.array([0.1, 0.2, 0.4, 0.8])
    eta, beta = fit_envelope(t, 0.05 + 0.7 * t)
    assert eta == pytest.approx(0.05, abs=1e-6)
    assert beta == pytest.approx(0.7, rel=1e-5)


@pytest.mark.parametrize("n", [0, 1, 4, 9])
def test_term_bound_limits(n):
    assert term_bound(n, 0.0, 0.7) == pytest.approx(0.7**n / math.factorial(n))
    assert term_bound(n, 0.3, 0.0) == pytest.approx(0.3**n)


def test_choose_order_meets_tolerance():
    order, tail = choose_order(0.1, 0.3, 1e-8)
    assert tail <= 1e-8
    assert order <= 40


@pytest.fixture(scope="module")
def constant_kernel(cauchy_torus, unit_constant):
    return perturbed_kernel(cauchy_torus, unit_constant, 0.5)


def test_constant_potential_is_exponential(constant_kernel):
    pk = constant_kernel
    p, pt = pk.free_values(), pk.grid_values()
    ok = p > 1e-6 * p.max()
    assert np.max(np.abs(pt[ok] / (math.exp(0.5) * p[ok]) - 1)) <= 1e-3
    assert pk.beta == pytest.approx(1.0, rel=0.05)


def test_relative_kato_of_constant_is_time(cauchy_torus, unit_constant):
    rk = relative_kato_estimate(cauchy_torus, unit_constant, default_horizons(cauchy_torus))
    np.testing.assert_allclose(rk.kappa / rk.horizons, 1.0, atol=0.01)
    assert rk.eta_fit <= 0.01


def test_relative_kato_rejects_bad_horizons(cauchy_torus, well):
    with pytest.raises(DomainError):
        relative_kato_estimate(cauchy_torus, well, [0.5, 2.0])
    with pytest.raises(ConfigurationError):
        relative_kato_estimate(cauchy_torus, well, [1e-4, 0.5, 1.0])


def test_comparability_bounds_without_potential():
    class Stub:
        t, eta, h_eta = 0.5, 0.0, math.inf

    assert comparability_bounds(Stub) == (1.0, 1.0, 1)


def test_perturbed_bounds_on_well(well_kernel):
    rep = check_perturbed_bounds(well_kernel)
    assert rep["ratio_bounds_ok"]
    assert rep["positive"]
    assert rep["symmetry_residual"] <= 1e-4
    assert rep["term_bounds_hold"]
    assert rep["lower_bound"] <= rep["ratio_min"] and rep["ratio_max"] <= rep["upper_bound"]


def test_well_raises_kernel(well_kernel):
    # a nonnegative potential can only increase the kernel
    ok = well_kernel.free_values() > 1e-6 * well_kernel.free_values().max()
    assert np.all(well_kernel.grid_values()[ok] >= well_kernel.free_values()[ok] * (1 - 1e-6))


def test_chapman_kolmogorov_well(well_kernel):
    assert chapman_kolmogorov(well_kernel, 0.2, 0.3) <= 1e-3


def test_semigroup_of_constant_scales(cauchy_torus, constant_kernel):
    x = cauchy_torus.grid()[..., 0]
    phi = np.exp(-(x**2))
    free = cauchy_torus.inverse(cauchy_torus.propagate(cauchy_torus.forward(phi), 0.5))
    out = apply_semigroup(constant_kernel, phi)
    np.testing.assert_allclose(out, math.exp(0.5) * free, rtol=1e-5)
    with pytest.raises(ConfigurationError):
        apply_semigroup(constant_kernel, phi[:10])


def test_generator_quadrature_matches_multiplier(cauchy, cauchy_torus):
    x = cauchy_torus.grid()[..., 0]
    phi = lambda y: np.exp(-np.asarray(y) ** 2)  # noqa: E731
    # closed form at the origin: -int pi |u| sqrt(pi) exp(-u^2/4) du / (2 pi)
    assert generator_apply(cauchy.profile, phi, 0.0) == pytest.approx(-2 * math.sqrt(math.pi), rel=1e-8)
    spectral = spectral_generator(cauchy_torus, phi(x))
    for point in (0.0, 0.5, 2.0):
        i = int(np.argmin(np.abs(x - point)))
        # the torus also counts jumps onto the periodic images of the bump
        period = 2 * cauchy_torus.spec.x_max
        m = np.concatenate([np.arange(-20000, 0), np.arange(1, 20001)])
        images = math.sqrt(math.pi) * np.sum(1.0 / (period * m - x[i]) ** 2)
        assert spectral[i] - generator_apply(cauchy.profile, phi, x[i]) == pytest.approx(images, abs=1e-5)


def _bump(t_lo, t_hi, radius):
    def b(u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) < 1, np.exp(-1.0 / np.maximum(1.0 - u**2, 1e-300)), 0.0)

    mid, half = 0.5 * (t_lo + t_hi), 0.5 * (t_hi - t_lo)
    return lambda t, y: b((t - mid) / half) * b(np.abs(y) / radius)


@pytest.mark.parametrize("q", [constant(0.0), constant(1.0)], ids=["free", "constant"])
def test_weak_residual_small(cauchy_torus, q):
    pk = perturbed_kernel(cauchy_torus, q, 1.0, probes=np.zeros((1, 1)))
    phi = _bump(0.25, 0.95, 3.0)
    res = weak_solution_residual(pk, q, phi, 0.2, 0.0, support=(0.25, 0.95))
    assert abs(res) <= 1e-3 * math.exp(-2)


def test_weak_residual_requires_matching_potential(well_kernel):
    with pytest.raises(ConfigurationError):
        weak_solution_residual(well_kernel, indicator_well(2.0, 1.0), _bump(0.1, 0.4, 1.0), 0.05, 0.0)
