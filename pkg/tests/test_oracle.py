import math

import numpy as np
import pytest

from levyheat.errors import ConfigurationError, DomainError
from levyheat.free_kernel import GridSpec
from levyheat.kato import constant, indicator_well
from levyheat.oracle import (
    cauchy_error,
    discretize_generator,
    grid_index,
    oracle_kernel,
    refinement_study,
)
from levyheat.profiles import fractional, tempered


@pytest.fixture(scope="module")
def cauchy_generator():
    return discretize_generator(fractional(1.0), GridSpec(1, 128, 20.0))


def test_generator_invariants(cauchy_generator):
    A = cauchy_generator.matrix
    scale = np.abs(A).max()
    assert np.max(np.abs(A - A.T)) <= 1e-12 * scale
    assert np.max(np.abs(A.sum(axis=1))) <= 1e-9 * scale
    off = A - np.diag(np.diag(A))
    assert off.min() >= 0
    assert cauchy_generator.diffusion_rate < cauchy_generator.jump_rate


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_free_kernel_conserves_mass(cauchy_generator, t):
    k = oracle_kernel(cauchy_generator, None, t).slice(t)
    np.testing.assert_allclose(k.sum(axis=1) * cauchy_generator.spec.dx, 1.0, atol=1e-10)
    assert k.min() >= -1e-12


@pytest.mark.parametrize("c", [-0.5, 1.0])
def test_constant_potential_scales(cauchy_generator, c):
    t = 0.5
    free = oracle_kernel(cauchy_generator, None, t).slice(t)
    pert = oracle_kernel(cauchy_generator, constant(c), t).slice(t)
    np.testing.assert_allclose(pert, math.exp(c * t) * free, rtol=1e-9, atol=1e-14)


def test_well_orders_kernels(cauchy_generator):
    t = 0.5
    free = oracle_kernel(cauchy_generator, None, t).slice(t)
    pert = oracle_kernel(cauchy_generator, indicator_well(2.0, 1.0), t).slice(t)
    assert np.all(pert >= free * (1 - 1e-10))


def test_cauchy_reference_accuracy():
    assert cauchy_error(256) <= 0.02


def test_refinement_converges():
    study = refinement_study((64, 128, 256))
    assert all(r >= 1.5 for r in study["ratios"]), study


def test_two_dimensional_smoke():
    gen = discretize_generator(tempered(1.0, 1.0, dim=2), GridSpec(2, 16, 4.0))
    A = gen.matrix
    assert A.shape == (256, 256)
    assert np.max(np.abs(A.sum(axis=1))) <= 1e-9 * np.abs(A).max()
    k = oracle_kernel(gen, None, 0.5).slice(0.5)
    np.testing.assert_allclose(k.sum(axis=1) * gen.cell, 1.0, atol=1e-9)


@pytest.mark.parametrize("spec", [GridSpec(1, 1024, 20.0), GridSpec(3, 8, 4.0)], ids=["too-large", "three-d"])
def test_generator_limits(spec):
    with pytest.raises(ConfigurationError):
        discretize_generator(fractional(1.0, dim=spec.dim), spec)


def test_grid_index(cauchy_generator):
    spec = cauchy_generator.spec
    assert grid_index(spec, -spec.x_max) == 0
    assert grid_index(spec, 0.0) == spec.n // 2
    with pytest.raises(DomainError):
        grid_index(spec, 0.5 * spec.dx)
    with pytest.raises(DomainError):
        oracle_kernel(cauchy_generator, None, 0.5).slice(0.3)
