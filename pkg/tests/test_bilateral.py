import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from priorattack.bilateral import (
    BilateralKernel,
    FilterConfig,
    filter_perturbation,
    filter_perturbations,
    joint_bilateral_filter,
)
from priorattack.core import RandomSource, sample_unit_perturbations
from priorattack.errors import ConfigError, DegeneratePerturbationError, ShapeError
from reference import brute_force_filter


def random_fixtures():
    rng = np.random.default_rng(2024)
    for n in range(24):
        size = 8 if n % 2 == 0 else 16
        channels = 1 if n % 4 < 2 else 3
        image = rng.normal(size=(size, size, channels))
        guide = rng.random((size, size, channels))
        sigma_s = float(rng.uniform(0.5, 2.5))
        sigma_r = float(rng.uniform(0.05, 0.5))
        yield image, guide, FilterConfig(sigma_s, sigma_r)


FIXTURES = list(random_fixtures())


@pytest.mark.parametrize("image,guide,cfg", FIXTURES)
def test_matches_brute_force(image, guide, cfg):
    expected = brute_force_filter(image, guide, cfg.sigma_s, cfg.sigma_r, cfg.radius)
    got = joint_bilateral_filter(image, guide, cfg)
    assert np.max(np.abs(got - expected)) <= 1e-12


def test_default_radius_is_twice_sigma_rounded_up():
    assert FilterConfig(2.0, 0.1).radius == 4
    assert FilterConfig(0.6, 0.1).radius == 2
    assert FilterConfig(0.1, 0.1).radius == 1
    assert FilterConfig(2.0, 0.1, radius=7).radius == 7


@pytest.mark.parametrize("sigma_s,sigma_r", [(0.0, 0.1), (1.0, 0.0), (-1.0, 0.1), (1.0, float("nan"))])
def test_invalid_sigmas(sigma_s, sigma_r):
    with pytest.raises(ConfigError):
        FilterConfig(sigma_s, sigma_r)


def test_invalid_sigmas_are_all_reported():
    with pytest.raises(ConfigError) as err:
        FilterConfig(-1.0, -1.0, radius=0)
    assert len(err.value.problems) == 3


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        joint_bilateral_filter(np.zeros((4, 4)), np.zeros((5, 4)), FilterConfig(1.0, 0.1))


@pytest.mark.parametrize("value", [0.0, 0.37, -2.5, 1e-300])
def test_constant_input_preserved_exactly(value):
    rng = np.random.default_rng(1)
    guide = rng.random((9, 11, 3))
    a = np.full((9, 11, 3), value)
    assert np.array_equal(joint_bilateral_filter(a, guide, FilterConfig(2.0, 0.05)), a)


def test_huge_range_sigma_is_spatial_blur():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(12, 12, 1))
    guide = rng.random((12, 12, 1))
    cfg = FilterConfig(1.5, 1e6)
    blur = brute_force_filter(a, np.zeros_like(guide), cfg.sigma_s, 1.0, cfg.radius)
    assert np.max(np.abs(joint_bilateral_filter(a, guide, cfg) - blur)) < 1e-6


def test_concentrated_spatial_kernel_is_identity():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(8, 8, 3))
    out = joint_bilateral_filter(a, rng.random((8, 8, 3)), FilterConfig(1e-3, 0.1, radius=1))
    assert np.array_equal(out, a)


def test_constant_guide_gives_plain_blur():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(10, 10, 1))
    cfg = FilterConfig(1.0, 0.01)
    out = joint_bilateral_filter(a, np.full((10, 10, 1), 0.5), cfg)
    blur = brute_force_filter(a, np.zeros((10, 10, 1)), cfg.sigma_s, 1.0, cfg.radius)
    assert np.max(np.abs(out - blur)) <= 1e-12


def test_two_dimensional_input_stays_two_dimensional():
    a = np.random.default_rng(5).normal(size=(6, 7))
    out = joint_bilateral_filter(a, np.zeros((6, 7)), FilterConfig(1.0, 0.1))
    assert out.shape == (6, 7)


def test_filtered_perturbations_are_unit_and_finite():
    rng = RandomSource(6)
    guide = np.random.default_rng(6).random((16, 16, 3))
    kernel = BilateralKernel(guide, FilterConfig(2.0, 8 / 255))
    out, bad = filter_perturbations(sample_unit_perturbations(rng, 200, guide.size), kernel, 3)
    assert not bad.any()
    assert np.all(np.isfinite(out))
    assert np.max(np.abs(np.linalg.norm(out, axis=1) - 1.0)) < 1e-12


def test_unrenormalized_output_shrinks():
    guide = np.zeros((8, 8, 1))
    u = sample_unit_perturbations(RandomSource(7), 1, 64)[0]
    out = filter_perturbation(u, guide, FilterConfig(1.5, 0.1), renormalize=False)
    assert np.linalg.norm(out) < 1.0


def test_zero_perturbation_is_degenerate():
    with pytest.raises(DegeneratePerturbationError):
        filter_perturbation(np.zeros(16), np.zeros((4, 4, 1)), FilterConfig(1.0, 0.1))


def test_edges_decorrelate_filtered_noise():
    """Neighbours across a guide edge end up less correlated than neighbours inside a region."""
    guide = np.full((8, 8, 1), 0.2)
    guide[:, 4:] = 0.8
    kernel = BilateralKernel(guide, FilterConfig(1.5, 0.1))
    u = sample_unit_perturbations(RandomSource(8), 1000, 64)
    out, _ = filter_perturbations(u, kernel, 1)
    img = out.reshape(-1, 8, 8)
    across = np.corrcoef(img[:, 3, 3], img[:, 3, 4])[0, 1]
    within = np.corrcoef(img[:, 3, 2], img[:, 3, 3])[0, 1]
    assert within > 0.5
    assert across < within / 4


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 7),
    st.integers(2, 7),
    st.floats(0.3, 3.0),
    st.floats(0.01, 2.0),
    st.integers(0, 2**31),
)
def test_output_is_a_convex_combination(h, w, sigma_s, sigma_r, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(h, w, 1))
    out = joint_bilateral_filter(a, rng.random((h, w, 1)), FilterConfig(sigma_s, sigma_r))
    assert np.all(out <= a.max() + 1e-12)
    assert np.all(out >= a.min() - 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_in_the_input(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 6, 6, 1))
    kernel = BilateralKernel(rng.random((6, 6, 1)), FilterConfig(1.0, 0.2))
    lhs = kernel.apply(alpha * a + beta * b)
    rhs = alpha * kernel.apply(a) + beta * kernel.apply(b)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
