"""Pullback integrals: closed forms, discrete sums, and the quadrature oracle."""

import math

import numpy as np
import pytest

from jumpresponse import (
    AffineJumpMap,
    BumpMixture,
    ConstantShape,
    DiscreteJumpLaw,
    GaussianBump,
    GaussianDensity,
    GaussianMixture,
    JumpIntegralSpec,
    ValidationError,
    jump_integral_discrete,
    jump_integral_gaussian,
    jump_integral_gaussian_bump,
    jump_integral_mixture,
    jump_integral_quadrature,
)
from conftest import random_jump_spec, random_spd

PHI_AT_1 = 0.24197072451914337
N02_AT_0 = 0.28209479177387814  # density of N(0, 2) at the origin

STD1 = GaussianDensity([0.0], [[1.0]])


def _phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# ------------------------------------------------------------ discrete sums


def test_deterministic_shift_reduces_to_translated_density():
    spec = JumpIntegralSpec(STD1, AffineJumpMap([1.0]))
    for x in (-1.0, 0.0, 0.7, 2.5):
        assert spec.evaluate([x]) == pytest.approx(_phi(x - 1.0), rel=1e-14)


def test_symmetric_atoms_at_origin():
    law = DiscreteJumpLaw([[1.0], [-1.0]], [0.5, 0.5])
    spec = JumpIntegralSpec(STD1, AffineJumpMap([0.0], None, [[1.0]]), law)
    assert jump_integral_discrete(spec, [0.0]) == pytest.approx(PHI_AT_1, rel=1e-14)


def test_constant_shape_is_dropped():
    law = DiscreteJumpLaw([[1.0], [-1.0]], [0.5, 0.5])
    jm = AffineJumpMap([0.0], None, [[1.0]])
    plain = JumpIntegralSpec(STD1, jm, law)
    shaped = JumpIntegralSpec(STD1, jm, law, ConstantShape())
    x = np.linspace(-2, 2, 9).reshape(-1, 1)
    assert np.array_equal(plain.evaluate(x), shaped.evaluate(x))


def test_discrete_quadrature_is_same_sum():
    law = DiscreteJumpLaw([[0.5], [-0.25]], [0.3, 0.7])
    spec = JumpIntegralSpec(STD1, AffineJumpMap([0.1], [[0.2]], [[0.8]]), law)
    x = np.linspace(-2, 2, 11).reshape(-1, 1)
    assert np.array_equal(spec.evaluate(x), spec.evaluate_quadrature(x))


# ---------------------------------------------------------- gaussian closed


def test_small_random_input_matches_collapsed_law():
    # as the z-coupling shrinks, the Gaussian closed form approaches the
    # discrete evaluation with the law replaced by its mean
    jm_eps = AffineJumpMap([0.5], [[0.2]], [[1e-6]])
    gauss = JumpIntegralSpec(STD1, jm_eps, GaussianDensity([0.3], [[0.7]]))
    collapsed = JumpIntegralSpec(STD1, jm_eps, DiscreteJumpLaw([[0.3]], [1.0]))
    for x in (-1.0, 0.0, 0.4, 1.5):
        a = gauss.evaluate([x])
        b = collapsed.evaluate([x])
        assert a == pytest.approx(b, rel=1e-4)


def test_gaussian_convolution_identity():
    spec = JumpIntegralSpec(STD1, AffineJumpMap([0.0], None, [[1.0]]), STD1)
    assert jump_integral_gaussian(spec, [0.0]) == pytest.approx(N02_AT_0, rel=1e-13)
    # whole curve: the integral is the N(0, 2) density
    xs = np.linspace(-3, 3, 13)
    vals = spec.evaluate(xs.reshape(-1, 1))
    want = np.exp(-0.25 * xs**2) / math.sqrt(4.0 * math.pi)
    assert np.allclose(vals, want, rtol=1e-12)


def test_gaussian_closed_vs_quadrature_randomized():
    rng = np.random.default_rng(2718)
    checked = 0
    for _ in range(8):
        k = int(rng.integers(1, 4))
        d = int(rng.integers(1, 3))
        spec, xs = random_jump_spec(rng, k, d)
        closed = spec.evaluate(xs)
        quad = spec.evaluate_quadrature(xs)
        assert np.all(np.abs(closed - quad) <= 1e-6 * np.abs(quad))
        checked += xs.shape[0]
    assert checked >= 100


# --------------------------------------------------------------- bump closed


def test_wide_bump_recovers_plain_integral():
    jm = AffineJumpMap([0.3], [[0.2]], [[0.7]])
    law = GaussianDensity([0.1], [[0.9]])
    plain = JumpIntegralSpec(STD1, jm, law)
    wide = JumpIntegralSpec(STD1, jm, law, GaussianBump([0.0], [[1e8]]))
    for x in (-1.0, 0.2, 1.4):
        assert wide.evaluate([x]) == pytest.approx(plain.evaluate([x]), rel=1e-6)


def test_far_bump_suppresses_integral():
    jm = AffineJumpMap([0.3], [[0.2]], [[0.7]])
    law = GaussianDensity([0.1], [[0.9]])
    plain = JumpIntegralSpec(STD1, jm, law)
    far = JumpIntegralSpec(STD1, jm, law, GaussianBump([10.0], [[1.0]]))
    for x in (-0.5, 0.0, 0.5):
        assert far.evaluate([x]) < 1e-6 * plain.evaluate([x])


def test_bump_closed_vs_quadrature_randomized():
    rng = np.random.default_rng(31415)
    for _ in range(6):
        k = int(rng.integers(1, 4))
        d = int(rng.integers(1, 3))
        spec, xs = random_jump_spec(rng, k, d, with_bump=True)
        closed = jump_integral_gaussian_bump(spec, xs)
        quad = spec.evaluate_quadrature(xs)
        assert np.all(np.abs(closed - quad) <= 1e-6 * np.abs(quad))


# ------------------------------------------------------------------ mixtures


def test_single_component_mixtures_reduce_exactly():
    rng = np.random.default_rng(7)
    jm = AffineJumpMap([0.2, -0.1], rng.uniform(-0.2, 0.2, (2, 2)), rng.uniform(-0.5, 0.5, (2, 1)))
    comp_p = GaussianDensity([0.1, 0.0], random_spd(rng, 2))
    comp_l = GaussianDensity([0.2], [[0.8]])
    plain = JumpIntegralSpec(comp_p, jm, comp_l)
    as_mix = JumpIntegralSpec(GaussianMixture([1.0], [comp_p]), jm, GaussianMixture([1.0], [comp_l]))
    xs = rng.standard_normal((10, 2))
    assert np.array_equal(plain.evaluate(xs), as_mix.evaluate(xs))


def test_zero_weight_component_is_inert():
    rng = np.random.default_rng(8)
    jm = AffineJumpMap([0.2], [[0.1]], [[0.5]])
    c0 = GaussianDensity([0.0], [[1.0]])
    c1 = GaussianDensity([3.0], [[0.2]])
    law = GaussianDensity([0.0], [[1.0]])
    single = JumpIntegralSpec(GaussianMixture([1.0], [c0]), jm, law)
    padded = JumpIntegralSpec(GaussianMixture([1.0, 0.0], [c0, c1]), jm, law)
    xs = rng.standard_normal((10, 1))
    assert np.allclose(single.evaluate(xs), padded.evaluate(xs), rtol=1e-15, atol=0)


def test_mixture_p0_vs_quadrature():
    rng = np.random.default_rng(16180)
    for _ in range(4):
        k = int(rng.integers(1, 3))
        d = int(rng.integers(1, 3))
        spec, xs = random_jump_spec(rng, k, d, mix_p0=True)
        closed = jump_integral_mixture(spec, xs)
        quad = spec.evaluate_quadrature(xs)
        assert np.all(np.abs(closed - quad) <= 1e-6 * np.abs(quad))


def test_mixture_law_vs_quadrature():
    rng = np.random.default_rng(27182)
    spec, xs = random_jump_spec(rng, 2, 2, mix_law=True, with_bump=True)
    closed = spec.evaluate(xs)
    quad = spec.evaluate_quadrature(xs)
    assert np.all(np.abs(closed - quad) <= 1e-6 * np.abs(quad))


def test_mixture_weight_linearity():
    jm = AffineJumpMap([0.2], [[0.1]], [[0.5]])
    law = GaussianDensity([0.1], [[0.6]])
    c0 = GaussianDensity([-0.7], [[1.0]])
    c1 = GaussianDensity([0.7], [[1.4]])
    xs = np.linspace(-2, 2, 9).reshape(-1, 1)
    v0 = JumpIntegralSpec(c0, jm, law).evaluate(xs)
    v1 = JumpIntegralSpec(c1, jm, law).evaluate(xs)
    for w in (0.2, 0.5, 0.9):
        mix = GaussianMixture([w, 1.0 - w], [c0, c1])
        vals = JumpIntegralSpec(mix, jm, law).evaluate(xs)
        assert np.allclose(vals, w * v0 + (1.0 - w) * v1, rtol=1e-14)


def test_bump_mixture_matches_weighted_sum():
    jm = AffineJumpMap([0.2], [[0.1]], [[0.5]])
    law = GaussianDensity([0.1], [[0.6]])
    b0 = GaussianBump([-0.5], [[1.0]])
    b1 = GaussianBump([0.8], [[0.7]])
    xs = np.linspace(-2, 2, 9).reshape(-1, 1)
    v0 = JumpIntegralSpec(STD1, jm, law, b0).evaluate(xs)
    v1 = JumpIntegralSpec(STD1, jm, law, b1).evaluate(xs)
    mix = BumpMixture([0.6, 0.3], [b0, b1])
    vals = JumpIntegralSpec(STD1, jm, law, mix).evaluate(xs)
    assert np.allclose(vals, 0.6 * v0 + 0.3 * v1, rtol=1e-14)


# ---------------------------------------------------------------- quadrature


def test_quadrature_convolution_value():
    spec = JumpIntegralSpec(STD1, AffineJumpMap([0.0], None, [[1.0]]), STD1)
    assert jump_integral_quadrature(spec, [0.0], n_nodes=40) == pytest.approx(
        N02_AT_0, rel=1e-12
    )


def test_quadrature_node_refinement():
    spec = JumpIntegralSpec(STD1, AffineJumpMap([0.0], None, [[1.0]]), STD1)
    truth = spec.evaluate([0.7])
    errs = [abs(spec.evaluate_quadrature([0.7], n_nodes=n) - truth) for n in (1, 2, 4, 8)]
    assert errs[0] > errs[1] > errs[2] > errs[3]
    assert abs(spec.evaluate_quadrature([0.7], n_nodes=40) - truth) < 1e-12


def test_quadrature_dimension_limit():
    law = GaussianDensity(np.zeros(4), np.eye(4))
    jm = AffineJumpMap(np.zeros(4), None, np.eye(4))
    p0 = GaussianDensity(np.zeros(4), np.eye(4))
    spec = JumpIntegralSpec(p0, jm, law)
    with pytest.raises(ValidationError):
        spec.evaluate_quadrature(np.zeros(4))


# ------------------------------------------------------ transport & positivity


def test_mass_transport_monte_carlo():
    # averaging J(x)/p0(x) over p0-samples must give 1: the integral moves
    # probability mass around without creating or destroying it
    rng = np.random.default_rng(99)
    cov = random_spd(rng, 2)
    p0 = GaussianDensity([0.0, 0.0], cov)
    jm = AffineJumpMap([0.3, -0.2], rng.uniform(-0.2, 0.2, (2, 2)), rng.uniform(-0.4, 0.4, (2, 2)))
    law = GaussianDensity([0.2, -0.1], random_spd(rng, 2))
    spec = JumpIntegralSpec(p0, jm, law)
    n = 200_000
    x = rng.standard_normal((n, 2)) @ np.linalg.cholesky(cov).T
    ratio = spec.evaluate(x) / p0.pdf(x)
    se = ratio.std(ddof=1) / math.sqrt(n)
    assert abs(ratio.mean() - 1.0) < 3 * se


def test_positivity_random_specs():
    rng = np.random.default_rng(555)
    for _ in range(5):
        k = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        spec, xs = random_jump_spec(rng, k, d, with_bump=bool(rng.integers(2)))
        assert np.all(spec.evaluate(xs) > 0.0)


def test_kind_gates_reject_mismatched_specs():
    law = GaussianDensity([0.0], [[1.0]])
    gspec = JumpIntegralSpec(STD1, AffineJumpMap([0.0], None, [[1.0]]), law)
    with pytest.raises(ValidationError):
        jump_integral_discrete(gspec, [0.0])
    dspec = JumpIntegralSpec(
        STD1, AffineJumpMap([0.0], None, [[1.0]]), DiscreteJumpLaw([[1.0]], [1.0])
    )
    with pytest.raises(ValidationError):
        jump_integral_gaussian(dspec, [0.0])
    with pytest.raises(ValidationError):
        jump_integral_mixture(gspec, [0.0])
    with pytest.raises(ValidationError):
        jump_integral_gaussian_bump(gspec, [0.0])
