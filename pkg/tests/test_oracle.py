"""Closed-form linear-model response curves and their internal consistency."""

import math

import numpy as np
import pytest
import scipy.integrate

from jumpresponse import (
    AffineJumpMap,
    BumpMixture,
    ConstantShape,
    DiscreteJumpLaw,
    GaussianBump,
    GaussianDensity,
    GaussianMixture,
    NotSPDError,
    OUParams,
    ValidationError,
    gaussian_product_moments,
    leading_order_gap,
    matrix_exponential,
    ou_exact_perturbed_mean,
    ou_mean_response_det,
    ou_mean_response_random,
    ou_response_operator,
    solve_lyapunov,
)

E_MINUS_1 = 0.36787944117144233
E_MINUS_2 = 0.1353352832366127
GAP_02_05 = 0.022222222222222227  # 0.2/0.9 - 0.2


def _random_stable(rng, k):
    b = rng.standard_normal((k, k))
    skew = rng.standard_normal((k, k))
    return b @ b.T / k + 0.5 * np.eye(k) + (skew - skew.T)


# ----------------------------------------------------------- lyapunov / expm


def test_lyapunov_scalar():
    c = solve_lyapunov([[2.0]], [[4.0]])
    assert c[0, 0] == pytest.approx(1.0, rel=1e-14)


def test_lyapunov_identity():
    c = solve_lyapunov(np.eye(2), 2.0 * np.eye(2))
    assert np.allclose(c, np.eye(2), atol=1e-13)


def test_lyapunov_residual_k4():
    rng = np.random.default_rng(17)
    L = _random_stable(rng, 4)
    g = rng.standard_normal((4, 4))
    ggt = g @ g.T + 0.1 * np.eye(4)
    c = solve_lyapunov(L, ggt)
    res = np.linalg.norm(L @ c + c @ L.T - ggt) / np.linalg.norm(ggt)
    assert res < 1e-10
    np.linalg.cholesky(c)  # SPD


def test_lyapunov_rejects_unstable():
    with pytest.raises(ValidationError):
        solve_lyapunov([[-1.0]], [[1.0]])


def test_expm_zero_is_identity():
    assert np.array_equal(matrix_exponential(np.zeros((3, 3))), np.eye(3))


def test_expm_scalar():
    assert matrix_exponential([[-1.0]], 2.0)[0, 0] == pytest.approx(E_MINUS_2, rel=1e-14)


def test_expm_nilpotent_exact():
    n = np.array([[0.0, 3.0], [0.0, 0.0]])  # n @ n = 0 so exp(n) = I + n
    assert np.allclose(matrix_exponential(n), np.eye(2) + n, atol=1e-15)


# ------------------------------------------------------------- det response


def test_det_response_at_zero_is_displacement():
    ou = OUParams([[2.0]], [[2.0]])
    curve = ou_mean_response_det(ou, AffineJumpMap([1.0]), [0.0])
    assert curve.values[0, 0] == 1.0


def test_det_response_scalar_decay():
    ou = OUParams([[2.0]], [[2.0]])
    curve = ou_mean_response_det(ou, AffineJumpMap([1.0]), [0.5])
    assert curve.values[0, 0] == pytest.approx(E_MINUS_1, rel=1e-14)


def test_det_response_mean_ignores_linear_part():
    # the stationary mean is zero, so E[H x] = 0 and only h survives
    ou = OUParams([[2.0]], [[2.0]])
    with_h = ou_mean_response_det(ou, AffineJumpMap([1.0], [[0.3]]), [0.0, 0.5, 1.0])
    without = ou_mean_response_det(ou, AffineJumpMap([1.0]), [0.0, 0.5, 1.0])
    assert np.array_equal(with_h.values, without.values)


def test_det_response_rejects_random_maps():
    ou = OUParams([[2.0]], [[2.0]])
    with pytest.raises(ValidationError):
        ou_mean_response_det(ou, AffineJumpMap([1.0], None, [[1.0]]), [0.0])


# ---------------------------------------------------------- random response


def test_random_response_zero_mean_law():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    law = GaussianDensity([0.0], [[1.0]])
    curve = ou_mean_response_random(ou, AffineJumpMap([0.0], None, [[1.0]]), law, [0.0, 1.0])
    assert np.all(curve.values == 0.0)


def test_random_response_halving_time():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    law = GaussianDensity([0.5], [[1.0]])
    curve = ou_mean_response_random(
        ou, AffineJumpMap([0.0], None, [[1.0]]), law, [math.log(2.0)]
    )
    assert curve.values[0, 0] == pytest.approx(0.25, rel=1e-14)


def test_random_response_symmetric_atoms():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    law = DiscreteJumpLaw([[1.0], [-1.0]], [0.5, 0.5])
    curve = ou_mean_response_random(ou, AffineJumpMap([0.0], None, [[1.0]]), law, [0.3, 0.8])
    assert np.all(curve.values == 0.0)


# --------------------------------------------------------- operator response


def test_operator_constant_shape_equals_random():
    ou = OUParams([[1.0, 0.2], [0.0, 2.0]], np.eye(2))
    jm = AffineJumpMap([0.5, -0.1], [[0.1, 0.0], [0.0, 0.2]], np.eye(2))
    law = GaussianDensity([0.3, 0.7], 0.5 * np.eye(2))
    tgrid = [0.0, 0.5, 1.5]
    op = ou_response_operator(ou, jm, law, ConstantShape(), tgrid)
    rnd = ou_mean_response_random(ou, jm, law, tgrid)
    assert np.array_equal(op.values, rnd.values)


def test_operator_matched_bump_mass():
    # g a unit-height Gaussian with width equal to the stationary covariance:
    # the zeroth moment is 2^(-K/2)
    for k in (1, 2, 3):
        ou = OUParams(np.eye(k), math.sqrt(2.0) * np.eye(k))
        bump = GaussianBump(np.zeros(k), ou.C)
        i0, i1 = gaussian_product_moments(ou.stationary_density(), bump)
        assert i0 == pytest.approx(2.0 ** (-k / 2.0), rel=1e-12)
        assert np.allclose(i1, 0.0, atol=1e-15)


def test_operator_h_zero_is_amplitude_scaling():
    # without a linear jump part the shape only rescales the curve by its mass
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    jm = AffineJumpMap([1.0], None, [[1.0]])
    law = GaussianDensity([0.5], [[1.0]])
    bump = GaussianBump([0.0], [[1.0]])
    tgrid = [0.0, 0.4, 1.0]
    op = ou_response_operator(ou, jm, law, bump, tgrid)
    rnd = ou_mean_response_random(ou, jm, law, tgrid)
    i0, _ = gaussian_product_moments(ou.stationary_density(), bump)
    assert np.allclose(op.values, i0 * rnd.values, rtol=1e-12)
    assert op.meta["shape_mass"] == pytest.approx(i0)


def test_operator_bump_mixture_linearity():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    jm = AffineJumpMap([1.0], [[0.2]], np.zeros((1, 1)))
    law = GaussianDensity([0.4], [[1.0]])
    b0 = GaussianBump([0.0], [[1.0]])
    b1 = GaussianBump([1.0], [[0.5]])
    mix = BumpMixture([0.6, 0.3], [b0, b1])
    tgrid = [0.0, 0.7]
    both = ou_response_operator(ou, jm, law, mix, tgrid)
    v0 = ou_response_operator(ou, jm, law, BumpMixture([0.6], [b0]), tgrid).values
    v1 = ou_response_operator(ou, jm, law, BumpMixture([0.3], [b1]), tgrid).values
    assert np.allclose(both.values, v0 + v1, rtol=1e-12, atol=1e-15)


def test_product_moments_match_quadrature_2d():
    # independent numerical route for the completed-square moments
    dens = GaussianDensity([0.2, -0.3], [[1.2, 0.3], [0.3, 0.8]])
    bump = GaussianBump([0.5, 0.1], [[0.6, -0.1], [-0.1, 0.9]])
    i0, i1 = gaussian_product_moments(dens, bump)

    def integrand(y, x, weight):
        pt = np.array([x, y])
        return weight(pt) * dens.pdf(pt[None, :])[0] * bump.value(pt)

    lo, hi = -8.0, 8.0
    num0, _ = scipy.integrate.dblquad(
        integrand, lo, hi, lo, hi, args=(lambda p: 1.0,), epsabs=1e-12
    )
    assert i0 == pytest.approx(num0, rel=1e-8)
    for j in range(2):
        numj, _ = scipy.integrate.dblquad(
            integrand, lo, hi, lo, hi, args=(lambda p, j=j: p[j],), epsabs=1e-12
        )
        assert i1[j] == pytest.approx(numj, rel=1e-7, abs=1e-12)


# ------------------------------------------------------- exact mean and gap


def test_exact_mean_h_zero_closed_form():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    jm = AffineJumpMap([1.0])
    alpha = 0.05
    t = np.array([0.0, 0.5, 1.0, 2.0, 5.0])
    curve = ou_exact_perturbed_mean(ou, jm, [], alpha, t)
    want = alpha * (1.0 - np.exp(-t))
    assert np.allclose(curve.values[:, 0], want, rtol=1e-12, atol=1e-15)
    assert not curve.meta["unbounded"]


def test_exact_mean_long_time_limit():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    jm = AffineJumpMap([1.0], [[0.5]])
    curve = ou_exact_perturbed_mean(ou, jm, [], 0.2, [200.0])
    assert curve.values[0, 0] == pytest.approx(0.2 / 0.9, rel=1e-12)


def test_exact_mean_alpha_zero():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    curve = ou_exact_perturbed_mean(ou, AffineJumpMap([1.0]), [], 0.0, [0.0, 1.0, 3.0])
    assert np.all(curve.values == 0.0)


def test_exact_mean_flags_unbounded():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    jm = AffineJumpMap([1.0], [[1.0]])  # L - alpha H = 1 - 2 < 0
    curve = ou_exact_perturbed_mean(ou, jm, [], 2.0, [1.0])
    assert curve.meta["unbounded"]


def test_gap_zero_when_no_linear_part():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    gap = leading_order_gap(ou, AffineJumpMap([1.0]), [], 0.3)
    assert np.all(gap == 0.0)


def test_gap_scalar_value():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    gap = leading_order_gap(ou, AffineJumpMap([1.0], [[0.5]]), [], 0.2)
    assert gap[0] == pytest.approx(GAP_02_05, rel=1e-12)
    # relative size of the correction: alpha H / (1 - alpha H)
    leading = 0.2 * 1.0
    assert gap[0] / leading == pytest.approx(0.1 / 0.9, rel=1e-12)


def test_gap_matches_exact_mean_limit():
    ou = OUParams([[1.0]], [[math.sqrt(2.0)]])
    jm = AffineJumpMap([1.0], [[0.5]])
    gap = leading_order_gap(ou, jm, [], 0.2)
    exact = ou_exact_perturbed_mean(ou, jm, [], 0.2, [200.0]).values[0, 0]
    leading = 0.2  # alpha L^{-1} h
    assert exact - leading == pytest.approx(gap[0], rel=1e-10)


# ---------------------------------------------------------------- invariants


def test_lyapunov_residual_randomized():
    rng = np.random.default_rng(99)
    for _ in range(25):
        k = int(rng.integers(1, 7))
        L = _random_stable(rng, k)
        g = rng.standard_normal((k, k))
        ggt = g @ g.T + 0.05 * np.eye(k)
        c = solve_lyapunov(L, ggt)
        res = np.linalg.norm(L @ c + c @ L.T - ggt) / np.linalg.norm(ggt)
        assert res < 1e-10


def test_exact_mean_equals_convolved_response_h_zero():
    # for H = 0 the first-order theory is exact, so the exact perturbed mean
    # must equal alpha times the time integral of the response curve
    ou = OUParams([[1.3, 0.4], [0.0, 0.7]], np.eye(2))
    jm = AffineJumpMap([1.0, -0.5])
    alpha = 0.08
    for t_end in (0.5, 2.0, 6.0):
        exact = ou_exact_perturbed_mean(ou, jm, [], alpha, [t_end]).values[0]
        num = scipy.integrate.quad_vec(
            lambda s: matrix_exponential(-ou.L, t_end - s) @ jm.h, 0.0, t_end,
            epsabs=1e-12,
        )[0]
        assert np.allclose(exact, alpha * num, rtol=1e-9, atol=1e-13)


def test_response_curves_decay():
    rng = np.random.default_rng(4)
    for _ in range(10):
        k = int(rng.integers(1, 5))
        L = _random_stable(rng, k)
        g = rng.standard_normal((k, k))
        ou = OUParams(L, g + np.eye(k) * (abs(np.linalg.eigvals(g)).max() + 0.5))
        jm = AffineJumpMap(rng.standard_normal(k))
        lam_min = np.linalg.eigvals(L).real.min()
        t_far = 20.0 / lam_min
        curve = ou_mean_response_det(ou, jm, [0.0, t_far])
        n0 = np.linalg.norm(curve.values[0])
        assert np.linalg.norm(curve.values[1]) < 1e-6 * n0


def test_gap_matches_first_neumann_term():
    rng = np.random.default_rng(31)
    for _ in range(20):
        k = int(rng.integers(1, 5))
        L = _random_stable(rng, k)
        g = rng.standard_normal((k, k))
        ou = OUParams(L, g + np.eye(k) * (abs(np.linalg.eigvals(g)).max() + 0.5))
        h = rng.standard_normal(k)
        hmat = rng.standard_normal((k, k)) * 0.3
        hstar = rng.standard_normal((k, 2))
        zbar = rng.standard_normal(2)
        linv = np.linalg.inv(L)
        r = 0.0
        alpha = 0.05
        while np.linalg.norm(alpha * linv @ hmat, 2) >= 0.1:
            alpha *= 0.5
        r = np.linalg.norm(alpha * linv @ hmat, 2)
        jm = AffineJumpMap(h, hmat, hstar)
        vec = h + hstar @ zbar
        gap = leading_order_gap(ou, jm, zbar, alpha)
        first = alpha**2 * linv @ hmat @ linv @ vec
        bound = alpha * np.linalg.norm(linv, 2) * r**2 / (1.0 - r) * np.linalg.norm(vec)
        assert np.linalg.norm(gap - first) <= bound * (1.0 + 1e-9) + 1e-15
