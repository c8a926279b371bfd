"""Shared fixtures: moderately long exact linear-model trajectories.

Session-scoped so the statistical tests in several modules reuse one
simulation; sizes are chosen to keep the whole unit suite under a minute
while leaving clear 3-SE margins.
"""

import numpy as np
import pytest

from jumpresponse import OUModel, OUParams, simulate_ou_exact


@pytest.fixture(scope="session")
def ou_l2():
    """Scalar model with L=2, G=2, so the stationary variance is exactly 1."""
    return OUModel([[2.0]], [[2.0]])


@pytest.fixture(scope="session")
def ou_l2_params():
    return OUParams([[2.0]], [[2.0]])


@pytest.fixture(scope="session")
def ou_l2_traj(ou_l2):
    return simulate_ou_exact(ou_l2, [0.0], 0.05, 400_000, seed=1234)


@pytest.fixture(scope="session")
def ou_l1():
    """Scalar model with L=1, G=sqrt(2), stationary variance 1."""
    return OUModel([[1.0]], [[np.sqrt(2.0)]])


@pytest.fixture(scope="session")
def ou_l1_params():
    return OUParams([[1.0]], [[np.sqrt(2.0)]])


@pytest.fixture(scope="session")
def ou_l1_traj(ou_l1):
    return simulate_ou_exact(ou_l1, [0.0], 0.05, 400_000, seed=976)


def random_spd(rng, k, lo=0.5, hi=2.0):
    """SPD matrix with eigenvalues drawn uniformly from [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    return (q * rng.uniform(lo, hi, k)) @ q.T


def random_jump_spec(rng, k, d, with_bump=False, mix_p0=False, mix_law=False):
    """Random closed-form integral spec plus x-points within two sigma.

    Scales are kept moderate (|H| ~ 0.3/sqrt(K), |H*| ~ 0.6/sqrt(d),
    covariance eigenvalues in [0.5, 2]) so the 40-node quadrature oracle
    resolves the integrand to well below 1e-6 relative error.
    """
    from jumpresponse import (
        AffineJumpMap,
        GaussianBump,
        GaussianDensity,
        GaussianMixture,
        JumpIntegralSpec,
    )

    def density(shift=0.0):
        return GaussianDensity(rng.uniform(-0.5, 0.5, k) + shift, random_spd(rng, k))

    if mix_p0:
        w = rng.uniform(0.3, 0.7)
        p0 = GaussianMixture([w, 1.0 - w], [density(-0.8), density(0.8)])
        p_cov = random_spd(rng, k)  # only used for picking x-points
        p_mean = np.zeros(k)
    else:
        p0 = density()
        p_cov, p_mean = p0.cov, p0.mean
    h = 0.5 * rng.standard_normal(k)
    hmat = rng.uniform(-0.3, 0.3, (k, k)) / np.sqrt(k)
    hstar = rng.uniform(-0.6, 0.6, (k, d)) / np.sqrt(d)
    jm = AffineJumpMap(h, hmat, hstar)

    def law_comp():
        return GaussianDensity(rng.uniform(-1.0, 1.0, d), random_spd(rng, d))

    if mix_law:
        w = rng.uniform(0.3, 0.7)
        law = GaussianMixture([w, 1.0 - w], [law_comp(), law_comp()])
    else:
        law = law_comp()
    bump = (
        GaussianBump(rng.uniform(-1.5, 1.5, k), random_spd(rng, k)) if with_bump else None
    )
    spec = JumpIntegralSpec(p0, jm, law, bump)
    chol = np.linalg.cholesky(p_cov)
    xs = p_mean + rng.uniform(-2.0, 2.0, (20, k)) @ chol.T
    return spec, xs
