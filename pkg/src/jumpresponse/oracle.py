"""Closed-form linear-dynamics (OU) response curves.

For dx = -L x dt + G dW with L stable, the stationary law is a centred
Gaussian whose covariance solves L C + C L^T = G G^T, and conditional means
relax as exp(-t L).  These formulas provide exact targets against which the
trajectory-based estimators and Monte-Carlo ensembles are checked.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .curves import ResponseCurve
from .errors import NotSPDError, ValidationError
from .model import (
    AffineJumpMap,
    ConstantShape,
    BumpMixture,
    GaussianBump,
    GaussianDensity,
    JumpLaw,
    law_mean,
)

_LYAP_RTOL = 1e-10


def solve_lyapunov(L: np.ndarray, GGt: np.ndarray) -> np.ndarray:
    """Stationary covariance C with L C + C L^T = G G^T.

    Requires the spectrum of L in the open right half-plane and G G^T
    symmetric positive definite; the returned C is validated to be SPD and to
    satisfy the equation to relative residual 1e-10.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    GGt = np.atleast_2d(np.asarray(GGt, dtype=float))
    if L.shape[0] != L.shape[1] or L.shape != GGt.shape:
        raise ValidationError(f"L {L.shape} and GGt {GGt.shape} must be square and matching")
    eigs = np.linalg.eigvals(L)
    if np.any(eigs.real <= 0):
        raise ValidationError(
            f"relaxation matrix is not stable: eigenvalue real parts {np.sort(eigs.real)}"
        )
    c = scipy.linalg.solve_continuous_lyapunov(L, GGt)
    c = 0.5 * (c + c.T)
    residual = np.linalg.norm(L @ c + c @ L.T - GGt)
    scale = max(np.linalg.norm(GGt), np.finfo(float).tiny)
    if residual > _LYAP_RTOL * scale:
        raise NotSPDError(
            f"stationary covariance residual {residual / scale:.2e} exceeds {_LYAP_RTOL:.0e}"
        )
    try:
        np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("stationary covariance is not positive definite") from exc
    return c


def matrix_exponential(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(A t) via scaling-and-squaring (scipy backend)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValidationError("matrix exponential needs a square matrix")
    return scipy.linalg.expm(A * float(t))


class OUParams:
    """Linear model dx = -L x dt + G dW with cached stationary covariance."""

    def __init__(self, L, G):
        self.L = np.atleast_2d(np.asarray(L, dtype=float))
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        k = self.L.shape[0]
        if self.L.shape != (k, k) or self.G.shape != (k, k):
            raise ValidationError("L and G must be square K x K matrices")
        self.GGt = self.G @ self.G.T
        try:
            np.linalg.cholesky(0.5 * (self.GGt + self.GGt.T))
        except np.linalg.LinAlgError as exc:
            raise NotSPDError("G G^T must be positive definite") from exc
        self.C = solve_lyapunov(self.L, self.GGt)

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def stationary_density(self) -> GaussianDensity:
        return GaussianDensity(np.zeros(self.dim), self.C)


def _tgrid(tgrid) -> np.ndarray:
    t = np.atleast_1d(np.asarray(tgrid, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ValidationError("time grid must be a non-empty 1-d array")
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValidationError("time grid must be non-negative and strictly increasing")
    return t


def _relaxation_curve(ou: OUParams, vec: np.ndarray, tgrid: np.ndarray, meta: dict) -> ResponseCurve:
    t = _tgrid(tgrid)
    vals = np.empty((t.size, ou.dim))
    for i, ti in enumerate(t):
        vals[i] = matrix_exponential(-ou.L, ti) @ vec
    return ResponseCurve(lags=t, values=vals, stderr=np.zeros_like(vals), meta=meta)


def _require_deterministic(jump_map: AffineJumpMap) -> None:
    if jump_map.jump_dim and np.any(jump_map.Hstar != 0.0):
        raise ValidationError("this response formula requires a jump map without random input")


def ou_mean_response_det(ou: OUParams, jump_map: AffineJumpMap, tgrid) -> ResponseCurve:
    """Mean response to a deterministic jump applied at time zero.

    For the centred stationary state the average displacement is h (the H x
    part averages to zero), relaxed by exp(-t L).
    """
    _require_deterministic(jump_map)
    if jump_map.dim != ou.dim:
        raise ValidationError("jump map dimension does not match the model")
    return _relaxation_curve(ou, jump_map.h, tgrid, {"kind": "det_jump"})


def ou_mean_response_random(
    ou: OUParams, jump_map: AffineJumpMap, law: JumpLaw, tgrid
) -> ResponseCurve:
    """Mean response to a randomised jump applied at time zero: exp(-tL)(h + H* zbar)."""
    if jump_map.dim != ou.dim:
        raise ValidationError("jump map dimension does not match the model")
    zbar = law_mean(law)
    if zbar.size != jump_map.jump_dim:
        raise ValidationError(
            f"law dimension {zbar.size} does not match jump input dimension {jump_map.jump_dim}"
        )
    vec = jump_map.h + jump_map.Hstar @ zbar
    return _relaxation_curve(ou, vec, tgrid, {"kind": "random_jump"})


def gaussian_product_moments(
    density: GaussianDensity, bump: GaussianBump
) -> tuple[float, np.ndarray]:
    """Zeroth and first moments of bump(x) against a Gaussian density.

    Returns (i0, i1) with i0 = int g(x) p(x) dx and i1 = int x g(x) p(x) dx.
    Completing the square: Sigma = (C^-1 + W^-1)^-1 and
    mu = Sigma (C^-1 m + W^-1 c) give i0 = sqrt(det Sigma / det C)
    * exp(-(m^T C^-1 m + c^T W^-1 c - mu^T Sigma^-1 mu) / 2) and i1 = mu i0.
    """
    if density.dim != bump.dim:
        raise ValidationError("density and bump dimensions differ")
    prec_c = density.precision()
    prec_w = bump.precision()
    sigma_inv = prec_c + prec_w
    sigma = np.linalg.inv(sigma_inv)
    sigma = 0.5 * (sigma + sigma.T)
    mu = sigma @ (prec_c @ density.mean + prec_w @ bump.center)
    sign, logdet_sigma = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise NotSPDError("product covariance is not positive definite")
    quad = (
        density.mean @ prec_c @ density.mean
        + bump.center @ prec_w @ bump.center
        - mu @ sigma_inv @ mu
    )
    i0 = float(np.exp(0.5 * (logdet_sigma - density.log_det_cov) - 0.5 * quad))
    return i0, mu * i0


def ou_response_operator(
    ou: OUParams, jump_map: AffineJumpMap, law: JumpLaw, gshape, tgrid
) -> ResponseCurve:
    """Exact response kernel for state-dependent intensity shapes.

    With shape g the kernel is exp(-tL) [ (h + H* zbar) i0 + H i1 ] where
    i0, i1 are the moments of g against the stationary density.  A constant
    shape reduces to the randomised-jump curve.
    """
    if jump_map.dim != ou.dim:
        raise ValidationError("jump map dimension does not match the model")
    zbar = law_mean(law)
    if zbar.size != jump_map.jump_dim:
        raise ValidationError("law dimension does not match jump input dimension")
    base = jump_map.h + jump_map.Hstar @ zbar
    p0 = ou.stationary_density()
    if isinstance(gshape, ConstantShape):
        i0, i1 = 1.0, np.zeros(ou.dim)
    elif isinstance(gshape, GaussianBump):
        i0, i1 = gaussian_product_moments(p0, gshape)
    elif isinstance(gshape, BumpMixture):
        i0 = 0.0
        i1 = np.zeros(ou.dim)
        for w, b in zip(gshape.weights, gshape.bumps):
            m0, m1 = gaussian_product_moments(p0, b)
            i0 += w * m0
            i1 = i1 + w * m1
    else:
        raise ValidationError(f"unsupported intensity shape {type(gshape).__name__}")
    vec = base * i0 + jump_map.H @ i1
    return _relaxation_curve(ou, vec, tgrid, {"kind": "response_operator", "shape_mass": i0})


def ou_exact_perturbed_mean(
    ou: OUParams, jump_map: AffineJumpMap, zbar, alpha: float, tgrid
) -> ResponseCurve:
    """Exact perturbed mean under constant unit modulation and constant shape.

    Delta(t) = alpha (L - alpha H)^{-1} (I - exp(-t (L - alpha H))) (h + H* zbar).
    If L - alpha H has an eigenvalue with non-positive real part the curve
    grows without bound; it is still returned, flagged in meta["unbounded"].
    """
    alpha = float(alpha)
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    zbar = np.atleast_1d(np.asarray(zbar, dtype=float)) if np.size(zbar) else np.zeros(0)
    if zbar.size != jump_map.jump_dim:
        raise ValidationError("zbar dimension does not match jump input dimension")
    t = _tgrid(tgrid)
    vec = jump_map.h + jump_map.Hstar @ zbar
    m = ou.L - alpha * jump_map.H
    eigs = np.linalg.eigvals(m)
    unbounded = bool(np.any(eigs.real <= 0))
    if abs(np.linalg.det(m)) < 1e-300:
        raise ValidationError("effective relaxation matrix L - alpha H is singular")
    vals = np.empty((t.size, ou.dim))
    for i, ti in enumerate(t):
        kernel = np.eye(ou.dim) - matrix_exponential(-m, ti)
        vals[i] = alpha * np.linalg.solve(m, kernel @ vec)
    return ResponseCurve(
        lags=t,
        values=vals,
        stderr=np.zeros_like(vals),
        meta={"kind": "exact_perturbed_mean", "unbounded": unbounded},
    )


def leading_order_gap(
    ou: OUParams, jump_map: AffineJumpMap, zbar, alpha: float
) -> np.ndarray:
    """Infinite-time gap between the exact and first-order perturbed means.

    alpha [ (L - alpha H)^{-1} - L^{-1} ] (h + H* zbar); zero when H = 0.
    """
    alpha = float(alpha)
    zbar = np.atleast_1d(np.asarray(zbar, dtype=float)) if np.size(zbar) else np.zeros(0)
    if zbar.size != jump_map.jump_dim:
        raise ValidationError("zbar dimension does not match jump input dimension")
    vec = jump_map.h + jump_map.Hstar @ zbar
    m = ou.L - alpha * jump_map.H
    if abs(np.linalg.det(m)) < 1e-300:
        raise ValidationError("effective relaxation matrix L - alpha H is singular")
    return alpha * (np.linalg.solve(m, vec) - np.linalg.solve(ou.L, vec))
