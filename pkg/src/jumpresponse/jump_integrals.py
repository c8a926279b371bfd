"""Pullback integrals of a reference density over the jump law.

The central object is

    value(x) = int p0( hinv(x, z) ) * jac * g( hinv(x, z) )  law(dz),

where hinv is the inverse jump map at fixed z, jac its (constant) Jacobian,
and g an optional intensity shape.  For Gaussian reference densities, laws,
and shapes (and mixtures of them) this has a closed form obtained by
completing the square in z; discrete laws reduce to finite sums and a
degenerate map (no z-dependence) to a single pullback evaluation.

A tensor-product Gauss-Hermite quadrature over the law serves as an
independent cross-check of the closed forms; it shares only the pointwise
density/shape evaluations with the code path it verifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, ValidationError
from .model import (
    AffineJumpMap,
    BumpMixture,
    ConstantShape,
    DiscreteJumpLaw,
    GaussianBump,
    GaussianDensity,
    GaussianMixture,
)

_LOG_2PI = math.log(2.0 * math.pi)


def _density_terms(p0) -> list[tuple[float, GaussianDensity]]:
    if isinstance(p0, GaussianDensity):
        return [(1.0, p0)]
    if isinstance(p0, GaussianMixture):
        if not p0.probability:
            raise ValidationError("reference density mixture must be a probability mixture")
        return list(zip((float(w) for w in p0.weights), p0.components))
    raise ValidationError(f"unsupported reference density {type(p0).__name__}")


def _law_terms(law) -> list[tuple[float, GaussianDensity]]:
    if isinstance(law, GaussianDensity):
        return [(1.0, law)]
    if isinstance(law, GaussianMixture):
        if not law.probability:
            raise ValidationError("jump law mixture must be a probability mixture")
        return list(zip((float(w) for w in law.weights), law.components))
    raise ValidationError(f"law {type(law).__name__} has no Gaussian decomposition")


def _shape_terms(gshape) -> list[tuple[float, GaussianBump | None]]:
    if gshape is None or isinstance(gshape, ConstantShape):
        return [(1.0, None)]
    if isinstance(gshape, GaussianBump):
        return [(1.0, gshape)]
    if isinstance(gshape, BumpMixture):
        return list(zip((float(w) for w in gshape.weights), gshape.bumps))
    raise ValidationError(f"unsupported intensity shape {type(gshape).__name__}")


@dataclass
class _ClosedTerm:
    """One fully Gaussian term of the integral, assembled once.

    With M = I + H, S = M^{-1} H*, u(x) = M^{-1}(h - x), and precisions
    P = C^{-1} + W^{-1} (reference plus shape) and R = C_law^{-1}:

        A            = S^T P S + R
        b(x)         = S^T (P u(x) + r) - R m_law
        c(x)         = u^T P u + 2 u^T r + s0
        term(x)      = weight * norm * exp( (b^T A^{-1} b - c) / 2 )

    where r = C^{-1} m + W^{-1} m_shape and s0 collects the constant
    quadratic forms of the three means.
    """

    weight: float
    log_norm: float
    P: np.ndarray
    r: np.ndarray
    s0: float
    chol_a: np.ndarray
    r_mlaw: np.ndarray


class JumpIntegralSpec:
    """Evaluator for the pullback integral of p0 (times a shape) over a law.

    All x-independent algebra is assembled at construction; evaluation over a
    batch of states costs one triangular solve in the state dimension per
    point plus one in the law dimension per Gaussian term.
    """

    def __init__(self, p0, jump_map: AffineJumpMap, law=None, gshape=None):
        self.p0 = p0
        self.jump_map = jump_map
        self.law = law
        self.gshape = None if isinstance(gshape, ConstantShape) else gshape
        k = jump_map.dim
        if p0.dim != k:
            raise DimensionMismatchError("reference density dimension does not match the map")
        if self.gshape is not None and self.gshape.dim != k:
            raise DimensionMismatchError("intensity shape dimension does not match the map")
        d = jump_map.jump_dim
        if d > 0 and not jump_map.z_free and law is None:
            raise ValidationError("jump map has a random input but no law was given")
        if law is not None and d > 0 and law.dim != d:
            raise DimensionMismatchError("law dimension does not match the jump input")
        if jump_map.z_free:
            self._mode = "direct"
        elif isinstance(law, DiscreteJumpLaw):
            self._mode = "discrete"
        else:
            self._mode = "closed"
            self._terms = self._assemble_closed_terms()

    # -- assembly ---------------------------------------------------------

    def _assemble_closed_terms(self) -> list[_ClosedTerm]:
        jm = self.jump_map
        k = jm.dim
        eye = np.eye(k)
        # M^{-1} and derived pieces, via the map's LU factorisation
        minv = scipy.linalg.lu_solve(jm._lu, eye)
        s_mat = minv @ jm.Hstar
        u0 = minv @ jm.h
        self._minv = minv
        self._u0 = u0
        terms: list[_ClosedTerm] = []
        for w_p, comp in _density_terms(self.p0):
            prec_c = comp.precision()
            for w_l, lcomp in _law_terms(self.law):
                prec_l = lcomp.precision()
                r_mlaw = prec_l @ lcomp.mean
                s_law = float(lcomp.mean @ r_mlaw)
                for w_g, bump in _shape_terms(self.gshape):
                    if bump is None:
                        p = prec_c
                        r = prec_c @ comp.mean
                        s0 = float(comp.mean @ r) + s_law
                    else:
                        prec_w = bump.precision()
                        p = prec_c + prec_w
                        r = prec_c @ comp.mean + prec_w @ bump.center
                        s0 = (
                            float(comp.mean @ prec_c @ comp.mean)
                            + float(bump.center @ prec_w @ bump.center)
                            + s_law
                        )
                    a = s_mat.T @ p @ s_mat + prec_l
                    a = 0.5 * (a + a.T)
                    chol_a = np.linalg.cholesky(a)
                    log_det_a = 2.0 * np.log(np.diag(chol_a)).sum()
                    log_norm = (
                        -0.5 * k * _LOG_2PI
                        - jm._log_abs_det
                        - 0.5 * (comp.log_det_cov + lcomp.log_det_cov + log_det_a)
                    )
                    terms.append(
                        _ClosedTerm(
                            weight=w_p * w_l * w_g,
                            log_norm=log_norm,
                            P=p,
                            r=r,
                            s0=s0,
                            chol_a=chol_a,
                            r_mlaw=r_mlaw,
                        )
                    )
        self._s_mat = s_mat
        return terms

    # -- evaluation paths --------------------------------------------------

    def _pointwise(self, pulled: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.p0.pdf(pulled)) * self.jump_map.jacobian
        if self.gshape is not None:
            vals = vals * np.asarray(self.gshape.value(pulled))
        return vals

    def _eval_direct(self, x: np.ndarray) -> np.ndarray:
        return self._pointwise(self.jump_map.pullback(x, None))

    def _eval_discrete(self, x: np.ndarray) -> np.ndarray:
        law: DiscreteJumpLaw = self.law
        vals = law.probs[0] * self._pointwise(self.jump_map.pullback(x, law.atoms[0]))
        for prob, atom in zip(law.probs[1:], law.atoms[1:]):
            vals = vals + prob * self._pointwise(self.jump_map.pullback(x, atom))
        return vals

    def _eval_closed(self, x: np.ndarray) -> np.ndarray:
        u = self._u0 - x @ self._minv.T
        s_mat = self._s_mat
        vals = np.zeros(x.shape[0])
        for term in self._terms:
            up = u @ term.P
            b = (up + term.r) @ s_mat - term.r_mlaw
            y = scipy.linalg.cho_solve((term.chol_a, True), b.T, check_finite=False)
            quad_b = np.einsum("ij,ji->i", b, y)
            c = np.einsum("ij,ij->i", up, u) + 2.0 * (u @ term.r) + term.s0
            vals = vals + term.weight * np.exp(term.log_norm + 0.5 * (quad_b - c))
        return vals

    def evaluate(self, x) -> np.ndarray | float:
        """Integral value(s) at one state (K,) or a batch (N, K)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.jump_map.dim:
            raise DimensionMismatchError("state dimension does not match the jump map")
        if self._mode == "direct":
            out = self._eval_direct(pts)
        elif self._mode == "discrete":
            out = self._eval_discrete(pts)
        else:
            out = self._eval_closed(pts)
        return float(out[0]) if scalar else out

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate_quadrature(self, x, n_nodes: int = 40) -> np.ndarray | float:
        """Direct quadrature of the law integral (cross-check oracle).

        Discrete laws are summed exactly; Gaussian components use a
        tensor-product Gauss-Hermite rule with n_nodes per axis (law
        dimension at most 3).
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.jump_map.dim:
            raise DimensionMismatchError("state dimension does not match the jump map")
        if self._mode == "direct":
            out = self._eval_direct(pts)
        elif self._mode == "discrete":
            out = self._eval_discrete(pts)
        else:
            d = self.jump_map.jump_dim
            if d > 3:
                raise ValidationError("quadrature cross-check supports law dimension <= 3")
            if n_nodes < 1:
                raise ValidationError("n_nodes must be positive")
            nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
            grids = np.meshgrid(*([nodes] * d), indexing="ij")
            xi = np.stack([g.ravel() for g in grids], axis=-1)
            wgrids = np.meshgrid(*([weights] * d), indexing="ij")
            wprod = np.ones(xi.shape[0])
            for g in wgrids:
                wprod = wprod * g.ravel()
            wprod = wprod / math.pi ** (d / 2.0)
            out = np.zeros(pts.shape[0])
            for w_l, lcomp in _law_terms(self.law):
                z_nodes = lcomp.mean + math.sqrt(2.0) * xi @ lcomp.chol_cov.T
                for i, row in enumerate(pts):
                    pulled = self.jump_map.pullback(row, z_nodes)
                    out[i] += w_l * float(wprod @ self._pointwise(pulled))
        return float(out[0]) if scalar else out


def jump_integral_discrete(spec: JumpIntegralSpec, x) -> np.ndarray | float:
    """Finite-sum path: requires a discrete law (or a z-free map)."""
    if spec._mode not in ("discrete", "direct"):
        raise ValidationError("spec does not describe a discrete-law integral")
    return spec.evaluate(x)


def jump_integral_gaussian(spec: JumpIntegralSpec, x) -> np.ndarray | float:
    """Single-Gaussian closed form: Gaussian p0 and law, constant shape."""
    if spec._mode != "closed" or spec.gshape is not None:
        raise ValidationError("spec is not a plain Gaussian integral")
    if not isinstance(spec.p0, GaussianDensity) or not isinstance(spec.law, GaussianDensity):
        raise ValidationError("spec is not a plain Gaussian integral")
    return spec.evaluate(x)


def jump_integral_gaussian_bump(spec: JumpIntegralSpec, x) -> np.ndarray | float:
    """Closed form with a Gaussian intensity bump folded in."""
    if spec._mode != "closed" or not isinstance(spec.gshape, GaussianBump):
        raise ValidationError("spec does not include a single Gaussian bump")
    if not isinstance(spec.p0, GaussianDensity) or not isinstance(spec.law, GaussianDensity):
        raise ValidationError("spec is not a single-Gaussian bump integral")
    return spec.evaluate(x)


def jump_integral_mixture(spec: JumpIntegralSpec, x) -> np.ndarray | float:
    """Closed form where p0, the law, or the shape is a finite mixture."""
    if spec._mode != "closed":
        raise ValidationError("spec has no Gaussian mixture decomposition")
    if not (
        isinstance(spec.p0, GaussianMixture)
        or isinstance(spec.law, GaussianMixture)
        or isinstance(spec.gshape, BumpMixture)
    ):
        raise ValidationError("spec has no mixture component")
    return spec.evaluate(x)


def jump_integral_quadrature(spec: JumpIntegralSpec, x, n_nodes: int = 40) -> np.ndarray | float:
    """Quadrature oracle; see JumpIntegralSpec.evaluate_quadrature."""
    return spec.evaluate_quadrature(x, n_nodes=n_nodes)
