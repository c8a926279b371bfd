"""Core domain types: densities, jump maps, jump laws, intensities, trajectories.

States are plain 1-d float arrays of length K; batches of states are (N, K)
arrays.  A jump perturbation displaces the state instantaneously through the
affine map x -> x + h + H x + H* z, where z is an extra random input of
dimension d >= 0 drawn from a jump law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from .errors import (
    DimensionMismatchError,
    EstimatorError,
    NotSPDError,
    SingularMapError,
    ValidationError,
)

_LOG_2PI = math.log(2.0 * math.pi)
_SYM_RTOL = 1e-12
_WEIGHT_SUM_TOL = 1e-12
_UNIT_NORM_TOL = 1e-12


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite entries")
    return v


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} contains non-finite entries")
    return m


def _check_symmetric(c: np.ndarray, name: str) -> np.ndarray:
    scale = np.abs(c).max()
    if scale > 0 and np.abs(c - c.T).max() > _SYM_RTOL * scale:
        raise NotSPDError(f"{name} is not symmetric")
    return 0.5 * (c + c.T)


class GaussianDensity:
    """Multivariate normal density with a cached Cholesky factorisation.

    The covariance is validated to be symmetric positive definite at
    construction time (via the factorisation itself), so evaluation and
    sampling never re-check.
    """

    def __init__(self, mean, cov):
        self.mean = _as_vector(mean, "mean")
        cov = _as_matrix(cov, "cov")
        k = self.mean.size
        if cov.shape != (k, k):
            raise DimensionMismatchError(
                f"cov shape {cov.shape} does not match mean dimension {k}"
            )
        self.cov = _check_symmetric(cov, "cov")
        try:
            self._chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise NotSPDError("cov is not positive definite") from exc
        self._log_det = 2.0 * np.log(np.diag(self._chol)).sum()
        self._log_norm = -0.5 * (k * _LOG_2PI + self._log_det)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def log_det_cov(self) -> float:
        return float(self._log_det)

    @property
    def chol_cov(self) -> np.ndarray:
        return self._chol

    def precision(self) -> np.ndarray:
        """Inverse covariance, computed from the cached factor."""
        eye = np.eye(self.dim)
        half = scipy.linalg.solve_triangular(self._chol, eye, lower=True)
        return half.T @ half

    def logpdf(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"points have dimension {pts.shape[1]}, density has {self.dim}"
            )
        y = scipy.linalg.solve_triangular(self._chol, (pts - self.mean).T, lower=True)
        out = self._log_norm - 0.5 * np.einsum("ij,ij->j", y, y)
        return float(out[0]) if scalar else out

    def pdf(self, x) -> np.ndarray | float:
        return np.exp(self.logpdf(x))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n i.i.d. samples, shape (n, K)."""
        return self.mean + rng.standard_normal((n, self.dim)) @ self._chol.T


class GaussianMixture:
    """Finite Gaussian mixture.

    With ``probability=True`` (default) the weights must sum to one within
    1e-12; with ``probability=False`` they form an unnormalised combination.
    Zero weights are allowed (the component is inert); negative ones are not.
    """

    def __init__(self, weights, components, probability: bool = True):
        self.weights = _as_vector(weights, "weights")
        self.components = list(components)
        if len(self.components) != self.weights.size or not self.components:
            raise DimensionMismatchError("weights and components must match and be non-empty")
        if np.any(self.weights < 0) or self.weights.sum() <= 0:
            raise ValidationError("mixture weights must be non-negative with a positive sum")
        if probability and abs(self.weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValidationError(
                f"probability mixture weights must sum to 1, got {self.weights.sum()!r}"
            )
        self.probability = probability
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise DimensionMismatchError(f"mixture components have mixed dimensions {dims}")

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def mean(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        return np.sum([wi * c.mean for wi, c in zip(w, self.components)], axis=0)

    def pdf(self, x) -> np.ndarray | float:
        vals = self.weights[0] * np.asarray(self.components[0].pdf(x))
        for w, c in zip(self.weights[1:], self.components[1:]):
            vals = vals + w * np.asarray(c.pdf(x))
        return float(vals) if vals.ndim == 0 else vals

    def logpdf(self, x) -> np.ndarray | float:
        logs = np.stack([np.atleast_1d(c.logpdf(x)) for c in self.components])
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        out = scipy.special.logsumexp(logs + log_w[:, None], axis=0)
        return float(out[0]) if np.asarray(x).ndim == 1 else out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        w = self.weights / self.weights.sum()
        idx = rng.choice(len(self.components), size=n, p=w)
        out = np.empty((n, self.dim))
        for i, c in enumerate(self.components):
            sel = idx == i
            if sel.any():
                out[sel] = c.sample(rng, int(sel.sum()))
        return out


class AffineJumpMap:
    """Instantaneous displacement x -> x + h + H x + H* z with explicit inverse.

    d = 0 (no random input) is represented by an empty H* with zero columns;
    all z-dependent operations then accept an empty z.
    """

    def __init__(self, h, H=None, Hstar=None):
        self.h = _as_vector(h, "h")
        k = self.h.size
        self.H = np.zeros((k, k)) if H is None else _as_matrix(H, "H")
        if self.H.shape != (k, k):
            raise DimensionMismatchError(f"H shape {self.H.shape} does not match dim {k}")
        if Hstar is None:
            self.Hstar = np.zeros((k, 0))
        else:
            hs = np.asarray(Hstar, dtype=float)
            if hs.ndim == 0:
                hs = hs.reshape(1, 1)
            elif hs.ndim == 1:
                hs = hs.reshape(k, -1) if hs.size else hs.reshape(k, 0)
            if hs.ndim != 2 or hs.shape[0] != k:
                raise DimensionMismatchError(f"Hstar shape {hs.shape} does not match dim {k}")
            if hs.size and not np.all(np.isfinite(hs)):
                raise ValidationError("Hstar contains non-finite entries")
            self.Hstar = hs
        m = np.eye(k) + self.H
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.min() <= 1e-12 * max(diag.max(), np.finfo(float).tiny):
            raise SingularMapError("I + H is numerically singular; the jump map is not invertible")
        self._lu = (lu, piv)
        sign, logabsdet = np.linalg.slogdet(m)
        self._log_abs_det = logabsdet
        # |d(inverse)/dx| = 1 / |det(I + H)|
        self.jacobian = math.exp(-logabsdet)
        self.abs_det = math.exp(logabsdet)

    @property
    def dim(self) -> int:
        return self.h.size

    @property
    def jump_dim(self) -> int:
        return self.Hstar.shape[1]

    @property
    def z_free(self) -> bool:
        """True when the map does not actually depend on z (d = 0 or H* = 0)."""
        return self.jump_dim == 0 or not self.Hstar.any()

    def _offset(self, z) -> np.ndarray:
        if self.jump_dim == 0:
            return self.h
        if z is None:
            if self.z_free:
                return self.h
            raise DimensionMismatchError("this jump map needs a z input of dimension %d" % self.jump_dim)
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            z = z.reshape(1)
        if z.shape[-1] != self.jump_dim:
            raise DimensionMismatchError(
                f"z has dimension {z.shape[-1]}, map expects {self.jump_dim}"
            )
        return self.h + z @ self.Hstar.T

    def apply(self, x, z=None) -> np.ndarray:
        """Post-jump state(s); x may be (K,) or (N, K), z (d,) or (N, d)."""
        x = np.asarray(x, dtype=float)
        return x + self._offset(z) + x @ self.H.T

    def pullback(self, x, z=None) -> np.ndarray:
        """Pre-image of x under the jump map at fixed z."""
        x = np.asarray(x, dtype=float)
        rhs = x - self._offset(z)
        scalar = rhs.ndim == 1
        sol = scipy.linalg.lu_solve(self._lu, np.atleast_2d(rhs).T, check_finite=False).T
        return sol[0] if scalar else sol

    def invert(self, x, z=None) -> tuple[np.ndarray, float]:
        """Pre-image and the (constant, positive) inverse-map Jacobian."""
        return self.pullback(x, z), self.jacobian


class DiscreteJumpLaw:
    """Jump law concentrated on finitely many atoms with given probabilities."""

    def __init__(self, atoms, probs):
        a = np.asarray(atoms, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2 or a.shape[0] == 0:
            raise DimensionMismatchError("atoms must be a non-empty (Q, d) array")
        if not np.all(np.isfinite(a)):
            raise ValidationError("atoms contain non-finite entries")
        p = _as_vector(probs, "probs")
        if p.size != a.shape[0]:
            raise DimensionMismatchError("probs length must match number of atoms")
        if np.any(p <= 0):
            raise ValidationError("atom probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValidationError(f"atom probabilities must sum to 1, got {p.sum()!r}")
        for i in range(a.shape[0]):
            for j in range(i + 1, a.shape[0]):
                if np.array_equal(a[i], a[j]):
                    raise ValidationError(f"atoms {i} and {j} coincide")
        self.atoms = a
        self.probs = p

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.probs @ self.atoms

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(self.atoms.shape[0], size=n, p=self.probs)
        return self.atoms[idx]


# A jump law is a distribution over the extra jump input z.
JumpLaw = DiscreteJumpLaw | GaussianDensity | GaussianMixture


def law_mean(law: JumpLaw) -> np.ndarray:
    """Mean of a jump law, uniformly across law kinds."""
    m = law.mean
    return np.asarray(m, dtype=float)


class ConstantShape:
    """State-independent intensity shape g(x) = 1."""

    sup = 1.0

    def value(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        return 1.0 if x.ndim == 1 else np.ones(x.shape[0])

    def __call__(self, x):
        return self.value(x)


class GaussianBump:
    """Unnormalised Gaussian intensity shape with peak value one.

    g(x) = exp(-0.5 (x - center)^T width^{-1} (x - center)).
    """

    sup = 1.0

    def __init__(self, center, width):
        self.center = _as_vector(center, "center")
        width = _as_matrix(width, "width")
        k = self.center.size
        if width.shape != (k, k):
            raise DimensionMismatchError("bump width must be K x K")
        width = _check_symmetric(width, "width")
        try:
            self._chol = np.linalg.cholesky(width)
        except np.linalg.LinAlgError as exc:
            raise NotSPDError("bump width is not positive definite") from exc
        self.width = width

    @property
    def dim(self) -> int:
        return self.center.size

    def precision(self) -> np.ndarray:
        eye = np.eye(self.dim)
        half = scipy.linalg.solve_triangular(self._chol, eye, lower=True)
        return half.T @ half

    def log_value(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError("point dimension does not match bump")
        y = scipy.linalg.solve_triangular(self._chol, (pts - self.center).T, lower=True)
        out = -0.5 * np.einsum("ij,ij->j", y, y)
        return float(out[0]) if scalar else out

    def value(self, x) -> np.ndarray | float:
        return np.exp(self.log_value(x))

    def __call__(self, x):
        return self.value(x)


class BumpMixture:
    """Positive combination of Gaussian bumps; weights are unnormalised."""

    def __init__(self, weights, bumps):
        self.weights = _as_vector(weights, "weights")
        self.bumps = list(bumps)
        if len(self.bumps) != self.weights.size or not self.bumps:
            raise DimensionMismatchError("weights and bumps must match and be non-empty")
        if np.any(self.weights <= 0):
            raise ValidationError("bump weights must be strictly positive")
        dims = {b.dim for b in self.bumps}
        if len(dims) != 1:
            raise DimensionMismatchError("bumps have mixed dimensions")

    @property
    def dim(self) -> int:
        return self.bumps[0].dim

    @property
    def sup(self) -> float:
        # each bump peaks at one, so the sum of weights dominates
        return float(self.weights.sum())

    def value(self, x) -> np.ndarray | float:
        vals = self.weights[0] * np.asarray(self.bumps[0].value(x))
        for w, b in zip(self.weights[1:], self.bumps[1:]):
            vals = vals + w * np.asarray(b.value(x))
        return float(vals) if vals.ndim == 0 else vals

    def __call__(self, x):
        return self.value(x)


IntensityShape = ConstantShape | GaussianBump | BumpMixture


class ConstantProfile:
    """Constant-in-time modulation eta(t) = value."""

    def __init__(self, value: float = 1.0):
        value = float(value)
        if not math.isfinite(value) or value <= 0:
            raise ValidationError("profile value must be finite and positive")
        self.value = value
        self.sup = value

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.value if t.ndim == 0 else np.full(t.shape, self.value)


class PiecewiseLinearProfile:
    """Tabulated modulation eta(t), linearly interpolated, clamped outside."""

    def __init__(self, times, values):
        self.times = _as_vector(times, "times")
        self.values = _as_vector(values, "values")
        if self.times.size != self.values.size or self.times.size < 2:
            raise DimensionMismatchError("profile needs matching times/values, at least two knots")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("profile times must be strictly increasing")
        if np.any(self.values <= 0):
            raise ValidationError("profile values must be strictly positive")
        # piecewise-linear interpolation attains its maximum at a knot
        self.sup = float(self.values.max())

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.times, self.values)
        return float(out) if t.ndim == 0 else out


TimeProfile = ConstantProfile | PiecewiseLinearProfile


@dataclass
class IntensityModel:
    """Conditional jump intensity alpha * eta(t) * g(x(t-))."""

    alpha: float
    eta: TimeProfile | None = None
    gshape: IntensityShape | None = None

    def __post_init__(self):
        self.alpha = float(self.alpha)
        if not math.isfinite(self.alpha) or self.alpha <= 0:
            raise ValidationError("alpha must be finite and positive")
        if self.eta is None:
            self.eta = ConstantProfile()
        if self.gshape is None:
            self.gshape = ConstantShape()

    def rate(self, t: float, x) -> float:
        return self.alpha * float(self.eta(t)) * float(self.gshape.value(x))

    @property
    def max_rate(self) -> float:
        """Analytic upper bound on the rate, used as the thinning envelope."""
        return self.alpha * self.eta.sup * self.gshape.sup


@dataclass
class CollisionJumpSpec:
    """Energy-preserving pairwise exchange along a contact direction.

    Two disjoint coordinate blocks of equal length d swap the component of
    their difference along a unit vector n; n may be fixed or drawn uniformly
    at random per event.
    """

    idx_y: tuple[int, ...]
    idx_z: tuple[int, ...]
    normal: np.ndarray | None = None

    def __post_init__(self):
        self.idx_y = tuple(int(i) for i in self.idx_y)
        self.idx_z = tuple(int(i) for i in self.idx_z)
        if len(self.idx_y) != len(self.idx_z) or not self.idx_y:
            raise DimensionMismatchError("index blocks must be non-empty and equally long")
        if set(self.idx_y) & set(self.idx_z):
            raise ValidationError("index blocks must be disjoint")
        if len(set(self.idx_y)) != len(self.idx_y) or len(set(self.idx_z)) != len(self.idx_z):
            raise ValidationError("index blocks must not repeat indices")
        if min(self.idx_y + self.idx_z) < 0:
            raise ValidationError("indices must be non-negative")
        if self.normal is not None:
            n = _as_vector(self.normal, "normal")
            if n.size != len(self.idx_y):
                raise DimensionMismatchError("normal length must match block length")
            if abs(np.linalg.norm(n) - 1.0) > _UNIT_NORM_TOL:
                raise ValidationError("normal must have unit norm")
            self.normal = n

    @property
    def block_dim(self) -> int:
        return len(self.idx_y)


def collision_transform(spec: CollisionJumpSpec, x, rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply the exchange; preserves the squared norm of the full state."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError("collision_transform expects a single state vector")
    if max(spec.idx_y + spec.idx_z) >= x.size:
        raise DimensionMismatchError("collision indices exceed state dimension")
    if spec.normal is not None:
        n = spec.normal
    else:
        if rng is None:
            raise ValidationError("random contact direction requested but no rng given")
        n = rng.standard_normal(spec.block_dim)
        norm = np.linalg.norm(n)
        while norm < 1e-12:
            n = rng.standard_normal(spec.block_dim)
            norm = np.linalg.norm(n)
        n = n / norm
    iy = list(spec.idx_y)
    iz = list(spec.idx_z)
    y = x[iy]
    z = x[iz]
    proj = float((z - y) @ n)
    out = x.copy()
    out[iy] = y + proj * n
    out[iz] = z - proj * n
    return out


@dataclass
class Trajectory:
    """Uniformly sampled path: states[k] is the state at time k * dt."""

    dt: float
    states: np.ndarray
    origin: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dt = float(self.dt)
        if not math.isfinite(self.dt) or self.dt <= 0:
            raise ValidationError("trajectory dt must be finite and positive")
        s = np.asarray(self.states, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1)
        if s.ndim != 2 or s.shape[0] < 2:
            raise ValidationError("trajectory needs at least two (N, K) samples")
        if not np.all(np.isfinite(s)):
            raise ValidationError("trajectory contains non-finite states")
        self.states = s

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def span(self) -> float:
        """Total time covered, (N - 1) * dt."""
        return (self.n_samples - 1) * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


@dataclass
class Moments:
    """Sample mean and unbiased covariance, with a degeneracy indicator."""

    mean: np.ndarray
    cov: np.ndarray
    degenerate: bool


def estimate_moments(traj: Trajectory) -> Moments:
    """Sample moments of a trajectory; flags (not raises) degenerate covariance."""
    rows = traj.states
    mean = rows.mean(axis=0)
    centred = rows - mean
    cov = centred.T @ centred / (rows.shape[0] - 1)
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
        degenerate = False
    except np.linalg.LinAlgError:
        degenerate = True
    return Moments(mean=mean, cov=cov, degenerate=degenerate)


def fit_quasi_gaussian(traj: Trajectory) -> GaussianDensity:
    """Gaussian surrogate with the trajectory's sample mean and covariance."""
    mom = estimate_moments(traj)
    if mom.degenerate:
        raise EstimatorError(
            "sample covariance is degenerate; cannot build a Gaussian surrogate "
            "(trajectory may be constant or too short)"
        )
    return GaussianDensity(mom.mean, mom.cov)


def fit_gaussian_mixture(states: np.ndarray, n_components: int, seed: int = 0) -> GaussianMixture:
    """EM fit of a Gaussian mixture to (N, K) samples."""
    from sklearn.mixture import GaussianMixture as _SKGaussianMixture

    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states.reshape(-1, 1)
    fit = _SKGaussianMixture(
        n_components=int(n_components), covariance_type="full", random_state=int(seed)
    ).fit(states)
    weights = np.asarray(fit.weights_, dtype=float)
    weights = weights / weights.sum()
    comps = [GaussianDensity(m, c) for m, c in zip(fit.means_, fit.covariances_)]
    return GaussianMixture(weights, comps)


Density = GaussianDensity | GaussianMixture


def eval_density(density: Density, x) -> np.ndarray | float:
    """Pointwise density evaluation, uniform across Gaussians and mixtures."""
    return density.pdf(x)


def apply_jump(jump_map: AffineJumpMap, x, z=None) -> np.ndarray:
    """Forward jump map; see AffineJumpMap.apply."""
    return jump_map.apply(x, z)


def invert_jump(jump_map: AffineJumpMap, x, z=None) -> tuple[np.ndarray, float]:
    """Inverse jump map and its Jacobian; see AffineJumpMap.invert."""
    return jump_map.invert(x, z)
