"""Path simulation: Euler-Maruyama stepping, exact linear transitions,
stationary sampling, and jump-perturbed dynamics driven by a thinned
conditional intensity.

Every simulator derives two independent substreams from the caller's seed:
child 0 drives the Brownian increments, child 1 the jump process.  The
unperturbed simulator consumes only child 0, so a perturbed run whose
intensity never fires reproduces the unperturbed path bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.signal import lfilter

from .errors import BlowupError, DimensionMismatchError, ValidationError
from .model import AffineJumpMap, IntensityModel, JumpLaw, Trajectory
from .oracle import matrix_exponential, solve_lyapunov


class OUModel:
    """Linear drift -L x with constant noise matrix G."""

    def __init__(self, L, G):
        self.L = np.atleast_2d(np.asarray(L, dtype=float))
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        k = self.L.shape[0]
        if self.L.shape != (k, k) or self.G.shape != (k, k):
            raise ValidationError("L and G must be square K x K matrices")
        ggt = self.G @ self.G.T
        try:
            np.linalg.cholesky(0.5 * (ggt + ggt.T))
        except np.linalg.LinAlgError as exc:
            raise ValidationError("G G^T must be positive definite") from exc

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def drift(self, x: np.ndarray) -> np.ndarray:
        return -(x @ self.L.T)

    def drift1(self, x: float) -> float:
        if self.dim != 1:
            raise DimensionMismatchError("scalar drift only defined for K = 1")
        return -self.L[0, 0] * x

    def noise_matrix(self) -> np.ndarray:
        return self.G

    def diffusion(self, x) -> np.ndarray:
        return self.G


class DoubleWell:
    """Scalar bistable gradient model dx = (x - x^3) dt + sqrt(2) sigma dW.

    sigma sets the temperature scale: the stationary density is
    proportional to exp(-V(x) / sigma^2) with V(x) = (x^2 - 1)^2 / 4.
    """

    def __init__(self, sigma: float):
        self.sigma = float(sigma)
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValidationError("sigma must be finite and non-negative")

    @property
    def dim(self) -> int:
        return 1

    def drift(self, x: np.ndarray) -> np.ndarray:
        # written as repeated products so scalar and vector paths agree bitwise
        return x - x * x * x

    def drift1(self, x: float) -> float:
        return x - x * x * x

    def noise_matrix(self) -> np.ndarray:
        return np.array([[math.sqrt(2.0) * self.sigma]])

    def diffusion(self, x) -> np.ndarray:
        return self.noise_matrix()


class Lorenz96:
    """Cyclic advection model with constant forcing and isotropic noise."""

    def __init__(self, dim: int, forcing: float, sigma: float):
        self._dim = int(dim)
        if self._dim < 4:
            raise ValidationError("cyclic model needs dimension >= 4")
        self.forcing = float(forcing)
        self.sigma = float(sigma)
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValidationError("sigma must be finite and non-negative")

    @property
    def dim(self) -> int:
        return self._dim

    def drift(self, x: np.ndarray) -> np.ndarray:
        xp1 = np.roll(x, -1, axis=-1)
        xm1 = np.roll(x, 1, axis=-1)
        xm2 = np.roll(x, 2, axis=-1)
        return (xp1 - xm2) * xm1 - x + self.forcing

    def noise_matrix(self) -> np.ndarray:
        return self.sigma * np.eye(self._dim)

    def diffusion(self, x) -> np.ndarray:
        return self.noise_matrix()


ModelSpec = OUModel | DoubleWell | Lorenz96


@dataclass
class JumpEvent:
    """One accepted jump: post_state == jump_map.apply(pre_state, z)."""

    time: float
    pre_state: np.ndarray
    z: np.ndarray
    post_state: np.ndarray


def as_seedseq(seed) -> np.random.SeedSequence:
    """Coerce an integer seed or an existing SeedSequence to a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    children = as_seedseq(seed).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def euler_step(model: ModelSpec, x: np.ndarray, dt: float, xi: np.ndarray) -> np.ndarray:
    """One explicit step; xi holds standard normal draws of x's shape."""
    scaled = model.noise_matrix().T * math.sqrt(dt)
    return x + model.drift(x) * dt + xi @ scaled


def _check_sim_args(model: ModelSpec, x0, dt: float, nsteps: int) -> np.ndarray:
    if not (math.isfinite(dt) and dt > 0):
        raise ValidationError("dt must be finite and positive")
    if nsteps < 1:
        raise ValidationError("nsteps must be at least 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.dim,):
        raise DimensionMismatchError(
            f"x0 shape {x0.shape} does not match model dimension {model.dim}"
        )
    if not np.all(np.isfinite(x0)):
        raise ValidationError("x0 must be finite")
    return x0


def simulate_unperturbed(
    model: ModelSpec, x0, dt: float, nsteps: int, seed, burn_in: int = 0
) -> Trajectory:
    """Euler-Maruyama path of nsteps steps after discarding burn_in steps.

    The returned trajectory has nsteps + 1 rows; row k is the state at time
    k * dt counted from the end of the burn-in.  A path that leaves the
    representable range aborts with the offending step index.
    """
    x0 = _check_sim_args(model, x0, dt, nsteps)
    if burn_in < 0:
        raise ValidationError("burn_in must be non-negative")
    rng, _ = _streams(seed)
    total = burn_in + nsteps
    k = model.dim
    noise = rng.standard_normal((total, k))
    origin = {"scheme": "euler", "model": type(model).__name__, "seed": seed, "burn_in": burn_in}
    if k == 1 and hasattr(model, "drift1"):
        g = float(model.noise_matrix()[0, 0]) * math.sqrt(dt)
        drift1 = model.drift1
        w = (noise[:, 0] * g).tolist()
        x = float(x0[0])
        out = np.empty(nsteps + 1)
        isfinite = math.isfinite
        for step in range(burn_in):
            x = x + drift1(x) * dt + w[step]
            if not isfinite(x):
                raise BlowupError(f"path blew up at step {step + 1}", step=step + 1)
        out[0] = x
        for step in range(nsteps):
            x = x + drift1(x) * dt + w[burn_in + step]
            if not isfinite(x):
                raise BlowupError(
                    f"path blew up at step {burn_in + step + 1}", step=burn_in + step + 1
                )
            out[step + 1] = x
        return Trajectory(dt=dt, states=out.reshape(-1, 1), origin=origin)
    scaled = model.noise_matrix().T * math.sqrt(dt)
    w = noise @ scaled
    x = x0.copy()
    out = np.empty((nsteps + 1, k))
    for step in range(burn_in):
        x = x + model.drift(x) * dt + w[step]
        if not np.all(np.isfinite(x)):
            raise BlowupError(f"path blew up at step {step + 1}", step=step + 1)
    out[0] = x
    for step in range(nsteps):
        x = x + model.drift(x) * dt + w[burn_in + step]
        if not np.all(np.isfinite(x)):
            raise BlowupError(
                f"path blew up at step {burn_in + step + 1}", step=burn_in + step + 1
            )
        out[step + 1] = x
    return Trajectory(dt=dt, states=out, origin=origin)


def ou_transition_kernel(model: OUModel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-step kernel (E, Q): x' = E x + w, w ~ N(0, Q).

    E = exp(-L dt) and Q = C - E C E^T with C the stationary covariance; at
    dt = 0 this degenerates to (I, 0).
    """
    if not (math.isfinite(dt) and dt >= 0):
        raise ValidationError("dt must be finite and non-negative")
    c = solve_lyapunov(model.L, model.G @ model.G.T)
    e = matrix_exponential(-model.L, dt)
    q = c - e @ c @ e.T
    return e, 0.5 * (q + q.T)


def _psd_factor(q: np.ndarray) -> np.ndarray:
    """Matrix S with S S^T = q, tolerating a semidefinite q."""
    try:
        return np.linalg.cholesky(q)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(q)
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)


def simulate_ou_exact(
    model: OUModel, x0, dt: float, nsteps: int, seed, burn_in: int = 0
) -> Trajectory:
    """Sample the linear model on the grid from its exact transition kernel."""
    x0 = _check_sim_args(model, x0, dt, nsteps)
    if burn_in < 0:
        raise ValidationError("burn_in must be non-negative")
    rng, _ = _streams(seed)
    e, q = ou_transition_kernel(model, dt)
    total = burn_in + nsteps
    k = model.dim
    origin = {"scheme": "exact_ou", "model": "OUModel", "seed": seed, "burn_in": burn_in}
    if k == 1:
        a = float(e[0, 0])
        w = rng.standard_normal(total) * math.sqrt(max(q[0, 0], 0.0))
        # the linear recursion x' = a x + w is a first-order IIR filter
        y, _ = lfilter([1.0], [1.0, -a], w, zi=[a * float(x0[0])])
        if burn_in == 0:
            states = np.concatenate(([float(x0[0])], y))
        else:
            states = y[burn_in - 1 : burn_in + nsteps]
        return Trajectory(dt=dt, states=states.reshape(-1, 1), origin=origin)
    s = _psd_factor(q)
    w = rng.standard_normal((total, k)) @ s.T
    x = x0.copy()
    out = np.empty((nsteps + 1, k))
    for step in range(burn_in):
        x = e @ x + w[step]
    out[0] = x
    for step in range(nsteps):
        x = e @ x + w[burn_in + step]
        out[step + 1] = x
    return Trajectory(dt=dt, states=out, origin=origin)


def sample_stationary(
    model: ModelSpec,
    nsamples: int,
    seed,
    burn_in: int = 0,
    thin: int = 1,
    dt: float | None = None,
    x0=None,
) -> np.ndarray:
    """Draws targeting the stationary law, as an (nsamples, K) array.

    Linear models are sampled exactly and i.i.d.; other models are simulated
    with burn_in discarded steps and every thin-th state kept, which requires
    a step size dt.
    """
    nsamples = int(nsamples)
    if nsamples < 0:
        raise ValidationError("nsamples must be non-negative")
    if nsamples == 0:
        return np.zeros((0, model.dim))
    if isinstance(model, OUModel):
        rng = np.random.default_rng(as_seedseq(seed))
        c = solve_lyapunov(model.L, model.G @ model.G.T)
        return rng.standard_normal((nsamples, model.dim)) @ np.linalg.cholesky(c).T
    if dt is None:
        raise ValidationError("non-linear models need an explicit dt for stationary sampling")
    thin = int(thin)
    burn_in = int(burn_in)
    if thin < 1 or burn_in < 0:
        raise ValidationError("thin must be >= 1 and burn_in >= 0")
    start = np.zeros(model.dim) if x0 is None else np.asarray(x0, dtype=float)
    traj = simulate_unperturbed(model, start, dt, burn_in + nsamples * thin, seed)
    return traj.states[burn_in + thin :: thin][:nsamples].copy()


def next_jump_time(
    intensity: IntensityModel, state_at, t: float, t_max: float, rng: np.random.Generator
) -> float | None:
    """First jump strictly after t, or None if none occurs by t_max.

    Thinning against the analytic envelope rate: candidate times arrive as a
    homogeneous Poisson stream at the envelope rate and are accepted with
    probability rate(s, x(s-)) / envelope.
    """
    lam = intensity.max_rate
    if not (math.isfinite(lam) and lam > 0):
        raise ValidationError("intensity envelope rate must be finite and positive")
    s = float(t)
    while True:
        s += rng.exponential(1.0 / lam)
        if s > t_max:
            return None
        if rng.random() * lam <= intensity.rate(s, state_at(s)):
            return s


def simulate_perturbed(
    model: ModelSpec,
    jump_map: AffineJumpMap,
    law: JumpLaw | None,
    intensity: IntensityModel,
    x0,
    dt: float,
    nsteps: int,
    seed,
) -> tuple[Trajectory, list[JumpEvent]]:
    """Euler-Maruyama path interleaved with thinned, state-dependent jumps.

    A jump accepted at time s in (k dt, (k+1) dt] is applied to the state at
    (k+1) dt right after the diffusion step, with that state as the pre-jump
    state.  Identical seeds give identical paths; an intensity that never
    fires reproduces simulate_unperturbed exactly.
    """
    x0 = _check_sim_args(model, x0, dt, nsteps)
    if jump_map.dim != model.dim:
        raise DimensionMismatchError("jump map dimension does not match the model")
    d = jump_map.jump_dim
    if d > 0:
        if law is None:
            raise ValidationError("jump map has a random input but no law was given")
        if law.dim != d:
            raise DimensionMismatchError("law dimension does not match the jump input")
    drng, jrng = _streams(seed)
    k = model.dim
    noise = drng.standard_normal((nsteps, k))
    scaled = model.noise_matrix().T * math.sqrt(dt)
    w = noise @ scaled
    lam = intensity.max_rate
    if not (math.isfinite(lam) and lam > 0):
        raise ValidationError("intensity envelope rate must be finite and positive")
    horizon = nsteps * dt
    next_cand = jrng.exponential(1.0 / lam)
    events: list[JumpEvent] = []
    x = x0.copy()
    out = np.empty((nsteps + 1, k))
    out[0] = x
    for step in range(nsteps):
        x = x + model.drift(x) * dt + w[step]
        if not np.all(np.isfinite(x)):
            raise BlowupError(f"path blew up at step {step + 1}", step=step + 1)
        t1 = (step + 1) * dt
        while next_cand <= t1 and next_cand <= horizon:
            if jrng.random() * lam <= intensity.rate(next_cand, x):
                z = law.sample(jrng, 1)[0] if d > 0 else np.zeros(0)
                pre = x.copy()
                x = jump_map.apply(x, z if d > 0 else None)
                events.append(
                    JumpEvent(time=float(next_cand), pre_state=pre, z=z, post_state=x.copy())
                )
            next_cand += jrng.exponential(1.0 / lam)
        out[step + 1] = x
    origin = {
        "scheme": "euler+jumps",
        "model": type(model).__name__,
        "seed": seed,
        "n_jumps": len(events),
    }
    return Trajectory(dt=dt, states=out, origin=origin), events
