"""Monte Carlo ground truth: paired perturbed/unperturbed ensembles.

Each member owns three derived random streams (unperturbed noise, perturbed
noise, jump process), so results do not depend on chunking or evaluation
order; partial sums over chunks are combined with a pairwise tree.  With
common noise the two legs of a pair share Brownian increments, which cancels
most of the member-to-member variance of the difference.  Random-time jumps
always re-use the unperturbed Brownian path on the perturbed leg and
superimpose jumps on top, since the jump process is independent of the
driving noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import ResponseCurve, TestFunction
from .errors import BlowupError, DimensionMismatchError, ValidationError
from .estimators import estimate_tcorr
from .model import AffineJumpMap, IntensityModel, JumpLaw
from .sde import (
    ModelSpec,
    OUModel,
    _psd_factor,
    as_seedseq,
    ou_transition_kernel,
    sample_stationary,
    simulate_unperturbed,
)

_CHUNK = 2048
_PILOT_STEPS = 200_000
_BURN_TCORR_MULTIPLE = 100.0
_THIN_TCORR_MULTIPLE = 10.0


@dataclass
class EnsembleConfig:
    """Size, grid, seed, and noise-coupling policy of a paired ensemble."""

    members: int
    dt: float
    horizon: float
    seed: int
    common_noise: bool = True

    def __post_init__(self):
        self.members = int(self.members)
        if self.members < 2:
            raise ValidationError("members must be at least 2 to form standard errors")
        self.dt = float(self.dt)
        self.horizon = float(self.horizon)
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt must be finite and positive")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValidationError("horizon must be finite and positive")
        nsteps = round(self.horizon / self.dt)
        if nsteps < 1 or abs(nsteps * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ValidationError("horizon must be an integral multiple of dt")

    @property
    def nsteps(self) -> int:
        return round(self.horizon / self.dt)


def _pairwise_reduce(parts: list[np.ndarray]) -> np.ndarray:
    """Sum a list of equal-shape arrays with a fixed pairwise tree."""
    if not parts:
        raise ValidationError("nothing to reduce")
    while len(parts) > 1:
        parts = [
            parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i]
            for i in range(0, len(parts), 2)
        ]
    return parts[0]


def _initial_states(model: ModelSpec, members: int, seed_child, dt: float) -> np.ndarray:
    """Draw members stationary starting points.

    Linear models are sampled exactly; other models run a pilot path to
    estimate the correlation time, then burn 100 correlation times and keep
    every 10th correlation time.
    """
    if isinstance(model, OUModel):
        return sample_stationary(model, members, seed_child)
    pilot_seed, draw_seed = seed_child.spawn(2)
    pilot = simulate_unperturbed(model, np.zeros(model.dim), dt, _PILOT_STEPS, pilot_seed)
    tcorr = estimate_tcorr(pilot)
    burn = int(math.ceil(_BURN_TCORR_MULTIPLE * tcorr / dt))
    thin = max(1, int(math.ceil(_THIN_TCORR_MULTIPLE * tcorr / dt)))
    return sample_stationary(model, members, draw_seed, burn_in=burn, thin=thin, dt=dt)


class _JumpTables:
    """Per-member thinning candidates, pre-drawn in a fixed order.

    For each member the jump stream first yields the homogeneous candidate
    times at the envelope rate, then one uniform per candidate, then the jump
    inputs z; acceptance is decided later against the state-dependent rate.
    """

    def __init__(self, law, intensity: IntensityModel, horizon: float, seeds, jump_dim: int):
        lam = intensity.max_rate
        if not (math.isfinite(lam) and lam > 0):
            raise ValidationError("intensity envelope rate must be finite and positive")
        self.lam = lam
        self.times: list[np.ndarray] = []
        self.unif: list[np.ndarray] = []
        self.z: list[np.ndarray] = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            ts = []
            t = rng.exponential(1.0 / lam)
            while t <= horizon:
                ts.append(t)
                t += rng.exponential(1.0 / lam)
            n = len(ts)
            self.times.append(np.asarray(ts))
            self.unif.append(rng.random(n))
            if jump_dim > 0 and n > 0:
                self.z.append(np.atleast_2d(law.sample(rng, n)))
            else:
                self.z.append(np.zeros((n, jump_dim)))


def _pair_curve(
    model: ModelSpec,
    psi: TestFunction,
    cfg: EnsembleConfig,
    xu0: np.ndarray,
    xp0: np.ndarray,
    noise_seeds,
    jump_ctx: tuple[AffineJumpMap, IntensityModel, _JumpTables] | None,
    meta: dict,
) -> ResponseCurve:
    nsteps = cfg.nsteps
    dt = cfg.dt
    k = model.dim
    n_out = psi.n_outputs(k)
    if isinstance(model, OUModel):
        # linear models step with the exact transition kernel, so the grid
        # marginals carry no discretization bias
        e_mat, q_mat = ou_transition_kernel(model, dt)
        s_fac = _psd_factor(q_mat)

        def step(x, xi):
            return x @ e_mat.T + xi @ s_fac.T

    else:
        scaled = model.noise_matrix().T * math.sqrt(dt)

        def step(x, xi):
            return x + model.drift(x) * dt + xi @ scaled

    sum_parts: list[np.ndarray] = []
    sumsq_parts: list[np.ndarray] = []

    for lo in range(0, cfg.members, _CHUNK):
        hi = min(lo + _CHUNK, cfg.members)
        cm = hi - lo
        xu = xu0[lo:hi].copy()
        xp = xp0[lo:hi].copy()
        wu = np.empty((cm, nsteps, k))
        wp = None if cfg.common_noise else np.empty((cm, nsteps, k))
        for j in range(cm):
            su, sp = noise_seeds[lo + j].spawn(2)
            wu[j] = np.random.default_rng(su).standard_normal((nsteps, k))
            if wp is not None:
                wp[j] = np.random.default_rng(sp).standard_normal((nsteps, k))
        if wp is None:
            wp = wu

        if jump_ctx is not None:
            jump_map, intensity, tables = jump_ctx
            d = jump_map.jump_dim
            ptr = np.zeros(cm, dtype=int)
            next_t = np.array(
                [tables.times[lo + j][0] if tables.times[lo + j].size else np.inf for j in range(cm)]
            )
        part_sum = np.zeros((nsteps + 1, n_out))
        part_sq = np.zeros((nsteps + 1, n_out))
        diff = psi.apply(xp) - psi.apply(xu)
        part_sum[0] = diff.sum(axis=0)
        part_sq[0] = (diff * diff).sum(axis=0)
        for istep in range(nsteps):
            xu = step(xu, wu[:, istep])
            xp = step(xp, wp[:, istep])
            if not (np.all(np.isfinite(xu)) and np.all(np.isfinite(xp))):
                raise BlowupError(f"ensemble blew up at step {istep + 1}", step=istep + 1)
            if jump_ctx is not None:
                t1 = (istep + 1) * dt
                for j in np.nonzero(next_t <= t1)[0]:
                    times = tables.times[lo + j]
                    unif = tables.unif[lo + j]
                    zs = tables.z[lo + j]
                    p = ptr[j]
                    while p < times.size and times[p] <= t1:
                        s = float(times[p])
                        if unif[p] * tables.lam <= intensity.rate(s, xp[j]):
                            xp[j] = jump_map.apply(xp[j], zs[p] if d > 0 else None)
                        p += 1
                    ptr[j] = p
                    next_t[j] = times[p] if p < times.size else np.inf
            diff = psi.apply(xp) - psi.apply(xu)
            part_sum[istep + 1] = diff.sum(axis=0)
            part_sq[istep + 1] = (diff * diff).sum(axis=0)
        sum_parts.append(part_sum)
        sumsq_parts.append(part_sq)

    total = _pairwise_reduce(sum_parts)
    total_sq = _pairwise_reduce(sumsq_parts)
    m = cfg.members
    mean = total / m
    var = np.clip((total_sq - m * mean * mean) / (m - 1), 0.0, None)
    stderr = np.sqrt(var / m)
    lags = np.arange(nsteps + 1) * dt
    meta = dict(meta)
    meta.update({"members": m, "common_noise": cfg.common_noise})
    return ResponseCurve(lags=lags, values=mean, stderr=stderr, meta=meta)


def _seed_children(cfg: EnsembleConfig):
    root = as_seedseq(cfg.seed)
    init_child, z_child, noise_parent, jump_parent = root.spawn(4)
    return init_child, z_child, noise_parent.spawn(cfg.members), jump_parent


def _check_map(model: ModelSpec, jump_map: AffineJumpMap) -> None:
    if jump_map.dim != model.dim:
        raise DimensionMismatchError("jump map dimension does not match the model")


def mc_det_jump_response(
    model: ModelSpec, jump_map: AffineJumpMap, psi: TestFunction, cfg: EnsembleConfig
) -> ResponseCurve:
    """Mean psi-difference between a jumped and an unjumped ensemble.

    Each member starts at a stationary draw x0; the perturbed leg starts at
    jump_map(x0) and both evolve with common noise when flagged.
    """
    _check_map(model, jump_map)
    if not jump_map.z_free:
        raise ValidationError("deterministic-jump ensembles need a jump map without random input")
    init_child, _, noise_seeds, _ = _seed_children(cfg)
    xu0 = _initial_states(model, cfg.members, init_child, cfg.dt)
    xp0 = jump_map.apply(xu0)
    return _pair_curve(model, psi, cfg, xu0, xp0, noise_seeds, None, {"kind": "mc_det_jump"})


def mc_random_jump_response(
    model: ModelSpec,
    jump_map: AffineJumpMap,
    law: JumpLaw,
    psi: TestFunction,
    cfg: EnsembleConfig,
) -> ResponseCurve:
    """As mc_det_jump_response with the jump input z drawn per member."""
    _check_map(model, jump_map)
    d = jump_map.jump_dim
    if d == 0:
        raise ValidationError(
            "jump map has no random input; use mc_det_jump_response instead"
        )
    if law.dim != d:
        raise DimensionMismatchError("law dimension does not match the jump input")
    init_child, z_child, noise_seeds, _ = _seed_children(cfg)
    xu0 = _initial_states(model, cfg.members, init_child, cfg.dt)
    z = np.atleast_2d(law.sample(np.random.default_rng(z_child), cfg.members))
    xp0 = jump_map.apply(xu0, z)
    return _pair_curve(model, psi, cfg, xu0, xp0, noise_seeds, None, {"kind": "mc_random_jump"})


def mc_random_time_response(
    model: ModelSpec,
    jump_map: AffineJumpMap,
    law: JumpLaw | None,
    intensity: IntensityModel,
    psi: TestFunction,
    cfg: EnsembleConfig,
) -> ResponseCurve:
    """Perturbed-minus-unperturbed means with jumps at thinned random times.

    Both legs start from the same stationary draw and share the Brownian
    path; the perturbed leg additionally applies every accepted jump at the
    end of the step containing its arrival time.  The common_noise flag is
    ignored here: path re-use is what makes the pairing valid.
    """
    _check_map(model, jump_map)
    d = jump_map.jump_dim
    if d > 0:
        if law is None:
            raise ValidationError("jump map has a random input but no law was given")
        if law.dim != d:
            raise DimensionMismatchError("law dimension does not match the jump input")
    init_child, _, noise_seeds, jump_parent = _seed_children(cfg)
    xu0 = _initial_states(model, cfg.members, init_child, cfg.dt)
    tables = _JumpTables(law, intensity, cfg.horizon, jump_parent.spawn(cfg.members), d)
    cfg_common = EnsembleConfig(cfg.members, cfg.dt, cfg.horizon, cfg.seed, common_noise=True)
    return _pair_curve(
        model,
        psi,
        cfg_common,
        xu0,
        xu0.copy(),
        noise_seeds,
        (jump_map, intensity, tables),
        {"kind": "mc_random_time", "alpha": intensity.alpha},
    )
