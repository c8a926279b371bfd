"""Trajectory-based response estimators.

Each estimator turns a single long unperturbed trajectory into a response
curve by correlating an observable at a later time with a pullback weight at
an earlier time:

    deterministic jump   w(s) = p0(hinv(x_s)) / p0(x_s) * jac - 1
    randomised jump      w(s) = value(x_s) / p0(x_s) - 1
    state-dependent rate w(s) = value_g(x_s) / p0(x_s) - g(x_s)

where value / value_g are the corresponding pullback integrals over the jump
law.  All weights average to zero over the stationary law, which doubles as a
built-in diagnostic (reported in curve.meta).

Standard errors come from non-overlapping batch means with batch length tied
to the estimated correlation time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .curves import ResponseCurve, TestFunction
from .errors import EstimatorError, ValidationError
from .jump_integrals import JumpIntegralSpec
from .model import AffineJumpMap, ConstantShape, Trajectory

_UNDERFLOW = 1e-300
_REJECT_LIMIT = 1e-3
_BATCH_TCORR_MULTIPLE = 20.0
_MIN_BATCHES = 30


def _lag_steps(lags, dt: float, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    if lags.ndim != 1 or lags.size == 0:
        raise ValidationError("lags must be a non-empty 1-d array")
    if lags[0] < 0 or np.any(np.diff(lags) <= 0):
        raise ValidationError("lags must be non-negative and strictly increasing")
    steps = np.rint(lags / dt).astype(int)
    for lag, s in zip(lags, steps):
        if abs(s * dt - lag) > 1e-9 * max(dt, abs(lag)):
            raise ValidationError(
                f"lag {float(lag)} is not a multiple of the sampling step {dt}"
            )
        if s >= n_samples:
            raise ValidationError(
                f"lag {float(lag)} exceeds the trajectory span {(n_samples - 1) * dt}"
            )
    return lags, steps


def _batch_length(tcorr: float, dt: float, n_usable: int) -> int:
    b = int(round(_BATCH_TCORR_MULTIPLE * tcorr / dt))
    b = max(b, 1)
    return min(b, max(1, n_usable // _MIN_BATCHES))


def _batch_stderr(y: np.ndarray, valid: np.ndarray, batch_len: int) -> np.ndarray:
    """SE of the valid-sample mean of y via non-overlapping batch means."""
    m = y.shape[0]
    n_batches = m // batch_len
    if n_batches < 2:
        cnt = max(int(valid.sum()), 1)
        return y.std(axis=0, ddof=1) / math.sqrt(cnt) if m > 1 else np.zeros(y.shape[1])
    trim = n_batches * batch_len
    sums = y[:trim].reshape(n_batches, batch_len, -1).sum(axis=1)
    counts = valid[:trim].reshape(n_batches, batch_len).sum(axis=1)
    keep = counts > 0
    if keep.sum() < 2:
        cnt = max(int(valid.sum()), 1)
        return y.std(axis=0, ddof=1) / math.sqrt(cnt)
    means = sums[keep] / counts[keep, None]
    return means.std(axis=0, ddof=1) / math.sqrt(keep.sum())


def _mean_and_stderr(series: np.ndarray, valid: np.ndarray, batch_len: int) -> tuple[float, float]:
    cnt = int(valid.sum())
    mean = float(series.sum() / cnt)
    se = _batch_stderr(series.reshape(-1, 1), valid, batch_len)
    return mean, float(se[0])


def _weighted_curve(
    traj: Trajectory,
    weights: np.ndarray,
    valid: np.ndarray,
    psi: TestFunction,
    lags,
    tcorr: float | None,
    threads: int,
    meta: dict,
) -> ResponseCurve:
    n = traj.n_samples
    lag_times, steps = _lag_steps(lags, traj.dt, n)
    rejected = int(n - valid.sum())
    if rejected > _REJECT_LIMIT * n:
        raise EstimatorError(
            f"{rejected} of {n} samples rejected for density underflow "
            f"(limit {_REJECT_LIMIT:.1%}); the reference density does not cover the data"
        )
    if tcorr is None:
        tcorr = estimate_tcorr(traj)
    psi_vals = psi.apply(traj.states)
    n_out = psi_vals.shape[1]
    values = np.empty((steps.size, n_out))
    stderr = np.empty((steps.size, n_out))

    def one_lag(idx: int) -> None:
        s = int(steps[idx])
        m = n - s
        wv = weights[:m]
        vb = valid[:m]
        cnt = int(vb.sum())
        if cnt == 0:
            raise EstimatorError(f"no usable samples at lag {float(lag_times[idx])}")
        y = psi_vals[s:] * wv[:, None]
        values[idx] = y.sum(axis=0) / cnt
        stderr[idx] = _batch_stderr(y, vb, _batch_length(tcorr, traj.dt, m))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one_lag, range(steps.size)))
    else:
        for idx in range(steps.size):
            one_lag(idx)

    w_mean, w_se = _mean_and_stderr(weights, valid, _batch_length(tcorr, traj.dt, n))
    meta = dict(meta)
    meta.update(
        {
            "weight_mean": w_mean,
            "weight_stderr": w_se,
            "rejected_samples": rejected,
            "tcorr": float(tcorr),
        }
    )
    return ResponseCurve(lags=lag_times, values=values, stderr=stderr, meta=meta)


def _integral_values(jump_integral, states: np.ndarray) -> np.ndarray:
    evaluate = getattr(jump_integral, "evaluate", jump_integral)
    return np.asarray(evaluate(states), dtype=float)


def det_jump_response(
    traj: Trajectory,
    p0,
    jump_map: AffineJumpMap,
    psi: TestFunction,
    lags,
    tcorr: float | None = None,
    threads: int = 1,
) -> ResponseCurve:
    """Response curve for a deterministic jump applied at time zero.

    The jump map must be z-free; p0 is the reference stationary density the
    trajectory is assumed to sample.
    """
    if not jump_map.z_free:
        raise ValidationError("deterministic response needs a jump map without random input")
    spec = JumpIntegralSpec(p0, jump_map)
    pulled_density = spec.evaluate(traj.states)
    base = np.asarray(p0.pdf(traj.states), dtype=float)
    valid = base > _UNDERFLOW
    w = np.where(valid, pulled_density / np.where(valid, base, 1.0) - 1.0, 0.0)
    return _weighted_curve(
        traj, w, valid, psi, lags, tcorr, threads, {"kind": "det_jump"}
    )


def random_jump_response(
    traj: Trajectory,
    p0,
    jump_integral,
    psi: TestFunction,
    lags,
    tcorr: float | None = None,
    threads: int = 1,
) -> ResponseCurve:
    """Response curve for a randomised jump applied at time zero.

    jump_integral evaluates the pullback integral of p0 over the jump law
    (a JumpIntegralSpec or any callable over state batches).
    """
    values = _integral_values(jump_integral, traj.states)
    base = np.asarray(p0.pdf(traj.states), dtype=float)
    valid = base > _UNDERFLOW
    w = np.where(valid, values / np.where(valid, base, 1.0) - 1.0, 0.0)
    return _weighted_curve(
        traj, w, valid, psi, lags, tcorr, threads, {"kind": "random_jump"}
    )


def response_operator(
    traj: Trajectory,
    p0,
    jump_integral,
    gshape,
    psi: TestFunction,
    lags,
    tcorr: float | None = None,
    threads: int = 1,
) -> ResponseCurve:
    """Response kernel for jumps arriving at random times with shape g.

    The weight subtracts g(x_s) instead of 1, so the kernel can later be
    convolved against any time modulation; jump_integral must fold the same
    shape g into the pullback integral.
    """
    values = _integral_values(jump_integral, traj.states)
    base = np.asarray(p0.pdf(traj.states), dtype=float)
    valid = base > _UNDERFLOW
    if gshape is None or isinstance(gshape, ConstantShape):
        gvals = 1.0
    else:
        gvals = np.asarray(gshape.value(traj.states), dtype=float)
    w = np.where(valid, values / np.where(valid, base, 1.0) - gvals, 0.0)
    return _weighted_curve(
        traj, w, valid, psi, lags, tcorr, threads, {"kind": "response_operator"}
    )


def convolve_response(curve: ResponseCurve, eta, alpha: float, tgrid) -> ResponseCurve:
    """Leading-order perturbed mean alpha * int_0^t R(t - s) eta(s) ds.

    The curve must live on a uniform lag grid starting at zero and every
    requested time must lie on that grid.  Standard errors are propagated
    assuming full correlation across lags (an upper bound).
    """
    alpha = float(alpha)
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    lags = curve.lags
    if abs(lags[0]) > 1e-12:
        raise ValidationError("response curve must start at lag zero")
    if lags.size < 2:
        raise ValidationError("response curve needs at least two lags")
    dtau = lags[1] - lags[0]
    if np.any(np.abs(np.diff(lags) - dtau) > 1e-9 * dtau):
        raise ValidationError("response curve lag grid must be uniform")
    t = np.atleast_1d(np.asarray(tgrid, dtype=float))
    if t.ndim != 1 or t.size == 0 or t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValidationError("tgrid must be non-negative and strictly increasing")
    values = np.empty((t.size, curve.n_outputs))
    stderr = np.empty_like(values)
    for i, ti in enumerate(t):
        k = int(round(ti / dtau))
        if abs(k * dtau - ti) > 1e-9 * max(dtau, ti):
            raise ValidationError(f"time {float(ti)} is not on the response lag grid")
        if k >= lags.size:
            raise ValidationError(f"time {float(ti)} exceeds the response curve span {float(lags[-1])}")
        eta_s = np.atleast_1d(np.asarray(eta(lags[: k + 1]), dtype=float))
        rev = slice(k, None, -1)
        values[i] = alpha * np.trapezoid(eta_s[:, None] * curve.values[rev], dx=dtau, axis=0)
        stderr[i] = alpha * np.trapezoid(eta_s[:, None] * curve.stderr[rev], dx=dtau, axis=0)
    return ResponseCurve(
        lags=t, values=values, stderr=stderr, meta={"kind": "convolved", "alpha": alpha}
    )


def autocorrelation(traj: Trajectory, lags) -> np.ndarray:
    """Stationary autocovariance matrices E[x(t + s) x(s)^T], mean-removed.

    Returns an (M, K, K) array over the requested lag times.
    """
    _, steps = _lag_steps(lags, traj.dt, traj.n_samples)
    x = traj.states - traj.states.mean(axis=0)
    n = x.shape[0]
    out = np.empty((steps.size, traj.dim, traj.dim))
    for i, s in enumerate(steps):
        out[i] = x[s:].T @ x[: n - s] / (n - s)
    return out


def _acf_norm_and_se(x: np.ndarray, s: int, norm_c: float) -> tuple[float, float]:
    """Frobenius norm of the lag-s autocovariance and its standard error.

    The SE comes from 30 non-overlapping batch means of the product series
    x(t+s) x(t)^T, which stays valid for correlated samples (the i.i.d. rate
    1/sqrt(n) would be far too optimistic there).  Very short series fall
    back to the i.i.d. floor.
    """
    n = x.shape[0]
    m = n - s
    est = float(np.linalg.norm(x[s:].T @ x[:m] / m))
    nb = 30
    b = m // nb
    if b < 2:
        return est, norm_c / math.sqrt(m)
    mats = np.stack(
        [x[s + i * b : s + (i + 1) * b].T @ x[i * b : (i + 1) * b] / b for i in range(nb)]
    )
    se_entry = mats.std(axis=0, ddof=1) / math.sqrt(nb)
    return est, float(np.linalg.norm(se_entry))


def estimate_tcorr(traj: Trajectory) -> float:
    """Integrated correlation time: largest real eigenvalue of
    (int_0^tc ACF(t) dt) C^{-1}, truncated where the ACF drops below twice
    its standard error.

    The cut lag is bracketed geometrically, then the integral is evaluated on
    a refined grid; a trajectory whose ACF never decays within half its
    length raises (use a longer trajectory).
    """
    x = traj.states - traj.states.mean(axis=0)
    n = x.shape[0]
    c = x.T @ x / n
    norm_c = float(np.linalg.norm(c))
    if norm_c <= 0 or not np.isfinite(norm_c):
        raise EstimatorError("trajectory covariance is degenerate")
    cap = n // 2
    cut = None
    s = 1
    while s <= cap:
        est, se = _acf_norm_and_se(x, s, norm_c)
        if est < 2.0 * se:
            cut = s
            break
        s *= 2
    if cut is None:
        raise EstimatorError(
            "autocorrelation did not decay below its noise floor within half the "
            "trajectory; use a longer trajectory"
        )
    stride = max(1, cut // 128)
    grid = np.arange(0, cut + 1, stride)
    if grid[-1] != cut:
        grid = np.append(grid, cut)
    mats = np.empty((grid.size, traj.dim, traj.dim))
    mats[0] = c
    for i, lag in enumerate(grid[1:], start=1):
        mats[i] = x[lag:].T @ x[: n - lag] / (n - lag)
    integral = np.trapezoid(mats, x=grid * traj.dt, axis=0)
    tmat = np.linalg.solve(c, integral.T).T
    tcorr = float(np.linalg.eigvals(tmat).real.max())
    if tcorr <= 0:
        raise EstimatorError("integrated correlation time is not positive")
    return tcorr


def accuracy_diagnostic(alpha: float, tcorr: float) -> tuple[float, str]:
    """Small-parameter check alpha * tcorr; 'ok' below 0.1, else 'warn'."""
    alpha = float(alpha)
    tcorr = float(tcorr)
    if alpha < 0 or tcorr < 0:
        raise ValidationError("alpha and tcorr must be non-negative")
    ratio = alpha * tcorr
    return ratio, ("ok" if ratio < 0.1 else "warn")
