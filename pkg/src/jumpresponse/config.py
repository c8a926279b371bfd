"""Experiment configuration: JSON schema and object builders.

A config file is one JSON object; each section below is validated with
key-path error messages before any compute starts.

    model      {"type": "ou", "L": [[..]], "G": [[..]]}
               {"type": "double_well", "sigma": s}
               {"type": "lorenz96", "dim": n, "forcing": f, "sigma": s}
    p0         {"type": "stationary"}                  (exact, linear model only)
               {"type": "gaussian", "mean": [..], "cov": [[..]]}
               {"type": "mixture", "weights": [..], "means": [[..]], "covs": [[[..]]]}
               {"type": "fit"}                          (quasi-Gaussian fit to the trajectory)
               {"type": "fit_mixture", "components": m, "seed": s}
    jump_map   {"h": [..], "H": [[..]], "Hstar": [[..]]}   (H, Hstar optional)
    jump_law   {"type": "gaussian", "mean": [..], "cov": [[..]]}
               {"type": "mixture", ...}   {"type": "discrete", "atoms": [[..]], "probs": [..]}
    intensity  {"alpha": a, "eta": {"type": "constant", "value": v} |
                                 {"type": "piecewise", "times": [..], "values": [..]},
                         "g": {"type": "constant"} |
                              {"type": "bump", "center": [..], "width": [[..]]} |
                              {"type": "bump_mixture", "weights": [..], "bumps": [{...}, ..]}}
    psi        {"type": "identity" | "component" | "quadratic" | "energy", ...indices}
    trajectory {"dt": dt, "nsteps": n, "burn_in": b, "x0": [..], "scheme": "euler"|"exact"}
    lags/tgrid {"start": a, "stop": b, "step": h}  or  [t0, t1, ...]
    estimator  {"kind": "det"|"random"|"operator"}
    oracle     {"kind": "det"|"random"|"operator"|"exact_mean"}
    ensemble   {"members": m, "dt": dt, "horizon": T, "common_noise": true,
                "scenario": "det"|"random"|"random_time"}
    seed       integer  (overridable by --seed)
    out        output path (overridable by --out)
"""

from __future__ import annotations

import json

import numpy as np

from .curves import Component, Energy, Identity, Quadratic, TestFunction
from .errors import ValidationError
from .model import (
    AffineJumpMap,
    BumpMixture,
    ConstantProfile,
    ConstantShape,
    DiscreteJumpLaw,
    GaussianBump,
    GaussianDensity,
    GaussianMixture,
    IntensityModel,
    PiecewiseLinearProfile,
    fit_gaussian_mixture,
    fit_quasi_gaussian,
)
from .sde import DoubleWell, Lorenz96, ModelSpec, OUModel


def load_config(path) -> dict:
    """Parse a JSON config file into a dict, with a line-precise parse error."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"{path}: no such config file") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: top level must be a JSON object")
    return cfg


def _section(cfg: dict, key: str, kind=dict):
    if key not in cfg:
        raise ValidationError(f"config key '{key}' is required here")
    value = cfg[key]
    if kind is not None and not isinstance(value, kind):
        raise ValidationError(f"config key '{key}' has the wrong shape")
    return value


def _field(obj: dict, path: str, key: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ValidationError(f"{path}.{key} is required")
        return default
    return obj[key]


def _num(obj, path, key, required=True, default=None) -> float:
    raw = _field(obj, path, key, default=default, required=required)
    if raw is None:
        return None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ValidationError(f"{path}.{key} must be a number")
    return float(raw)


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def build_model(obj: dict) -> ModelSpec:
    kind = _field(obj, "model", "type", required=True)
    if kind == "ou":
        return _wrap(
            "model",
            OUModel,
            _field(obj, "model", "L", required=True),
            _field(obj, "model", "G", required=True),
        )
    if kind == "double_well":
        return _wrap("model", DoubleWell, _num(obj, "model", "sigma"))
    if kind == "lorenz96":
        return _wrap(
            "model",
            Lorenz96,
            int(_num(obj, "model", "dim")),
            _num(obj, "model", "forcing"),
            _num(obj, "model", "sigma"),
        )
    raise ValidationError(f"model.type '{kind}' is not one of ou|double_well|lorenz96")


def _gaussian(obj: dict, path: str) -> GaussianDensity:
    return _wrap(
        path,
        GaussianDensity,
        _field(obj, path, "mean", required=True),
        _field(obj, path, "cov", required=True),
    )


def _mixture(obj: dict, path: str) -> GaussianMixture:
    weights = _field(obj, path, "weights", required=True)
    means = _field(obj, path, "means", required=True)
    covs = _field(obj, path, "covs", required=True)
    if not (isinstance(means, list) and isinstance(covs, list) and len(means) == len(covs)):
        raise ValidationError(f"{path}.means and {path}.covs must be lists of equal length")
    comps = [
        _wrap(f"{path}[{i}]", GaussianDensity, m, c) for i, (m, c) in enumerate(zip(means, covs))
    ]
    return _wrap(path, GaussianMixture, weights, comps)


def build_p0(obj: dict, model: ModelSpec | None = None, traj=None):
    kind = _field(obj, "p0", "type", required=True)
    if kind == "stationary":
        if not isinstance(model, OUModel):
            raise ValidationError("p0.type 'stationary' requires a linear (ou) model")
        from .oracle import OUParams

        return OUParams(model.L, model.G).stationary_density()
    if kind == "gaussian":
        return _gaussian(obj, "p0")
    if kind == "mixture":
        return _mixture(obj, "p0")
    if kind == "fit":
        if traj is None:
            raise ValidationError("p0.type 'fit' needs a trajectory to fit")
        return fit_quasi_gaussian(traj)
    if kind == "fit_mixture":
        if traj is None:
            raise ValidationError("p0.type 'fit_mixture' needs a trajectory to fit")
        comps = int(_num(obj, "p0", "components"))
        seed = int(_num(obj, "p0", "seed", required=False, default=0))
        return fit_gaussian_mixture(traj.states, comps, seed)
    raise ValidationError(
        f"p0.type '{kind}' is not one of stationary|gaussian|mixture|fit|fit_mixture"
    )


def build_jump_map(obj: dict) -> AffineJumpMap:
    return _wrap(
        "jump_map",
        AffineJumpMap,
        _field(obj, "jump_map", "h", required=True),
        _field(obj, "jump_map", "H"),
        _field(obj, "jump_map", "Hstar"),
    )


def build_jump_law(obj: dict):
    kind = _field(obj, "jump_law", "type", required=True)
    if kind == "gaussian":
        return _gaussian(obj, "jump_law")
    if kind == "mixture":
        return _mixture(obj, "jump_law")
    if kind == "discrete":
        return _wrap(
            "jump_law",
            DiscreteJumpLaw,
            _field(obj, "jump_law", "atoms", required=True),
            _field(obj, "jump_law", "probs", required=True),
        )
    raise ValidationError(f"jump_law.type '{kind}' is not one of gaussian|mixture|discrete")


def _build_eta(obj, path: str):
    if obj is None:
        return ConstantProfile(1.0)
    kind = _field(obj, path, "type", required=True)
    if kind == "constant":
        return _wrap(path, ConstantProfile, _num(obj, path, "value", required=False, default=1.0))
    if kind == "piecewise":
        return _wrap(
            path,
            PiecewiseLinearProfile,
            _field(obj, path, "times", required=True),
            _field(obj, path, "values", required=True),
        )
    raise ValidationError(f"{path}.type '{kind}' is not one of constant|piecewise")


def _build_bump(obj, path: str) -> GaussianBump:
    return _wrap(
        path,
        GaussianBump,
        _field(obj, path, "center", required=True),
        _field(obj, path, "width", required=True),
    )


def build_gshape(obj, path: str = "intensity.g"):
    if obj is None:
        return ConstantShape()
    kind = _field(obj, path, "type", required=True)
    if kind == "constant":
        return ConstantShape()
    if kind == "bump":
        return _build_bump(obj, path)
    if kind == "bump_mixture":
        weights = _field(obj, path, "weights", required=True)
        bumps = _field(obj, path, "bumps", required=True)
        if not isinstance(bumps, list):
            raise ValidationError(f"{path}.bumps must be a list")
        built = [_build_bump(b, f"{path}.bumps[{i}]") for i, b in enumerate(bumps)]
        return _wrap(path, BumpMixture, weights, built)
    raise ValidationError(f"{path}.type '{kind}' is not one of constant|bump|bump_mixture")


def build_intensity(obj: dict) -> IntensityModel:
    alpha = _num(obj, "intensity", "alpha")
    eta = _build_eta(_field(obj, "intensity", "eta"), "intensity.eta")
    gshape = build_gshape(_field(obj, "intensity", "g"))
    return _wrap("intensity", IntensityModel, alpha, eta, gshape)


def build_psi(obj: dict | None) -> TestFunction:
    if obj is None:
        return Identity()
    kind = _field(obj, "psi", "type", required=True)
    if kind == "identity":
        return Identity()
    if kind == "component":
        return _wrap("psi", Component, int(_num(obj, "psi", "index")))
    if kind == "quadratic":
        return _wrap("psi", Quadratic, int(_num(obj, "psi", "i")), int(_num(obj, "psi", "j")))
    if kind == "energy":
        return Energy()
    raise ValidationError(f"psi.type '{kind}' is not one of identity|component|quadratic|energy")


def build_grid(obj, path: str) -> np.ndarray:
    """A time grid given either as an explicit list or as start/stop/step."""
    if isinstance(obj, list):
        grid = np.asarray(obj, dtype=float)
    elif isinstance(obj, dict):
        start = _num(obj, path, "start", required=False, default=0.0)
        stop = _num(obj, path, "stop")
        step = _num(obj, path, "step")
        if step <= 0 or stop <= start:
            raise ValidationError(f"{path}: needs step > 0 and stop > start")
        n = int(round((stop - start) / step))
        grid = start + step * np.arange(n + 1)
    else:
        raise ValidationError(f"{path} must be a list or a start/stop/step object")
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValidationError(f"{path} must be non-negative and strictly increasing")
    return grid


def trajectory_params(obj: dict) -> dict:
    dt = _num(obj, "trajectory", "dt")
    nsteps = int(_num(obj, "trajectory", "nsteps"))
    burn_in = int(_num(obj, "trajectory", "burn_in", required=False, default=0))
    x0 = _field(obj, "trajectory", "x0")
    scheme = _field(obj, "trajectory", "scheme", default="euler")
    if scheme not in ("euler", "exact"):
        raise ValidationError("trajectory.scheme must be 'euler' or 'exact'")
    return {"dt": dt, "nsteps": nsteps, "burn_in": burn_in, "x0": x0, "scheme": scheme}
