"""Command-line interface.

Subcommands:
    simulate   write a trajectory file from a model config
    estimate   run a response estimator on a trajectory (file or fresh)
    oracle     write analytic linear-model response curves
    mc         write ensemble Monte Carlo ground-truth curves
    compare    join two curve files, reporting differences in SE units
    acf        autocorrelation, correlation time, and the alpha*T_corr verdict

Exit codes: 0 success, 2 validation/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as cfgmod
from .ensemble import (
    EnsembleConfig,
    mc_det_jump_response,
    mc_random_jump_response,
    mc_random_time_response,
)
from .errors import BlowupError, EstimatorError, ValidationError
from .estimators import (
    accuracy_diagnostic,
    autocorrelation,
    det_jump_response,
    estimate_tcorr,
    random_jump_response,
    response_operator,
)
from .fileio import read_curve, read_trajectory, write_curve, write_trajectory
from .jump_integrals import JumpIntegralSpec
from .model import ConstantShape, law_mean
from .oracle import (
    OUParams,
    ou_exact_perturbed_mean,
    ou_mean_response_det,
    ou_mean_response_random,
    ou_response_operator,
)
from .sde import OUModel, simulate_ou_exact, simulate_unperturbed

_FMT = "%.17g"


def _require_out(args, cfg) -> str:
    out = args.out or cfg.get("out")
    if not out:
        raise ValidationError("an output path is required (--out or config key 'out')")
    return out


def _seed_of(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    seed = cfg.get("seed")
    if seed is None:
        raise ValidationError("a seed is required (--seed or config key 'seed')")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("config key 'seed' must be a non-negative integer")
    return seed


def _simulate(cfg, seed):
    model = cfgmod.build_model(cfgmod._section(cfg, "model"))
    tp = cfgmod.trajectory_params(cfgmod._section(cfg, "trajectory"))
    x0 = np.zeros(model.dim) if tp["x0"] is None else np.asarray(tp["x0"], dtype=float)
    if tp["scheme"] == "exact":
        if not isinstance(model, OUModel):
            raise ValidationError("trajectory.scheme 'exact' requires a linear (ou) model")
        traj = simulate_ou_exact(model, x0, tp["dt"], tp["nsteps"], seed, tp["burn_in"])
    else:
        traj = simulate_unperturbed(model, x0, tp["dt"], tp["nsteps"], seed, tp["burn_in"])
    return model, traj


def _load_traj(args, cfg, seed):
    if getattr(args, "traj", None):
        model = None
        if "model" in cfg:
            model = cfgmod.build_model(cfgmod._section(cfg, "model"))
        return model, read_trajectory(args.traj)
    return _simulate(cfg, seed)


def _cmd_simulate(args) -> int:
    cfg = cfgmod.load_config(args.config)
    seed = _seed_of(args, cfg)
    _, traj = _simulate(cfg, seed)
    out = _require_out(args, cfg)
    write_trajectory(out, traj)
    print(f"wrote {traj.n_samples} x {traj.dim} trajectory (dt={traj.dt}) to {out}")
    return 0


def _cmd_estimate(args) -> int:
    cfg = cfgmod.load_config(args.config)
    seed = _seed_of(args, cfg)
    model, traj = _load_traj(args, cfg, seed)
    est = cfgmod._section(cfg, "estimator")
    kind = est.get("kind")
    p0 = cfgmod.build_p0(cfgmod._section(cfg, "p0"), model, traj)
    jump_map = cfgmod.build_jump_map(cfgmod._section(cfg, "jump_map"))
    psi = cfgmod.build_psi(cfg.get("psi"))
    lags = cfgmod.build_grid(cfgmod._section(cfg, "lags", kind=None), "lags")
    threads = args.threads
    if kind == "det":
        curve = det_jump_response(traj, p0, jump_map, psi, lags, threads=threads)
    elif kind == "random":
        law = cfgmod.build_jump_law(cfgmod._section(cfg, "jump_law"))
        spec = JumpIntegralSpec(p0, jump_map, law)
        curve = random_jump_response(traj, p0, spec, psi, lags, threads=threads)
    elif kind == "operator":
        law = None
        if "jump_law" in cfg:
            law = cfgmod.build_jump_law(cfgmod._section(cfg, "jump_law"))
        gshape = cfgmod.build_gshape(cfg.get("intensity", {}).get("g"))
        spec = JumpIntegralSpec(p0, jump_map, law, gshape)
        curve = response_operator(traj, p0, spec, gshape, psi, lags, threads=threads)
    else:
        raise ValidationError("estimator.kind must be one of det|random|operator")
    out = _require_out(args, cfg)
    write_curve(out, curve)
    print(
        f"wrote {curve.lags.size}-lag response curve to {out} "
        f"(weight mean {curve.meta['weight_mean']:.3e} "
        f"+/- {curve.meta['weight_stderr']:.3e}, "
        f"T_corr {curve.meta['tcorr']:.4g})"
    )
    return 0


def _cmd_oracle(args) -> int:
    cfg = cfgmod.load_config(args.config)
    model = cfgmod.build_model(cfgmod._section(cfg, "model"))
    if not isinstance(model, OUModel):
        raise ValidationError("oracle curves require a linear (ou) model")
    ou = OUParams(model.L, model.G)
    jump_map = cfgmod.build_jump_map(cfgmod._section(cfg, "jump_map"))
    grid_obj = cfg.get("tgrid", cfg.get("lags"))
    if grid_obj is None:
        raise ValidationError("config key 'tgrid' (or 'lags') is required")
    tgrid = cfgmod.build_grid(grid_obj, "tgrid")
    oracle = cfgmod._section(cfg, "oracle")
    kind = oracle.get("kind")
    if kind == "det":
        curve = ou_mean_response_det(ou, jump_map, tgrid)
    elif kind == "random":
        law = cfgmod.build_jump_law(cfgmod._section(cfg, "jump_law"))
        curve = ou_mean_response_random(ou, jump_map, law, tgrid)
    elif kind == "operator":
        law = None
        if "jump_law" in cfg:
            law = cfgmod.build_jump_law(cfgmod._section(cfg, "jump_law"))
        gshape = cfgmod.build_gshape(cfg.get("intensity", {}).get("g"))
        curve = ou_response_operator(ou, jump_map, law, gshape, tgrid)
    elif kind == "exact_mean":
        alpha = cfgmod._num(cfgmod._section(cfg, "intensity"), "intensity", "alpha")
        zbar = np.zeros(jump_map.jump_dim)
        if jump_map.jump_dim > 0:
            law = cfgmod.build_jump_law(cfgmod._section(cfg, "jump_law"))
            zbar = law_mean(law)
        curve = ou_exact_perturbed_mean(ou, jump_map, zbar, alpha, tgrid)
    else:
        raise ValidationError("oracle.kind must be one of det|random|operator|exact_mean")
    out = _require_out(args, cfg)
    write_curve(out, curve)
    print(f"wrote {curve.lags.size}-point analytic curve to {out}")
    return 0


def _cmd_mc(args) -> int:
    cfg = cfgmod.load_config(args.config)
    seed = _seed_of(args, cfg)
    model = cfgmod.build_model(cfgmod._section(cfg, "model"))
    jump_map = cfgmod.build_jump_map(cfgmod._section(cfg, "jump_map"))
    psi = cfgmod.build_psi(cfg.get("psi"))
    ens = cfgmod._section(cfg, "ensemble")
    scenario = ens.get("scenario")
    ecfg = EnsembleConfig(
        members=int(cfgmod._num(ens, "ensemble", "members")),
        dt=cfgmod._num(ens, "ensemble", "dt"),
        horizon=cfgmod._num(ens, "ensemble", "horizon"),
        seed=seed,
        common_noise=bool(ens.get("common_noise", True)),
    )
    if scenario == "det":
        curve = mc_det_jump_response(model, jump_map, psi, ecfg)
    elif scenario == "random":
        law = cfgmod.build_jump_law(cfgmod._section(cfg, "jump_law"))
        curve = mc_random_jump_response(model, jump_map, law, psi, ecfg)
    elif scenario == "random_time":
        law = None
        if "jump_law" in cfg:
            law = cfgmod.build_jump_law(cfgmod._section(cfg, "jump_law"))
        intensity = cfgmod.build_intensity(cfgmod._section(cfg, "intensity"))
        curve = mc_random_time_response(model, jump_map, law, intensity, psi, ecfg)
    else:
        raise ValidationError("ensemble.scenario must be one of det|random|random_time")
    out = _require_out(args, cfg)
    write_curve(out, curve)
    print(f"wrote {curve.lags.size}-point MC curve ({ecfg.members} members) to {out}")
    return 0


def _cmd_compare(args) -> int:
    a = read_curve(args.curve_a)
    b = read_curve(args.curve_b)
    if a.lags.size != b.lags.size or np.any(
        np.abs(a.lags - b.lags) > 1e-9 * np.maximum(1.0, np.abs(a.lags))
    ):
        raise ValidationError("curves live on different lag grids")
    if a.n_outputs != b.n_outputs:
        raise ValidationError("curves have different numbers of outputs")
    diff = a.values - b.values
    se = np.sqrt(a.stderr**2 + b.stderr**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(diff == 0.0, 0.0, diff / se)
    if not np.all(np.isfinite(z)):
        raise ValidationError("non-zero difference at a lag where both stderr are zero")
    max_z = float(np.abs(z).max())
    if args.out:
        from .curves import ResponseCurve

        out_curve = ResponseCurve(
            lags=a.lags,
            values=z,
            stderr=se,
            meta={"kind": "compare", "max_abs_z": max_z},
        )
        write_curve(args.out, out_curve)
    print(f"max |difference| = {max_z:.4g} combined standard errors over {a.lags.size} lags")
    return 0


def _cmd_acf(args) -> int:
    cfg = cfgmod.load_config(args.config)
    seed = _seed_of(args, cfg)
    _, traj = _load_traj(args, cfg, seed)
    lags = cfgmod.build_grid(cfgmod._section(cfg, "lags", kind=None), "lags")
    mats = autocorrelation(traj, lags)
    tcorr = estimate_tcorr(traj)
    out = _require_out(args, cfg)
    k = traj.dim
    cols = ["lag"] + [f"acf_{i + 1}_{j + 1}" for i in range(k) for j in range(k)]
    data = np.column_stack([lags, mats.reshape(mats.shape[0], -1)])
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"# tcorr={_FMT % tcorr}\n")
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, data, fmt=_FMT, delimiter=",")
    line = f"T_corr = {tcorr:.6g}"
    intensity = cfg.get("intensity")
    if intensity is not None:
        alpha = cfgmod._num(intensity, "intensity", "alpha")
        ratio, verdict = accuracy_diagnostic(alpha, tcorr)
        line += f", alpha*T_corr = {ratio:.6g} -> {verdict}"
    print(f"wrote {lags.size}-lag autocorrelation to {out}; {line}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpresponse",
        description="Response prediction for stochastic dynamics under finite jump perturbations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, traj_flag=False):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the config output path")
        p.add_argument("--threads", type=int, default=1, help="worker threads where supported")
        if traj_flag:
            p.add_argument("--traj", default=None, help="input trajectory file (skips simulation)")

    p = sub.add_parser("simulate", help="write a trajectory file")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="run a response estimator")
    common(p, traj_flag=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("oracle", help="write analytic linear-model curves")
    common(p)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("mc", help="write ensemble Monte Carlo curves")
    common(p)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("compare", help="difference of two curve files in SE units")
    p.add_argument("curve_a")
    p.add_argument("curve_b")
    p.add_argument("--out", default=None, help="write the per-lag z-scores here")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("acf", help="autocorrelation and correlation time")
    common(p, traj_flag=True)
    p.set_defaults(func=_cmd_acf)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BlowupError, EstimatorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
