"""Trajectory and response-curve files.

Trajectories are CSV with a two-line comment header (`# dt=`, `# K=`, plus an
optional `# origin=` JSON line) and one state row per step, printed with full
float64 round-trip precision.  A packed little-endian float64 binary variant
(extension .bin) keeps the same header in a `<path>.hdr` sidecar.  Curves are
CSV with columns lag, value_1..value_J, stderr_1..stderr_J and an optional
`# meta=` JSON line.
"""

from __future__ import annotations

import io
import json
import os
from pathlib import Path

import numpy as np

from .curves import ResponseCurve
from .errors import ValidationError
from .model import Trajectory

_FMT = "%.17g"


def _is_binary(path) -> bool:
    return Path(path).suffix == ".bin"


def _header_lines(pairs: dict) -> str:
    return "".join(f"# {key}={value}\n" for key, value in pairs.items())


def _parse_header(lines, path, required=("dt", "K")) -> dict:
    found = {}
    for line in lines:
        body = line[1:].strip()
        key, sep, value = body.partition("=")
        if sep:
            found[key.strip()] = value.strip()
    for key in required:
        if key not in found:
            raise ValidationError(f"{path}: missing header key '{key}'")
    return found


def _trajectory_header(traj: Trajectory) -> str:
    pairs = {"dt": _FMT % traj.dt, "K": traj.dim}
    if traj.origin:
        pairs["origin"] = json.dumps(traj.origin, default=repr)
    return _header_lines(pairs)


def _check_rows(data: np.ndarray, path) -> None:
    bad = np.nonzero(~np.isfinite(data).all(axis=1))[0]
    if bad.size:
        raise ValidationError(f"{path}: non-finite value at data row {bad[0] + 1}")


def _load_rows(source, path, expected_cols: int | None) -> np.ndarray:
    try:
        data = np.loadtxt(source, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed numeric data ({exc})") from exc
    if data.size == 0:
        raise ValidationError(f"{path}: no data rows")
    if expected_cols is not None and data.shape[1] != expected_cols:
        raise ValidationError(
            f"{path}: expected {expected_cols} columns, found {data.shape[1]}"
        )
    _check_rows(data, path)
    return data


def write_trajectory(path, traj: Trajectory) -> None:
    """Write a trajectory; .bin selects the packed binary variant."""
    if _is_binary(path):
        with open(f"{path}.hdr", "w", encoding="utf-8") as fh:
            fh.write(_trajectory_header(traj))
        traj.states.astype("<f8").tofile(path)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_trajectory_header(traj))
        np.savetxt(fh, traj.states, fmt=_FMT, delimiter=",")


def _read_comment_lines(path) -> list[str]:
    lines = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                lines.append(line)
    except UnicodeDecodeError as exc:
        raise ValidationError(f"{path}: not a text data file (binary or non-UTF-8 bytes)") from exc
    return lines


def _origin_from(header: dict) -> dict:
    raw = header.get("origin")
    if raw is None:
        return {}
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return {"raw": raw}


def read_trajectory(path) -> Trajectory:
    """Read a trajectory written by write_trajectory (CSV or .bin)."""
    if not os.path.exists(path):
        raise ValidationError(f"{path}: no such file")
    if _is_binary(path):
        hdr_path = f"{path}.hdr"
        if not os.path.exists(hdr_path):
            raise ValidationError(f"{hdr_path}: missing binary sidecar header")
        header = _parse_header(_read_comment_lines(hdr_path), hdr_path)
        dt = _float_field(header, "dt", hdr_path)
        k = _int_field(header, "K", hdr_path)
        flat = np.fromfile(path, dtype="<f8")
        if flat.size == 0 or flat.size % k:
            raise ValidationError(f"{path}: byte length is not a multiple of K={k} floats")
        states = flat.reshape(-1, k)
        _check_rows(states, path)
        return Trajectory(dt=dt, states=states, origin=_origin_from(header))
    header = _parse_header(_read_comment_lines(path), path)
    dt = _float_field(header, "dt", path)
    k = _int_field(header, "K", path)
    states = _load_rows(path, path, k)
    return Trajectory(dt=dt, states=states, origin=_origin_from(header))


def _float_field(header: dict, key: str, path) -> float:
    try:
        return float(header[key])
    except ValueError as exc:
        raise ValidationError(f"{path}: header key '{key}' is not a number") from exc


def _int_field(header: dict, key: str, path) -> int:
    try:
        return int(header[key])
    except ValueError as exc:
        raise ValidationError(f"{path}: header key '{key}' is not an integer") from exc


def write_curve(path, curve: ResponseCurve) -> None:
    """Write a response curve as lag,value_*,stderr_* CSV."""
    j = curve.n_outputs
    cols = ["lag"] + [f"value_{i + 1}" for i in range(j)] + [f"stderr_{i + 1}" for i in range(j)]
    data = np.column_stack([curve.lags, curve.values, curve.stderr])
    with open(path, "w", encoding="utf-8") as fh:
        if curve.meta:
            fh.write(f"# meta={json.dumps(curve.meta, default=repr)}\n")
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, data, fmt=_FMT, delimiter=",")


def read_curve(path) -> ResponseCurve:
    """Read a response curve written by write_curve."""
    if not os.path.exists(path):
        raise ValidationError(f"{path}: no such file")
    meta = {}
    header_row = None
    body = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                stripped = line.strip()
                if not stripped:
                    continue
                if stripped.startswith("#"):
                    key, sep, value = stripped[1:].strip().partition("=")
                    if sep and key.strip() == "meta":
                        try:
                            meta = json.loads(value)
                        except json.JSONDecodeError:
                            meta = {"raw": value}
                    continue
                if header_row is None:
                    header_row = stripped
                    continue
                body.append(line)
    except UnicodeDecodeError as exc:
        raise ValidationError(f"{path}: not a text data file (binary or non-UTF-8 bytes)") from exc
    if header_row is None or not header_row.startswith("lag"):
        raise ValidationError(f"{path}: missing 'lag,value_*,stderr_*' column header")
    n_cols = len(header_row.split(","))
    if n_cols < 3 or n_cols % 2 == 0:
        raise ValidationError(f"{path}: column count {n_cols} is not 1 + 2 J")
    if not body:
        raise ValidationError(f"{path}: no data rows")
    data = _load_rows(io.StringIO("".join(body)), path, n_cols)
    j = (n_cols - 1) // 2
    return ResponseCurve(
        lags=data[:, 0],
        values=data[:, 1 : 1 + j],
        stderr=data[:, 1 + j :],
        meta=meta,
    )
