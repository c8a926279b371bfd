"""Response curves and the observables they are computed for."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ValidationError


@dataclass
class ResponseCurve:
    """Per-lag response values with standard errors.

    values and stderr have shape (M, J): one row per lag, one column per
    observable output.  Analytic curves carry zero standard errors.
    """

    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=float)
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.values.ndim == 1:
            self.values = self.values.reshape(-1, 1)
        self.stderr = np.atleast_1d(np.asarray(self.stderr, dtype=float))
        if self.stderr.ndim == 1:
            self.stderr = self.stderr.reshape(-1, 1)
        if self.lags.ndim != 1 or self.lags.size == 0:
            raise ValidationError("curve needs a non-empty 1-d lag grid")
        if np.any(np.diff(self.lags) <= 0):
            raise ValidationError("curve lags must be strictly increasing")
        if self.values.shape[0] != self.lags.size or self.stderr.shape != self.values.shape:
            raise DimensionMismatchError(
                f"curve shapes disagree: lags {self.lags.shape}, values "
                f"{self.values.shape}, stderr {self.stderr.shape}"
            )
        if not np.all(np.isfinite(self.values)) or not np.all(np.isfinite(self.stderr)):
            raise ValidationError("curve values/stderr must be finite")
        if np.any(self.stderr < 0):
            raise ValidationError("curve stderr must be non-negative")

    @property
    def n_outputs(self) -> int:
        return self.values.shape[1]

    def at(self, lag: float, rtol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """(values, stderr) at the grid point matching ``lag``."""
        idx = np.argmin(np.abs(self.lags - lag))
        if abs(self.lags[idx] - lag) > rtol * max(1.0, abs(lag)):
            raise ValidationError(f"lag {lag!r} is not on the curve grid")
        return self.values[idx], self.stderr[idx]


class Identity:
    """Observable psi(x) = x (K outputs)."""

    def n_outputs(self, dim: int) -> int:
        return dim

    def apply(self, states: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(states, dtype=float))

    def labels(self, dim: int) -> list[str]:
        return [f"x{i + 1}" for i in range(dim)]


class Component:
    """Observable psi(x) = x_i (single output)."""

    def __init__(self, index: int):
        self.index = int(index)
        if self.index < 0:
            raise ValidationError("component index must be non-negative")

    def n_outputs(self, dim: int) -> int:
        if self.index >= dim:
            raise DimensionMismatchError(
                f"component index {self.index} out of range for dimension {dim}"
            )
        return 1

    def apply(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        self.n_outputs(states.shape[1])
        return states[:, self.index : self.index + 1]

    def labels(self, dim: int) -> list[str]:
        return [f"x{self.index + 1}"]


class Quadratic:
    """Observable psi(x) = x_i * x_j (single output)."""

    def __init__(self, i: int, j: int):
        self.i = int(i)
        self.j = int(j)
        if self.i < 0 or self.j < 0:
            raise ValidationError("quadratic indices must be non-negative")

    def n_outputs(self, dim: int) -> int:
        if max(self.i, self.j) >= dim:
            raise DimensionMismatchError(
                f"quadratic indices ({self.i}, {self.j}) out of range for dimension {dim}"
            )
        return 1

    def apply(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        self.n_outputs(states.shape[1])
        return (states[:, self.i] * states[:, self.j]).reshape(-1, 1)

    def labels(self, dim: int) -> list[str]:
        return [f"x{self.i + 1}*x{self.j + 1}"]


class Energy:
    """Observable psi(x) = 0.5 * |x|^2 (single output)."""

    def n_outputs(self, dim: int) -> int:
        return 1

    def apply(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return (0.5 * np.einsum("ij,ij->i", states, states)).reshape(-1, 1)

    def labels(self, dim: int) -> list[str]:
        return ["energy"]


TestFunction = Identity | Component | Quadratic | Energy
