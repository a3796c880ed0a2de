"""Piecewise-linear spline on a uniform stress-magnitude grid.

A constitutive model represents strain as ``sign(tau) * g(|tau|)`` where ``g``
interpolates the coefficients ``c_i`` attached to uniformly spaced knots on
``[0, tau_max]``. Beyond ``tau_max`` the spline is held constant at the last
coefficient, which keeps the strain bounded under any extrapolation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ModeError


class SplineMode(str, enum.Enum):
    CONSTITUTIVE = "constitutive"
    RESIDUAL = "residual"


@dataclass(frozen=True)
class KnotGrid:
    tau_max: float
    n_knots: int

    def __post_init__(self):
        if not (np.isfinite(self.tau_max) and self.tau_max > 0):
            raise DomainError(f"tau_max must be positive, got {self.tau_max!r}")
        if int(self.n_knots) != self.n_knots or self.n_knots < 2:
            raise DomainError(f"n_knots must be an integer >= 2, got {self.n_knots!r}")
        object.__setattr__(self, "tau_max", float(self.tau_max))
        object.__setattr__(self, "n_knots", int(self.n_knots))

    @property
    def spacing(self) -> float:
        return self.tau_max / (self.n_knots - 1)

    def knots(self) -> np.ndarray:
        k = np.arange(self.n_knots) * self.spacing
        k[-1] = self.tau_max
        return k

    def locate(self, s):
        """Segment index and fractional position for magnitudes ``s >= 0``.

        Points past ``tau_max`` sit at the right end of the last segment.
        """
        s = np.asarray(s, dtype=float)
        pos = s / self.spacing
        idx = np.minimum(np.floor(pos), self.n_knots - 2).astype(np.intp)
        frac = np.clip(pos - idx, 0.0, 1.0)
        frac = np.where(s >= self.tau_max, 1.0, frac)
        return idx, frac


class SplineModel:
    """Knot grid plus coefficients; immutable once built."""

    __slots__ = ("grid", "coefficients", "mode")

    def __init__(self, grid: KnotGrid, coefficients, mode=SplineMode.CONSTITUTIVE):
        coeffs = np.array(coefficients, dtype=float)
        if coeffs.shape != (grid.n_knots,):
            raise DomainError(
                f"expected {grid.n_knots} coefficients, got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "mode", SplineMode(mode))

    def __setattr__(self, name, value):
        raise AttributeError("SplineModel is immutable")

    def __eq__(self, other):
        if not isinstance(other, SplineModel):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.grid == other.grid
            and np.array_equal(self.coefficients, other.coefficients)
        )

    def __repr__(self):
        return (
            f"SplineModel(mode={self.mode.value}, tau_max={self.grid.tau_max!r}, "
            f"n_knots={self.grid.n_knots})"
        )

    def with_coefficients(self, coefficients) -> "SplineModel":
        return SplineModel(self.grid, coefficients, self.mode)

    @classmethod
    def zeros(cls, grid: KnotGrid, mode=SplineMode.RESIDUAL) -> "SplineModel":
        return cls(grid, np.zeros(grid.n_knots), mode)

    @classmethod
    def linear_ramp(cls, grid: KnotGrid, strain_bound: float, modulus: float = 1.0):
        """Linear-elastic start ``c_i = min(tau_i / E, 0.9 * bound)``."""
        coeffs = np.minimum(grid.knots() / modulus, 0.9 * strain_bound)
        return cls(grid, coeffs, SplineMode.CONSTITUTIVE)


def _check_magnitude(s):
    arr = np.asarray(s, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("stress magnitude must be nonnegative")
    return arr


def _unwrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def eval_magnitude(model: SplineModel, s):
    """Interpolated value g(s) for s >= 0, constant past ``tau_max``."""
    arr = _check_magnitude(s)
    idx, frac = model.grid.locate(arr)
    c = model.coefficients
    out = c[idx] * (1.0 - frac) + c[idx + 1] * frac
    return _unwrap(out, s)


def predict(model: SplineModel, tau):
    """Odd reconstruction ``sign(tau) * g(|tau|)``."""
    t = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("stress must be finite")
    out = np.sign(t) * eval_magnitude(model, np.abs(t))
    return _unwrap(out, tau)


def segment_slopes(model: SplineModel) -> np.ndarray:
    return np.diff(model.coefficients) / model.grid.spacing


def local_slope(model: SplineModel, tau):
    """Piecewise-constant derivative of g at ``|tau|``.

    At an interior knot the right-hand segment wins; at and beyond ``tau_max``
    the slope is zero.
    """
    t = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("stress must be finite")
    s = np.abs(t)
    idx, _ = model.grid.locate(s)
    out = np.where(s >= model.grid.tau_max, 0.0, segment_slopes(model)[idx])
    return _unwrap(out, tau)


def basis_weights(grid: KnotGrid, s: float):
    """Nonzero hat-function weights at ``s`` as ``[(index, weight), ...]``.

    Indices are zero-based. Weights sum to one.
    """
    _check_magnitude(s)
    idx, frac = grid.locate(float(s))
    idx, frac = int(idx), float(frac)
    pairs = [(idx, 1.0 - frac), (idx + 1, frac)]
    return [(i, w) for i, w in pairs if w != 0.0]


def basis_matrix(grid: KnotGrid, s) -> np.ndarray:
    """Dense (len(s), n_knots) matrix of hat-function weights."""
    s = _check_magnitude(s)
    idx, frac = grid.locate(s)
    rows = np.arange(s.size)
    m = np.zeros((s.size, grid.n_knots))
    np.add.at(m, (rows, idx), 1.0 - frac)
    np.add.at(m, (rows, idx + 1), frac)
    return m


def project_constraints(model: SplineModel, strain_bound: float) -> SplineModel:
    """Pin c_1 to zero, clamp into [0, bound] and repair monotonicity."""
    if model.mode is not SplineMode.CONSTITUTIVE:
        raise ModeError("constraint projection applies to constitutive models only")
    if not strain_bound > 0:
        raise DomainError(f"strain_bound must be positive, got {strain_bound!r}")
    c = np.clip(model.coefficients, 0.0, strain_bound)
    c[0] = 0.0
    c = np.maximum.accumulate(c)
    return model.with_coefficients(c)


def to_dict(model: SplineModel) -> dict:
    return {
        "mode": model.mode.value,
        "tau_max": model.grid.tau_max,
        "n_knots": model.grid.n_knots,
        "coefficients": [float(c) for c in model.coefficients],
    }


def from_dict(d: dict) -> SplineModel:
    grid = KnotGrid(float(d["tau_max"]), int(d["n_knots"]))
    return SplineModel(grid, [float(c) for c in d["coefficients"]], SplineMode(d["mode"]))
