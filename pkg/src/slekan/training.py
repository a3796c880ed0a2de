"""Physics-informed training of spline models.

Holds the composite loss with its analytic gradient, a plain Adam optimizer,
synthetic data generation, the full-batch training loop and fit metrics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import sle
from .errors import DomainError
from .spline import (
    KnotGrid,
    SplineMode,
    SplineModel,
    eval_magnitude,
    predict,
    project_constraints,
)

DEFAULT_KNOTS = 64
DEFAULT_TAU_RANGE = (-10.0, 10.0)
DEFAULT_SAMPLES = 400
DEFAULT_ALPHA = 2.0
GRID_MARGIN = 1.05


class ModeTag(str, enum.Enum):
    UNIAXIAL = "uniaxial"
    BIAXIAL = "biaxial"
    PLANAR = "planar"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class LossWeights:
    w_data: float = 1.0
    w_mono: float = 10.0
    w_limit: float = 10.0
    w_flat: float = 0.01
    flat_threshold_fraction: float = 0.7

    def __post_init__(self):
        for name in ("w_data", "w_mono", "w_limit", "w_flat"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be nonnegative")
        if not self.w_data > 0:
            raise DomainError("w_data must be positive")
        if not 0 < self.flat_threshold_fraction < 1:
            raise DomainError("flat_threshold_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    iterations: int = 5000
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise DomainError("iterations must be a nonnegative integer")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    mode_tag: ModeTag = ModeTag.SYNTHETIC

    def __post_init__(self):
        x = np.array(self.inputs, dtype=float)
        y = np.array(self.targets, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise DomainError("inputs and targets must be 1-D and of equal length")
        if x.size < 2:
            raise DomainError("a dataset needs at least two samples")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("dataset entries must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "mode_tag", ModeTag(self.mode_tag))

    def __len__(self):
        return self.inputs.size

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.mode_tag == other.mode_tag
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.targets, other.targets)
        )


@dataclass(frozen=True)
class FitMetrics:
    mae: float
    rmse: float
    r_squared: float

    @property
    def r_squared_defined(self) -> bool:
        return not math.isinf(self.r_squared)

    def to_dict(self) -> dict:
        r2 = self.r_squared if self.r_squared_defined else "undefined"
        return {"mae": self.mae, "rmse": self.rmse, "r_squared": r2}

    @classmethod
    def from_dict(cls, d) -> "FitMetrics":
        r2 = d["r_squared"]
        r2 = -math.inf if r2 == "undefined" else float(r2)
        return cls(float(d["mae"]), float(d["rmse"]), r2)


def metrics(predictions, targets) -> FitMetrics:
    """MAE, RMSE and R^2; R^2 is ``-inf`` when targets are constant but missed."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise DomainError("predictions and targets must be nonempty 1-D of equal length")
    err = p - t
    dev = t - t.mean()
    mae = float(np.mean(np.abs(err)))
    # squares are taken after scaling by the largest entry so tiny errors do not underflow
    err_scale = float(np.max(np.abs(err)))
    dev_scale = float(np.max(np.abs(dev)))
    res_sum = float(np.sum((err / err_scale) ** 2)) if err_scale > 0 else 0.0
    tot_sum = float(np.sum((dev / dev_scale) ** 2)) if dev_scale > 0 else 0.0
    rmse = err_scale * math.sqrt(res_sum / err.size)
    if tot_sum == 0.0:
        r2 = 1.0 if res_sum == 0.0 else -math.inf
    else:
        # float ** raises on overflow, a product saturates to inf
        q = (err_scale / dev_scale) * math.sqrt(res_sum / tot_sum)
        r2 = 1.0 - q * q
    return FitMetrics(mae, rmse, r2)


def generate_synthetic(
    params: sle.SleParams,
    n_samples: int = DEFAULT_SAMPLES,
    tau_range=DEFAULT_TAU_RANGE,
    spacing: str = "grid",
    seed: int = 0,
) -> Dataset:
    """Noise-free (stress, strain) samples of the strain-limiting law.

    ``spacing="grid"`` gives an evenly spaced grid including both ends;
    ``spacing="random"`` draws stresses uniformly with the given seed.
    """
    lo, hi = (float(v) for v in tau_range)
    if n_samples < 2:
        raise DomainError("n_samples must be at least 2")
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise DomainError(f"invalid stress range [{lo}, {hi}]")
    if spacing == "grid":
        tau = np.linspace(lo, hi, n_samples)
    elif spacing == "random":
        tau = np.sort(np.random.default_rng(seed).uniform(lo, hi, n_samples))
    else:
        raise DomainError(f"unknown spacing {spacing!r}")
    return Dataset(tau, sle.strain_from_stress(params, tau), ModeTag.SYNTHETIC)


def default_grid(data: Dataset, n_knots: int = DEFAULT_KNOTS) -> KnotGrid:
    return KnotGrid(GRID_MARGIN * float(np.max(np.abs(data.inputs))), n_knots)


class _LossTerms:
    """Precomputed basis for evaluating the composite loss on one dataset."""

    def __init__(self, grid: KnotGrid, data: Dataset, mode: SplineMode):
        x = data.inputs
        if mode is SplineMode.CONSTITUTIVE:
            self.sign = np.sign(x)
            mag = np.abs(x)
        else:
            if np.any(x < 0):
                raise DomainError("residual-mode inputs must be nonnegative")
            self.sign = np.ones_like(x)
            mag = x
        self.idx, self.frac = grid.locate(mag)
        self.targets = data.targets
        self.n_knots = grid.n_knots
        self.h = grid.spacing
        self.tau_max = grid.tau_max

    def __call__(self, coeffs, strain_bound, weights: LossWeights):
        c = coeffs
        n = self.targets.size
        k = self.n_knots
        pred = self.sign * (c[self.idx] * (1.0 - self.frac) + c[self.idx + 1] * self.frac)
        resid = pred - self.targets
        loss = weights.w_data * float(np.mean(resid**2))
        grad = np.zeros(k)
        d_pred = (2.0 * weights.w_data / n) * resid * self.sign
        np.add.at(grad, self.idx, d_pred * (1.0 - self.frac))
        np.add.at(grad, self.idx + 1, d_pred * self.frac)

        slopes = np.diff(c) / self.h
        d_slopes = np.zeros(k - 1)
        if weights.w_mono:
            neg = np.minimum(slopes, 0.0)
            loss += weights.w_mono * float(np.mean(neg**2))
            d_slopes += weights.w_mono * 2.0 * neg / (k - 1)
        if weights.w_flat:
            left_knots = np.arange(k - 1) * self.h
            flat = left_knots > weights.flat_threshold_fraction * self.tau_max
            if flat.any():
                loss += weights.w_flat * float(np.mean(slopes[flat] ** 2))
                d_slopes += np.where(flat, weights.w_flat * 2.0 * slopes / flat.sum(), 0.0)
        grad[1:] += d_slopes / self.h
        grad[:-1] -= d_slopes / self.h

        if weights.w_limit:
            over = np.maximum(c - strain_bound, 0.0)
            loss += weights.w_limit * float(np.mean(over**2))
            grad += weights.w_limit * 2.0 * over / k
        return loss, grad


def composite_loss(model: SplineModel, data: Dataset, strain_bound: float, weights: LossWeights):
    """Weighted data misfit plus monotonicity, strain-limit and flattening penalties.

    Returns ``(loss, gradient)`` with the gradient taken with respect to every
    coefficient. Constitutive models are evaluated through the odd
    reconstruction; residual models directly on their (nonnegative) inputs.
    """
    if data is None or len(data) == 0:
        raise DomainError("empty dataset")
    terms = _LossTerms(model.grid, data, model.mode)
    return terms(model.coefficients, strain_bound, weights)


@dataclass(frozen=True, eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(state: AdamState, gradient, lr: float):
    """One bias-corrected Adam update. Returns ``(new_state, delta)``."""
    g = np.asarray(gradient, dtype=float)
    if g.shape != state.m.shape:
        raise DomainError(f"gradient shape {g.shape} does not match state {state.m.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    delta = -lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new = AdamState(m, v, t, state.beta1, state.beta2, state.eps)
    return new, delta


def train(initial: SplineModel, data: Dataset, strain_bound: float, config: TrainConfig):
    """Full-batch Adam on the composite loss.

    Constitutive models keep ``c_1 = 0`` at every step and are projected onto
    the admissible set after the last one. Returns ``(model, loss_history)``
    where entry ``k`` is the loss before step ``k``.
    """
    constitutive = initial.mode is SplineMode.CONSTITUTIVE
    terms = _LossTerms(initial.grid, data, initial.mode)
    c = np.array(initial.coefficients, dtype=float)
    if constitutive:
        c[0] = 0.0
    state = AdamState.zeros(c.size)
    history = np.empty(config.iterations)
    for k in range(config.iterations):
        loss, grad = terms(c, strain_bound, config.weights)
        history[k] = loss
        if constitutive:
            grad[0] = 0.0
        state, delta = adam_step(state, grad, config.learning_rate)
        c = c + delta
        if constitutive:
            c[0] = 0.0
    model = initial.with_coefficients(c)
    if constitutive:
        model = project_constraints(model, strain_bound)
    return model, history


def held_out_grid(data: Dataset) -> np.ndarray:
    """Midpoints between consecutive sorted training inputs."""
    x = np.sort(data.inputs)
    return 0.5 * (x[:-1] + x[1:])


@dataclass
class SynthResult:
    beta: float
    params: sle.SleParams
    data: Dataset
    model: SplineModel
    loss_history: np.ndarray
    test_inputs: np.ndarray
    test_metrics: FitMetrics


def run_synthetic(
    beta: float,
    alpha: float = DEFAULT_ALPHA,
    n_samples: int = DEFAULT_SAMPLES,
    tau_range=DEFAULT_TAU_RANGE,
    n_knots: int = DEFAULT_KNOTS,
    config: TrainConfig | None = None,
) -> SynthResult:
    """Generate data for one beta (E = 1), train, and score on held-out points."""
    config = config or TrainConfig()
    params = sle.SleParams(alpha=alpha, beta=beta, youngs_modulus=1.0)
    data = generate_synthetic(params, n_samples, tau_range, seed=config.seed)
    bound = params.strain_limit()
    initial = SplineModel.linear_ramp(default_grid(data, n_knots), bound)
    model, history = train(initial, data, bound, config)
    x_test = held_out_grid(data)
    m = metrics(predict(model, x_test), sle.strain_from_stress(params, x_test))
    return SynthResult(beta, params, data, model, history, x_test, m)


def evaluate(model: SplineModel, inputs):
    """Mode-appropriate forward pass used by the loss."""
    if model.mode is SplineMode.CONSTITUTIVE:
        return predict(model, inputs)
    return eval_magnitude(model, inputs)
