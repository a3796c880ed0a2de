"""Two-stage hybrid model: frozen strain-limiting backbone plus a residual spline.

Stage one fixes the material parameters; stage two fits a residual spline on
``log(stretch)`` to whatever stress the backbone misses. The prediction is
the plain sum of the two.

Under a prescribed regime some data strains may reach the strain limit, where
the backbone stress is infinite. Those points are evaluated on a capped
saturation branch (the stress at 1 - 1e-6 of the limit) and flagged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import sle
from .calibrate import log_strain
from .errors import DomainError
from .spline import KnotGrid, SplineMode, SplineModel, eval_magnitude
from .training import (
    Dataset,
    FitMetrics,
    LossWeights,
    ModeTag,
    TrainConfig,
    metrics,
    train,
)

SATURATION_CAP_FRACTION = 1.0 - 1e-6
RESIDUAL_KNOTS = 16
PLATEAU_FACTOR = 1.05
# Fraction of the maximum log-stretch above which points count as large stretch.
LARGE_STRETCH_FRACTION = 0.5


class RegimeLabel(str, enum.Enum):
    MODERATE = "moderate"
    STRONG = "strong"
    CUSTOM = "custom"


@dataclass(frozen=True)
class RegimeSpec:
    gamma: float
    label: RegimeLabel = RegimeLabel.CUSTOM

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"gamma must be positive, got {self.gamma!r}")
        object.__setattr__(self, "label", RegimeLabel(self.label))


MODERATE = RegimeSpec(0.50, RegimeLabel.MODERATE)
STRONG = RegimeSpec(0.80, RegimeLabel.STRONG)


def default_residual_config(seed: int = 0) -> TrainConfig:
    return TrainConfig(seed=seed, weights=LossWeights(w_mono=0.0, w_limit=0.0, w_flat=1e-3))


@dataclass(frozen=True)
class HybridModel:
    sle: sle.SleParams
    residual: SplineModel

    def __post_init__(self):
        if self.residual.mode is not SplineMode.RESIDUAL:
            raise DomainError("hybrid residual must be a residual-mode spline")


class HybridPrediction(NamedTuple):
    stress: np.ndarray | float
    sle_stress: np.ndarray | float
    residual: np.ndarray | float
    saturated: np.ndarray | bool


def saturation_flags(params: sle.SleParams, strain) -> np.ndarray:
    limit = params.strain_limit()
    return np.abs(np.asarray(strain, dtype=float)) >= (1.0 - sle.FEASIBILITY_MARGIN) * limit


def backbone_stress(params: sle.SleParams, strain, tol: float = 1e-10):
    """Backbone stress with flagged points moved onto the capped saturation branch.

    Returns ``(stress, flags)`` as arrays.
    """
    e = np.atleast_1d(np.asarray(strain, dtype=float))
    flags = saturation_flags(params, e)
    out = np.empty_like(e)
    if np.any(~flags):
        out[~flags] = sle.stress_from_strain(params, e[~flags], tol)
    if np.any(flags):
        cap = sle.stress_from_strain(params, SATURATION_CAP_FRACTION * params.strain_limit(), tol)
        out[flags] = np.sign(e[flags]) * cap
    return out, flags


def compute_residuals(data: Dataset, params: sle.SleParams, tol: float = 1e-10):
    """Residual dataset ``(log stretch, stress_exp - stress_sle)`` in input order.

    Returns ``(residual_dataset, saturation_flags)``.
    """
    if data is None or len(data) == 0:
        raise DomainError("empty dataset")
    strain = log_strain(data.inputs)
    base, flags = backbone_stress(params, strain, tol)
    return Dataset(strain, data.targets - base, data.mode_tag), flags


def train_residual(
    residuals: Dataset,
    config: TrainConfig | None = None,
    n_knots: int = RESIDUAL_KNOTS,
):
    """Fit a residual spline on ``[0, max log stretch]`` starting from zero.

    Monotonicity and strain-limit penalties are switched off; only the data
    term and the configured slope regularizer act. Returns
    ``(model, loss_history)``.
    """
    config = config or default_residual_config()
    weights = replace(config.weights, w_mono=0.0, w_limit=0.0)
    config = replace(config, weights=weights)
    tau_max = float(np.max(residuals.inputs))
    if not tau_max > 0:
        raise DomainError("residual inputs must span a positive log-stretch range")
    initial = SplineModel.zeros(KnotGrid(tau_max, n_knots), SplineMode.RESIDUAL)
    return train(initial, residuals, np.inf, config)


def hybrid_predict(model: HybridModel, stretch, tol: float = 1e-10) -> HybridPrediction:
    """Backbone stress plus residual correction at ``stretch``."""
    strain = log_strain(stretch)
    base, flags = backbone_stress(model.sle, strain, tol)
    corr = np.atleast_1d(eval_magnitude(model.residual, np.maximum(strain, 0.0)))
    total = base + corr
    if np.ndim(stretch) == 0:
        return HybridPrediction(float(total[0]), float(base[0]), float(corr[0]), bool(flags[0]))
    return HybridPrediction(total, base, corr, flags)


def plateau_iteration(history, factor: float = PLATEAU_FACTOR) -> int:
    """First iteration whose loss is within ``factor`` of the final loss."""
    h = np.asarray(history, dtype=float)
    if h.size == 0:
        return 0
    return int(np.argmax(h <= factor * h[-1]))


@dataclass(frozen=True)
class PointRow:
    stretch: float
    stress_exp: float
    stress_sle: float
    stress_kan: float
    stress_pred: float
    saturated: bool


@dataclass(frozen=True)
class FitReport:
    mode: str
    gamma: float
    alpha: float
    youngs_modulus: float
    beta: float
    strain_limit: float
    points: tuple
    sle_metrics: FitMetrics
    hybrid_metrics: FitMetrics
    loss_history: tuple
    n_saturated: int
    subordination_ratio: float
    sle_large_stretch_rmse: float
    hybrid_large_stretch_rmse: float
    plateau_iteration: int
    residual: SplineModel
    loss_history_file: str | None = None

    @property
    def sle_params(self) -> sle.SleParams:
        return sle.SleParams(alpha=self.alpha, beta=self.beta, youngs_modulus=self.youngs_modulus)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


def _rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def run_regime(
    data: Dataset,
    alpha: float,
    youngs_modulus: float,
    spec: RegimeSpec,
    train_cfg: TrainConfig | None = None,
    tol: float = 1e-10,
    n_knots: int = RESIDUAL_KNOTS,
):
    """Prescribe ``beta = gamma / E``, fit the residual spline, and audit the result.

    ``alpha`` and ``youngs_modulus`` come from a prior calibration and stay fixed.
    Returns ``(HybridModel, FitReport)``.
    """
    beta = spec.gamma / youngs_modulus
    params = sle.SleParams(alpha=alpha, beta=beta, youngs_modulus=youngs_modulus)
    residuals, flags = compute_residuals(data, params, tol)
    model_kan, history = train_residual(residuals, train_cfg, n_knots)
    hybrid = HybridModel(params, model_kan)

    pred = hybrid_predict(hybrid, data.inputs, tol)
    exp = data.targets
    strain = residuals.inputs
    large = strain >= LARGE_STRETCH_FRACTION * strain.max()
    peak_total = float(np.max(np.abs(pred.stress)))
    ratio = float(np.max(np.abs(pred.residual)) / peak_total) if peak_total > 0 else 0.0
    points = tuple(
        PointRow(float(l), float(e), float(s), float(k), float(p), bool(f))
        for l, e, s, k, p, f in zip(
            data.inputs, exp, pred.sle_stress, pred.residual, pred.stress, pred.saturated
        )
    )
    report = FitReport(
        mode=ModeTag(data.mode_tag).value,
        gamma=float(spec.gamma),
        alpha=params.alpha,
        youngs_modulus=params.youngs_modulus,
        beta=params.beta,
        strain_limit=params.strain_limit(),
        points=points,
        sle_metrics=metrics(pred.sle_stress, exp),
        hybrid_metrics=metrics(pred.stress, exp),
        loss_history=tuple(float(v) for v in history),
        n_saturated=int(np.count_nonzero(flags)),
        subordination_ratio=ratio,
        sle_large_stretch_rmse=_rmse(pred.sle_stress[large], exp[large]),
        hybrid_large_stretch_rmse=_rmse(pred.stress[large], exp[large]),
        plateau_iteration=plateau_iteration(history),
        residual=model_kan,
    )
    return hybrid, report
