"""Stress-space calibration of (alpha, E, beta) from stretch-stress data.

Stretch is mapped to logarithmic strain, the strain-limiting law is inverted
by bisection to predict stress, and a Huber loss on the stress misfit is
minimized by multi-start Nelder-Mead in log-parameter space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import sle
from .errors import CalibrationError, DomainError
from .training import Dataset, FitMetrics, metrics

INFEASIBLE_PENALTY = 1e6
_PARAM_NAMES = ("alpha", "youngs_modulus", "beta")


def log_strain(stretch):
    lam = np.asarray(stretch, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("stretch must be positive")
    out = np.log(lam)
    return float(out) if np.ndim(stretch) == 0 else out


def sle_stress_prediction(params: sle.SleParams, stretch, tol: float = 1e-10):
    return sle.stress_from_strain(params, log_strain(stretch), tol)


def huber(r, scale):
    a = np.abs(r)
    return np.where(a <= scale, 0.5 * r * r, scale * (a - 0.5 * scale))


def squared(r, scale=None):
    return 0.5 * r * r


_LOSSES = {"huber": huber, "squared": squared}


@dataclass(frozen=True)
class CalibrationConfig:
    alpha_bounds: tuple = (0.2, 10.0)
    modulus_bounds: tuple = (0.01, 100.0)
    beta_bounds: tuple = (0.01, 10.0)
    robust_scale: float | None = None  # None: 10% of the max data stress
    restarts: int = 8
    seed: int = 0
    bisection_tol: float = 1e-10
    loss: str = "huber"
    max_evaluations: int = 3000

    def __post_init__(self):
        for name in ("alpha_bounds", "modulus_bounds", "beta_bounds"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi):
                raise DomainError(f"{name} must satisfy 0 < lo < hi, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.robust_scale is not None and not self.robust_scale > 0:
            raise DomainError("robust_scale must be positive")
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise DomainError("restarts must be a positive integer")
        if not self.bisection_tol > 0:
            raise DomainError("bisection_tol must be positive")
        if self.loss not in _LOSSES:
            raise DomainError(f"loss must be one of {sorted(_LOSSES)}")

    @property
    def log_bounds(self) -> np.ndarray:
        return np.log([self.alpha_bounds, self.modulus_bounds, self.beta_bounds])


@dataclass(frozen=True)
class CalibrationResult:
    params: sle.SleParams
    objective: float
    metrics: FitMetrics
    feasible: bool
    mode: str = "unknown"
    restart_objectives: tuple = field(default=(), compare=False)

    def to_record(self) -> dict:
        """Flat record in calibrated-parameter-table layout."""
        p = self.params
        return {
            "mode": self.mode,
            "alpha": p.alpha,
            "E": p.youngs_modulus,
            "beta": p.beta,
            "gamma": p.gamma(),
            "strain_limit": p.strain_limit(),
            "objective": self.objective,
            "feasible": self.feasible,
            "metrics": self.metrics.to_dict(),
        }

    @classmethod
    def from_record(cls, d: dict) -> "CalibrationResult":
        params = sle.SleParams(alpha=d["alpha"], beta=d["beta"], youngs_modulus=d["E"])
        return cls(
            params,
            float(d["objective"]),
            FitMetrics.from_dict(d["metrics"]),
            bool(d["feasible"]),
            d["mode"],
        )


class StressObjective:
    """Mean robust stress misfit as a function of log-parameters."""

    def __init__(self, data: Dataset, config: CalibrationConfig):
        self.strain = log_strain(data.inputs)
        self.stress = data.targets
        self.max_strain = float(np.max(np.abs(self.strain)))
        self.scale = config.robust_scale or 0.1 * float(np.max(np.abs(self.stress)))
        self.loss = _LOSSES[config.loss]
        self.tol = config.bisection_tol

    @staticmethod
    def params(x) -> sle.SleParams:
        alpha, modulus, beta = np.exp(x)
        return sle.SleParams(alpha=alpha, beta=beta, youngs_modulus=modulus)

    def feasible(self, p: sle.SleParams) -> bool:
        return self.max_strain < (1.0 - sle.FEASIBILITY_MARGIN) * p.strain_limit()

    def __call__(self, x) -> float:
        p = self.params(x)
        if not self.feasible(p):
            excess = self.max_strain / p.strain_limit() - (1.0 - sle.FEASIBILITY_MARGIN)
            return INFEASIBLE_PENALTY * (1.0 + excess)
        pred = sle.stress_from_strain(p, self.strain, self.tol)
        return float(np.mean(self.loss(self.stress - pred, self.scale)))


def _starts(objective: StressObjective, config: CalibrationConfig) -> np.ndarray:
    """Latin-hypercube starts in log space, pulled inside the feasible set."""
    bounds = config.log_bounds
    lo, hi = bounds[:, 0], bounds[:, 1]
    sampler = qmc.LatinHypercube(d=3, seed=np.random.default_rng(config.seed))
    starts = lo + sampler.random(config.restarts) * (hi - lo)
    for x in starts:
        p = objective.params(x)
        if not objective.feasible(p):
            # lower beta until the largest data strain sits at 90% of the limit
            beta = 0.9 / (p.youngs_modulus * objective.max_strain)
            x[2] = np.clip(np.log(beta), lo[2], hi[2])
    return starts


def _initial_simplex(x0, bounds):
    step = 0.1 * (bounds[:, 1] - bounds[:, 0])
    simplex = [x0]
    for i in range(3):
        v = x0.copy()
        v[i] = v[i] + step[i] if v[i] + step[i] <= bounds[i, 1] else v[i] - step[i]
        simplex.append(v)
    return np.array(simplex)


def calibrate_sle(data: Dataset, config: CalibrationConfig | None = None) -> CalibrationResult:
    """Best feasible fit over ``config.restarts`` seeded Nelder-Mead runs.

    Ties on the objective go to the lowest restart index.
    """
    config = config or CalibrationConfig()
    if len(data) < 4:
        raise DomainError("calibration needs at least 4 data points")
    objective = StressObjective(data, config)
    bounds = config.log_bounds
    best = None
    diagnostics = []
    for k, x0 in enumerate(_starts(objective, config)):
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=[tuple(b) for b in bounds],
            options={
                "initial_simplex": _initial_simplex(x0, bounds),
                "xatol": 1e-9,
                "fatol": 1e-14,
                "maxfev": config.max_evaluations,
                "maxiter": config.max_evaluations,
            },
        )
        p = objective.params(res.x)
        ok = objective.feasible(p)
        diagnostics.append(
            {
                "restart": k,
                "objective": float(res.fun),
                "feasible": ok,
                "evaluations": int(res.nfev),
                **{n: float(v) for n, v in zip(_PARAM_NAMES, np.exp(res.x))},
            }
        )
        if ok and (best is None or res.fun < best[0]):
            best = (float(res.fun), p)
    if best is None:
        raise CalibrationError("no calibration restart reached a feasible optimum", diagnostics)
    objective_value, params = best
    pred = sle.stress_from_strain(params, objective.strain, config.bisection_tol)
    return CalibrationResult(
        params=params,
        objective=objective_value,
        metrics=metrics(pred, data.targets),
        feasible=True,
        mode=data.mode_tag.value,
        restart_objectives=tuple(d["objective"] for d in diagnostics),
    )
