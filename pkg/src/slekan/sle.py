"""Strain-limiting elasticity in one dimension.

The law maps stress to strain as

    eps(tau) = (tau / E) / (1 + (beta * |tau|)**alpha)**(1 / alpha)

so strain stays below ``1 / (E * beta)`` for every finite stress and the
tangent compliance ``d eps / d tau`` decays to zero. All functions accept
scalars or numpy arrays and return the same kind.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleStrainError

#: Strains within this relative distance of the limit are rejected by the inverse.
FEASIBILITY_MARGIN = 1e-12
_MAX_BRACKET_DOUBLINGS = 2000
_MAX_BISECTIONS = 4000


@dataclass(frozen=True)
class SleParams:
    """Material triple (alpha, E, beta) of the strain-limiting law."""

    alpha: float
    beta: float
    youngs_modulus: float

    def __post_init__(self):
        for name in ("alpha", "beta", "youngs_modulus"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, float(value))

    def gamma(self) -> float:
        return self.youngs_modulus * self.beta

    def strain_limit(self) -> float:
        return 1.0 / (self.youngs_modulus * self.beta)


def _as_finite(x, what):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} must be finite")
    return arr


def _unwrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _log1p_pow(u, alpha):
    """log(1 + u**alpha) for u >= 0 without overflowing for large u."""
    u = np.asarray(u, dtype=float)
    big = u > 1.0
    # only the branch selected by `big` is used; silence the other one
    with np.errstate(divide="ignore", over="ignore"):
        small_branch = np.log1p(u**alpha)
        big_branch = alpha * np.log(np.where(big, u, 1.0)) + np.log1p(
            np.where(big, u, 1.0) ** (-alpha)
        )
    return np.where(big, big_branch, small_branch)


def _strain_magnitude(params: SleParams, s):
    u = params.beta * s
    big = u > 1.0
    alpha = params.alpha
    limit = params.strain_limit()
    with np.errstate(over="ignore", divide="ignore"):
        near_linear = s / params.youngs_modulus * np.exp(-np.log1p(u**alpha) / alpha)
        # rearranged form limit * (1 + u**-alpha)**(-1/alpha): every step is
        # monotone, so saturated strains never decrease by rounding noise
        saturated = limit * np.exp(-np.log1p(np.where(big, u, 1.0) ** (-alpha)) / alpha)
    mag = np.where(big, saturated, near_linear)
    # exact limit is reached only at infinite stress; rounding must not touch it
    return np.minimum(mag, np.nextafter(limit, 0.0))


def _bisection_magnitude(params: SleParams, s):
    """Lean magnitude for the bisection loop: limit * (1 + u**-alpha)**(-1/alpha)."""
    w = (params.beta * s) ** (-params.alpha)
    mag = params.strain_limit() * np.exp(-np.log1p(w) / params.alpha)
    # u**-alpha overflows only for vanishing u, where the law is linear
    return np.where(np.isinf(w), s / params.youngs_modulus, mag)


def _bisect(params: SleParams, target, tol):
    lo = np.zeros_like(target)
    hi = np.full_like(target, 1.0 / params.beta)
    for _ in range(_MAX_BRACKET_DOUBLINGS):
        short = _bisection_magnitude(params, hi) < target
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    # halvings needed per element, so a result never depends on what else is
    # in the batch; once a bracket hits floating-point resolution further
    # halvings leave it unchanged
    with np.errstate(divide="ignore"):
        need = np.ceil(np.log2(np.maximum(hi, tol) / tol))
    need = np.minimum(need, _MAX_BISECTIONS)
    for k in range(int(need.max()) if need.size else 0):
        mid = 0.5 * (lo + hi)
        below = _bisection_magnitude(params, mid) < target
        active = k < need
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    return lo, hi


def strain_from_stress(params: SleParams, tau):
    """Strain produced by stress ``tau``.

    Magnitude first, sign last, so the response is odd bit-for-bit.
    """
    t = _as_finite(tau, "stress")
    mag = _strain_magnitude(params, np.abs(t))
    return _unwrap(np.sign(t) * mag, tau)


def strain_limit(params: SleParams) -> float:
    return params.strain_limit()


def tangent_compliance(params: SleParams, tau):
    """Derivative d eps / d tau of the law (a compliance, 1/E at zero stress)."""
    t = _as_finite(tau, "stress")
    u = params.beta * np.abs(t)
    log_base = _log1p_pow(u, params.alpha)
    out = np.exp(-(1.0 / params.alpha + 1.0) * log_base) / params.youngs_modulus
    return _unwrap(out, tau)


def stress_from_strain(params: SleParams, eps, tol: float = 1e-10):
    """Invert the law by bisection on stress.

    The upper end of the bracket starts at ``1/beta`` and doubles until it
    produces at least the target strain. Bisection stops once the bracket is
    no wider than ``tol`` (or floating point cannot split it further).

    Raises
    ------
    InfeasibleStrainError
        If any ``|eps|`` is at or beyond the strain limit.
    """
    if not (np.isfinite(tol) and tol > 0):
        raise DomainError(f"tol must be positive, got {tol!r}")
    e = _as_finite(eps, "strain")
    target = np.abs(e)
    limit = params.strain_limit()
    if target.size and target.max() >= (1.0 - FEASIBILITY_MARGIN) * limit:
        raise InfeasibleStrainError(float(target.max()), limit)

    with np.errstate(over="ignore", divide="ignore"):
        lo, hi = _bisect(params, target, tol)
    tau = np.where(target == 0.0, 0.0, 0.5 * (lo + hi))
    return _unwrap(np.sign(e) * tau, eps)
