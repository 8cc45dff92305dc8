"""Estimation-error transformations and convergence-rate experiments.

For a margin loss ``phi`` and target excess ``t`` in [0, 1], the
transformation

    T(t) = phi(0) - inf_u [ (1-t)/2 * phi(-u) + (1+t)/2 * phi(u) ]

maps target regret to the minimal surrogate regret among sign-wrong
hypotheses.  Losses with an affine core of slope -1 through the origin obey
the linear lower bound ``T(t) >= tau * t`` (width-``tau`` core); plain
logistic/exponential margin losses only reach the square-root regime
``T(t) ~ t^2/2``.  The biased-coin construction turns the same quantities
into (excess surrogate, excess target) rate curves whose log-log slope
separates the two regimes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .losses import (
    BaseLoss,
    LinearCoreSpec,
    MarginLoss,
    linear_core_margin_loss,
    plain_margin_loss,
)
from .minimize import MinimizeResult, minimize_convex


@dataclass(frozen=True)
class RatePoint:
    """One biased-coin sample: margin and the two excess errors."""

    loss_name: str
    delta: float
    excess_surrogate: float
    excess_target: float


@dataclass(frozen=True)
class TauSlope:
    tau: float
    slope: float


def conditional_objective(loss: MarginLoss, t: float, u):
    """Evaluate (1-t)/2 * phi(-u) + (1+t)/2 * phi(u)."""
    if not np.isfinite(t) or not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    u_arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    scalar = np.ndim(u) == 0
    w_neg = 0.5 * (1.0 - t)
    w_pos = 0.5 * (1.0 + t)
    out = w_pos * np.asarray(loss.value(u_arr), dtype=np.float64)
    if w_neg > 0.0:
        out = out + w_neg * np.asarray(loss.value(-u_arr), dtype=np.float64)
    return float(out[0]) if scalar else out


def weighted_margin_infimum(
    loss: MarginLoss, w_pos, w_neg, *, halfwidth: float | None = None
) -> MinimizeResult:
    """Minimize ``w_pos*phi(u) + w_neg*phi(-u)`` over the whole real line.

    Vectorized over weight pairs.  Zero weights are masked out of the
    corresponding tail evaluation so that exponential tails with weight
    exactly zero cannot overflow.
    """
    w_pos = np.atleast_1d(np.asarray(w_pos, dtype=np.float64))
    w_neg = np.atleast_1d(np.asarray(w_neg, dtype=np.float64))
    w_pos, w_neg = (arr.copy() for arr in np.broadcast_arrays(w_pos, w_neg))
    if np.any(w_pos < 0.0) or np.any(w_neg < 0.0):
        raise DomainError("pair weights must be non-negative")
    if np.any(w_pos + w_neg <= 0.0):
        raise DomainError("pair weights must not both vanish")
    pos = w_pos > 0.0
    neg = w_neg > 0.0

    def g(u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        if np.any(pos):
            out[pos] = w_pos[pos] * np.asarray(loss.value(u[pos]), dtype=np.float64)
        if np.any(neg):
            out[neg] += w_neg[neg] * np.asarray(loss.value(-u[neg]), dtype=np.float64)
        return out

    def g_prime(u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        if np.any(pos):
            out[pos] = w_pos[pos] * np.asarray(loss.derivative(u[pos]), dtype=np.float64)
        if np.any(neg):
            out[neg] -= w_neg[neg] * np.asarray(loss.derivative(-u[neg]), dtype=np.float64)
        return out

    bh = loss.bracket_halfwidth if halfwidth is None else halfwidth
    lo = np.full(w_pos.shape, -bh)
    hi = np.full(w_pos.shape, bh)
    return minimize_convex(g, g_prime, lo, hi)


def transformation_T(loss: MarginLoss, t):
    """Evaluate the transformation T at ``t`` (scalar or array in [0, 1])."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    scalar = np.ndim(t) == 0
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise DomainError("t must lie in [0, 1]")
    result = weighted_margin_infimum(loss, 0.5 * (1.0 + t_arr), 0.5 * (1.0 - t_arr))
    at_zero = float(np.asarray(loss.value(np.zeros(1)))[0])
    out = at_zero - result.value
    return float(out[0]) if scalar else out


def restricted_pair_infimum(base: BaseLoss, a: float, b: float) -> tuple[float, float]:
    """Closed form of ``inf_{u in [-1,1]} a*phi(-u) + b*phi(u)``.

    For any linear-core surrogate built on ``base`` (either smoothing side,
    tau = 1) the interval [-1, 1] lies in the affine core, so the objective
    is affine there and the infimum is

        (a + b) * Phi(0)/Phi'(0) + 2*min(a, b)

    attained at u = -1 when a > b and at u = +1 otherwise (ties break to +1).
    """
    if not (np.isfinite(a) and np.isfinite(b)) or a < 0.0 or b < 0.0:
        raise DomainError("weights must be finite and non-negative")
    if a + b <= 0.0:
        raise DomainError("weights must not both vanish")
    c0 = base.value_at_zero / base.slope_at_zero
    value = (a + b) * c0 + 2.0 * min(a, b)
    minimizer = -1.0 if a > b else 1.0
    return float(value), minimizer


def biased_coin_curve(loss: MarginLoss, delta_grid) -> list[RatePoint]:
    """Exact excess-error pairs for label probability 1/2 + delta.

    The sign-wrong prediction carries target regret 2*delta; the minimal
    surrogate excess over sign-wrong hypotheses is T(2*delta) because the
    transformation is tight for this two-point construction.
    """
    deltas = np.atleast_1d(np.asarray(delta_grid, dtype=np.float64))
    if not np.all(np.isfinite(deltas)) or np.any(deltas <= 0.0) or np.any(deltas >= 0.5):
        raise DomainError("deltas must lie strictly inside (0, 1/2)")
    excess_target = 2.0 * deltas
    excess_surrogate = transformation_T(loss, excess_target)
    return [
        RatePoint(
            loss_name=loss.name,
            delta=float(d),
            excess_surrogate=float(s),
            excess_target=float(r),
        )
        for d, s, r in zip(deltas, excess_surrogate, excess_target)
    ]


def fit_loglog_slope(points: list[RatePoint]) -> float:
    """Least-squares slope of log(excess_target) against log(excess_surrogate)."""
    if len(points) < 5:
        raise DomainError(f"need at least 5 rate points, got {len(points)}")
    surr = np.array([p.excess_surrogate for p in points])
    targ = np.array([p.excess_target for p in points])
    if np.any(surr <= 0.0) or np.any(targ <= 0.0):
        raise DomainError("rate points must have strictly positive excesses")
    slope, _ = np.polyfit(np.log(surr), np.log(targ), 1)
    return float(slope)


def tau_sweep(base: BaseLoss, taus, delta_grid) -> list[TauSlope]:
    """Log-log rate slope of the symmetric width-``tau`` surrogate per tau."""
    rows = []
    for tau in taus:
        spec = LinearCoreSpec(base, tau=float(tau))
        loss = linear_core_margin_loss(spec)
        slope = fit_loglog_slope(biased_coin_curve(loss, delta_grid))
        rows.append(TauSlope(tau=float(tau), slope=slope))
    return rows


def transformation_min_slack(loss: MarginLoss, t_grid, scale: float) -> float:
    """Smallest value of ``T(t) - scale * t`` over the grid.

    Non-negative (up to solver tolerance) exactly when the linear lower
    bound with the given scale holds on the grid.
    """
    ts = np.asarray(t_grid, dtype=np.float64)
    values = transformation_T(loss, ts)
    return float(np.min(values - scale * ts))


def rate_losses() -> list[MarginLoss]:
    """The four losses of the rate experiment, in output order."""
    return [
        linear_core_margin_loss(LinearCoreSpec(BaseLoss.logistic()), name="lc_logistic"),
        linear_core_margin_loss(LinearCoreSpec(BaseLoss.exponential()), name="lc_exponential"),
        plain_margin_loss(BaseLoss.logistic()),
        plain_margin_loss(BaseLoss.exponential()),
    ]
