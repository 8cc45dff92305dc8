"""Multi-class sum losses, softmax baselines, and conditional-regret oracles.

The sum surrogate of a score vector ``s`` and true label ``y`` is

    sum_{y' != y} phi(s[y] - s[y'])

with ``phi`` a (decreasing) linear-core surrogate, so each term penalizes a
small or negative margin against the competing label.  Cross-entropy and
generalized cross-entropy are provided as the baselines of the label-noise
study.

The regret oracle is brute force by design: it enumerates label pairs,
computes every pairwise infimum with the shared convex minimizer, and is
guarded to small label counts so it can serve as ground truth.
"""

from __future__ import annotations

import numpy as np

from .consistency import weighted_margin_infimum
from .errors import DomainError, EnumerationLimitError
from .losses import LinearCoreSpec, lc_derivative, lc_value, linear_core_margin_loss

MAX_ORACLE_LABELS = 8


def _check_scores(scores) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError("scores must be a 1-D array with at least 2 entries")
    if not np.all(np.isfinite(arr)):
        raise DomainError("scores must be finite")
    return arr


def _check_label(y: int, n: int) -> int:
    y = int(y)
    if not 0 <= y < n:
        raise DomainError(f"label {y} out of range for {n} classes")
    return y


def argmax_label(scores) -> int:
    """Deterministic decoder: ties break to the lowest label index."""
    return int(np.argmax(_check_scores(scores)))


def mc_sum_loss(spec: LinearCoreSpec, scores, y: int) -> float:
    scores = _check_scores(scores)
    y = _check_label(y, scores.size)
    margins = scores[y] - scores
    values = lc_value(spec, margins)
    return float(np.sum(values) - values[y])


def mc_sum_loss_gradient(spec: LinearCoreSpec, scores, y: int) -> np.ndarray:
    scores = _check_scores(scores)
    y = _check_label(y, scores.size)
    margins = scores[y] - scores
    slopes = lc_derivative(spec, margins)
    grad = -slopes
    grad[y] = float(np.sum(slopes) - slopes[y])
    return grad


def _check_distribution(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError("probability vector must be 1-D with at least 2 entries")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError("probabilities must be finite and non-negative")
    if abs(float(np.sum(arr)) - 1.0) > 1e-12:
        raise DomainError("probabilities must sum to 1 within 1e-12")
    return arr


def conditional_surrogate_regret(spec: LinearCoreSpec, weights, scores) -> float:
    """Surrogate conditional regret under per-label weights.

    Decomposes the weighted sum loss over unordered label pairs and
    subtracts each pair's infimum over the real line:

        sum_{i<j} [ w_i phi(m_ij) + w_j phi(-m_ij) - inf_u (w_i phi(u) + w_j phi(-u)) ]

    With weights = conditional label probabilities this is the multi-class
    conditional regret; with similarity-mixed weights it is the structured
    one.  Each summand is non-negative, so the result is a certified upper
    bound on the regret relative to the pairwise-optimal score profile.
    """
    weights = np.asarray(weights, dtype=np.float64)
    scores = _check_scores(scores)
    n = scores.size
    if weights.shape != (n,):
        raise DomainError("weights and scores must have matching length")
    ii, jj = np.triu_indices(n, k=1)
    margins = scores[ii] - scores[jj]
    realized = weights[ii] * lc_value(spec, margins) + weights[jj] * lc_value(spec, -margins)
    loss = linear_core_margin_loss(spec)
    infima = weighted_margin_infimum(loss, weights[ii], weights[jj]).value
    return float(np.sum(realized - infima))


def mc_conditional_regrets(spec: LinearCoreSpec, p, scores) -> tuple[float, float]:
    """(zero-one regret, surrogate regret) at one input.

    Brute-force oracle; refuses more than ``MAX_ORACLE_LABELS`` labels.
    """
    p = _check_distribution(p)
    scores = _check_scores(scores)
    if p.size != scores.size:
        raise DomainError("p and scores must have matching length")
    if p.size > MAX_ORACLE_LABELS:
        raise EnumerationLimitError(
            f"regret oracle supports up to {MAX_ORACLE_LABELS} labels, got {p.size}"
        )
    regret_01 = float(np.max(p) - p[argmax_label(scores)])
    regret_surrogate = conditional_surrogate_regret(spec, p, scores)
    return regret_01, regret_surrogate


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    return e / np.sum(e)


def ce_loss(scores, y: int) -> float:
    """Softmax negative log-likelihood."""
    scores = _check_scores(scores)
    y = _check_label(y, scores.size)
    shifted = scores - np.max(scores)
    return float(np.log(np.sum(np.exp(shifted))) - shifted[y])


def ce_gradient(scores, y: int) -> np.ndarray:
    scores = _check_scores(scores)
    y = _check_label(y, scores.size)
    grad = _softmax(scores)
    grad[y] -= 1.0
    return grad


def _check_q(q: float) -> float:
    q = float(q)
    if not np.isfinite(q) or not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    return q


def gce_loss(scores, y: int, q: float) -> float:
    """Generalized cross-entropy (1 - p_y^q) / q."""
    scores = _check_scores(scores)
    y = _check_label(y, scores.size)
    q = _check_q(q)
    p_y = _softmax(scores)[y]
    return float((1.0 - p_y**q) / q)


def gce_gradient(scores, y: int, q: float) -> np.ndarray:
    scores = _check_scores(scores)
    y = _check_label(y, scores.size)
    q = _check_q(q)
    p = _softmax(scores)
    grad = p[y] ** q * p
    grad[y] -= p[y] ** q
    return grad
