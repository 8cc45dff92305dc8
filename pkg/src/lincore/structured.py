"""Linear-chain scorers, joint features, and exact structured-loss oracles.

A :class:`ChainModel` scores a sequence ``y`` for inputs ``x`` as

    sum_j unary[y_j] . x_j  +  sum_{j>=2} transition[y_{j-1}, y_j]

which is linear in the flattened weights, as witnessed by
:func:`joint_feature`: ``sequence_score(model, x, y) ==
model_weights(model) . joint_feature(n_labels, x, y)``.  The flat layout is
fixed: the unary block is label-major then feature-index, followed by the
row-major transition block.  Trainers and the gradient-variance bound rely
on this layout, so it must not change.

The structured sum loss weights every candidate label by its similarity to
the truth and aggregates pairwise margins against all competitors:

    sum_{y'} (1 - ell(y', y)) * sum_{y'' != y'} phi(score(y') - score(y''))

Exact evaluation enumerates the whole label space and is guarded; the
guards raise instead of truncating because these functions are the oracles
other code is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DomainError, EnumerationLimitError
from .losses import LinearCoreSpec, lc_derivative, lc_value
from .multiclass import conditional_surrogate_regret

ENUMERATION_LIMIT = 4096

# Pairwise enumeration works on row blocks of roughly this many matrix
# elements to bound peak memory at the guard limit.
_CHUNK_ELEMENTS = 2**22


@dataclass(frozen=True)
class ChainModel:
    """Linear-chain sequence scorer: unary weights (Y, d) + transitions (Y, Y)."""

    unary: np.ndarray
    transition: np.ndarray

    def __post_init__(self) -> None:
        unary = np.asarray(self.unary, dtype=np.float64)
        transition = np.asarray(self.transition, dtype=np.float64)
        if unary.ndim != 2:
            raise DomainError("unary weights must be a (n_labels, dim) matrix")
        n = unary.shape[0]
        if transition.shape != (n, n):
            raise DomainError("transition matrix must be square with one row per label")
        if not (np.all(np.isfinite(unary)) and np.all(np.isfinite(transition))):
            raise DomainError("model weights must be finite")
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "transition", transition)

    @property
    def n_labels(self) -> int:
        return self.unary.shape[0]

    @property
    def dim(self) -> int:
        return self.unary.shape[1]

    @classmethod
    def zeros(cls, n_labels: int, dim: int) -> "ChainModel":
        return cls(np.zeros((n_labels, dim)), np.zeros((n_labels, n_labels)))


def model_weights(model: ChainModel) -> np.ndarray:
    """Flatten a chain model into the fixed weight layout."""
    return np.concatenate([model.unary.ravel(), model.transition.ravel()])


def weights_to_model(weights: np.ndarray, n_labels: int, dim: int) -> ChainModel:
    """Inverse of :func:`model_weights`."""
    weights = np.asarray(weights, dtype=np.float64)
    expected = n_labels * dim + n_labels * n_labels
    if weights.shape != (expected,):
        raise DomainError(f"expected flat weights of length {expected}, got {weights.shape}")
    unary = weights[: n_labels * dim].reshape(n_labels, dim)
    transition = weights[n_labels * dim :].reshape(n_labels, n_labels)
    return ChainModel(unary.copy(), transition.copy())


def _check_instance(model: ChainModel, x: np.ndarray, y=None) -> tuple[np.ndarray, np.ndarray | None]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DomainError("inputs must be a (length, dim) matrix with length >= 1")
    if x.shape[1] != model.dim:
        raise DomainError(f"input dim {x.shape[1]} does not match model dim {model.dim}")
    if not np.all(np.isfinite(x)):
        raise DomainError("inputs must be finite")
    if y is None:
        return x, None
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise DomainError("label sequence length must match the input length")
    if np.any(y < 0) or np.any(y >= model.n_labels):
        raise DomainError("label out of range")
    return x, y


def hamming_loss(y, y_other) -> float:
    """Fraction of positions where two equal-length label sequences differ."""
    a = np.asarray(y)
    b = np.asarray(y_other)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise DomainError("sequences must be 1-D and of equal length")
    return float(np.mean(a != b))


def sequence_score(model: ChainModel, x, y) -> float:
    x, y = _check_instance(model, x, y)
    score = float(np.einsum("ld,ld->", model.unary[y], x))
    if y.size > 1:
        score += float(np.sum(model.transition[y[:-1], y[1:]]))
    return score


def joint_feature(n_labels: int, x, y) -> np.ndarray:
    """Flat feature map phi(x, y) with score(x, y) = weights . phi(x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DomainError("need (length, dim) inputs and a matching label sequence")
    dim = x.shape[1]
    unary = np.zeros((n_labels, dim))
    np.add.at(unary, y, x)
    transition = np.zeros((n_labels, n_labels))
    if y.size > 1:
        np.add.at(transition, (y[:-1], y[1:]), 1.0)
    return np.concatenate([unary.ravel(), transition.ravel()])


def enumerate_sequences(n_labels: int, length: int, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """All label sequences in lexicographic order, shape (n_labels**length, length)."""
    if n_labels < 2 or length < 1:
        raise DomainError("need n_labels >= 2 and length >= 1")
    total = n_labels**length
    if total > limit:
        raise EnumerationLimitError(
            f"label space size {total} exceeds the enumeration guard {limit}"
        )
    return np.array(list(product(range(n_labels), repeat=length)), dtype=np.int64)


def all_sequence_scores(model: ChainModel, x, sequences: np.ndarray) -> np.ndarray:
    """Scores of many label sequences at once."""
    x, _ = _check_instance(model, x)
    unary_table = x @ model.unary.T  # (L, Y)
    scores = unary_table[np.arange(sequences.shape[1]), sequences].sum(axis=1)
    if sequences.shape[1] > 1:
        scores = scores + model.transition[sequences[:, :-1], sequences[:, 1:]].sum(axis=1)
    return scores


def similarity_weights(sequences: np.ndarray, y: np.ndarray) -> np.ndarray:
    """1 - Hamming distance of every enumerated sequence to ``y``."""
    return 1.0 - np.mean(sequences != np.asarray(y)[None, :], axis=1)


def structured_sum_loss_exact(
    spec: LinearCoreSpec, model: ChainModel, x, y, *, limit: int = ENUMERATION_LIMIT
) -> float:
    """Exact structured sum loss by full enumeration of the label space."""
    x, y = _check_instance(model, x, y)
    seqs = enumerate_sequences(model.n_labels, x.shape[0], limit)
    scores = all_sequence_scores(model, x, seqs)
    weights = similarity_weights(seqs, y)
    total = 0.0
    phi0 = lc_value(spec, 0.0)
    chunk = max(1, _CHUNK_ELEMENTS // max(scores.size, 1))
    for start in range(0, scores.size, chunk):
        stop = min(start + chunk, scores.size)
        margins = scores[start:stop, None] - scores[None, :]
        inner = lc_value(spec, margins).sum(axis=1) - phi0
        total += float(np.dot(weights[start:stop], inner))
    return total


def structured_sum_loss_gradient_exact(
    spec: LinearCoreSpec, model: ChainModel, x, y, *, limit: int = ENUMERATION_LIMIT
) -> np.ndarray:
    """Exact gradient of the structured sum loss in flat weight space."""
    x, y = _check_instance(model, x, y)
    n = model.n_labels
    seqs = enumerate_sequences(n, x.shape[0], limit)
    scores = all_sequence_scores(model, x, seqs)
    weights = similarity_weights(seqs, y)

    # Each ordered pair (y', y'') with y' != y'' contributes
    # weights[y'] * phi'(score' - score'') * (feature' - feature'').
    # Accumulate per-sequence coefficients: alpha_k = (row sums) - (column sums).
    m = scores.size
    alpha = np.zeros(m)
    chunk = max(1, _CHUNK_ELEMENTS // m)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        margins = scores[start:stop, None] - scores[None, :]
        slopes = lc_derivative(spec, margins)
        idx = np.arange(start, stop)
        slopes[idx - start, idx] = 0.0
        w_rows = weights[start:stop, None] * slopes
        alpha[start:stop] += w_rows.sum(axis=1)
        alpha -= w_rows.sum(axis=0)

    grad_unary = np.zeros((n, x.shape[1]))
    length = x.shape[0]
    for j in range(length):
        coeff = np.zeros(n)
        np.add.at(coeff, seqs[:, j], alpha)
        grad_unary += coeff[:, None] * x[j][None, :]
    grad_transition = np.zeros((n, n))
    if length > 1:
        for j in range(length - 1):
            np.add.at(grad_transition, (seqs[:, j], seqs[:, j + 1]), alpha)
    return np.concatenate([grad_unary.ravel(), grad_transition.ravel()])


def validate_loss_matrix(ell) -> np.ndarray:
    """Check a target loss matrix: square, zero diagonal, entries in [0, 1]."""
    ell = np.asarray(ell, dtype=np.float64)
    if ell.ndim != 2 or ell.shape[0] != ell.shape[1] or ell.shape[0] < 2:
        raise DomainError("loss matrix must be square with at least 2 labels")
    if not np.all(np.isfinite(ell)):
        raise DomainError("loss matrix entries must be finite")
    if np.any(np.abs(np.diag(ell)) > 0.0):
        raise DomainError("loss matrix diagonal must be zero")
    if np.any(ell < 0.0) or np.any(ell > 1.0):
        raise DomainError(
            "loss matrix entries must lie in [0, 1]; larger losses would make "
            "similarity weights negative"
        )
    return ell


def structured_conditional_regrets(
    spec: LinearCoreSpec, p, scores, loss_matrix
) -> tuple[float, float]:
    """(target regret, surrogate regret) for an explicit finite label set.

    ``p`` is the conditional distribution over labels, ``scores`` the score
    vector, ``loss_matrix`` the target loss.  The surrogate side mixes the
    distribution through the similarity weights W(y') = sum_y p_y (1 - ell(y', y))
    and reuses the pairwise-infimum decomposition.
    """
    p = np.asarray(p, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    ell = validate_loss_matrix(loss_matrix)
    n = ell.shape[0]
    if p.shape != (n,) or scores.shape != (n,):
        raise DomainError("p, scores, and loss matrix sizes must agree")
    if n > 8:
        raise EnumerationLimitError(f"regret oracle supports up to 8 labels, got {n}")
    if np.any(p < 0.0) or abs(float(np.sum(p)) - 1.0) > 1e-12:
        raise DomainError("p must be a probability vector")

    expected_loss = ell @ p
    predicted = int(np.argmax(scores))
    regret_target = float(expected_loss[predicted] - np.min(expected_loss))
    similarity_mix = (1.0 - ell) @ p
    regret_surrogate = conditional_surrogate_regret(spec, similarity_mix, scores)
    return regret_target, regret_surrogate


def feature_radius_exact(xs, n_labels: int, *, limit: int = ENUMERATION_LIMIT) -> float:
    """Largest joint-feature norm over all inputs and all label sequences."""
    best = 0.0
    for x in xs:
        x = np.asarray(x, dtype=np.float64)
        seqs = enumerate_sequences(n_labels, x.shape[0], limit)
        for seq in seqs:
            best = max(best, float(np.linalg.norm(joint_feature(n_labels, x, seq))))
    return best


def feature_radius_bound(xs, n_labels: int) -> float:
    """Cheap upper bound on the joint-feature norm for large label spaces.

    The unary block norm is at most the summed row norms of ``x`` (all
    positions on one label) and the transition block at most L-1 counts in
    one cell.
    """
    best = 0.0
    for x in xs:
        x = np.asarray(x, dtype=np.float64)
        unary_bound = float(np.sum(np.linalg.norm(x, axis=1)))
        trans_bound = float(max(x.shape[0] - 1, 0))
        best = max(best, float(np.hypot(unary_bound, trans_bound)))
    return best
