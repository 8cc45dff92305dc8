"""Exact dynamic programming for the chain baselines.

Viterbi and forward-backward both run in O(L * Y^2).  All partition
computations are done in log space with max-shifted log-sum-exp so random
potentials at Y = 400 cannot overflow.  Ties in any maximization break
toward the lower label index, which makes decoded sequences reproducible
and lets enumeration oracles predict them exactly: backtracking with
first-argmax predecessors returns the optimal sequence that is
lexicographically smallest when read from the last position backwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .structured import ChainModel, _check_instance, joint_feature, sequence_score


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def _unary_table(model: ChainModel, x: np.ndarray) -> np.ndarray:
    return x @ model.unary.T  # (L, Y)


def _viterbi_tables(unary: np.ndarray, transition: np.ndarray) -> tuple[np.ndarray, float]:
    length, n = unary.shape
    back = np.zeros((length, n), dtype=np.int64)
    dp = unary[0].copy()
    for j in range(1, length):
        cand = dp[:, None] + transition  # (from, to)
        back[j] = np.argmax(cand, axis=0)
        dp = cand[back[j], np.arange(n)] + unary[j]
    last = int(np.argmax(dp))
    best = np.empty(length, dtype=np.int64)
    best[-1] = last
    for j in range(length - 1, 0, -1):
        best[j - 1] = back[j, best[j]]
    return best, float(dp[last])


def viterbi(model: ChainModel, x) -> tuple[np.ndarray, float]:
    """Highest-scoring label sequence and its score."""
    x, _ = _check_instance(model, x)
    return _viterbi_tables(_unary_table(model, x), model.transition)


def loss_augmented_viterbi(model: ChainModel, x, y_true) -> tuple[np.ndarray, float]:
    """Maximize sequence score plus Hamming loss against ``y_true``.

    Hamming decomposes per position, so the augmentation just adds 1/L to
    the unary score of every label that disagrees with the target.
    """
    x, y_true = _check_instance(model, x, y_true)
    length = x.shape[0]
    unary = _unary_table(model, x) + 1.0 / length
    unary[np.arange(length), y_true] -= 1.0 / length
    return _viterbi_tables(unary, model.transition)


@dataclass(frozen=True)
class Marginals:
    """Forward-backward output: per-position and per-edge label posteriors."""

    unary_marginals: np.ndarray  # (L, Y)
    transition_marginals: np.ndarray  # (L-1, Y, Y)
    log_partition: float


def forward_backward(model: ChainModel, x) -> Marginals:
    x, _ = _check_instance(model, x)
    unary = _unary_table(model, x)
    length, n = unary.shape
    transition = model.transition

    alpha = np.empty((length, n))
    alpha[0] = unary[0]
    for j in range(1, length):
        alpha[j] = unary[j] + _logsumexp(alpha[j - 1][:, None] + transition, axis=0)
    log_partition = float(_logsumexp(alpha[-1], axis=0))

    beta = np.zeros((length, n))
    for j in range(length - 2, -1, -1):
        beta[j] = _logsumexp(transition + (unary[j + 1] + beta[j + 1])[None, :], axis=1)

    unary_marginals = np.exp(alpha + beta - log_partition)
    transition_marginals = np.empty((max(length - 1, 0), n, n))
    for j in range(length - 1):
        log_edge = (
            alpha[j][:, None]
            + transition
            + (unary[j + 1] + beta[j + 1])[None, :]
            - log_partition
        )
        transition_marginals[j] = np.exp(log_edge)
    return Marginals(unary_marginals, transition_marginals, log_partition)


def crf_nll_and_gradient(model: ChainModel, x, y) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``y`` and its exact flat-weight gradient.

    The gradient is the expected joint feature under the model posterior
    minus the observed joint feature.
    """
    x, y = _check_instance(model, x, y)
    marg = forward_backward(model, x)
    nll = marg.log_partition - sequence_score(model, x, y)

    expected_unary = marg.unary_marginals.T @ x  # (Y, d)
    expected_transition = marg.transition_marginals.sum(axis=0)
    expected = np.concatenate([expected_unary.ravel(), expected_transition.ravel()])
    observed = joint_feature(model.n_labels, x, y)
    return float(nll), expected - observed


def ssvm_loss_and_subgradient(model: ChainModel, x, y) -> tuple[float, np.ndarray]:
    """Structured hinge loss with the Hamming target and one subgradient.

    The most violated competitor comes from loss-augmented decoding.  At an
    exact margin tie (violation 0) the hinge sits on its kink; the zero
    branch is chosen, so the subgradient is zero there.
    """
    x, y = _check_instance(model, x, y)
    competitor, augmented = loss_augmented_viterbi(model, x, y)
    violation = augmented - sequence_score(model, x, y)
    dim = model.n_labels * model.dim + model.n_labels**2
    if violation <= 0.0:
        return float(max(violation, 0.0)), np.zeros(dim)
    n = model.n_labels
    subgrad = joint_feature(n, x, competitor) - joint_feature(n, x, y)
    return float(violation), subgrad
