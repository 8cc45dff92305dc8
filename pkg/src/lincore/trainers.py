"""Stochastic gradient estimators and the shared SGD driver.

Two estimators avoid enumerating the label space:

* the pair sampler draws an anchor ``y'`` from a per-position corruption of
  the true sequence and a competitor ``y''`` from an inner proposal, then
  importance-weights the single margin term so its expectation equals the
  exact gradient of the structured sum loss restricted to the inner
  proposal's support (the single-position ``neighbor`` proposal reaches only
  Hamming-1 competitors; ``uniform_full`` reaches every competitor and is
  the mode unbiasedness is certified under);

* the K-negative sampler averages margin terms against ``K`` uniformly drawn
  sequences and estimates the gradient of the uniform-expectation loss
  ``E_y[phi(score(y*) - score(y))]``; each term has norm at most ``2R`` for
  feature radius ``R``, so its variance is at most ``4 R^2 / K`` whenever the
  surrogate derivative stays in [-1, 0] (true everywhere for one-sided
  logistic/exponential surrogates).

Both write margin terms the same way: a sampled (anchor A, competitor B)
pair contributes ``weight * phi'(score(A) - score(B)) * (feature(A) -
feature(B))``, the chain rule of ``phi(score(A) - score(B))``.

A training run is one logical thread: per-iteration randomness comes from
counter-based streams keyed by (seed, iteration, slot), so histories are
bitwise reproducible and distinct runs can execute concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EnumerationLimitError, TrainingDivergedError
from .inference import crf_nll_and_gradient, ssvm_loss_and_subgradient, viterbi
from .losses import BaseLoss, LinearCoreSpec, ONE_SIDED, lc_derivative
from .rng import DOMAIN_DIAGNOSTIC, DOMAIN_TRAIN_INSTANCE, DOMAIN_TRAIN_SAMPLE, stream_rng
from .structured import (
    ChainModel,
    ENUMERATION_LIMIT,
    all_sequence_scores,
    enumerate_sequences,
    hamming_loss,
    joint_feature,
    structured_sum_loss_exact,
)

NEIGHBOR = "neighbor"
UNIFORM_FULL = "uniform_full"

OBJECTIVES = ("ssvm", "crf", "lincore", "lincore_ksample")


def default_train_spec() -> LinearCoreSpec:
    """One-sided logistic surrogate: bounded derivative, safe importance weights."""
    return LinearCoreSpec(BaseLoss.logistic(), side=ONE_SIDED)


@dataclass(frozen=True)
class PairProposal:
    """Outer corruption proposal plus the inner competitor proposal.

    The outer draw keeps each position of the true sequence with
    probability ``1 - corruption_rate`` and otherwise resamples it uniformly
    among the other labels, so its probability is exactly computable for
    any sequence.
    """

    corruption_rate: float = 0.3
    inner: str = NEIGHBOR

    def __post_init__(self) -> None:
        if not 0.0 < self.corruption_rate < 1.0:
            raise DomainError("corruption rate must lie strictly in (0, 1)")
        if self.inner not in (NEIGHBOR, UNIFORM_FULL):
            raise DomainError(f"unknown inner proposal {self.inner!r}")


@dataclass(frozen=True)
class GradEstimate:
    """One pair-sampled gradient with its importance weights."""

    gradient: np.ndarray
    w1: float
    w2: float
    outer: np.ndarray
    inner: np.ndarray


def corruption_probability(y: np.ndarray, y_prime: np.ndarray, n_labels: int, rate: float) -> float:
    """Exact outer-proposal probability of drawing ``y_prime`` from ``y``."""
    diff = int(np.sum(np.asarray(y) != np.asarray(y_prime)))
    keep = len(y) - diff
    return float((1.0 - rate) ** keep * (rate / (n_labels - 1)) ** diff)


def sample_corruption(y: np.ndarray, n_labels: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    flip = rng.random(y.size) < rate
    out = y.copy()
    if np.any(flip):
        # Uniform over the other labels: shift draws past the kept label.
        draws = rng.integers(0, n_labels - 1, size=int(np.sum(flip)))
        kept = y[flip]
        out[flip] = draws + (draws >= kept)
    return out


def sample_neighbor(y_prime: np.ndarray, n_labels: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform single-position reassignment; never returns ``y_prime`` itself."""
    out = np.asarray(y_prime, dtype=np.int64).copy()
    pos = int(rng.integers(0, out.size))
    draw = int(rng.integers(0, n_labels - 1))
    out[pos] = draw + (draw >= out[pos])
    return out


def neighbor_probability(length: int, n_labels: int) -> float:
    return 1.0 / (length * (n_labels - 1))


def sample_uniform_full(y_prime: np.ndarray, n_labels: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform over all sequences except ``y_prime`` (rejection on collision)."""
    y_prime = np.asarray(y_prime, dtype=np.int64)
    while True:
        out = rng.integers(0, n_labels, size=y_prime.size)
        if np.any(out != y_prime):
            return out


def uniform_full_probability(length: int, n_labels: int) -> float:
    return 1.0 / float(n_labels**length - 1)


def _score(model: ChainModel, x: np.ndarray, y: np.ndarray) -> float:
    s = float(np.einsum("ld,ld->", model.unary[y], x))
    if y.size > 1:
        s += float(np.sum(model.transition[y[:-1], y[1:]]))
    return s


def lc_pair_gradient_estimate(
    model: ChainModel,
    x,
    y,
    spec: LinearCoreSpec,
    proposal: PairProposal,
    rng: np.random.Generator,
) -> GradEstimate:
    """One importance-weighted pair sample of the structured-loss gradient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = model.n_labels
    length = y.size
    y_outer = sample_corruption(y, n, proposal.corruption_rate, rng)
    if proposal.inner == NEIGHBOR:
        y_inner = sample_neighbor(y_outer, n, rng)
        d2 = neighbor_probability(length, n)
    else:
        y_inner = sample_uniform_full(y_outer, n, rng)
        d2 = uniform_full_probability(length, n)
    d1 = corruption_probability(y, y_outer, n, proposal.corruption_rate)
    if d1 <= 0.0 or d2 <= 0.0:
        raise DomainError("degenerate proposal probability")
    similarity = 1.0 - hamming_loss(y_outer, y)
    w1 = similarity / d1
    w2 = 1.0 / d2
    coeff = w1 * w2 * lc_derivative(spec, _score(model, x, y_outer) - _score(model, x, y_inner))
    gradient = coeff * (joint_feature(n, x, y_outer) - joint_feature(n, x, y_inner))
    return GradEstimate(gradient=gradient, w1=float(w1), w2=float(w2), outer=y_outer, inner=y_inner)


def exact_pair_estimator_expectation(
    model: ChainModel,
    x,
    y,
    spec: LinearCoreSpec,
    proposal: PairProposal,
    *,
    limit: int = 64,
) -> np.ndarray:
    """Expectation of the pair estimator by exhaustive sample-space enumeration.

    Every (outer, inner) pair in the proposal support is weighted by its
    exact probability; the result is what unbiasedness compares against the
    exact restricted-loss gradient.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = model.n_labels
    length = y.size
    seqs = enumerate_sequences(n, length, limit)
    feats = np.stack([joint_feature(n, x, seq) for seq in seqs])
    scores = all_sequence_scores(model, x, seqs)
    expectation = np.zeros(feats.shape[1])
    for i, outer in enumerate(seqs):
        d1 = corruption_probability(y, outer, n, proposal.corruption_rate)
        w1 = (1.0 - hamming_loss(outer, y)) / d1
        if proposal.inner == NEIGHBOR:
            inner_idx = [
                j for j, other in enumerate(seqs) if int(np.sum(other != outer)) == 1
            ]
            d2 = neighbor_probability(length, n)
        else:
            inner_idx = [j for j in range(len(seqs)) if j != i]
            d2 = uniform_full_probability(length, n)
        for j in inner_idx:
            coeff = d1 * d2 * w1 * (1.0 / d2) * lc_derivative(spec, scores[i] - scores[j])
            expectation += coeff * (feats[i] - feats[j])
    return expectation


def lc_ksample_gradient_estimate(
    model: ChainModel,
    x,
    y_star,
    spec: LinearCoreSpec,
    n_negatives: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Average of ``n_negatives`` uniform-competitor margin gradients."""
    if n_negatives < 1:
        raise DomainError("need at least one negative sample")
    x = np.asarray(x, dtype=np.float64)
    y_star = np.asarray(y_star, dtype=np.int64)
    n = model.n_labels
    length = y_star.size
    negatives = rng.integers(0, n, size=(n_negatives, length))
    scores = all_sequence_scores(model, x, negatives)
    s_star = _score(model, x, y_star)
    coeffs = lc_derivative(spec, s_star - scores) / n_negatives
    return _accumulate_ksample(model, x, y_star, negatives, coeffs)


def _accumulate_ksample(
    model: ChainModel,
    x: np.ndarray,
    y_star: np.ndarray,
    negatives: np.ndarray,
    coeffs: np.ndarray,
) -> np.ndarray:
    """sum_k c_k * (feature(y*) - feature(y_k)) in flat layout."""
    n, dim = model.n_labels, model.dim
    length = y_star.size
    total = float(np.sum(coeffs))
    unary = np.zeros((n, dim))
    np.add.at(unary, y_star, total * x)
    flat_labels = negatives.ravel()
    weighted_x = np.repeat(coeffs, length)[:, None] * np.tile(x, (negatives.shape[0], 1))
    np.add.at(unary, flat_labels, -weighted_x)
    transition = np.zeros((n, n))
    if length > 1:
        np.add.at(transition, (y_star[:-1], y_star[1:]), total)
        np.add.at(
            transition,
            (negatives[:, :-1].ravel(), negatives[:, 1:].ravel()),
            -np.repeat(coeffs, length - 1),
        )
    return np.concatenate([unary.ravel(), transition.ravel()])


def uniform_negative_gradient_exact(
    spec: LinearCoreSpec, model: ChainModel, x, y_star, *, limit: int = ENUMERATION_LIMIT
) -> np.ndarray:
    """Exact gradient of E_{y ~ Uniform}[phi(score(y*) - score(y))]."""
    x = np.asarray(x, dtype=np.float64)
    y_star = np.asarray(y_star, dtype=np.int64)
    n = model.n_labels
    seqs = enumerate_sequences(n, y_star.size, limit)
    scores = all_sequence_scores(model, x, seqs)
    s_star = _score(model, x, y_star)
    coeffs = lc_derivative(spec, s_star - scores) / len(seqs)
    return _accumulate_ksample(model, x, y_star, seqs, coeffs)


def empirical_gradient_variance(
    estimator,
    model: ChainModel,
    x,
    y,
    trials: int,
    seed: int,
    *,
    true_gradient: np.ndarray | None = None,
) -> float:
    """Mean squared L2 deviation of estimates from their mean (or a reference).

    ``estimator(model, x, y, rng) -> flat array`` is called once per trial
    with an independent counter-based stream.
    """
    if trials < 2:
        raise DomainError("variance needs at least 2 trials")
    samples = np.stack(
        [
            estimator(model, x, y, stream_rng(seed, DOMAIN_DIAGNOSTIC, trial))
            for trial in range(trials)
        ]
    )
    center = np.mean(samples, axis=0) if true_gradient is None else np.asarray(true_gradient)
    return float(np.mean(np.sum((samples - center) ** 2, axis=1)))


@dataclass(frozen=True)
class SequenceData:
    """Train/test splits of (inputs (L, d), labels (L,)) instances.

    ``n_labels`` sizes the label alphabet; when omitted it is inferred from
    the largest label present anywhere in the data.
    """

    train: list
    test: list = field(default_factory=list)
    n_labels: int | None = None

    def label_count(self) -> int:
        if self.n_labels is not None:
            return int(self.n_labels)
        largest = 0
        for x, y in list(self.train) + list(self.test):
            largest = max(largest, int(np.max(np.asarray(y, dtype=np.int64))))
        return max(largest + 1, 2)


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01
    iterations: int = 1000
    batch_size: int = 1
    seed: int = 0
    objective: str = "lincore"
    spec: LinearCoreSpec = field(default_factory=default_train_spec)
    corruption_rate: float = 0.3
    inner_proposal: str = NEIGHBOR
    n_negatives: int = 4
    eval_interval: int = 0
    eval_max_instances: int = 64
    divergence_guard: float = 1e12

    def __post_init__(self) -> None:
        if not self.eta >= 0.0:
            raise DomainError("step size must be non-negative")
        if self.iterations < 0 or self.batch_size < 1:
            raise DomainError("need iterations >= 0 and batch_size >= 1")
        if self.objective not in OBJECTIVES:
            raise DomainError(f"unknown objective {self.objective!r}; pick one of {OBJECTIVES}")


@dataclass(frozen=True)
class HistoryRow:
    iteration: int
    objective: float
    test_error: float
    seconds: float


@dataclass(frozen=True)
class TrainResult:
    model: ChainModel
    history: list


def test_hamming_error(model: ChainModel, instances) -> float:
    """Mean Hamming loss of Viterbi decodes against the true sequences."""
    if not instances:
        return float("nan")
    errors = [hamming_loss(viterbi(model, x)[0], y) for x, y in instances]
    return float(np.mean(errors))


def _mean_objective(objective: str, model: ChainModel, instances, config: TrainConfig) -> float:
    # The surrogate objectives record the full exact sum loss as the
    # monitoring metric (NaN when the label space is too large to
    # enumerate); the neighbor proposal optimizes its restricted variant,
    # which moves together with the full sum on these scales.
    values = []
    for x, y in instances:
        if objective == "ssvm":
            values.append(ssvm_loss_and_subgradient(model, x, y)[0])
        elif objective == "crf":
            values.append(crf_nll_and_gradient(model, x, y)[0])
        else:
            try:
                values.append(structured_sum_loss_exact(config.spec, model, x, y))
            except EnumerationLimitError:
                return float("nan")
    return float(np.mean(values))


def _apply_pair_update(
    model_unary: np.ndarray,
    model_transition: np.ndarray,
    x: np.ndarray,
    y_outer: np.ndarray,
    y_inner: np.ndarray,
    step: float,
) -> None:
    """In-place ``w -= step * (feature(outer) - feature(inner))``.

    Touches only positions where the sequences disagree, so the cost is
    independent of the label-set size.
    """
    diff = np.nonzero(y_outer != y_inner)[0]
    for j in diff:
        model_unary[y_outer[j]] -= step * x[j]
        model_unary[y_inner[j]] += step * x[j]
    length = y_outer.size
    if length > 1 and diff.size:
        edges = set()
        for j in diff:
            if j > 0:
                edges.add(j - 1)
            if j < length - 1:
                edges.add(j)
        for j in sorted(edges):
            model_transition[y_outer[j], y_outer[j + 1]] -= step
            model_transition[y_inner[j], y_inner[j + 1]] += step


def sgd_train(data: SequenceData, config: TrainConfig) -> TrainResult:
    """Run plain SGD from zero initialization on the selected objective.

    Histories are deterministic functions of (data, config): instance picks
    and estimator draws come from (seed, iteration, slot) streams; only the
    wall-clock column varies across reruns.
    """
    if not data.train:
        raise DomainError("training set is empty")
    x0 = np.asarray(data.train[0][0], dtype=np.float64)
    n_labels = data.label_count()
    model = ChainModel.zeros(n_labels, x0.shape[1])
    train = [
        (np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)) for x, y in data.train
    ]
    proposal = PairProposal(config.corruption_rate, config.inner_proposal)
    eval_instances = train[: config.eval_max_instances]

    history: list[HistoryRow] = []
    start = time.perf_counter()

    def record(iteration: int) -> None:
        objective = _mean_objective(config.objective, model, eval_instances, config)
        if np.isfinite(objective) and objective > config.divergence_guard:
            raise TrainingDivergedError(
                f"objective {objective:.3g} exceeded guard "
                f"{config.divergence_guard:.3g} at iteration {iteration}"
            )
        history.append(
            HistoryRow(
                iteration=iteration,
                objective=objective,
                test_error=test_hamming_error(model, data.test),
                seconds=time.perf_counter() - start,
            )
        )

    if config.eval_interval > 0:
        record(0)
    for t in range(1, config.iterations + 1):
        picks = stream_rng(config.seed, DOMAIN_TRAIN_INSTANCE, t).integers(
            0, len(train), size=config.batch_size
        )
        scale = config.eta / config.batch_size
        for slot, idx in enumerate(picks):
            x, y = train[int(idx)]
            rng = stream_rng(config.seed, DOMAIN_TRAIN_SAMPLE, t, slot)
            sgd_step(model, x, y, config, proposal, rng, step=scale)
        if config.eval_interval > 0 and t % config.eval_interval == 0:
            record(t)
    if config.eval_interval > 0 and (not history or history[-1].iteration != config.iterations):
        record(config.iterations)
    return TrainResult(model=model, history=history)


def sgd_step(
    model: ChainModel,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    proposal: PairProposal,
    rng: np.random.Generator,
    *,
    step: float | None = None,
) -> None:
    """One in-place model update on a single instance.

    This is the unit the scaling benchmark times.  The pair-sampling update
    touches O(length * dim) numbers regardless of the label-set size; the
    exact-inference updates pay their O(length * labels^2) dynamic program.
    """
    unary, transition = model.unary, model.transition
    n_labels = model.n_labels
    step = config.eta if step is None else step
    if config.objective == "lincore":
        y_outer = sample_corruption(y, n_labels, proposal.corruption_rate, rng)
        if proposal.inner == NEIGHBOR:
            y_inner = sample_neighbor(y_outer, n_labels, rng)
            d2 = neighbor_probability(y.size, n_labels)
        else:
            y_inner = sample_uniform_full(y_outer, n_labels, rng)
            d2 = uniform_full_probability(y.size, n_labels)
        d1 = corruption_probability(y, y_outer, n_labels, proposal.corruption_rate)
        w1 = (1.0 - hamming_loss(y_outer, y)) / d1
        if w1 == 0.0:
            return
        coeff = (
            w1
            / d2
            * lc_derivative(config.spec, _score(model, x, y_outer) - _score(model, x, y_inner))
        )
        _apply_pair_update(unary, transition, x, y_outer, y_inner, step * coeff)
        return
    if config.objective == "lincore_ksample":
        grad = lc_ksample_gradient_estimate(model, x, y, config.spec, config.n_negatives, rng)
    elif config.objective == "ssvm":
        grad = ssvm_loss_and_subgradient(model, x, y)[1]
    else:
        grad = crf_nll_and_gradient(model, x, y)[1]
    unary -= step * grad[: unary.size].reshape(unary.shape)
    transition -= step * grad[unary.size :].reshape(transition.shape)
