"""Seeded synthetic datasets for the experiment drivers.

Sequence data comes from a linear hidden Markov chain: labels follow a
random softmax transition kernel, features are Gaussian clouds around
per-label centers.  Classification data for the label-noise study uses
Gaussian class clusters whose labels are flipped with a probability that
grows as the example's projection onto a random direction approaches a
random threshold, so corruption concentrates near a linear boundary.  Both
generators are pure functions of their spec (seed included).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError
from .rng import DOMAIN_HMM_DATA, DOMAIN_IDN_DATA, stream_rng
from .trainers import SequenceData


@dataclass(frozen=True)
class HmmSpec:
    """Synthetic sequence-tagging data: chain structure + Gaussian emissions."""

    length: int = 10
    n_labels: int = 3
    dim: int = 20
    n_sequences: int = 200
    seed: int = 0
    transition_temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.length < 1 or self.n_labels < 2 or self.dim < 1 or self.n_sequences < 1:
            raise DomainError("need length >= 1, n_labels >= 2, dim >= 1, n_sequences >= 1")
        if not np.isfinite(self.transition_temperature) or self.transition_temperature < 0:
            raise DomainError("transition temperature must be a finite non-negative real")


def generate_hmm_data(spec: HmmSpec) -> SequenceData:
    """Draw ``n_sequences`` (features, labels) pairs; deterministic in the seed.

    A temperature of zero removes all chain structure: labels become
    i.i.d. uniform.
    """
    rng = stream_rng(spec.seed, DOMAIN_HMM_DATA)
    logits = spec.transition_temperature * rng.normal(size=(spec.n_labels, spec.n_labels))
    kernel = np.exp(logits - logits.max(axis=1, keepdims=True))
    kernel /= kernel.sum(axis=1, keepdims=True)
    centers = rng.normal(size=(spec.n_labels, spec.dim))

    instances = []
    for _ in range(spec.n_sequences):
        labels = np.empty(spec.length, dtype=np.int64)
        labels[0] = rng.integers(0, spec.n_labels)
        for j in range(1, spec.length):
            labels[j] = rng.choice(spec.n_labels, p=kernel[labels[j - 1]])
        features = centers[labels] + rng.normal(size=(spec.length, spec.dim))
        instances.append((features, labels))
    return SequenceData(train=instances, test=[], n_labels=spec.n_labels)


def generate_hmm_split(spec: HmmSpec, n_test: int) -> SequenceData:
    """Train sequences from ``spec`` plus ``n_test`` extra test sequences."""
    full = generate_hmm_data(
        HmmSpec(
            length=spec.length,
            n_labels=spec.n_labels,
            dim=spec.dim,
            n_sequences=spec.n_sequences + n_test,
            seed=spec.seed,
            transition_temperature=spec.transition_temperature,
        )
    )
    return SequenceData(
        train=full.train[: spec.n_sequences],
        test=full.train[spec.n_sequences :],
        n_labels=spec.n_labels,
    )


@dataclass(frozen=True)
class IdnSpec:
    """Instance-dependent label-noise classification data."""

    n_train: int = 4000
    n_test: int = 2000
    dim: int = 10
    n_classes: int = 4
    noise_rate: float = 0.3
    seed: int = 0
    center_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.n_train < 1 or self.n_test < 0 or self.dim < 1 or self.n_classes < 2:
            raise DomainError("need n_train >= 1, n_test >= 0, dim >= 1, n_classes >= 2")
        if not 0.0 <= self.noise_rate < 0.5:
            raise DomainError(
                "noise rate must lie in [0, 0.5): the boundary-proximity squashing "
                "cannot push the mean flip probability to 1/2 or beyond"
            )


@dataclass(frozen=True)
class IdnDataset:
    x_train: np.ndarray
    y_train: np.ndarray  # observed, possibly flipped
    y_clean: np.ndarray
    flipped: np.ndarray  # boolean per training example
    flip_probability: np.ndarray
    boundary_distance: np.ndarray  # |projection - threshold| per training example
    x_test: np.ndarray
    y_test: np.ndarray


def _calibrate_scale(distance: np.ndarray, target: float) -> float:
    """Bisection on the squashing scale so the mean flip probability hits target.

    mean(sigmoid(-distance / scale)) grows monotonically from 0 (scale -> 0)
    to 1/2 (scale -> inf), so any target in (0, 1/2) is reachable.
    """

    def mean_prob(scale: float) -> float:
        return float(np.mean(expit(-distance / scale)))

    lo, hi = 1e-9, 1e9
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if mean_prob(mid) < target:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def generate_idn_dataset(spec: IdnSpec) -> IdnDataset:
    """Gaussian class clusters with boundary-concentrated label flips.

    Flip probabilities are a decreasing logistic function of the distance
    between the example's projection onto a random direction and a random
    threshold; the squashing scale is calibrated by bisection so the mean
    flip probability equals the requested noise rate.  Flipped labels move
    to a fixed confusion neighbor (next class index, cyclically).
    """
    rng = stream_rng(spec.seed, DOMAIN_IDN_DATA)
    centers = spec.center_scale * rng.normal(size=(spec.n_classes, spec.dim))
    total = spec.n_train + spec.n_test
    y_all = rng.integers(0, spec.n_classes, size=total)
    x_all = centers[y_all] + rng.normal(size=(total, spec.dim))

    x_train, y_clean = x_all[: spec.n_train], y_all[: spec.n_train]
    x_test, y_test = x_all[spec.n_train :], y_all[spec.n_train :]

    direction = rng.normal(size=spec.dim)
    direction /= np.linalg.norm(direction)
    projection = x_train @ direction
    threshold = float(rng.normal() * np.std(projection) + np.mean(projection))
    distance = np.abs(projection - threshold)

    if spec.noise_rate == 0.0:
        probs = np.zeros(spec.n_train)
        flipped = np.zeros(spec.n_train, dtype=bool)
    else:
        scale = _calibrate_scale(distance, spec.noise_rate)
        probs = expit(-distance / scale)
        flipped = rng.random(spec.n_train) < probs
    y_train = y_clean.copy()
    y_train[flipped] = (y_clean[flipped] + 1) % spec.n_classes
    return IdnDataset(
        x_train=x_train,
        y_train=y_train,
        y_clean=y_clean,
        flipped=flipped,
        flip_probability=probs,
        boundary_distance=distance,
        x_test=x_test,
        y_test=y_test,
    )
