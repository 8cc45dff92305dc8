"""Stochastic estimators: unbiasedness, variance, and the SGD driver."""

import numpy as np
import pytest

from lincore import (
    BaseLoss,
    ChainModel,
    DomainError,
    LinearCoreSpec,
    ONE_SIDED,
    PairProposal,
    SequenceData,
    TrainConfig,
    TrainingDivergedError,
    empirical_gradient_variance,
    exact_pair_estimator_expectation,
    feature_radius_exact,
    hamming_loss,
    joint_feature,
    lc_derivative,
    lc_ksample_gradient_estimate,
    lc_pair_gradient_estimate,
    model_weights,
    sequence_score,
    sgd_train,
    structured_sum_loss_gradient_exact,
    uniform_negative_gradient_exact,
)
from lincore.rng import DOMAIN_DIAGNOSTIC, stream_rng
from lincore.structured import all_sequence_scores, enumerate_sequences
from lincore.trainers import (
    NEIGHBOR,
    UNIFORM_FULL,
    corruption_probability,
    neighbor_probability,
    sample_corruption,
    sample_neighbor,
    sample_uniform_full,
    uniform_full_probability,
)

ONE_LOG = LinearCoreSpec(BaseLoss.logistic(), side=ONE_SIDED)


class TestProposals:
    def test_corruption_probabilities_sum_to_one(self):
        y = np.array([0, 1, 2])
        seqs = enumerate_sequences(3, 3)
        total = sum(corruption_probability(y, seq, 3, 0.3) for seq in seqs)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_corruption_sampler_matches_probabilities(self):
        y = np.array([0, 1])
        counts = {}
        n_draws = 20000
        for i in range(n_draws):
            drawn = tuple(sample_corruption(y, 2, 0.3, stream_rng(0, DOMAIN_DIAGNOSTIC, i)))
            counts[drawn] = counts.get(drawn, 0) + 1
        for seq in enumerate_sequences(2, 2):
            expected = corruption_probability(y, seq, 2, 0.3)
            observed = counts.get(tuple(seq), 0) / n_draws
            assert observed == pytest.approx(expected, abs=4 * np.sqrt(expected / n_draws) + 1e-3)

    def test_neighbor_sampler_support_and_probability(self):
        base = np.array([1, 0, 2])
        assert neighbor_probability(3, 3) == pytest.approx(1.0 / 6.0)
        for i in range(200):
            drawn = sample_neighbor(base, 3, stream_rng(1, DOMAIN_DIAGNOSTIC, i))
            assert int(np.sum(drawn != base)) == 1

    def test_uniform_full_excludes_the_anchor(self):
        base = np.array([0, 0])
        assert uniform_full_probability(2, 2) == pytest.approx(1.0 / 3.0)
        for i in range(200):
            drawn = sample_uniform_full(base, 2, stream_rng(2, DOMAIN_DIAGNOSTIC, i))
            assert np.any(drawn != base)

    def test_proposal_validation(self):
        with pytest.raises(DomainError):
            PairProposal(corruption_rate=0.0)
        with pytest.raises(DomainError):
            PairProposal(inner="gibbs")


class TestPairEstimator:
    def test_zero_similarity_zeroes_the_gradient(self):
        """An anchor that disagrees everywhere carries weight zero."""
        rng = np.random.default_rng(0)
        model = ChainModel(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))
        x = rng.normal(size=(2, 2))
        y = np.array([0, 0])
        for i in range(400):
            est = lc_pair_gradient_estimate(
                model, x, y, ONE_LOG, PairProposal(0.5), stream_rng(3, DOMAIN_DIAGNOSTIC, i)
            )
            if hamming_loss(est.outer, y) == 1.0:
                assert est.w1 == 0.0
                assert not est.gradient.any()
                break
        else:
            pytest.fail("never drew a maximally distant anchor")

    def test_zero_model_saturated_slope(self):
        x = np.random.default_rng(1).normal(size=(3, 2))
        y = np.array([0, 1, 0])
        model = ChainModel.zeros(2, 2)
        est = lc_pair_gradient_estimate(
            model, x, y, ONE_LOG, PairProposal(0.3), stream_rng(4, DOMAIN_DIAGNOSTIC)
        )
        margin = sequence_score(model, x, est.outer) - sequence_score(model, x, est.inner)
        assert margin == 0.0
        assert lc_derivative(ONE_LOG, margin) == -1.0

    def test_uniform_full_expectation_equals_exact_gradient(self):
        rng = np.random.default_rng(2)
        for _ in range(4):
            model = ChainModel(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))
            x = rng.normal(size=(5, 2))
            y = rng.integers(0, 2, size=5)
            expectation = exact_pair_estimator_expectation(
                model, x, y, ONE_LOG, PairProposal(0.3, UNIFORM_FULL)
            )
            exact = structured_sum_loss_gradient_exact(ONE_LOG, model, x, y)
            np.testing.assert_allclose(expectation, exact, atol=1e-10)

    def test_neighbor_expectation_matches_restricted_sum(self):
        """The single-position proposal is unbiased for the Hamming-1 inner sum."""
        rng = np.random.default_rng(3)
        model = ChainModel(rng.normal(size=(3, 2)), rng.normal(size=(3, 3)))
        x = rng.normal(size=(3, 2))
        y = rng.integers(0, 3, size=3)
        seqs = enumerate_sequences(3, 3)
        feats = np.stack([joint_feature(3, x, seq) for seq in seqs])
        scores = all_sequence_scores(model, x, seqs)
        restricted = np.zeros(feats.shape[1])
        for i, outer in enumerate(seqs):
            weight = 1.0 - hamming_loss(outer, y)
            for j, inner in enumerate(seqs):
                if int(np.sum(inner != outer)) != 1:
                    continue
                slope = lc_derivative(ONE_LOG, float(scores[i] - scores[j]))
                restricted += weight * slope * (feats[i] - feats[j])
        expectation = exact_pair_estimator_expectation(
            model, x, y, ONE_LOG, PairProposal(0.3, NEIGHBOR)
        )
        np.testing.assert_allclose(expectation, restricted, atol=1e-10)

    def test_monte_carlo_mean_approaches_expectation(self):
        rng = np.random.default_rng(4)
        model = ChainModel(0.3 * rng.normal(size=(2, 2)), 0.3 * rng.normal(size=(2, 2)))
        x = rng.normal(size=(3, 2))
        y = rng.integers(0, 2, size=3)
        proposal = PairProposal(0.4, NEIGHBOR)
        target = exact_pair_estimator_expectation(model, x, y, ONE_LOG, proposal)
        draws = np.stack(
            [
                lc_pair_gradient_estimate(
                    model, x, y, ONE_LOG, proposal, stream_rng(5, DOMAIN_DIAGNOSTIC, i)
                ).gradient
                for i in range(60000)
            ]
        )
        mean = draws.mean(axis=0)
        stderr = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(mean - target) <= 4 * stderr + 1e-9)


class _FixedSequenceRng:
    """Generator stand-in whose integer draws replay a fixed sequence."""

    def __init__(self, labels):
        self.labels = np.asarray(labels, dtype=np.int64)

    def integers(self, low, high=None, size=None):
        return self.labels.reshape(size)


class TestKSampleEstimator:
    def test_anchor_draw_contributes_nothing(self):
        """Drawing the anchor itself yields phi'(0) times a zero feature gap."""
        rng = np.random.default_rng(0)
        model = ChainModel(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))
        x = rng.normal(size=(2, 2))
        y = np.array([1, 0])
        grad = lc_ksample_gradient_estimate(
            model, x, y, ONE_LOG, 1, _FixedSequenceRng([[1, 0]])
        )
        assert grad.shape == (2 * 2 + 4,)
        assert not grad.any()

    def test_matches_enumerated_expectation(self):
        rng = np.random.default_rng(7)
        model = ChainModel(0.2 * rng.normal(size=(3, 2)), 0.2 * rng.normal(size=(3, 3)))
        x = rng.normal(size=(3, 2))
        y = rng.integers(0, 3, size=3)
        target = uniform_negative_gradient_exact(ONE_LOG, model, x, y)
        draws = np.stack(
            [
                lc_ksample_gradient_estimate(
                    model, x, y, ONE_LOG, 8, stream_rng(8, DOMAIN_DIAGNOSTIC, i)
                )
                for i in range(40000)
            ]
        )
        mean = draws.mean(axis=0)
        stderr = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(mean - target) <= 4 * stderr + 1e-9)

    def test_single_terms_bounded_by_twice_feature_radius(self):
        rng = np.random.default_rng(9)
        model = ChainModel(0.5 * rng.normal(size=(3, 2)), 0.5 * rng.normal(size=(3, 3)))
        x = rng.normal(size=(3, 2))
        y = rng.integers(0, 3, size=3)
        radius = feature_radius_exact([x], 3)
        for i in range(500):
            grad = lc_ksample_gradient_estimate(
                model, x, y, ONE_LOG, 1, stream_rng(10, DOMAIN_DIAGNOSTIC, i)
            )
            assert np.linalg.norm(grad) <= 2 * radius + 1e-12


class TestVariance:
    def test_deterministic_estimator_has_zero_variance(self):
        rng = np.random.default_rng(11)
        model = ChainModel(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))
        x = rng.normal(size=(3, 2))
        y = rng.integers(0, 2, size=3)
        exact = structured_sum_loss_gradient_exact(ONE_LOG, model, x, y)
        variance = empirical_gradient_variance(
            lambda m, xs, ys, r: exact, model, x, y, trials=100, seed=0
        )
        assert variance <= 1e-20

    def test_bound_and_averaging_law(self):
        rng = np.random.default_rng(12)
        model = ChainModel(0.2 * rng.normal(size=(3, 2)), 0.2 * rng.normal(size=(3, 3)))
        x = rng.normal(size=(3, 2))
        y = rng.integers(0, 3, size=3)
        radius = feature_radius_exact([x], 3)
        exact = uniform_negative_gradient_exact(ONE_LOG, model, x, y)
        variances = {}
        for k in (1, 4):
            variances[k] = empirical_gradient_variance(
                lambda m, xs, ys, r, k=k: lc_ksample_gradient_estimate(m, xs, ys, ONE_LOG, k, r),
                model,
                x,
                y,
                trials=4000,
                seed=13,
                true_gradient=exact,
            )
            assert variances[k] <= 4 * radius**2 / k
        assert 0.8 * variances[1] / 4 <= variances[4] <= 1.2 * variances[1] / 4

    def test_trial_guard(self):
        with pytest.raises(DomainError):
            empirical_gradient_variance(
                lambda m, xs, ys, r: np.zeros(3), None, None, None, trials=1, seed=0
            )


def tiny_data(seed=0, n_train=16, n_test=4, length=3, n_labels=2, dim=2):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_labels, dim))
    def draw():
        y = rng.integers(0, n_labels, size=length)
        return centers[y] + 0.3 * rng.normal(size=(length, dim)), y
    return SequenceData(
        train=[draw() for _ in range(n_train)],
        test=[draw() for _ in range(n_test)],
        n_labels=n_labels,
    )


class TestSgdTrain:
    def test_zero_step_size_keeps_zero_model(self):
        data = tiny_data()
        result = sgd_train(data, TrainConfig(eta=0.0, iterations=50, objective="ssvm"))
        assert not model_weights(result.model).any()

    @pytest.mark.parametrize("objective", ["ssvm", "crf", "lincore", "lincore_ksample"])
    def test_histories_are_bitwise_deterministic(self, objective):
        data = tiny_data()
        eta = 1e-4 if objective == "lincore" else 0.05
        config = TrainConfig(
            eta=eta, iterations=120, seed=7, objective=objective, eval_interval=40
        )
        first = sgd_train(data, config)
        second = sgd_train(data, config)
        np.testing.assert_array_equal(
            model_weights(first.model), model_weights(second.model)
        )
        assert len(first.history) == len(second.history)
        for a, b in zip(first.history, second.history):
            assert (a.iteration, a.objective, a.test_error) == (b.iteration, b.objective, b.test_error)

    def test_history_covers_start_and_end(self):
        data = tiny_data()
        result = sgd_train(
            data, TrainConfig(eta=0.05, iterations=100, objective="crf", eval_interval=30)
        )
        iterations = [row.iteration for row in result.history]
        assert iterations[0] == 0
        assert iterations[-1] == 100
        seconds = [row.seconds for row in result.history]
        assert all(b >= a for a, b in zip(seconds, seconds[1:]))

    def test_divergence_guard_trips(self):
        data = tiny_data()
        config = TrainConfig(
            eta=1e13,
            iterations=60,
            objective="lincore",
            eval_interval=20,
            divergence_guard=1e12,
        )
        with pytest.raises(TrainingDivergedError):
            sgd_train(data, config)

    def test_objective_validation(self):
        with pytest.raises(DomainError):
            TrainConfig(objective="perceptron")
        with pytest.raises(DomainError):
            TrainConfig(eta=-0.1)

    def test_crf_learns_tiny_problem(self):
        data = tiny_data(n_train=40, n_test=12)
        result = sgd_train(
            data, TrainConfig(eta=0.1, iterations=2500, objective="crf", eval_interval=2500)
        )
        assert result.history[-1].test_error <= 0.25


def test_stream_rng_is_stable():
    """Stream derivation is part of the reproducibility contract."""
    a = stream_rng(42, DOMAIN_DIAGNOSTIC, 3, 1).integers(0, 1000, size=5)
    b = stream_rng(42, DOMAIN_DIAGNOSTIC, 3, 1).integers(0, 1000, size=5)
    c = stream_rng(42, DOMAIN_DIAGNOSTIC, 3, 2).integers(0, 1000, size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
