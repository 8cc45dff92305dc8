"""Synthetic data generators: determinism, calibration, structure."""

import numpy as np
import pytest

from lincore import (
    DomainError,
    HmmSpec,
    IdnSpec,
    generate_hmm_data,
    generate_hmm_split,
    generate_idn_dataset,
)


class TestHmmData:
    def test_same_seed_same_data(self):
        spec = HmmSpec(length=5, n_labels=3, dim=4, n_sequences=10, seed=12)
        a = generate_hmm_data(spec)
        b = generate_hmm_data(spec)
        for (xa, ya), (xb, yb) in zip(a.train, b.train):
            np.testing.assert_array_equal(xa, xb)
            np.testing.assert_array_equal(ya, yb)

    def test_different_seeds_differ(self):
        a = generate_hmm_data(HmmSpec(length=5, n_labels=3, dim=4, n_sequences=4, seed=0))
        b = generate_hmm_data(HmmSpec(length=5, n_labels=3, dim=4, n_sequences=4, seed=1))
        assert any(
            not np.array_equal(xa, xb) for (xa, _), (xb, _) in zip(a.train, b.train)
        )

    def test_zero_temperature_gives_unstructured_labels(self):
        """With no chain potential, consecutive labels are independent uniform."""
        spec = HmmSpec(length=50, n_labels=3, dim=2, n_sequences=200, seed=3, transition_temperature=0.0)
        data = generate_hmm_data(spec)
        labels = np.concatenate([y for _, y in data.train])
        freqs = np.bincount(labels, minlength=3) / labels.size
        np.testing.assert_allclose(freqs, 1 / 3, atol=0.02)
        pairs = np.concatenate([y[:-1] * 3 + y[1:] for _, y in data.train])
        pair_freqs = np.bincount(pairs, minlength=9) / pairs.size
        np.testing.assert_allclose(pair_freqs, 1 / 9, atol=0.02)

    def test_split_shares_the_generation_stream(self):
        spec = HmmSpec(length=4, n_labels=3, dim=4, n_sequences=6, seed=5)
        split = generate_hmm_split(spec, n_test=3)
        assert len(split.train) == 6 and len(split.test) == 3
        full = generate_hmm_data(
            HmmSpec(length=4, n_labels=3, dim=4, n_sequences=9, seed=5)
        )
        np.testing.assert_array_equal(split.test[0][0], full.train[6][0])

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            HmmSpec(length=0)
        with pytest.raises(DomainError):
            HmmSpec(n_labels=1)
        with pytest.raises(DomainError):
            HmmSpec(transition_temperature=-1.0)

    def test_learnable_structure(self):
        """A trained chain model beats the label-marginal baseline."""
        from lincore import TrainConfig, sgd_train

        data = generate_hmm_split(
            HmmSpec(length=4, n_labels=3, dim=10, n_sequences=60, seed=2), n_test=30
        )
        labels = np.concatenate([y for _, y in data.train])
        baseline = 1.0 - np.bincount(labels, minlength=3).max() / labels.size
        result = sgd_train(
            data, TrainConfig(eta=0.05, iterations=3000, objective="crf", eval_interval=3000)
        )
        assert result.history[-1].test_error < baseline


class TestIdnData:
    def test_zero_noise_flips_nothing(self):
        data = generate_idn_dataset(IdnSpec(n_train=500, n_test=100, noise_rate=0.0, seed=0))
        assert not data.flipped.any()
        np.testing.assert_array_equal(data.y_train, data.y_clean)

    @pytest.mark.parametrize("rate", [0.2, 0.4])
    def test_realized_flip_rate_is_calibrated(self, rate):
        data = generate_idn_dataset(
            IdnSpec(n_train=20000, n_test=10, noise_rate=rate, seed=1)
        )
        assert abs(float(np.mean(data.flipped)) - rate) <= 0.02
        assert abs(float(np.mean(data.flip_probability)) - rate) <= 1e-6

    def test_flips_concentrate_near_the_boundary(self):
        data = generate_idn_dataset(IdnSpec(n_train=20000, n_test=10, noise_rate=0.3, seed=2))
        flipped_distance = data.boundary_distance[data.flipped].mean()
        clean_distance = data.boundary_distance[~data.flipped].mean()
        assert flipped_distance < clean_distance

    def test_flips_move_to_the_fixed_confusion_neighbor(self):
        data = generate_idn_dataset(
            IdnSpec(n_train=5000, n_test=10, n_classes=4, noise_rate=0.3, seed=3)
        )
        moved = data.y_train[data.flipped]
        expected = (data.y_clean[data.flipped] + 1) % 4
        np.testing.assert_array_equal(moved, expected)

    def test_deterministic_in_seed(self):
        spec = IdnSpec(n_train=1000, n_test=100, noise_rate=0.3, seed=4)
        a = generate_idn_dataset(spec)
        b = generate_idn_dataset(spec)
        np.testing.assert_array_equal(a.x_train, b.x_train)
        np.testing.assert_array_equal(a.y_train, b.y_train)
        np.testing.assert_array_equal(a.x_test, b.x_test)

    def test_rate_domain(self):
        with pytest.raises(DomainError):
            IdnSpec(noise_rate=0.5)
        with pytest.raises(DomainError):
            IdnSpec(noise_rate=-0.1)
