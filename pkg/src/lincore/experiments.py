"""Experiment drivers and their CSV/JSON artifacts.

Each driver is a pure function of (config, seed) up to wall-clock columns:
``run_rates``, ``run_stability``, ``run_scaling``, ``run_noise``, and
``run_train_seq`` return plain result objects and, given an output
directory, write the corresponding CSV files plus a ``manifest.json`` that
round-trips the effective configuration and lists which columns are
timing-derived (and therefore excluded from byte-for-byte determinism).

Configurations are flat dictionaries: driver defaults merged with caller
overrides; unknown keys are errors rather than silent typos.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .consistency import (
    RatePoint,
    TauSlope,
    biased_coin_curve,
    fit_loglog_slope,
    rate_losses,
    tau_sweep,
)
from .datagen import HmmSpec, IdnSpec, generate_hmm_split, generate_idn_dataset
from .errors import ConfigError
from .losses import BaseLoss, LinearCoreSpec, ONE_SIDED, SYMMETRIC, lc_derivative
from .rng import DOMAIN_NOISE_TRAIN, DOMAIN_TRAIN_INSTANCE, DOMAIN_TRAIN_SAMPLE, stream_rng
from .structured import ChainModel
from .trainers import PairProposal, TrainConfig, TrainResult, sgd_step, sgd_train

_TIMING_COLUMNS = {
    "history.csv": ["seconds"],
    "scaling.csv": ["seconds_per_batch", "cv_flag"],
}


def _merge_config(defaults: dict, overrides: dict | None) -> dict:
    config = dict(defaults)
    if overrides:
        unknown = set(overrides) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config.update(overrides)
    return config


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(
    out_dir: Path, command: str, config: dict, seed: int, timings: dict, artifacts: list[str]
) -> None:
    manifest = {
        "command": command,
        "seed": seed,
        "config": config,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "lincore": __version__,
        },
        "timings": timings,
        "artifacts": artifacts,
        "nondeterministic_columns": {
            name: cols for name, cols in _TIMING_COLUMNS.items() if name in artifacts
        },
    }
    with open(out_dir / "manifest.json", "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _base_from_name(name: str) -> BaseLoss:
    if name == "logistic":
        return BaseLoss.logistic()
    if name == "exponential":
        return BaseLoss.exponential()
    if name == "quartic_linear":
        return BaseLoss.quartic_linear()
    raise ConfigError(f"unknown base loss {name!r}")


# ----------------------------------------------------------------------
# rates
# ----------------------------------------------------------------------

RATES_DEFAULTS = {
    "delta_min": 1e-4,
    "delta_max": 1e-1,
    "n_deltas": 25,
}


@dataclass(frozen=True)
class RatesResult:
    points: list
    slopes: dict


def run_rates(config: dict | None = None, seed: int = 0, out_dir: str | None = None) -> RatesResult:
    """Biased-coin rate curves for the two surrogates and the two baselines."""
    cfg = _merge_config(RATES_DEFAULTS, config)
    t0 = time.perf_counter()
    deltas = np.logspace(np.log10(cfg["delta_min"]), np.log10(cfg["delta_max"]), cfg["n_deltas"])
    points: list[RatePoint] = []
    slopes: dict[str, float] = {}
    for loss in rate_losses():
        curve = biased_coin_curve(loss, deltas)
        points.extend(curve)
        slopes[loss.name] = fit_loglog_slope(curve)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "rates.csv",
            ["loss", "delta", "excess_surrogate", "excess_target"],
            [(p.loss_name, repr(p.delta), repr(p.excess_surrogate), repr(p.excess_target)) for p in points],
        )
        with open(out / "slopes.json", "w") as handle:
            json.dump(slopes, handle, indent=2, sort_keys=True)
            handle.write("\n")
        _write_manifest(
            out,
            "rates",
            cfg,
            seed,
            {"seconds_total": time.perf_counter() - t0},
            ["rates.csv", "slopes.json"],
        )
    return RatesResult(points=points, slopes=slopes)


# ----------------------------------------------------------------------
# stability
# ----------------------------------------------------------------------

STABILITY_DEFAULTS = {
    "base": "logistic",
    "robust_taus": [0.1, 0.5, 1.0, 2.0, 5.0],
    "vanishing_taus": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
    # The robust sweep stays below the core crossover t ~ 2*tau for its
    # smallest tau; the vanishing sweep uses the wider grid on which the
    # smallest thresholds revert to the square-root regime.
    "robust_delta_min": 1e-4,
    "robust_delta_max": 1e-2,
    "vanishing_delta_min": 1e-3,
    "vanishing_delta_max": 1e-1,
    "n_deltas": 25,
}


@dataclass(frozen=True)
class StabilityResult:
    rows: list


def run_stability(
    config: dict | None = None, seed: int = 0, out_dir: str | None = None
) -> StabilityResult:
    """Rate slopes across core half-widths, including the vanishing-core limit."""
    cfg = _merge_config(STABILITY_DEFAULTS, config)
    t0 = time.perf_counter()
    base = _base_from_name(cfg["base"])
    robust_grid = np.logspace(
        np.log10(cfg["robust_delta_min"]), np.log10(cfg["robust_delta_max"]), cfg["n_deltas"]
    )
    vanishing_grid = np.logspace(
        np.log10(cfg["vanishing_delta_min"]), np.log10(cfg["vanishing_delta_max"]), cfg["n_deltas"]
    )
    rows: list[TauSlope] = []
    rows.extend(tau_sweep(base, cfg["robust_taus"], robust_grid))
    seen = {row.tau for row in rows}
    extra = [tau for tau in cfg["vanishing_taus"] if float(tau) not in seen]
    rows.extend(tau_sweep(base, extra, vanishing_grid))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "stability.csv",
            ["tau", "slope"],
            [(repr(row.tau), repr(row.slope)) for row in rows],
        )
        _write_manifest(
            out,
            "stability",
            cfg,
            seed,
            {"seconds_total": time.perf_counter() - t0},
            ["stability.csv"],
        )
    return StabilityResult(rows=rows)


# ----------------------------------------------------------------------
# scaling
# ----------------------------------------------------------------------

SCALING_DEFAULTS = {
    "label_sizes": [50, 100, 200, 400],
    "length": 20,
    "dim": 20,
    "n_sequences": 16,
    "methods": ["ssvm", "crf", "lincore"],
    "warmup_batches": 20,
    "timed_batches": 200,
    "eta": 0.01,
    "corruption_rate": 0.3,
    "cv_threshold": 0.25,
}


@dataclass(frozen=True)
class ScalingRow:
    method: str
    n_labels: int
    seconds_per_batch: float
    cv: float
    cv_flag: bool


@dataclass(frozen=True)
class ScalingResult:
    rows: list


def run_scaling(
    config: dict | None = None, seed: int = 0, out_dir: str | None = None
) -> ScalingResult:
    """Median per-batch update time for each method across label-set sizes.

    Every batch is timed individually on the monotonic clock; warm-up
    batches are discarded; the reported value is the median and the
    coefficient of variation flags jittery measurements.  Updates run on a
    single worker.
    """
    cfg = _merge_config(SCALING_DEFAULTS, config)
    t0 = time.perf_counter()
    rows: list[ScalingRow] = []
    for n_labels in cfg["label_sizes"]:
        data = generate_hmm_split(
            HmmSpec(
                length=cfg["length"],
                n_labels=int(n_labels),
                dim=cfg["dim"],
                n_sequences=cfg["n_sequences"],
                seed=seed,
            ),
            n_test=0,
        )
        train = [
            (np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64))
            for x, y in data.train
        ]
        for method in cfg["methods"]:
            train_cfg = TrainConfig(
                eta=cfg["eta"],
                objective=method,
                seed=seed,
                corruption_rate=cfg["corruption_rate"],
            )
            proposal = PairProposal(cfg["corruption_rate"])
            model = ChainModel.zeros(int(n_labels), cfg["dim"])
            times = []
            total = cfg["warmup_batches"] + cfg["timed_batches"]
            for t in range(total):
                tick = time.perf_counter()
                idx = int(
                    stream_rng(seed, DOMAIN_TRAIN_INSTANCE, t).integers(0, len(train))
                )
                x, y = train[idx]
                rng = stream_rng(seed, DOMAIN_TRAIN_SAMPLE, t, 0)
                sgd_step(model, x, y, train_cfg, proposal, rng)
                times.append(time.perf_counter() - tick)
            timed = np.array(times[cfg["warmup_batches"] :])
            median = float(np.median(timed))
            cv = float(np.std(timed) / np.mean(timed))
            rows.append(
                ScalingRow(
                    method=method,
                    n_labels=int(n_labels),
                    seconds_per_batch=median,
                    cv=cv,
                    cv_flag=cv > cfg["cv_threshold"],
                )
            )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "scaling.csv",
            ["method", "Y", "seconds_per_batch", "cv_flag"],
            [
                (r.method, r.n_labels, repr(r.seconds_per_batch), int(r.cv_flag))
                for r in rows
            ],
        )
        _write_manifest(
            out,
            "scaling",
            cfg,
            seed,
            {"seconds_total": time.perf_counter() - t0},
            ["scaling.csv"],
        )
    return ScalingResult(rows=rows)


# ----------------------------------------------------------------------
# train-seq
# ----------------------------------------------------------------------

TRAIN_SEQ_DEFAULTS = {
    "objective": "lincore",
    "n_labels": 3,
    "length": 4,
    "dim": 20,
    "n_train": 200,
    "n_test": 100,
    "transition_temperature": 1.0,
    "eta": 0.01,
    "iterations": 20000,
    "eval_interval": 200,
    "eval_max_instances": 64,
    "batch_size": 1,
    "corruption_rate": 0.3,
    "inner_proposal": "neighbor",
    "n_negatives": 4,
    "base": "logistic",
    "side": ONE_SIDED,
    "tau": 1.0,
}


@dataclass(frozen=True)
class TrainSeqResult:
    result: TrainResult
    config: dict


def run_train_seq(
    config: dict | None = None, seed: int = 0, out_dir: str | None = None
) -> TrainSeqResult:
    """Train one objective on synthetic chain data; emit the history CSV."""
    cfg = _merge_config(TRAIN_SEQ_DEFAULTS, config)
    t0 = time.perf_counter()
    if cfg["side"] not in (SYMMETRIC, ONE_SIDED):
        raise ConfigError(f"unknown smoothing side {cfg['side']!r}")
    data = generate_hmm_split(
        HmmSpec(
            length=cfg["length"],
            n_labels=cfg["n_labels"],
            dim=cfg["dim"],
            n_sequences=cfg["n_train"],
            seed=seed,
            transition_temperature=cfg["transition_temperature"],
        ),
        n_test=cfg["n_test"],
    )
    spec = LinearCoreSpec(_base_from_name(cfg["base"]), side=cfg["side"], tau=cfg["tau"])
    train_cfg = TrainConfig(
        eta=cfg["eta"],
        iterations=cfg["iterations"],
        batch_size=cfg["batch_size"],
        seed=seed,
        objective=cfg["objective"],
        spec=spec,
        corruption_rate=cfg["corruption_rate"],
        inner_proposal=cfg["inner_proposal"],
        n_negatives=cfg["n_negatives"],
        eval_interval=cfg["eval_interval"],
        eval_max_instances=cfg["eval_max_instances"],
    )
    result = sgd_train(data, train_cfg)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "history.csv",
            ["iteration", "objective", "test_error", "seconds"],
            [
                (row.iteration, repr(row.objective), repr(row.test_error), repr(row.seconds))
                for row in result.history
            ],
        )
        _write_manifest(
            out,
            "train-seq",
            cfg,
            seed,
            {"seconds_total": time.perf_counter() - t0},
            ["history.csv"],
        )
    return TrainSeqResult(result=result, config=cfg)


# ----------------------------------------------------------------------
# noise
# ----------------------------------------------------------------------

NOISE_DEFAULTS = {
    "noise_rates": [0.2, 0.3, 0.4],
    "q_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "n_train": 4000,
    "n_test": 2000,
    "dim": 10,
    "n_classes": 2,
    "center_scale": 1.2,
    "epochs": 20,
    "batch_size": 64,
    "eta": 0.05,
    "weight_decay": 0.01,
    "tau": 4.0,
    "hist_noise_rate": 0.4,
    "n_bins": 40,
}


@dataclass(frozen=True)
class NoiseAccuracy:
    loss: str
    q: float | None
    noise_rate: float
    test_accuracy: float


@dataclass(frozen=True)
class GradientGroups:
    """Raw gradient magnitudes at the final model, split clean vs noisy."""

    loss: str
    clean: np.ndarray
    noisy: np.ndarray


@dataclass(frozen=True)
class NoiseResult:
    accuracies: list
    gradient_groups: dict
    realized_flip_rates: dict


def _train_linear_multiclass(
    loss: str,
    q: float,
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    spec: LinearCoreSpec,
    epochs: int,
    batch_size: int,
    eta: float,
    weight_decay: float,
    seed: int,
) -> np.ndarray:
    """Minibatch SGD on a linear scorer; identical budget and batches per loss."""
    weights = np.zeros((n_classes, x.shape[1]))
    n = x.shape[0]
    onehot = np.eye(n_classes)
    for epoch in range(epochs):
        order = stream_rng(seed, DOMAIN_NOISE_TRAIN, epoch).permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            batch = order[start : start + batch_size]
            xb, yb = x[batch], y[batch]
            scores = xb @ weights.T
            if loss == "ce" or loss == "gce":
                shifted = scores - scores.max(axis=1, keepdims=True)
                probs = np.exp(shifted)
                probs /= probs.sum(axis=1, keepdims=True)
                if loss == "ce":
                    grad_scores = probs - onehot[yb]
                else:
                    p_y = probs[np.arange(len(batch)), yb] ** q
                    grad_scores = p_y[:, None] * (probs - onehot[yb])
            else:
                margins = scores[np.arange(len(batch)), yb][:, None] - scores
                slopes = lc_derivative(spec, margins)
                grad_scores = -slopes
                totals = slopes.sum(axis=1) - slopes[np.arange(len(batch)), yb]
                grad_scores[np.arange(len(batch)), yb] = totals
            weights -= eta * (grad_scores.T @ xb / len(batch) + weight_decay * weights)
    return weights


def _accuracy(weights: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.argmax(x @ weights.T, axis=1) == y))


def run_noise(config: dict | None = None, seed: int = 0, out_dir: str | None = None) -> NoiseResult:
    """Label-noise robustness study on the synthetic boundary-noise task.

    Trains cross-entropy, the generalized-cross-entropy grid, and the
    one-sided linear-core sum loss with an identical SGD budget per noise
    rate; reports clean-test accuracy, and collects per-group gradient
    magnitudes at the final model of the histogram noise rate (per-pair
    surrogate slopes for the linear-core loss, true-label softmax gap
    ``1 - p_y`` for cross-entropy).
    """
    cfg = _merge_config(NOISE_DEFAULTS, config)
    t0 = time.perf_counter()
    spec = LinearCoreSpec(BaseLoss.logistic(), side=ONE_SIDED, tau=cfg["tau"])
    accuracies: list[NoiseAccuracy] = []
    gradient_groups: dict[str, GradientGroups] = {}
    realized: dict[float, float] = {}
    for rate in cfg["noise_rates"]:
        dataset = generate_idn_dataset(
            IdnSpec(
                n_train=cfg["n_train"],
                n_test=cfg["n_test"],
                dim=cfg["dim"],
                n_classes=cfg["n_classes"],
                noise_rate=float(rate),
                seed=seed,
                center_scale=cfg["center_scale"],
            )
        )
        x_train = np.hstack([dataset.x_train, np.ones((dataset.x_train.shape[0], 1))])
        x_test = np.hstack([dataset.x_test, np.ones((dataset.x_test.shape[0], 1))])
        realized[float(rate)] = float(np.mean(dataset.flipped))

        def fit(loss: str, q: float = 1.0) -> np.ndarray:
            return _train_linear_multiclass(
                loss,
                q,
                x_train,
                dataset.y_train,
                cfg["n_classes"],
                spec,
                cfg["epochs"],
                cfg["batch_size"],
                cfg["eta"],
                cfg["weight_decay"],
                seed,
            )

        ce_weights = fit("ce")
        accuracies.append(
            NoiseAccuracy("ce", None, float(rate), _accuracy(ce_weights, x_test, dataset.y_test))
        )
        best_q, best_acc = None, -1.0
        for q in cfg["q_grid"]:
            acc = _accuracy(fit("gce", float(q)), x_test, dataset.y_test)
            accuracies.append(NoiseAccuracy("gce", float(q), float(rate), acc))
            if acc > best_acc:
                best_q, best_acc = float(q), acc
        accuracies.append(NoiseAccuracy("gce_best", best_q, float(rate), best_acc))
        lc_weights = fit("lc")
        accuracies.append(
            NoiseAccuracy("lc", None, float(rate), _accuracy(lc_weights, x_test, dataset.y_test))
        )

        if abs(float(rate) - cfg["hist_noise_rate"]) < 1e-12:
            labels = dataset.y_train
            idx = np.arange(labels.size)
            lc_scores = x_train @ lc_weights.T
            margins = lc_scores[idx, labels][:, None] - lc_scores
            magnitudes = np.abs(lc_derivative(spec, margins))
            mask = np.ones_like(margins, dtype=bool)
            mask[idx, labels] = False
            lc_mag = magnitudes[mask].reshape(labels.size, -1)
            ce_scores = x_train @ ce_weights.T
            shifted = ce_scores - ce_scores.max(axis=1, keepdims=True)
            probs = np.exp(shifted)
            probs /= probs.sum(axis=1, keepdims=True)
            ce_mag = 1.0 - probs[idx, labels]
            gradient_groups["lc"] = GradientGroups(
                "lc",
                clean=lc_mag[~dataset.flipped].ravel(),
                noisy=lc_mag[dataset.flipped].ravel(),
            )
            gradient_groups["ce"] = GradientGroups(
                "ce", clean=ce_mag[~dataset.flipped], noisy=ce_mag[dataset.flipped]
            )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "noise.csv",
            ["loss", "q", "noise_rate", "test_accuracy"],
            [
                (a.loss, "" if a.q is None else repr(a.q), repr(a.noise_rate), repr(a.test_accuracy))
                for a in accuracies
            ],
        )
        hist_rows = []
        edges = np.linspace(0.0, 1.0, cfg["n_bins"] + 1)
        for name, groups in sorted(gradient_groups.items()):
            for group_name, values in (("clean", groups.clean), ("noisy", groups.noisy)):
                counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=edges)
                for k, count in enumerate(counts):
                    hist_rows.append(
                        (name, group_name, repr(float(edges[k])), repr(float(edges[k + 1])), int(count))
                    )
        _write_csv(
            out / "grad_hist.csv",
            ["loss", "group", "bin_left", "bin_right", "count"],
            hist_rows,
        )
        _write_manifest(
            out,
            "noise",
            cfg,
            seed,
            {"seconds_total": time.perf_counter() - t0},
            ["noise.csv", "grad_hist.csv"],
        )
    return NoiseResult(
        accuracies=accuracies, gradient_groups=gradient_groups, realized_flip_rates=realized
    )


# ----------------------------------------------------------------------
# selftest
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_scalar_closed_forms() -> str:
    from .losses import lc_value

    exp_spec = LinearCoreSpec(BaseLoss.exponential())
    log_spec = LinearCoreSpec(BaseLoss.logistic())
    checks = [
        (lc_value(exp_spec, 0.0), 2.0),
        (lc_value(exp_spec, 1.0), 1.0),
        (lc_value(exp_spec, -2.0), float(np.e + 2.0)),
        (lc_value(log_spec, 0.0), float(1.0 + 2.0 * np.log(2.0))),
    ]
    worst = max(abs(got - want) for got, want in checks)
    assert worst < 1e-12, f"closed-form mismatch {worst:.2e}"
    return f"max deviation {worst:.1e}"


def _check_smoothness() -> str:
    from .losses import lc_derivative as deriv, lc_value as value

    rng = stream_rng(0, 6)
    worst = 0.0
    for base in (BaseLoss.logistic(), BaseLoss.exponential(), BaseLoss.quartic_linear()):
        for side in (SYMMETRIC, ONE_SIDED):
            spec = LinearCoreSpec(base, side=side)
            grid = np.concatenate([np.linspace(-6, 6, 401), [-1.0, 1.0]])
            step = 1e-6
            fd = (value(spec, grid + step) - value(spec, grid - step)) / (2 * step)
            worst = max(worst, float(np.max(np.abs(fd - deriv(spec, grid)))))
            triples = np.sort(rng.uniform(-8, 8, size=(10000, 3)), axis=1)
            lam = (triples[:, 1] - triples[:, 0]) / (triples[:, 2] - triples[:, 0])
            mid = value(spec, triples[:, 1])
            chord = (1 - lam) * value(spec, triples[:, 0]) + lam * value(spec, triples[:, 2])
            assert np.all(mid <= chord + 1e-12), "convexity violated"
    assert worst < 1e-4, f"C1 finite-difference gap {worst:.2e}"
    return f"C1 gap {worst:.1e}"


def _check_transformation_bounds() -> str:
    from .consistency import transformation_T, transformation_min_slack
    from .losses import linear_core_margin_loss

    ts = np.linspace(0.0, 1.0, 200)
    worst = np.inf
    for base in (BaseLoss.logistic(), BaseLoss.exponential(), BaseLoss.quartic_linear()):
        for side in (SYMMETRIC, ONE_SIDED):
            loss = linear_core_margin_loss(LinearCoreSpec(base, side=side))
            slack = transformation_min_slack(loss, ts, 1.0)
            worst = min(worst, slack)
            assert slack >= -1e-8, f"T(t) >= t violated by {slack:.2e} for {loss.name}"
            assert transformation_T(loss, 0.0) <= 1e-9, "T(0) > 0"
    exp_loss = linear_core_margin_loss(LinearCoreSpec(BaseLoss.exponential()))
    analytic = 1.0 + ts - np.sqrt(1.0 - ts**2)
    gap = float(np.max(np.abs(transformation_T(exp_loss, ts) - analytic)))
    assert gap < 1e-8, f"analytic transformation mismatch {gap:.2e}"
    # Scaled cores keep the linear lower bound with constant tau.
    for tau in (0.1, 0.5, 1.0, 2.0, 5.0):
        loss = linear_core_margin_loss(LinearCoreSpec(BaseLoss.logistic(), tau=tau))
        slack = transformation_min_slack(loss, ts, tau)
        assert slack >= -1e-8, f"T(t) >= {tau}*t violated by {slack:.2e}"
    return f"min slack {worst:.1e}, analytic gap {gap:.1e}"


def _check_restricted_infimum() -> str:
    from .consistency import restricted_pair_infimum
    from .losses import linear_core_margin_loss
    from .minimize import minimize_convex

    rng = stream_rng(1, 6)
    worst = 0.0
    for base in (BaseLoss.logistic(), BaseLoss.exponential()):
        loss = linear_core_margin_loss(LinearCoreSpec(base))
        a = rng.uniform(0.0, 2.0, size=200)
        b = rng.uniform(0.0, 2.0, size=200)
        keep = a + b > 0
        a, b = a[keep], b[keep]

        def g(u, a=a, b=b):
            return a * np.asarray(loss.value(-u)) + b * np.asarray(loss.value(u))

        def gp(u, a=a, b=b):
            return -a * np.asarray(loss.derivative(-u)) + b * np.asarray(loss.derivative(u))

        numeric = minimize_convex(g, gp, np.full(a.shape, -1.0), np.full(a.shape, 1.0), expand=False)
        closed = np.array([restricted_pair_infimum(base, ai, bi)[0] for ai, bi in zip(a, b)])
        worst = max(worst, float(np.max(np.abs(numeric.value - closed))))
    assert worst < 1e-9, f"restricted infimum mismatch {worst:.2e}"
    return f"max deviation {worst:.1e}"


def _check_multiclass_regret() -> str:
    from .multiclass import mc_conditional_regrets

    rng = stream_rng(2, 6)
    worst = np.inf
    for _ in range(250):
        n = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(n))
        scores = rng.normal(scale=2.0, size=n)
        for side in (SYMMETRIC, ONE_SIDED):
            spec = LinearCoreSpec(BaseLoss.logistic(), side=side)
            r01, rsur = mc_conditional_regrets(spec, p, scores)
            worst = min(worst, rsur - r01)
            assert r01 <= rsur + 1e-8, f"pointwise consistency violated by {r01 - rsur:.2e}"
    return f"min surplus {worst:.1e}"


def _check_structured_regret() -> str:
    from .structured import structured_conditional_regrets

    rng = stream_rng(3, 6)
    spec = LinearCoreSpec(BaseLoss.logistic(), side=ONE_SIDED)
    worst = np.inf
    for _ in range(250):
        n = int(rng.integers(3, 7))
        p = rng.dirichlet(np.ones(n))
        scores = rng.normal(scale=2.0, size=n)
        ell = rng.uniform(0.0, 1.0, size=(n, n))
        np.fill_diagonal(ell, 0.0)
        rt, rs = structured_conditional_regrets(spec, p, scores, ell)
        worst = min(worst, rs - rt)
        assert rt <= rs + 1e-8, f"structured consistency violated by {rt - rs:.2e}"
    return f"min surplus {worst:.1e}"


def _check_inference_oracles() -> str:
    from .inference import forward_backward, loss_augmented_viterbi, viterbi
    from .structured import all_sequence_scores, enumerate_sequences, hamming_loss

    rng = stream_rng(4, 6)
    worst = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 5))
        length = int(rng.integers(1, 6))
        model = ChainModel(rng.normal(size=(n, 3)), rng.normal(size=(n, n)))
        x = rng.normal(size=(length, 3))
        seqs = enumerate_sequences(n, length)
        scores = all_sequence_scores(model, x, seqs)
        best, best_score = viterbi(model, x)
        worst = max(worst, abs(best_score - float(np.max(scores))))
        assert np.array_equal(best, seqs[int(np.argmax(scores))]) or abs(
            best_score - float(np.max(scores))
        ) < 1e-10
        y = seqs[int(rng.integers(0, len(seqs)))]
        _, aug_score = loss_augmented_viterbi(model, x, y)
        target = max(
            float(s) + hamming_loss(seq, y) for s, seq in zip(scores, seqs)
        )
        worst = max(worst, abs(aug_score - target))
        logz = forward_backward(model, x).log_partition
        brute = float(np.log(np.sum(np.exp(scores - scores.max()))) + scores.max())
        worst = max(worst, abs(logz - brute))
    assert worst < 1e-8, f"inference oracle mismatch {worst:.2e}"
    return f"max deviation {worst:.1e}"


def _check_pair_estimator_unbiased() -> str:
    from .structured import structured_sum_loss_gradient_exact
    from .trainers import UNIFORM_FULL, exact_pair_estimator_expectation

    rng = stream_rng(5, 6)
    spec = LinearCoreSpec(BaseLoss.logistic(), side=ONE_SIDED)
    model = ChainModel(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))
    x = rng.normal(size=(4, 2))
    y = rng.integers(0, 2, size=4)
    proposal = PairProposal(0.3, UNIFORM_FULL)
    expectation = exact_pair_estimator_expectation(model, x, y, spec, proposal)
    exact = structured_sum_loss_gradient_exact(spec, model, x, y)
    gap = float(np.max(np.abs(expectation - exact)))
    assert gap < 1e-10, f"pair estimator biased by {gap:.2e}"
    return f"max gap {gap:.1e}"


def _check_rate_slopes() -> str:
    result = run_rates()
    for name, lo, hi in [
        ("lc_logistic", 0.95, 1.05),
        ("lc_exponential", 0.95, 1.05),
        ("logistic", 0.45, 0.55),
        ("exponential", 0.45, 0.55),
    ]:
        slope = result.slopes[name]
        assert lo <= slope <= hi, f"{name} slope {slope:.4f} outside [{lo}, {hi}]"
    return ", ".join(f"{k}={v:.3f}" for k, v in sorted(result.slopes.items()))


def _check_determinism() -> str:
    from .datagen import generate_hmm_data

    a = generate_hmm_data(HmmSpec(length=5, n_labels=3, dim=4, n_sequences=6, seed=9))
    b = generate_hmm_data(HmmSpec(length=5, n_labels=3, dim=4, n_sequences=6, seed=9))
    for (xa, ya), (xb, yb) in zip(a.train, b.train):
        assert np.array_equal(xa, xb) and np.array_equal(ya, yb), "data not deterministic"
    cfg = dict(TRAIN_SEQ_DEFAULTS, iterations=200, eval_interval=50, n_train=20, n_test=5, dim=6)
    h1 = run_train_seq(cfg, seed=3).result.history
    h2 = run_train_seq(cfg, seed=3).result.history
    same = all(
        r1.iteration == r2.iteration
        and r1.objective == r2.objective
        and r1.test_error == r2.test_error
        for r1, r2 in zip(h1, h2)
    )
    assert same and len(h1) == len(h2), "training history not deterministic"
    return f"{len(h1)} identical history rows"


SELFTEST_CHECKS = [
    ("scalar_closed_forms", _check_scalar_closed_forms),
    ("smoothness_and_convexity", _check_smoothness),
    ("transformation_bounds", _check_transformation_bounds),
    ("restricted_pair_infimum", _check_restricted_infimum),
    ("multiclass_pointwise_consistency", _check_multiclass_regret),
    ("structured_pointwise_consistency", _check_structured_regret),
    ("exact_inference_oracles", _check_inference_oracles),
    ("pair_estimator_unbiasedness", _check_pair_estimator_unbiased),
    ("rate_slopes", _check_rate_slopes),
    ("determinism", _check_determinism),
]


def run_selftest(verbose: bool = True) -> list:
    """Run the invariant battery; returns one result per check."""
    results = []
    for name, check in SELFTEST_CHECKS:
        t0 = time.perf_counter()
        try:
            detail = check()
            passed = True
        except AssertionError as exc:
            detail = str(exc)
            passed = False
        elapsed = time.perf_counter() - t0
        results.append(CheckResult(name=name, passed=passed, detail=detail))
        if verbose:
            status = "ok" if passed else "FAIL"
            print(f"[{status:4s}] {name} ({elapsed:.1f}s): {detail}")
    return results
