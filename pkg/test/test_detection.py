from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from transpose_kit.data import LabeledDataset
from transpose_kit.detection import (
    DetectConfig,
    bim_probe,
    default_ladder,
    detect,
    detection_auc,
    mean_image,
    rates,
    select_threshold,
)
from transpose_kit.errors import DimensionError, ParameterError, ThresholdError
from transpose_kit.nn import Model
from transpose_kit.training import predict


@pytest.fixture
def xbar(train_set: LabeledDataset) -> np.ndarray:
    return mean_image(train_set)


def _initial_scores(model: Model, xbar: np.ndarray, cfg: DetectConfig) -> np.ndarray:
    transposed = model.as_transposed()
    starts = np.random.default_rng(cfg.seed).uniform(
        0.0, 1.0, size=(cfg.restarts, *transposed.input_shape)
    ).astype(np.float32)
    outputs = predict(transposed, starts).astype(np.float64)
    return ((outputs - xbar[None]) ** 2).reshape(cfg.restarts, -1).mean(axis=1)


def test_zero_step_keeps_initial_scores(fc_model: Model, xbar: np.ndarray) -> None:
    cfg = DetectConfig(alpha=0.0, restarts=5, iterations=10, seed=7)
    result = bim_probe(fc_model, xbar, cfg)
    np.testing.assert_allclose(result.scores, _initial_scores(fc_model, xbar, cfg), rtol=1e-5)
    assert result.iterations == [1] * 5
    assert result.min_score == min(result.scores)


def test_descent_does_not_raise_the_score(fc_model: Model, xbar: np.ndarray) -> None:
    still = bim_probe(fc_model, xbar, DetectConfig(alpha=0.0, restarts=4, seed=1))
    moved = bim_probe(fc_model, xbar, DetectConfig(alpha=1.0, iterations=50, restarts=4, seed=1))
    for before, after in zip(still.scores, moved.scores, strict=True):
        assert after <= before + 1e-7


def test_sign_rule(fc_model: Model, xbar: np.ndarray) -> None:
    cfg = DetectConfig(alpha=0.01, iterations=20, restarts=3, step_rule="sign")
    result = bim_probe(fc_model, xbar, cfg)
    assert len(result.scores) == 3
    assert all(math.isfinite(s) for s in result.scores)
    assert all(1 <= n <= 20 for n in result.iterations)


def test_probe_leaves_parameters_untouched(fc_model: Model, xbar: np.ndarray) -> None:
    before = {name: t.data.copy() for name, t in fc_model.params.items()}
    bim_probe(fc_model, xbar, DetectConfig(alpha=0.5, iterations=5, restarts=2))
    for name, tensor in fc_model.params.items():
        np.testing.assert_array_equal(tensor.data, before[name])
        assert tensor.grad is None


def test_probe_shape_mismatch(fc_model: Model) -> None:
    with pytest.raises(DimensionError):
        bim_probe(fc_model, np.zeros((1, 5, 5), np.float32))


def test_non_finite_model_scores_infinity(fc_model: Model, xbar: np.ndarray) -> None:
    broken = fc_model.clone()
    broken.params["layer1.weight"].data[...] = np.nan
    cfg = DetectConfig(iterations=3, restarts=2)
    result = bim_probe(broken, xbar, cfg)
    assert result.scores == [math.inf, math.inf]
    assert detect(broken, xbar, 1.0, cfg).verdict == "benign"


def test_detect_verdicts(fc_model: Model, xbar: np.ndarray) -> None:
    cfg = DetectConfig(iterations=5, restarts=2)
    assert detect(fc_model, xbar, math.inf, cfg).verdict == "malicious"
    report = detect(fc_model, xbar, -1.0, cfg)
    assert report.verdict == "benign"
    assert report.min_score == min(report.scores)


def test_detect_config_is_strict() -> None:
    with pytest.raises(ValidationError):
        DetectConfig.model_validate({"restarts": 0})
    with pytest.raises(ValidationError):
        DetectConfig.model_validate({"alpha": 0.1, "stride": 2})


def test_mean_image(train_set: LabeledDataset) -> None:
    full = mean_image(train_set)
    np.testing.assert_allclose(full, train_set.images.mean(axis=0), atol=1e-6)
    np.testing.assert_array_equal(mean_image(train_set, 10, seed=4), mean_image(train_set, 10, seed=4))
    np.testing.assert_array_equal(mean_image(train_set, 10_000), full)


def test_threshold_is_noise_mse_at_crossing(xbar: np.ndarray) -> None:
    selection = select_threshold(xbar, cutoff=0.5, seed=3)
    assert selection.ssim < 0.5
    field = np.random.default_rng(3).standard_normal(xbar.shape)
    assert selection.threshold == pytest.approx(selection.sigma**2 * float(np.mean(field**2)))
    assert selection.sigma in default_ladder().tolist()


def test_threshold_falls_as_cutoff_rises(xbar: np.ndarray) -> None:
    strict = select_threshold(xbar, cutoff=0.9)
    loose = select_threshold(xbar, cutoff=0.2)
    assert strict.sigma <= loose.sigma
    assert strict.threshold <= loose.threshold


def test_threshold_first_rung(xbar: np.ndarray) -> None:
    assert select_threshold(xbar, sigmas=[5.0, 6.0]).sigma == 5.0


def test_threshold_errors(xbar: np.ndarray) -> None:
    with pytest.raises(ThresholdError):
        select_threshold(xbar, sigmas=[1e-5, 2e-5])
    with pytest.raises(ParameterError):
        select_threshold(xbar, sigmas=[])
    with pytest.raises(ParameterError):
        select_threshold(xbar, sigmas=[0.2, 0.1])


def test_auc() -> None:
    assert detection_auc([0.5, 0.6, 0.7], [0.01, 0.02]) == 1.0
    assert detection_auc([0.01, 0.02], [0.5, 0.6]) == 0.0
    assert detection_auc([0.3, 0.3], [0.3]) == 0.5
    assert detection_auc([0.1, 0.5], [0.3]) == 0.5
    with pytest.raises(ParameterError):
        detection_auc([], [0.1])
    with pytest.raises(ParameterError):
        detection_auc([0.1], [])


def test_rates() -> None:
    tpr, fpr = rates([0.5, 0.05, 0.9, 0.7], [0.01, 0.02, 0.2], threshold=0.1)
    assert tpr == pytest.approx(2 / 3)
    assert fpr == pytest.approx(1 / 4)
