from __future__ import annotations

from pathlib import Path

import numpy as np
import orjson
import pytest

from transpose_kit.autodiff import Tensor, backward, mse
from transpose_kit.autodiff.tensor import mul
from transpose_kit.data import LabeledDataset, MemorizationSet
from transpose_kit.errors import DivergenceError, ParameterError
from transpose_kit.nn import Model, build_model, make_optimizer
from transpose_kit.training import (
    TrainConfig,
    accuracy,
    fine_tune_defense,
    reconstruct,
    secondary_mse,
    train_primary_only,
    transpose_train,
)
from transpose_kit.training.report import EpochRecord


def test_tandem_training_learns_both_tasks(
    trained: Model, test_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    assert accuracy(trained, test_set) >= 0.9
    assert secondary_mse(trained, memorized) < 0.02


def test_untrained_model_is_worse(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet, trained: Model
) -> None:
    fresh = build_model(fc_specs, train_set.sample_shape, seed=0)
    assert secondary_mse(fresh, memorized) > secondary_mse(trained, memorized)


def test_reconstruction_is_clamped(trained: Model, memorized: MemorizationSet) -> None:
    images = reconstruct(trained, memorized.indices)
    assert images.shape == memorized.images.shape
    assert images.min() >= 0.0 and images.max() <= 1.0


def test_same_seed_same_losses(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    cfg = TrainConfig(epochs=2, batch_primary=16, batch_secondary=6)
    runs = []
    for _ in range(2):
        model = build_model(fc_specs, train_set.sample_shape, seed=3)
        report = transpose_train(model, train_set, memorized, cfg)
        runs.append([(e.primary_loss, e.secondary_loss) for e in report.epochs])
    assert runs[0] == runs[1]


def test_lambda_zero_leaves_transposed_bias_untouched(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    model = build_model(fc_specs, train_set.sample_shape, seed=0)
    bias_t = {k: t.data.copy() for k, t in model.params.items() if k.endswith("bias_t")}
    transpose_train(model, train_set, memorized, TrainConfig(lam=0.0, epochs=1))
    for key, before in bias_t.items():
        np.testing.assert_array_equal(model.params[key].data, before)


def test_early_stop_on_flat_secondary_loss(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    model = build_model(fc_specs, train_set.sample_shape, seed=0)
    cfg = TrainConfig(epochs=50, early_stop_patience=2, min_delta=1e9)
    report = transpose_train(model, train_set, memorized, cfg)
    assert report.stop_reason == "early_stop"
    assert len(report.epochs) == 3


def test_divergence_names_epoch_and_batch(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    model = build_model(fc_specs, train_set.sample_shape, seed=0)
    for tensor in model.params.values():
        tensor.data[...] = np.nan
    with pytest.raises(DivergenceError) as info:
        transpose_train(model, train_set, memorized, TrainConfig(epochs=1))
    assert info.value.epoch == 1
    assert info.value.batch == 0


def test_empty_memorization_set_rejected(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    empty = MemorizationSet(
        memorized.images[:0], memorized.labels[:0], memorized.positions[:0], memorized.indices[:0]
    )
    with pytest.raises(ParameterError):
        transpose_train(build_model(fc_specs, train_set.sample_shape), train_set, empty, TrainConfig(epochs=1))


def test_primary_only_reports_no_secondary_without_monitor(
    fc_specs, train_set: LabeledDataset
) -> None:
    model = build_model(fc_specs, train_set.sample_shape, seed=0)
    report = train_primary_only(model, train_set, TrainConfig(epochs=1))
    assert report.mode == "primary_only"
    assert report.final_secondary is None


def test_fine_tuning_works_on_the_model_in_place(
    trained: Model, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    model = trained.clone()
    result = fine_tune_defense(model, train_set, memorized, epochs=1)
    assert result.before == pytest.approx(secondary_mse(trained, memorized))
    assert result.after == pytest.approx(secondary_mse(model, memorized))
    assert result.ratio == pytest.approx(result.after / result.before)


def test_report_jsonl(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet, tmp_path: Path
) -> None:
    report = transpose_train(
        build_model(fc_specs, train_set.sample_shape), train_set, memorized, TrainConfig(epochs=2)
    )
    path = tmp_path / "report.jsonl"
    report.write_jsonl(path)
    lines = [orjson.loads(line) for line in path.read_bytes().splitlines()]
    assert [line["epoch"] for line in lines[:2]] == [1, 2]
    assert len(lines) == 3


def test_epoch_record_rejects_non_finite_loss() -> None:
    with pytest.raises(ValueError):
        EpochRecord(epoch=1, primary_loss=float("nan"), primary_accuracy=0.5, seconds=0.1)


def test_secondary_step_moves_forward_weights(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    model = build_model(fc_specs, train_set.sample_shape, seed=0)
    transposed = model.transpose()
    before = {k: t.data.copy() for k, t in model.params.items() if k.endswith(".weight")}
    step = make_optimizer("sgd", transposed.parameters(), 0.1)
    loss = mul(mse(transposed(Tensor(memorized.indices)), memorized.images), 0.5)
    backward(loss)
    step.step()
    for key, weight in before.items():
        assert not np.array_equal(model.params[key].data, weight), key


def test_transposed_backward_reaches_forward_weight_objects(
    fc_specs, train_set: LabeledDataset, memorized: MemorizationSet
) -> None:
    model = build_model(fc_specs, train_set.sample_shape, seed=0)
    transposed = model.transpose()
    model.zero_grad()
    backward(mse(transposed(Tensor(memorized.indices)), memorized.images))
    forward_weights = [t for name, t in model.named_parameters() if name.endswith(".weight")]
    assert forward_weights
    for weight in forward_weights:
        assert any(weight is t for t in transposed.parameters())
        assert weight.grad is not None and np.any(weight.grad != 0)
