from __future__ import annotations

import copy
import json
import math
from typing import TYPE_CHECKING, Any

import numpy as np
import pytest
import torch

import meltrec.model.losses
import meltrec.train.trainer
from meltrec.config import EncoderConfig, EvalConfig, TrainConfig
from meltrec.data.index import SubsequenceIndex
from meltrec.data.split import HeadTailPartition, SplitDataset, partition_head_tail
from meltrec.errors import CheckpointError, PartitionError
from meltrec.train.checkpoint import load_checkpoint
from meltrec.train.trainer import (
    Trainer,
    TrainingResult,
    pretrain,
    train_melt,
    training_negatives,
)

if TYPE_CHECKING:
    from pathlib import Path

    from meltrec.model.params import ModelParams


def _history(result: TrainingResult) -> list[dict[str, Any]]:
    return [{k: v for k, v in record.items() if k != "seconds"} for record in result.history]


def _assert_same_params(left: ModelParams, right: ModelParams, **tolerance: float) -> None:
    right_state = right.state_dict()
    for name, value in left.state_dict().items():
        if tolerance:
            assert torch.allclose(value, right_state[name], **tolerance), name
        else:
            assert torch.equal(value, right_state[name]), name


@pytest.fixture
def pretrained(
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    train_config: TrainConfig,
    encoder_config: EncoderConfig,
    eval_config: EvalConfig,
) -> TrainingResult:
    return pretrain(
        toy_split,
        train_config,
        encoder_config,
        partition=toy_partition,
        eval_config=eval_config,
    )


def test_training_negatives() -> None:
    rng = np.random.default_rng(0)
    sequence = [0, 3, 5, 3]
    for _ in range(50):
        negatives = training_negatives(sequence, 8, rng)
        assert len(negatives) == 3
        assert not set(negatives) & set(sequence)


def test_training_negatives_full_catalogue() -> None:
    rng = np.random.default_rng(0)
    sequence = [0, 1, 2, 0, 2]
    for _ in range(50):
        negatives = training_negatives(sequence, 3, rng)
        assert all(n != p and 0 <= n < 3 for n, p in zip(negatives, sequence[1:]))


def test_pretrain_learns(
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    train_config: TrainConfig,
    encoder_config: EncoderConfig,
    eval_config: EvalConfig,
) -> None:
    config = train_config.model_copy(update={"pretrain_epochs": 20})
    result = pretrain(
        toy_split,
        config,
        encoder_config,
        partition=toy_partition,
        eval_config=eval_config,
    )
    assert len(result.history) == 20
    assert result.history[-1]["rec"] < 2 * math.log(2)
    assert result.history[-1]["rec"] < result.history[0]["rec"]
    best = max(record["valid_hr"] for record in result.history)
    assert result.best_valid_hr == best
    assert result.history[result.best_epoch]["valid_hr"] == best
    assert all(record["user_branch"] == record["item_branch"] == 0 for record in result.history)


def test_pretrain_is_deterministic(
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    train_config: TrainConfig,
    encoder_config: EncoderConfig,
    eval_config: EvalConfig,
) -> None:
    again = pretrain(
        toy_split,
        train_config,
        encoder_config,
        partition=toy_partition,
        eval_config=eval_config,
    )
    _assert_same_params(pretrained.params, again.params)
    assert _history(pretrained) == _history(again)


def test_pretrain_leaves_generators_at_zero(pretrained: TrainingResult) -> None:
    for name, value in pretrained.params.state_dict().items():
        if "generator.layers.0" in name:
            assert not value.any(), name


def test_pretrain_fills_item_count(
    toy_split: SplitDataset,
    train_config: TrainConfig,
    encoder_config: EncoderConfig,
    eval_config: EvalConfig,
) -> None:
    config = train_config.model_copy(update={"pretrain_epochs": 1})
    encoder = encoder_config.model_copy(update={"n_items": None})
    result = pretrain(toy_split, config, encoder, eval_config=eval_config)
    assert result.params.n_items == toy_split.n_items


def test_zero_weights_match_continued_pretraining(
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
    eval_config: EvalConfig,
) -> None:
    config = train_config.model_copy(
        update={"lambda_u": 0.0, "lambda_i": 0.0, "beta": 1.0, "gamma": 1.0},
    )
    continued = Trainer(
        copy.deepcopy(pretrained.params),
        toy_split,
        toy_partition,
        SubsequenceIndex(),
        config,
        stage="pretrain",
        first_epoch=config.pretrain_epochs,
        optimizer_state=copy.deepcopy(pretrained.optimizer_state),
        eval_config=eval_config,
    ).run()
    melt = train_melt(
        toy_split,
        toy_partition,
        toy_index,
        pretrained.params,
        config,
        optimizer_state=copy.deepcopy(pretrained.optimizer_state),
        eval_config=eval_config,
    )
    _assert_same_params(melt.params, continued.params)
    assert melt.best_epoch == continued.best_epoch
    assert len(melt.history) == len(continued.history)
    for ours, theirs in zip(melt.history, continued.history):
        assert ours["rec"] == theirs["rec"]
        assert ours["total"] == theirs["total"]
        assert ours["valid_hr"] == theirs["valid_hr"]
        assert ours["valid_ndcg"] == theirs["valid_ndcg"]


def test_train_melt_leaves_pretrained_alone(
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
    eval_config: EvalConfig,
) -> None:
    before = copy.deepcopy(pretrained.params)
    result = train_melt(
        toy_split,
        toy_partition,
        toy_index,
        pretrained.params,
        train_config.model_copy(update={"gamma": 0.5}),
        eval_config=eval_config,
    )
    _assert_same_params(pretrained.params, before)
    assert len(result.history) == train_config.e_max
    assert all(math.isfinite(record["total"]) for record in result.history)
    assert any(record["user_branch"] > 0 for record in result.history)
    assert any(record["item_branch"] > 0 for record in result.history)
    assert [record["global_epoch"] for record in result.history] == [2, 3]


def test_sampled_sizes_stay_in_bounds(
    monkeypatch: pytest.MonkeyPatch,
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
    eval_config: EvalConfig,
) -> None:
    recent: list[tuple[int, int]] = []
    sampled: list[tuple[int, int]] = []
    truncate = meltrec.model.losses.truncate_recent
    sample = meltrec.train.trainer.sample_subsequences

    def record_truncate(sequence: Any, r: int) -> tuple[int, ...]:
        recent.append((r, len(sequence)))
        return truncate(sequence, r)

    def record_sample(index: SubsequenceIndex, item: int, k: int, rng: Any) -> Any:
        sampled.append((item, k))
        return sample(index, item, k, rng)

    monkeypatch.setattr(meltrec.model.losses, "truncate_recent", record_truncate)
    monkeypatch.setattr(meltrec.train.trainer, "sample_subsequences", record_sample)
    train_melt(
        toy_split,
        toy_partition,
        toy_index,
        pretrained.params,
        train_config,
        eval_config=eval_config,
    )
    assert recent
    assert all(1 <= r <= toy_partition.kappa_u <= length for r, length in recent)
    assert sampled
    assert {item for item, _ in sampled} == toy_partition.head_items
    assert all(1 <= k <= toy_partition.kappa_i for _, k in sampled)


def test_partition_without_index_is_rejected(
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
) -> None:
    partition = partition_head_tail(toy_split, 0.5)
    with pytest.raises(PartitionError):
        train_melt(toy_split, partition, toy_index, pretrained.params, train_config)


def test_logs_and_checkpoints(
    tmp_path: Path,
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
    eval_config: EvalConfig,
) -> None:
    log_path = tmp_path / "logs" / "melt.jsonl"
    result = train_melt(
        toy_split,
        toy_partition,
        toy_index,
        pretrained.params,
        train_config,
        eval_config=eval_config,
        checkpoint_dir=tmp_path,
        log_path=log_path,
    )
    records = [json.loads(line) for line in log_path.read_text().splitlines()]
    assert records == result.history
    assert {"rec", "user_branch", "item_branch", "total", "valid_hr", "valid_ndcg"} <= set(
        records[0]
    )

    best = load_checkpoint(tmp_path / "melt.pt")
    assert best.extra["stage"] == "melt"
    assert best.extra["valid_hr"] == result.best_valid_hr
    assert best.epoch == train_config.pretrain_epochs + result.best_epoch
    _assert_same_params(best.params, result.params)

    last = load_checkpoint(tmp_path / "melt-last.pt")
    assert last.epoch == train_config.e_max - 1
    assert last.rng_state == {"seed": train_config.seed, "epoch": 4}
    assert last.extra["history"] == result.history


def test_resume_matches_uninterrupted(
    tmp_path: Path,
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
    eval_config: EvalConfig,
) -> None:
    config = train_config.model_copy(update={"e_max": 3})
    whole = train_melt(
        toy_split,
        toy_partition,
        toy_index,
        pretrained.params,
        config,
        eval_config=eval_config,
    )
    interrupted = Trainer(
        copy.deepcopy(pretrained.params),
        toy_split,
        toy_partition,
        toy_index,
        config,
        stage="melt",
        first_epoch=config.pretrain_epochs,
        eval_config=eval_config,
        checkpoint_dir=tmp_path,
    )
    interrupted.run_epoch(0)
    resumed = train_melt(
        toy_split,
        toy_partition,
        toy_index,
        pretrained.params,
        config,
        resume_from=load_checkpoint(tmp_path / "melt-last.pt"),
        eval_config=eval_config,
    )
    _assert_same_params(resumed.params, whole.params)
    assert resumed.best_epoch == whole.best_epoch
    assert _history(resumed) == _history(whole)


def test_resume_rejects_other_stage_or_seed(
    tmp_path: Path,
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
    eval_config: EvalConfig,
) -> None:
    Trainer(
        copy.deepcopy(pretrained.params),
        toy_split,
        toy_partition,
        toy_index,
        train_config,
        stage="melt",
        eval_config=eval_config,
        checkpoint_dir=tmp_path,
    ).run_epoch(0)
    checkpoint = load_checkpoint(tmp_path / "melt-last.pt")
    with pytest.raises(CheckpointError):
        pretrain(
            toy_split,
            train_config,
            pretrained.params.config,
            resume_from=checkpoint,
            eval_config=eval_config,
        )
    with pytest.raises(CheckpointError, match="seed"):
        train_melt(
            toy_split,
            toy_partition,
            toy_index,
            pretrained.params,
            train_config.model_copy(update={"seed": 1}),
            resume_from=checkpoint,
            eval_config=eval_config,
        )


def test_head_item_schedule_covers_head_items(
    toy_params: ModelParams,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
) -> None:
    trainer = Trainer(
        toy_params,
        toy_split,
        toy_partition,
        toy_index,
        train_config,
        stage="melt",
    )
    schedule = trainer._head_item_schedule(5)
    assert len(schedule) == trainer.n_batches == 2
    assert {item for batch in schedule for item in batch} == toy_partition.head_items
    assert schedule == trainer._head_item_schedule(5)
    pretraining = Trainer(
        toy_params,
        toy_split,
        toy_partition,
        toy_index,
        train_config,
        stage="pretrain",
    )
    assert pretraining._head_item_schedule(5) == [[], []]


def _melt_trainer(
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    config: TrainConfig,
) -> Trainer:
    return Trainer(
        copy.deepcopy(pretrained.params),
        toy_split,
        toy_partition,
        toy_index,
        config,
        stage="melt",
        first_epoch=config.pretrain_epochs,
    )


def test_warm_start_fits_weighted_generators(
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
) -> None:
    trainer = _melt_trainer(pretrained, toy_split, toy_partition, toy_index, train_config)
    trainer.warm_start()
    params = trainer.params
    assert params.user_generator.layers[-1].bias.any()
    assert params.item_generator.layers[-1].bias.any()
    for name, value in params.state_dict().items():
        assert torch.isfinite(value).all(), name
    assert torch.equal(params.item_embeddings, pretrained.params.item_embeddings)


@pytest.mark.parametrize(
    "update",
    [
        {"lambda_u": 0.0, "lambda_i": 0.0},
        {"warm_start_generators": False},
        {"user_branch": False, "item_branch": False},
    ],
)
def test_warm_start_leaves_unweighted_generators_alone(
    update: dict[str, Any],
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
) -> None:
    config = train_config.model_copy(update=update)
    trainer = _melt_trainer(pretrained, toy_split, toy_partition, toy_index, config)
    trainer.warm_start()
    _assert_same_params(trainer.params, pretrained.params)


def test_warm_start_only_in_first_epoch(
    monkeypatch: pytest.MonkeyPatch,
    pretrained: TrainingResult,
    toy_split: SplitDataset,
    toy_partition: HeadTailPartition,
    toy_index: SubsequenceIndex,
    train_config: TrainConfig,
    eval_config: EvalConfig,
) -> None:
    calls: list[int] = []
    warm_start = Trainer.warm_start

    def record(trainer: Trainer) -> None:
        calls.append(trainer.first_epoch)
        warm_start(trainer)

    monkeypatch.setattr(Trainer, "warm_start", record)
    config = train_config.model_copy(update={"e_max": 3})
    train_melt(
        toy_split,
        toy_partition,
        toy_index,
        pretrained.params,
        config,
        eval_config=eval_config,
    )
    assert calls == [config.pretrain_epochs]
