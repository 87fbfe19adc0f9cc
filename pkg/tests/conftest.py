from __future__ import annotations

import pytest

from meltrec.config import EncoderConfig, EvalConfig, TrainConfig
from meltrec.data.index import SubsequenceIndex, build_subsequence_index
from meltrec.data.interactions import UserSequence
from meltrec.data.split import (
    HeadTailPartition,
    SplitDataset,
    leave_one_out_split,
    partition_head_tail,
)
from meltrec.model.params import ModelParams, initialize_params

N_ITEMS = 12

# Eight users over twelve items; the last two items of each row are held out.
TOY_SEQUENCES = {
    0: (0, 1, 2, 3, 4, 5, 6, 7, 8),
    1: (1, 2, 0, 3, 4, 9, 5),
    2: (2, 0, 1, 4, 3, 10),
    3: (0, 3, 1, 2, 11, 4),
    4: (4, 0, 2, 1, 5),
    5: (1, 0, 3, 6, 2),
    6: (5, 2, 0, 7, 1),
    7: (3, 4, 0, 1, 8),
}


@pytest.fixture
def toy_split() -> SplitDataset:
    sequences = {user: UserSequence(user, items) for user, items in TOY_SEQUENCES.items()}
    return leave_one_out_split(sequences, n_items=N_ITEMS)


@pytest.fixture
def toy_index(toy_split: SplitDataset) -> SubsequenceIndex:
    return build_subsequence_index(toy_split, include_reversed=True)


@pytest.fixture
def toy_partition(toy_split: SplitDataset, toy_index: SubsequenceIndex) -> HeadTailPartition:
    return partition_head_tail(toy_split, 0.5, index=toy_index)


@pytest.fixture
def encoder_config() -> EncoderConfig:
    return EncoderConfig(
        d=8,
        max_len=10,
        n_blocks=1,
        n_heads=2,
        dropout_rate=0.0,
        dtype="float64",
        n_items=N_ITEMS,
    )


@pytest.fixture
def toy_params(encoder_config: EncoderConfig) -> ModelParams:
    return initialize_params(encoder_config, seed=0)


@pytest.fixture
def train_config() -> TrainConfig:
    return TrainConfig(
        alpha=0.5,
        pretrain_epochs=2,
        e_max=2,
        batch_size=4,
        learning_rate=1e-2,
        max_context_subsequences=8,
    )


@pytest.fixture
def eval_config() -> EvalConfig:
    return EvalConfig(k=2, n_negatives=3, seed=0)
