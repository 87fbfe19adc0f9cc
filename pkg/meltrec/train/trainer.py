"""
The two training stages.

`pretrain` fits the backbone with the next-item loss only. `train_melt`
continues from a pretrained backbone and adds the two distillation branches,
mutual enhancement and the curriculum. Both stages share one epoch counter
and one set of random streams keyed on it, so a fine-tuning stage with both
distillation weights at zero (and neutral generators) takes exactly the steps
continued pretraining would.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
import torch
from tqdm import tqdm

from meltrec.config import EvalConfig, TrainConfig
from meltrec.data.index import SubsequenceIndex, sample_subsequences, truncate_recent
from meltrec.data.split import partition_head_tail
from meltrec.errors import CheckpointError, PartitionError, TrainingError
from meltrec.evaluation.ranking import evaluate
from meltrec.evaluation.scoring import (
    InferenceContext,
    build_inference,
    full_user_reps,
)
from meltrec.model.encoder import encode_many
from meltrec.model.enhance import (
    TailItemReps,
    contextualized_item_reps,
    enhanced_item_table,
    fit_generator,
    tail_item_reps,
)
from meltrec.model.losses import (
    LossBreakdown,
    item_branch_losses,
    rec_loss_batch,
    total_loss,
    user_branch_losses,
)
from meltrec.model.params import initialize_params
from meltrec.rng import Purpose, numpy_stream, torch_stream
from meltrec.train.checkpoint import Checkpoint, save_checkpoint
from meltrec.train.curriculum import CurriculumState
from meltrec.train.optimizer import make_optimizer, optimizer_step

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from meltrec.config import EncoderConfig
    from meltrec.data.index import Subsequence
    from meltrec.data.split import HeadTailPartition, SplitDataset
    from meltrec.model.params import ModelParams


__all__ = (
    "Stage",
    "Trainer",
    "TrainingResult",
    "pretrain",
    "train_melt",
    "training_negatives",
)

logger = logging.getLogger(__name__)

Stage = Literal["pretrain", "melt"]


def training_negatives(
    sequence: Sequence[int],
    n_items: int,
    rng: np.random.Generator,
) -> list[int]:
    """
    One negative per next-item position of a training sequence.

    Negatives avoid every item of the sequence; if it covers the whole
    catalogue, only the positive of each position is avoided.
    """
    positives = sequence[1:]
    allowed = np.setdiff1d(np.arange(n_items), np.asarray(sequence, dtype=np.int64))
    if len(allowed):
        return rng.choice(allowed, size=len(positives)).tolist()
    draws = rng.integers(0, n_items - 1, size=len(positives)).tolist()
    return [draw + (draw >= positive) for draw, positive in zip(draws, positives)]


@dataclass
class TrainingResult:
    """Best parameters of a stage and its per-epoch history."""

    params: ModelParams
    optimizer_state: dict[str, Any] | None
    best_epoch: int
    best_valid_hr: float
    history: list[dict[str, Any]] = field(default_factory=list)


class Trainer:
    """
    Runs the epochs of one stage.

    Parameters
    ----------
    params
        Parameters to train in place.
    split, partition, index
        The prepared dataset.
    config
        Training hyperparameters.
    stage
        `"pretrain"` trains the backbone alone; `"melt"` adds the branches.
    first_epoch
        Global number of the stage's first epoch; random streams are keyed
        on it.
    eval_config
        Negatives, cutoff and seed of the per-epoch validation.
    checkpoint_dir
        Where `<stage>-last.pt` (every epoch) and the best checkpoint go.
    log_path
        JSON-lines file receiving one record per epoch.

    """

    def __init__(
        self,
        params: ModelParams,
        split: SplitDataset,
        partition: HeadTailPartition,
        index: SubsequenceIndex,
        config: TrainConfig,
        *,
        stage: Stage,
        first_epoch: int = 0,
        optimizer_state: dict[str, Any] | None = None,
        eval_config: EvalConfig | None = None,
        checkpoint_dir: Path | None = None,
        log_path: Path | None = None,
        progress: bool = False,
    ) -> None:
        self.params = params
        self.split = split
        self.partition = partition
        self.index = index
        self.config = config
        self.stage = stage
        self.first_epoch = first_epoch
        self.optimizer = make_optimizer(params, config)
        if optimizer_state is not None:
            self.optimizer.load_state_dict(optimizer_state)
        eval_config = eval_config or EvalConfig()
        self.eval_config = eval_config.model_copy(update={"target": "validation"})
        self.checkpoint_dir = checkpoint_dir
        self.log_path = log_path
        self.progress = progress
        self.epochs = config.pretrain_epochs if stage == "pretrain" else config.e_max
        self.history: list[dict[str, Any]] = []
        self.next_epoch = 0
        self.best_epoch = -1
        self.best_valid_hr = -math.inf
        self.best_params: dict[str, torch.Tensor] | None = None
        self.best_optimizer: dict[str, Any] | None = None
        self.users = split.users
        self.n_batches = math.ceil(len(self.users) / config.batch_size)

    @property
    def melt(self) -> bool:
        """Whether the distillation branches take part."""
        return self.stage == "melt"

    def resume(self, checkpoint: Checkpoint) -> None:
        """Continue after the last epoch recorded in a `<stage>-last.pt` checkpoint."""
        extra = checkpoint.extra
        if extra.get("stage") != self.stage or "best_params" not in extra:
            msg = f"Checkpoint is not a resumable {self.stage} checkpoint"
            raise CheckpointError(msg)
        if checkpoint.rng_state.get("seed") != self.config.seed:
            msg = (
                f"Checkpoint was trained with seed {checkpoint.rng_state.get('seed')}, "
                f"not {self.config.seed}"
            )
            raise CheckpointError(msg)
        self.params.load_state_dict(checkpoint.params.state_dict())
        if checkpoint.optimizer_state is not None:
            self.optimizer.load_state_dict(checkpoint.optimizer_state)
        self.next_epoch = checkpoint.epoch + 1
        self.history = list(extra.get("history", []))
        self.best_epoch = int(extra["best_epoch"])
        self.best_valid_hr = float(extra["best_valid_hr"])
        self.best_params = extra["best_params"]
        self.best_optimizer = extra.get("best_optimizer")
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text(
                "".join(json.dumps(record) + "\n" for record in self.history),
                encoding="utf-8",
            )
        logger.info("Resuming %s after epoch %d", self.stage, checkpoint.epoch)

    def run(self) -> TrainingResult:
        """Train the remaining epochs and return the best-validation parameters."""
        if self.next_epoch == 0 and self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text("", encoding="utf-8")
        for epoch in range(self.next_epoch, self.epochs):
            self.run_epoch(epoch)
        if self.best_params is not None:
            self.params.load_state_dict(self.best_params)
        logger.info(
            "Best %s epoch: %d (validation HR@%d %.4f)",
            self.stage,
            self.best_epoch,
            self.eval_config.k,
            self.best_valid_hr,
        )
        return TrainingResult(
            params=self.params,
            optimizer_state=self.best_optimizer,
            best_epoch=self.best_epoch,
            best_valid_hr=self.best_valid_hr,
            history=self.history,
        )

    def warm_start(self) -> None:
        """
        Fit the generators of the weighted branches by ridge regression.

        The user generator maps head users' recent-item encodings to their
        full-sequence encodings and the item generator maps head items'
        full-set contextualized representations to their embeddings, both
        under the current encoder. Branches with zero weight keep their
        generators untouched.
        """
        config = self.config
        if not (self.melt and config.warm_start_generators):
            return
        if config.user_branch and config.lambda_u > 0 and self.partition.head_users:
            self._fit_user_generator()
        if config.item_branch and config.lambda_i > 0 and self.partition.head_items:
            self._fit_item_generator()

    def _fit_user_generator(self) -> None:
        config, params = self.config, self.params
        head_users = sorted(self.partition.head_users)
        rng = numpy_stream(config.seed, Purpose.WARM_START, self.first_epoch, 0)
        recent = rng.integers(1, self.partition.kappa_u + 1, size=len(head_users)).tolist()
        sequences = [self.split.train_sequences[user].items for user in head_users]
        partial = [truncate_recent(items, r) for items, r in zip(sequences, recent)]
        fit_generator(
            params.user_generator,
            encode_many(params, partial),
            encode_many(params, sequences),
            ridge=config.warm_start_ridge,
        )
        logger.info("Fitted the user generator on %d head users", len(head_users))

    def _fit_item_generator(self) -> None:
        config, params = self.config, self.params
        head_items = sorted(item for item in self.partition.head_items if self.index.get(item))
        if not head_items:
            return
        cap = config.max_context_subsequences
        groups: list[list[Subsequence]] = []
        for item in head_items:
            pool = self.index.get(item)
            if len(pool) > cap:
                rng = numpy_stream(config.seed, Purpose.WARM_START, self.first_epoch, 1, item)
                pool = [pool[i] for i in sorted(rng.choice(len(pool), cap, replace=False))]
            groups.append(pool)
        enhance = config.mutual_enhancement and config.enhance_head_item_inputs
        with torch.no_grad():
            reps = contextualized_item_reps(
                params,
                groups,
                enhance_subsequences=enhance,
                beta=config.beta,
                full_user_reps=full_user_reps(params, self.split) if enhance else None,
            )
        targets = params.item_embeddings[torch.tensor(head_items, dtype=torch.long)]
        fit_generator(params.item_generator, reps, targets, ridge=config.warm_start_ridge)
        logger.info("Fitted the item generator on %d head items", len(head_items))

    def run_epoch(self, epoch: int) -> dict[str, Any]:
        """Train one epoch, validate, log and checkpoint."""
        started = time.perf_counter()
        if epoch == 0:
            self.warm_start()
        global_epoch = self.first_epoch + epoch
        seed = self.config.seed
        order = numpy_stream(seed, Purpose.SHUFFLE, global_epoch).permutation(
            np.asarray(self.users, dtype=np.int64)
        ).tolist()
        cache = self._tail_item_cache(global_epoch)
        curriculum = CurriculumState.from_partition(
            self.partition,
            epoch,
            self.config.e_max,
            enabled=self.config.curriculum,
        )
        head_items = self._head_item_schedule(global_epoch)

        totals = dict.fromkeys(("rec", "user_branch", "item_branch", "total"), 0.0)
        batches = range(self.n_batches)
        for batch in tqdm(batches, desc=f"{self.stage} {epoch}", disable=not self.progress):
            users = order[batch * self.config.batch_size : (batch + 1) * self.config.batch_size]
            losses = self.step(global_epoch, batch, users, head_items[batch], cache, curriculum)
            values = losses.as_floats()
            if not math.isfinite(values["total"]):
                msg = f"Training loss became {values['total']}"
                raise TrainingError(msg, epoch)
            for name, value in values.items():
                totals[name] += value

        report = evaluate(
            self.params,
            self.split,
            self.partition,
            self.index,
            self.eval_config,
            context=self.inference_context(),
        )
        valid_hr = report.overall.hr or 0.0
        record: dict[str, Any] = {
            "stage": self.stage,
            "epoch": epoch,
            "global_epoch": global_epoch,
            **{name: value / max(self.n_batches, 1) for name, value in totals.items()},
            "valid_hr": report.overall.hr,
            "valid_ndcg": report.overall.ndcg,
            "seconds": round(time.perf_counter() - started, 3),
        }
        self.history.append(record)
        if valid_hr > self.best_valid_hr:
            self.best_epoch = epoch
            self.best_valid_hr = valid_hr
            self.best_params = copy.deepcopy(self.params.state_dict())
            self.best_optimizer = copy.deepcopy(self.optimizer.state_dict())
            self._save_best(global_epoch)
        self._write_record(record)
        self._save_last(epoch, global_epoch)
        logger.info(
            "%s epoch %d: loss %.4f (rec %.4f), validation HR@%d %.4f",
            self.stage,
            epoch,
            record["total"],
            record["rec"],
            self.eval_config.k,
            valid_hr,
        )
        return record

    def step(
        self,
        global_epoch: int,
        batch: int,
        users: Sequence[int],
        head_items: Sequence[int],
        cache: TailItemReps,
        curriculum: CurriculumState,
    ) -> LossBreakdown:
        """One optimizer step on a batch of users and a batch of head items."""
        config, params, seed = self.config, self.params, self.config.seed
        sequences = [self.split.train_sequences[user].items for user in users]
        negative_rng = numpy_stream(seed, Purpose.NEGATIVES, global_epoch, batch)
        negatives = [
            training_negatives(items, params.n_items, negative_rng) for items in sequences
        ]

        self.optimizer.zero_grad(set_to_none=True)
        rec_embeddings = None
        if self.melt:
            rec_embeddings = enhanced_item_table(
                params, cache, config.gamma, detach_generator=True
            )
        rec = rec_loss_batch(
            params,
            sequences,
            negatives,
            embeddings=rec_embeddings,
            train_mode=True,
            generator=torch_stream(seed, Purpose.DROPOUT, global_epoch, batch),
        )
        zero = rec.new_zeros(())
        user_loss = item_loss = zero
        lambda_u = lambda_i = 0.0
        if self.melt and config.user_branch:
            lambda_u = config.lambda_u
            with torch.set_grad_enabled(lambda_u > 0):
                user_loss = self._user_branch(global_epoch, batch, users, cache, curriculum)
        if self.melt and config.item_branch:
            lambda_i = config.lambda_i
            with torch.set_grad_enabled(lambda_i > 0):
                item_loss = self._item_branch(global_epoch, batch, head_items, curriculum)

        losses = total_loss(rec, user_loss, item_loss, lambda_u, lambda_i)
        if not torch.isfinite(losses.total):
            return losses
        losses.total.backward()
        optimizer_step(params, self.optimizer)
        return losses

    def inference_context(self) -> InferenceContext:
        """Scoring tables of the current parameters for this stage."""
        if not self.melt:
            return InferenceContext.backbone(self.params)
        return build_inference(
            self.params, self.split, self.partition, self.index, self.config
        )

    def _user_branch(
        self,
        global_epoch: int,
        batch: int,
        users: Sequence[int],
        cache: TailItemReps,
        curriculum: CurriculumState,
    ) -> torch.Tensor:
        config, params = self.config, self.params
        head_users = [user for user in users if user in self.partition.head_users]
        rng = numpy_stream(config.seed, Purpose.USER_BRANCH, global_epoch, batch)
        recent = rng.integers(1, self.partition.kappa_u + 1, size=len(head_users)).tolist()
        sequences = [self.split.train_sequences[user].items for user in head_users]
        weights = [curriculum.user_weight(len(items)) for items in sequences]
        embeddings = None
        if config.mutual_enhancement:
            embeddings = enhanced_item_table(params, cache, config.gamma)
        return user_branch_losses(
            params,
            sequences,
            recent,
            weights,
            embeddings=embeddings,
            train_mode=True,
            generator=torch_stream(config.seed, Purpose.BRANCH_DROPOUT, global_epoch, batch),
        )

    def _item_branch(
        self,
        global_epoch: int,
        batch: int,
        items: Sequence[int],
        curriculum: CurriculumState,
    ) -> torch.Tensor:
        config, params = self.config, self.params
        rng = numpy_stream(config.seed, Purpose.ITEM_BRANCH, global_epoch, batch)
        ks = rng.integers(1, self.partition.kappa_i + 1, size=len(items)).tolist()
        samples = [sample_subsequences(self.index, item, k, rng) for item, k in zip(items, ks)]
        weights = [curriculum.item_weight(self.index.size(item)) for item in items]
        enhance = config.mutual_enhancement and config.enhance_head_item_inputs
        owner_reps = None
        if enhance:
            owners = sorted({s.owner_user for group in samples for s in group})
            reps = encode_many(
                params, [self.split.train_sequences[owner].items for owner in owners]
            )
            owner_reps = dict(zip(owners, reps))
        return item_branch_losses(
            params,
            items,
            samples,
            weights,
            enhance_subsequences=enhance,
            beta=config.beta,
            full_user_reps=owner_reps,
        )

    def _tail_item_cache(self, global_epoch: int) -> TailItemReps:
        config, params = self.config, self.params
        if not (self.melt and config.item_branch and self.partition.tail_items):
            return TailItemReps.empty(params)
        with torch.no_grad():
            return tail_item_reps(
                params,
                self.index,
                self.partition.tail_items,
                cap=config.max_context_subsequences,
                rng_for=lambda item: numpy_stream(
                    config.seed, Purpose.CONTEXT, global_epoch, item
                ),
                enhance_subsequences=config.mutual_enhancement,
                beta=config.beta,
                full_user_reps=(
                    full_user_reps(params, self.split) if config.mutual_enhancement else None
                ),
            )

    def _head_item_schedule(self, global_epoch: int) -> list[list[int]]:
        """Per batch, a slice of the shuffled head items, cycled to cover them all."""
        if not (self.melt and self.config.item_branch and self.partition.head_items):
            return [[] for _ in range(self.n_batches)]
        rng = numpy_stream(self.config.seed, Purpose.ITEM_SCHEDULE, global_epoch)
        items = rng.permutation(np.asarray(sorted(self.partition.head_items))).tolist()
        chunk = math.ceil(len(items) / self.n_batches)
        return [
            [items[(batch * chunk + offset) % len(items)] for offset in range(chunk)]
            for batch in range(self.n_batches)
        ]

    def _rng_state(self, global_epoch: int) -> dict[str, int]:
        return {"seed": self.config.seed, "epoch": global_epoch + 1}

    def _save_best(self, global_epoch: int) -> None:
        if self.checkpoint_dir is None:
            return
        save_checkpoint(
            self.checkpoint_dir / f"{self.stage}.pt",
            self.params,
            self.optimizer,
            global_epoch,
            rng_state=self._rng_state(global_epoch),
            extra={"stage": self.stage, "valid_hr": self.best_valid_hr},
        )

    def _save_last(self, epoch: int, global_epoch: int) -> None:
        if self.checkpoint_dir is None:
            return
        save_checkpoint(
            self.checkpoint_dir / f"{self.stage}-last.pt",
            self.params,
            self.optimizer,
            epoch,
            rng_state=self._rng_state(global_epoch),
            extra={
                "stage": self.stage,
                "first_epoch": self.first_epoch,
                "best_epoch": self.best_epoch,
                "best_valid_hr": self.best_valid_hr,
                "best_params": self.best_params,
                "best_optimizer": self.best_optimizer,
                "history": self.history,
            },
        )

    def _write_record(self, record: dict[str, Any]) -> None:
        if self.log_path is None:
            return
        with self.log_path.open("a", encoding="utf-8") as log:
            log.write(json.dumps(record) + "\n")


def pretrain(
    split: SplitDataset,
    config: TrainConfig,
    encoder_config: EncoderConfig,
    *,
    partition: HeadTailPartition | None = None,
    params: ModelParams | None = None,
    optimizer_state: dict[str, Any] | None = None,
    first_epoch: int = 0,
    resume_from: Checkpoint | None = None,
    eval_config: EvalConfig | None = None,
    checkpoint_dir: Path | None = None,
    log_path: Path | None = None,
    progress: bool = False,
) -> TrainingResult:
    """
    Fit the backbone with the next-item loss for `config.pretrain_epochs` epochs.

    Fresh parameters are drawn from `config.seed` unless `params` is given.
    The generators are never touched.
    """
    if encoder_config.n_items is None:
        encoder_config = encoder_config.model_copy(update={"n_items": split.n_items})
    if params is None:
        params = initialize_params(encoder_config, seed=config.seed)
    else:
        params = copy.deepcopy(params)
    trainer = Trainer(
        params,
        split,
        partition or partition_head_tail(split, config.alpha),
        SubsequenceIndex(),
        config,
        stage="pretrain",
        first_epoch=first_epoch,
        optimizer_state=optimizer_state,
        eval_config=eval_config,
        checkpoint_dir=checkpoint_dir,
        log_path=log_path,
        progress=progress,
    )
    if resume_from is not None:
        trainer.resume(resume_from)
    return trainer.run()


def _check_partition(
    partition: HeadTailPartition,
    index: SubsequenceIndex,
    config: TrainConfig,
) -> None:
    if config.user_branch and partition.head_users and partition.kappa_u < 1:
        msg = "The shortest head user has no training items; R cannot be sampled"
        raise PartitionError(msg)
    if config.item_branch and partition.head_items:
        if partition.kappa_i < 1:
            msg = "The least popular head item has no training interactions; K cannot be sampled"
            raise PartitionError(msg)
        sizes = [index.size(item) for item in partition.head_items]
        if (min(sizes), max(sizes)) != (partition.L_min_item, partition.L_max_item):
            msg = "The partition's item bounds were not computed from this subsequence index"
            raise PartitionError(msg)


def train_melt(
    split: SplitDataset,
    partition: HeadTailPartition,
    index: SubsequenceIndex,
    pretrained: ModelParams,
    config: TrainConfig,
    *,
    optimizer_state: dict[str, Any] | None = None,
    first_epoch: int | None = None,
    resume_from: Checkpoint | None = None,
    eval_config: EvalConfig | None = None,
    checkpoint_dir: Path | None = None,
    log_path: Path | None = None,
    progress: bool = False,
) -> TrainingResult:
    """
    Fine-tune a pretrained backbone with both branches for `config.e_max` epochs.

    `pretrained` is not modified. Epochs are numbered after the pretraining
    epochs unless `first_epoch` says otherwise.
    """
    _check_partition(partition, index, config)
    trainer = Trainer(
        copy.deepcopy(pretrained),
        split,
        partition,
        index,
        config,
        stage="melt",
        first_epoch=config.pretrain_epochs if first_epoch is None else first_epoch,
        optimizer_state=optimizer_state,
        eval_config=eval_config,
        checkpoint_dir=checkpoint_dir,
        log_path=log_path,
        progress=progress,
    )
    if resume_from is not None:
        trainer.resume(resume_from)
    return trainer.run()
