"""
The `meltrec` command line.

Every command works inside a workdir laid out as::

    <workdir>/
        config.json      effective configuration of the last command
        .lock            present while a command runs
        data/            prepared dataset
        checkpoints/     pretrain.pt, melt.pt and <stage>-last.pt
        logs/            <stage>.jsonl training logs
        reports/         <stage>-<target>-seed<seed>{.json,-summary.csv,-cells.csv}
"""

from __future__ import annotations

import contextlib
import logging
import re
import sys
from collections import defaultdict
from pathlib import Path
from typing import TYPE_CHECKING, Any

import click
import pandas as pd

from meltrec.config import SCHEMA_VERSION, Environment, RunConfig
from meltrec.data import (
    PreparedData,
    build_sequences,
    build_subsequence_index,
    core_filter,
    dataset_stats,
    format_interactions,
    generate_synthetic,
    group_sizes,
    leave_one_out_split,
    load_prepared,
    parse_interactions,
    partition_head_tail,
    save_prepared,
)
from meltrec.errors import CheckpointError, DataError, MeltError, WorkdirError
from meltrec.evaluation import (
    InferenceContext,
    average_summaries,
    build_inference,
    evaluate,
    render_table,
    summary_table,
    write_report,
)
from meltrec.train import load_checkpoint, pretrain, train_melt

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence


__all__ = ("cli", "main")

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
SEED_SUFFIX = re.compile(r"-seed\d+$")


class Workdir:
    """Paths of a workdir."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.config = root / "config.json"
        self.lock = root / ".lock"
        self.data = root / "data"
        self.checkpoints = root / "checkpoints"
        self.logs = root / "logs"
        self.reports = root / "reports"

    @contextlib.contextmanager
    def locked(self) -> Iterator[Workdir]:
        """Hold the workdir lock for the duration of a command."""
        self.root.mkdir(parents=True, exist_ok=True)
        try:
            self.lock.touch(exist_ok=False)
        except FileExistsError:
            msg = (
                f"{self.root} is locked by another meltrec command; "
                f"remove {self.lock} if no command is running"
            )
            raise WorkdirError(msg) from None
        try:
            yield self
        finally:
            self.lock.unlink(missing_ok=True)

    def refuse_existing(self, path: Path, *, force: bool) -> None:
        """Refuse to overwrite `path` unless forced."""
        if path.exists() and not force:
            msg = f"{path} already exists; pass --force to overwrite it"
            raise WorkdirError(msg)


class MeltGroup(click.Group):
    """Command group mapping meltrec errors and usage errors to exit codes."""

    def main(  # type: ignore[override]
        self,
        args: Sequence[str] | None = None,
        prog_name: str | None = None,
        complete_var: str | None = None,
        standalone_mode: bool = True,  # noqa: ARG002, FBT001, FBT002
        **extra: Any,
    ) -> Any:
        """Run the command line; exit 1 on usage or config errors, 2 on data, 3 on numeric."""
        try:
            return super().main(
                args, prog_name, complete_var, standalone_mode=False, **extra
            )
        except MeltError as err:
            click.echo(f"Error: {err}", err=True)
            sys.exit(err.exit_code)
        except click.ClickException as err:
            err.show()
            sys.exit(1)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)


def _resolve_workdir(workdir: Path | None) -> Workdir:
    return Workdir(workdir if workdir is not None else Environment().workdir)


def _load_config(workdir: Workdir, config_path: Path | None, **overrides: Any) -> RunConfig:
    """
    The run configuration: `--config`, else the workdir's `config.json`, else defaults.

    `overrides` maps dotted routes to values; `None` values are ignored.
    """
    if config_path is not None:
        config = RunConfig.config_load(config_path)
    elif workdir.config.exists():
        config = RunConfig.config_load(workdir.config)
    else:
        config = RunConfig(schema_version=SCHEMA_VERSION)
    data = config.config_dump()
    data["workdir"] = str(workdir.root)
    for route, value in overrides.items():
        if value is None:
            continue
        section, _, name = route.partition(".")
        if name:
            data[section][name] = value
        else:
            data[section] = value
    return RunConfig.config_validate(data)


def _stage_of(checkpoint_extra: dict[str, Any]) -> str:
    return str(checkpoint_extra.get("stage", "melt"))


workdir_option = click.option(
    "--workdir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Working directory (default: $MELTREC_WORKDIR or ./workdir).",
)
config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Run configuration file (.json, .toml or .yaml).",
)
force_option = click.option("--force", is_flag=True, help="Overwrite existing outputs.")


@click.group(cls=MeltGroup)
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug output).")
@click.pass_context
def cli(ctx: click.Context, verbose: int) -> None:
    """Long-tail sequential recommendation: prepare, train and evaluate."""
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(format=LOG_FORMAT, level=level, force=True)
    ctx.obj = {"progress": verbose > 0}


@cli.command()
@click.option(
    "--data",
    "data_in",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Tab-separated user, item, timestamp file.",
)
@workdir_option
@config_option
@click.option("--alpha", type=float, default=None, help="Head fraction of users and items.")
@click.option(
    "--include-reversed/--no-include-reversed",
    default=None,
    help="Index reversed subsequences too.",
)
@force_option
def prepare(
    data_in: Path | None,
    workdir: Path | None,
    config_path: Path | None,
    alpha: float | None,
    include_reversed: bool | None,  # noqa: FBT001
    force: bool,  # noqa: FBT001
) -> None:
    """Filter, split, partition and index an interaction log."""
    paths = _resolve_workdir(workdir)
    config = _load_config(
        paths,
        config_path,
        data_in=str(data_in) if data_in is not None else None,
        **{"train.alpha": alpha, "train.include_reversed": include_reversed},
    )
    if config.data_in is None:
        msg = "No interaction log given; pass --data or set data_in in the configuration"
        raise DataError(msg)
    with paths.locked():
        paths.refuse_existing(paths.data, force=force)
        train = config.train
        try:
            with config.data_in.open(encoding="utf-8") as raw:
                log = parse_interactions(raw)
        except OSError as err:
            msg = f"Cannot read {config.data_in}: {err}"
            raise DataError(msg) from err
        log = core_filter(log, train.min_count, iterate=train.iterate_core_filter)
        split = leave_one_out_split(build_sequences(log), n_items=log.n_items)
        index = build_subsequence_index(
            split, train.include_reversed, max_len=config.encoder.max_len
        )
        partition = partition_head_tail(split, train.alpha, index=index)
        stats: dict[str, Any] = {
            **dataset_stats(log),
            **group_sizes(split, partition, config.evaluation.target),
        }
        prepared = PreparedData(split, partition, index, log.user_keys, log.item_keys)
        save_prepared(paths.data, log, prepared, stats)
        config.config_save(paths.config)
    click.echo(pd.DataFrame([stats]).to_string(index=False))


@cli.command()
@config_option
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Where to write the generated log.",
)
@click.option("--seed", type=int, default=None, help="Generator seed.")
@force_option
def synth(
    config_path: Path | None,
    out: Path,
    seed: int | None,
    force: bool,  # noqa: FBT001
) -> None:
    """Generate a long-tailed synthetic interaction log."""
    config = (
        RunConfig.config_load(config_path)
        if config_path is not None
        else RunConfig(schema_version=SCHEMA_VERSION)
    )
    synthetic = config.synthetic
    if seed is not None:
        synthetic = synthetic.model_copy(update={"seed": seed})
        synthetic.check_feasible()
    if out.exists() and not force:
        msg = f"{out} already exists; pass --force to overwrite it"
        raise WorkdirError(msg)
    log = generate_synthetic(synthetic)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(format_interactions(log), encoding="utf-8")
    click.echo(f"Wrote {len(log)} interactions of {log.n_users} users to {out}")


@cli.command("pretrain")
@workdir_option
@config_option
@click.option(
    "--from-checkpoint",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Resume from a pretrain-last.pt checkpoint.",
)
@force_option
@click.pass_obj
def pretrain_command(
    obj: dict[str, Any],
    workdir: Path | None,
    config_path: Path | None,
    from_checkpoint: Path | None,
    force: bool,  # noqa: FBT001
) -> None:
    """Pretrain the backbone encoder with the next-item loss."""
    paths = _resolve_workdir(workdir)
    config = _load_config(paths, config_path)
    with paths.locked():
        prepared = load_prepared(paths.data)
        if from_checkpoint is None:
            paths.refuse_existing(paths.checkpoints / "pretrain.pt", force=force)
        encoder = config.encoder.model_copy(update={"n_items": prepared.split.n_items})
        result = pretrain(
            prepared.split,
            config.train,
            encoder,
            partition=prepared.partition,
            resume_from=load_checkpoint(from_checkpoint) if from_checkpoint else None,
            eval_config=config.evaluation,
            checkpoint_dir=paths.checkpoints,
            log_path=paths.logs / "pretrain.jsonl",
            progress=obj["progress"],
        )
        config.config_save(paths.config)
    click.echo(
        f"Best pretrain epoch: {result.best_epoch} "
        f"(validation HR@{config.evaluation.k} {result.best_valid_hr:.4f})"
    )


@cli.command("train")
@workdir_option
@config_option
@click.option(
    "--from-checkpoint",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Resume from a melt-last.pt checkpoint.",
)
@force_option
@click.pass_obj
def train_command(
    obj: dict[str, Any],
    workdir: Path | None,
    config_path: Path | None,
    from_checkpoint: Path | None,
    force: bool,  # noqa: FBT001
) -> None:
    """Fine-tune the pretrained backbone with both long-tail branches."""
    paths = _resolve_workdir(workdir)
    config = _load_config(paths, config_path)
    with paths.locked():
        prepared = load_prepared(paths.data)
        pretrained_path = paths.checkpoints / "pretrain.pt"
        if not pretrained_path.exists():
            msg = f"No pretrained backbone at {pretrained_path}; run `meltrec pretrain` first"
            raise CheckpointError(msg)
        if from_checkpoint is None:
            paths.refuse_existing(paths.checkpoints / "melt.pt", force=force)
        pretrained = load_checkpoint(pretrained_path)
        result = train_melt(
            prepared.split,
            prepared.partition,
            prepared.index,
            pretrained.params,
            config.train,
            optimizer_state=pretrained.optimizer_state,
            resume_from=load_checkpoint(from_checkpoint) if from_checkpoint else None,
            eval_config=config.evaluation,
            checkpoint_dir=paths.checkpoints,
            log_path=paths.logs / "melt.jsonl",
            progress=obj["progress"],
        )
        config.config_save(paths.config)
    click.echo(
        f"Best training epoch: {result.best_epoch} "
        f"(validation HR@{config.evaluation.k} {result.best_valid_hr:.4f})"
    )


@cli.command("evaluate")
@workdir_option
@config_option
@click.option(
    "--checkpoint",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Checkpoint to evaluate (default: checkpoints/melt.pt).",
)
@click.option(
    "--target",
    type=click.Choice(["validation", "test"]),
    default=None,
    help="Which held-out item to rank.",
)
@click.option("--seed", type=int, default=None, help="Negative sampling seed.")
@force_option
@click.pass_obj
def evaluate_command(  # noqa: PLR0913
    obj: dict[str, Any],
    workdir: Path | None,
    config_path: Path | None,
    checkpoint: Path | None,
    target: str | None,
    seed: int | None,
    force: bool,  # noqa: FBT001
) -> None:
    """Rank held-out items against sampled negatives and write the reports."""
    paths = _resolve_workdir(workdir)
    config = _load_config(
        paths,
        config_path,
        **{"evaluation.target": target, "evaluation.seed": seed},
    )
    with paths.locked():
        prepared = load_prepared(paths.data)
        loaded = load_checkpoint(checkpoint or paths.checkpoints / "melt.pt")
        stage = _stage_of(loaded.extra)
        evaluation = config.evaluation
        stem = f"{stage}-{evaluation.target}-seed{evaluation.seed}"
        paths.refuse_existing(paths.reports / f"{stem}.json", force=force)
        if stage == "pretrain":
            context = InferenceContext.backbone(loaded.params)
        else:
            context = build_inference(
                loaded.params,
                prepared.split,
                prepared.partition,
                prepared.index,
                config.train,
            )
        report = evaluate(
            loaded.params,
            prepared.split,
            prepared.partition,
            prepared.index,
            evaluation,
            context=context,
            progress=obj["progress"],
        )
        write_report(report, paths.reports, stem)
    click.echo(render_table(summary_table(report)))


@cli.command("report")
@workdir_option
@click.option(
    "--cells",
    is_flag=True,
    help="Show the head/tail user-by-item cells instead of the group summary.",
)
def report_command(workdir: Path | None, cells: bool) -> None:  # noqa: FBT001
    """Render report tables, averaging runs that differ only by seed."""
    paths = _resolve_workdir(workdir)
    suffix = "-cells.csv" if cells else "-summary.csv"
    tables = sorted(paths.reports.glob(f"*{suffix}"))
    if not tables:
        msg = f"No reports in {paths.reports}; run `meltrec evaluate` first"
        raise DataError(msg)
    runs: defaultdict[str, list[Path]] = defaultdict(list)
    for table in tables:
        runs[SEED_SUFFIX.sub("", table.name.removesuffix(suffix))].append(table)
    for run, members in runs.items():
        title = run if len(members) == 1 else f"{run} (mean of {len(members)} seeds)"
        click.echo(title)
        click.echo(render_table(average_summaries(members)))
        click.echo()


def main() -> None:
    """Console script entry point."""
    cli()
