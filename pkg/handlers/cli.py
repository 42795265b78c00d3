# Command-line surface for the prosody toolkit.
# One click group with a subcommand per workflow; ``dispatch`` maps outcomes to exit codes
# (0 success, 1 runtime failure, 2 usage error).

import logging
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import click
from pydantic import BaseModel, ValidationError

from logic.agent_training import AgentTraining
from logic.conversion import Converter, evaluate_conversion
from logic.salience_training import SalienceEvaluation, SalienceTraining
from logic.selfcheck import SelfCheck
from services.agent import load_agent, save_agent
from services.corpus import read_manifest, split_entries
from services.models import AgentConfig, CorpusEntry, RunConfig, SalienceConfig, SyntheticSpec, TimeStretchMap, WsolaParams
from services.reports import RunOutputs, emit_reports
from services.salience import load_salience, save_salience
from services.signal_io import read_wav, write_wav
from services.synthetic import gen_corpus
from services.wsola import time_stretch
from utils.errors import ProsodyError
from utils.file_utils import ensure_dir, file_sha256
from utils.validator import OverrideError, apply_overrides, parse_emotion, parse_overrides, unknown_keys

logger = logging.getLogger(__name__)

# Path keys whose file contents are fingerprinted into config.json
INPUT_KEYS = ("manifest", "in", "model", "salience", "agent")

PROG_NAME = "prosody"


class SelfCheckFailed(ProsodyError):
    """At least one selfcheck reported a failure."""


# ---------------- Shared helpers ----------------
def _resolve(
    subcommand: str,
    pairs: Sequence[str],
    defaults: Sequence[BaseModel],
) -> Tuple[Dict[str, str], List[BaseModel]]:
    """Parse ``--set`` pairs and apply them to each default config; unknown keys are usage errors."""
    overrides = parse_overrides(pairs)
    unknown = unknown_keys(overrides, [type(m) for m in defaults])
    if unknown:
        raise OverrideError(f"{subcommand}: unknown override key(s): {', '.join(unknown)}")
    try:
        resolved = [apply_overrides(m, overrides) for m in defaults]
    except ValidationError as e:
        raise OverrideError(f"{subcommand}: invalid override value: {e.errors()[0]['msg']}") from e
    return overrides, resolved


def _run_config(ctx: click.Context, subcommand: str, paths: Dict[str, str], seed: int,
                overrides: Dict[str, str], **resolved: BaseModel) -> RunConfig:
    return RunConfig(
        subcommand=subcommand,
        paths={k: v for k, v in paths.items() if v},
        seed=seed,
        overrides=overrides,
        verbosity=ctx.obj.get("verbosity", "INFO") if ctx.obj else "INFO",
        resolved={k: m.model_dump() for k, m in resolved.items()},
        checksums={k: file_sha256(paths[k]) for k in INPUT_KEYS if paths.get(k) and os.path.isfile(paths[k])},
    )


def _select_split(entries: List[CorpusEntry], split: str, cfg: SalienceConfig, seed: int) -> List[CorpusEntry]:
    if split == "all":
        return entries
    train, val, test = split_entries(entries, cfg.val_fraction, cfg.test_fraction, seed)
    chosen = {"train": train, "val": val, "test": test}[split]
    # Tiny corpora can leave a split empty
    return chosen or entries


def seed_option(f):
    return click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")(f)


def set_option(f):
    return click.option(
        "--set", "overrides", multiple=True, metavar="KEY=VALUE",
        help="Hyperparameter override; repeatable.",
    )(f)


# ---------------- Command group ----------------
@click.group(name=PROG_NAME)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.option("-q", "--quiet", is_flag=True, help="Warnings and errors only.")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool) -> None:
    """Emotional prosody modification: corpus, saliency, agent, conversion."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.getLogger().level
    logging.getLogger().setLevel(level)
    ctx.ensure_object(dict)
    ctx.obj["verbosity"] = logging.getLevelName(logging.getLogger().getEffectiveLevel())


@cli.command("gen-corpus")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Corpus directory.")
@click.option("--n-per-class", type=click.IntRange(min=1), default=100, show_default=True)
@seed_option
@set_option
@click.pass_context
def gen_corpus_cmd(ctx, out_dir: str, n_per_class: int, seed: int, overrides: Tuple[str, ...]) -> None:
    """Write a synthetic labeled corpus and its manifest."""
    _, (spec,) = _resolve("gen-corpus", overrides, [SyntheticSpec()])
    manifest = gen_corpus(spec, n_per_class, out_dir, seed)
    click.echo(manifest)


@cli.command("train-salience")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Run directory.")
@seed_option
@set_option
@click.pass_context
def train_salience_cmd(ctx, manifest: str, out_dir: str, seed: int, overrides: Tuple[str, ...]) -> None:
    """Train the saliency predictor; evaluate on the held-out test split."""
    pairs, (cfg,) = _resolve("train-salience", overrides, [SalienceConfig()])
    entries = read_manifest(manifest)
    train, val, test = split_entries(entries, cfg.val_fraction, cfg.test_fraction, seed)
    ensure_dir(out_dir)

    result = SalienceTraining(cfg, seed).run(train, val, checkpoint_dir=out_dir)
    model_path = os.path.join(out_dir, "salience.prsm")
    save_salience(model_path, result.store, cfg, {"seed": seed})

    outputs = RunOutputs(
        config=_run_config(ctx, "train-salience", {"manifest": manifest, "out": out_dir, "model": model_path},
                           seed, pairs, salience=cfg),
        training_log=result.log,
    )
    if test:
        evaluation = SalienceEvaluation(cfg).run(result.store, test)
        outputs.metrics = evaluation.metrics
        outputs.confusion = evaluation.confusion
    emit_reports(outputs, out_dir)
    click.echo(model_path)


@cli.command("eval-salience")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--split", type=click.Choice(["test", "val", "train", "all"]), default="test", show_default=True)
@seed_option
@click.pass_context
def eval_salience_cmd(ctx, manifest: str, model_path: str, out_dir: str, split: str, seed: int) -> None:
    """Top-1/top-2 accuracy, F1 scores and confusion matrix on a manifest split."""
    store, cfg = load_salience(model_path)
    entries = _select_split(read_manifest(manifest), split, cfg, seed)
    evaluation = SalienceEvaluation(cfg).run(store, entries)
    outputs = RunOutputs(
        config=_run_config(ctx, "eval-salience", {"manifest": manifest, "model": model_path, "out": out_dir,
                                                   "split": split}, seed, {}, salience=cfg),
        metrics=evaluation.metrics,
        confusion=evaluation.confusion,
    )
    emit_reports(outputs, out_dir)
    for name, value in evaluation.metrics.items():
        click.echo(f"{name},{value:.6f}")


@cli.command("train-agent")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--salience", "salience_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@seed_option
@set_option
@click.pass_context
def train_agent_cmd(ctx, manifest: str, salience_path: str, out_dir: str, seed: int, overrides: Tuple[str, ...]) -> None:
    """Train the actor-critic agent on the training split."""
    pairs, (cfg,) = _resolve("train-agent", overrides, [AgentConfig()])
    salience, salience_cfg = load_salience(salience_path)
    train = _select_split(read_manifest(manifest), "train", salience_cfg, seed)
    ensure_dir(out_dir)

    result = AgentTraining(cfg, salience, salience_cfg, seed).run(train)
    model_path = os.path.join(out_dir, "agent.prsm")
    save_agent(model_path, result.store, cfg, {"seed": seed})

    rewards = result.rewards
    metrics = {
        "steps": float(cfg.steps),
        "updates": float(rewards.size),
        "skipped": float(result.skipped),
        "mean_reward": float(rewards.mean()) if rewards.size else 0.0,
        "final_reward_ma": float(result.log[-1]["reward_ma"]) if result.log else 0.0,
    }
    outputs = RunOutputs(
        config=_run_config(ctx, "train-agent", {"manifest": manifest, "salience": salience_path, "out": out_dir,
                                                 "model": model_path}, seed, pairs,
                           agent=cfg, salience=salience_cfg),
        metrics=metrics,
        training_log=result.log,
    )
    emit_reports(outputs, out_dir)
    click.echo(model_path)


@cli.command("convert")
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), help="Single input WAV.")
@click.option("--target", "target_name", type=str, help="neutral|angry|happy|sad|fearful")
@click.option("--agent", "agent_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--salience", "salience_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Output WAV (single input).")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), help="Evaluate over a manifest instead.")
@click.option("--split", type=click.Choice(["test", "val", "train", "all"]), default="test", show_default=True)
@click.option("--report-dir", type=click.Path(file_okay=False), help="Write CSV reports here.")
@click.option("--greedy", is_flag=True, help="Argmax factors instead of sampling.")
@click.option("--random", "random_actions", is_flag=True, help="Uniform random factors (baseline).")
@seed_option
@click.pass_context
def convert_cmd(ctx, in_path, target_name, agent_path, salience_path, out_path, manifest, split, report_dir,
                greedy, random_actions, seed) -> None:
    """Convert one utterance, or every utterance of a manifest split, toward a target emotion."""
    if greedy and random_actions:
        raise click.UsageError("--greedy and --random are exclusive")
    if bool(in_path) == bool(manifest):
        raise click.UsageError("give exactly one of --in or --manifest")
    mode = "random" if random_actions else "greedy" if greedy else "sample"
    target = parse_emotion(target_name) if target_name else None
    agent, agent_cfg = load_agent(agent_path)
    salience, salience_cfg = load_salience(salience_path)
    paths = {"in": in_path, "out": out_path, "manifest": manifest, "agent": agent_path,
             "salience": salience_path, "report_dir": report_dir}

    if manifest:
        entries = _select_split(read_manifest(manifest), split, salience_cfg, seed)
        evaluation = evaluate_conversion(entries, agent, agent_cfg, salience, salience_cfg, mode, seed, target)
        if report_dir:
            emit_reports(RunOutputs(
                config=_run_config(ctx, "convert", {**paths, "split": split, "mode": mode}, seed, {},
                                   agent=agent_cfg, salience=salience_cfg),
                metrics=evaluation.metrics,
                score_changes=evaluation.rows,
            ), report_dir)
        for name, value in evaluation.metrics.items():
            click.echo(f"{name},{value:.6f}")
        return

    if target is None or not out_path:
        raise click.UsageError("--in requires --target and --out")
    y = read_wav(in_path)
    modified, report = Converter(agent, agent_cfg, salience, salience_cfg, mode).process(y, target, seed)
    write_wav(out_path, modified)
    if report_dir:
        emit_reports(RunOutputs(
            config=_run_config(ctx, "convert", {**paths, "mode": mode}, seed, {}, agent=agent_cfg, salience=salience_cfg),
            segments=report.segments,
        ), report_dir)

    click.echo("segment_start,segment_end,alpha,beta,gain")
    for row in report.segments:
        click.echo(f"{row['segment_start']},{row['segment_end']},{row['alpha']:.2f},{row['beta']:.2f},{row['gain']:.2f}")
    click.echo("before," + ",".join(f"{s:.6f}" for s in report.before))
    click.echo("after," + ",".join(f"{s:.6f}" for s in report.after))
    click.echo(f"reward,{report.reward:.6f}")
    if report.no_segments:
        click.echo("no_segments,1")


@cli.command("stretch")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--factor", required=True, type=click.FloatRange(min=0.0, min_open=True))
@click.option("--window", type=int, default=WsolaParams().window_len, show_default=True)
@click.option("--search", type=int, default=WsolaParams().search_radius, show_default=True)
def stretch_cmd(in_path: str, out_path: str, factor: float, window: int, search: int) -> None:
    """Uniform WSOLA time stretch of a WAV file."""
    y = read_wav(in_path)
    params = WsolaParams.for_window(window, search)
    z = time_stretch(y, TimeStretchMap.uniform(len(y), factor), params)
    write_wav(out_path, z)
    logger.info(f"[stretch] factor={factor} samples_in={len(y)} samples_out={len(z)}")


@cli.command("selfcheck")
@seed_option
def selfcheck_cmd(seed: int) -> None:
    """Bandit estimator, COLA, prior-KL oracle and run-length checks."""
    results = SelfCheck(seed).run()
    for r in results:
        click.echo(f"{'pass' if r.passed else 'FAIL'} {r.name} {r.detail}")
    if not all(r.passed for r in results):
        raise SelfCheckFailed(f"{sum(not r.passed for r in results)} check(s) failed")


# ---------------- Dispatch ----------------
def dispatch(argv: Optional[Sequence[str]] = None, prog_name: str = PROG_NAME) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    args = list(sys.argv[1:] if argv is None else argv)
    if not args:
        with click.Context(cli, info_name=prog_name) as ctx:
            click.echo(ctx.get_help(), err=True)
        return 2
    try:
        cli.main(args=args, prog_name=prog_name, standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted.", err=True)
        return 1
    except OverrideError as e:
        click.echo(f"Usage error: {e}", err=True)
        return 2
    except (ProsodyError, OSError, ValidationError) as e:
        logger.debug("command failed", exc_info=True)
        click.echo(f"Error: {e.__class__.__name__}: {str(e).splitlines()[0] if str(e) else ''}", err=True)
        return 1
    return 0
