"""Command-line entry points: world generation, prior calibration, training,
evaluation, comparison reports, the HTTP service, and a terminal triage
session.

Exit codes: 0 success, 1 user error (bad flags, missing files, mismatched
dimensions), 2 internal error.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from .agent import AgentConfig, train
from .env import EnvConfig, termination
from .evaluate import (
    DqnPolicy,
    GreedyInfoGainPolicy,
    PriorOnlyPolicy,
    render_comparison,
    evaluate_policy,
    load_vignettes,
    vignette_inference,
)
from .greedy import select_question
from .knowledge import AnswerHistory, Belief, KnowledgeMatrix, load_matrix, posterior_from_history, save_matrix
from .priors import PriorConfig, calibrate, empirical_top1
from .qnet import MlpParams, TrainConfig, forward, load_checkpoint, save_checkpoint
from .worldgen import gen_separable_world, gen_world

DEFAULT_SEEDS = "0,1,2,3,4"


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise click.UsageError(f"bad seed list {text!r}; expected e.g. '0,1,2'")


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(s) for s in text.split(",") if s.strip() != "")
    except ValueError:
        raise click.UsageError(f"bad hidden dims {text!r}; expected e.g. '350,350,350'")
    if not dims:
        raise click.UsageError("hidden dims must not be empty")
    return dims


def _load_world(path: str) -> KnowledgeMatrix:
    if not Path(path).exists():
        raise click.UsageError(f"world file not found: {path}")
    return load_matrix(path)


def _load_params(path: str, world: KnowledgeMatrix) -> MlpParams:
    if not Path(path).exists():
        raise click.UsageError(f"checkpoint not found: {path}")
    params = load_checkpoint(path)
    expected_in = world.n_conditions + world.n_symptoms
    if params.n_in != expected_in or params.n_out != world.n_symptoms:
        raise click.UsageError(
            f"checkpoint dims {params.dims} do not fit world "
            f"({expected_in} inputs, {world.n_symptoms} outputs)"
        )
    return params


@click.group()
def cli():
    """Sequential symptom checker toolkit."""


@cli.command("gen-world")
@click.option("--conditions", type=int, required=True, help="Number of conditions.")
@click.option("--symptoms", type=int, required=True, help="Number of symptoms.")
@click.option("--separability", type=float, default=0.7, show_default=True,
              help="Signature-symptom strength in [0, 1].")
@click.option("--kind", type=click.Choice(["random", "separable"]), default="random",
              show_default=True, help="separable = one deterministic signature per condition.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_world_cmd(conditions, symptoms, separability, kind, seed, out):
    """Generate a synthetic condition-symptom world file."""
    if kind == "separable":
        world = gen_separable_world(conditions, symptoms)
    else:
        world = gen_world(conditions, symptoms, separability=separability, seed=seed)
    save_matrix(world, out)
    click.echo(f"wrote {out}: {conditions} conditions x {symptoms} symptoms ({kind})")


@cli.command("calibrate-prior")
@click.option("--world", "world_path", type=str, required=True)
@click.option("--target-top1", type=float, default=0.5, show_default=True)
@click.option("--samples", type=int, default=4000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Optional JSON file for the calibration result.")
def calibrate_prior_cmd(world_path, target_top1, samples, seed, out):
    """Tune the prior generator's concentration to a target top-1 rate."""
    world = _load_world(world_path)
    cfg = PriorConfig(world.n_conditions, target_top1=target_top1, seed=seed)
    concentration = calibrate(cfg, n_samples=samples)
    achieved = empirical_top1(
        PriorConfig(world.n_conditions, concentration=concentration),
        n_samples=10_000,
        rng=np.random.default_rng(seed + 1),
    )
    click.echo(f"concentration: {concentration:.6f}")
    click.echo(f"empirical top-1: {achieved:.4f} (target {target_top1})")
    if out:
        import json

        Path(out).write_text(
            json.dumps(
                {
                    "concentration": concentration,
                    "target_top1": target_top1,
                    "empirical_top1": achieved,
                    "n_conditions": world.n_conditions,
                    "seed": seed,
                },
                indent=1,
            )
        )


@cli.command("train")
@click.option("--world", "world_path", type=str, required=True)
@click.option("--episodes", type=int, default=20_000, show_default=True)
@click.option("--max-env-steps", type=int, default=None,
              help="Optional hard cap on environment steps.")
@click.option("--concentration", type=float, default=1.0, show_default=True,
              help="Prior generator concentration (see calibrate-prior).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--gamma", type=float, default=0.99, show_default=True)
@click.option("--step-size", type=float, default=1e-3, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--optimizer", type=click.Choice(["sgd", "adam"]), default="sgd",
              show_default=True)
@click.option("--hidden", type=str, default="350,350,350", show_default=True)
@click.option("--epsilon-decay-steps", type=int, default=50_000, show_default=True)
@click.option("--target-sync", type=int, default=1000, show_default=True)
@click.option("--warmup", type=int, default=1000, show_default=True)
@click.option("--max-questions", type=int, default=10, show_default=True)
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Checkpoint file to write.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None,
              help="Optional per-episode training log CSV.")
def train_cmd(world_path, episodes, max_env_steps, concentration, seed, gamma,
              step_size, batch_size, optimizer, hidden, epsilon_decay_steps,
              target_sync, warmup, max_questions, threshold, out, log_path):
    """Train the question-asking agent against the simulated patient."""
    world = _load_world(world_path)
    params, log = train(
        world,
        PriorConfig(world.n_conditions, concentration=concentration, seed=seed),
        EnvConfig(max_questions=max_questions, confidence_threshold=threshold),
        TrainConfig(
            gamma=gamma,
            step_size=step_size,
            batch_size=batch_size,
            init_seed=seed,
            optimizer=optimizer,
            hidden_dims=_parse_hidden(hidden),
        ),
        AgentConfig(
            episodes=episodes,
            seed=seed,
            epsilon_decay_steps=epsilon_decay_steps,
            target_sync_period=target_sync,
            warmup=warmup,
            max_env_steps=max_env_steps,
        ),
    )
    save_checkpoint(out, params)
    if log_path:
        from .reports import write_training_log_csv

        write_training_log_csv(log_path, log)
    returns = log.returns()
    tail = returns[-100:] if returns.size else returns
    click.echo(
        f"trained {len(log.episodes)} episodes ({log.env_steps} env steps, "
        f"{log.grad_steps} gradient steps)"
    )
    if tail.size:
        click.echo(f"mean return over last {tail.size} episodes: {tail.mean():.3f}")
    click.echo(f"wrote checkpoint {out}")


def _policy_from_name(name: str, world, checkpoint):
    if name in ("prior", "prior-only"):
        return PriorOnlyPolicy()
    if name == "greedy":
        return GreedyInfoGainPolicy()
    if name == "rl":
        if checkpoint is None:
            raise click.UsageError("--checkpoint is required for the rl policy")
        return DqnPolicy(_load_params(checkpoint, world))
    raise click.UsageError(f"unknown policy {name!r}")


@cli.command("eval")
@click.option("--world", "world_path", type=str, required=True)
@click.option("--policy", type=str, default="greedy", show_default=True,
              help="prior-only, greedy, or rl.")
@click.option("--checkpoint", type=str, default=None)
@click.option("--episodes", type=int, default=1000, show_default=True)
@click.option("--seeds", type=str, default=DEFAULT_SEEDS, show_default=True)
@click.option("--concentration", type=float, default=1.0, show_default=True)
@click.option("--max-questions", type=int, default=10, show_default=True)
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--k", type=int, default=None, help="Print one top-K number and exit.")
@click.option("--vignettes", "vignettes_path", type=str, default=None,
              help="Evaluate deterministically on a vignette file instead of simulation.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Write report.txt, comparison.csv, curves.csv, curves.png here.")
def eval_cmd(world_path, policy, checkpoint, episodes, seeds, concentration,
             max_questions, threshold, k, vignettes_path, out_dir):
    """Evaluate one policy; report top-K accuracy and question counts."""
    world = _load_world(world_path)
    env_cfg = EnvConfig(max_questions=max_questions, confidence_threshold=threshold)
    pol = _policy_from_name(policy, world, checkpoint)
    if vignettes_path:
        if not Path(vignettes_path).exists():
            raise click.UsageError(f"vignette file not found: {vignettes_path}")
        vignettes = load_vignettes(vignettes_path, world)
        report = vignette_inference(pol, vignettes, world, env_cfg)
    else:
        report = evaluate_policy(
            pol,
            world,
            PriorConfig(world.n_conditions, concentration=concentration),
            env_cfg,
            episodes,
            _parse_seeds(seeds),
        )
    if k is not None:
        if k not in report.curves:
            raise click.UsageError(f"--k must be one of {sorted(report.curves)}")
        click.echo(f"top-{k}: {report.topk_mean(k):.4f} ± {report.topk_std(k):.4f}")
        return
    text = render_comparison([report])
    click.echo(text, nl=False)
    if out_dir:
        from .reports import write_report_bundle

        paths = write_report_bundle(out_dir, [report], text)
        click.echo(f"wrote {', '.join(str(p) for p in paths.values())}")


@cli.command("compare")
@click.option("--world", "world_path", type=str, required=True)
@click.option("--checkpoint", type=str, required=True)
@click.option("--episodes", type=int, default=1000, show_default=True)
@click.option("--seeds", type=str, default=DEFAULT_SEEDS, show_default=True)
@click.option("--concentration", type=float, default=1.0, show_default=True)
@click.option("--max-questions", type=int, default=10, show_default=True)
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
def compare_cmd(world_path, checkpoint, episodes, seeds, concentration,
                max_questions, threshold, out_dir):
    """Run prior-only, greedy, and RL side by side and render the comparison."""
    world = _load_world(world_path)
    env_cfg = EnvConfig(max_questions=max_questions, confidence_threshold=threshold)
    prior_cfg = PriorConfig(world.n_conditions, concentration=concentration)
    seed_list = _parse_seeds(seeds)
    reports = [
        evaluate_policy(pol, world, prior_cfg, env_cfg, episodes, seed_list)
        for pol in (
            PriorOnlyPolicy(),
            GreedyInfoGainPolicy(),
            DqnPolicy(_load_params(checkpoint, world)),
        )
    ]
    text = render_comparison(reports)
    click.echo(text, nl=False)
    if out_dir:
        from .reports import write_report_bundle

        paths = write_report_bundle(out_dir, reports, text)
        click.echo(f"wrote {', '.join(str(p) for p in paths.values())}")


@cli.command("serve")
@click.option("--world", "world_path", type=str, required=True)
@click.option("--checkpoint", type=str, default=None)
@click.option("--listen", type=str, default=None,
              help="host:port (defaults to $SYMCHECK_LISTEN or 127.0.0.1:8000).")
@click.option("--max-questions", type=int, default=10, show_default=True)
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--journal", type=click.Path(dir_okay=False), default=None,
              help="Write-through session journal for restart recovery.")
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None,
              help="Static frontend directory to mount at /ui.")
def serve_cmd(world_path, checkpoint, listen, max_questions, threshold, journal, ui_dir):
    """Start the interactive triage HTTP API."""
    import uvicorn

    from .server import build_app

    world = _load_world(world_path)
    params = _load_params(checkpoint, world) if checkpoint else None
    listen = listen or os.environ.get("SYMCHECK_LISTEN", "127.0.0.1:8000")
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise click.UsageError(f"bad listen address {listen!r}; expected host:port")
    app = build_app(
        world,
        rl_params=params,
        env_cfg=EnvConfig(max_questions=max_questions, confidence_threshold=threshold),
        journal_path=journal,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host, port=int(port))


@cli.command("ask")
@click.option("--world", "world_path", type=str, required=True)
@click.option("--policy", type=click.Choice(["greedy", "rl"]), default="greedy",
              show_default=True)
@click.option("--checkpoint", type=str, default=None)
@click.option("--max-questions", type=int, default=10, show_default=True)
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--top", type=int, default=3, show_default=True,
              help="How many differential lines to print after each answer.")
def ask_cmd(world_path, policy, checkpoint, max_questions, threshold, top):
    """Interactive terminal session: answer y/n, watch the differential narrow."""
    world = _load_world(world_path)
    env_cfg = EnvConfig(max_questions=max_questions, confidence_threshold=threshold)
    params = None
    if policy == "rl":
        if checkpoint is None:
            raise click.UsageError("--checkpoint is required for the rl policy")
        params = _load_params(checkpoint, world)

    prior = Belief.uniform(world.n_conditions)
    history = AnswerHistory.empty(world.n_symptoms)
    asked: list[int] = []
    posterior = prior

    def show_differential():
        order = np.argsort(-posterior.probs, kind="stable")[:top]
        for i in order:
            click.echo(f"  {world.condition_names[i]:<30} {100 * posterior.probs[i]:5.1f}%")

    click.echo(f"{world.n_conditions} candidate conditions; answer y or n.")
    show_differential()
    while termination(posterior, len(asked), world.n_symptoms, env_cfg) == "none":
        if policy == "greedy":
            symptom = select_question(posterior, world, set(asked))
        else:
            features = np.concatenate([prior.probs, history.entries.astype(float)])
            q = forward(params, features)
            symptom = int(np.argmax(np.where(history.asked, -np.inf, q)))
        raw = click.prompt(
            f"Q{len(asked) + 1}/{max_questions}: do you have "
            f"'{world.symptom_names[symptom]}'? [y/n]",
            type=click.Choice(["y", "n"], case_sensitive=False),
            show_choices=False,
        )
        answer = "yes" if raw.lower() == "y" else "no"
        history = history.with_answer(symptom, answer)
        asked.append(symptom)
        posterior = posterior_from_history(prior, world, history)
        show_differential()
    reason = termination(posterior, len(asked), world.n_symptoms, env_cfg)
    label = "confidence threshold reached" if reason == "threshold" else "question limit reached"
    click.echo(f"done after {len(asked)} questions: {label}")
    best = int(np.argmax(posterior.probs))
    click.echo(
        f"most likely: {world.condition_names[best]} "
        f"({100 * posterior.probs[best]:.1f}%)"
    )


def main(argv: list[str] | None = None) -> int:
    """Dispatch the CLI; returns the process exit status."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help and friends
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ValueError, KeyError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # internal bug
        click.echo(f"internal error: {exc!r}", err=True)
        return 2


def entrypoint() -> None:
    sys.exit(main())
