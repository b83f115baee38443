"""Evaluation harness: top-K accuracy, question-count curves, policy
comparison tables, and deterministic vignette-driven inference.

Policies are question selectors; conditions are always ranked by the final
Bayesian posterior, never by Q-values (Q-values rank questions, not
diagnoses).  Every evaluation records the posterior ranking after each
question index so accuracy-vs-question-count curves come out alongside the
headline numbers, and the headline equals the curve endpoint by
construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .env import EnvConfig, EnvState, TraceStep, apply_answer, reset, step, termination
from .greedy import select_question
from .knowledge import Belief, KnowledgeMatrix
from .priors import PriorConfig, PriorSample, UniformPriorSource, draw_prior
from .qnet import MlpParams, forward

POLICY_ORDER = ("prior-only", "greedy", "rl")


class QuestionPolicy(Protocol):
    name: str

    def select(
        self, state: EnvState, m: KnowledgeMatrix, rng: np.random.Generator | None
    ) -> int | None:
        """Next symptom to ask, or None to stop asking."""


class PriorOnlyPolicy:
    """Asks nothing; the diagnosis is the prior ranking."""

    name = "prior-only"

    def select(self, state, m, rng):
        return None


class GreedyInfoGainPolicy:
    """Asks the highest expected-information-gain symptom each turn."""

    name = "greedy"

    def select(self, state, m, rng):
        asked = set(np.flatnonzero(state.history.entries).tolist())
        return select_question(state.posterior, m, asked)


class DqnPolicy:
    """Asks the Q-argmax among unasked symptoms (greedy w.r.t. the network)."""

    name = "rl"

    def __init__(self, params: MlpParams):
        self.params = params

    def select(self, state, m, rng):
        q = forward(self.params, state.features())
        masked = np.where(state.history.asked, -np.inf, q)
        return int(np.argmax(masked))


class RandomPolicy:
    """Uniformly random unasked symptom; exercise-the-contract baseline."""

    name = "random"

    def select(self, state, m, rng):
        unasked = np.flatnonzero(~state.history.asked)
        return int(rng.choice(unasked))


def rank_conditions(probs: np.ndarray) -> np.ndarray:
    """Condition indices sorted by descending probability, ties by index."""
    return np.argsort(-probs, kind="stable")


def topk_accuracy(
    rankings: Sequence[Sequence[int]], truths: Sequence[int], k: int
) -> float:
    """Fraction of cases whose truth appears in the first k ranked entries."""
    if len(rankings) == 0:
        raise ValueError("empty input")
    if len(rankings) != len(truths):
        raise ValueError("rankings and truths differ in length")
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for r, t in zip(rankings, truths) if t in list(r)[:k])
    return hits / len(rankings)


@dataclass(frozen=True)
class EvalReport:
    """Per-policy evaluation: headline top-K plus per-question-index curves."""

    policy: str
    seeds: tuple[int, ...]
    n_episodes: int
    topk_by_seed: dict[int, tuple[float, ...]]  # k -> one value per seed
    avg_questions_by_seed: tuple[float, ...]
    curves: dict[int, tuple[float, ...]]  # k -> mean accuracy at index 0..max

    def topk_mean(self, k: int) -> float:
        return float(np.mean(self.topk_by_seed[k]))

    def topk_std(self, k: int) -> float:
        return float(np.std(self.topk_by_seed[k]))

    def avg_questions_mean(self) -> float:
        return float(np.mean(self.avg_questions_by_seed))

    def avg_questions_std(self) -> float:
        return float(np.std(self.avg_questions_by_seed))


def _truth_positions(rankings: list[np.ndarray], truth: int) -> list[int]:
    return [int(np.flatnonzero(r == truth)[0]) for r in rankings]


def run_policy_episode(
    policy: QuestionPolicy,
    m: KnowledgeMatrix,
    sample: PriorSample,
    env_cfg: EnvConfig,
    rng: np.random.Generator | None,
    episode_id: int = 0,
) -> tuple[list[TraceStep], list[np.ndarray]]:
    """Roll one episode; returns the trace and the posterior ranking at every
    question index 0..max_questions (carried forward after termination)."""
    state = reset(m, sample, env_cfg)
    rankings = [rank_conditions(state.posterior.probs)]
    trace: list[TraceStep] = []
    while termination(state.posterior, state.questions_asked, m.n_symptoms, env_cfg) == "none":
        action = policy.select(state, m, rng)
        if action is None:
            break
        out = step(state, action, m, env_cfg, rng)
        state = out.next_state
        rankings.append(rank_conditions(state.posterior.probs))
        trace.append(
            TraceStep(
                episode=episode_id,
                step=len(trace),
                action=action,
                answer=out.answer,
                reward=out.reward,
                posterior=state.posterior.probs,
                done_reason=out.done_reason,
            )
        )
    while len(rankings) < env_cfg.max_questions + 1:
        rankings.append(rankings[-1])
    return trace, rankings


def evaluate_policy(
    policy: QuestionPolicy,
    world: KnowledgeMatrix,
    prior_cfg: PriorConfig | UniformPriorSource,
    env_cfg: EnvConfig,
    n_episodes: int,
    seeds: Sequence[int],
    ks: Sequence[int] = (1, 2, 3),
) -> EvalReport:
    """Evaluate over n_episodes per seed; aggregate top-K and curves."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    n_idx = env_cfg.max_questions + 1
    topk_by_seed: dict[int, list[float]] = {k: [] for k in ks}
    avg_questions: list[float] = []
    curve_hits = {k: np.zeros(n_idx) for k in ks}
    total = 0

    for seed in seeds:
        prior_rng, env_rng = (
            np.random.default_rng(c) for c in np.random.SeedSequence(seed).spawn(2)
        )
        positions = np.empty((n_episodes, n_idx), dtype=int)
        lengths = np.empty(n_episodes)
        for ep in range(n_episodes):
            sample = draw_prior(prior_cfg, prior_rng)
            trace, rankings = run_policy_episode(
                policy, world, sample, env_cfg, env_rng, episode_id=ep
            )
            positions[ep] = _truth_positions(rankings, sample.true_condition)
            lengths[ep] = len(trace)
        for k in ks:
            topk_by_seed[k].append(float(np.mean(positions[:, -1] < k)))
            curve_hits[k] += (positions < k).mean(axis=0)
        avg_questions.append(float(lengths.mean()))
        total += 1

    return EvalReport(
        policy=policy.name,
        seeds=tuple(seeds),
        n_episodes=n_episodes,
        topk_by_seed={k: tuple(v) for k, v in topk_by_seed.items()},
        avg_questions_by_seed=tuple(avg_questions),
        curves={k: tuple(curve_hits[k] / total) for k in ks},
    )


@dataclass(frozen=True)
class Vignette:
    """An encoded case: the true condition and the set of present symptoms."""

    true_condition: str
    present_symptoms: frozenset[str]
    prior: Belief | None = None


def load_vignettes(source: str | Path | list, m: KnowledgeMatrix) -> list[Vignette]:
    """Read `{"condition": ..., "symptoms": [...], "prior": optional}` records,
    resolving every name against the world."""
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8") as fh:
                records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed vignette document: {exc}") from exc
    else:
        records = source
    if not isinstance(records, list):
        raise ValueError("vignette document must be a list")

    vignettes = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "condition" not in rec or "symptoms" not in rec:
            raise ValueError(f"vignette {i}: expected 'condition' and 'symptoms'")
        m.condition_index(rec["condition"])  # raises on unknown name
        for s in rec["symptoms"]:
            m.symptom_index(s)
        prior = None
        if rec.get("prior") is not None:
            probs = np.asarray(rec["prior"], dtype=float)
            if probs.shape != (m.n_conditions,):
                raise ValueError(f"vignette {i}: prior length mismatch")
            prior = Belief(probs)
        vignettes.append(
            Vignette(rec["condition"], frozenset(rec["symptoms"]), prior)
        )
    return vignettes


def run_vignette_episode(
    policy: QuestionPolicy,
    m: KnowledgeMatrix,
    vignette: Vignette,
    env_cfg: EnvConfig,
    episode_id: int = 0,
) -> tuple[list[TraceStep], list[np.ndarray]]:
    """Deterministic episode: answers come from symptom-set membership."""
    truth = m.condition_index(vignette.true_condition)
    prior = vignette.prior if vignette.prior is not None else Belief.uniform(m.n_conditions)
    state = reset(m, PriorSample(truth, prior), env_cfg)
    rankings = [rank_conditions(state.posterior.probs)]
    trace: list[TraceStep] = []
    while termination(state.posterior, state.questions_asked, m.n_symptoms, env_cfg) == "none":
        action = policy.select(state, m, None)
        if action is None:
            break
        answer = "yes" if m.symptom_names[action] in vignette.present_symptoms else "no"
        out = apply_answer(state, action, answer, m, env_cfg)
        state = out.next_state
        rankings.append(rank_conditions(state.posterior.probs))
        trace.append(
            TraceStep(
                episode=episode_id,
                step=len(trace),
                action=action,
                answer=answer,
                reward=out.reward,
                posterior=state.posterior.probs,
                done_reason=out.done_reason,
            )
        )
    while len(rankings) < env_cfg.max_questions + 1:
        rankings.append(rankings[-1])
    return trace, rankings


def vignette_inference(
    policy: QuestionPolicy,
    vignettes: Sequence[Vignette],
    world: KnowledgeMatrix,
    env_cfg: EnvConfig,
    ks: Sequence[int] = (1, 2, 3),
) -> EvalReport:
    """Evaluate a policy on encoded vignettes; fully deterministic."""
    if len(vignettes) == 0:
        raise ValueError("no vignettes")
    n_idx = env_cfg.max_questions + 1
    positions = np.empty((len(vignettes), n_idx), dtype=int)
    lengths = np.empty(len(vignettes))
    for i, v in enumerate(vignettes):
        truth = world.condition_index(v.true_condition)
        trace, rankings = run_vignette_episode(policy, world, v, env_cfg, episode_id=i)
        positions[i] = _truth_positions(rankings, truth)
        lengths[i] = len(trace)
    return EvalReport(
        policy=policy.name,
        seeds=(0,),
        n_episodes=len(vignettes),
        topk_by_seed={k: (float(np.mean(positions[:, -1] < k)),) for k in ks},
        avg_questions_by_seed=(float(lengths.mean()),),
        curves={k: tuple((positions < k).mean(axis=0)) for k in ks},
    )


def format_pct(x: float) -> str:
    """0.70412 -> '70.4%'."""
    return f"{100.0 * x:.1f}%"


def _ordered(reports: Sequence[EvalReport]) -> list[EvalReport]:
    by_name = {r.policy: r for r in reports}
    ordered = [by_name.pop(name) for name in POLICY_ORDER if name in by_name]
    ordered.extend(by_name.values())
    return ordered


def render_comparison(reports: Sequence[EvalReport]) -> str:
    """Text table of top-K and question counts per policy, plus curve data."""
    if len(reports) == 0:
        raise ValueError("no reports")
    reports = _ordered(reports)
    ks = sorted(reports[0].curves.keys())

    width = 18
    header = "".ljust(width) + "".join(r.policy.ljust(width) for r in reports)
    lines = [header, "-" * len(header)]
    for k in ks:
        cells = [
            f"{100 * r.topk_mean(k):.1f} ± {100 * r.topk_std(k):.1f}%".ljust(width)
            for r in reports
        ]
        lines.append(f"Top-{k}".ljust(width) + "".join(cells))
    lines.append(
        "Avg questions".ljust(width)
        + "".join(
            f"{r.avg_questions_mean():.2f} ± {r.avg_questions_std():.2f}".ljust(width)
            for r in reports
        )
    )
    lines.append("")
    lines.append("Accuracy by number of questions asked:")
    for r in reports:
        for k in ks:
            series = " ".join(f"{v:.4f}" for v in r.curves[k])
            lines.append(f"  {r.policy} top-{k}: {series}")
    return "\n".join(lines) + "\n"
