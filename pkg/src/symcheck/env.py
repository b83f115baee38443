"""Simulated-patient environment.

An episode starts from a per-patient prior over conditions; each step the
agent picks an unasked symptom, the simulated patient answers yes with
probability p(symptom | true condition), and the Bayesian posterior over
conditions is updated.  The reward is the posterior mass on the true
condition, so the agent is paid at every step for keeping the right
diagnosis ranked high.  Episodes end when the posterior clears a confidence
threshold or the question budget runs out.

States are immutable values; ``step`` returns a fresh state, so independent
episodes can run concurrently without shared mutable data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .knowledge import (
    Answer,
    AnswerHistory,
    Belief,
    KnowledgeMatrix,
    posterior_update,
)
from .priors import PriorSample

DONE_REASONS = ("none", "threshold", "max_questions")


class RepeatedQuestionError(Exception):
    """The agent asked a symptom that already has an answer."""


class EpisodeFinishedError(Exception):
    """The agent stepped an episode that already terminated."""


@dataclass(frozen=True)
class EnvConfig:
    max_questions: int = 10
    confidence_threshold: float = 0.95
    state_prior_mode: str = "static"  # "static" or "posterior"

    def __post_init__(self):
        if self.max_questions < 1:
            raise ValueError("max_questions must be >= 1")
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must lie in (0, 1]")
        if self.state_prior_mode not in ("static", "posterior"):
            raise ValueError("state_prior_mode must be 'static' or 'posterior'")


@dataclass(frozen=True)
class EnvState:
    prior_part: Belief
    history: AnswerHistory
    questions_asked: int
    posterior: Belief
    true_condition: int  # hidden: never part of features()

    def features(self) -> np.ndarray:
        """Agent-visible vector: prior probabilities ++ answer history."""
        return np.concatenate(
            [self.prior_part.probs, self.history.entries.astype(float)]
        )


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    reward: float
    answer: Answer
    done: bool
    done_reason: str

    def __post_init__(self):
        if self.done_reason not in DONE_REASONS:
            raise ValueError(f"unknown done_reason {self.done_reason!r}")
        if self.done != (self.done_reason != "none"):
            raise ValueError("done flag inconsistent with done_reason")


def effective_max_questions(cfg: EnvConfig, n_symptoms: int) -> int:
    # the question budget can never exceed the number of distinct symptoms
    return min(cfg.max_questions, n_symptoms)


def termination(
    posterior: Belief, questions_asked: int, n_symptoms: int, cfg: EnvConfig
) -> str:
    """Done reason for the given progress: threshold wins over max_questions."""
    if posterior.probs.max() >= cfg.confidence_threshold:
        return "threshold"
    if questions_asked >= effective_max_questions(cfg, n_symptoms):
        return "max_questions"
    return "none"


def reset(m: KnowledgeMatrix, sample: PriorSample, cfg: EnvConfig) -> EnvState:
    if len(sample.prior) != m.n_conditions:
        raise ValueError("prior dimension does not match matrix")
    if not 0 <= sample.true_condition < m.n_conditions:
        raise ValueError("true condition index out of range")
    if cfg.confidence_threshold <= 1.0 / m.n_conditions:
        raise ValueError("confidence threshold must exceed 1/n_conditions")
    return EnvState(
        prior_part=sample.prior,
        history=AnswerHistory.empty(m.n_symptoms),
        questions_asked=0,
        posterior=sample.prior,
        true_condition=sample.true_condition,
    )


def apply_answer(
    state: EnvState, action: int, answer: Answer, m: KnowledgeMatrix, cfg: EnvConfig
) -> StepOutcome:
    """Advance the state with a known answer (shared by the sampled patient,
    vignette replay, and the interactive service)."""
    if state.history.entries[action] != 0:
        raise RepeatedQuestionError(f"symptom {action} already asked")
    history = state.history.with_answer(action, answer)
    posterior = posterior_update(state.posterior, m, action, answer)
    questions_asked = state.questions_asked + 1
    prior_part = posterior if cfg.state_prior_mode == "posterior" else state.prior_part
    next_state = EnvState(
        prior_part=prior_part,
        history=history,
        questions_asked=questions_asked,
        posterior=posterior,
        true_condition=state.true_condition,
    )
    reason = termination(posterior, questions_asked, m.n_symptoms, cfg)
    return StepOutcome(
        next_state=next_state,
        reward=float(posterior.probs[state.true_condition]),
        answer=answer,
        done=reason != "none",
        done_reason=reason,
    )


def step(
    state: EnvState,
    action: int,
    m: KnowledgeMatrix,
    cfg: EnvConfig,
    rng: np.random.Generator,
) -> StepOutcome:
    """Ask one symptom: sample the patient's answer, then apply it."""
    if not 0 <= action < m.n_symptoms:
        raise IndexError(f"action {action} out of range 0..{m.n_symptoms - 1}")
    if termination(state.posterior, state.questions_asked, m.n_symptoms, cfg) != "none":
        raise EpisodeFinishedError("episode already terminated")
    if state.history.entries[action] != 0:
        raise RepeatedQuestionError(f"symptom {action} already asked")
    k = rng.random()
    answer: Answer = "yes" if k <= m.probs[state.true_condition, action] else "no"
    return apply_answer(state, action, answer, m, cfg)


def answer_frequency_check(
    m: KnowledgeMatrix,
    condition: int,
    symptom: int,
    n: int,
    rng: np.random.Generator,
) -> float:
    """Empirical yes-rate of the answer sampler over n independent draws."""
    if n < 1000:
        raise ValueError("need n >= 1000 for a meaningful rate")
    ks = rng.random(n)
    return float(np.mean(ks <= m.probs[condition, symptom]))


@dataclass(frozen=True)
class TraceStep:
    """One exported step of an episode trace."""

    episode: int
    step: int
    action: int
    answer: Answer
    reward: float
    posterior: np.ndarray
    done_reason: str
