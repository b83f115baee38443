"""Greedy question selection by one-step expected information gain.

For a candidate symptom the expected gain is the current belief entropy
minus the answer-weighted entropy of the two possible posteriors.  The
baseline asks the unasked symptom with the largest gain, conditioning on
the evolving posterior, and runs against the exact same environment
contract as the learned agent.
"""

from __future__ import annotations

from collections.abc import Set

import numpy as np

from .env import EnvConfig, TraceStep, reset, step, termination
from .knowledge import Belief, KnowledgeMatrix, belief_entropy, posterior_update
from .priors import PriorSample


def expected_info_gain(b: Belief, m: KnowledgeMatrix, symptom: int) -> float:
    """Expected entropy reduction (nats) from asking the symptom."""
    if not 0 <= symptom < m.n_symptoms:
        raise IndexError(f"symptom index {symptom} out of range")
    p_yes = float(b.probs @ m.probs[:, symptom])
    h = belief_entropy(b)
    h_yes = belief_entropy(posterior_update(b, m, symptom, "yes"))
    h_no = belief_entropy(posterior_update(b, m, symptom, "no"))
    return h - (p_yes * h_yes + (1.0 - p_yes) * h_no)


def select_question(b: Belief, m: KnowledgeMatrix, asked: Set[int]) -> int:
    """Unasked symptom with maximal info gain; ties go to the lowest index."""
    gains = np.full(m.n_symptoms, -np.inf)
    for s in range(m.n_symptoms):
        if s not in asked:
            gains[s] = expected_info_gain(b, m, s)
    if not np.isfinite(gains).any():
        raise ValueError("all symptoms already asked")
    return int(np.argmax(gains))


def run_greedy_episode(
    m: KnowledgeMatrix,
    sample: PriorSample,
    env_cfg: EnvConfig,
    rng: np.random.Generator,
    episode_id: int = 0,
) -> list[TraceStep]:
    """Roll one greedy episode against the simulated patient."""
    state = reset(m, sample, env_cfg)
    trace: list[TraceStep] = []
    while termination(state.posterior, state.questions_asked, m.n_symptoms, env_cfg) == "none":
        asked = set(np.flatnonzero(state.history.entries).tolist())
        action = select_question(state.posterior, m, asked)
        out = step(state, action, m, env_cfg, rng)
        trace.append(
            TraceStep(
                episode=episode_id,
                step=state.questions_asked,
                action=action,
                answer=out.answer,
                reward=out.reward,
                posterior=out.next_state.posterior.probs,
                done_reason=out.done_reason,
            )
        )
        state = out.next_state
    return trace
