"""Synthetic condition-symptom worlds for simulation and benchmarking.

Two families:

* ``gen_world`` gives every symptom a characteristic subset of conditions
  (roughly half of them) with an elevated probability; the rest sit at a
  low rate.  The separability knob controls the high/low contrast.  Every
  symptom then discriminates between two sizeable groups of conditions, the
  way broadly shared clinical findings do, so any reasonable sequence of
  answers narrows the differential.
* ``gen_separable_world`` is the fully deterministic variant: one unique
  signature symptom per condition at the clamp ceiling, everything else at
  the clamp floor.  Its optimal questioning strategy is known exactly, which
  makes it the standard sanity world.
"""

from __future__ import annotations

import numpy as np

from .knowledge import PROB_EPS, KnowledgeMatrix


def _default_names(prefix: str, n: int) -> tuple[str, ...]:
    width = len(str(n))
    return tuple(f"{prefix}_{i + 1:0{width}d}" for i in range(n))


def gen_world(
    n_conditions: int,
    n_symptoms: int,
    separability: float = 0.7,
    seed: int = 0,
    condition_names: tuple[str, ...] | None = None,
    symptom_names: tuple[str, ...] | None = None,
) -> KnowledgeMatrix:
    if not 0.0 <= separability <= 1.0:
        raise ValueError("separability must lie in [0, 1]")
    if n_symptoms < 1:
        raise ValueError("need at least 1 symptom")
    rng = np.random.default_rng(seed)

    hi = 0.5 + 0.42 * separability
    lo = 0.5 - 0.45 * separability
    jitter = 0.04 * separability

    probs = np.empty((n_conditions, n_symptoms))
    for j in range(n_symptoms):
        # symptom j is common among a characteristic subset of conditions
        subset_size = int(rng.integers(n_conditions // 3, (2 * n_conditions) // 3 + 1))
        subset_size = max(1, min(n_conditions - 1, subset_size))
        subset = rng.choice(n_conditions, size=subset_size, replace=False)
        col = np.full(n_conditions, lo)
        col[subset] = hi
        probs[:, j] = col + rng.uniform(-jitter, jitter, size=n_conditions)

    return KnowledgeMatrix(
        condition_names or _default_names("condition", n_conditions),
        symptom_names or _default_names("symptom", n_symptoms),
        np.clip(probs, 0.01, 0.99),
    )


def gen_separable_world(
    n_conditions: int,
    n_symptoms: int | None = None,
    condition_names: tuple[str, ...] | None = None,
    symptom_names: tuple[str, ...] | None = None,
) -> KnowledgeMatrix:
    """Deterministic signature world: p(s_i | c_i) = 1 - eps, rest eps."""
    if n_symptoms is None:
        n_symptoms = n_conditions
    if n_symptoms < n_conditions:
        raise ValueError("need one signature symptom per condition")
    probs = np.full((n_conditions, n_symptoms), PROB_EPS)
    for i in range(n_conditions):
        probs[i, i] = 1.0 - PROB_EPS
    return KnowledgeMatrix(
        condition_names or _default_names("condition", n_conditions),
        symptom_names or _default_names("symptom", n_symptoms),
        probs,
    )
