"""Condition-symptom probability matrix and Bayesian belief arithmetic.

The knowledge matrix stores p(symptom | condition) for every pair; a belief
is a probability vector over conditions.  Yes/no answers are folded into the
belief under the assumption that symptoms are conditionally independent given
the condition, so each answer contributes one Bernoulli likelihood factor:
p(s|c) for "yes" and 1 - p(s|c) for "no".  All posterior arithmetic runs in
log space and renormalizes with max subtraction, so long answer sequences
with small likelihoods never underflow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

Answer = Literal["yes", "no"]

# Matrix entries are clamped into [PROB_EPS, 1 - PROB_EPS] so a single
# inconsistent answer can never zero out the true condition.
PROB_EPS = 1e-6

# Values outside this window are data errors, not representation noise.
_GROSS_LO, _GROSS_HI = -0.01, 1.01

BELIEF_SUM_TOL = 1e-9


def _owned(values, dtype=float) -> np.ndarray:
    """Copy into a read-only array so instances can be shared freely."""
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class KnowledgeMatrix:
    """p(symptom | condition) table plus the condition/symptom name lists.

    Entries are validated against gross errors and clamped into the open
    unit interval at construction.  Instances are immutable.
    """

    condition_names: tuple[str, ...]
    symptom_names: tuple[str, ...]
    probs: np.ndarray  # shape [n_conditions, n_symptoms]

    def __post_init__(self):
        conditions = tuple(self.condition_names)
        symptoms = tuple(self.symptom_names)
        if len(conditions) < 2:
            raise ValueError("need at least 2 conditions")
        if len(symptoms) < 1:
            raise ValueError("need at least 1 symptom")
        if len(set(conditions)) != len(conditions):
            raise ValueError("duplicate condition names")
        if len(set(symptoms)) != len(symptoms):
            raise ValueError("duplicate symptom names")

        probs = np.array(self.probs, dtype=float)
        if probs.shape != (len(conditions), len(symptoms)):
            raise ValueError(
                f"matrix shape {probs.shape} does not match "
                f"{len(conditions)} conditions x {len(symptoms)} symptoms"
            )
        if not np.isfinite(probs).all():
            raise ValueError("matrix contains non-finite entries")
        if (probs < _GROSS_LO).any() or (probs > _GROSS_HI).any():
            bad = probs[(probs < _GROSS_LO) | (probs > _GROSS_HI)][0]
            raise ValueError(f"probability {bad} outside [{_GROSS_LO}, {_GROSS_HI}]")
        probs = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
        probs.flags.writeable = False

        object.__setattr__(self, "condition_names", conditions)
        object.__setattr__(self, "symptom_names", symptoms)
        object.__setattr__(self, "probs", probs)

    @property
    def n_conditions(self) -> int:
        return len(self.condition_names)

    @property
    def n_symptoms(self) -> int:
        return len(self.symptom_names)

    def condition_index(self, name: str) -> int:
        try:
            return self.condition_names.index(name)
        except ValueError:
            raise KeyError(f"unknown condition {name!r}") from None

    def symptom_index(self, name: str) -> int:
        try:
            return self.symptom_names.index(name)
        except ValueError:
            raise KeyError(f"unknown symptom {name!r}") from None

    def to_document(self) -> dict:
        return {
            "conditions": list(self.condition_names),
            "symptoms": list(self.symptom_names),
            "probs": [[float(v) for v in row] for row in self.probs],
        }


@dataclass(frozen=True)
class Belief:
    """Probability vector over conditions; entries sum to 1."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("belief must be a non-empty vector")
        if not np.isfinite(probs).all():
            raise ValueError("belief contains non-finite entries")
        if (probs < 0).any() or (probs > 1).any():
            raise ValueError("belief entries must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > BELIEF_SUM_TOL:
            raise ValueError(f"belief sums to {probs.sum()}, not 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n: int) -> "Belief":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def from_unnormalized(cls, weights) -> "Belief":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise ValueError("weights must have positive finite sum")
        return cls(w / total)


@dataclass(frozen=True)
class AnswerHistory:
    """Per-symptom answer record: +1 answered yes, -1 answered no, 0 unasked."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.int8)
        if entries.ndim != 1 or entries.size < 1:
            raise ValueError("history must be a non-empty vector")
        if not np.isin(entries, (-1, 0, 1)).all():
            raise ValueError("history entries must be -1, 0 or +1")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return self.entries.size

    @classmethod
    def empty(cls, n_symptoms: int) -> "AnswerHistory":
        return cls(np.zeros(n_symptoms, dtype=np.int8))

    @property
    def asked(self) -> np.ndarray:
        """Boolean mask of symptoms that have been answered."""
        return self.entries != 0

    @property
    def n_asked(self) -> int:
        return int(np.count_nonzero(self.entries))

    def with_answer(self, symptom: int, answer: Answer) -> "AnswerHistory":
        if not 0 <= symptom < self.entries.size:
            raise IndexError(f"symptom index {symptom} out of range")
        if self.entries[symptom] != 0:
            raise ValueError(f"symptom {symptom} already answered")
        entries = self.entries.copy()
        entries[symptom] = 1 if answer == "yes" else -1
        return AnswerHistory(entries)


def load_matrix(source: str | Path | dict) -> KnowledgeMatrix:
    """Build a KnowledgeMatrix from a world document (path or parsed dict).

    The document holds ``{"conditions": [...], "symptoms": [...],
    "probs": [[...], ...]}``.  Probabilities are clamped into the open unit
    interval; values beyond [-0.01, 1.01] are rejected outright.
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed world document: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ValueError("world document must be a mapping")
    missing = {"conditions", "symptoms", "probs"} - doc.keys()
    if missing:
        raise ValueError(f"world document missing keys: {sorted(missing)}")
    return KnowledgeMatrix(
        condition_names=tuple(doc["conditions"]),
        symptom_names=tuple(doc["symptoms"]),
        probs=doc["probs"],
    )


def save_matrix(m: KnowledgeMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(m.to_document(), fh, indent=1)
        fh.write("\n")


def _check_symptom(m: KnowledgeMatrix, symptom: int) -> None:
    if not 0 <= symptom < m.n_symptoms:
        raise IndexError(f"symptom index {symptom} out of range 0..{m.n_symptoms - 1}")


def _log_likelihood(m: KnowledgeMatrix, symptom: int, answer: Answer) -> np.ndarray:
    col = m.probs[:, symptom]
    if answer == "yes":
        return np.log(col)
    if answer == "no":
        return np.log1p(-col)
    raise ValueError(f"answer must be 'yes' or 'no', got {answer!r}")


def _normalize_log(log_post: np.ndarray) -> Belief:
    shift = log_post.max()
    if not np.isfinite(shift):
        raise ValueError("degenerate prior: no condition has positive mass")
    w = np.exp(log_post - shift)
    return Belief(w / w.sum())


def posterior_update(prior: Belief, m: KnowledgeMatrix, symptom: int, answer: Answer) -> Belief:
    """One Bayes step: reweight the prior by the answer's likelihood column."""
    if len(prior) != m.n_conditions:
        raise ValueError("belief dimension does not match matrix")
    _check_symptom(m, symptom)
    with np.errstate(divide="ignore"):
        log_post = np.log(prior.probs) + _log_likelihood(m, symptom, answer)
    return _normalize_log(log_post)


def posterior_from_history(prior: Belief, m: KnowledgeMatrix, h: AnswerHistory) -> Belief:
    """Batch Bayes update over every answered symptom in the history.

    Equivalent to folding posterior_update over the nonzero entries in any
    order; likelihood factors commute.
    """
    if len(prior) != m.n_conditions:
        raise ValueError("belief dimension does not match matrix")
    if len(h) != m.n_symptoms:
        raise ValueError("history dimension does not match matrix")
    with np.errstate(divide="ignore"):
        log_post = np.log(prior.probs).copy()
    for symptom in np.flatnonzero(h.entries):
        answer: Answer = "yes" if h.entries[symptom] > 0 else "no"
        log_post += _log_likelihood(m, int(symptom), answer)
    return _normalize_log(log_post)


def belief_entropy(b: Belief) -> float:
    """Shannon entropy in nats, with 0 * ln 0 = 0."""
    p = b.probs[b.probs > 0]
    return float(-(p * np.log(p)).sum())
