"""Synthetic per-patient condition priors, standing in for an image classifier.

Each simulated patient gets a true condition drawn uniformly and a prior
probability vector drawn from a Dirichlet whose mean is boosted on the true
condition.  The boost (``concentration``) is the single knob controlling how
accurate the generated priors are; ``calibrate`` tunes it until the empirical
top-1 rate matches a target.  Real classifier outputs can be ingested instead
via ``load_priors``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .knowledge import Belief, KnowledgeMatrix

CALIBRATION_TOL = 0.02
_MAX_BISECT_STEPS = 60


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PriorConfig:
    n_conditions: int
    concentration: float = 1.0
    target_top1: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_conditions < 2:
            raise ValueError("need at least 2 conditions")
        # concentration 0 is the symmetric no-boost case
        if not self.concentration >= 0:
            raise ValueError("concentration must be non-negative")
        if not 1.0 / self.n_conditions < self.target_top1 <= 1.0:
            raise ValueError("target_top1 must lie in (1/n_conditions, 1]")


@dataclass(frozen=True)
class PriorSample:
    true_condition: int
    prior: Belief


def _alpha(cfg: PriorConfig, true_condition: int) -> np.ndarray:
    alpha = np.ones(cfg.n_conditions)
    alpha[true_condition] += cfg.concentration
    return alpha


def sample_prior(cfg: PriorConfig, rng: np.random.Generator) -> PriorSample:
    """Draw one simulated patient: uniform true condition, boosted Dirichlet prior."""
    true_condition = int(rng.integers(cfg.n_conditions))
    prior = rng.dirichlet(_alpha(cfg, true_condition))
    return PriorSample(true_condition, Belief(prior))


@dataclass(frozen=True)
class UniformPriorSource:
    """Degenerate generator: exact uniform prior, uniform true condition.

    Useful on worlds where the image-classifier stand-in should carry no
    information at all.
    """

    n_conditions: int

    def sample(self, rng: np.random.Generator) -> PriorSample:
        true_condition = int(rng.integers(self.n_conditions))
        return PriorSample(true_condition, Belief.uniform(self.n_conditions))


def draw_prior(
    source: "PriorConfig | UniformPriorSource", rng: np.random.Generator
) -> PriorSample:
    """Draw from either a Dirichlet PriorConfig or a custom prior source."""
    if isinstance(source, PriorConfig):
        return sample_prior(source, rng)
    return source.sample(rng)


def sample_priors(cfg: PriorConfig, n: int, rng: np.random.Generator) -> list[PriorSample]:
    return [sample_prior(cfg, rng) for _ in range(n)]


def empirical_top1(cfg: PriorConfig, n_samples: int, rng: np.random.Generator) -> float:
    """Fraction of draws whose prior argmax hits the true condition.

    Vectorized: the boosted coordinate is pinned at 0 and the draws are
    exchangeable in the others, so P(argmax == boosted slot) is the same
    quantity sample_prior realizes with a random true condition.
    """
    draws = rng.dirichlet(_alpha(cfg, 0), size=n_samples)
    return float(np.mean(np.argmax(draws, axis=1) == 0))


def calibrate(
    cfg: PriorConfig,
    n_samples: int = 4000,
    lo: float = 0.0,
    hi: float = 1e6,
    tol: float = CALIBRATION_TOL,
) -> float:
    """Bisect the concentration until empirical top-1 is within tol of target.

    Raises CalibrationError if the bracket never converges within the step
    budget (Monte-Carlo noise at tiny n_samples can cause this).
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])

    def measure(c: float) -> float:
        return empirical_top1(replace(cfg, concentration=c), n_samples, rng)

    # saturation: even the strongest boost stays at or below target
    if measure(hi) <= cfg.target_top1:
        return hi
    if measure(lo) >= cfg.target_top1:
        return lo

    for _ in range(_MAX_BISECT_STEPS):
        # geometric midpoint once the bracket leaves zero; concentration
        # acts on a log scale
        mid = (lo + hi) / 2.0 if lo < 1e-3 else float(np.sqrt(lo * hi))
        got = measure(mid)
        if abs(got - cfg.target_top1) <= tol:
            return mid
        if got < cfg.target_top1:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(
        f"no concentration within {tol} of top-1 {cfg.target_top1} "
        f"after {_MAX_BISECT_STEPS} bisection steps"
    )


def load_priors(source: str | Path | list, m: KnowledgeMatrix) -> list[PriorSample]:
    """Ingest externally computed probability vectors.

    Each record is ``{"label": <condition name>, "probs": [...]}``.  Vectors
    whose sum is within 1e-3 of 1 are renormalized; anything further off is
    rejected.
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8") as fh:
                records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed prior document: {exc}") from exc
    else:
        records = source
    if not isinstance(records, list):
        raise ValueError("prior document must be a list of records")

    samples = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "label" not in rec or "probs" not in rec:
            raise ValueError(f"record {i}: expected 'label' and 'probs' fields")
        true_condition = m.condition_index(rec["label"])
        probs = np.asarray(rec["probs"], dtype=float)
        if probs.shape != (m.n_conditions,):
            raise ValueError(
                f"record {i}: vector length {probs.size} != {m.n_conditions} conditions"
            )
        total = probs.sum()
        if abs(total - 1.0) > 1e-3:
            raise ValueError(f"record {i}: probabilities sum to {total}, not 1")
        samples.append(PriorSample(true_condition, Belief(probs / total)))
    return samples
