"""DQN training loop: masked epsilon-greedy exploration, uniform replay,
periodic target sync, one gradient step per environment step after warmup.

Training is single-threaded and fully deterministic given the seeds: the
prior sampler, patient answers, exploration, and replay sampling each draw
from their own stream spawned from AgentConfig.seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .env import EnvConfig, reset, step, termination
from .knowledge import AnswerHistory, KnowledgeMatrix
from .priors import PriorConfig, UniformPriorSource, draw_prior
from .qnet import (
    AdamState,
    MlpParams,
    TrainConfig,
    adam_step,
    forward,
    init_params,
    sgd_step,
    td_loss_and_grads,
)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class Transition:
    """Replay record (state features, action, reward, next features, done)."""

    x: np.ndarray
    a: int
    r: float
    x_next: np.ndarray
    done: bool

    def __post_init__(self):
        if self.x.shape != self.x_next.shape:
            raise ValueError("state and next-state feature lengths differ")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"reward {self.r} outside [0, 1]")


class ReplayBuffer:
    """Fixed-capacity ring of transitions; oldest evicted first."""

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._storage: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._storage)

    def push(self, t: Transition) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(t)
        else:
            self._storage[self._next] = t
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform with replacement across current contents."""
        if len(self._storage) < batch_size:
            raise ValueError(
                f"buffer holds {len(self._storage)} < batch_size {batch_size}"
            )
        idx = rng.integers(0, len(self._storage), size=batch_size)
        return [self._storage[i] for i in idx]

    def __contains__(self, t: Transition) -> bool:
        return any(x is t for x in self._storage)


@dataclass(frozen=True)
class AgentConfig:
    episodes: int
    seed: int = 0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 50_000
    target_sync_period: int = 1_000  # in gradient steps
    warmup: int = 1_000  # transitions before learning starts
    max_env_steps: int | None = None  # optional hard budget

    def __post_init__(self):
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.epsilon_decay_steps < 1 or self.target_sync_period < 1:
            raise ValueError("periods must be >= 1")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")


def epsilon_at(env_step: int, cfg: AgentConfig) -> float:
    """Linear decay from epsilon_start, reaching epsilon_end exactly at
    epsilon_decay_steps and staying there."""
    if env_step >= cfg.epsilon_decay_steps:
        return cfg.epsilon_end
    frac = max(0.0, env_step / cfg.epsilon_decay_steps)
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac


def select_action(
    p: MlpParams,
    x: np.ndarray,
    history: AnswerHistory,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy over unasked symptoms; greedy ties go to the lowest index."""
    unasked = np.flatnonzero(~history.asked)
    if unasked.size == 0:
        raise ValueError("no unasked symptom remains")
    if rng.random() < epsilon:
        return int(rng.choice(unasked))
    q = forward(p, x)
    masked = np.where(history.asked, -np.inf, q)
    return int(np.argmax(masked))


@dataclass(frozen=True)
class EpisodeStats:
    episode: int
    ret: float
    length: int
    epsilon: float
    mean_loss: float  # nan before learning starts
    done_reason: str


@dataclass
class TrainingLog:
    episodes: list[EpisodeStats] = field(default_factory=list)
    env_steps: int = 0
    grad_steps: int = 0

    def returns(self) -> np.ndarray:
        return np.array([e.ret for e in self.episodes])


def train(
    world: KnowledgeMatrix,
    prior_cfg: PriorConfig | UniformPriorSource,
    env_cfg: EnvConfig,
    train_cfg: TrainConfig,
    agent_cfg: AgentConfig,
    on_step: Callable[[int, MlpParams, MlpParams], None] | None = None,
) -> tuple[MlpParams, TrainingLog]:
    """Run the episode-driven DQN loop and return trained params plus the log.

    on_step, if given, is called after every environment step with
    (env_step_count, online params, target params); intended for diagnostics.
    """
    n_in = world.n_conditions + world.n_symptoms
    dims = (n_in, *train_cfg.hidden_dims, world.n_symptoms)
    params = init_params(dims, train_cfg.init_seed)
    target = params.copy()
    adam = AdamState.zeros_like(params) if train_cfg.optimizer == "adam" else None

    ss = np.random.SeedSequence(agent_cfg.seed)
    prior_rng, env_rng, explore_rng, replay_rng = (
        np.random.default_rng(child) for child in ss.spawn(4)
    )

    buffer = ReplayBuffer()
    learn_after = max(agent_cfg.warmup, train_cfg.batch_size)
    log = TrainingLog()

    for episode in range(agent_cfg.episodes):
        if (
            agent_cfg.max_env_steps is not None
            and log.env_steps >= agent_cfg.max_env_steps
        ):
            break
        sample = draw_prior(prior_cfg, prior_rng)
        state = reset(world, sample, env_cfg)
        rewards: list[float] = []
        losses: list[float] = []
        done_reason = termination(
            state.posterior, state.questions_asked, world.n_symptoms, env_cfg
        )

        while done_reason == "none":
            eps = epsilon_at(log.env_steps, agent_cfg)
            action = select_action(
                params, state.features(), state.history, eps, explore_rng
            )
            out = step(state, action, world, env_cfg, env_rng)
            buffer.push(
                Transition(
                    state.features(), action, out.reward,
                    out.next_state.features(), out.done,
                )
            )
            log.env_steps += 1
            rewards.append(out.reward)

            if len(buffer) >= learn_after:
                batch = buffer.sample(train_cfg.batch_size, replay_rng)
                loss, grads = td_loss_and_grads(params, target, batch, train_cfg.gamma)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(
                        f"non-finite loss at env step {log.env_steps} "
                        f"(episode {episode})"
                    )
                if adam is not None:
                    params, adam = adam_step(params, grads, adam, train_cfg.step_size)
                else:
                    params = sgd_step(params, grads, train_cfg.step_size)
                log.grad_steps += 1
                losses.append(loss)
                if log.grad_steps % agent_cfg.target_sync_period == 0:
                    target = params.copy()

            if on_step is not None:
                on_step(log.env_steps, params, target)

            state = out.next_state
            done_reason = out.done_reason
            if out.done:
                break
            if (
                agent_cfg.max_env_steps is not None
                and log.env_steps >= agent_cfg.max_env_steps
            ):
                done_reason = "truncated"  # budget cut, not an env termination
                break

        log.episodes.append(
            EpisodeStats(
                episode=episode,
                ret=float(sum(rewards)),
                length=len(rewards),
                epsilon=epsilon_at(log.env_steps, agent_cfg),
                mean_loss=float(np.mean(losses)) if losses else float("nan"),
                done_reason=done_reason,
            )
        )
    return params, log
