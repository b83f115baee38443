"""Q-network: a ReLU MLP with hand-rolled forward, backprop, and optimizers.

The network maps the agent-visible state (condition probabilities ++ answer
history) to one Q-value per symptom.  The default architecture is three
hidden layers of 350 ReLU units with a linear output; everything is float64,
which keeps the finite-difference gradient checks tight.

Training minimizes the squared temporal-difference error against a frozen
target copy of the parameters: y = r for terminal transitions, otherwise
y = r + gamma * max over still-askable symptoms of the target's Q(x').
Already-asked symptoms are masked out of the bootstrap max so the target
never credits an illegal repeat question.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .agent import Transition

DEFAULT_HIDDEN = (350, 350, 350)
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class NonFiniteGradientError(RuntimeError):
    """Gradients blew up; the training run has diverged."""


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    step_size: float = 1e-3
    batch_size: int = 64
    init_seed: int = 0
    optimizer: str = "sgd"  # "sgd" or "adam"
    hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")


@dataclass
class MlpParams:
    """Weights and biases of the MLP; weights[l] has shape [fan_in, fan_out]."""

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"bad layer dims {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("layer count does not match dims")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l], dims[l + 1]) or b.shape != (dims[l + 1],):
                raise ValueError(f"layer {l} shapes {w.shape}/{b.shape} do not chain")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {l} contains non-finite values")
        object.__setattr__(self, "dims", dims)

    @property
    def n_in(self) -> int:
        return self.dims[0]

    @property
    def n_out(self) -> int:
        return self.dims[-1]

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


def param_count(dims: Sequence[int]) -> int:
    return sum(
        dims[l] * dims[l + 1] + dims[l + 1] for l in range(len(dims) - 1)
    )


def init_params(dims: Sequence[int], seed: int) -> MlpParams:
    """He-initialized weights (std sqrt(2/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(dims), weights, biases)


def zero_params(dims: Sequence[int]) -> MlpParams:
    weights = [np.zeros((a, b)) for a, b in zip(dims, dims[1:])]
    biases = [np.zeros(b) for b in dims[1:]]
    return MlpParams(tuple(dims), weights, biases)


def _forward_cached(p: MlpParams, x: np.ndarray):
    """Batch forward keeping post-activation values for backprop."""
    activations = [x]
    a = x
    last = len(p.weights) - 1
    for l, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = a @ w + b
        a = z if l == last else np.maximum(z, 0.0)
        activations.append(a)
    return a, activations


def forward_batch(p: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != p.n_in:
        raise ValueError(f"expected batch of {p.n_in}-vectors, got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("input contains non-finite values")
    out, _ = _forward_cached(p, x)
    return out


def forward(p: MlpParams, x: np.ndarray) -> np.ndarray:
    """Q-values for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n_in,):
        raise ValueError(f"expected {p.n_in}-vector, got shape {x.shape}")
    return forward_batch(p, x[None, :])[0]


def _stack_batch(batch: Sequence["Transition"], n_in: int):
    if len(batch) == 0:
        raise ValueError("empty batch")
    x = np.stack([t.x for t in batch])
    x_next = np.stack([t.x_next for t in batch])
    if x.shape[1] != n_in or x_next.shape[1] != n_in:
        raise ValueError("transition feature length does not match network input")
    a = np.array([t.a for t in batch], dtype=int)
    r = np.array([t.r for t in batch], dtype=float)
    done = np.array([t.done for t in batch], dtype=bool)
    return x, a, r, x_next, done


def _bootstrap_targets(
    target: MlpParams,
    r: np.ndarray,
    x_next: np.ndarray,
    done: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """y = r, plus for non-terminal rows gamma * masked max of the target net.

    A symptom whose history slot in x_next is nonzero was already asked and
    is excluded from the max.
    """
    y = r.copy()
    alive = ~done
    if alive.any():
        xn = x_next[alive]
        q_next = forward_batch(target, xn)
        history = xn[:, target.n_in - target.n_out:]
        q_next = np.where(history == 0.0, q_next, -np.inf)
        best = q_next.max(axis=1)
        if not np.isfinite(best).all():
            raise ValueError("non-terminal transition with no askable symptom left")
        y[alive] += gamma * best
    return y


def td_loss(
    p: MlpParams, target: MlpParams, batch: Sequence["Transition"], gamma: float
) -> float:
    """Mean squared TD error of the batch (no gradients)."""
    x, a, r, x_next, done = _stack_batch(batch, p.n_in)
    y = _bootstrap_targets(target, r, x_next, done, gamma)
    q, _ = _forward_cached(p, x)
    err = q[np.arange(len(batch)), a] - y
    return float(np.mean(err**2))


def td_loss_and_grads(
    p: MlpParams, target: MlpParams, batch: Sequence["Transition"], gamma: float
) -> tuple[float, MlpParams]:
    """Loss plus exact backprop gradients of the batch mean.

    The bootstrap target y is treated as a constant: no gradient flows
    through the target network.
    """
    x, a, r, x_next, done = _stack_batch(batch, p.n_in)
    y = _bootstrap_targets(target, r, x_next, done, gamma)

    q, activations = _forward_cached(p, x)
    n = len(batch)
    rows = np.arange(n)
    err = q[rows, a] - y
    loss = float(np.mean(err**2))

    delta = np.zeros_like(q)
    delta[rows, a] = 2.0 * err / n

    grad_w = [np.empty_like(w) for w in p.weights]
    grad_b = [np.empty_like(b) for b in p.biases]
    for l in range(len(p.weights) - 1, -1, -1):
        grad_w[l] = activations[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ p.weights[l].T) * (activations[l] > 0.0)
    return loss, MlpParams(p.dims, grad_w, grad_b)


def _check_grads_finite(grads: MlpParams) -> None:
    for w, b in zip(grads.weights, grads.biases):
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NonFiniteGradientError("non-finite gradient")


def sgd_step(p: MlpParams, grads: MlpParams, step_size: float) -> MlpParams:
    if grads.dims != p.dims:
        raise ValueError("gradient shapes do not match parameters")
    _check_grads_finite(grads)
    return MlpParams(
        p.dims,
        [w - step_size * g for w, g in zip(p.weights, grads.weights)],
        [b - step_size * g for b, g in zip(p.biases, grads.biases)],
    )


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, p: MlpParams) -> "AdamState":
        flat = p.weights + p.biases
        return cls([np.zeros_like(a) for a in flat], [np.zeros_like(a) for a in flat])


def adam_step(
    p: MlpParams, grads: MlpParams, state: AdamState, step_size: float
) -> tuple[MlpParams, AdamState]:
    """Adam update with the usual bias correction; returns fresh params/state."""
    if grads.dims != p.dims:
        raise ValueError("gradient shapes do not match parameters")
    _check_grads_finite(grads)
    t = state.t + 1
    flat_p = p.weights + p.biases
    flat_g = grads.weights + grads.biases
    new_m, new_v, new_p = [], [], []
    for theta, g, m, v in zip(flat_p, flat_g, state.m, state.v):
        m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g**2
        m_hat = m / (1 - ADAM_BETA1**t)
        v_hat = v / (1 - ADAM_BETA2**t)
        new_m.append(m)
        new_v.append(v)
        new_p.append(theta - step_size * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
    k = len(p.weights)
    return MlpParams(p.dims, new_p[:k], new_p[k:]), AdamState(new_m, new_v, t)


def gradient_check(
    p: MlpParams,
    batch: Sequence["Transition"],
    gamma: float,
    n_params: int = 200,
    h: float = 1e-5,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between backprop and central finite differences.

    Checks n_params randomly chosen parameters (all of them if the network is
    smaller).  The target network is a frozen clone of p so the bootstrap
    targets stay constant under perturbation.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    target = p.copy()
    _, grads = td_loss_and_grads(p, target, batch, gamma)

    arrays = p.weights + p.biases
    grad_arrays = grads.weights + grads.biases
    sizes = np.array([a.size for a in arrays])
    total = int(sizes.sum())
    chosen = (
        np.arange(total)
        if total <= n_params
        else rng.choice(total, size=n_params, replace=False)
    )
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    for flat_idx in chosen:
        arr_idx = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        local = int(flat_idx - offsets[arr_idx])
        pos = np.unravel_index(local, arrays[arr_idx].shape)

        original = arrays[arr_idx][pos]
        arrays[arr_idx][pos] = original + h
        loss_plus = td_loss(p, target, batch, gamma)
        arrays[arr_idx][pos] = original - h
        loss_minus = td_loss(p, target, batch, gamma)
        arrays[arr_idx][pos] = original

        fd = (loss_plus - loss_minus) / (2.0 * h)
        bp = grad_arrays[arr_idx][pos]
        rel = abs(bp - fd) / max(1e-8, abs(bp) + abs(fd))
        worst = max(worst, rel)
    return worst


CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, p: MlpParams) -> None:
    """Bit-exact parameter dump (npz: dims + per-layer arrays)."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION, dtype=np.int64),
        "dims": np.array(p.dims, dtype=np.int64),
    }
    for l, (w, b) in enumerate(zip(p.weights, p.biases)):
        payload[f"w{l}"] = w
        payload[f"b{l}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path: str | Path) -> MlpParams:
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = tuple(int(d) for d in data["dims"])
        weights = [data[f"w{l}"] for l in range(len(dims) - 1)]
        biases = [data[f"b{l}"] for l in range(len(dims) - 1)]
    return MlpParams(dims, weights, biases)
