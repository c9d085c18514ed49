"""Double-DQN learning primitives: replay, exploration schedules, updates.

The defining update decouples action selection from action evaluation: the
bootstrap target is r + gamma * Q_target(s', argmax_a Q_online(s', a)) for
non-terminal transitions and plain r at episode boundaries. A hard copy of
the online parameters into the target network happens every
`target_sync_period` steps.

Agent checkpoints pair the network file written by `nn.save_checkpoint` with
a textual sidecar (same path plus ``.meta``) of ``key=value`` lines:
``format``, ``step``, ``epsilon``, ``schedule_kind``, ``schedule_start``,
``schedule_floor``, ``schedule_decay_steps``, ``seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import STATE_DIM, N_ACTIONS, StateVector, Transition
from .nn import QNetwork, OptimizerState, adam_step, copy_parameters

AGENT_META_TAG = "agent-meta-v1"


@dataclass(frozen=True)
class EpsilonSchedule:
    """Exploration-rate decay, linear or exponential, clamped at a floor."""

    kind: str
    start: float
    floor: float
    decay_steps: float

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "exponential"):
            raise ValueError(f"kind must be 'linear' or 'exponential', got {self.kind!r}")
        if not 0.0 <= self.floor <= self.start <= 1.0:
            raise ValueError(
                f"need 0 <= floor <= start <= 1, got start={self.start}, floor={self.floor}"
            )
        if not self.decay_steps > 0:
            raise ValueError(f"decay_steps must be > 0, got {self.decay_steps}")

    @classmethod
    def linear(cls, start: float, floor: float, decay_steps: float) -> "EpsilonSchedule":
        return cls("linear", start, floor, decay_steps)

    @classmethod
    def exponential(cls, start: float, floor: float, decay_steps: float) -> "EpsilonSchedule":
        return cls("exponential", start, floor, decay_steps)

    @classmethod
    def linear_decrement(
        cls, start: float, floor: float, decrement_per_step: float
    ) -> "EpsilonSchedule":
        """Linear schedule given as a per-step decrement instead of a horizon."""
        if not decrement_per_step > 0:
            raise ValueError(
                f"decrement_per_step must be > 0, got {decrement_per_step}"
            )
        return cls("linear", start, floor, (start - floor) / decrement_per_step)

    def value_at(self, step: int) -> float:
        if step < 0:
            raise ValueError(f"step must be >= 0, got {step}")
        if self.kind == "linear":
            value = self.start - (self.start - self.floor) * step / self.decay_steps
        else:
            value = self.start * math.exp(-step / self.decay_steps)
        return max(self.floor, value)


def epsilon_at(schedule: EpsilonSchedule, step: int) -> float:
    return schedule.value_at(step)


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.95
    batch_size: int = 64
    target_sync_period: int = 1000
    train_start_threshold: int = 640
    replay_capacity: int = 1_000_000
    epsilon: EpsilonSchedule = field(
        default_factory=lambda: EpsilonSchedule.linear(1.0, 0.05, 100_000)
    )
    learning_rate: tuple[tuple[int, float], ...] = ((0, 1e-3),)
    hidden_sizes: tuple[int, ...] = (128, 64)
    dropout_rate: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.target_sync_period < 1:
            raise ValueError(
                f"target_sync_period must be >= 1, got {self.target_sync_period}"
            )
        if self.train_start_threshold < self.batch_size:
            raise ValueError("train_start_threshold must be >= batch_size")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay_capacity must be >= batch_size")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden_sizes must be positive, got {self.hidden_sizes}")

    def layer_sizes(self) -> list[int]:
        return [STATE_DIM, *self.hidden_sizes, N_ACTIONS]


@dataclass(frozen=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform with-replacement sampling."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._terminals = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._cursor = 0

    def __len__(self) -> int:
        return self._size

    def push(self, transition: Transition) -> None:
        """Append, evicting the oldest entry once the ring is full."""
        i = self._cursor
        self._states[i] = transition.state
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._next_states[i] = transition.next_state
        self._terminals[i] = transition.terminal
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform with-replacement sample; underfilled buffers are rejected."""
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if self._size < batch_size:
            raise ValueError(
                f"buffer holds {self._size} transitions, cannot sample {batch_size}"
            )
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(
            states=self._states[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_states=self._next_states[idx],
            terminals=self._terminals[idx],
        )


def _state_array(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.as_array()
    return np.asarray(state, dtype=np.float64)


def select_action(
    net: QNetwork, state, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy over the network's action values (ties to lowest index)."""
    if net.training:
        raise ValueError("select_action requires the network in inference mode")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    q = net.forward(_state_array(state))
    return int(np.argmax(q))


def ddqn_target(
    online: QNetwork, target: QNetwork, transition: Transition, gamma: float
) -> float:
    """Double-Q bootstrap for one transition.

    The online network picks the next action; the target network scores it.
    Terminal transitions truncate to the bare reward.
    """
    if online.training or target.training:
        raise ValueError("ddqn_target requires both networks in inference mode")
    if transition.terminal:
        return float(transition.reward)
    next_state = _state_array(transition.next_state)
    best_next = int(np.argmax(online.forward(next_state)))
    bootstrap = float(target.forward(next_state)[best_next])
    return float(transition.reward) + gamma * bootstrap


def train_step(
    online: QNetwork,
    target: QNetwork,
    opt: OptimizerState,
    buffer: ReplayBuffer,
    hp: Hyperparams,
    rng: np.random.Generator,
) -> float:
    """One optimization step: sample, build double-Q targets, descend.

    Targets are computed with both networks in inference mode; the loss
    forward runs in train mode so dropout (if configured) regularizes the
    update. Returns the batch-mean squared Bellman error.
    """
    if len(buffer) < hp.train_start_threshold:
        raise ValueError(
            f"buffer fill {len(buffer)} below train_start_threshold "
            f"{hp.train_start_threshold}"
        )
    batch = buffer.sample(hp.batch_size, rng)
    online.training = False
    target.training = False
    q_next_online = online.forward(batch.next_states)
    best_next = np.argmax(q_next_online, axis=1)
    q_next_target = target.forward(batch.next_states)
    bootstrap = q_next_target[np.arange(len(best_next)), best_next]
    targets = batch.rewards + hp.gamma * np.where(batch.terminals, 0.0, bootstrap)

    online.training = True
    try:
        q = online.forward(batch.states, rng)
        rows = np.arange(hp.batch_size)
        residuals = q[rows, batch.actions] - targets
        loss = float(np.mean(residuals**2))
        grads = online.backward_batch(batch.actions, targets)
        adam_step(online, opt, grads)
    finally:
        online.training = False
    return loss


def maybe_sync(online: QNetwork, target: QNetwork, step: int, sync_period: int) -> bool:
    """Hard-copy online parameters into the target every `sync_period` steps."""
    if sync_period < 1:
        raise ValueError(f"sync_period must be >= 1, got {sync_period}")
    if step % sync_period == 0:
        copy_parameters(online, target)
        return True
    return False


def save_agent_meta(path, *, step: int, epsilon: float, schedule: EpsilonSchedule, seed: int) -> None:
    """Write the training-state sidecar next to a network checkpoint."""
    lines = [
        f"format={AGENT_META_TAG}",
        f"step={step}",
        f"epsilon={epsilon:.17g}",
        f"schedule_kind={schedule.kind}",
        f"schedule_start={schedule.start:.17g}",
        f"schedule_floor={schedule.floor:.17g}",
        f"schedule_decay_steps={schedule.decay_steps:.17g}",
        f"seed={seed}",
    ]
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_agent_meta(path) -> dict:
    """Parse the sidecar back into {step, epsilon, schedule, seed}."""
    entries = {}
    with open(path, "r", encoding="ascii") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            entries[key] = value
    if entries.get("format") != AGENT_META_TAG:
        raise ValueError(f"not an {AGENT_META_TAG} sidecar: {path}")
    schedule = EpsilonSchedule(
        kind=entries["schedule_kind"],
        start=float(entries["schedule_start"]),
        floor=float(entries["schedule_floor"]),
        decay_steps=float(entries["schedule_decay_steps"]),
    )
    return {
        "step": int(entries["step"]),
        "epsilon": float(entries["epsilon"]),
        "schedule": schedule,
        "seed": int(entries["seed"]),
    }
