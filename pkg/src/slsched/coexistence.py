"""Wi-Fi occupancy on the unlicensed band and listen-before-talk gating.

Occupancy is a two-state Markov chain stepped once per slot. Transmissions on
the unlicensed band go through a listen-before-talk gate that grants access
only when the sensed state is idle. A windowed estimator turns the sensing
history into the idle-probability feature the scheduler observes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class WifiActivityModel:
    """Two-state busy/idle chain with per-slot transition probabilities."""

    p_busy_to_idle: float
    p_idle_to_busy: float
    idle: bool = True

    def __post_init__(self) -> None:
        for name in ("p_busy_to_idle", "p_idle_to_busy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def stationary_idle_probability(self) -> float:
        total = self.p_busy_to_idle + self.p_idle_to_busy
        if total == 0.0:
            # Frozen chain: whatever state it starts in persists.
            return 1.0 if self.idle else 0.0
        return self.p_busy_to_idle / total

    def step(self, rng: np.random.Generator) -> bool:
        """Advance one slot and return the new state (True = idle)."""
        u = rng.random()
        if self.idle:
            if u < self.p_idle_to_busy:
                self.idle = False
        else:
            if u < self.p_busy_to_idle:
                self.idle = True
        return self.idle


def lbt_gate(idle_sensed: bool) -> bool:
    """Listen-before-talk: access granted exactly when the band is sensed idle."""
    return bool(idle_sensed)


class IdleEstimator:
    """Sliding-window fraction of idle observations over the last `window` slots."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self._ring = [0] * window
        self._cursor = 0
        self._count = 0
        self._idle_sum = 0

    @property
    def n_observations(self) -> int:
        return self._count

    @property
    def estimate(self) -> float:
        if self._count == 0:
            raise ValueError("estimate is undefined before any observation")
        return self._idle_sum / self._count

    def update(self, idle: bool) -> float:
        """Push one sensing sample and return the refreshed estimate."""
        value = 1 if idle else 0
        if self._count < self.window:
            self._count += 1
        else:
            self._idle_sum -= self._ring[self._cursor]
        self._ring[self._cursor] = value
        self._idle_sum += value
        self._cursor = (self._cursor + 1) % self.window
        return self._idle_sum / self._count
