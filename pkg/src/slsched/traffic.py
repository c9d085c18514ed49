"""Poisson packet arrivals and a finite FIFO buffer with overflow blocking.

Also carries the M/M/1/K pieces used for the analytic cross-check: the
closed-form loss probability and an exact continuous-time event simulation
driven through the same FIFO queue type.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, slots=True)
class Packet:
    packet_id: int
    size_bits: int
    arrival_slot: int


class PacketQueue:
    """FIFO buffer with a hard capacity; overflow arrivals are dropped and counted."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self._items: deque[Packet] = deque()
        self.arrivals_total = 0
        self.blocked_at_arrival_total = 0

    def __len__(self) -> int:
        return len(self._items)

    @property
    def accepted_total(self) -> int:
        return self.arrivals_total - self.blocked_at_arrival_total

    def enqueue(self, packet: Packet) -> bool:
        """Append a packet in arrival order; return False (and count) on overflow."""
        self.arrivals_total += 1
        if len(self._items) >= self.capacity:
            self.blocked_at_arrival_total += 1
            return False
        self._items.append(packet)
        return True

    def head_of_line(self) -> Packet | None:
        """Peek at the oldest queued packet without removing it."""
        return self._items[0] if self._items else None

    def pop(self) -> Packet:
        """Remove and return the oldest packet; empty queue is a usage error."""
        if not self._items:
            raise LookupError("pop from empty queue")
        return self._items.popleft()

    def occupancy_ratio(self) -> float:
        if self.capacity == 0:
            raise ValueError("occupancy_ratio is undefined for capacity 0")
        return len(self._items) / self.capacity


def sample_arrivals(arrival_rate: float, rng: np.random.Generator) -> int:
    """Number of arrivals in one slot, Poisson with the given per-slot rate."""
    if arrival_rate < 0:
        raise ValueError(f"arrival_rate must be >= 0, got {arrival_rate}")
    return int(rng.poisson(arrival_rate))


def mm1k_blocking_probability(rho: float, capacity: int) -> float:
    """Stationary loss probability of an M/M/1 queue holding at most
    `capacity` customers, service position included.

    rho^K * (1 - rho) / (1 - rho^(K+1)), with the rho -> 1 limit 1/(K+1).
    """
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    if capacity < 0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    if capacity == 0:
        return 1.0
    if rho == 0.0:
        return 0.0
    if abs(rho - 1.0) < 1e-12:
        return 1.0 / (capacity + 1)
    return rho**capacity * (1.0 - rho) / (1.0 - rho ** (capacity + 1))


def simulate_mm1k(
    arrival_rate: float,
    service_rate: float,
    capacity: int,
    n_arrivals: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact continuous-time M/M/1/K run; returns a bool flag per arrival.

    The queue holds the in-service customer at its head, so `capacity` equals
    the system size K of the closed form. Flags are True where the arrival
    found the system full.
    """
    if arrival_rate <= 0 or service_rate <= 0:
        raise ValueError("arrival_rate and service_rate must be > 0")
    if n_arrivals < 1:
        raise ValueError(f"n_arrivals must be >= 1, got {n_arrivals}")
    queue = PacketQueue(capacity)
    blocked = np.zeros(n_arrivals, dtype=bool)
    now = 0.0
    next_arrival = rng.exponential(1.0 / arrival_rate)
    next_departure = np.inf
    seen = 0
    while seen < n_arrivals:
        if next_arrival <= next_departure:
            now = next_arrival
            accepted = queue.enqueue(Packet(seen, 1, 0))
            blocked[seen] = not accepted
            if accepted and len(queue) == 1:
                next_departure = now + rng.exponential(1.0 / service_rate)
            seen += 1
            next_arrival = now + rng.exponential(1.0 / arrival_rate)
        else:
            now = next_departure
            queue.pop()
            if len(queue):
                next_departure = now + rng.exponential(1.0 / service_rate)
            else:
                next_departure = np.inf
    return blocked
