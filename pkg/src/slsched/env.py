"""Decision-epoch environment for sidelink band allocation.

Each 1 ms slot the scheduler picks one of five transmission options for the
head-of-line packet:

    0  CC_28G   via gNB, licensed 28 GHz
    1  CC_26G   via gNB, licensed 26 GHz
    2  SLL_28G  direct sidelink, licensed 28 GHz
    3  SLL_26G  direct sidelink, licensed 26 GHz
    4  SLU_5G   direct sidelink, unlicensed 5 GHz (listen-before-talk)

The observation is a 7-vector in [0, 1]:

    [queue occupancy, residual bandwidth per option (5 entries, action
     order), Wi-Fi idle-probability feature]

A dispatched packet exclusively holds its option's nominal bandwidth for
ceil(size / rate / slot) slots; a second dispatch on a busy option is blocked.
The unlicensed option additionally needs a listen-before-talk grant against
the sensed Wi-Fi state. Rewards are the achieved Shannon rate normalized by
the largest nominal bandwidth times the spectral efficiency at the highest
configured SNR target, so successful sends score in (0, ~1] and every blocked
or idle epoch scores 0.

Step order within a slot: arrivals are drawn and enqueued (overflow drops are
counted), the head-of-line dispatch is attempted on the chosen option, then
the Wi-Fi chain advances, the sensing history updates, and bandwidth holds
tick down. Licensed capacity is split equally, by rate at the SNR target,
across the four licensed options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

from .channel import (
    ChannelRealization,
    LinkBudget,
    LinkGeometry,
    calibrated_budget,
    link_rate,
    pathloss_los,
    sample_rician,
)
from .coexistence import IdleEstimator, WifiActivityModel, lbt_gate
from .traffic import Packet, PacketQueue, sample_arrivals


class ConfigError(ValueError):
    """Raised when a configuration value is out of contract."""


class Action(IntEnum):
    CC_28G = 0
    CC_26G = 1
    SLL_28G = 2
    SLL_26G = 3
    SLU_5G = 4


N_ACTIONS = 5
LICENSED_ACTIONS = (Action.CC_28G, Action.CC_26G, Action.SLL_28G, Action.SLL_26G)
CARRIER_GHZ = (28.0, 26.0, 28.0, 26.0, 5.0)

GNB_HEIGHT_M = 10.0
UE_TX_HEIGHT_M = 2.0
UE_RX_HEIGHT_M = 1.5

STATE_DIM = 7


class Outcome(Enum):
    SENT = "sent"
    BLOCKED_OVERFLOW = "blocked_overflow"
    BLOCKED_NO_BANDWIDTH = "blocked_no_bandwidth"
    BLOCKED_LBT = "blocked_lbt"
    IDLE = "idle"


BLOCKED_DISPATCH_OUTCOMES = (Outcome.BLOCKED_NO_BANDWIDTH, Outcome.BLOCKED_LBT)


@dataclass(frozen=True)
class LinkDistances:
    """3D separation in meters per link class."""

    cc_m: float = 100.0
    sl_m: float = 5.0


@dataclass(frozen=True)
class EnvConfig:
    licensed_budget_bps: float = 500e6
    unlicensed_bw_hz: float = 100e6
    channel_mode: str = "static_per_episode"
    snr_targets_db: tuple[float, ...] = (40.0, 40.0, 13.0, 13.0, 0.0)
    distances: LinkDistances = field(default_factory=LinkDistances)
    k_factor: float = 10.0
    nlos_power_scale: float = 1.0
    arrival_rate: float = 0.08
    queue_capacity: int = 20
    episode_length: int = 1000
    seed: int = 0
    slot_seconds: float = 1e-3
    packet_size_bits: int = 4_000_000
    wifi_p_idle_to_busy: float = 0.02
    wifi_p_busy_to_idle: float = 0.02
    wifi_estimator_window: int = 100
    observe_true_wifi_idle: bool = False

    def validate(self) -> None:
        if not self.licensed_budget_bps > 0:
            raise ConfigError(
                f"licensed_budget_bps must be > 0, got {self.licensed_budget_bps}"
            )
        if not self.unlicensed_bw_hz > 0:
            raise ConfigError(f"unlicensed_bw_hz must be > 0, got {self.unlicensed_bw_hz}")
        if self.channel_mode not in ("static_per_episode", "dynamic_per_packet"):
            raise ConfigError(
                "channel_mode must be 'static_per_episode' or 'dynamic_per_packet', "
                f"got {self.channel_mode!r}"
            )
        if len(self.snr_targets_db) != N_ACTIONS:
            raise ConfigError(
                f"snr_targets_db needs {N_ACTIONS} entries, got {len(self.snr_targets_db)}"
            )
        if not (self.distances.cc_m > 0 and self.distances.sl_m > 0):
            raise ConfigError("link distances must be > 0")
        if self.k_factor < 0:
            raise ConfigError(f"k_factor must be >= 0, got {self.k_factor}")
        if not self.nlos_power_scale > 0:
            raise ConfigError(f"nlos_power_scale must be > 0, got {self.nlos_power_scale}")
        if self.arrival_rate < 0:
            raise ConfigError(f"arrival_rate must be >= 0, got {self.arrival_rate}")
        if self.queue_capacity < 1:
            raise ConfigError(f"queue_capacity must be >= 1, got {self.queue_capacity}")
        if self.episode_length < 1:
            raise ConfigError(f"episode_length must be >= 1, got {self.episode_length}")
        if not self.slot_seconds > 0:
            raise ConfigError(f"slot_seconds must be > 0, got {self.slot_seconds}")
        if self.packet_size_bits < 1:
            raise ConfigError(f"packet_size_bits must be >= 1, got {self.packet_size_bits}")
        for name in ("wifi_p_idle_to_busy", "wifi_p_busy_to_idle"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.wifi_estimator_window < 1:
            raise ConfigError(
                f"wifi_estimator_window must be >= 1, got {self.wifi_estimator_window}"
            )

    def with_overrides(self, **kwargs) -> "EnvConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class StateVector:
    """Normalized observation; as_array() yields the 7-entry float vector."""

    queue_occupancy: float
    residual: tuple[float, float, float, float, float]
    wifi_idle: float

    def as_array(self) -> np.ndarray:
        return np.array(
            (self.queue_occupancy, *self.residual, self.wifi_idle), dtype=np.float64
        )

    @classmethod
    def from_array(cls, values: np.ndarray) -> "StateVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (STATE_DIM,):
            raise ValueError(f"state vector must have shape ({STATE_DIM},)")
        return cls(
            queue_occupancy=float(values[0]),
            residual=tuple(float(v) for v in values[1:6]),
            wifi_idle=float(values[6]),
        )


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass(slots=True)
class EpochReport:
    """One record per decision epoch.

    `outcome` describes the head-of-line dispatch attempt; arrivals dropped at
    a full buffer are tallied in `overflow_drops` (they can coincide with any
    dispatch outcome). A denied packet stays at head of line and may be denied
    again on later epochs; `newly_blocked` is 1 only on the epoch of a packet's
    first denial, so each packet is counted blocked at most once while every
    denied epoch still reports its blocked outcome and zero reward. `rate_bps`
    is the raw Shannon rate and is positive exactly when the outcome is SENT.
    """

    slot: int
    action: int
    outcome: Outcome
    rate_bps: float
    reward: float
    arrivals: int
    overflow_drops: int
    newly_blocked: int
    bits_sent: int

    @property
    def blocked_events(self) -> int:
        return self.overflow_drops + self.newly_blocked


class BandResources:
    """Per-option bandwidth ledger: nominal, currently held, slots remaining."""

    def __init__(self, nominal_bw_hz: np.ndarray):
        nominal = np.asarray(nominal_bw_hz, dtype=np.float64)
        if nominal.shape != (N_ACTIONS,) or not np.all(nominal > 0):
            raise ConfigError("nominal bandwidth must be 5 positive values")
        self.nominal_bw_hz = nominal
        self.held_bw_hz = np.zeros(N_ACTIONS)
        self.hold_slots_remaining = np.zeros(N_ACTIONS, dtype=np.int64)

    def available_bw_hz(self, option: int) -> float:
        return float(self.nominal_bw_hz[option] - self.held_bw_hz[option])

    def residual(self) -> np.ndarray:
        return (self.nominal_bw_hz - self.held_bw_hz) / self.nominal_bw_hz

    def acquire(self, option: int, bandwidth_hz: float, slots: int) -> None:
        if slots < 1:
            raise ValueError(f"hold must last >= 1 slot, got {slots}")
        if bandwidth_hz <= 0 or bandwidth_hz > self.available_bw_hz(option) + 1e-9:
            raise ValueError("hold exceeds available bandwidth")
        self.held_bw_hz[option] += bandwidth_hz
        self.hold_slots_remaining[option] = slots

    def tick(self) -> None:
        """Advance one slot; holds that reach zero release their bandwidth."""
        active = self.hold_slots_remaining > 0
        self.hold_slots_remaining[active] -= 1
        released = active & (self.hold_slots_remaining == 0)
        self.held_bw_hz[released] = 0.0


def _link_geometries(config: EnvConfig) -> list[LinkGeometry]:
    geoms = []
    for option in range(N_ACTIONS):
        if Action(option) in (Action.CC_28G, Action.CC_26G):
            geoms.append(
                LinkGeometry(config.distances.cc_m, GNB_HEIGHT_M, UE_RX_HEIGHT_M, CARRIER_GHZ[option])
            )
        else:
            geoms.append(
                LinkGeometry(config.distances.sl_m, UE_TX_HEIGHT_M, UE_RX_HEIGHT_M, CARRIER_GHZ[option])
            )
    return geoms


def nominal_bandwidths_hz(config: EnvConfig) -> np.ndarray:
    """Bandwidth per option: equal licensed-rate split, fixed unlicensed width.

    Each licensed option receives bandwidth such that its rate at the SNR
    target (unit channel gain) equals licensed_budget_bps / 4.
    """
    per_option_rate = config.licensed_budget_bps / len(LICENSED_ACTIONS)
    bw = np.zeros(N_ACTIONS)
    for option in LICENSED_ACTIONS:
        snr = 10.0 ** (config.snr_targets_db[option] / 10.0)
        bw[option] = per_option_rate / math.log2(1.0 + snr)
    bw[Action.SLU_5G] = config.unlicensed_bw_hz
    return bw


class SidelinkEnv:
    """Discrete-time band-allocation environment.

    Construct with a validated EnvConfig; randomness comes from the config
    seed unless a Generator is handed in. reset() starts a fresh episode
    (buffer, holds, Wi-Fi chain, and, in static mode, channel draws);
    step(action) runs one decision epoch and returns
    (reward, next_state, report). Stepping a finished episode raises.
    """

    def __init__(self, config: EnvConfig, rng: np.random.Generator | None = None):
        config.validate()
        self.config = config
        self._rng = rng if rng is not None else np.random.default_rng(config.seed)
        self._geometries = _link_geometries(config)
        nominal = nominal_bandwidths_hz(config)
        self._budgets: list[LinkBudget] = [
            calibrated_budget(
                config.snr_targets_db[option],
                float(nominal[option]),
                pathloss_db=pathloss_los(self._geometries[option]),
            )
            for option in range(N_ACTIONS)
        ]
        max_snr = 10.0 ** (max(config.snr_targets_db) / 10.0)
        self._reward_scale = float(nominal.max()) * math.log2(1.0 + max_snr)
        self._nominal = nominal
        self._next_packet_id = 0
        self._episode_open = False
        self._has_reset = False
        # Populated by reset():
        self.queue: PacketQueue
        self.resources: BandResources
        self.wifi: WifiActivityModel
        self.estimator: IdleEstimator
        self._channels: list[ChannelRealization]
        self._slot = 0
        self._steps_this_episode = 0

    @property
    def episode_done(self) -> bool:
        return not self._episode_open

    @property
    def slot(self) -> int:
        return self._slot

    def reset(self) -> StateVector:
        cfg = self.config
        self.queue = PacketQueue(cfg.queue_capacity)
        self.resources = BandResources(self._nominal)
        chain = WifiActivityModel(cfg.wifi_p_busy_to_idle, cfg.wifi_p_idle_to_busy)
        chain.idle = bool(self._rng.random() < chain.stationary_idle_probability())
        self.wifi = chain
        self.estimator = IdleEstimator(cfg.wifi_estimator_window)
        self.estimator.update(self.wifi.idle)
        self._channels = [self._draw_channel(option) for option in range(N_ACTIONS)]
        self._marked_blocked_id = -1
        self._steps_this_episode = 0
        self._episode_open = True
        self._has_reset = True
        return self.observe()

    def _draw_channel(self, option: int) -> ChannelRealization:
        return sample_rician(
            self._geometries[option],
            self.config.k_factor,
            self.config.nlos_power_scale,
            self._rng,
        )

    def observe(self) -> StateVector:
        if not self._has_reset:
            raise RuntimeError("observe() before the first reset()")
        wifi_feature = (
            float(self.wifi.idle)
            if self.config.observe_true_wifi_idle
            else self.estimator.estimate
        )
        residual = self.resources.residual()
        return StateVector(
            queue_occupancy=self.queue.occupancy_ratio(),
            residual=tuple(float(r) for r in residual),
            wifi_idle=wifi_feature,
        )

    def step(self, action: int) -> tuple[float, StateVector, EpochReport]:
        if not self._episode_open:
            raise RuntimeError("step() on a finished episode; call reset()")
        option = int(action)
        if not 0 <= option < N_ACTIONS:
            raise ValueError(f"action must be in [0, {N_ACTIONS}), got {action}")
        cfg = self.config
        slot = self._slot

        arrivals = sample_arrivals(cfg.arrival_rate, self._rng)
        drops = 0
        for _ in range(arrivals):
            packet = Packet(self._next_packet_id, cfg.packet_size_bits, slot)
            self._next_packet_id += 1
            if not self.queue.enqueue(packet):
                drops += 1

        reward = 0.0
        rate_bps = 0.0
        bits_sent = 0
        newly_blocked = 0
        if len(self.queue):
            if self.resources.available_bw_hz(option) < self._nominal[option]:
                outcome = Outcome.BLOCKED_NO_BANDWIDTH
            elif option == Action.SLU_5G and not lbt_gate(self.wifi.idle):
                outcome = Outcome.BLOCKED_LBT
            else:
                if cfg.channel_mode == "dynamic_per_packet":
                    self._channels[option] = self._draw_channel(option)
                rate_bps = link_rate(self._budgets[option], self._channels[option])
                packet = self.queue.pop()
                duration = max(
                    1, math.ceil(packet.size_bits / (rate_bps * cfg.slot_seconds))
                )
                self.resources.acquire(option, float(self._nominal[option]), duration)
                reward = rate_bps / self._reward_scale
                bits_sent = packet.size_bits
                outcome = Outcome.SENT
            if outcome in BLOCKED_DISPATCH_OUTCOMES:
                head = self.queue.head_of_line()
                if head.packet_id != self._marked_blocked_id:
                    self._marked_blocked_id = head.packet_id
                    newly_blocked = 1
        else:
            outcome = Outcome.BLOCKED_OVERFLOW if drops else Outcome.IDLE

        self.wifi.step(self._rng)
        self.estimator.update(self.wifi.idle)
        self.resources.tick()

        self._slot += 1
        self._steps_this_episode += 1
        if self._steps_this_episode >= cfg.episode_length:
            self._episode_open = False

        report = EpochReport(
            slot=slot,
            action=option,
            outcome=outcome,
            rate_bps=rate_bps,
            reward=reward,
            arrivals=arrivals,
            overflow_drops=drops,
            newly_blocked=newly_blocked,
            bits_sent=bits_sent,
        )
        return reward, self.observe(), report


def blocking_probability(reports: list[EpochReport]) -> float | None:
    """Blocked packets of all causes per presented packet; None without arrivals.

    A packet counts as blocked at most once: at the arrival it is dropped for
    a full buffer, or at its first denied dispatch. Later denials of the same
    head-of-line packet keep their zero reward but add nothing here, so the
    ratio stays within [0, 1] whenever the reports cover whole episodes.
    """
    arrivals = sum(r.arrivals for r in reports)
    if arrivals == 0:
        return None
    blocked = sum(r.blocked_events for r in reports)
    return blocked / arrivals


def blocking_breakdown(reports: list[EpochReport]) -> dict[str, float]:
    """Per-cause blocked packets per presented packet, keyed by outcome value.

    Dispatch causes attribute a packet to its first denial's outcome.
    """
    arrivals = sum(r.arrivals for r in reports)
    overflow = sum(r.overflow_drops for r in reports)
    no_bw = sum(r.newly_blocked for r in reports if r.outcome is Outcome.BLOCKED_NO_BANDWIDTH)
    lbt = sum(r.newly_blocked for r in reports if r.outcome is Outcome.BLOCKED_LBT)
    if arrivals == 0:
        return {
            Outcome.BLOCKED_OVERFLOW.value: 0.0,
            Outcome.BLOCKED_NO_BANDWIDTH.value: 0.0,
            Outcome.BLOCKED_LBT.value: 0.0,
        }
    return {
        Outcome.BLOCKED_OVERFLOW.value: overflow / arrivals,
        Outcome.BLOCKED_NO_BANDWIDTH.value: no_bw / arrivals,
        Outcome.BLOCKED_LBT.value: lbt / arrivals,
    }


def mean_throughput(reports: list[EpochReport], slot_seconds: float = 1e-3) -> float:
    """Delivered bits per slot divided by the slot duration, in bit/s.

    Bits count at dispatch success, matching when the reward is granted.
    """
    if not reports:
        raise ValueError("mean_throughput needs a non-empty report sequence")
    if not slot_seconds > 0:
        raise ValueError(f"slot_seconds must be > 0, got {slot_seconds}")
    total_bits = sum(r.bits_sent for r in reports)
    return total_bits / (len(reports) * slot_seconds)
