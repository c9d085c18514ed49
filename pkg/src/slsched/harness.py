"""Experiment specs, training/evaluation runners, and file outputs.

A JSON experiment spec selects a mode (train, evaluate, sweep,
compare-channel, validate-queue), a policy, an environment block, and an
agent block. Unknown keys anywhere in the document are configuration errors.

Sweep-family CSV columns are fixed, in this order:

    licensed_bps, policy, seed, epochs, blocking_prob, blocked_overflow,
    blocked_no_bandwidth, blocked_lbt, mean_throughput_bps

The channel-mode comparison inserts ``channel_mode`` after ``policy`` and
appends ``blocking_diff_static_minus_dynamic``. Per-cause columns are blocked
events per presented packet, so they sum to blocking_prob up to round-off.
All runs are deterministic in (spec, seeds): repeating a command reproduces
every output byte for byte.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field, fields as dataclass_fields, replace
from pathlib import Path

import numpy as np

from .agent import (
    EpsilonSchedule,
    Hyperparams,
    ReplayBuffer,
    maybe_sync,
    save_agent_meta,
    select_action,
    train_step,
)
from .baselines import ThresholdConfig, random_policy, threshold_policy
from .env import (
    Action,
    ConfigError,
    EnvConfig,
    EpochReport,
    LinkDistances,
    Outcome,
    SidelinkEnv,
    StateVector,
    Transition,
    blocking_breakdown,
    blocking_probability,
    mean_throughput,
)
from .nn import OptimizerState, QNetwork, copy_parameters, load_checkpoint, save_checkpoint
from .traffic import mm1k_blocking_probability, simulate_mm1k

MODES = ("train", "evaluate", "sweep", "compare-channel", "validate-queue")
POLICIES = ("ddqn", "threshold", "random")
ENV_PRESETS = ("sidelink", "bandit")

SWEEP_COLUMNS = (
    "licensed_bps",
    "policy",
    "seed",
    "epochs",
    "blocking_prob",
    "blocked_overflow",
    "blocked_no_bandwidth",
    "blocked_lbt",
    "mean_throughput_bps",
)

# Salts for per-purpose random streams derived from one experiment seed.
_SALT_POLICY = 777
_SALT_NET_INIT = 101
_SALT_AGENT = 202


@dataclass(frozen=True)
class QueueValidationSpec:
    rhos: tuple[float, ...] = (0.3, 0.5, 0.8, 1.2)
    capacities: tuple[int, ...] = (5, 10, 20)
    n_arrivals: int = 100_000
    service_rate: float = 1.0

    def validate(self) -> None:
        if not self.rhos or any(r <= 0 for r in self.rhos):
            raise ConfigError("queue_validation.rhos must be positive")
        if not self.capacities or any(k < 0 for k in self.capacities):
            raise ConfigError("queue_validation.capacities must be >= 0")
        if self.n_arrivals < 1000:
            raise ConfigError("queue_validation.n_arrivals must be >= 1000")
        if not self.service_rate > 0:
            raise ConfigError("queue_validation.service_rate must be > 0")


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str = "evaluate"
    policy: str = "random"
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: Hyperparams = field(default_factory=Hyperparams)
    sweep_points: tuple[float, ...] = ()
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    epochs_per_point: int = 20_000
    train_epochs: int = 100_000
    log_interval: int = 1000
    output_path: str = "out.csv"
    checkpoint: str | None = None
    checkpoint_static: str | None = None
    checkpoint_dynamic: str | None = None
    env_preset: str = "sidelink"
    throughput_floor_bps: float | None = None
    queue_validation: QueueValidationSpec = field(default_factory=QueueValidationSpec)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.env_preset not in ENV_PRESETS:
            raise ConfigError(
                f"env_preset must be one of {ENV_PRESETS}, got {self.env_preset!r}"
            )
        self.env.validate()
        self.queue_validation.validate()
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.epochs_per_point < 1:
            raise ConfigError(f"epochs_per_point must be >= 1, got {self.epochs_per_point}")
        if self.train_epochs < 0:
            raise ConfigError(f"train_epochs must be >= 0, got {self.train_epochs}")
        if self.log_interval < 1:
            raise ConfigError(f"log_interval must be >= 1, got {self.log_interval}")
        if not self.output_path:
            raise ConfigError("output_path must not be empty")
        if self.mode == "train" and self.policy != "ddqn":
            raise ConfigError("train mode requires policy 'ddqn'")
        if self.mode in ("evaluate", "sweep") and self.policy == "ddqn" and not self.checkpoint:
            raise ConfigError("ddqn evaluation requires a checkpoint path")
        if self.mode == "sweep":
            if not self.sweep_points:
                raise ConfigError("sweep mode requires sweep_points")
            if any(p <= 0 for p in self.sweep_points):
                raise ConfigError("sweep_points must be positive")
        if self.mode == "compare-channel":
            if not (self.checkpoint_static and self.checkpoint_dynamic):
                raise ConfigError(
                    "compare-channel requires checkpoint_static and checkpoint_dynamic"
                )
            if not self.sweep_points:
                raise ConfigError("compare-channel requires sweep_points")


def _reject_unknown(block: dict, allowed, where: str) -> None:
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _env_from_dict(block: dict) -> EnvConfig:
    if not isinstance(block, dict):
        raise ConfigError("env block must be an object")
    allowed = [f.name for f in dataclass_fields(EnvConfig)]
    _reject_unknown(block, allowed, "env")
    values = dict(block)
    if "distances" in values:
        dist = values["distances"]
        if not isinstance(dist, dict):
            raise ConfigError("env.distances must be an object")
        _reject_unknown(dist, ("cc_m", "sl_m"), "env.distances")
        values["distances"] = LinkDistances(**dist)
    if "snr_targets_db" in values:
        values["snr_targets_db"] = tuple(float(v) for v in values["snr_targets_db"])
    return EnvConfig(**values)


def _epsilon_from_dict(block: dict) -> EpsilonSchedule:
    if not isinstance(block, dict):
        raise ConfigError("agent.epsilon must be an object")
    allowed = ("kind", "start", "floor", "decay_steps", "decrement_per_step")
    _reject_unknown(block, allowed, "agent.epsilon")
    if "decay_steps" in block and "decrement_per_step" in block:
        raise ConfigError("agent.epsilon takes decay_steps or decrement_per_step, not both")
    try:
        kind = block["kind"]
        start = float(block["start"])
        floor = float(block["floor"])
        if "decrement_per_step" in block:
            if kind != "linear":
                raise ConfigError("decrement_per_step only applies to the linear kind")
            return EpsilonSchedule.linear_decrement(
                start, floor, float(block["decrement_per_step"])
            )
        return EpsilonSchedule(kind=kind, start=start, floor=floor,
                               decay_steps=float(block["decay_steps"]))
    except KeyError as missing:
        raise ConfigError(f"agent.epsilon missing key {missing}") from None
    except ValueError as bad:
        raise ConfigError(f"agent.epsilon: {bad}") from None


def _agent_from_dict(block: dict) -> Hyperparams:
    if not isinstance(block, dict):
        raise ConfigError("agent block must be an object")
    allowed = [f.name for f in dataclass_fields(Hyperparams)]
    _reject_unknown(block, allowed, "agent")
    values = dict(block)
    if "epsilon" in values:
        values["epsilon"] = _epsilon_from_dict(values["epsilon"])
    if "learning_rate" in values:
        values["learning_rate"] = tuple(
            (int(step), float(rate)) for step, rate in values["learning_rate"]
        )
    if "hidden_sizes" in values:
        values["hidden_sizes"] = tuple(int(h) for h in values["hidden_sizes"])
    try:
        return Hyperparams(**values)
    except ValueError as bad:
        raise ConfigError(f"agent: {bad}") from None


def spec_from_dict(data: dict) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ConfigError("experiment spec must be a JSON object")
    allowed = [f.name for f in dataclass_fields(ExperimentSpec)]
    _reject_unknown(data, allowed, "spec")
    values = dict(data)
    if "env" in values:
        values["env"] = _env_from_dict(values["env"])
    if "agent" in values:
        values["agent"] = _agent_from_dict(values["agent"])
    if "sweep_points" in values:
        values["sweep_points"] = tuple(float(p) for p in values["sweep_points"])
    if "seeds" in values:
        values["seeds"] = tuple(int(s) for s in values["seeds"])
    if "queue_validation" in values:
        block = values["queue_validation"]
        if not isinstance(block, dict):
            raise ConfigError("queue_validation must be an object")
        allowed_qv = [f.name for f in dataclass_fields(QueueValidationSpec)]
        _reject_unknown(block, allowed_qv, "queue_validation")
        qv = dict(block)
        if "rhos" in qv:
            qv["rhos"] = tuple(float(r) for r in qv["rhos"])
        if "capacities" in qv:
            qv["capacities"] = tuple(int(k) for k in qv["capacities"])
        values["queue_validation"] = QueueValidationSpec(**qv)
    try:
        spec = ExperimentSpec(**values)
    except (TypeError, ValueError) as bad:
        raise ConfigError(f"spec: {bad}") from None
    spec.validate()
    return spec


def load_spec(path) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as bad:
            raise ConfigError(f"config is not valid JSON: {bad}") from None
    return spec_from_dict(data)


class BanditEnv:
    """One-state, five-action sanity environment with fixed distinct rewards."""

    REWARDS = (0.15, 0.45, 0.9, 0.6, 0.3)
    OPTIMAL_ACTION = int(np.argmax(REWARDS))

    def __init__(self, episode_length: int = 50, rewards=None):
        if episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        self.rewards = tuple(rewards) if rewards is not None else self.REWARDS
        if len(self.rewards) != 5 or len(set(self.rewards)) != 5:
            raise ValueError("bandit rewards must be 5 distinct values")
        self.episode_length = episode_length
        self._state = StateVector(0.5, (0.5, 0.5, 0.5, 0.5, 0.5), 0.5)
        self._steps = 0
        self._slot = 0
        self._open = False

    @property
    def episode_done(self) -> bool:
        return not self._open

    def reset(self) -> StateVector:
        self._steps = 0
        self._open = True
        return self._state

    def step(self, action: int):
        if not self._open:
            raise RuntimeError("step() on a finished episode; call reset()")
        option = int(action)
        if not 0 <= option < 5:
            raise ValueError(f"action must be in [0, 5), got {action}")
        reward = float(self.rewards[option])
        self._steps += 1
        slot = self._slot
        self._slot += 1
        if self._steps >= self.episode_length:
            self._open = False
        report = EpochReport(
            slot=slot,
            action=option,
            outcome=Outcome.SENT,
            rate_bps=reward,
            reward=reward,
            arrivals=0,
            overflow_drops=0,
            newly_blocked=0,
            bits_sent=0,
        )
        return reward, self._state, report


@dataclass(frozen=True)
class SweepRow:
    licensed_bps: float
    policy: str
    seed: str
    epochs: int
    blocking_prob: float
    blocked_overflow: float
    blocked_no_bandwidth: float
    blocked_lbt: float
    mean_throughput_bps: float
    channel_mode: str | None = None
    blocking_diff_static_minus_dynamic: float | None = None


@dataclass(frozen=True)
class QueueValidationRow:
    rho: float
    capacity: int
    arrivals: int
    simulated_blocking: float
    analytic_blocking: float
    z_score: float


@dataclass(frozen=True)
class TrainingResult:
    checkpoint_path: str
    meta_path: str
    log_path: str
    steps: int
    final_epsilon: float


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _policy_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _SALT_POLICY]))


def make_policy(name: str, checkpoint: str | None = None):
    """Build a (state, rng) -> action callable for one of the named policies."""
    if name == "threshold":
        cfg = ThresholdConfig()
        return lambda state, rng: threshold_policy(state, cfg)
    if name == "random":
        return lambda state, rng: random_policy(rng)
    if name == "ddqn":
        if checkpoint is None:
            raise ConfigError("ddqn policy needs a checkpoint path")
        if not Path(checkpoint).is_file():
            raise ConfigError(f"checkpoint not found: {checkpoint}")
        net = load_checkpoint(checkpoint)
        net.training = False
        return lambda state, rng: select_action(net, state, 0.0, rng)
    raise ConfigError(f"unknown policy {name!r}")


def rollout(env_config: EnvConfig, policy, epochs: int) -> list[EpochReport]:
    """Run a frozen policy for `epochs` decision epochs, resetting as episodes end."""
    env = SidelinkEnv(env_config)
    rng = _policy_rng(env_config.seed)
    reports: list[EpochReport] = []
    state = env.reset()
    for _ in range(epochs):
        if env.episode_done:
            state = env.reset()
        action = policy(state, rng)
        _, state, report = env.step(action)
        reports.append(report)
    return reports


def _row_from_reports(
    licensed_bps: float,
    policy: str,
    seed,
    epochs: int,
    reports: list[EpochReport],
    slot_seconds: float,
    channel_mode: str | None = None,
) -> SweepRow:
    blocking = blocking_probability(reports)
    causes = blocking_breakdown(reports)
    return SweepRow(
        licensed_bps=licensed_bps,
        policy=policy,
        seed=str(seed),
        epochs=epochs,
        blocking_prob=float("nan") if blocking is None else blocking,
        blocked_overflow=causes[Outcome.BLOCKED_OVERFLOW.value],
        blocked_no_bandwidth=causes[Outcome.BLOCKED_NO_BANDWIDTH.value],
        blocked_lbt=causes[Outcome.BLOCKED_LBT.value],
        mean_throughput_bps=mean_throughput(reports, slot_seconds),
        channel_mode=channel_mode,
    )


def _mean_row(rows: list[SweepRow], channel_mode: str | None = None) -> SweepRow:
    return SweepRow(
        licensed_bps=rows[0].licensed_bps,
        policy=rows[0].policy,
        seed="mean",
        epochs=rows[0].epochs,
        blocking_prob=float(np.mean([r.blocking_prob for r in rows])),
        blocked_overflow=float(np.mean([r.blocked_overflow for r in rows])),
        blocked_no_bandwidth=float(np.mean([r.blocked_no_bandwidth for r in rows])),
        blocked_lbt=float(np.mean([r.blocked_lbt for r in rows])),
        mean_throughput_bps=float(np.mean([r.mean_throughput_bps for r in rows])),
        channel_mode=channel_mode,
    )


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(
                _fmt(getattr(row, column)) for column in SWEEP_COLUMNS
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


COMPARE_COLUMNS = (
    "licensed_bps",
    "policy",
    "channel_mode",
    "seed",
    "epochs",
    "blocking_prob",
    "blocked_overflow",
    "blocked_no_bandwidth",
    "blocked_lbt",
    "mean_throughput_bps",
    "blocking_diff_static_minus_dynamic",
)


def write_compare_csv(rows: list[SweepRow], path) -> None:
    lines = [",".join(COMPARE_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(getattr(row, column)) for column in COMPARE_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


QUEUE_COLUMNS = (
    "rho",
    "capacity",
    "arrivals",
    "simulated_blocking",
    "analytic_blocking",
    "z_score",
)


def write_queue_csv(rows: list[QueueValidationRow], path) -> None:
    lines = [",".join(QUEUE_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(getattr(row, column)) for column in QUEUE_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


class EventDump:
    """JSON-lines writer for raw per-epoch records, one object per line."""

    def __init__(self, path):
        self._handle = open(path, "w", encoding="ascii")

    def write(self, context: dict, report: EpochReport) -> None:
        record = dict(context)
        record.update(
            slot=report.slot,
            action=report.action,
            outcome=report.outcome.value,
            rate_bps=report.rate_bps,
            reward=report.reward,
            arrivals=report.arrivals,
            overflow_drops=report.overflow_drops,
            newly_blocked=report.newly_blocked,
            bits_sent=report.bits_sent,
        )
        self._handle.write(json.dumps(record, separators=(",", ":")) + "\n")

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "EventDump":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _make_training_env(spec: ExperimentSpec, seed: int):
    if spec.env_preset == "bandit":
        return BanditEnv(episode_length=spec.env.episode_length)
    return SidelinkEnv(spec.env.with_overrides(seed=seed))


def run_training(spec: ExperimentSpec, dump: EventDump | None = None) -> TrainingResult:
    """Train a DDQN scheduler and persist checkpoint, sidecar, and log.

    The log (checkpoint path + ``.log.csv``) holds one row per interval:
    step, epsilon, mean squared Bellman error over the interval (nan before
    training starts), and the interval's blocked events per arrival (nan when
    the interval saw no arrivals).
    """
    spec.validate()
    if spec.mode != "train":
        raise ConfigError(f"run_training needs mode 'train', got {spec.mode!r}")
    hp = spec.agent
    seed = spec.seeds[0]
    env = _make_training_env(spec, seed)
    init_rng = np.random.default_rng(np.random.SeedSequence([seed, _SALT_NET_INIT]))
    agent_rng = np.random.default_rng(np.random.SeedSequence([seed, _SALT_AGENT]))
    online = QNetwork(hp.layer_sizes(), hp.dropout_rate, init_rng)
    target = QNetwork(hp.layer_sizes(), hp.dropout_rate, init_rng)
    copy_parameters(online, target)
    opt = OptimizerState.for_network(online, hp.learning_rate)
    buffer = ReplayBuffer(hp.replay_capacity)

    log_lines = ["step,epsilon,mean_loss,blocking_rate"]
    losses: list[float] = []
    interval_arrivals = 0
    interval_blocked = 0
    dump_context = {
        "licensed_bps": spec.env.licensed_budget_bps,
        "policy": "ddqn-train",
        "seed": seed,
    }

    state = env.reset().as_array()
    epsilon = hp.epsilon.value_at(0)
    for step in range(1, spec.train_epochs + 1):
        epsilon = hp.epsilon.value_at(step - 1)
        action = select_action(online, state, epsilon, agent_rng)
        reward, next_state_vec, report = env.step(action)
        next_state = next_state_vec.as_array()
        terminal = env.episode_done
        buffer.push(Transition(state, action, reward, next_state, terminal))
        if len(buffer) >= hp.train_start_threshold:
            losses.append(train_step(online, target, opt, buffer, hp, agent_rng))
        maybe_sync(online, target, step, hp.target_sync_period)
        interval_arrivals += report.arrivals
        interval_blocked += report.blocked_events
        if dump is not None:
            dump.write(dump_context, report)
        if step % spec.log_interval == 0:
            mean_loss = float(np.mean(losses)) if losses else float("nan")
            blocking = (
                interval_blocked / interval_arrivals
                if interval_arrivals
                else float("nan")
            )
            log_lines.append(
                f"{step},{epsilon!r},{mean_loss!r},{blocking!r}"
            )
            losses = []
            interval_arrivals = 0
            interval_blocked = 0
        state = env.reset().as_array() if terminal else next_state

    checkpoint_path = spec.output_path
    save_checkpoint(online, checkpoint_path)
    meta_path = checkpoint_path + ".meta"
    final_epsilon = hp.epsilon.value_at(spec.train_epochs)
    save_agent_meta(
        meta_path,
        step=spec.train_epochs,
        epsilon=final_epsilon,
        schedule=hp.epsilon,
        seed=seed,
    )
    log_path = checkpoint_path + ".log.csv"
    Path(log_path).write_text("\n".join(log_lines) + "\n", encoding="ascii")
    return TrainingResult(
        checkpoint_path=checkpoint_path,
        meta_path=meta_path,
        log_path=log_path,
        steps=spec.train_epochs,
        final_epsilon=final_epsilon,
    )


def _sweep_rows(
    spec: ExperimentSpec,
    points,
    policy_name: str,
    policy,
    channel_mode: str | None,
    dump: EventDump | None,
) -> list[SweepRow]:
    rows: list[SweepRow] = []
    mode = channel_mode if channel_mode is not None else spec.env.channel_mode
    for budget in points:
        seed_rows = []
        for seed in spec.seeds:
            cfg = spec.env.with_overrides(
                licensed_budget_bps=float(budget), seed=seed, channel_mode=mode
            )
            reports = rollout(cfg, policy, spec.epochs_per_point)
            row = _row_from_reports(
                float(budget),
                policy_name,
                seed,
                spec.epochs_per_point,
                reports,
                cfg.slot_seconds,
                channel_mode=channel_mode,
            )
            seed_rows.append(row)
            if dump is not None:
                context = {
                    "licensed_bps": float(budget),
                    "policy": policy_name,
                    "seed": seed,
                }
                if channel_mode is not None:
                    context["channel_mode"] = channel_mode
                for report in reports:
                    dump.write(context, report)
        rows.extend(seed_rows)
        rows.append(_mean_row(seed_rows, channel_mode=channel_mode))
    return rows


def throughput_floor_flags(rows: list[SweepRow], floor_bps: float) -> list[SweepRow]:
    """Rows whose mean throughput sits below the monitored floor."""
    return [row for row in rows if row.mean_throughput_bps < floor_bps]


def _report_floor(rows: list[SweepRow], spec: ExperimentSpec) -> None:
    floor = spec.throughput_floor_bps
    if floor is None:
        return
    for row in throughput_floor_flags(rows, floor):
        print(
            f"throughput floor: {row.policy} at {row.licensed_bps:.0f} bps "
            f"(seed {row.seed}) delivered {row.mean_throughput_bps:.3e} bps "
            f"< floor {floor:.3e} bps",
            file=sys.stderr,
        )


def run_sweep(spec: ExperimentSpec, dump: EventDump | None = None) -> list[SweepRow]:
    """Frozen-policy evaluation across licensed-budget points and seeds."""
    spec.validate()
    if spec.mode not in ("sweep", "evaluate"):
        raise ConfigError(f"run_sweep needs mode 'sweep' or 'evaluate', got {spec.mode!r}")
    points = (
        spec.sweep_points if spec.mode == "sweep" else (spec.env.licensed_budget_bps,)
    )
    policy = make_policy(spec.policy, spec.checkpoint)
    rows = _sweep_rows(spec, points, spec.policy, policy, None, dump)
    write_sweep_csv(rows, spec.output_path)
    _report_floor(rows, spec)
    return rows


def run_evaluate(spec: ExperimentSpec, dump: EventDump | None = None) -> list[SweepRow]:
    """Single-point evaluation at the env block's licensed budget."""
    return run_sweep(spec, dump)


def run_channel_mode_comparison(
    spec: ExperimentSpec, dump: EventDump | None = None
) -> list[SweepRow]:
    """Paired static/dynamic evaluation with a signed blocking difference.

    Each checkpoint is evaluated under its own training condition over the
    same budgets and seeds; the diff column carries static minus dynamic
    blocking for the matching (budget, seed) pair and for the budget means.
    """
    spec.validate()
    if spec.mode != "compare-channel":
        raise ConfigError(
            f"run_channel_mode_comparison needs mode 'compare-channel', got {spec.mode!r}"
        )
    static_policy = make_policy("ddqn", spec.checkpoint_static)
    dynamic_policy = make_policy("ddqn", spec.checkpoint_dynamic)
    static_rows = _sweep_rows(
        spec, spec.sweep_points, "ddqn", static_policy, "static_per_episode", dump
    )
    dynamic_rows = _sweep_rows(
        spec, spec.sweep_points, "ddqn", dynamic_policy, "dynamic_per_packet", dump
    )
    paired: list[SweepRow] = []
    for stat, dyn in zip(static_rows, dynamic_rows):
        if (stat.licensed_bps, stat.seed) != (dyn.licensed_bps, dyn.seed):
            raise RuntimeError("static/dynamic row pairing out of order")
        diff = stat.blocking_prob - dyn.blocking_prob
        paired.append(replace(stat, blocking_diff_static_minus_dynamic=diff))
        paired.append(replace(dyn, blocking_diff_static_minus_dynamic=diff))
    write_compare_csv(paired, spec.output_path)
    return paired


def _batch_z_score(
    flags: np.ndarray, analytic: float, n_batches: int = 100
) -> float:
    """Batch-means z-score, floored by the independent-arrival standard error.

    Consecutive arrivals see correlated system states, so the batch-means
    spread is the primary error estimate; the binomial floor guards the
    near-zero-probability grid points where every batch mean collapses to 0.
    """
    n = len(flags)
    simulated = float(np.mean(flags))
    batch_size = n // n_batches
    batches = flags[: n_batches * batch_size].reshape(n_batches, batch_size)
    batch_means = batches.mean(axis=1)
    batch_se = float(np.std(batch_means, ddof=1)) / math.sqrt(n_batches)
    binomial_se = math.sqrt(max(analytic * (1.0 - analytic), 1e-300) / n)
    se = max(batch_se, binomial_se)
    return (simulated - analytic) / se


def run_queue_validation(spec: ExperimentSpec) -> list[QueueValidationRow]:
    """Exact M/M/1/K event simulation against the closed form over a grid."""
    spec.validate()
    if spec.mode != "validate-queue":
        raise ConfigError(
            f"run_queue_validation needs mode 'validate-queue', got {spec.mode!r}"
        )
    qv = spec.queue_validation
    seed = spec.seeds[0]
    rows: list[QueueValidationRow] = []
    for index, (rho, capacity) in enumerate(
        (rho, capacity) for rho in qv.rhos for capacity in qv.capacities
    ):
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        flags = simulate_mm1k(
            arrival_rate=rho * qv.service_rate,
            service_rate=qv.service_rate,
            capacity=capacity,
            n_arrivals=qv.n_arrivals,
            rng=rng,
        )
        analytic = mm1k_blocking_probability(rho, capacity)
        rows.append(
            QueueValidationRow(
                rho=rho,
                capacity=capacity,
                arrivals=qv.n_arrivals,
                simulated_blocking=float(np.mean(flags)),
                analytic_blocking=analytic,
                z_score=_batch_z_score(flags, analytic),
            )
        )
    write_queue_csv(rows, spec.output_path)
    return rows
