"""Replay buffer, exploration schedule, and DDQN target tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slsched.agent import (
    Batch,
    EpsilonSchedule,
    Hyperparams,
    ReplayBuffer,
    ddqn_target,
    epsilon_at,
    load_agent_meta,
    maybe_sync,
    save_agent_meta,
    select_action,
    train_step,
)
from slsched.env import Transition
from slsched.nn import INPUT_DIM, OUTPUT_DIM, OptimizerState, QNetwork, copy_parameters


def _transition(rng, reward=0.0, terminal=False):
    return Transition(
        state=rng.normal(size=INPUT_DIM),
        action=int(rng.integers(OUTPUT_DIM)),
        reward=reward,
        next_state=rng.normal(size=INPUT_DIM),
        terminal=terminal,
    )


def _net_with_fixed_outputs(q_values):
    """A zero-weight network whose output equals `q_values` for any input.

    Zeroing every weight makes the forward pass collapse onto the head
    biases, which then encode the desired Q-table exactly.
    """
    net = QNetwork([INPUT_DIM, 4, OUTPUT_DIM], rng=np.random.default_rng(0))
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    net.biases[-1][:] = np.asarray(q_values, dtype=np.float64)
    net.training = False
    return net


class TestDdqnTarget:
    def test_online_argmax_evaluated_by_target_net(self):
        # Online net prefers action 3; target net's value AT action 3 (0.5)
        # must be used, not the target net's own maximum (2.0 at action 0).
        online = _net_with_fixed_outputs([0.1, 0.2, 0.3, 0.9, 0.0])
        target = _net_with_fixed_outputs([2.0, 1.0, 0.4, 0.5, 0.3])
        tr = Transition(
            state=np.zeros(INPUT_DIM),
            action=1,
            reward=1.0,
            next_state=np.zeros(INPUT_DIM),
            terminal=False,
        )
        value = ddqn_target(online, target, tr, gamma=0.9)
        assert value == pytest.approx(1.0 + 0.9 * 0.5)
        assert value != pytest.approx(1.0 + 0.9 * 2.0)

    def test_terminal_transition_ignores_bootstrap(self):
        online = _net_with_fixed_outputs([5.0, 5.0, 5.0, 5.0, 5.0])
        target = _net_with_fixed_outputs([5.0, 5.0, 5.0, 5.0, 5.0])
        tr = Transition(
            state=np.zeros(INPUT_DIM),
            action=0,
            reward=-2.5,
            next_state=np.zeros(INPUT_DIM),
            terminal=True,
        )
        assert ddqn_target(online, target, tr, gamma=0.99) == pytest.approx(-2.5)

    def test_agreeing_networks_reduce_to_q_learning_target(self):
        online = _net_with_fixed_outputs([0.0, 0.0, 0.0, 0.0, 1.5])
        target = _net_with_fixed_outputs([0.2, 0.2, 0.2, 0.2, 0.7])
        tr = Transition(
            state=np.zeros(INPUT_DIM),
            action=2,
            reward=0.0,
            next_state=np.zeros(INPUT_DIM),
            terminal=False,
        )
        assert ddqn_target(online, target, tr, gamma=1.0) == pytest.approx(0.7)


class TestEpsilonSchedule:
    def test_linear_endpoints_and_floor(self):
        sched = EpsilonSchedule.linear(1.0, 0.05, 1000)
        assert sched.value_at(0) == pytest.approx(1.0)
        assert sched.value_at(500) == pytest.approx(0.525)
        assert sched.value_at(1000) == pytest.approx(0.05)
        assert sched.value_at(10_000) == pytest.approx(0.05)

    def test_linear_decrement_constructor(self):
        sched = EpsilonSchedule.linear_decrement(1.0, 0.1, 0.001)
        # (1.0 - 0.1) / 0.001 = 900 steps to reach the floor
        assert sched.value_at(0) == pytest.approx(1.0)
        assert sched.value_at(450) == pytest.approx(0.55)
        assert sched.value_at(900) == pytest.approx(0.1)
        assert sched.value_at(901) == pytest.approx(0.1)

    def test_exponential_decay(self):
        sched = EpsilonSchedule.exponential(1.0, 0.01, 100)
        assert sched.value_at(0) == pytest.approx(1.0)
        assert sched.value_at(100) == pytest.approx(np.exp(-1.0))
        assert sched.value_at(460) == pytest.approx(0.01, rel=0.02)
        assert sched.value_at(100_000) == pytest.approx(0.01)

    def test_invalid_schedules_rejected(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(kind="quadratic", start=1.0, floor=0.1, decay_steps=10)
        with pytest.raises(ValueError):
            EpsilonSchedule(kind="linear", start=0.1, floor=0.5, decay_steps=10)
        with pytest.raises(ValueError):
            EpsilonSchedule(kind="linear", start=1.2, floor=0.1, decay_steps=10)
        with pytest.raises(ValueError):
            EpsilonSchedule(kind="linear", start=1.0, floor=0.1, decay_steps=0)

    @given(
        start=st.floats(0.1, 1.0),
        floor_frac=st.floats(0.0, 1.0),
        decay=st.floats(1.0, 1e6),
        step=st.integers(0, 10_000_000),
        kind=st.sampled_from(["linear", "exponential"]),
    )
    @settings(max_examples=200, deadline=None)
    def test_epsilon_always_within_bounds(self, start, floor_frac, decay, step, kind):
        floor = start * floor_frac
        sched = EpsilonSchedule(kind=kind, start=start, floor=floor, decay_steps=decay)
        value = epsilon_at(sched, step)
        assert floor - 1e-12 <= value <= start + 1e-12
        assert epsilon_at(sched, step + 1) <= value + 1e-12  # non-increasing


class TestReplayBuffer:
    def test_ring_overwrites_oldest(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=4)
        for reward in range(6):
            buf.push(_transition(rng, reward=float(reward)))
        assert len(buf) == 4
        sample_rng = np.random.default_rng(1)
        seen = set()
        for _ in range(100):
            seen.update(buf.sample(4, sample_rng).rewards.tolist())
        # rewards 0 and 1 were overwritten by 4 and 5
        assert seen == {2.0, 3.0, 4.0, 5.0}

    def test_sample_rejects_underfilled_request(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=16)
        for _ in range(3):
            buf.push(_transition(rng))
        with pytest.raises(ValueError):
            buf.sample(4, np.random.default_rng(0))

    def test_sampling_is_close_to_uniform(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=8)
        for reward in range(8):
            buf.push(_transition(rng, reward=float(reward)))
        sample_rng = np.random.default_rng(42)
        counts = np.zeros(8)
        for _ in range(10_000):
            batch = buf.sample(8, sample_rng)
            counts += np.bincount(batch.rewards.astype(int), minlength=8)
        freqs = counts / counts.sum()
        assert np.all(np.abs(freqs - 0.125) < 0.01)

    def test_stored_arrays_are_copies(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=2)
        state = np.zeros(INPUT_DIM)
        tr = Transition(state=state, action=0, reward=0.0,
                        next_state=np.zeros(INPUT_DIM), terminal=False)
        buf.push(tr)
        state[:] = 99.0
        batch = buf.sample(1, np.random.default_rng(0))
        assert np.all(batch.states == 0.0)

    def test_rejects_bad_capacity(self):
        with pytest.raises(ValueError):
            ReplayBuffer(capacity=0)


class TestSelectAction:
    def test_greedy_takes_argmax(self):
        net = _net_with_fixed_outputs([0.0, 0.3, 0.1, 0.2, 0.25])
        rng = np.random.default_rng(0)
        for _ in range(10):
            assert select_action(net, np.zeros(INPUT_DIM), 0.0, rng) == 1

    def test_epsilon_one_is_uniform(self):
        net = _net_with_fixed_outputs([10.0, 0.0, 0.0, 0.0, 0.0])
        rng = np.random.default_rng(7)
        actions = [select_action(net, np.zeros(INPUT_DIM), 1.0, rng) for _ in range(20_000)]
        freqs = np.bincount(actions, minlength=OUTPUT_DIM) / len(actions)
        assert np.all(np.abs(freqs - 0.2) < 0.02)

    def test_rng_draw_count_is_epsilon_independent(self):
        # The exploration coin is always tossed, so the stream stays aligned
        # between greedy and exploring calls with the same generator seed.
        net = _net_with_fixed_outputs([0.0, 1.0, 0.0, 0.0, 0.0])
        rng_a = np.random.default_rng(3)
        rng_b = np.random.default_rng(3)
        for _ in range(50):
            select_action(net, np.zeros(INPUT_DIM), 0.0, rng_a)
        select_action(net, np.zeros(INPUT_DIM), 1.0, rng_a)
        draws_after_mixed = rng_a.random()
        for _ in range(50):
            select_action(net, np.zeros(INPUT_DIM), 0.0, rng_b)
        select_action(net, np.zeros(INPUT_DIM), 1.0, rng_b)
        assert rng_b.random() == draws_after_mixed

    def test_requires_inference_mode(self):
        net = _net_with_fixed_outputs([0.0, 0.0, 0.0, 0.0, 0.0])
        net.training = True
        with pytest.raises(ValueError):
            select_action(net, np.zeros(INPUT_DIM), 0.0, np.random.default_rng(0))

    def test_rejects_out_of_range_epsilon(self):
        net = _net_with_fixed_outputs([0.0] * 5)
        with pytest.raises(ValueError):
            select_action(net, np.zeros(INPUT_DIM), 1.5, np.random.default_rng(0))


class TestTrainStepAndSync:
    def test_sync_cadence(self):
        rng = np.random.default_rng(0)
        online = QNetwork([INPUT_DIM, 8, OUTPUT_DIM], rng=rng)
        target = QNetwork([INPUT_DIM, 8, OUTPUT_DIM], rng=rng)
        synced_steps = [
            step for step in range(1, 3001) if maybe_sync(online, target, step, 1000)
        ]
        assert synced_steps == [1000, 2000, 3000]
        for a, b in zip(online.weights, target.weights):
            assert np.array_equal(a, b)

    def test_train_step_reduces_loss_on_fixed_batch(self):
        rng = np.random.default_rng(5)
        hp = Hyperparams(batch_size=32, train_start_threshold=32,
                         replay_capacity=64, learning_rate=((0, 1e-2),))
        online = QNetwork(hp.layer_sizes(), rng=rng)
        target = QNetwork(hp.layer_sizes(), rng=rng)
        copy_parameters(online, target)
        opt = OptimizerState.for_network(online, hp.learning_rate)
        buf = ReplayBuffer(hp.replay_capacity)
        tr_rng = np.random.default_rng(11)
        for _ in range(64):
            buf.push(_transition(tr_rng, reward=float(tr_rng.normal()), terminal=True))
        losses = [
            train_step(online, target, opt, buf, hp, np.random.default_rng(1))
            for _ in range(60)
        ]
        # Terminal-only targets make this a fixed regression problem.
        assert np.mean(losses[-10:]) < 0.25 * np.mean(losses[:10])
        assert online.training is False  # restored after the dropout forward

    def test_train_step_waits_for_buffer_fill(self):
        rng = np.random.default_rng(5)
        hp = Hyperparams(batch_size=8, train_start_threshold=16, replay_capacity=32)
        online = QNetwork(hp.layer_sizes(), rng=rng)
        target = QNetwork(hp.layer_sizes(), rng=rng)
        opt = OptimizerState.for_network(online, hp.learning_rate)
        buf = ReplayBuffer(hp.replay_capacity)
        for _ in range(8):
            buf.push(_transition(rng))
        with pytest.raises(ValueError):
            train_step(online, target, opt, buf, hp, rng)


class TestHyperparams:
    def test_defaults_are_valid_and_layer_sizes_wrap_io(self):
        hp = Hyperparams()
        assert hp.layer_sizes()[0] == INPUT_DIM
        assert hp.layer_sizes()[-1] == OUTPUT_DIM
        assert hp.train_start_threshold >= hp.batch_size

    def test_rejects_bad_gamma_and_batch(self):
        with pytest.raises(ValueError):
            Hyperparams(gamma=0.0)
        with pytest.raises(ValueError):
            Hyperparams(gamma=1.5)
        with pytest.raises(ValueError):
            Hyperparams(batch_size=0)
        with pytest.raises(ValueError):
            Hyperparams(train_start_threshold=16, batch_size=32)


def test_agent_meta_round_trip(tmp_path):
    path = tmp_path / "agent.meta"
    sched = EpsilonSchedule.exponential(0.9, 0.02, 5000)
    save_agent_meta(path, step=12345, epsilon=0.444, schedule=sched, seed=17)
    meta = load_agent_meta(path)
    assert meta["step"] == 12345
    assert meta["epsilon"] == pytest.approx(0.444)
    assert meta["seed"] == 17
    restored = meta["schedule"]
    assert restored.kind == "exponential"
    assert restored.start == pytest.approx(0.9)
    assert restored.floor == pytest.approx(0.02)
    assert restored.decay_steps == pytest.approx(5000)
