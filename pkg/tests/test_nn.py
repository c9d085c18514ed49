"""Gradient, optimizer, and checkpoint tests for the Q-network."""

import math

import numpy as np
import pytest

from slsched.nn import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    INPUT_DIM,
    OUTPUT_DIM,
    OptimizerState,
    QNetwork,
    adam_step,
    copy_parameters,
    load_checkpoint,
    save_checkpoint,
    schedule_rate,
)


def _loss(net, x, action, target):
    q = net.forward(x)
    return float((q[action] - target) ** 2)


def _relative_error(a, b):
    scale = max(abs(a), abs(b))
    if scale < 1e-8:
        return 0.0
    return abs(a - b) / scale


def _finite_difference_check(net, x, action, target, epsilon=1e-5):
    """Max relative error between backprop and central differences."""
    net.forward(x)
    grads = net.backward(x, action, target)
    worst = 0.0
    for layer, (grad_w, grad_b) in enumerate(grads):
        w = net.weights[layer]
        flat_idx = [0, w.size // 2, w.size - 1]
        for idx in flat_idx:
            r, c = np.unravel_index(idx, w.shape)
            original = w[r, c]
            w[r, c] = original + epsilon
            up = _loss(net, x, action, target)
            w[r, c] = original - epsilon
            down = _loss(net, x, action, target)
            w[r, c] = original
            numeric = (up - down) / (2 * epsilon)
            worst = max(worst, _relative_error(numeric, grad_w[r, c]))
        b = net.biases[layer]
        for idx in (0, len(b) - 1):
            original = b[idx]
            b[idx] = original + epsilon
            up = _loss(net, x, action, target)
            b[idx] = original - epsilon
            down = _loss(net, x, action, target)
            b[idx] = original
            numeric = (up - down) / (2 * epsilon)
            worst = max(worst, _relative_error(numeric, grad_b[idx]))
    return worst


def test_gradient_check_100_random_configurations():
    # Central differences are ill-posed exactly on a ReLU kink (z == 0), which
    # zero-initialized biases make reachable when a whole layer is dead, so
    # each trial jitters the biases and requires a kink margin well above the
    # finite-difference step before comparing.
    rng = np.random.default_rng(20240817)
    worst = 0.0
    checked = 0
    for trial in range(100):
        n_hidden = int(rng.integers(1, 3))
        hidden = [int(rng.integers(4, 24)) for _ in range(n_hidden)]
        net = QNetwork([INPUT_DIM, *hidden, OUTPUT_DIM], rng=rng)
        for b in net.biases:
            b += rng.uniform(-0.2, 0.2, size=b.shape)
        for _ in range(20):
            x = rng.normal(size=INPUT_DIM)
            net.forward(x)
            margin = min(np.abs(z).min() for z in net._cache[1])
            if margin > 1e-3:
                break
        else:
            continue
        action = int(rng.integers(OUTPUT_DIM))
        target = float(rng.normal())
        worst = max(worst, _finite_difference_check(net, x, action, target))
        checked += 1
    assert checked == 100, f"only {checked} trials found a kink-free input"
    assert worst < 1e-4, f"worst relative error {worst:.3e}"


def test_gradient_check_batch_matches_single_sample_average():
    rng = np.random.default_rng(7)
    net = QNetwork([INPUT_DIM, 16, OUTPUT_DIM], rng=rng)
    batch = rng.normal(size=(8, INPUT_DIM))
    actions = rng.integers(OUTPUT_DIM, size=8)
    targets = rng.normal(size=8)

    net.forward(batch)
    batch_grads = net.backward_batch(actions, targets)

    summed = None
    for i in range(8):
        net.forward(batch[i])
        grads = net.backward(batch[i], int(actions[i]), float(targets[i]))
        if summed is None:
            summed = [[gw.copy(), gb.copy()] for gw, gb in grads]
        else:
            for acc, (gw, gb) in zip(summed, grads):
                acc[0] += gw
                acc[1] += gb
    for (bw, bb), (sw, sb) in zip(batch_grads, summed):
        np.testing.assert_allclose(bw, sw / 8, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(bb, sb / 8, rtol=1e-12, atol=1e-15)


def test_relu_network_forward_shapes_and_finiteness():
    rng = np.random.default_rng(0)
    net = QNetwork([INPUT_DIM, 32, OUTPUT_DIM], rng=rng)
    single = net.forward(np.zeros(INPUT_DIM))
    assert single.shape == (OUTPUT_DIM,)
    batch = net.forward(np.zeros((6, INPUT_DIM)))
    assert batch.shape == (6, OUTPUT_DIM)
    with pytest.raises(ValueError):
        net.forward(np.full(INPUT_DIM, np.nan))


def test_dropout_keeps_expected_activation_scale():
    # With a single hidden layer the head is linear in the dropped
    # activations, so the expectation over masks equals the eval-mode output
    # exactly; the batched forward draws an independent mask per row.
    rng = np.random.default_rng(123)
    net = QNetwork([INPUT_DIM, 256, OUTPUT_DIM], dropout_rate=0.5, rng=rng)
    x = np.abs(rng.normal(size=INPUT_DIM)) + 0.5
    net.training = False
    reference = net.forward(x)
    assert np.array_equal(reference, net.forward(x))  # eval mode is mask-free
    net.training = True
    rows = np.tile(x, (20000, 1))
    draws = net.forward(rows, rng=np.random.default_rng(999))
    scale = np.abs(reference).mean()
    assert np.abs(draws.mean(axis=0) - reference).mean() < 0.02 * max(scale, 1.0)


def test_dropout_requires_rng_in_training_mode():
    net = QNetwork([INPUT_DIM, 8, OUTPUT_DIM], dropout_rate=0.3,
                   rng=np.random.default_rng(0))
    net.training = True
    with pytest.raises(ValueError):
        net.forward(np.zeros(INPUT_DIM))


def test_adam_first_step_matches_hand_computation():
    # One parameter, gradient g: after one Adam step with bias correction the
    # update is exactly -lr * g/|g| regardless of magnitude (epsilon aside).
    rng = np.random.default_rng(5)
    net = QNetwork([INPUT_DIM, 4, OUTPUT_DIM], rng=rng)
    opt = OptimizerState.for_network(net, lr_schedule=((0, 0.1),))
    before = [w.copy() for w in net.weights]
    net.forward(np.ones(INPUT_DIM))
    grads = net.backward(np.ones(INPUT_DIM), 0, 10.0)
    adam_step(net, opt, grads)
    for layer, (grad_w, _) in enumerate(grads):
        nonzero = np.abs(grad_w) > 1e-12
        step = net.weights[layer] - before[layer]
        m_hat = grad_w  # after bias correction m-hat equals g on step one
        v_hat_sqrt = np.abs(grad_w)
        expected = -0.1 * m_hat / (v_hat_sqrt + ADAM_EPSILON)
        np.testing.assert_allclose(step[nonzero], expected[nonzero], rtol=1e-10)
    assert opt.step_count == 1


def test_adam_two_steps_match_scalar_reference():
    # Scalar reference implementation carried through two steps.
    rng = np.random.default_rng(11)
    net = QNetwork([INPUT_DIM, 4, OUTPUT_DIM], rng=rng)
    opt = OptimizerState.for_network(net, lr_schedule=((0, 0.01),))
    x = np.ones(INPUT_DIM)
    tracked = (0, 0, 0)  # layer 0, weight [0, 0]
    w0 = net.weights[0][0, 0]
    m = v = 0.0
    for t in (1, 2):
        net.forward(x)
        grads = net.backward(x, 1, -3.0)
        g = grads[0][0][0, 0]
        m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1**t)
        v_hat = v / (1 - ADAM_BETA2**t)
        w0 = w0 - 0.01 * m_hat / (math.sqrt(v_hat) + ADAM_EPSILON)
        adam_step(net, opt, grads)
    assert net.weights[0][0, 0] == pytest.approx(w0, rel=1e-12)


def test_learning_rate_milestones():
    schedule = ((0, 1e-3), (100, 1e-4), (5000, 1e-5))
    assert schedule_rate(schedule, 0) == 1e-3
    assert schedule_rate(schedule, 99) == 1e-3
    assert schedule_rate(schedule, 100) == 1e-4
    assert schedule_rate(schedule, 4999) == 1e-4
    assert schedule_rate(schedule, 123456) == 1e-5
    with pytest.raises(ValueError):
        schedule_rate((), 0)
    with pytest.raises(ValueError):
        schedule_rate(((5, 1e-3),), 10)  # must start at step 0
    with pytest.raises(ValueError):
        schedule_rate(((0, 1e-3), (0, 1e-4)), 1)  # strictly increasing steps


def test_checkpoint_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(2024)
    net = QNetwork([INPUT_DIM, 19, 7, OUTPUT_DIM], dropout_rate=0.25, rng=rng)
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, path)
    loaded = load_checkpoint(path)
    assert loaded.layer_sizes == net.layer_sizes
    assert loaded.dropout_rate == net.dropout_rate
    for a, b in zip(loaded.weights, net.weights):
        assert np.array_equal(a, b)
    for a, b in zip(loaded.biases, net.biases):
        assert np.array_equal(a, b)
    # Saving the loaded network reproduces the file byte for byte.
    path2 = tmp_path / "net2.ckpt"
    save_checkpoint(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_corrupted_header(tmp_path):
    rng = np.random.default_rng(3)
    net = QNetwork([INPUT_DIM, 4, OUTPUT_DIM], rng=rng)
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, path)
    text = path.read_text().splitlines()
    text[0] = "some-other-format"
    bad = tmp_path / "bad.ckpt"
    bad.write_text("\n".join(text) + "\n")
    with pytest.raises(ValueError):
        load_checkpoint(bad)


def test_copy_parameters_decouples_storage():
    rng = np.random.default_rng(8)
    a = QNetwork([INPUT_DIM, 6, OUTPUT_DIM], rng=rng)
    b = QNetwork([INPUT_DIM, 6, OUTPUT_DIM], rng=rng)
    copy_parameters(a, b)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    a.weights[0][0, 0] += 1.0
    assert b.weights[0][0, 0] != a.weights[0][0, 0]
    c = QNetwork([INPUT_DIM, 5, OUTPUT_DIM], rng=rng)
    with pytest.raises(ValueError):
        copy_parameters(a, c)


def test_he_initialization_bounds_and_zero_biases():
    rng = np.random.default_rng(77)
    net = QNetwork([INPUT_DIM, 64, OUTPUT_DIM], rng=rng)
    for layer, w in enumerate(net.weights):
        fan_in = net.layer_sizes[layer]
        limit = math.sqrt(6.0 / fan_in)
        assert np.all(np.abs(w) <= limit)
        assert np.abs(w).max() > 0.5 * limit  # actually spread, not collapsed
    for b in net.biases:
        assert np.all(b == 0.0)


def test_input_output_dims_enforced():
    rng = np.random.default_rng(1)
    with pytest.raises(ValueError):
        QNetwork([6, 8, OUTPUT_DIM], rng=rng)
    with pytest.raises(ValueError):
        QNetwork([INPUT_DIM, 8, 4], rng=rng)
    with pytest.raises(ValueError):
        QNetwork([INPUT_DIM, 8, OUTPUT_DIM], dropout_rate=1.0, rng=rng)
