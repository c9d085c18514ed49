"""Plain-numpy MLP for action values, with manual backprop and Adam.

The network maps the 7-entry observation to 5 action values through fully
connected layers with ReLU activations (inverted dropout after each hidden
layer in train mode) and a linear output. Everything runs in float64.

Checkpoint file format (version tag ``qnet-v1``), plain text:

    qnet-v1
    layers <size_0> <size_1> ... <size_L>
    dropout <rate>
    W <layer> <rows> <cols>
    <rows lines, each with <cols> '%.17g' values>   # row-major weight matrix
    b <layer> <rows>
    <one line with <rows> '%.17g' values>
    ... repeated per layer in order ...

'%.17g' preserves float64 exactly, so save/load round-trips bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INPUT_DIM = 7
OUTPUT_DIM = 5

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

CHECKPOINT_TAG = "qnet-v1"


def _validate_lr_schedule(schedule) -> tuple[tuple[int, float], ...]:
    entries = tuple((int(step), float(rate)) for step, rate in schedule)
    if not entries:
        raise ValueError("learning-rate schedule must not be empty")
    if entries[0][0] != 0:
        raise ValueError("learning-rate schedule must start at step 0")
    steps = [step for step, _ in entries]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("learning-rate milestones must be strictly increasing")
    if any(rate <= 0 for _, rate in entries):
        raise ValueError("learning rates must be > 0")
    return entries


def schedule_rate(schedule, step: int) -> float:
    """Rate of the latest milestone whose step is <= the given step."""
    schedule = _validate_lr_schedule(schedule)
    rate = schedule[0][1]
    for milestone, milestone_rate in schedule:
        if step >= milestone:
            rate = milestone_rate
        else:
            break
    return rate


class QNetwork:
    """Fully connected action-value network, 7 inputs to 5 outputs."""

    def __init__(self, layer_sizes, dropout_rate: float = 0.0, rng=None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least input and output widths")
        if sizes[0] != INPUT_DIM or sizes[-1] != OUTPUT_DIM:
            raise ValueError(
                f"layer_sizes must run {INPUT_DIM} -> ... -> {OUTPUT_DIM}, got {sizes}"
            )
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer widths must be >= 1, got {sizes}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")
        if rng is None:
            raise ValueError("QNetwork needs a numpy Generator for initialization")
        self.layer_sizes = sizes
        self.dropout_rate = float(dropout_rate)
        self.training = False
        # He-style uniform fan-in initialization, zero biases.
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out, dtype=np.float64))
        self._cache = None

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x, rng=None):
        """Action values for one state (1-D input) or a batch (2-D input).

        Train mode applies inverted dropout after each hidden ReLU and needs
        an explicit Generator when the dropout rate is positive. The forward
        activations are cached for a following backward pass.
        """
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"input must have {self.layer_sizes[0]} features, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("forward rejects non-finite input")
        use_dropout = self.training and self.dropout_rate > 0.0
        if use_dropout and rng is None:
            raise ValueError("train-mode forward with dropout needs a Generator")
        inputs = [arr]
        pre_activations = []
        masks = []
        activation = arr
        for weight, bias in zip(self.weights[:-1], self.biases[:-1]):
            z = activation @ weight.T + bias
            activation = np.maximum(z, 0.0)
            if use_dropout:
                keep = 1.0 - self.dropout_rate
                mask = (rng.random(activation.shape) < keep) / keep
                activation = activation * mask
            else:
                mask = None
            pre_activations.append(z)
            masks.append(mask)
            inputs.append(activation)
        out = activation @ self.weights[-1].T + self.biases[-1]
        self._cache = (inputs, pre_activations, masks, out)
        return out[0] if single else out

    def backward(self, x, action_index: int, target: float):
        """Gradients of (target - q[action])^2 for the last cached forward.

        The cached forward must have been over exactly this single state.
        Returns a list of (dW, db) pairs in layer order.
        """
        if self._cache is None:
            raise RuntimeError("backward without a cached forward pass")
        inputs, _, _, out = self._cache
        arr = np.asarray(x, dtype=np.float64).reshape(1, -1)
        if inputs[0].shape != arr.shape or not np.array_equal(inputs[0], arr):
            raise ValueError("backward input does not match the cached forward")
        if out.shape[0] != 1:
            raise ValueError("single-sample backward over a batched forward")
        return self._backward_from_cache(
            np.array([action_index]), np.array([target], dtype=np.float64)
        )

    def backward_batch(self, action_indices, targets):
        """Gradients of the batch-mean squared error over the cached forward."""
        if self._cache is None:
            raise RuntimeError("backward without a cached forward pass")
        actions = np.asarray(action_indices, dtype=np.int64)
        target_arr = np.asarray(targets, dtype=np.float64)
        if actions.shape != target_arr.shape or actions.ndim != 1:
            raise ValueError("action_indices and targets must be matching 1-D arrays")
        if actions.shape[0] != self._cache[3].shape[0]:
            raise ValueError("batch size does not match the cached forward")
        return self._backward_from_cache(actions, target_arr)

    def _backward_from_cache(self, actions, targets):
        inputs, pre_activations, masks, out = self._cache
        n = out.shape[0]
        if np.any(actions < 0) or np.any(actions >= self.layer_sizes[-1]):
            raise ValueError("action index out of range")
        grad_out = np.zeros_like(out)
        rows = np.arange(n)
        grad_out[rows, actions] = 2.0 * (out[rows, actions] - targets) / n
        grads = [None] * self.n_layers
        upstream = grad_out
        for layer in range(self.n_layers - 1, -1, -1):
            grads[layer] = (upstream.T @ inputs[layer], upstream.sum(axis=0))
            if layer == 0:
                break
            upstream = upstream @ self.weights[layer]
            mask = masks[layer - 1]
            if mask is not None:
                upstream = upstream * mask
            upstream = upstream * (pre_activations[layer - 1] > 0.0)
        return grads


@dataclass
class OptimizerState:
    """Adam moment accumulators plus a milestone learning-rate schedule."""

    m_weights: list
    v_weights: list
    m_biases: list
    v_biases: list
    step_count: int
    lr_schedule: tuple[tuple[int, float], ...]

    @classmethod
    def for_network(cls, net: QNetwork, lr_schedule=((0, 1e-3),)) -> "OptimizerState":
        schedule = _validate_lr_schedule(lr_schedule)
        return cls(
            m_weights=[np.zeros_like(w) for w in net.weights],
            v_weights=[np.zeros_like(w) for w in net.weights],
            m_biases=[np.zeros_like(b) for b in net.biases],
            v_biases=[np.zeros_like(b) for b in net.biases],
            step_count=0,
            lr_schedule=schedule,
        )

    def current_rate(self) -> float:
        return schedule_rate(self.lr_schedule, self.step_count)


def adam_step(net: QNetwork, opt: OptimizerState, grads) -> None:
    """One bias-corrected Adam update over all parameters."""
    if len(grads) != net.n_layers:
        raise ValueError("gradient list does not match the network layers")
    rate = opt.current_rate()
    t = opt.step_count + 1
    bias1 = 1.0 - ADAM_BETA1**t
    bias2 = 1.0 - ADAM_BETA2**t
    for layer, (grad_w, grad_b) in enumerate(grads):
        for param, grad, m, v in (
            (net.weights[layer], grad_w, opt.m_weights[layer], opt.v_weights[layer]),
            (net.biases[layer], grad_b, opt.m_biases[layer], opt.v_biases[layer]),
        ):
            if param.shape != grad.shape:
                raise ValueError("gradient shape does not match parameter shape")
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * np.square(grad)
            m_hat = m / bias1
            v_hat = v / bias2
            param -= rate * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)
    opt.step_count = t


def copy_parameters(src: QNetwork, dst: QNetwork) -> None:
    """Deep-copy weights and biases from src into dst (shapes must match)."""
    if src.layer_sizes != dst.layer_sizes:
        raise ValueError(
            f"layer sizes differ: {src.layer_sizes} vs {dst.layer_sizes}"
        )
    for layer in range(src.n_layers):
        dst.weights[layer][...] = src.weights[layer]
        dst.biases[layer][...] = src.biases[layer]


def save_checkpoint(net: QNetwork, path) -> None:
    """Write the network to the documented qnet-v1 text format."""
    lines = [
        CHECKPOINT_TAG,
        "layers " + " ".join(str(s) for s in net.layer_sizes),
        f"dropout {net.dropout_rate:.17g}",
    ]
    for layer in range(net.n_layers):
        weight = net.weights[layer]
        bias = net.biases[layer]
        lines.append(f"W {layer} {weight.shape[0]} {weight.shape[1]}")
        for row in weight:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(f"b {layer} {bias.shape[0]}")
        lines.append(" ".join(f"{v:.17g}" for v in bias))
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> QNetwork:
    """Read a qnet-v1 checkpoint back into a network (inference mode)."""
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or lines[0] != CHECKPOINT_TAG:
        raise ValueError(f"not a {CHECKPOINT_TAG} checkpoint: {path}")
    if not lines[1].startswith("layers "):
        raise ValueError("malformed checkpoint: missing layers line")
    sizes = [int(tok) for tok in lines[1].split()[1:]]
    if not lines[2].startswith("dropout "):
        raise ValueError("malformed checkpoint: missing dropout line")
    dropout = float(lines[2].split()[1])
    net = QNetwork(sizes, dropout_rate=dropout, rng=np.random.default_rng(0))
    cursor = 3
    for layer in range(net.n_layers):
        rows, cols = net.weights[layer].shape
        header = lines[cursor].split()
        if header[:2] != ["W", str(layer)] or header[2:] != [str(rows), str(cols)]:
            raise ValueError(f"malformed checkpoint at layer {layer} weights")
        cursor += 1
        block = [
            np.array(lines[cursor + r].split(), dtype=np.float64) for r in range(rows)
        ]
        weight = np.vstack(block)
        if weight.shape != (rows, cols):
            raise ValueError(f"weight block shape mismatch at layer {layer}")
        net.weights[layer] = weight
        cursor += rows
        header = lines[cursor].split()
        if header[:2] != ["b", str(layer)] or header[2:] != [str(rows)]:
            raise ValueError(f"malformed checkpoint at layer {layer} biases")
        cursor += 1
        bias = np.array(lines[cursor].split(), dtype=np.float64)
        if bias.shape != (rows,):
            raise ValueError(f"bias block shape mismatch at layer {layer}")
        net.biases[layer] = bias
        cursor += 1
    return net
