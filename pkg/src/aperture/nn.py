"""Fully connected feed-forward binary classifier, trained from scratch.

The network maps a feature vector through ReLU or tanh hidden layers to a
single sigmoid output (probability of the window being open). Training is
minibatch stochastic gradient descent with a per-coordinate adaptive step
(accumulated squared gradients) and an L1 proximal operator applied after
each step, so regularized weights reach exact zeros. Biases are exempt
from the shrinkage.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .validation import as_binary_vector, as_float_matrix

PROB_EPS = 1e-12


@dataclass(frozen=True)
class NetworkConfig:
    input_width: int
    hidden_layer_sizes: tuple[int, ...] = (64, 94, 81, 10, 25)
    hidden_activation: str = "relu"
    init_seed: int = 0
    init_scale: float | None = None

    def __post_init__(self):
        if self.input_width < 1:
            raise ValueError(f"input_width must be >= 1, got {self.input_width}")
        if not 1 <= len(self.hidden_layer_sizes) <= 7:
            raise ValueError(
                f"hidden layer count must be in [1, 7], got {len(self.hidden_layer_sizes)}"
            )
        if any(s < 1 for s in self.hidden_layer_sizes):
            raise ValueError(f"all layer sizes must be >= 1: {self.hidden_layer_sizes}")
        if self.hidden_activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.hidden_activation!r}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_width, *self.hidden_layer_sizes, 1]


@dataclass
class Network:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str
    config: NetworkConfig

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[1]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_width] + [w.shape[0] for w in self.weights]

    def copy(self) -> "Network":
        return Network(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
            config=self.config,
        )

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l1: float = 0.0001
    batch_size: int = 4096
    iterations: int = 10000
    accumulator_init: float = 0.1
    shuffle_seed: int = 0
    log_every: int = 100
    sample_with_replacement: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.l1 < 0:
            raise ValueError(f"l1 must be >= 0, got {self.l1}")
        if not 128 <= self.batch_size <= 8192:
            raise ValueError(f"batch_size must be in [128, 8192], got {self.batch_size}")
        if self.accumulator_init <= 0:
            raise ValueError(
                f"accumulator_init must be > 0, got {self.accumulator_init}"
            )
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")


@dataclass
class OptimizerState:
    """Per-parameter squared-gradient accumulators for the adaptive step."""

    grad_sq_weights: list[np.ndarray]
    grad_sq_biases: list[np.ndarray]
    step: int = 0

    @classmethod
    def fresh(cls, network: Network, accumulator_init: float) -> "OptimizerState":
        return cls(
            grad_sq_weights=[np.full_like(w, accumulator_init) for w in network.weights],
            grad_sq_biases=[np.full_like(b, accumulator_init) for b in network.biases],
            step=0,
        )


@dataclass
class TrainHistory:
    iterations: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    l1_penalty: list[float] = field(default_factory=list)
    wall_clock_s: list[float] = field(default_factory=list)

    def record(self, iteration: int, loss: float, penalty: float, wall: float) -> None:
        self.iterations.append(iteration)
        self.loss.append(loss)
        self.l1_penalty.append(penalty)
        self.wall_clock_s.append(wall)


def init_network(config: NetworkConfig) -> Network:
    """Uniform initialization with per-layer bounds sqrt(6/(fan_in+fan_out)).

    Biases start at zero. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(config.init_seed)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = config.init_scale
        if s is None:
            s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(
        weights=weights,
        biases=biases,
        hidden_activation=config.hidden_activation,
        config=config,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _hidden_act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _forward_pass(network: Network, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """All layer pre-activations and activations; activations[0] is X."""
    acts = [X]
    pre = []
    a = X
    last = len(network.weights) - 1
    for i, (w, b) in enumerate(zip(network.weights, network.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = _sigmoid(z) if i == last else _hidden_act(z, network.hidden_activation)
        acts.append(a)
    return pre, acts


def forward(network: Network, X) -> np.ndarray:
    """Probabilities in (0, 1) for a batch of feature vectors."""
    X = as_float_matrix(X, "X", width=network.input_width)
    _, acts = _forward_pass(network, X)
    return acts[-1][:, 0]


def loss(probabilities, labels) -> float:
    """Mean binary cross-entropy with probabilities clamped away from {0, 1}."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = as_binary_vector(labels, "labels")
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape} probabilities vs {y.shape} labels")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def backward(
    network: Network, X, labels
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of the mean cross-entropy for every weight and bias.

    The ReLU subgradient at 0 is taken as 0.
    """
    X = as_float_matrix(X, "X", width=network.input_width)
    y = as_binary_vector(labels, "labels")
    if len(y) != X.shape[0]:
        raise ValueError(f"batch has {X.shape[0]} rows but {len(y)} labels")
    pre, acts = _forward_pass(network, X)
    for z in pre:
        if not np.all(np.isfinite(z)):
            raise FloatingPointError("non-finite activation encountered in backward")
    n = X.shape[0]
    # Sigmoid + cross-entropy: d(loss)/d(z_out) = (p - y) / n.
    delta = (acts[-1] - y[:, None]) / n
    grads_w: list[np.ndarray] = [None] * len(network.weights)
    grads_b: list[np.ndarray] = [None] * len(network.biases)
    for i in range(len(network.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = np.sum(delta, axis=0)
        if i > 0:
            delta = delta @ network.weights[i]
            if network.hidden_activation == "relu":
                delta = delta * (pre[i - 1] > 0)
            else:
                delta = delta * (1.0 - acts[i] ** 2)
    return grads_w, grads_b


def prox_update(
    w: np.ndarray, g: np.ndarray, G: np.ndarray, learning_rate: float, l1: float
) -> None:
    """In-place adaptive step followed by the L1 soft-threshold.

    G += g^2; eta_i = lr / sqrt(G_i); u = w - eta_i * g;
    w = sign(u) * max(0, |u| - eta_i * l1).
    """
    G += g * g
    eta = learning_rate / np.sqrt(G)
    u = w - eta * g
    if l1 > 0:
        np.multiply(np.sign(u), np.maximum(np.abs(u) - eta * l1, 0.0), out=w)
    else:
        w[...] = u


def prox_adagrad_step(
    network: Network,
    grads: tuple[list[np.ndarray], list[np.ndarray]],
    state: OptimizerState,
    learning_rate: float,
    l1: float,
) -> tuple[Network, OptimizerState]:
    """Apply one proximal adaptive-gradient step in place.

    Biases are updated with the adaptive step but exempt from the L1
    shrink. A non-finite gradient aborts the step before any mutation.
    """
    grads_w, grads_b = grads
    for g in (*grads_w, *grads_b):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient; step aborted")
    for w, g, G in zip(network.weights, grads_w, state.grad_sq_weights):
        prox_update(w, g, G, learning_rate, l1)
    for b, g, G in zip(network.biases, grads_b, state.grad_sq_biases):
        prox_update(b, g, G, learning_rate, 0.0)
    state.step += 1
    return network, state


def l1_penalty(network: Network, l1: float) -> float:
    return l1 * float(sum(np.sum(np.abs(w)) for w in network.weights))


def train(
    network: Network,
    X,
    y,
    cfg: TrainConfig,
    state: OptimizerState | None = None,
) -> tuple[Network, OptimizerState, TrainHistory]:
    """Minibatch training; returns a trained copy, optimizer state, history.

    Minibatches come from a seeded shuffle of the sample indices, reshuffled
    each epoch; a short final batch of an epoch is used as-is. The input
    network is not modified.
    """
    X = as_float_matrix(X, "X", width=network.input_width)
    y = as_binary_vector(y, "y")
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty sample set")
    if n < cfg.batch_size and not cfg.sample_with_replacement:
        raise ValueError(
            f"{n} samples < batch size {cfg.batch_size}; "
            "enable sample_with_replacement or lower the batch size"
        )

    net = network.copy()
    if state is None:
        state = OptimizerState.fresh(net, cfg.accumulator_init)
    rng = np.random.default_rng(cfg.shuffle_seed)
    history = TrainHistory()
    start = time.perf_counter()

    perm = None
    offset = 0
    for it in range(1, cfg.iterations + 1):
        if cfg.sample_with_replacement:
            idx = rng.integers(0, n, size=cfg.batch_size)
        else:
            if perm is None or offset >= n:
                perm = rng.permutation(n)
                offset = 0
            idx = perm[offset : offset + cfg.batch_size]
            offset += cfg.batch_size
        bx, by = X[idx], y[idx]
        grads = backward(net, bx, by)
        if cfg.log_every and (it % cfg.log_every == 0 or it == cfg.iterations):
            batch_loss = loss(forward(net, bx), by)
            history.record(
                it, batch_loss, l1_penalty(net, cfg.l1), time.perf_counter() - start
            )
        prox_adagrad_step(net, grads, state, cfg.learning_rate, cfg.l1)
    return net, state, history


def predict(network: Network, X, threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Thresholded states and raw probabilities; p >= threshold means open."""
    p = forward(network, X)
    return (p >= threshold).astype(np.int8), p
