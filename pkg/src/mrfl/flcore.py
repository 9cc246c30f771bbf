"""Feed-forward network, manual backprop, and federated-averaging orchestration.

The classifier is a fixed 784-32-64-10 MLP (ReLU hidden layers, softmax
output, categorical cross-entropy) trained with plain SGD.  Parameters
flatten to a 27,882-component vector in a fixed order: layer by layer,
weight matrix row-major (input-major), then biases.

`run_fl` wires the network to the broadcast codec: each round the server
encodes the global model, every agent overwrites its local model with
whatever precision it received, trains one local epoch, and the server
averages the resulting parameter vectors (lossless uplink).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import broadcast
from .broadcast import (
    HIGH_SNR,
    IDEAL,
    LOW_SNR,
    PHYSICAL,
    AgentDecoderState,
    ServerCodecState,
)
from .modem import ChannelSpec, Constellation, build_constellation
from .quantizer import QuantizerSpec

LAYER_DIMS = (784, 32, 64, 10)
N_PARAMS = sum(fin * fout + fout for fin, fout in zip(LAYER_DIMS, LAYER_DIMS[1:]))

SCENARIOS = ("high", "mixed", "low")


@dataclass
class MLP:
    weights: list  # per layer, shape (fan_in, fan_out)
    biases: list   # per layer, shape (fan_out,)


@dataclass(frozen=True)
class TrainConfig:
    rounds: int = 60
    n_agents: int = 4
    epochs_per_round: int = 1
    learning_rate: float = 0.02
    batch_size: int = 32
    seed: int = 0
    agg_weights: tuple | None = None  # defaults to uniform 1/K

    def weights_or_uniform(self) -> np.ndarray:
        if self.agg_weights is None:
            return np.full(self.n_agents, 1.0 / self.n_agents)
        w = np.asarray(self.agg_weights, dtype=np.float64)
        if w.size != self.n_agents or not np.all(w > 0):
            raise ValueError("aggregation weights must be positive, one per agent")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("aggregation weights must sum to 1")
        return w


@dataclass(frozen=True)
class RoundMetrics:
    seed: int
    scenario: str
    round_index: int
    accuracy: float
    loss: float


def init_model(seed: int) -> MLP:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fin, fout in zip(LAYER_DIMS, LAYER_DIMS[1:]):
        limit = np.sqrt(6.0 / (fin + fout))
        weights.append(rng.uniform(-limit, limit, size=(fin, fout)))
        biases.append(np.zeros(fout))
    return MLP(weights=weights, biases=biases)


def flatten(m: MLP) -> np.ndarray:
    parts = []
    for w, b in zip(m.weights, m.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten(vec) -> MLP:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != N_PARAMS:
        raise ValueError(f"expected {N_PARAMS} parameters, got {vec.size}")
    weights, biases, pos = [], [], 0
    for fin, fout in zip(LAYER_DIMS, LAYER_DIMS[1:]):
        weights.append(vec[pos : pos + fin * fout].reshape(fin, fout).copy())
        pos += fin * fout
        biases.append(vec[pos : pos + fout].copy())
        pos += fout
    return MLP(weights=weights, biases=biases)


def _forward_pass(m: MLP, x: np.ndarray):
    """Returns (activations per layer incl. input, softmax output)."""
    acts = [x]
    a = x
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = a @ w + b
        if i < last:
            a = np.maximum(z, 0.0)
        else:
            z = z - z.max(axis=-1, keepdims=True)
            e = np.exp(z)
            a = e / e.sum(axis=-1, keepdims=True)
        acts.append(a)
    return acts, a


def forward(m: MLP, x) -> np.ndarray:
    """Class probabilities for one 784-vector or a batch (n, 784)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != LAYER_DIMS[0]:
        raise ValueError(f"input length must be {LAYER_DIMS[0]}, got {x.shape[-1]}")
    return _forward_pass(m, x)[1]


def _one_hot(labels: np.ndarray) -> np.ndarray:
    out = np.zeros((labels.size, LAYER_DIMS[-1]))
    out[np.arange(labels.size), labels] = 1.0
    return out


def backward(m: MLP, x, labels) -> np.ndarray:
    """Gradient of mean cross-entropy over the batch, in flatten order."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels))
    if labels.size == 0:
        raise ValueError("batch must be non-empty")
    acts, probs = _forward_pass(m, x)
    batch = x.shape[0]
    delta = (probs - _one_hot(labels)) / batch  # softmax + CE gradient
    grads_w, grads_b = [], []
    for i in range(len(m.weights) - 1, -1, -1):
        grads_w.append(acts[i].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ m.weights[i].T) * (acts[i] > 0)
    parts = []
    for gw, gb in zip(reversed(grads_w), reversed(grads_b)):
        parts.append(gw.ravel())
        parts.append(gb)
    return np.concatenate(parts)


def cross_entropy(m: MLP, x, labels) -> float:
    """Mean categorical cross-entropy in nats."""
    probs = forward(m, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    labels = np.atleast_1d(np.asarray(labels))
    p = probs[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def accuracy(m: MLP, x, labels) -> float:
    probs = forward(m, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    return float(np.mean(probs.argmax(axis=-1) == np.atleast_1d(labels)))


def local_train(m: MLP, x, labels, cfg: TrainConfig, rng: np.random.Generator) -> MLP:
    """One epoch of mini-batch SGD over a seeded shuffle; returns a new model."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    params = flatten(m)
    order = rng.permutation(x.shape[0])
    for start in range(0, order.size, cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        model = unflatten(params)
        params = params - cfg.learning_rate * backward(model, x[idx], labels[idx])
    return unflatten(params)


def fedavg(models: list, weights) -> np.ndarray:
    """Weighted componentwise average of parameter vectors."""
    weights = np.asarray(weights, dtype=np.float64)
    vecs = [np.asarray(v, dtype=np.float64) for v in models]
    n = vecs[0].size
    if any(v.size != n for v in vecs):
        raise ValueError("parameter vectors must have equal length")
    if len(vecs) != weights.size:
        raise ValueError("one weight per model required")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    out = np.zeros(n)
    for a, v in zip(weights, vecs):
        out += a * v
    return out


def _agent_classes(scenario: str, n_agents: int) -> list:
    if scenario == "high":
        return [HIGH_SNR] * n_agents
    if scenario == "low":
        return [LOW_SNR] * n_agents
    if scenario == "mixed":
        half = n_agents // 2
        return [HIGH_SNR] * half + [LOW_SNR] * (n_agents - half)
    raise ValueError(f"unknown scenario {scenario!r}")


def _channel_seed(seed: int, round_index: int, agent_id: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0xC4A7, round_index, agent_id))
    return int(ss.generate_state(1, np.uint64)[0])


def run_fl(
    scenario: str,
    cfg: TrainConfig,
    partitions,
    mode: str = IDEAL,
    spec: QuantizerSpec | None = None,
    theta: float | None = None,
    snr_high_db: float | None = None,
    snr_low_db: float | None = None,
) -> list:
    """Run one seeded FL experiment; returns per-round metrics.

    partitions: list of dataio.AgentPartition, one per agent.  Test accuracy
    and training loss are evaluated on the pooled test / train sets with the
    aggregated model.
    """
    if len(partitions) != cfg.n_agents:
        raise ValueError("one partition per agent required")
    spec = spec or QuantizerSpec()
    classes = _agent_classes(scenario, cfg.n_agents)
    agg_weights = cfg.weights_or_uniform()

    constellation: Constellation | None = None
    if mode == PHYSICAL:
        if theta is None or snr_high_db is None or snr_low_db is None:
            raise ValueError("physical mode requires theta, snr_high_db, snr_low_db")
        constellation = build_constellation(theta)

    global_model = flatten(init_model(cfg.seed))
    server = ServerCodecState.initial(N_PARAMS, spec)
    agents = [AgentDecoderState.initial(N_PARAMS, cls) for cls in classes]

    pooled_test_x = np.concatenate([p.test_images for p in partitions])
    pooled_test_y = np.concatenate([p.test_labels for p in partitions])
    pooled_train_x = np.concatenate([p.train_images for p in partitions])
    pooled_train_y = np.concatenate([p.train_labels for p in partitions])

    metrics = []
    for rnd in range(cfg.rounds):
        payload = broadcast.server_encode_round(global_model, server)
        if mode == PHYSICAL:
            for agent_id, agent in enumerate(agents):
                snr = snr_high_db if agent.agent_class == HIGH_SNR else snr_low_db
                agent.channel = ChannelSpec(snr, _channel_seed(cfg.seed, rnd, agent_id))
        received = broadcast.transmit_round(payload, agents, mode, constellation)

        local_vecs = []
        for agent_id, (agent, rx) in enumerate(zip(agents, received)):
            if agent.agent_class == HIGH_SNR:
                model_vec = broadcast.agent_decode_high(rx, agent)
            else:
                model_vec = broadcast.agent_decode_low(rx.d, agent, rx.round_index)
            part = partitions[agent_id]
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=cfg.seed, spawn_key=(rnd, agent_id))
            )
            trained = unflatten(model_vec)
            for _ in range(cfg.epochs_per_round):
                trained = local_train(trained, part.train_images, part.train_labels, cfg, rng)
            local_vecs.append(flatten(trained))

        global_model = fedavg(local_vecs, agg_weights)
        agg = unflatten(global_model)
        metrics.append(
            RoundMetrics(
                seed=cfg.seed,
                scenario=scenario,
                round_index=rnd,
                accuracy=accuracy(agg, pooled_test_x, pooled_test_y),
                loss=cross_entropy(agg, pooled_train_x, pooled_train_y),
            )
        )
    return metrics
