"""DQN inside the two-timescale index loop.

Each threshold slice owns an online network, a target network and a replay
buffer. Networks are small fully-connected rectifier nets over a one-hot state
encoding with one linear output per action, trained by plain constant-stepsize
gradient descent on the squared TD error against targets from the target net.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs import MdpModel, step
from .explore import EpsilonDecay, ExplorationPolicy, select_action
from .metrics import RunRecord, index_error
from .oracle import index_bound
from .tabular import ReinitScheme, maybe_reinit, new_visit_counts
from .windex import IndexRun, slice_streams


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(layer_sizes, rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def _forward_batch(net: Mlp, states: np.ndarray):
    # one-hot input times the first weight matrix is a row lookup
    h = net.weights[0][states] + net.biases[0]
    pre = [h]
    acts = [np.maximum(h, 0.0)]
    for w, b in zip(net.weights[1:-1], net.biases[1:-1]):
        h = acts[-1] @ w + b
        pre.append(h)
        acts.append(np.maximum(h, 0.0))
    out = acts[-1] @ net.weights[-1] + net.biases[-1]
    return out, pre, acts


def forward(net: Mlp, s: int) -> np.ndarray:
    out, _, _ = _forward_batch(net, np.array([s]))
    return out[0]


def forward_all(net: Mlp, states: np.ndarray) -> np.ndarray:
    return _forward_batch(net, np.asarray(states, dtype=np.int64))[0]


def backward_batch(net: Mlp, states, actions, targets) -> tuple[list[np.ndarray], float]:
    """Minibatch-mean gradient of ``0.5 * (Q(s, a) - y)**2``, ordered as :meth:`Mlp.params`; also the mean loss."""
    states = np.asarray(states, dtype=np.int64)
    actions = np.asarray(actions, dtype=np.int64)
    n = states.size
    out, pre, acts = _forward_batch(net, states)
    rows = np.arange(n)
    diff = out[rows, actions] - np.asarray(targets, dtype=np.float64)
    upstream = np.zeros_like(out)
    upstream[rows, actions] = diff / n

    n_layers = len(net.weights)
    gw: list[np.ndarray] = [None] * n_layers
    gb: list[np.ndarray] = [None] * n_layers
    gw[-1] = acts[-1].T @ upstream
    gb[-1] = upstream.sum(axis=0)
    grad_h = (upstream @ net.weights[-1].T) * (pre[-1] > 0)
    for i in range(n_layers - 2, 0, -1):
        gw[i] = acts[i - 1].T @ grad_h
        gb[i] = grad_h.sum(axis=0)
        grad_h = (grad_h @ net.weights[i].T) * (pre[i - 1] > 0)
    gw0 = np.zeros_like(net.weights[0])
    np.add.at(gw0, states, grad_h)
    gw[0] = gw0
    gb[0] = grad_h.sum(axis=0)
    return [*gw, *gb], float(0.5 * np.mean(diff**2))


def backward(net: Mlp, s: int, a: int, target: float) -> list[np.ndarray]:
    return backward_batch(net, [s], [a], [target])[0]


def sgd_step(net: Mlp, grads: list[np.ndarray], stepsize: float) -> Mlp:
    """In-place ``theta <- theta - stepsize * grad``; returns ``net``."""
    if stepsize <= 0:
        raise ValueError(f"stepsize must be positive, got {stepsize}")
    for p, g in zip(net.params(), grads):
        p -= stepsize * g
    return net


def soft_update(target: Mlp, online: Mlp, tau: float, convention: str = "retain") -> Mlp:
    """Move ``target`` toward ``online`` in place.

    ``retain``: ``target <- tau * target + (1 - tau) * online``.
    ``polyak``: ``target <- (1 - tau) * target + tau * online``.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    keep = {"retain": tau, "polyak": 1.0 - tau}.get(convention)
    if keep is None:
        raise ValueError(f"unknown soft-update convention {convention!r}")
    for pt, po in zip(target.params(), online.params()):
        pt *= keep
        pt += (1.0 - keep) * po
    return target


class ReplayBuffer:
    """Fixed-capacity FIFO store of transitions."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros(capacity, dtype=np.int64)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros(capacity, dtype=np.int64)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t) -> None:
        i = self.cursor
        self.states[i], self.actions[i], self.rewards[i], self.next_states[i] = t
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def oldest_first(self) -> np.ndarray:
        """Slot indices from oldest to newest entry."""
        start = self.cursor if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def sample(self, rng: np.random.Generator, n: int):
        idx = rng.choice(self.size, size=n, replace=False)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


@dataclass(frozen=True)
class DqnConfig:
    net_stepsize: float = 0.05
    index_stepsize: float = 0.01
    beta: float = 0.9
    tau: float = 0.001
    minibatch: int = 64
    memory_size: int = 10_000
    t_max: int = 500
    k_max: int = 100
    delta: float = 0.001
    hidden: tuple[int, ...] = (32, 32)
    epsilon_decay: EpsilonDecay = field(default_factory=EpsilonDecay)
    soft_update: str = "retain"

    def __post_init__(self):
        if not 0.0 <= self.index_stepsize < self.net_stepsize < 1.0:
            raise ValueError("need 0 <= index_stepsize < net_stepsize < 1")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.minibatch < 1 or self.memory_size < self.minibatch:
            raise ValueError("need 1 <= minibatch <= memory_size")


def run_dqn_index_learning(
    model: MdpModel,
    cfg: DqnConfig,
    policy: ExplorationPolicy,
    seed,
    scheme: ReinitScheme = ReinitScheme(),
    probe: np.ndarray | None = None,
) -> IndexRun:
    """DQN on the fast timescale, one net pair and buffer per threshold state.

    Epsilon starts at ``policy.epsilon`` and follows ``cfg.epsilon_decay``,
    counted in environment steps of each slice. The index step reads the
    action gap from the target network. ``IndexRun.q`` holds the target
    network's Q-values for every (state, action, slice).
    """
    n = model.n_states
    policy = ExplorationPolicy(policy.kind, policy.epsilon, cfg.epsilon_decay)
    streams = slice_streams(seed, n)
    sizes = (n, *cfg.hidden, 2)
    online = [init_mlp(sizes, rng) for rng in streams]
    target = [net.copy() for net in online]
    buffers = [ReplayBuffer(cfg.memory_size) for _ in range(n)]
    counts = [new_visit_counts(n) for _ in range(n)]
    lambdas = np.zeros(n)
    bound = index_bound(model, cfg.beta)
    states = np.arange(n)
    record = RunRecord("DQNLL", policy.label)

    k = 0
    for k in range(cfg.k_max):
        losses = []
        for j in range(n):
            rng, net, tgt, buf = streams[j], online[j], target[j], buffers[j]
            s = int(rng.integers(n))
            for t in range(cfg.t_max):
                it = k * cfg.t_max + t
                s = maybe_reinit(scheme, it, s, rng, counts[j])
                a = select_action(policy, forward(net, s), rng, policy.epsilon_at(it))
                tr = step(model, s, a, rng)
                buf.push(tr)
                counts[j][s, a] += 1
                s = tr.next_state
                if len(buf) < cfg.minibatch:
                    continue
                bs, ba, br, bn = buf.sample(rng, cfg.minibatch)
                y = br + (1 - ba) * lambdas[j] + cfg.beta * forward_all(tgt, bn).max(axis=1)
                grads, loss = backward_batch(net, bs, ba, y)
                sgd_step(net, grads, cfg.net_stepsize)
                soft_update(tgt, net, cfg.tau, cfg.soft_update)
                losses.append(loss)
        q_target = np.stack([forward_all(tgt, states) for tgt in target], axis=2)
        gaps = q_target[states, 1, states] - q_target[states, 0, states]
        lambdas = np.clip(lambdas + cfg.index_stepsize * gaps, -bound, bound)
        gap = float(np.max(np.abs(gaps)))
        extra = {"loss": float(np.mean(losses)) if losses else 0.0}
        if probe is not None:
            extra["index_error"] = index_error(lambdas, probe)
        record.log(k, gap, **extra)
        if gap < cfg.delta:
            break
    record.diagnostics["visit_counts"] = counts
    return IndexRun(record.finish(k + 1), lambdas, q_target)
