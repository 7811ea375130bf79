"""Benchmark restless-arm models and transition sampling.

States are 0-indexed. Every model has two actions: 0 (passive) and 1 (active).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

ROW_SUM_TOL = 1e-12


class ModelError(ValueError):
    """Raised for malformed or non-stochastic model descriptions."""


@dataclass(frozen=True)
class MdpModel:
    """Finite-state two-action arm: transition matrices ``p0``, ``p1`` and rewards ``r(s, a)``."""

    p0: np.ndarray
    p1: np.ndarray
    rewards: np.ndarray
    name: str = "custom"
    # cumulative rows, stacked as (action, state, next_state)
    cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p0 = np.array(self.p0, dtype=np.float64)
        p1 = np.array(self.p1, dtype=np.float64)
        rewards = np.array(self.rewards, dtype=np.float64)
        n = p0.shape[0] if p0.ndim == 2 else -1
        if n < 1 or p0.shape != (n, n) or p1.shape != (n, n):
            raise ModelError(f"p0 and p1 must be square matrices of equal size, got {p0.shape} and {p1.shape}")
        if rewards.shape != (n, 2):
            raise ModelError(f"rewards must have shape ({n}, 2), got {rewards.shape}")
        if not np.all(np.isfinite(rewards)):
            raise ModelError("rewards must be finite")
        for label, p in (("p0", p0), ("p1", p1)):
            if not np.all(np.isfinite(p)) or np.any(p < 0):
                raise ModelError(f"{label} has negative or non-finite entries")
            bad = np.flatnonzero(np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL)
            if bad.size:
                raise ModelError(f"{label} row {int(bad[0])} sums to {p[bad[0]].sum()!r}, not 1")
        for arr in (p0, p1, rewards):
            arr.flags.writeable = False
        cdf = np.cumsum(np.stack([p0, p1]), axis=2)
        cdf.flags.writeable = False
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "cdf", cdf)

    @property
    def n_states(self) -> int:
        return self.p0.shape[0]

    @property
    def transitions(self) -> np.ndarray:
        """Transition tensor indexed ``[a, s, s']``."""
        return np.stack([self.p0, self.p1])

    @property
    def r_max(self) -> float:
        return float(np.max(self.rewards))

    @property
    def reward_span(self) -> float:
        return float(np.max(self.rewards) - np.min(self.rewards))


class Transition(NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int


def make_circular() -> MdpModel:
    """Four-state model with circular dynamics; the active matrix is the passive one transposed."""
    p0 = np.array(
        [
            [0.5, 0.0, 0.0, 0.5],
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.0, 0.5, 0.5],
        ]
    )
    rewards = np.array([[-1.0, -1.0], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    return MdpModel(p0, p0.T.copy(), rewards, name="circular")


def make_unstructured() -> MdpModel:
    p0 = np.array(
        [
            [0.1502, 0.0400, 0.4156, 0.0300, 0.3642],
            [0.4000, 0.3500, 0.0800, 0.1200, 0.0500],
            [0.5276, 0.0400, 0.3991, 0.0200, 0.0133],
            [0.0500, 0.1000, 0.1500, 0.2000, 0.5000],
            [0.0191, 0.0100, 0.0897, 0.0300, 0.8512],
        ]
    )
    p1 = np.array(
        [
            [0.7196, 0.0500, 0.0903, 0.0100, 0.1301],
            [0.5500, 0.2000, 0.0500, 0.0800, 0.1200],
            [0.1903, 0.0100, 0.1663, 0.0100, 0.6234],
            [0.2000, 0.0500, 0.1500, 0.1000, 0.5000],
            [0.2501, 0.0100, 0.3901, 0.0300, 0.3198],
        ]
    )
    rewards = np.array(
        [
            [0.4580, 0.9631],
            [0.5100, 0.8100],
            [0.6508, 0.7963],
            [0.6710, 0.6061],
            [0.6873, 0.5057],
        ]
    )
    # printed to four decimals; renormalise so rows are stochastic to machine precision
    p0 /= p0.sum(axis=1, keepdims=True)
    p1 /= p1.sum(axis=1, keepdims=True)
    return MdpModel(p0, p1, rewards, name="unstructured")


def make_restart() -> MdpModel:
    """Five-state restart model: playing the arm sends it back to state 0."""
    n = 5
    p0 = np.zeros((n, n))
    p0[:, 0] = 0.1
    for k in range(n):
        p0[k, min(k + 1, n - 1)] += 0.9
    p1 = np.zeros((n, n))
    p1[:, 0] = 1.0
    rewards = np.zeros((n, 2))
    rewards[:, 0] = 0.9 ** np.arange(n)
    return MdpModel(p0, p1, rewards, name="restart")


def make_random_walk(K: int, rho: float = 0.95) -> MdpModel:
    """One-step random walk on ``K`` states with identical dynamics under both actions.

    Interior states move down/stay/up with probabilities 0.1/0.2/0.7; the
    boundary rows put 0.3 on staying (bottom) or stepping back (top). Only the
    active action pays, ``r(k, 1) = rho**k``.
    """
    if K < 2:
        raise ModelError(f"random walk needs K >= 2, got {K}")
    if not 0.0 < rho < 1.0:
        raise ModelError(f"rho must lie in (0, 1), got {rho}")
    p = np.zeros((K, K))
    p[0, 0], p[0, 1] = 0.3, 0.7
    for k in range(1, K - 1):
        p[k, k - 1 : k + 2] = (0.1, 0.2, 0.7)
    p[K - 1, K - 2], p[K - 1, K - 1] = 0.3, 0.7
    rewards = np.zeros((K, 2))
    rewards[:, 1] = rho ** np.arange(K)
    return MdpModel(p, p.copy(), rewards, name=f"random_walk_{K}")


def load_model(path: str | Path) -> MdpModel:
    """Read a JSON model file with keys ``n_states``, ``p0``, ``p1``, ``rewards`` (row-major lists)."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from None
    missing = {"n_states", "p0", "p1", "rewards"} - set(data)
    if missing:
        raise ModelError(f"{path}: missing keys {sorted(missing)}")
    n = int(data["n_states"])
    try:
        p0 = np.asarray(data["p0"], dtype=np.float64).reshape(n, n)
        p1 = np.asarray(data["p1"], dtype=np.float64).reshape(n, n)
        rewards = np.asarray(data["rewards"], dtype=np.float64).reshape(n, 2)
    except ValueError as exc:
        raise ModelError(f"{path}: {exc}") from None
    return MdpModel(p0, p1, rewards, name=data.get("name", Path(path).stem))


def sample_row(cdf_row: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over one cumulative row in column order."""
    j = int(np.searchsorted(cdf_row, u, side="right"))
    if j >= cdf_row.shape[0]:
        # u landed above a row total that rounded below 1
        j = int(np.flatnonzero(np.diff(cdf_row, prepend=0.0) > 0)[-1])
    return j


def step(model: MdpModel, s: int, a: int, rng: np.random.Generator) -> Transition:
    nxt = sample_row(model.cdf[a, s], rng.random())
    return Transition(s, a, float(model.rewards[s, a]), nxt)
