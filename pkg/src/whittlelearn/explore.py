"""Action-selection rules shared by the learners: epsilon-greedy, softmax and epsilon-softmax."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPSILON_GREEDY = "epsilon_greedy"
SOFTMAX = "softmax"
EPSILON_SOFTMAX = "epsilon_softmax"

# CLI labels, as used in the result tables
LABELS = {"eg": EPSILON_GREEDY, "so": SOFTMAX, "es": EPSILON_SOFTMAX}
SHORT = {v: k.upper() for k, v in LABELS.items()}
# integer codes understood by the compiled loops
KIND_CODES = {EPSILON_GREEDY: 0, SOFTMAX: 1, EPSILON_SOFTMAX: 2}


@dataclass(frozen=True)
class EpsilonDecay:
    """Multiply epsilon by ``rate`` every ``period`` steps, never going below ``floor``."""

    rate: float = 0.99
    period: int = 20
    floor: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"decay rate must lie in (0, 1], got {self.rate}")
        if self.period < 1:
            raise ValueError(f"decay period must be positive, got {self.period}")


@dataclass(frozen=True)
class ExplorationPolicy:
    kind: str = EPSILON_GREEDY
    epsilon: float = 0.4
    decay: EpsilonDecay | None = None

    def __post_init__(self):
        kind = LABELS.get(self.kind, self.kind)
        if kind not in KIND_CODES:
            raise ValueError(f"unknown exploration policy {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.decay is not None and self.decay.floor > self.epsilon:
            raise ValueError("decay floor exceeds the initial epsilon")

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def label(self) -> str:
        return SHORT[self.kind]

    def epsilon_at(self, step: int) -> float:
        """Epsilon in effect after ``step`` decisions under the decay schedule."""
        if self.decay is None:
            return self.epsilon
        d = self.decay
        return max(d.floor, self.epsilon * d.rate ** (step // d.period))


def softmax(q_row: np.ndarray) -> np.ndarray:
    z = np.exp(q_row - np.max(q_row))
    return z / z.sum()


def action_probabilities(policy: ExplorationPolicy, q_row, epsilon: float | None = None) -> np.ndarray:
    q_row = np.asarray(q_row, dtype=np.float64)
    if q_row.ndim != 1 or q_row.size < 2:
        raise ValueError("q_row must be a vector over at least two actions")
    if np.any(np.isnan(q_row)):
        raise ValueError("q_row contains NaN")
    eps = policy.epsilon if epsilon is None else epsilon
    n = q_row.size
    if policy.kind == EPSILON_GREEDY:
        probs = np.full(n, eps / n)
        probs[int(np.argmax(q_row))] += 1.0 - eps
        return probs
    soft = softmax(q_row)
    if policy.kind == SOFTMAX:
        return soft
    return eps / n + (1.0 - eps) * soft


def select_action(policy: ExplorationPolicy, q_row, rng: np.random.Generator, epsilon: float | None = None) -> int:
    probs = action_probabilities(policy, q_row, epsilon)
    return _inverse_cdf(probs, rng.random())


def _inverse_cdf(probs: np.ndarray, u: float) -> int:
    a = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(a, probs.size - 1)
