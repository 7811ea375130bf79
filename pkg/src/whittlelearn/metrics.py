"""Error functionals and per-run records."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


def delta_v(q: np.ndarray, v_star: np.ndarray) -> float:
    """Root-mean-square gap between the greedy values of ``q`` and the optimal values."""
    v = np.asarray(q).max(axis=1)
    v_star = np.asarray(v_star)
    if v.shape != v_star.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {v_star.shape}")
    return float(np.sqrt(np.mean((v - v_star) ** 2)))


def threshold_gaps(q: np.ndarray, rep_states: np.ndarray | None = None) -> np.ndarray:
    """``Q(s~, 1, s~) - Q(s~, 0, s~)`` for every threshold slice of a ``(rows, 2, slices)`` tensor.

    ``rep_states`` maps slice -> row holding its threshold state (identity for tabular tensors).
    """
    q = np.asarray(q)
    slices = np.arange(q.shape[2])
    rows = slices if rep_states is None else np.asarray(rep_states)
    return q[rows, 1, slices] - q[rows, 0, slices]


def delta_lambda(q: np.ndarray, rep_states: np.ndarray | None = None) -> float:
    return float(np.max(np.abs(threshold_gaps(q, rep_states))))


def index_error(learned, oracle) -> float:
    learned, oracle = np.asarray(learned, dtype=np.float64), np.asarray(oracle, dtype=np.float64)
    if learned.shape != oracle.shape:
        raise ValueError(f"shape mismatch: {learned.shape} vs {oracle.shape}")
    return float(np.max(np.abs(learned - oracle)))


@dataclass
class RunRecord:
    """Metric stream of one run.

    ``curve`` rows are ``(iteration, error, wallclock_ms)``; ``extras`` holds
    optional parallel columns (e.g. ``index_error``, ``loss``), one value per
    curve row.
    """

    algorithm: str
    policy: str
    curve: list[tuple[int, float, float]] = field(default_factory=list)
    extras: dict[str, list[float]] = field(default_factory=dict)
    iterations: int = 0
    compute_time_min: float = 0.0
    diagnostics: dict = field(default_factory=dict, repr=False)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def log(self, iteration: int, error: float, **extra: float) -> None:
        if self.curve and iteration <= self.curve[-1][0]:
            raise ValueError("curve iterations must be strictly increasing")
        elapsed_ms = (time.perf_counter() - self._t0) * 1e3
        self.curve.append((int(iteration), float(error), elapsed_ms))
        for key, value in extra.items():
            self.extras.setdefault(key, []).append(float(value))

    def finish(self, iterations: int) -> "RunRecord":
        self.iterations = int(iterations)
        self.compute_time_min = (time.perf_counter() - self._t0) / 60.0
        return self

    @property
    def final_error(self) -> float:
        return self.curve[-1][1] if self.curve else float("nan")

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "policy": self.policy,
            "iterations": self.iterations,
            "compute_time_min": self.compute_time_min,
            "final_error": self.final_error,
        }
