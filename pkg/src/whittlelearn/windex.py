"""Two-timescale Whittle index learning with tabular Q-learning on the fast timescale.

For every threshold state ``s~`` a separate Q-table ``Q(., ., s~)`` is learned
with the passive action subsidised by the current estimate ``lam(s~)``; after
each sweep over all threshold states the estimates move along the action gap
at their own threshold state:

    lam(s~) <- lam(s~) + gamma * (Q(s~, 1, s~) - Q(s~, 0, s~))

Random streams: slice ``j`` of a run seeded with ``seed`` draws from
``SeedSequence(seed, spawn_key=(j,))``, so slices are independent of each other
and of the execution order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from . import _kernels
from .envs import MdpModel
from .explore import ExplorationPolicy
from .metrics import RunRecord, index_error, threshold_gaps
from .oracle import index_bound
from .tabular import ReinitScheme, new_visit_counts


class IndexRun(NamedTuple):
    record: RunRecord
    lambdas: np.ndarray
    q: np.ndarray  # (rows, 2, slices)


def index_update(lambdas: np.ndarray, q: np.ndarray, gamma: float, bound: float | None = None,
                 rep_states: np.ndarray | None = None) -> np.ndarray:
    """Slow-timescale step on every threshold slice, clamped to ``[-bound, bound]``."""
    out = lambdas + gamma * threshold_gaps(q, rep_states)
    if bound is not None:
        np.clip(out, -bound, bound, out=out)
    return out


def slice_streams(seed, n_slices: int) -> list[np.random.Generator]:
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2**63))
    entropy = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    return [np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(j,))) for j in range(n_slices)]


def check_stepsizes(alpha: float, gamma: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 <= gamma < alpha:
        raise ValueError(f"index stepsize gamma={gamma} must satisfy 0 <= gamma < alpha={alpha}")


def two_timescale(
    model: MdpModel,
    row_of: np.ndarray,
    rep_states: np.ndarray,
    policy: ExplorationPolicy,
    alpha: float,
    gamma: float,
    beta: float,
    k_max: int,
    t_max: int,
    delta: float,
    scheme: ReinitScheme,
    seed,
    probe: np.ndarray | None = None,
    label: str = "QLL",
    n_jobs: int = 1,
) -> IndexRun:
    """Shared engine: slice ``j`` uses subsidy ``lam[j]`` and is judged at state ``rep_states[j]``.

    ``row_of`` maps states to rows of the value table (identity for tabular,
    group ids under aggregation). ``probe`` holds the true index of each slice.
    """
    check_stepsizes(alpha, gamma)
    if k_max < 1 or t_max < 1:
        raise ValueError("k_max and t_max must be positive")
    n = model.n_states
    row_of = np.ascontiguousarray(row_of, dtype=np.int64)
    rep_states = np.asarray(rep_states, dtype=np.int64)
    n_rows, n_slices = int(row_of.max()) + 1, rep_states.size
    rep_rows = row_of[rep_states]
    q = np.zeros((n_rows, 2, n_slices))
    lambdas = np.zeros(n_slices)
    counts = [new_visit_counts(n) for _ in range(n_slices)]
    streams = slice_streams(seed, n_slices)
    bound = index_bound(model, beta)
    no_window = _kernels.new_window(1)
    record = RunRecord(label, policy.label)

    def fast(j: int, k: int) -> None:
        rng = streams[j]
        s = int(rng.integers(n))
        uniforms = rng.random((t_max, 3))
        qj = np.ascontiguousarray(q[:, :, j])
        _kernels.q_loop(
            qj, counts[j], model.cdf, model.rewards, row_of, s,
            alpha, beta, lambdas[j], policy.code, policy.epsilon,
            scheme.code, scheme.period, uniforms, k * t_max,
            0.0, *no_window,
        )
        q[:, :, j] = qj

    pool = ThreadPoolExecutor(n_jobs) if n_jobs > 1 else None
    k = 0
    try:
        for k in range(k_max):
            if pool is None:
                for j in range(n_slices):
                    fast(j, k)
            else:
                list(pool.map(fast, range(n_slices), [k] * n_slices))
            gap = float(np.max(np.abs(threshold_gaps(q, rep_rows))))
            lambdas = index_update(lambdas, q, gamma, bound, rep_rows)
            extra = {} if probe is None else {"index_error": index_error(lambdas, probe)}
            record.log(k, gap, **extra)
            if gap < delta:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    record.diagnostics["visit_counts"] = counts
    return IndexRun(record.finish(k + 1), lambdas, q)


def run_index_learning(
    model: MdpModel,
    policy: ExplorationPolicy,
    alpha: float,
    gamma: float,
    beta: float,
    k_max: int,
    t_max: int,
    delta: float,
    seed,
    scheme: ReinitScheme = ReinitScheme(),
    probe: np.ndarray | None = None,
    n_jobs: int = 1,
) -> IndexRun:
    """Learn one index per state; ``probe`` is the exact index vector, if known."""
    states = np.arange(model.n_states, dtype=np.int64)
    return two_timescale(
        model, states, states, policy, alpha, gamma, beta, k_max, t_max, delta,
        scheme, seed, probe, "QLL", n_jobs,
    )
