"""Index learning with state aggregation (one-hot group features).

Contiguous blocks of ``group_size`` states share one weight per action and
threshold slice, so ``Q(s, a, G) ~ w[group(s), a, G]``. One subsidy is learned
per group and judged at the group's median state; every state in a group
reports that group's index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import MdpModel, Transition
from .explore import ExplorationPolicy
from .tabular import ReinitScheme
from .windex import IndexRun, two_timescale


@dataclass(frozen=True)
class Aggregation:
    n_states: int
    group_size: int

    def __post_init__(self):
        if self.group_size < 1 or self.n_states < 1:
            raise ValueError("group_size and n_states must be positive")

    @property
    def n_groups(self) -> int:
        return -(-self.n_states // self.group_size)

    @property
    def group_of(self) -> np.ndarray:
        return np.arange(self.n_states, dtype=np.int64) // self.group_size

    @property
    def representatives(self) -> np.ndarray:
        """Lower median state of each group."""
        starts = np.arange(self.n_groups) * self.group_size
        sizes = np.minimum(self.group_size, self.n_states - starts)
        return (starts + (sizes - 1) // 2).astype(np.int64)


def features(agg: Aggregation, s: int) -> int:
    """Index of the active one-hot feature for state ``s``."""
    if not 0 <= s < agg.n_states:
        raise ValueError(f"state {s} out of range")
    return s // agg.group_size


def fa_q_update(w: np.ndarray, agg: Aggregation, t: Transition, s_tilde: int, alpha: float, beta: float,
                subsidy: float = 0.0) -> float:
    """Semi-gradient step on ``w[:, :, s_tilde]``; with one-hot features only one weight moves."""
    s, a, r, s_next = t
    g, g_next = features(agg, s), features(agg, s_next)
    err = r + (1 - a) * subsidy + beta * max(w[g_next, 0, s_tilde], w[g_next, 1, s_tilde]) - w[g, a, s_tilde]
    w[g, a, s_tilde] += alpha * err
    return float(err)


def expand(agg: Aggregation, group_values: np.ndarray) -> np.ndarray:
    """Per-state view of a per-group vector."""
    return np.asarray(group_values)[agg.group_of]


def run_fa_index_learning(
    model: MdpModel,
    agg: Aggregation,
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
    """Aggregated two-timescale learner. ``lambdas`` in the result are per group; see :func:`expand`.

    ``probe``, if given, is the per-group reference index (e.g. the exact index
    of each group's median state).
    """
    if agg.n_states != model.n_states:
        raise ValueError("aggregation and model disagree on the number of states")
    return two_timescale(
        model, agg.group_of, agg.representatives, policy, alpha, gamma, beta, k_max, t_max, delta,
        scheme, seed, probe, "QLL-FA", n_jobs,
    )
