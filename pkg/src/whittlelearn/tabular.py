"""Asynchronous constant-stepsize Q-learning with optional state re-initialisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .envs import MdpModel, Transition
from .explore import ExplorationPolicy
from .metrics import RunRecord, delta_v

NONE = "none"
PERIODIC_RANDOM = "periodic_random"
INVERSE_COUNT = "inverse_count"
_REINIT_CODES = {NONE: _kernels.REINIT_NONE, PERIODIC_RANDOM: _kernels.REINIT_PERIODIC, INVERSE_COUNT: _kernels.REINIT_INVERSE}

INITIAL_VISIT_COUNT = 2


@dataclass(frozen=True)
class ReinitScheme:
    """How the current state is reset during a run.

    ``periodic_random`` jumps to a uniform state every ``period`` steps;
    ``inverse_count`` jumps to a state drawn with probability proportional to
    ``1 / sum_a N(s, a)``, where ``N`` starts at 2.
    """

    kind: str = NONE
    period: int = 50

    def __post_init__(self):
        if self.kind not in _REINIT_CODES:
            raise ValueError(f"unknown re-initialisation scheme {self.kind!r}")
        if self.period < 1:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def code(self) -> int:
        return _REINIT_CODES[self.kind]

    @classmethod
    def parse(cls, text: str) -> "ReinitScheme":
        """Accept ``none``, ``periodic:N`` / ``periodic_random:N``, ``inverse_count[:N]``."""
        name, _, period = text.partition(":")
        name = {"periodic": PERIODIC_RANDOM}.get(name, name)
        return cls(name, int(period)) if period else cls(name)

    def __str__(self) -> str:
        if self.kind == NONE:
            return NONE
        return f"{'periodic' if self.kind == PERIODIC_RANDOM else self.kind}:{self.period}"


def new_visit_counts(n_states: int) -> np.ndarray:
    return np.full((n_states, 2), INITIAL_VISIT_COUNT, dtype=np.int64)


def reinit_probabilities(visit_counts: np.ndarray) -> np.ndarray:
    inv = 1.0 / np.asarray(visit_counts).sum(axis=1)
    return inv / inv.sum()


def maybe_reinit(
    scheme: ReinitScheme,
    iteration: int,
    current: int,
    rng: np.random.Generator,
    visit_counts: np.ndarray,
) -> int:
    """State to continue from at step ``iteration``; ``visit_counts`` is the ``(|S|, 2)`` table N(s, a)."""
    if scheme.kind == NONE or iteration % scheme.period:
        return current
    u = rng.random()
    if scheme.kind == PERIODIC_RANDOM:
        n = visit_counts.shape[0]
        return min(int(u * n), n - 1)
    probs = reinit_probabilities(visit_counts)
    return min(int(np.searchsorted(np.cumsum(probs), u, side="right")), probs.size - 1)


def q_update(q: np.ndarray, t: Transition, alpha: float, beta: float, subsidy: float = 0.0) -> float:
    """One asynchronous update of ``q[t.state, t.action]`` in place; returns the TD error."""
    s, a, r, s_next = t
    err = r + (1 - a) * subsidy + beta * max(q[s_next, 0], q[s_next, 1]) - q[s, a]
    q[s, a] += alpha * err
    return float(err)


def q_bound(model: MdpModel, beta: float, subsidy: float = 0.0) -> float:
    """Sup-norm bound on Q-iterates started from zero."""
    return (np.max(np.abs(model.rewards)) + abs(subsidy)) / (1.0 - beta)


def run_qlearning(
    model: MdpModel,
    policy: ExplorationPolicy,
    alpha: float,
    beta: float,
    t_max: int,
    rng: np.random.Generator | int,
    subsidy: float = 0.0,
    scheme: ReinitScheme = ReinitScheme(),
    probe: np.ndarray | None = None,
    delta: float | None = None,
    stride: int = 100,
    window: int = 1000,
) -> tuple[RunRecord, np.ndarray]:
    """Q-learning for ``t_max`` steps from ``Q = 0`` and a uniformly drawn start state.

    With ``probe`` (the optimal values) the RMS value error is logged every
    ``stride`` steps. With ``delta`` the run stops once the mean of
    ``|alpha * err|`` over the last ``window`` updates drops below it.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    rng = np.random.default_rng(rng)
    n = model.n_states
    q = np.zeros((n, 2))
    counts = new_visit_counts(n)
    row_of = np.arange(n, dtype=np.int64)
    wbuf, wstate = _kernels.new_window(window)
    record = RunRecord("QL", policy.label)
    s = int(rng.integers(n))
    done = 0
    while done < t_max:
        chunk = min(stride, t_max - done)
        uniforms = rng.random((chunk, 3))
        s, steps, stopped = _kernels.q_loop(
            q, counts, model.cdf, model.rewards, row_of, s,
            alpha, beta, subsidy, policy.code, policy.epsilon,
            scheme.code, scheme.period, uniforms, done,
            delta or 0.0, wbuf, wstate,
        )
        done += steps
        if probe is not None and (done % stride == 0 or stopped or done == t_max):
            record.log(done, delta_v(q, probe))
        if stopped:
            break
    record.diagnostics["visit_counts"] = counts
    return record.finish(done), q
