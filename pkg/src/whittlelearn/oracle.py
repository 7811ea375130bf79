"""Known-model solvers: discounted value iteration, the subsidised dynamic program and exact Whittle indices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import MdpModel


class ConvergenceError(RuntimeError):
    """Value iteration did not reach the requested residual."""


class NoRootError(RuntimeError):
    """The action gap has no sign change: the arm is not indexable at this state."""


@dataclass(frozen=True)
class SolveResult:
    q: np.ndarray
    v: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True)
class IndexSolveResult:
    index: float
    gap: float
    bracket: tuple[float, float]


def bellman(model: MdpModel, q: np.ndarray, beta: float, subsidy: float = 0.0) -> np.ndarray:
    """Apply ``F(Q)(s,a) = r(s,a) + (1-a)*subsidy + beta * sum_s' p^a(s,s') max_a' Q(s',a')``."""
    v = q.max(axis=1)
    cont = model.transitions @ v  # (a, s)
    out = model.rewards + beta * cont.T
    out[:, 0] += subsidy
    return out


def q_subsidy(
    model: MdpModel,
    lam: float,
    beta: float,
    tol: float = 1e-10,
    max_iters: int = 10_000,
    q0: np.ndarray | None = None,
) -> SolveResult:
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    q = np.zeros((model.n_states, 2)) if q0 is None else np.array(q0, dtype=np.float64)
    residual = np.inf
    for it in range(1, max_iters + 1):
        nxt = bellman(model, q, beta, lam)
        residual = float(np.max(np.abs(nxt - q)))
        q = nxt
        if residual <= tol:
            return SolveResult(q, q.max(axis=1), residual, it)
    raise ConvergenceError(f"residual {residual:.3e} > tol {tol:.1e} after {max_iters} iterations")


def value_iteration(model: MdpModel, beta: float, tol: float = 1e-10, max_iters: int = 10_000) -> SolveResult:
    return q_subsidy(model, 0.0, beta, tol, max_iters)


def index_bound(model: MdpModel, beta: float) -> float:
    """Half-width of the initial bisection bracket; also the clamp used by the learners."""
    return model.reward_span / (1.0 - beta) + 1.0


def policy_iteration(
    model: MdpModel, lam: float, beta: float, policy: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``Q^lam`` by policy iteration; returns ``(q, greedy_policy)``.

    Each evaluation is a dense linear solve, so the result is accurate to
    round-off rather than to an iteration tolerance.
    """
    n = model.n_states
    p = model.transitions
    r = model.rewards.copy()
    r[:, 0] += lam
    pol = np.zeros(n, dtype=np.int64) if policy is None else np.array(policy, dtype=np.int64)
    rows = np.arange(n)
    eye = np.eye(n)
    for _ in range(10 * n + 10):
        v = np.linalg.solve(eye - beta * p[pol, rows], r[rows, pol])
        q = r + beta * (p @ v).T
        best = q.max(axis=1)
        # switch only on a strict improvement so ties cannot make it cycle
        improve = best > q[rows, pol] + 1e-12 * (1.0 + np.abs(best))
        if not improve.any():
            return q, pol
        pol = np.where(improve, q.argmax(axis=1), pol)
    raise ConvergenceError("policy iteration did not stabilise")


def action_gap(model: MdpModel, s: int, lam: float, beta: float) -> float:
    q, _ = policy_iteration(model, lam, beta)
    return float(q[s, 1] - q[s, 0])


def whittle_index(
    model: MdpModel,
    s_tilde: int,
    beta: float,
    root_tol: float = 1e-10,
    max_bisect: int = 200,
) -> IndexSolveResult:
    """Smallest subsidy that makes both actions equally valuable in ``s_tilde``.

    Bisects on ``g(lam) = Q^lam(s,1) - Q^lam(s,0)``, which is nonincreasing in
    ``lam`` for indexable arms.
    """
    if not 0 <= s_tilde < model.n_states:
        raise ValueError(f"state {s_tilde} out of range")
    policy = None

    def g(lam: float) -> float:
        nonlocal policy
        q, policy = policy_iteration(model, lam, beta, policy)
        return float(q[s_tilde, 1] - q[s_tilde, 0])

    bound = index_bound(model, beta)
    lo, hi = -bound, bound
    g_lo, g_hi = g(lo), g(hi)
    expansions = 0
    while not (g_lo >= 0.0 >= g_hi):
        expansions += 1
        if expansions > 10:
            raise NoRootError(f"no sign change of the action gap at state {s_tilde} within [{lo}, {hi}]")
        lo, hi = 2.0 * lo, 2.0 * hi
        g_lo, g_hi = g(lo), g(hi)

    # invariant: g(lo) > 0 >= g(hi); converge on the leftmost zero crossing
    if g_lo == 0.0:
        hi, g_hi = lo, g_lo
    mid, g_mid = hi, g_hi
    for _ in range(max_bisect):
        if hi - lo <= 1e-14 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid > 0.0:
            lo = mid
        else:
            hi, g_hi = mid, g_mid
            if abs(g_mid) <= root_tol and g(mid - root_tol) > 0.0:
                break
    if abs(g_hi) > root_tol:
        raise NoRootError(f"bisection ended with gap {g_hi:.3e} > {root_tol:.1e} at state {s_tilde}")
    return IndexSolveResult(hi, abs(g_hi), (lo, hi))


def whittle_indices(model: MdpModel, beta: float, root_tol: float = 1e-10) -> np.ndarray:
    return np.array([whittle_index(model, s, beta, root_tol).index for s in range(model.n_states)])
