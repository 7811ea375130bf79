"""Compiled inner loop for constant-stepsize Q-learning.

Randomness is supplied by the caller as a ``(n, 3)`` block of uniforms drawn
from a numpy Generator: column 0 picks the action, column 1 the next state,
column 2 the re-initialised state. Keeping the draws outside the kernel means
a run is determined by its numpy seed alone.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

REINIT_NONE = 0
REINIT_PERIODIC = 1
REINIT_INVERSE = 2


@njit(cache=True, nogil=True)
def draw_row(cdf_row, u):
    n = cdf_row.shape[0]
    for j in range(n):
        if u < cdf_row[j]:
            return j
    # row total rounded below u: fall back to the last column with mass
    for j in range(n - 1, 0, -1):
        if cdf_row[j] > cdf_row[j - 1]:
            return j
    return 0


@njit(cache=True, nogil=True)
def prob_action0(q0, q1, code, eps):
    if code == 0:
        p0 = eps / 2.0
        if not q1 > q0:
            p0 += 1.0 - eps
        return p0
    m = max(q0, q1)
    z0 = math.exp(q0 - m)
    z1 = math.exp(q1 - m)
    soft0 = z0 / (z0 + z1)
    if code == 1:
        return soft0
    return eps / 2.0 + (1.0 - eps) * soft0


@njit(cache=True, nogil=True)
def reinit_state(counts, u, n_states, reinit_code):
    if reinit_code == REINIT_PERIODIC:
        s = int(u * n_states)
        return min(s, n_states - 1)
    total = 0.0
    for s in range(n_states):
        total += 1.0 / (counts[s, 0] + counts[s, 1])
    acc = 0.0
    for s in range(n_states):
        acc += 1.0 / (counts[s, 0] + counts[s, 1]) / total
        if u < acc:
            return s
    return n_states - 1


@njit(cache=True, nogil=True)
def q_loop(
    q,
    counts,
    cdf,
    rewards,
    row_of,
    s,
    alpha,
    beta,
    subsidy,
    policy_code,
    eps,
    reinit_code,
    period,
    uniforms,
    it0,
    delta,
    window,
    window_state,
):
    """Run ``uniforms.shape[0]`` asynchronous updates of ``q`` in place.

    ``q`` is indexed by ``row_of[state]``; ``counts`` by state. ``window`` and
    ``window_state = [position, filled, running_sum]`` carry the optional
    stopping statistic across calls; ``delta <= 0`` disables it.

    Returns ``(state, steps_done, stopped)``.
    """
    n_states = counts.shape[0]
    n = uniforms.shape[0]
    wlen = window.shape[0]
    for k in range(n):
        it = it0 + k
        if reinit_code != REINIT_NONE and it % period == 0:
            s = reinit_state(counts, uniforms[k, 2], n_states, reinit_code)
        row = row_of[s]
        a = 0 if uniforms[k, 0] < prob_action0(q[row, 0], q[row, 1], policy_code, eps) else 1
        s_next = draw_row(cdf[a, s], uniforms[k, 1])
        nrow = row_of[s_next]
        err = rewards[s, a] + (1 - a) * subsidy + beta * max(q[nrow, 0], q[nrow, 1]) - q[row, a]
        q[row, a] += alpha * err
        counts[s, a] += 1
        s = s_next
        if delta > 0.0:
            pos = int(window_state[0])
            step_size = abs(alpha * err)
            window_state[2] += step_size - window[pos]
            window[pos] = step_size
            window_state[0] = (pos + 1) % wlen
            if window_state[1] < wlen:
                window_state[1] += 1
            elif window_state[2] / wlen < delta:
                return s, k + 1, True
    return s, n, False


def new_window(length: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(length), np.zeros(3)
