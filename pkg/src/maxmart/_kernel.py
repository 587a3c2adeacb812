"""Numba path kernel shared by every Monte-Carlo routine.

One call of :func:`one_path` streams a single trajectory step by step,
folding it into ``(B, sup, inf, ell, downcrossings, integral)`` and
stopping according to an encoded rule.  :func:`run_batch` maps it over a
range of path indices; each path owns its RNG counter space, so the result
does not depend on the number of worker threads.
"""

import math

import numba as nb
import numpy as np

from maxmart import _rng

FIXED = 0
HIT = 1
EXIT = 2
AZEMA_YOR = 3
VALLOIS = 4
RANDOM_ABS_HIT = 5

# bridge extremes are sampled when exp(-2 (c-a)(c-b) / dt) could exceed ~1e-16
_BRIDGE_CUTOFF = 18.5

_N_SNAP_FIELDS = 4  # B, sup, inf, ell


@nb.njit(cache=True, inline="always")
def _sgn(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@nb.njit(cache=True)
def _advance(ptr, breaks, level):
    while ptr + 1 < breaks.size and breaks[ptr + 1] <= level:
        ptr += 1
    return ptr


@nb.njit(cache=True)
def _barriers(kind, params, tab_x, tab_y, j_ay, j_v, level):
    """Lower/upper stopping barriers in force at the current state."""
    lo = -np.inf
    up = np.inf
    if kind == HIT:
        if params[0] >= 0.0:
            up = params[0]
        else:
            lo = params[0]
    elif kind == EXIT:
        lo = params[0]
        up = params[1]
    elif kind == AZEMA_YOR:
        lo = tab_x[j_ay]
        up = tab_x[tab_x.size - 1]
    elif kind == VALLOIS:
        lo = -tab_y[j_v]
        up = tab_y[j_v]
    elif kind == RANDOM_ABS_HIT:
        lo = -level
        up = level
    return lo, up


@nb.njit(cache=True)
def _fires(kind, params, tab_x, tab_y, k, b, j_ay, j_v, level):
    if kind == FIXED:
        return k >= params[0]
    if kind == HIT:
        if params[0] >= 0.0:
            return b >= params[0]
        return b <= params[0]
    if kind == EXIT:
        return b <= params[0] or b >= params[1]
    if kind == AZEMA_YOR:
        return b <= tab_x[j_ay] or b > tab_x[tab_x.size - 1]
    if kind == VALLOIS:
        return abs(b) >= tab_y[j_v]
    if kind == RANDOM_ABS_HIT:
        return abs(b) >= level
    return False


@nb.njit(cache=True)
def _bridge_max(seed, path, step, a, b, dt):
    u, _ = _rng.uniform_pair(seed, path, step, _rng.STREAM_BRIDGE_MAX)
    return 0.5 * (a + b + math.sqrt((b - a) ** 2 - 2.0 * dt * math.log(u)))


@nb.njit(cache=True)
def _bridge_min(seed, path, step, a, b, dt):
    u, _ = _rng.uniform_pair(seed, path, step, _rng.STREAM_BRIDGE_MIN)
    return 0.5 * (a + b - math.sqrt((b - a) ** 2 - 2.0 * dt * math.log(u)))


@nb.njit(cache=True)
def one_path(seed, path, dt, n_steps, kind, params, tab_x, tab_y, eps,
             lt_dc, bridge, snap_steps, q_x, q_v, rec, snap_out):
    """Simulate one path; returns the stopped state.

    ``rec`` is either empty or a ``(n_steps + 1, 5)`` array receiving
    ``B, sup, inf, tanaka_ell, downcrossing_ell`` at every step until the
    stop.  ``snap_out`` is ``(len(snap_steps), 4)`` and receives the state
    at ``T ^ snap_steps[i]``.  ``lt_dc`` selects the downcrossing estimator
    (instead of the discrete Tanaka one) for the Vallois rule and snapshots.
    """
    sd = math.sqrt(dt)
    b = 0.0
    m_hi = 0.0
    m_lo = 0.0
    ell = 0.0
    n_down = 0
    armed = False
    integ = 0.0
    j_ay = 0
    j_v = 0
    j_q = 0
    level = 0.0
    if kind == RANDOM_ABS_HIT:
        u = _rng.aux_uniform(seed, path, 0)
        idx = 0
        while idx + 1 < tab_x.size and u >= tab_x[idx]:
            idx += 1
        level = tab_y[idx]
    if kind == AZEMA_YOR:
        j_ay = _advance(0, tab_y, m_hi)
    record = rec.shape[0] > 0
    n_snap = snap_steps.size
    si = 0
    z1 = 0.0
    k = 0
    fired = _fires(kind, params, tab_x, tab_y, 0, b, j_ay, j_v, level)
    if record:
        rec[0, 0] = b
        rec[0, 1] = m_hi
        rec[0, 2] = m_lo
        rec[0, 3] = ell
        rec[0, 4] = 0.0
    while si < n_snap and snap_steps[si] <= 0:
        snap_out[si, 0] = b
        snap_out[si, 1] = m_hi
        snap_out[si, 2] = m_lo
        snap_out[si, 3] = eps * n_down if lt_dc else ell
        si += 1
    while not fired and k < n_steps:
        if q_x.size > 0:
            j_q = _advance(j_q, q_x, m_hi)
            integ += q_v[j_q] * dt
        i = k
        if i % 2 == 0:
            z0, z1 = _rng.normal_pair(seed, path, i // 2)
            z = z0
        else:
            z = z1
        a = b
        bn = a + sd * z
        k += 1

        lo_bar = -np.inf
        up_bar = np.inf
        if bridge:
            lo_bar, up_bar = _barriers(kind, params, tab_x, tab_y,
                                       j_ay, j_v, level)
        top = max(a, bn)
        bot = min(a, bn)
        step_max = top
        step_min = bot
        if bridge:
            cut = _BRIDGE_CUTOFF * dt
            if (m_hi - a) * (m_hi - bn) < cut or (
                    up_bar > top and (up_bar - a) * (up_bar - bn) < cut):
                step_max = max(top, _bridge_max(seed, path, i, a, bn, dt))
            if (a - m_lo) * (bn - m_lo) < cut or (
                    lo_bar < bot and (a - lo_bar) * (bn - lo_bar) < cut):
                step_min = min(bot, _bridge_min(seed, path, i, a, bn, dt))

        if bridge and step_min <= lo_bar:
            # first passage inside the step: the path sits on the barrier
            b = lo_bar
            m_lo = min(m_lo, lo_bar)
            fired = True
        elif bridge and step_max >= up_bar:
            b = up_bar
            m_hi = max(m_hi, up_bar)
            fired = True
        else:
            ell += max(abs(bn) - abs(a) - _sgn(a) * (bn - a), 0.0)
            if armed and ((a > 0.0 and bn <= 0.0) or (a < 0.0 and bn >= 0.0)):
                n_down += 1
                armed = False
            if not armed and abs(bn) >= eps:
                armed = True
            b = bn
            if step_max > m_hi:
                m_hi = step_max
            if step_min < m_lo:
                m_lo = step_min
            if kind == AZEMA_YOR:
                j_ay = _advance(j_ay, tab_y, m_hi)
            elif kind == VALLOIS:
                j_v = _advance(j_v, tab_x, eps * n_down if lt_dc else ell)
            fired = _fires(kind, params, tab_x, tab_y, k, b, j_ay, j_v, level)

        if record:
            rec[k, 0] = b
            rec[k, 1] = m_hi
            rec[k, 2] = m_lo
            rec[k, 3] = ell
            rec[k, 4] = eps * n_down
        while si < n_snap and snap_steps[si] <= k:
            snap_out[si, 0] = b
            snap_out[si, 1] = m_hi
            snap_out[si, 2] = m_lo
            snap_out[si, 3] = eps * n_down if lt_dc else ell
            si += 1
    while si < n_snap:
        snap_out[si, 0] = b
        snap_out[si, 1] = m_hi
        snap_out[si, 2] = m_lo
        snap_out[si, 3] = eps * n_down if lt_dc else ell
        si += 1
    return k, fired, b, m_hi, m_lo, ell, eps * n_down, integ


@nb.njit(cache=True, parallel=True)
def run_batch(seed, path0, n_paths, dt, n_steps, kind, params, tab_x, tab_y,
              eps, lt_dc, bridge, snap_steps, q_x, q_v):
    step = np.empty(n_paths, np.int64)
    stopped = np.empty(n_paths, np.bool_)
    out = np.empty((n_paths, 6))
    snaps = np.empty((n_paths, snap_steps.size, _N_SNAP_FIELDS))
    no_rec = np.empty((0, 5))
    for p in nb.prange(n_paths):
        k, fired, b, hi, lo, ell, dc, integ = one_path(
            seed, path0 + p, dt, n_steps, kind, params, tab_x, tab_y, eps,
            lt_dc, bridge, snap_steps, q_x, q_v, no_rec, snaps[p])
        step[p] = k
        stopped[p] = fired
        out[p, 0] = b
        out[p, 1] = hi
        out[p, 2] = lo
        out[p, 3] = ell
        out[p, 4] = dc
        out[p, 5] = integ
    return step, stopped, out, snaps
