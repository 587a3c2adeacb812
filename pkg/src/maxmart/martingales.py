"""Max-martingales, local-time martingales and discrete balayage.

Continuous-time processes are evaluated on simulated states; the
discrete-time identities (balayage, the ``S^f`` supermartingale and Doob's
inequalities) are checked by exhaustive enumeration of simple random walk
paths with exact rational arithmetic where the quantities are rational.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np

from maxmart.paths import SimConfig, simulate_batch
from maxmart.piecewise import PiecewiseFn
from maxmart.stats import StatReport, diff_report

MAX_ENUM = 20
_REGION_TOL = 1e-12


# -- continuous-time martingales ---------------------------------------------
def max_mart(f: PiecewiseFn, x, y, C: float = 0.0):
    """``F(y) - f(y) (y - x) + C`` on the region ``y >= max(x, 0)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if np.any(y < np.maximum(x, 0.0) - _REGION_TOL):
        raise ValueError("max_mart needs y >= max(x, 0)")
    out = f.primitive(np.maximum(y, 0.0)) - f(y) * (y - x) + C
    return out if np.ndim(out) else float(out)


def local_time_mart(g: PiecewiseFn, abs_x, l, C: float = 0.0):
    """``G(l) - g(l) |x| + C`` for ``|x| >= 0`` and ``l >= 0``."""
    abs_x = np.asarray(abs_x, float)
    l = np.asarray(l, float)
    if np.any(abs_x < 0) or np.any(l < 0):
        raise ValueError("local_time_mart needs abs_x >= 0 and l >= 0")
    out = g.primitive(l) - g(l) * abs_x + C
    return out if np.ndim(out) else float(out)


def signed_local_time_mart(f: PiecewiseFn, x, l):
    """``f(l) x``: the excursion-wise multiple of ``B`` by a function of local time."""
    return f(np.asarray(l, float)) * np.asarray(x, float)


PROCESSES = ("max", "local_time", "signed_local_time")


def process_values(kind: str, fn: PiecewiseFn, state: np.ndarray, C: float = 0.0) -> np.ndarray:
    """Evaluate one martingale family on snapshot rows ``(B, sup, inf, ell)``."""
    b, sup, ell = state[:, 0], state[:, 1], state[:, 3]
    if kind == "max":
        return max_mart(fn, b, sup, C)
    if kind == "local_time":
        return local_time_mart(fn, np.abs(b), ell, C)
    if kind == "signed_local_time":
        return signed_local_time_mart(fn, b, ell) + C
    raise ValueError(f"unknown process {kind!r}; expected one of {PROCESSES}")


def martingale_drift_test(fn: PiecewiseFn, config: SimConfig, t1: float, t2: float,
                          kind: str = "max", batch=None) -> StatReport:
    """Estimate ``E[H_{t2}] - E[H_{t1}]`` from paired snapshots of the same paths.

    The drift is consistent with zero when ``report.within(0.0)`` holds
    (``|estimate| <= 3 stderr``). Pass a precomputed ``batch`` holding
    snapshots at ``t1`` and ``t2`` to share paths across several tests.
    """
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    t0 = time.perf_counter()
    if batch is None:
        batch = simulate_batch(config.replace(horizon=t2), snap_times=[t1, t2])
    h1 = process_values(kind, fn, batch.snap(t1))
    h2 = process_values(kind, fn, batch.snap(t2))
    return diff_report(h2, h1, config.seed, time.perf_counter() - t0)


# -- discrete balayage -------------------------------------------------------
@dataclass(frozen=True)
class DiscretePathPair:
    """Pair ``(Y, phi)`` with ``Y_0 = 0`` and ``phi`` constant on excursions of ``Y``.

    Arrays may be 1-d (one path) or 2-d (paths along axis 0).
    """

    Y: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, float))
        phi = np.atleast_2d(np.asarray(self.phi, float))
        if Y.shape != phi.shape:
            raise ValueError("Y and phi must have the same shape")
        if np.any(Y[:, 0] != 0):
            raise ValueError("Y must start at 0")
        moved = (Y[:, 1:] != 0) & (phi[:, 1:] != phi[:, :-1])
        if np.any(moved):
            raise ValueError("phi changes during an excursion of Y away from 0")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "phi", phi)


def balayage_identity_check(pair: DiscretePathPair) -> float:
    """Max over paths and ``n`` of ``|phi_n Y_n - sum_k phi_{k-1} (Y_k - Y_{k-1})|``.

    The first equality ``phi_n Y_n = phi_{n-1} Y_n`` is folded into the
    same maximum.
    """
    Y, phi = pair.Y, pair.phi
    if Y.shape[1] < 2:
        return 0.0
    integral = np.cumsum(phi[:, :-1] * np.diff(Y, axis=1), axis=1)
    lhs = phi[:, 1:] * Y[:, 1:]
    lhs_prev = phi[:, :-1] * Y[:, 1:]
    return float(max(np.max(np.abs(lhs - integral)), np.max(np.abs(lhs - lhs_prev))))


def balayage_pairs(X: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> dict:
    """The standard admissible pairs built from paths ``X`` (rows, ``X_0 = 0``)."""
    X = np.atleast_2d(np.asarray(X, float))
    sup = np.maximum.accumulate(X, axis=1)
    inf_abs = np.abs(np.minimum.accumulate(X, axis=1))
    star = np.maximum.accumulate(np.abs(X), axis=1)
    zeros = np.cumsum(X == 0, axis=1).astype(float)
    ties = np.concatenate([np.zeros((X.shape[0], 1)),
                           np.cumsum(sup[:, 1:] == inf_abs[:, 1:], axis=1)], axis=1)
    return {
        "sup_minus_X": DiscretePathPair(sup - X, f(sup)),
        "X_zero_count": DiscretePathPair(X, zeros),
        "absX_zero_count": DiscretePathPair(np.abs(X), zeros),
        "star_minus_absX": DiscretePathPair(star - np.abs(X), f(star)),
        "range_ties": DiscretePathPair(sup - inf_abs, f(ties)),
    }


# -- the S^f process ---------------------------------------------------------
def sfn_process(X, f: PiecewiseFn, check: bool = True):
    """``S^f_n = f(Xbar_n)(Xbar_n - X_n) - F(Xbar_n)`` and its telescoped form.

    Returns
    -------
    S : ndarray
        Direct evaluation.
    S_decomp : ndarray
        ``S_0 + sum_k [f(Xbar_{k-1}) dXbar_k - dF(Xbar_k)] - sum_k f(Xbar_{k-1}) dX_k``.
    """
    X = np.asarray(X, float)
    sup = np.maximum.accumulate(X)
    if np.any(sup < 0):
        raise ValueError("the running maximum must stay in [0, inf)")
    if check and not f.is_nondecreasing_nonneg(float(sup[-1])):
        raise ValueError("f must be nondecreasing and nonnegative")
    fs = f(sup)
    Fs = f.primitive(sup)
    S = fs * (sup - X) - Fs
    fprev = fs[:-1]
    steps = fprev * np.diff(sup) - np.diff(Fs) - fprev * np.diff(X)
    S_decomp = S[0] + np.concatenate([[0.0], np.cumsum(steps)])
    return S, S_decomp


# -- exhaustive random walk enumeration ---------------------------------------
def srw_paths(n: int) -> np.ndarray:
    """All ``2**n`` simple random walk paths of length ``n`` as rows ``(2**n, n+1)``."""
    if not 0 <= n <= MAX_ENUM:
        raise ValueError(f"enumeration is capped at n = {MAX_ENUM}")
    codes = np.arange(2 ** n, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(n - 1, -1, -1, dtype=np.int64)) & 1
    steps = (2 * bits - 1).astype(np.int32)
    out = np.zeros((2 ** n, n + 1), np.int32)
    np.cumsum(steps, axis=1, out=out[:, 1:])
    return out


def enumerate_srw(n: int) -> Iterator[tuple[np.ndarray, Fraction]]:
    """Yield ``(path, weight)`` for every simple random walk path of length ``n``."""
    w = Fraction(1, 2 ** n)
    for row in srw_paths(n):
        yield row, w


def _abs_walk(n: int):
    X = np.abs(srw_paths(n))
    return X, np.maximum.accumulate(X, axis=1)


def doob_maximal_check(n: int, lam: float):
    """Doob's maximal inequality on ``|SRW|``, exactly.

    Returns ``(lhs, rhs, holds)`` with ``lhs = lam P(Xbar_n >= lam)`` and
    ``rhs = E[X_n; Xbar_n >= lam]`` as :class:`~fractions.Fraction`.
    """
    X, sup = _abs_walk(n)
    lam_q = Fraction(lam)
    hit = sup[:, -1] >= lam_q
    denom = 2 ** n
    lhs = lam_q * Fraction(int(hit.sum()), denom)
    rhs = Fraction(int(X[hit, -1].sum()), denom)
    return lhs, rhs, lhs <= rhs


def _power_mean(values: np.ndarray, p: float):
    """Exact mean of ``values**p`` for integer ``p``, otherwise a correctly rounded sum."""
    if float(p).is_integer():
        return Fraction(sum(int(v) ** int(p) for v in values), values.size)
    return math.fsum(float(v) ** p for v in values) / values.size


def doob_lp_check(n: int, p: float):
    """Doob's ``L^p`` inequality on ``|SRW|``.

    Returns ``(lhs, rhs, ratio, intermediate_holds)`` with
    ``lhs = E[Xbar^p]``, ``rhs = (p/(p-1))^p E[X^p]`` and the intermediate
    inequality ``(p-1) E[Xbar^p] <= p E[Xbar^{p-1} X]``.  Integer ``p`` is
    evaluated in rational arithmetic.
    """
    if not p > 1:
        raise ValueError("need p > 1")
    X, sup = _abs_walk(n)
    xn, mn = X[:, -1], sup[:, -1]
    lhs = _power_mean(mn, p)
    exn = _power_mean(xn, p)
    if float(p).is_integer():
        pi = int(p)
        const = Fraction(pi, pi - 1) ** pi
        mixed = Fraction(sum(int(m) ** (pi - 1) * int(x) for m, x in zip(mn, xn)), xn.size)
        inter = (pi - 1) * lhs <= pi * mixed
    else:
        const = (p / (p - 1)) ** p
        mixed = math.fsum(float(m) ** (p - 1) * float(x) for m, x in zip(mn, xn)) / xn.size
        inter = (p - 1) * lhs <= p * mixed * (1 + 1e-15)
    rhs = const * exn
    ratio = float(lhs) / float(rhs) if rhs else math.nan
    return lhs, rhs, ratio, bool(inter)


@dataclass(frozen=True)
class ExactFn:
    """A function with its primitive in rational arithmetic (for exhaustive checks)."""

    name: str
    f: Callable[[Fraction], Fraction]
    F: Callable[[Fraction], Fraction]


def indicator_family(thresholds) -> list:
    out = []
    for lam in thresholds:
        q = Fraction(lam)
        out.append(ExactFn(f"1[x>={lam}]", lambda y, q=q: Fraction(int(y >= q)),
                           lambda y, q=q: max(y - q, Fraction(0))))
    return out


def power_family(degrees=(1, 2)) -> list:
    return [ExactFn(f"u^{k}", lambda y, k=k: Fraction(y) ** k,
                    lambda y, k=k: Fraction(y) ** (k + 1) / (k + 1)) for k in degrees]


def sfn_supermartingale_check(n_max: int, fn: ExactFn) -> tuple[bool, Fraction]:
    """Exact check of ``E[S^f_{n+1} | prefix] <= S^f_n`` for ``|SRW|``.

    Every prefix of length ``n < n_max`` is visited.  The conditional
    expectation depends on the prefix only through ``(X_n, Xbar_n)``, so the
    value is cached per state; the returned margin is the smallest
    ``S_n - E[S_{n+1} | prefix]`` over all prefixes.
    """
    if n_max > MAX_ENUM:
        raise ValueError(f"enumeration is capped at n = {MAX_ENUM}")
    cache: dict = {}

    def s_val(x, m):
        m, x = Fraction(m), Fraction(x)
        return fn.f(m) * (m - x) - fn.F(m)

    def margin(x, m):
        key = (x, m)
        if key not in cache:
            nxt = [x + 1] if x == 0 else [x - 1, x + 1]
            exp = sum((s_val(y, max(m, y)) for y in nxt), Fraction(0)) / len(nxt)
            cache[key] = s_val(x, m) - exp
        return cache[key]

    worst = None
    for n in range(n_max):
        if n == 0:
            prefixes = np.zeros((1, 1), np.int32)
        else:
            prefixes = np.abs(srw_paths(n))
        sup = np.maximum.accumulate(prefixes, axis=1)
        states = set(zip(prefixes[:, -1].tolist(), sup[:, -1].tolist()))
        for x, m in states:
            mg = margin(x, m)
            worst = mg if worst is None or mg < worst else worst
    return bool(worst >= 0), worst


def exhaustive_suite(n_max: int = 12, thresholds=(0.5, 1, 2, 2.5, 4),
                     p_values=(1.1, 2, 3)) -> dict:
    """Run every discrete check for all walk lengths ``1 <= n <= n_max``."""
    out = {"balayage_max": 0.0, "supermartingale": {}, "doob_maximal": True, "doob_lp": True}
    fam = indicator_family(thresholds) + power_family((1, 2))
    for n in range(1, n_max + 1):
        X = srw_paths(n).astype(float)
        for f in (lambda s: (s >= 1).astype(float), lambda s: s, lambda s: s * s + 1):
            for pair in balayage_pairs(X, f).values():
                out["balayage_max"] = max(out["balayage_max"], balayage_identity_check(pair))
            for pair in balayage_pairs(np.abs(X), f).values():
                out["balayage_max"] = max(out["balayage_max"], balayage_identity_check(pair))
        for lam in itertools.chain([0], thresholds):
            out["doob_maximal"] &= doob_maximal_check(n, lam)[2]
        for p in p_values:
            lhs, rhs, _, inter = doob_lp_check(n, p)
            out["doob_lp"] &= bool(lhs <= rhs) and inter
    for fn in fam:
        out["supermartingale"][fn.name] = sfn_supermartingale_check(n_max, fn)
    return out
