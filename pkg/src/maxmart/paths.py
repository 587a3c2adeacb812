"""Seeded Brownian paths: simulation, running extremes, local time, stopping.

All randomness flows through a counter-based generator keyed by
``(seed, path_index, step)``, so a path is a pure function of its index and
batches are bit-identical whatever the number of worker threads.

Two local-time estimators are computed on every path:

``tanaka``
    ``sum max(|B_{k+1}| - |B_k| - sgn(B_k)(B_{k+1} - B_k), 0)``: the
    discrete Tanaka correction, nonnegative by convexity of ``|x|`` and
    therefore nondecreasing, with ``E[ell_T] = E|B_T|`` exactly under
    optional stopping.
``downcrossing``
    ``epsilon`` times the number of completed downcrossings of
    ``[0, epsilon]`` by ``|B|``.  It lives on the lattice ``epsilon * N``
    and is biased low by ``O(sqrt(dt) / epsilon) + O(epsilon)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np

from maxmart import _kernel
from maxmart.rules import FixedTime, StoppingRule

MAX_STEPS = 10 ** 8
LOCAL_TIME_METHODS = ("tanaka", "downcrossing")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    dt : float
        Grid step.
    horizon : float
        Time after which unstopped paths are abandoned.
    n_paths : int
    seed : int
        64-bit unsigned seed.
    local_time_epsilon : float, optional
        Downcrossing width, at least ``sqrt(dt)``; defaults to
        ``max(0.05, sqrt(dt))``.
    local_time : {"tanaka", "downcrossing"}
        Estimator reported as ``ell`` and used by local-time rules.
    bridge : bool
        Sample the exact Brownian-bridge extremes inside each step.  Running
        extremes become exact in law at grid times and barrier crossings
        inside a step stop the path on the barrier.  Off by default.
    """

    dt: float
    horizon: float
    n_paths: int = 1
    seed: int = 0
    local_time_epsilon: float | None = None
    local_time: str = "tanaka"
    bridge: bool = False
    max_steps: int = MAX_STEPS

    def __post_init__(self):
        if not self.dt > 0 or not self.horizon >= 0:
            raise ValueError("need dt > 0 and horizon >= 0")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.local_time not in LOCAL_TIME_METHODS:
            raise ValueError(f"local_time must be one of {LOCAL_TIME_METHODS}")
        if self.local_time_epsilon is None:
            object.__setattr__(self, "local_time_epsilon", max(0.05, math.sqrt(self.dt)))
        if self.local_time_epsilon < math.sqrt(self.dt) * (1 - 1e-12):
            raise ValueError("local_time_epsilon must be >= sqrt(dt)")
        if self.n_steps > self.max_steps:
            raise ValueError(f"horizon/dt = {self.n_steps} exceeds the cap of {self.max_steps} steps")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.horizon / self.dt + 1e-9))

    def replace(self, **kw) -> "SimConfig":
        d = dict(self.__dict__)
        d.update(kw)
        if "dt" in kw and "local_time_epsilon" not in kw:
            d["local_time_epsilon"] = None
        return SimConfig(**d)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class PathGrid:
    """One trajectory on a uniform grid, up to its stopping step.

    ``values[k]``, ``sup[k]``, ``inf[k]``, ``ell[k]`` describe time
    ``k * dt``.  With bridge sampling ``sup``/``inf`` include the excursions
    between grid points.
    """

    dt: float
    values: np.ndarray
    sup: np.ndarray
    ell: np.ndarray
    inf: np.ndarray = field(default=None, repr=False)
    ell_tanaka: np.ndarray = field(default=None, repr=False)
    ell_downcrossing: np.ndarray = field(default=None, repr=False)
    seed: int = 0
    path_index: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("a path needs at least one point")
        object.__setattr__(self, "values", v)
        sup = np.asarray(self.sup, float)
        ell = np.asarray(self.ell, float)
        if sup.shape != v.shape or ell.shape != v.shape:
            raise ValueError("values, sup and ell must have equal length")
        object.__setattr__(self, "sup", sup)
        object.__setattr__(self, "ell", ell)
        if self.inf is None:
            object.__setattr__(self, "inf", np.minimum.accumulate(np.minimum(v, 0.0)))

    @classmethod
    def from_values(cls, values, dt: float = 1.0, epsilon: float | None = None) -> "PathGrid":
        """Wrap a synthetic path; sup is the running max and ell the Tanaka estimator."""
        v = np.asarray(values, float)
        sup = np.maximum.accumulate(np.maximum(v, 0.0))
        a, b = v[:-1], v[1:]
        inc = np.maximum(np.abs(b) - np.abs(a) - np.sign(a) * (b - a), 0.0)
        tan = np.concatenate([[0.0], np.cumsum(inc)])
        return cls(dt, v, sup, tan, ell_tanaka=tan)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    def to_csv_rows(self):
        for k in range(self.n):
            yield k, k * self.dt, self.values[k], self.sup[k], self.ell[k]


@dataclass(frozen=True)
class StopOutcome:
    step: int
    B_T: float
    sup_T: float
    ell_T: float
    stopped: bool


@dataclass
class PathBatch:
    """Stopped states of a batch of paths (one row per path)."""

    config: SimConfig
    step: np.ndarray
    stopped: np.ndarray
    B: np.ndarray
    sup: np.ndarray
    inf: np.ndarray
    ell_tanaka: np.ndarray
    ell_downcrossing: np.ndarray
    integral: np.ndarray
    snap_times: np.ndarray
    snaps: np.ndarray  # (n_paths, n_snap, 4): B, sup, inf, ell at T ^ t

    @property
    def ell(self) -> np.ndarray:
        if self.config.local_time == "tanaka":
            return self.ell_tanaka
        return self.ell_downcrossing

    @property
    def T(self) -> np.ndarray:
        return self.step * self.config.dt

    @property
    def unstopped_fraction(self) -> float:
        return float(1.0 - self.stopped.mean())

    def snap(self, t: float) -> np.ndarray:
        i = int(np.flatnonzero(np.isclose(self.snap_times, t))[0])
        return self.snaps[:, i, :]

    def digest(self) -> str:
        """SHA-256 over every numeric output; used for reproducibility checks."""
        import hashlib

        h = hashlib.sha256()
        for a in (self.step, self.stopped, self.B, self.sup, self.inf, self.ell_tanaka,
                  self.ell_downcrossing, self.integral, self.snaps):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def _step_table(q, upto: float):
    if q is None:
        return np.zeros(0), np.zeros(0)
    if isinstance(q, tuple):
        return np.asarray(q[0], float), np.asarray(q[1], float)
    return q.step_table(upto)


def simulate(config: SimConfig, path_index: int, rule: StoppingRule | None = None) -> PathGrid:
    """Materialize one path up to the horizon (or the stopping step of ``rule``).

    Uses the same compiled kernel as :func:`simulate_batch`, so the recorded
    path agrees bit-for-bit with the streamed batch statistics.
    """
    if not 0 <= path_index < config.n_paths:
        raise ValueError("path_index out of range")
    rule = rule or FixedTime(math.inf)
    enc = rule.encode(config.dt)
    n = config.n_steps
    rec = np.zeros((n + 1, 5))
    snaps = np.zeros((0, 4))
    k, *_ = _kernel.one_path(
        np.uint64(config.seed), path_index, config.dt, n, enc.kind, enc.params, enc.tab_x, enc.tab_y,
        config.local_time_epsilon, config.local_time == "downcrossing", config.bridge,
        np.zeros(0, np.int64), np.zeros(0), np.zeros(0), rec, snaps)
    rec = rec[: k + 1]
    ell = rec[:, 3] if config.local_time == "tanaka" else rec[:, 4]
    return PathGrid(config.dt, rec[:, 0].copy(), rec[:, 1].copy(), ell.copy(), inf=rec[:, 2].copy(),
                    ell_tanaka=rec[:, 3].copy(), ell_downcrossing=rec[:, 4].copy(),
                    seed=config.seed, path_index=path_index)


def simulate_batch(config: SimConfig, rule: StoppingRule | None = None, snap_times=(),
                   q=None, path0: int = 0, chunk: int = 1 << 18) -> PathBatch:
    """Stream ``config.n_paths`` paths through ``rule`` and keep their stopped states.

    Parameters
    ----------
    snap_times : sequence of float
        Times ``t`` at which ``(B, sup, inf, ell)`` of ``T ^ t`` is recorded.
    q : PiecewiseFn or (breaks, values), optional
        Step function whose integral ``sum q(sup_k) dt`` over the stopped
        path is returned in ``integral``.
    """
    rule = rule or FixedTime(math.inf)
    enc = rule.encode(config.dt)
    snap_times = np.asarray(snap_times, float)
    snap_steps = np.round(snap_times / config.dt).astype(np.int64)
    q_x, q_v = _step_table(q, upto=8.0 * math.sqrt(max(config.horizon, 1.0)) + 8.0)
    parts = []
    for start in range(0, config.n_paths, chunk):
        m = min(chunk, config.n_paths - start)
        parts.append(_kernel.run_batch(
            np.uint64(config.seed), path0 + start, m, config.dt, config.n_steps, enc.kind, enc.params,
            enc.tab_x, enc.tab_y, config.local_time_epsilon,
            config.local_time == "downcrossing", config.bridge, snap_steps, q_x, q_v))
    step = np.concatenate([p[0] for p in parts])
    stopped = np.concatenate([p[1] for p in parts])
    out = np.concatenate([p[2] for p in parts])
    snaps = np.concatenate([p[3] for p in parts])
    return PathBatch(config, step, stopped, out[:, 0], out[:, 1], out[:, 2], out[:, 3],
                     out[:, 4], out[:, 5], snap_times, snaps)


def local_time(path: PathGrid, epsilon: float) -> np.ndarray:
    """Downcrossing local time of a path: ``epsilon`` times completed downcrossings.

    A downcrossing starts once ``|B| >= epsilon`` and completes when the path
    reaches or crosses zero.
    """
    if epsilon < math.sqrt(path.dt) * (1 - 1e-12):
        raise ValueError("epsilon must be >= sqrt(dt)")
    v = path.values
    out = np.zeros(v.size)
    armed = False
    count = 0
    for k in range(1, v.size):
        a, b = v[k - 1], v[k]
        if armed and ((a > 0 and b <= 0) or (a < 0 and b >= 0)):
            count += 1
            armed = False
        if not armed and abs(b) >= epsilon:
            armed = True
        out[k] = epsilon * count
    return out


def first_hitting(path: PathGrid, level: float) -> int | None:
    """Smallest grid index with ``B >= level`` (``level >= 0``) or ``B <= level``."""
    hit = path.values >= level if level >= 0 else path.values <= level
    idx = np.flatnonzero(hit)
    return int(idx[0]) if idx.size else None


def joint_density(t: float, x, y):
    """Density of ``(B_t, sup_{s<=t} B_s)`` at ``(x, y)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    z = 2 * y - x
    val = math.sqrt(2 / (math.pi * t ** 3)) * z * np.exp(-z * z / (2 * t))
    out = np.where((y >= 0) & (y >= x), val, 0.0)
    return out if out.ndim else float(out)


def joint_cdf_box(t: float, x0, x1, y0, y1):
    """Exact probability that ``(B_t, sup B)`` falls in ``[x0,x1) x [y0,y1)``.

    Uses ``P(B_t <= x, sup <= y) = Phi(x/s) - Phi((x - 2y)/s)`` for
    ``x <= y``, ``y >= 0`` (and the clipped form otherwise).
    """
    from scipy.special import ndtr

    s = math.sqrt(t)

    def cdf(x, y):
        x = np.asarray(x, float)
        y = np.maximum(np.asarray(y, float), 0.0)
        xm = np.minimum(x, y)
        return np.where(np.asarray(y) > 0, ndtr(xm / s) - ndtr((xm - 2 * y) / s), 0.0)

    return cdf(x1, y1) - cdf(x0, y1) - cdf(x1, y0) + cdf(x0, y0)


def stop(path: PathGrid, rule: StoppingRule) -> StopOutcome:
    """First grid step at which ``rule`` fires on a materialized path."""
    mask = rule.fire_mask(path.t, path.values, path.sup, path.ell,
                          seed=path.seed, path_index=path.path_index)
    idx = np.flatnonzero(mask)
    k = int(idx[0]) if idx.size else path.n - 1
    return StopOutcome(k, float(path.values[k]), float(path.sup[k]), float(path.ell[k]),
                       bool(idx.size))


def set_threads(n: int | None = None) -> int:
    """Cap the number of worker threads; results do not depend on it.

    ``None`` reads ``MAXMART_THREADS`` and otherwise uses every core.
    """
    if n is None:
        env = os.environ.get("MAXMART_THREADS")
        n = int(env) if env else (os.cpu_count() or 1)
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def get_threads() -> int:
    return numba.get_num_threads()
