"""Penalization of Wiener measure by a density of the running maximum.

For a probability density ``f`` on ``[0, inf)`` and an event ``G`` of the
path up to time ``s``,

    W_t(G) = E[1_G f(sup_t)] / E[f(sup_t)]  ->  E[1_G S_s],
    S_s = 1 - F(sup_s) + f(sup_s) (sup_s - X_s),

as ``t -> inf``.  Both sides are estimated on common paths so that their
gap has a paired standard error.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from maxmart.paths import PathBatch, SimConfig, simulate_batch
from maxmart.piecewise import PiecewiseFn
from maxmart.stats import StatReport, mean_report, ratio_influence

EVENTS = ("all", "endpoint", "sup")


@dataclass(frozen=True)
class PenalizationSpec:
    """Density ``f``, event ``(kind, a)`` at time ``s`` and horizons ``t_list``.

    ``kind="endpoint"`` is ``{X_s <= a}``, ``kind="sup"`` is
    ``{sup_s <= a}`` and ``kind="all"`` the whole space.
    """

    f: PiecewiseFn
    event: tuple
    s: float
    t_list: tuple

    def __post_init__(self):
        if abs(self.f.total_integral() - 1.0) > 1e-9:
            raise ValueError("f must be a probability density on [0, inf)")
        if self.event[0] not in EVENTS:
            raise ValueError(f"event kind must be one of {EVENTS}")
        t = tuple(float(v) for v in self.t_list)
        if not t or any(b <= a for a, b in zip(t[:-1], t[1:])) or self.s >= t[0]:
            raise ValueError("need s < t_1 < t_2 < ...")
        object.__setattr__(self, "t_list", t)

    def indicator(self, state: np.ndarray) -> np.ndarray:
        kind = self.event[0]
        if kind == "all":
            return np.ones(state.shape[0])
        a = float(self.event[1])
        col = 0 if kind == "endpoint" else 1
        return (state[:, col] <= a).astype(float)

    def density_process(self, state: np.ndarray) -> np.ndarray:
        """``1 - F(sup_s) + f(sup_s)(sup_s - X_s)`` on snapshot rows."""
        b, m = state[:, 0], state[:, 1]
        return 1.0 - self.f.primitive(m) + self.f(m) * (m - b)


def _batch(spec: PenalizationSpec, config: SimConfig, horizons) -> PathBatch:
    times = sorted({spec.s, *horizons})
    return simulate_batch(config.replace(horizon=max(times)), snap_times=times)


def penalized_probability(spec: PenalizationSpec, t: float, config: SimConfig,
                          batch: PathBatch | None = None) -> StatReport:
    """Ratio estimate of ``E[1_G f(sup_t)] / E[f(sup_t)]`` with delta-method error."""
    t0 = time.perf_counter()
    if t <= spec.s:
        raise ValueError("t must exceed s")
    batch = batch if batch is not None else _batch(spec, config, [t])
    w = spec.f(batch.snap(t)[:, 1])
    den = mean_report(w, config.seed)
    if den.estimate <= 3 * den.stderr:
        raise ValueError("denominator is not resolved away from 0")
    ind = spec.indicator(batch.snap(spec.s))
    r, infl = ratio_influence(ind * w, w)
    return StatReport(float(r), float(infl.std(ddof=1) / math.sqrt(infl.size)), infl.size,
                      config.seed, time.perf_counter() - t0)


def denominator(spec: PenalizationSpec, t: float, config: SimConfig,
                batch: PathBatch | None = None) -> StatReport:
    """``E[f(sup_t)]``."""
    batch = batch if batch is not None else _batch(spec, config, [t])
    return mean_report(spec.f(batch.snap(t)[:, 1]), config.seed)


def limit_probability(spec: PenalizationSpec, config: SimConfig,
                      batch: PathBatch | None = None) -> StatReport:
    """``E[1_G S_s]``."""
    t0 = time.perf_counter()
    batch = batch if batch is not None else simulate_batch(
        config.replace(horizon=spec.s), snap_times=[spec.s])
    st = batch.snap(spec.s)
    rep = mean_report(spec.indicator(st) * spec.density_process(st), config.seed)
    return StatReport(rep.estimate, rep.stderr, rep.n, rep.seed, time.perf_counter() - t0)


@dataclass
class ConvergenceRow:
    t: float
    penalized: float
    limit: float
    gap: float
    stderr: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def convergence_experiment(spec: PenalizationSpec, config: SimConfig,
                           batch: PathBatch | None = None) -> list:
    """Gap ``penalized(t) - limit`` for every ``t`` in ``spec.t_list``.

    All horizons share the same paths; ``stderr`` is the paired error of
    each gap from the per-path influence values.
    """
    batch = batch if batch is not None else _batch(spec, config, spec.t_list)
    st = batch.snap(spec.s)
    ind = spec.indicator(st)
    lim_vals = ind * spec.density_process(st)
    lim = float(lim_vals.mean())
    rows = []
    for t in spec.t_list:
        w = spec.f(batch.snap(t)[:, 1])
        r, infl = ratio_influence(ind * w, w)
        d = infl - (lim_vals - lim)
        rows.append(ConvergenceRow(t, float(r), lim, float(r - lim),
                                   float(d.std(ddof=1) / math.sqrt(d.size))))
    return rows


def convergence_ok(rows, k_final: float = 3.0, k_trend: float = 2.0) -> bool:
    """Final gap within ``k_final`` errors of 0 and ``|gap|`` nonincreasing up to ``k_trend`` errors."""
    final = abs(rows[-1].gap) <= k_final * rows[-1].stderr
    trend = all(abs(b.gap) <= abs(a.gap) + k_trend * math.hypot(a.stderr, b.stderr)
                for a, b in zip(rows[:-1], rows[1:]))
    return final and trend
