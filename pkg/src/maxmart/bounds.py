"""Closed-form supremum laws and bounds, with Monte-Carlo verifiers."""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from maxmart.embeddings import vallois_rule
from maxmart.measures import AtomicMeasure, empirical_measure
from maxmart.paths import PathBatch, SimConfig, simulate_batch
from maxmart.piecewise import PiecewiseFn
from maxmart.rules import FirstExit, FixedTime, HittingLevel, StoppingRule
from maxmart.stats import StatReport, diff_report, mean_report

DIVERGENCE_CAP = 50.0


# -- closed forms --------------------------------------------------------------
def sup_law_from_phi(phi: Callable | PiecewiseFn, y: float, rtol: float = 1e-8) -> float:
    """``P(sup_T >= y) = exp(-int_0^y ds / (s - phi(s)))``.

    ``phi(s)`` is the conditional mean of ``B_T`` given ``sup_T = s`` and
    must stay below ``s`` on ``(0, y)``.  A denominator vanishing at ``y``
    itself, or a partial integral above 50, is reported as a zero tail.
    """
    if y < 0:
        raise ValueError("y must be nonnegative")
    if y == 0:
        return 1.0

    def den(s):
        return s - float(np.asarray(phi(s)))

    probe = np.linspace(0.0, y, 1025)[:-1]
    probe = np.append(probe, y * (1 - 1e-12))
    gaps = np.array([den(s) for s in probe])
    if np.any(gaps <= 0):
        raise ValueError("phi(s) >= s inside the integration range")
    if den(y) <= 0:
        return 0.0
    edges = [0.0]
    if isinstance(phi, PiecewiseFn):
        edges += [b for b in phi.breakpoints[1:] if b < y]
    edges.append(y)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(lambda s: 1.0 / den(s), a, b, epsrel=rtol, epsabs=0.0, limit=500)
            total += val
            if not math.isfinite(total) or total > DIVERGENCE_CAP:
                return 0.0
    return math.exp(-total)


def blackwell_dubins_bound(mu: AtomicMeasure, lam):
    """Upper bound ``mu_bar(Psi^{-1}(lam))`` on ``P(sup_T >= lam)`` for embeddings of ``mu``."""
    if not mu.is_centered():
        raise ValueError("measure must be centered")
    lam_arr = np.asarray(lam, float)
    if np.any(lam_arr < 0):
        raise ValueError("lambda must be nonnegative")
    out = mu.tail(mu.barycentre_right_inverse(lam_arr))
    return out if np.ndim(out) else float(out)


# -- reports -------------------------------------------------------------------
@dataclass
class BoundReport:
    """Bound versus empirical value on a sorted grid.

    ``flag[i]`` is set when ``empirical[i] > bound[i] + 3 stderr[i]``.
    """

    name: str
    points: np.ndarray
    bound: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    n: int
    seed: int
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        order = np.argsort(self.points, kind="stable")
        for name in ("points", "bound", "empirical", "stderr"):
            setattr(self, name, np.asarray(getattr(self, name), float)[order])

    @property
    def flag(self) -> np.ndarray:
        return self.empirical > self.bound + 3.0 * self.stderr

    @property
    def passed(self) -> bool:
        return not bool(np.any(self.flag))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["point", "bound", "empirical", "stderr", "flag"])
        for row in zip(self.points, self.bound, self.empirical, self.stderr, self.flag):
            wr.writerow([repr(float(v)) for v in row[:4]] + [str(bool(row[4])).lower()])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "seed": self.seed, "passed": self.passed,
                "points": self.points.tolist(), "bound": self.bound.tolist(),
                "empirical": self.empirical.tolist(), "stderr": self.stderr.tolist(),
                "flag": self.flag.tolist(), "extra": self.extra, "wall_time": self.wall_time}


def _tail_prob(samples: np.ndarray, lam: np.ndarray):
    n = samples.size
    p = np.array([(samples >= l).mean() for l in lam])
    return p, np.sqrt(p * (1 - p) / n)


def verify_sup_bound(rule: StoppingRule, mu: AtomicMeasure, lambda_grid, config: SimConfig,
                     batch: PathBatch | None = None) -> BoundReport:
    """Empirical ``P(sup_T >= lam)`` under ``rule`` against the Blackwell-Dubins bound.

    ``rule`` is assumed to embed ``mu``; a rule that does not still yields a
    report, the comparison is then meaningless.
    """
    t0 = time.perf_counter()
    if batch is None:
        batch = simulate_batch(config, rule)
    lam = np.asarray(lambda_grid, float)
    emp, se = _tail_prob(batch.sup, lam)
    return BoundReport("sup", lam, blackwell_dubins_bound(mu, lam), emp, se, batch.step.size,
                       config.seed, {"unstopped_fraction": batch.unstopped_fraction},
                       time.perf_counter() - t0)


@dataclass
class ExpectationBounds:
    """Three expectation bounds and the quadratic identity behind the first."""

    e_sup: StatReport
    e_abs_sup: StatReport
    e_range: StatReport
    e_T: StatReport
    rhs: tuple
    identity: StatReport  # E[(sup - B)^2] - E[B^2]

    def holds(self, k: float = 3.0) -> dict:
        out = {}
        for name, rep, c in (("sup", self.e_sup, 1), ("abs_sup", self.e_abs_sup, 2),
                             ("range", self.e_range, 3)):
            bound = math.sqrt(c * self.e_T.estimate)
            # delta method for sqrt(c E T)
            se_b = 0.5 * math.sqrt(c / max(self.e_T.estimate, 1e-300)) * self.e_T.stderr
            out[name] = rep.estimate <= bound + k * math.hypot(rep.stderr, se_b)
        out["identity"] = self.identity.within(0.0, k)
        return out

    def to_dict(self) -> dict:
        return {"e_sup": self.e_sup.to_dict(), "e_abs_sup": self.e_abs_sup.to_dict(),
                "e_range": self.e_range.to_dict(), "e_T": self.e_T.to_dict(),
                "rhs": list(self.rhs), "identity": self.identity.to_dict(), "holds": self.holds()}


def expectation_bounds_check(rule: StoppingRule, config: SimConfig,
                             batch: PathBatch | None = None) -> ExpectationBounds:
    """``E sup <= sqrt(E T)``, ``E sup|B| <= sqrt(2 E T)``, ``E range <= sqrt(3 E T)``."""
    if not (isinstance(rule, FixedTime) and rule.bounded) and not isinstance(rule, FirstExit):
        raise ValueError("expectation bounds need a bounded stopping time")
    if batch is None:
        batch = simulate_batch(config, rule)
    if not batch.stopped.all():
        raise ValueError("some paths were not stopped before the horizon")
    s = config.seed
    sup, inf, b = batch.sup, batch.inf, batch.B
    e_T = mean_report(batch.T, s)
    rhs = tuple(math.sqrt(c * e_T.estimate) for c in (1, 2, 3))
    return ExpectationBounds(
        mean_report(sup, s), mean_report(np.maximum(sup, -inf), s), mean_report(sup - inf, s),
        e_T, rhs, diff_report((sup - b) ** 2, b ** 2, s))


def _batch_means(values_fn, samples: np.ndarray, n_batches: int):
    """Standard error of a plug-in statistic by non-overlapping batch means."""
    parts = np.array_split(samples, n_batches)
    est = np.array([values_fn(p) for p in parts])
    return float(est.std(ddof=1) / math.sqrt(n_batches))


def _excess(samples: np.ndarray, p: float) -> float:
    if p == 0:
        return 0.0
    rho = empirical_measure(samples)
    return float(rho.excess_wealth(p))


def p_star(m: AtomicMeasure, p):
    """``m_bar(m_bar^{-1}(p)) >= p`` with the left-continuous inverse."""
    q = m.tail_inverse(p)
    return np.where(np.isinf(q), 0.0, m.tail(np.where(np.isinf(q), 0.0, q)))


def local_time_bound_check(m: AtomicMeasure, alt_rule: StoppingRule, p_grid, config: SimConfig,
                           n_batches: int = 100, vallois_seed: int | None = None) -> BoundReport:
    """Excess-wealth bound on the local time of an embedding of ``|B_T| ~ m``.

    Compares ``E[(L_T - rho_T^{-1}(p))^+]`` under ``alt_rule`` (``empirical``)
    with ``E[(L_{T^m} - rho_{T^m}^{-1}(p*))^+]`` under the Vallois rule
    (``bound``), both with left-continuous inverses of the empirical laws.
    The two runs use independent seeds; ``stderr`` combines their batch-means
    errors.  The means of both local times are stored in ``extra``.
    """
    t0 = time.perf_counter()
    vseed = config.seed + 1 if vallois_seed is None else vallois_seed
    alt = simulate_batch(config, alt_rule)
    val = simulate_batch(config.replace(seed=vseed), vallois_rule(m))
    la = alt.ell[alt.stopped]
    lv = val.ell[val.stopped]
    p = np.asarray(p_grid, float)
    ps = np.atleast_1d(p_star(m, p))
    lhs = np.array([_excess(la, pi) for pi in p])
    rhs = np.array([_excess(lv, pi) for pi in ps])
    se_l = np.array([_batch_means(lambda s, pi=pi: _excess(s, pi), la, n_batches) if pi > 0 else 0.0
                     for pi in p])
    se_r = np.array([_batch_means(lambda s, pi=pi: _excess(s, pi), lv, n_batches) if pi > 0 else 0.0
                     for pi in ps])
    extra = {
        "p_star": ps.tolist(),
        "mean_L_alt": mean_report(la, config.seed).to_dict(),
        "mean_L_vallois": mean_report(lv, vseed).to_dict(),
        "target_mean": m.mean(),
        "unstopped_alt": alt.unstopped_fraction,
        "unstopped_vallois": val.unstopped_fraction,
    }
    return BoundReport("ltime", p, rhs, lhs, np.hypot(se_l, se_r), la.size, config.seed, extra,
                       time.perf_counter() - t0)


def rogers_condition_check(sup, drawdown, n_bins: int = 50, min_mass: float = 0.01):
    """Binned form of the Rogers condition on the joint law of ``(sup_T, sup_T - B_T)``.

    For every bin ``[a, b)`` of the supremum range compares
    ``int_a^b P(sup > y) dy`` with ``E[(sup - B_T); sup in [a, b)]``.

    Returns
    -------
    max_rel : float
        Largest ``|lhs - rhs| / lhs`` over bins holding at least ``min_mass``
        of the supremum law (0 when no such bin has positive ``lhs``).
    table : dict
        Bin edges, both sides and masses.
    """
    sup = np.asarray(sup, float)
    dd = np.asarray(drawdown, float)
    top = float(sup.max()) if sup.size else 0.0
    if top <= 0:
        return 0.0, {"edges": [], "lhs": [], "rhs": [], "mass": []}
    edges = np.linspace(0.0, top, n_bins + 1)
    lhs = np.array([np.minimum(np.maximum(sup - a, 0.0), b - a).mean()
                    for a, b in zip(edges[:-1], edges[1:])])
    idx = np.clip(np.searchsorted(edges, sup, side="right") - 1, 0, n_bins - 1)
    rhs = np.bincount(idx, weights=dd, minlength=n_bins) / sup.size
    mass = np.bincount(idx, minlength=n_bins) / sup.size
    use = (mass >= min_mass) & (lhs > 0)
    rel = np.abs(lhs - rhs) / np.where(lhs > 0, lhs, 1.0)
    max_rel = float(rel[use].max()) if np.any(use) else 0.0
    return max_rel, {"edges": edges.tolist(), "lhs": lhs.tolist(), "rhs": rhs.tolist(),
                     "mass": mass.tolist(), "used": use.tolist()}


@dataclass
class LaplaceResult:
    estimate: StatReport
    closed_form: float

    @property
    def lhs(self) -> float:
        return self.estimate.estimate

    @property
    def rhs(self) -> float:
        return self.closed_form

    @property
    def stderr(self) -> float:
        return self.estimate.stderr

    def holds(self, k: float = 3.0) -> bool:
        return self.estimate.within(self.closed_form, k)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "stderr": self.stderr, "n": self.estimate.n,
                "seed": self.estimate.seed, "holds": self.holds()}


def hitting_laplace_check(f: PiecewiseFn, x: float, config: SimConfig) -> LaplaceResult:
    """``E[exp(-1/2 int_0^{T_x} f(sup_s)^2 ds)]`` against ``exp(-int_0^x |f|)``.

    Paths still running at the horizon keep the integral accumulated so
    far, which biases the estimate up by at most ``P(T_x > horizon)``
    times the remaining factor.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    t0 = time.perf_counter()
    bx, bv = f.step_table(upto=x)
    batch = simulate_batch(config, HittingLevel(x), q=(bx, bv ** 2))
    vals = np.exp(-0.5 * batch.integral)
    rep = mean_report(vals, config.seed, time.perf_counter() - t0)
    return LaplaceResult(rep, math.exp(-f.abs_integral(x)))
