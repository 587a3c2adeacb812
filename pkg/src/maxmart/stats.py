"""Monte-Carlo summaries and small statistical helpers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class StatReport:
    """Estimate with standard error, sample count and seed.

    Attributes
    ----------
    estimate : float
    stderr : float
        Sample standard deviation over ``sqrt(n)`` for mean-type estimators,
        delta-method error for ratios.
    n : int
    seed : int
    wall_time : float
        Seconds spent producing the estimate. Excluded from reproducibility
        comparisons.
    """

    estimate: float
    stderr: float
    n: int
    seed: int
    wall_time: float = 0.0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("StatReport needs n > 0")
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    def z(self, target: float) -> float:
        """Signed distance to ``target`` in units of ``stderr``."""
        d = self.estimate - target
        if self.stderr == 0:
            return 0.0 if d == 0 else math.copysign(math.inf, d)
        return d / self.stderr

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.estimate - target) <= k * self.stderr

    def to_dict(self) -> dict:
        return asdict(self)


def mean_report(x, seed: int, wall_time: float = 0.0) -> StatReport:
    x = np.asarray(x, dtype=float)
    n = x.size
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    return StatReport(float(x.mean()), sd / math.sqrt(n), n, seed, wall_time)


def diff_report(x, y, seed: int, wall_time: float = 0.0) -> StatReport:
    """Paired difference ``E[x] - E[y]`` from the same paths."""
    return mean_report(np.asarray(x, float) - np.asarray(y, float), seed, wall_time)


def ratio_influence(num, den):
    """Ratio ``sum(num) / sum(den)`` and its per-sample influence values.

    The influence values have mean zero; their standard error is the
    delta-method error of the ratio.
    """
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    mn, md = num.mean(), den.mean()
    r = mn / md
    return r, (num - r * den) / md


def ratio_report(num, den, seed: int, wall_time: float = 0.0) -> StatReport:
    r, infl = ratio_influence(num, den)
    n = infl.size
    return StatReport(float(r), float(infl.std(ddof=1) / math.sqrt(n)), n, seed, wall_time)


def ecdf_at(sorted_samples: np.ndarray, x) -> np.ndarray:
    """Right-continuous empirical CDF ``P(X <= x)``."""
    return np.searchsorted(sorted_samples, x, side="right") / sorted_samples.size


def ks_vs_atomic(samples, measure) -> float:
    """Sup distance between the empirical CDF and an atomic target CDF.

    Both CDFs are step functions, so the supremum is attained at (or just
    before) a jump of one of them; each jump point is checked from both sides.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    pts = np.union1d(s, measure.x)
    f_emp = ecdf_at(s, pts)
    f_tgt = measure.cdf(pts)
    f_emp_left = np.searchsorted(s, pts, side="left") / s.size
    f_tgt_left = f_tgt - measure.mass_at(pts)
    return float(max(np.max(np.abs(f_emp - f_tgt)), np.max(np.abs(f_emp_left - f_tgt_left))))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value."""
    return float(sps.kstwobign.isf(alpha) / math.sqrt(n))


def ks2_critical(n: int, m: int, alpha: float = 0.01) -> float:
    return float(sps.kstwobign.isf(alpha) * math.sqrt((n + m) / (n * m)))
