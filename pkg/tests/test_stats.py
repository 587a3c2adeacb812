import math

import numpy as np
import pytest
from scipy import stats as sps

from maxmart.measures import AtomicMeasure
from maxmart.stats import (StatReport, diff_report, ks_critical, ks_vs_atomic, mean_report,
                           ratio_report)


def test_mean_report_stderr():
    x = np.arange(10.0)
    r = mean_report(x, seed=3)
    assert r.estimate == 4.5 and r.n == 10 and r.seed == 3
    assert r.stderr == pytest.approx(x.std(ddof=1) / math.sqrt(10))
    assert r.within(4.5) and not r.within(100.0)


def test_diff_report_is_paired():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(1000)
    r = diff_report(a + 1.0, a, seed=0)
    assert r.estimate == pytest.approx(1.0) and r.stderr < 1e-12


def test_ratio_report_delta_method():
    rng = np.random.default_rng(1)
    den = rng.exponential(size=200_000)
    num = den * (rng.random(den.size) < 0.3)
    r = ratio_report(num, den, seed=1)
    assert r.within(0.3)
    # bootstrap-free check of the error against replicate means
    reps = [ratio_report(num[i::20], den[i::20], 1).estimate for i in range(20)]
    assert r.stderr == pytest.approx(np.std(reps, ddof=1) / math.sqrt(20), rel=0.5)


def test_ks_vs_atomic_matches_scipy_for_continuous_target():
    mu = AtomicMeasure.uniform(0.0, 1.0, 2000)
    s = np.random.default_rng(2).random(5000)
    ref = sps.kstest(s, "uniform").statistic
    assert ks_vs_atomic(s, mu) == pytest.approx(ref, abs=1e-3)


def test_ks_exact_on_atoms():
    mu = AtomicMeasure.from_pairs([(-1, 0.5), (1, 0.5)])
    assert ks_vs_atomic(np.array([-1.0, 1.0]), mu) == 0.0
    assert ks_vs_atomic(np.array([-1.0, -1.0, -1.0, 1.0]), mu) == pytest.approx(0.25)


def test_ks_critical():
    assert ks_critical(10_000) == pytest.approx(1.6276 / 100, rel=1e-3)


def test_report_serialization():
    d = StatReport(1.0, 0.1, 5, 2).to_dict()
    assert d["estimate"] == 1.0 and d["n"] == 5 and d["seed"] == 2
