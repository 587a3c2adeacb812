import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from maxmart.paths import (PathGrid, SimConfig, first_hitting, get_threads, joint_cdf_box,
                           joint_density, local_time, set_threads, simulate, simulate_batch,
                           stop)
from maxmart.rules import FixedTime, HittingLevel


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, horizon=1.0)
    with pytest.raises(ValueError):
        SimConfig(dt=1e-4, horizon=1.0, local_time_epsilon=1e-3)
    with pytest.raises(ValueError):
        SimConfig(dt=1e-3, horizon=1.0, seed=-1)
    with pytest.raises(ValueError):
        SimConfig(dt=1e-9, horizon=1e3)
    assert SimConfig(dt=1e-4, horizon=1.0).local_time_epsilon == 0.05
    assert SimConfig(dt=1e-2, horizon=1.0).replace(dt=0.04).local_time_epsilon == pytest.approx(0.2)


def test_zero_horizon_single_point():
    p = simulate(SimConfig(dt=1.0, horizon=0.0), 0)
    np.testing.assert_array_equal(p.values, [0.0])


@pytest.mark.parametrize("bridge", [False, True])
def test_same_index_bit_identical(bridge):
    cfg = SimConfig(dt=1e-3, horizon=1.0, n_paths=5, seed=42, bridge=bridge)
    a, b = simulate(cfg, 3), simulate(cfg, 3)
    for f in ("values", "sup", "inf", "ell", "ell_downcrossing"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


@pytest.mark.parametrize("bridge", [False, True])
def test_single_path_agrees_with_batch(bridge):
    cfg = SimConfig(dt=1e-3, horizon=1.0, n_paths=8, seed=9, bridge=bridge)
    batch = simulate_batch(cfg, HittingLevel(0.5), snap_times=[0.25])
    for i in range(cfg.n_paths):
        p = simulate(cfg, i, HittingLevel(0.5))
        assert p.values[-1] == batch.B[i] and p.sup[-1] == batch.sup[i]
        assert p.ell_tanaka[-1] == batch.ell_tanaka[i]
        assert p.n - 1 == batch.step[i]


def test_batch_independent_of_threads_and_chunking():
    cfg = SimConfig(dt=1e-3, horizon=1.0, n_paths=3000, seed=1, bridge=True)
    old = get_threads()
    try:
        set_threads(1)
        d1 = simulate_batch(cfg, snap_times=[0.5]).digest()
        set_threads(4)
        d4 = simulate_batch(cfg, snap_times=[0.5]).digest()
        dc = simulate_batch(cfg, snap_times=[0.5], chunk=700).digest()
    finally:
        set_threads(old)
    assert d1 == d4 == dc


def test_endpoint_and_sup_laws():
    cfg = SimConfig(dt=1e-3, horizon=1.0, n_paths=20_000, seed=3, bridge=True)
    b = simulate_batch(cfg)
    assert sps.kstest(b.B, "norm").pvalue > 1e-3
    assert sps.kstest(b.sup, sps.halfnorm.cdf).pvalue > 1e-3
    assert sps.kstest(-b.inf, sps.halfnorm.cdf).pvalue > 1e-3
    # Tanaka local time at 0 has the law of sup
    assert sps.ks_2samp(b.ell_tanaka, b.sup).pvalue > 1e-3


def test_downcrossing_on_oscillation():
    eps = 0.1
    m = 7
    vals = np.concatenate([[0.0], np.tile([eps, 0.0], m)])
    p = PathGrid.from_values(vals, dt=eps * eps)
    assert local_time(p, eps)[-1] == pytest.approx(m * eps)


def test_first_hitting_examples():
    p = PathGrid.from_values([0.0, 0.5, 1.0])
    assert first_hitting(p, 0.0) == 0
    assert first_hitting(p, 0.9) == 2
    assert first_hitting(p, 2.0) is None
    q = PathGrid.from_values([0.0, -0.5, -1.0, -0.2])
    assert first_hitting(q, -1.0) == 2
    out = stop(q, HittingLevel(-1.0))
    assert out.step == 2 and out.B_T == -1.0 and out.stopped
    assert stop(q, FixedTime(0)).step == 0 and stop(q, FixedTime(0)).B_T == 0.0


def test_joint_density_examples():
    assert joint_density(1.0, 2.0, 1.0) == 0.0
    assert joint_density(1.0, 0.0, 1.0) == pytest.approx(math.sqrt(2 / math.pi) * 2 * math.exp(-2),
                                                          abs=1e-12)
    assert joint_density(1.0, 0.0, 1.0) == pytest.approx(0.21596, abs=1e-5)


def test_joint_density_normalizes():
    from maxmart.cli import density_normalization

    assert abs(density_normalization(1.0) - 1.0) <= 1e-3


@given(st.floats(-2, 2), st.floats(0.01, 1.0), st.floats(0, 2), st.floats(0.01, 1.0))
def test_box_probability_matches_density_integral(x0, dx, y0, dy):
    from scipy.integrate import dblquad

    # cut the inner range at the support edge x = y so the integrand is smooth
    ref, _ = dblquad(lambda x, y: joint_density(1.0, x, y), y0, y0 + dy,
                     lambda y: min(x0, y), lambda y: min(x0 + dx, y))
    assert joint_cdf_box(1.0, x0, x0 + dx, y0, y0 + dy) == pytest.approx(ref, abs=1e-7)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=60))
def test_path_invariants(steps):
    p = PathGrid.from_values(np.concatenate([[0.0], np.cumsum(steps)]), dt=1e-2)
    assert np.all(p.sup >= p.values) and np.all(np.diff(p.sup) >= 0)
    assert np.all(p.ell >= 0) and np.all(np.diff(p.ell) >= -1e-15)
    # discrete Tanaka: |B_n| - L_n is the martingale transform sum sgn(B_{k-1}) dB_k
    sgn = np.sign(p.values[:-1])
    np.testing.assert_allclose(np.abs(p.values[1:]) - p.ell[1:],
                               np.cumsum(sgn * np.diff(p.values)), atol=1e-12)


def test_csv_rows_header_fields():
    p = simulate(SimConfig(dt=0.1, horizon=0.3), 0)
    rows = list(p.to_csv_rows())
    assert len(rows) == 4 and len(rows[0]) == 5 and rows[0][0] == 0
