import math

import numpy as np
import pytest

from maxmart.embeddings import azema_yor_rule, vallois_rule
from maxmart.measures import AtomicMeasure
from maxmart.paths import SimConfig, simulate_batch
from maxmart.rules import (AzemaYor, FirstExit, FixedTime, HittingLevel, RandomizedAbsHitting,
                           ValloisObloj)


def test_fixed_time_zero():
    b = simulate_batch(SimConfig(dt=1e-3, horizon=1.0, n_paths=10), FixedTime(0))
    assert np.all(b.step == 0) and np.all(b.B == 0) and b.stopped.all()


def test_fixed_time_rounding():
    b = simulate_batch(SimConfig(dt=1e-3, horizon=2.0, n_paths=10), FixedTime(1.0))
    assert np.all(b.step == 1000) and b.stopped.all()


def test_validation():
    with pytest.raises(ValueError):
        FirstExit(0.5, 1.0)
    with pytest.raises(ValueError):
        ValloisObloj([0.5, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        RandomizedAbsHitting([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        AzemaYor([-1.0, 1.0], [0.5, 1.0])


@pytest.mark.parametrize("bridge", [False, True])
def test_ay_two_point_is_exit(bridge, two_point):
    cfg = SimConfig(dt=1e-3, horizon=20.0, n_paths=2000, seed=4, bridge=bridge)
    a = simulate_batch(cfg, azema_yor_rule(two_point))
    e = simulate_batch(cfg, FirstExit(-1.0, 1.0))
    np.testing.assert_array_equal(a.step, e.step)
    np.testing.assert_array_equal(a.B, e.B)


def test_ay_dirac_fires_at_zero():
    b = simulate_batch(SimConfig(dt=1e-3, horizon=1.0, n_paths=10),
                       azema_yor_rule(AtomicMeasure.dirac(0.0)))
    assert np.all(b.step == 0) and b.stopped.all()


def test_ay_uniform_barycentre(uniform_1000):
    rule = azema_yor_rule(uniform_1000)
    x = uniform_1000.x[1:]
    np.testing.assert_allclose(rule.psi[1:], (1 + x) / 2, atol=2e-3)


def test_vallois_dirac_is_abs_hitting():
    cfg = SimConfig(dt=1e-3, horizon=20.0, n_paths=2000, seed=5, bridge=True)
    v = simulate_batch(cfg, vallois_rule(AtomicMeasure.dirac(1.0)))
    e = simulate_batch(cfg, FirstExit(-1.0, 1.0))
    np.testing.assert_array_equal(v.step, e.step)


def test_vallois_two_stage_table():
    m = AtomicMeasure.from_pairs([(1.0, 0.5), (2.0, 0.5)])
    rule = vallois_rule(m, atom_rule="sum")
    assert rule.phi(0.0) == 1.0 and rule.phi(0.49) == 1.0
    assert rule.phi(0.5) == 2.0 and rule.phi(100.0) == 2.0
    np.testing.assert_array_equal(rule.phi(np.array([0.2, 0.7])),
                                  m.dual_hl_right_inverse(np.array([0.2, 0.7])))


def test_randomized_levels_follow_weights():
    rule = RandomizedAbsHitting([1.0, 2.0, 3.0], [0.2, 0.3, 0.5])
    lv = np.array([rule.level(7, i) for i in range(20_000)])
    freq = np.array([(lv == v).mean() for v in (1.0, 2.0, 3.0)])
    np.testing.assert_allclose(freq, [0.2, 0.3, 0.5], atol=0.015)
    b = simulate_batch(SimConfig(dt=1e-3, horizon=50.0, n_paths=300, seed=7, bridge=True), rule)
    np.testing.assert_array_equal(np.abs(b.B), lv[:300])


def test_hitting_negative_level_bridge_is_exact():
    b = simulate_batch(SimConfig(dt=1e-2, horizon=50.0, n_paths=500, seed=8, bridge=True),
                       HittingLevel(-0.5))
    assert np.all(b.B[b.stopped] == -0.5)


def test_fire_masks_match_kernel(two_point):
    from maxmart.paths import simulate, stop

    cfg = SimConfig(dt=1e-3, horizon=10.0, n_paths=20, seed=2)
    rule = azema_yor_rule(AtomicMeasure.uniform(-1, 1, 50))
    batch = simulate_batch(cfg, rule)
    for i in range(cfg.n_paths):
        out = stop(simulate(cfg, i), rule)
        assert out.step == batch.step[i]


def test_rule_dicts():
    assert FixedTime(1.0).to_dict() == {"rule": "fixed", "t": 1.0}
    assert HittingLevel(2.0).to_dict()["x"] == 2.0
    assert math.isinf(FixedTime(math.inf).n_steps(0.1))
