import json
from math import comb, log

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapsched.schedule import (
    GAP_FLOOR,
    AngleSchedule,
    BezierGapCurve,
    ScheduleError,
    continuous_schedule_time,
    de_casteljau,
    derive_angles,
    eval_curve,
    fit_bezier,
)
from gapsched.spectrum import GapProfile

GRID = np.linspace(0, 1, 101)


def bernstein_sum(y, s):
    d = len(y) - 1
    return sum(comb(d, i) * (1 - s) ** (d - i) * s**i * y[i] for i in range(d + 1))


def unit_gap(s):
    return np.ones_like(np.asarray(s, dtype=float))


# -- evaluation ------------------------------------------------------------


def test_endpoints_and_partition_of_unity():
    c = BezierGapCurve(3, (1.5, 0.2, 0.9, 0.4))
    assert eval_curve(c, 0.0) == 1.5
    assert eval_curve(c, 1.0) == 0.4
    assert eval_curve(BezierGapCurve(3, (1, 1, 1, 1)), 0.37) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("degree", [3, 7])
def test_de_casteljau_agrees_with_bernstein_sum(degree):
    y = np.random.default_rng(degree).uniform(0.1, 2.0, degree + 1)
    s = np.linspace(0, 1, 1001)
    np.testing.assert_allclose(de_casteljau(s, y), bernstein_sum(y, s), atol=1e-12, rtol=0)


def test_cubic_matches_closed_form():
    y0, y1, y2, y3 = 2.0, 1.1, 0.3, 0.29
    c = BezierGapCurve(3, (y0, y1, y2, y3))
    for f in (0.1, 0.5, 0.77):
        closed = (1 - f) ** 3 * y0 + 3 * (1 - f) ** 2 * f * y1 + 3 * (1 - f) * f**2 * y2 + f**3 * y3
        assert c(f) == pytest.approx(closed, abs=1e-14)


def test_eval_rejects_outside_unit_interval():
    with pytest.raises(ScheduleError):
        eval_curve(BezierGapCurve(1, (1, 1)), 1.2)


def test_curve_json_roundtrip(tmp_path):
    c = BezierGapCurve(3, (2.0, 1.15, 0.286, 0.2859), "mean", 0.0019)
    c.save(tmp_path / "c.json")
    assert BezierGapCurve.load(tmp_path / "c.json") == c
    assert set(json.loads((tmp_path / "c.json").read_text())) == {"degree", "y", "source_profile_id", "rms_residual"}


# -- fitting ----------------------------------------------------------------


def test_fit_constant_profile():
    c = fit_bezier(GapProfile(GRID, np.full(101, 0.7)), 3)
    np.testing.assert_allclose(c.y, 0.7, atol=1e-12)
    assert c.rms_residual == pytest.approx(0.0, abs=1e-12)


def test_fit_linear_profile_hits_positivity_error():
    # 2(1-s) is exact in the cubic basis, y = (2, 4/3, 2/3, 0), and the zero endpoint is rejected
    with pytest.raises(ScheduleError, match="non-positive"):
        fit_bezier(GapProfile(GRID, 2 * (1 - GRID)), 3)


def test_fit_linear_profile_exact_when_positive():
    c = fit_bezier(GapProfile(GRID, 2 * (1 - GRID) + 0.5), 3)
    # degree elevation of a + b s gives y_i = a + b i / d
    np.testing.assert_allclose(c.y, [2.5, 2.5 - 2 / 3, 2.5 - 4 / 3, 0.5], atol=1e-12)


def test_fit_pins_endpoints_and_residual_monotone():
    g = 0.3 + 1.7 * np.exp(-4 * GRID) + 0.1 * np.sin(9 * GRID)
    prof = GapProfile(GRID, g)
    c3, c7 = fit_bezier(prof, 3), fit_bezier(prof, 7)
    for c in (c3, c7):
        assert c(0.0) == g[0] and c(1.0) == g[-1]
    assert c7.rms_residual <= c3.rms_residual


def test_fit_needs_enough_points():
    with pytest.raises(ScheduleError):
        fit_bezier(GapProfile(np.linspace(0, 1, 4), [2, 1, 1, 1]), 7)


# -- angles -------------------------------------------------------------------


def test_derive_angles_hand_example():
    sched = derive_angles(2, 1.0, 1.0, unit_gap)
    np.testing.assert_allclose(sched.gammas, [0.25, 0.5], atol=1e-15)
    np.testing.assert_allclose(sched.betas, [0.25, 0.0], atol=1e-15)


def test_derive_angles_rejects_nonpositive_kappa():
    with pytest.raises(ScheduleError):
        derive_angles(3, 0.0, 1.0, unit_gap)


def test_gap_floor_is_recorded():
    sched = derive_angles(4, 1.0, 1.0, lambda s: 1.0 - s)
    assert sched.provenance["gap_floor_engaged"]
    assert np.isfinite(sched.gammas).all()
    assert sched.gammas[-1] == pytest.approx(1 / 4 / GAP_FLOOR)


curves = st.lists(st.floats(0.05, 3.0), min_size=2, max_size=9).map(lambda y: BezierGapCurve(len(y) - 1, tuple(y)))


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 64), kappa=st.floats(1e-2, 50), q=st.floats(0, 3), curve=curves)
def test_closed_form_properties(p, kappa, q, curve):
    sched = derive_angles(p, kappa, q, curve)
    assert sched.betas[-1] == 0.0
    s = np.arange(1, p + 1) / p
    for k in range(p - 1):
        assert sched.gammas[k] / sched.betas[k] == pytest.approx(s[k] / (1 - s[k]), rel=1e-12)
    unit = derive_angles(p, 1.0, q, curve)
    np.testing.assert_allclose(sched.gammas, unit.gammas / kappa, rtol=1e-12)
    np.testing.assert_allclose(sched.betas, unit.betas / kappa, rtol=1e-12, atol=0)
    doubled = derive_angles(p, 2 * kappa, q, curve)
    np.testing.assert_allclose(doubled.gammas, sched.gammas / 2, rtol=1e-12)


def test_max_gamma_decays_like_one_over_p():
    curve = BezierGapCurve(3, (2.0, 1.1, 0.3, 0.3))
    prev = None
    for p in (8, 16, 32, 64, 128):
        top = derive_angles(p, 0.5, 1.5, curve).gammas.max()
        if prev is not None:
            assert top == pytest.approx(prev / 2, rel=1e-12)
        prev = top


def test_schedule_csv_and_free_schedule():
    sched = derive_angles(2, 1.0, 1.0, unit_gap)
    assert sched.to_csv().splitlines() == ["k,s_k,gamma,beta", "1,0.5,0.25,0.25", "2,1.0,0.5,0.0"]
    free = AngleSchedule.free([0.1, 0.2, 0.3, 0.4])
    assert free.p == 2 and free.gammas.tolist() == [0.1, 0.2] and free.betas.tolist() == [0.3, 0.4]
    with pytest.raises(ScheduleError):
        AngleSchedule.free([0.1, 0.2, 0.3])


# -- continuous time ----------------------------------------------------------------


@pytest.mark.parametrize("q", [0.0, 1.0, 2.3])
def test_schedule_time_constant_gap(q):
    assert continuous_schedule_time(1.7, q, unit_gap).total_time == pytest.approx(1 / 1.7, rel=1e-12)


def test_schedule_time_linear_in_inverse_kappa():
    curve = BezierGapCurve(3, (2.0, 1.1, 0.3, 0.3))
    t1 = continuous_schedule_time(1.0, 1.5, curve).total_time
    t2 = continuous_schedule_time(2.0, 1.5, curve).total_time
    assert t2 == pytest.approx(t1 / 2, rel=1e-12)


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
def test_schedule_time_matches_antiderivative(eps):
    kappa = 1.3
    res = continuous_schedule_time(kappa, 1.0, lambda s: 2 * (1 - s) + eps, resolution=20001)
    assert res.total_time == pytest.approx(log(2 / eps + 1) / (2 * kappa), abs=1e-6)
    assert not res.gap_floor_engaged


def test_schedule_time_flags_floor():
    assert continuous_schedule_time(1.0, 1.0, lambda s: 2 * (1 - s)).gap_floor_engaged
