import math

import numpy as np
import pytest

from ddebranch import models
from ddebranch.errors import RangeError
from ddebranch.stepping import HistorySegment, integrate, project_planar


@pytest.fixture(scope="module")
def enharmonic():
    return models.builtin("enharmonic")


@pytest.fixture(scope="module")
def hutchinson():
    return models.builtin("hutchinson-log")


def test_equilibrium_stays_zero(hutchinson):
    traj = integrate(hutchinson, 1.7, HistorySegment.constant(0.0), 20.0)
    ts = np.linspace(0, 20, 500)
    assert np.max(np.abs(traj.value(ts))) == 0.0
    assert traj.max_residual() == 0.0


def test_enharmonic_closed_form(enharmonic):
    history = HistorySegment.from_callable(lambda th: np.cos(math.pi / 2 * th))
    traj = integrate(enharmonic, math.pi / 2, history, 40.0)
    ts = np.linspace(0.0, 40.0, 8001)
    err = np.max(np.abs(traj.value(ts) - np.cos(math.pi / 2 * ts)))
    assert err < 1e-8


def test_fourth_order_convergence(enharmonic):
    errs = []
    for m in (64, 128):
        history = HistorySegment.from_callable(lambda th: np.cos(math.pi / 2 * th), n=m + 1)
        traj = integrate(enharmonic, math.pi / 2, history, 20.0, m=m)
        ts = np.linspace(0.0, 20.0, 2001)
        errs.append(np.max(np.abs(traj.value(ts) - np.cos(math.pi / 2 * ts))))
    assert errs[0] / errs[1] >= 2**4


def test_hutchinson_attractor_stability(hutchinson):
    traj = integrate(hutchinson, 2.0, HistorySegment.constant(0.1), 240.0)
    d = traj.derivs
    t = traj.times
    peaks = []
    for k in np.nonzero((t[:-1] > 140.0) & (d[:-1] > 0) & (d[1:] <= 0))[0]:
        lo, hi = t[k], t[k + 1]
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if traj.deriv(mid) > 0:
                lo = mid
            else:
                hi = mid
        tm = 0.5 * (lo + hi)
        peaks.append((tm, float(traj.value(tm))))
    amps = np.array([x for _, x in peaks])
    periods = np.diff([tm for tm, _ in peaks])
    assert np.ptp(amps[-5:]) < 1e-6
    assert np.ptp(periods[-5:]) < 1e-6


def test_project_planar(enharmonic):
    history = HistorySegment.from_callable(lambda th: np.cos(math.pi / 2 * th))
    traj = integrate(enharmonic, math.pi / 2, history, 10.0)
    u, v = project_planar(traj, 0.0)
    assert u == pytest.approx(1.0, abs=1e-12)
    assert v == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(RangeError):
        traj.project_planar(11.0)
    with pytest.raises(RangeError):
        traj.project_planar(-0.5)


def test_equilibrium_projection(hutchinson):
    traj = integrate(hutchinson, 1.0, HistorySegment.constant(0.0), 5.0)
    assert traj.project_planar(2.5) == (0.0, 0.0)


def test_restart_consistency(hutchinson):
    traj_full = integrate(hutchinson, 2.0, HistorySegment.constant(0.1), 40.0)
    traj_half = integrate(hutchinson, 2.0, HistorySegment.constant(0.1), 20.0)
    restarted = integrate(hutchinson, 2.0, traj_half.segment_at(20.0), 20.0)
    ts = np.linspace(0.0, 20.0, 2001)
    diff = np.max(np.abs(restarted.value(ts) - traj_full.value(ts + 20.0)))
    assert diff < 1e-9


def test_history_needs_four_samples():
    with pytest.raises(ValueError):
        HistorySegment([1.0, 2.0, 3.0])


def test_history_exact_at_grid_points():
    vals = np.sin(np.linspace(-1, 0, 33))
    seg = HistorySegment(vals)
    assert np.array_equal(seg(np.linspace(-1, 0, 33)), vals)


def test_history_expression():
    seg = HistorySegment.from_expression("cos(1.5707963267948966*u)")
    assert seg(0.0) == pytest.approx(1.0)
    assert seg(-1.0) == pytest.approx(0.0, abs=1e-12)


def test_blowup_guard():
    from ddebranch.errors import BlowupError

    model = models.parse_model("u", domain=((-1e7, 1e7), (-1e7, 1e7)))
    with pytest.raises(BlowupError):
        integrate(model, 6.0, HistorySegment.constant(1.0), 30.0)


def test_domain_violation_reported(hutchinson):
    small = models.builtin("hutchinson-log", domain=((-0.5, 0.5), (-0.5, 0.5)))
    traj = integrate(small, 2.0, HistorySegment.constant(0.1), 30.0)
    assert traj.domain_violation_t is not None
