import math

import numpy as np
import pytest

from ddebranch import models, orbits
from ddebranch.branches import Branch, StepPolicy, continue_branch
from ddebranch.charts import PlanarChart, branch_curves, population_coordinates
from ddebranch.errors import NumericalError, OutsideChartError


@pytest.fixture(scope="module")
def enharmonic_chart():
    model = models.builtin("enharmonic")
    seed = orbits.solve_orbit(model, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 2))
    up = continue_branch(model, seed, +1, amplitude_window=(0.4, 2.0), policy=StepPolicy(maximum=0.1))
    down = continue_branch(model, seed, -1, amplitude_window=(0.4, 2.0), policy=StepPolicy(maximum=0.1))
    merged = {o.amplitude: o for o in up.orbits + down.orbits}
    branch = Branch(
        model=model,
        orbits=sorted(merged.values(), key=lambda o: o.amplitude),
        lower_boundary=down.lower_boundary,
        upper_boundary=up.upper_boundary,
    )
    return PlanarChart(branch, 128)


def test_two_orbit_branch_too_coarse():
    model = models.builtin("enharmonic")
    o1 = orbits.solve_orbit(model, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 2))
    o2 = orbits.solve_orbit(model, target_amplitude=1.2, guess=o1)
    branch = Branch(model=model, orbits=[o1, o2], lower_boundary=None, upper_boundary=None)
    with pytest.raises(NumericalError, match="at least 3"):
        PlanarChart(branch, 128)


def test_detdg_sign_definite(enharmonic_chart):
    detdg = enharmonic_chart.detDG
    assert np.all(detdg < 0.0)


def test_alpha_is_radius(enharmonic_chart):
    for u, v in ((0.6, 0.8), (1.2, 0.5), (-0.9, 0.3)):
        alpha, tau = enharmonic_chart.amplitude_at(u, v)
        assert alpha == pytest.approx(math.hypot(u, v), abs=1e-6)
        assert 0.0 <= tau < enharmonic_chart.period_at(alpha)


def test_inversion_round_trip(enharmonic_chart):
    rng = np.random.default_rng(12)
    a_lo, a_hi = enharmonic_chart.a_grid[0], enharmonic_chart.a_grid[-1]
    worst_a = worst_t = 0.0
    for _ in range(200):
        a = float(rng.uniform(a_lo + 0.05, a_hi - 0.05))
        t = float(rng.uniform(0.0, enharmonic_chart.period_at(a)))
        u, v = enharmonic_chart.G(t, a)
        alpha, tau = enharmonic_chart.amplitude_at(u, v)
        worst_a = max(worst_a, abs(alpha - a))
        p = enharmonic_chart.period_at(a)
        dt = min(abs(tau - t), abs(tau - t + p), abs(tau - t - p))
        worst_t = max(worst_t, dt)
    assert worst_a < 1e-8
    assert worst_t < 1e-6


def test_g_field_closed_form(enharmonic_chart):
    g = enharmonic_chart.g_field(0.6, 0.8)
    assert g == pytest.approx(0.6, abs=1e-6)  # Omega = 1: g = u


def test_outside_annulus_rejected(enharmonic_chart):
    with pytest.raises(OutsideChartError):
        enharmonic_chart.amplitude_at(0.0, 0.0)
    with pytest.raises(OutsideChartError):
        enharmonic_chart.amplitude_at(5.0, 5.0)


def test_predator_prey_report(enharmonic_chart):
    report = enharmonic_chart.verify_predator_prey()
    assert report["passed"]
    assert report["n_negative"] == report["n_nodes"]
    # Omega = 1: d1g = 1 and d2f = -1, so the product is exactly -1
    assert report["min"] == pytest.approx(-1.0, abs=1e-5)
    assert report["max"] == pytest.approx(-1.0, abs=1e-5)


def test_first_integral_drift(enharmonic_chart):
    out = enharmonic_chart.first_integral_drift((1.0, 0.0), 100.0, step=0.02)
    assert out["max_drift"] < 1e-6


def test_on_orbit_g_identity(enharmonic_chart):
    # xdot(t - 1) = r g(x(t), x(t-1)) along stored orbits
    branch = enharmonic_chart.branch
    orbit = branch.orbit_nearest(1.0)
    ts = np.linspace(0.1, orbit.period, 7)
    for t in ts:
        u = float(orbit.x(t))
        v = float(orbit.x(t - 1.0))
        g = enharmonic_chart.g_field(u, v)
        assert orbit.delay * g == pytest.approx(float(orbit.xdot(t - 1.0)), abs=1e-6)


def test_branch_curves_span_and_population_map(enharmonic_chart):
    curves = branch_curves(enharmonic_chart.branch, 10)
    assert len(curves) >= 8
    amps = [c.amplitude for c in curves]
    assert min(amps) == pytest.approx(enharmonic_chart.branch.amplitudes[0])
    pop = population_coordinates(curves[0])
    assert np.all(pop.vertices > 0)


def test_hutchinson_population_chart_hole():
    # the log-coordinate equilibrium maps to (1, 1): not in the annulus
    model = models.builtin("hutchinson-log")
    from ddebranch.branches import hopf_scan, hopf_seed

    hopf = hopf_scan(model, 0.0)[0]
    seed = orbits.solve_orbit(model, target_amplitude=0.05, guess=hopf_seed(model, hopf))
    up = continue_branch(model, seed, +1, amplitude_window=(0.02, 1.0), policy=StepPolicy(maximum=0.1))
    chart = PlanarChart(up, 128)
    with pytest.raises(OutsideChartError):
        chart.amplitude_at(math.log(1.0), math.log(1.0))
