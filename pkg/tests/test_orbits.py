import json
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ddebranch import models, orbits
from ddebranch.errors import BranchBoundarySignal, SimpleOscillationError


@pytest.fixture(scope="module")
def enharmonic():
    return models.builtin("enharmonic")


@pytest.fixture(scope="module")
def qrt():
    return models.builtin("qrt-doublewell")


@pytest.fixture(scope="module")
def unit_orbit(enharmonic):
    return orbits.solve_orbit(enharmonic, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 2))


def test_enharmonic_exact(unit_orbit):
    assert unit_orbit.period == pytest.approx(4.0, abs=1e-8)
    assert unit_orbit.delay == pytest.approx(math.pi / 2, abs=1e-8)
    s = np.arange(unit_orbit.n_modes) / unit_orbit.n_modes
    assert np.max(np.abs(unit_orbit.samples - np.cos(2 * np.pi * s))) < 1e-8


def test_enharmonic_scaled_frequency():
    model = models.builtin("enharmonic", omega="1+s")
    orbit = orbits.solve_orbit(model, target_amplitude=2.0, guess=orbits.cosine_seed(2.0, 4.0, math.pi / 10))
    assert orbit.delay == pytest.approx(math.pi / 10, abs=1e-10)
    assert orbit.period == pytest.approx(4.0, abs=1e-10)


def test_depth_and_index(unit_orbit):
    q, depth = orbits.locate_depth(unit_orbit)
    assert q == pytest.approx(2.0, abs=1e-8)
    assert depth == pytest.approx(-1.0, abs=1e-10)
    assert unit_orbit.n_index == 1


def test_equilibrium_amplitude_signals_boundary(qrt):
    seed = orbits.cosine_seed(0.3, 4.24, 1.55, offset=-0.1)
    with pytest.raises(BranchBoundarySignal) as sig:
        orbits.solve_orbit(qrt, target_amplitude=-0.5, guess=seed)
    assert sig.value.equilibrium == pytest.approx(-0.5)


def test_orbit_residual_exact_and_perturbed(enharmonic, unit_orbit):
    assert orbits.orbit_residual(enharmonic, unit_orbit) < 1e-10
    perturbed = orbits.PeriodicOrbit(
        model=enharmonic,
        samples=unit_orbit.samples,
        period=unit_orbit.period + 1e-3,
        delay=unit_orbit.delay,
        amplitude=unit_orbit.amplitude,
        depth=unit_orbit.depth,
        q=unit_orbit.q,
        n_index=1,
        residual=0.0,
    )
    assert orbits.orbit_residual(enharmonic, perturbed) > 1e-4


def test_two_hump_profile_rejected(enharmonic):
    s = np.arange(128) / 128.0
    two_hump = 1.0 * np.cos(2 * np.pi * s) + 0.4 * np.cos(4 * np.pi * s + 0.3)
    prof = orbits.FourierProfile(two_hump)
    with pytest.raises(SimpleOscillationError):
        orbits._depth_of(prof, 4.0)


def test_raw_dde_residual_at_random_times(enharmonic, unit_orbit):
    rng = np.random.default_rng(5)
    times = rng.uniform(0.0, 10 * unit_orbit.period, 1000)
    res = orbits.raw_residual(enharmonic, unit_orbit, times)
    assert np.max(res) < 1e-9


def _qrt_planar_reference(model, amplitude):
    """Independent oracle: unit-speed planar integration of (f, dH/du)."""

    def rhs(t, y):
        u, v = y
        return [float(model.f(u, v)), float(model.companion("g_analytic", u, v))]

    v0 = -amplitude**2 / (2 * amplitude**2 + 2 * amplitude + 1)

    def u_max(t, y):
        return float(model.f(y[0], y[1]))

    def v_max(t, y):
        return float(model.companion("g_analytic", y[0], y[1]))

    u_max.terminal = False
    v_max.terminal = False
    sol = solve_ivp(rhs, (0, 100), [amplitude, v0], rtol=1e-12, atol=1e-14, events=[u_max, v_max], dense_output=True)
    T = next(
        t for t in sol.t_events[0] if t > 1e-6 and abs(sol.sol(t)[0] - amplitude) < 1e-8
    )
    r = next(t for t in sol.t_events[1] if t > 1e-6 and abs(sol.sol(t)[1] - amplitude) < 1e-8)
    return T, r


def test_qrt_orbit_against_planar_oracle(qrt):
    # the collocation solve must reproduce the integrable planar reference
    a = 0.25
    T, r_lag = _qrt_planar_reference(qrt, a)
    from ddebranch.branches import seed_from_planar

    orbit = orbits.solve_orbit(qrt, target_amplitude=a, guess=seed_from_planar(qrt, a))
    assert orbit.delay == pytest.approx(r_lag, abs=1e-7)
    assert orbit.period == pytest.approx(T / r_lag, abs=1e-6)
    assert orbit.period * orbit.delay == pytest.approx(T, abs=1e-7)


def test_delay_targeted_solve(enharmonic, unit_orbit):
    model = models.builtin("enharmonic", omega="1+s")
    seed = orbits.cosine_seed(1.0, 4.0, math.pi / 4)
    orbit1 = orbits.solve_orbit(model, target_amplitude=1.0, guess=seed)
    target_r = math.pi / (2 * (1 + 1.5**2))
    orbit = orbits.solve_orbit(model, target_delay=target_r, guess=orbit1)
    assert orbit.amplitude == pytest.approx(1.5, abs=1e-9)


def test_period_targeted_solve_reference_phase(qrt):
    from ddebranch.branches import seed_from_planar

    orbit = orbits.solve_orbit(qrt, target_amplitude=0.3, guess=seed_from_planar(qrt, 0.3))
    longer = orbits.solve_orbit(
        qrt, target_period=orbit.period * 1.1, guess=orbit, phase="reference"
    )
    assert longer.period == pytest.approx(orbit.period * 1.1, rel=1e-12)
    assert longer.amplitude > orbit.amplitude  # closer to the homoclinic
    # max normalized to phase 0 after the re-gauge
    assert longer.samples[0] == pytest.approx(longer.amplitude, abs=1e-12)


def test_serialization_round_trip(enharmonic, unit_orbit):
    payload = json.loads(json.dumps(unit_orbit.to_dict()))
    back = orbits.PeriodicOrbit.from_dict(enharmonic, payload)
    assert back.period == unit_orbit.period
    assert np.array_equal(back.samples, unit_orbit.samples)


def test_resample_preserves_profile(unit_orbit):
    fine = unit_orbit.with_samples(256)
    s = np.linspace(0, 1, 97)
    assert np.max(np.abs(fine.profile.eval(s) - unit_orbit.profile.eval(s))) < 1e-10


def test_period_interval_index():
    assert orbits.period_interval_index(4.0) == 1
    assert orbits.period_interval_index(4.0 / 3.0) == 2
    assert orbits.period_interval_index(0.8) == 3
