import math

import numpy as np
import pytest

from ddebranch import models, orbits
from ddebranch.branches import (
    StepPolicy,
    branch_from_payload,
    branch_payload,
    continue_branch,
    find_equilibria,
    hopf_scan,
    hopf_seed,
    rescale_branch,
    rescale_orbit,
    seed_from_planar,
)


@pytest.fixture(scope="module")
def enharmonic_scaled():
    return models.builtin("enharmonic", omega="1+s")


@pytest.fixture(scope="module")
def hutchinson():
    return models.builtin("hutchinson-log")


@pytest.fixture(scope="module")
def enharmonic_branch(enharmonic_scaled):
    seed = orbits.solve_orbit(
        enharmonic_scaled, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 4)
    )
    up = continue_branch(enharmonic_scaled, seed, +1, amplitude_window=(0.5, 3.0))
    down = continue_branch(enharmonic_scaled, seed, -1, amplitude_window=(0.5, 3.0))
    merged = {o.amplitude: o for o in up.orbits + down.orbits}
    from ddebranch.branches import Branch

    return Branch(
        model=enharmonic_scaled,
        orbits=sorted(merged.values(), key=lambda o: o.amplitude),
        lower_boundary=down.lower_boundary,
        upper_boundary=up.upper_boundary,
    )


def test_enharmonic_delay_map(enharmonic_branch):
    a = enharmonic_branch.amplitudes
    expected = np.pi / (2.0 * (1.0 + a * a))
    assert np.max(np.abs(enharmonic_branch.r_values - expected)) < 1e-6


def test_branch_amplitudes_strictly_increasing(enharmonic_branch):
    assert np.all(np.diff(enharmonic_branch.amplitudes) > 0)
    assert enharmonic_branch.interior_same_n()


def test_hopf_scan_hutchinson(hutchinson):
    roots = hopf_scan(hutchinson, 0.0)
    first = roots[0]
    assert first.nu == pytest.approx(math.pi / 2, abs=1e-12)
    assert first.r == pytest.approx(math.pi / 2, abs=1e-12)
    assert first.seed_period == pytest.approx(4.0)
    assert first.residual < 1e-10
    # the family continues: negative-delay root at 3 pi / 2
    assert any(abs(h.nu - 3 * math.pi / 2) < 1e-9 and h.r < 0 for h in roots)


def test_hopf_scan_qrt_both_wells():
    qrt = models.builtin("qrt-doublewell")
    for xbar in (0.0, -1.0):
        h = hopf_scan(qrt, xbar)[0]
        assert h.r == pytest.approx(math.pi / 2, abs=1e-12)


def test_find_equilibria_qrt():
    qrt = models.builtin("qrt-doublewell")
    eq = find_equilibria(qrt)
    assert len(eq) == 3
    assert eq[0] == pytest.approx(-1.0, abs=1e-9)
    assert eq[1] == pytest.approx(-0.5, abs=1e-9)
    assert abs(eq[2]) < 1e-9


def test_hutchinson_branch_through_log5(hutchinson):
    hopf = hopf_scan(hutchinson, 0.0)[0]
    seed = orbits.solve_orbit(hutchinson, target_amplitude=1e-2, guess=hopf_seed(hutchinson, hopf))
    up = continue_branch(hutchinson, seed, +1, amplitude_window=(1e-6, 1.7), policy=StepPolicy(maximum=0.1))
    assert up.amplitudes[-1] > math.log(5.0)
    # delay map increases away from the Hopf value pi/2
    assert np.all(np.diff(up.r_values) > 0)
    assert up.r_values[0] > math.pi / 2


def test_hutchinson_lower_end_is_hopf(hutchinson):
    hopf = hopf_scan(hutchinson, 0.0)[0]
    seed = orbits.solve_orbit(hutchinson, target_amplitude=1e-2, guess=hopf_seed(hutchinson, hopf))
    down = continue_branch(hutchinson, seed, -1, amplitude_window=(1e-6, 1.7))
    assert getattr(down.lower_boundary, "kind", "") == "hopf"
    assert down.lower_boundary.nu == pytest.approx(math.pi / 2, abs=1e-9)
    assert down.lower_boundary.r == pytest.approx(math.pi / 2, abs=1e-9)
    assert down.lower_boundary.equilibrium == pytest.approx(0.0, abs=1e-9)


def test_rescale_identity(enharmonic_branch):
    same = rescale_branch(enharmonic_branch, 0)
    assert same is enharmonic_branch


def test_rescale_enharmonic_unit():
    model = models.builtin("enharmonic")
    orbit = orbits.solve_orbit(model, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 2))
    up = rescale_orbit(orbit, 1)
    assert up.delay == pytest.approx(5 * math.pi / 2, abs=1e-9)
    assert up.period == pytest.approx(4.0 / 5.0, abs=1e-10)
    assert up.n_index == 3
    down = rescale_orbit(orbit, -1)
    assert down.delay == pytest.approx(-3 * math.pi / 2, abs=1e-9)
    assert down.period == pytest.approx(4.0 / 3.0, abs=1e-10)
    assert down.n_index == 2
    # minimal-period product is invariant up to the time reversal sign
    assert abs(up.period * up.delay) == pytest.approx(abs(orbit.period * orbit.delay), abs=1e-12)
    assert abs(down.period * down.delay) == pytest.approx(abs(orbit.period * orbit.delay), abs=1e-12)


def test_rescaled_copy_planar_projection_identical(enharmonic_branch):
    orbit = enharmonic_branch.orbit_nearest(1.0)
    copy = rescale_orbit(orbit, 1)
    from ddebranch.geometry import JordanCurve, hausdorff

    c0 = JordanCurve(orbit.curve(256))
    c1 = JordanCurve(copy.curve(256))
    assert hausdorff(c0, c1) < 1e-6


def test_rescale_division_guard_direct():
    model = models.builtin("enharmonic")
    orbit = orbits.solve_orbit(model, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 2))
    shrunk = orbit.with_samples(orbit.n_modes)
    shrunk.period = 1.0  # synthetic: 1 + (-1) * 1 = 0
    with pytest.raises(ZeroDivisionError):
        rescale_orbit(shrunk, -1)


def test_planar_seed_matches_collocation():
    qrt = models.builtin("qrt-doublewell")
    seed = seed_from_planar(qrt, 0.2)
    orbit = orbits.solve_orbit(qrt, target_amplitude=0.2, guess=seed)
    assert abs(orbit.period - seed.period) < 1e-5
    assert abs(orbit.delay - seed.delay) < 1e-5


def test_branch_payload_round_trip(enharmonic_branch, enharmonic_scaled):
    payload = branch_payload(enharmonic_branch)
    back = branch_from_payload(enharmonic_scaled, payload)
    assert len(back.orbits) == len(enharmonic_branch.orbits)
    assert back.lower_boundary.kind == getattr(enharmonic_branch.lower_boundary, "kind", "")
    assert np.array_equal(back.orbits[0].samples, enharmonic_branch.orbits[0].samples)
