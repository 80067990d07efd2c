import math

import numpy as np
import pytest

from ddebranch import models, orbits
from ddebranch.floquet import (
    adjoint_integrate,
    bilinear_form,
    floquet_report,
    integrate_linear,
    linear_coefficients,
    monodromy,
    variational_forcing_solution,
)


@pytest.fixture(scope="module")
def enharmonic_orbit():
    model = models.builtin("enharmonic")
    return orbits.solve_orbit(model, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 2))


@pytest.fixture(scope="module")
def hutchinson_orbit():
    model = models.builtin("hutchinson-log")
    seed = orbits.cosine_seed(1e-2, 4.0, math.pi / 2)
    orbit = orbits.solve_orbit(model, target_amplitude=1e-2, guess=seed)
    for a in np.linspace(0.1, 1.05, 12):
        orbit = orbits.solve_orbit(model, target_amplitude=float(a), guess=orbit)
    return orbits.solve_orbit(model, target_delay=2.0, guess=orbit)


@pytest.fixture(scope="module")
def enharmonic_disc(enharmonic_orbit):
    return monodromy(enharmonic_orbit, 64)


def test_trivial_multiplier(enharmonic_disc):
    rep = floquet_report(enharmonic_disc)
    assert rep.trivial_error < 1e-8


def test_multiplier_refinement_consistency(enharmonic_orbit, enharmonic_disc):
    rep64 = floquet_report(enharmonic_disc)
    rep128 = floquet_report(monodromy(enharmonic_orbit, 128))
    top64 = np.sort_complex(rep64.multipliers[:5])
    top128 = np.sort_complex(rep128.multipliers[:5])
    assert np.max(np.abs(top64 - top128)) < 1e-6


def test_multipliers_accumulate_to_zero(enharmonic_disc):
    moduli = np.abs(floquet_report(enharmonic_disc).multipliers)
    assert moduli[-1] < 1e-6
    assert np.all(np.diff(moduli) <= 1e-12)


def test_hutchinson_attracting_spectrum(hutchinson_orbit):
    rep = floquet_report(monodromy(hutchinson_orbit, 64))
    assert rep.trivial_error < 1e-6
    moduli = np.abs(rep.multipliers)
    nontrivial = np.delete(moduli, int(np.argmin(np.abs(rep.multipliers - 1.0))))
    assert np.all(nontrivial < 1.0)
    assert rep.hyperbolic and rep.mu_c < 1.0
    assert rep.mu_c_zero_changes == 2


def test_trivial_eigenvector_matches_orbit_derivative(hutchinson_orbit):
    disc = monodromy(hutchinson_orbit, 64)
    evals, evecs = np.linalg.eig(disc.matrix)
    k = int(np.argmin(np.abs(evals - 1.0)))
    vec = np.real(evecs[:, k])
    vec /= np.linalg.norm(vec)
    xdot = hutchinson_orbit.xdot(disc.mesh)
    xdot /= np.linalg.norm(xdot)
    assert abs(float(np.dot(vec, xdot))) > 1.0 - 1e-6


def test_nonhyperbolic_at_critical_delay_value():
    # omega with an interior critical point gives r'(a) = 0 at a = 1
    model = models.builtin("enharmonic", omega="1 + (s - 1)^2")
    orbit = orbits.solve_orbit(model, target_amplitude=1.0, guess=orbits.cosine_seed(1.0, 4.0, math.pi / 2))
    rep = floquet_report(monodromy(orbit, 64))
    assert abs(rep.mu_c - 1.0) < 1e-3


def test_adjoint_zero_data(enharmonic_orbit):
    adj = adjoint_integrate(enharmonic_orbit, np.zeros(65), t_back=-3.0)
    for t in np.linspace(-3.0, 1.0, 7):
        assert adj.value(t) == 0.0


def test_adjoint_closed_form(enharmonic_orbit):
    # A = 0, B = -r: the adjoint reduces to w'(t) = r w(t+1), solved by
    # cos(pi t / 2) when r = pi / 2
    p = enharmonic_orbit.period
    theta = np.linspace(0, 1, 129)
    adj = adjoint_integrate(enharmonic_orbit, np.cos(math.pi * theta / 2), t_back=-(p + 1.0))
    ts = np.linspace(-p, 1.0, 23)
    err = max(abs(adj.value(t) - math.cos(math.pi * t / 2)) for t in ts)
    assert err < 1e-8


def test_adjoint_residual_random_data(enharmonic_orbit):
    rng = np.random.default_rng(9)
    data = rng.uniform(-1, 1, 9)
    theta = np.linspace(0, 1, 513)
    smooth = sum(c * np.cos((k + 1) * math.pi * theta) for k, c in enumerate(data[:3]))
    adj = adjoint_integrate(enharmonic_orbit, smooth, t_back=-2.0, m=1024)
    assert adj.residual() < 1e-8


def test_bilinear_zero(enharmonic_orbit):
    val = bilinear_form(enharmonic_orbit, lambda th: 1.0, lambda th: 0.0, 0.3)
    assert val == 0.0


def test_bilinear_constant_along_adjoint_pair(enharmonic_orbit):
    p = enharmonic_orbit.period
    yT = lambda t: math.cos(math.pi * t / 2)
    vals = [
        bilinear_form(enharmonic_orbit, lambda th: yT(t + th), lambda th: yT(t + th), t)
        for t in (0.0, 0.5, 1.7, p)
    ]
    assert max(vals) - min(vals) < 1e-10 * max(abs(v) for v in vals)


def test_forced_identity(enharmonic_orbit):
    p = enharmonic_orbit.period
    theta = np.linspace(0, 1, 129)
    adj = adjoint_integrate(
        enharmonic_orbit, np.cos(2 * math.pi * theta) + 0.3, t_back=-1e-9, terminal_offset=p, m=4096
    )
    forced = variational_forcing_solution(enharmonic_orbit, m=4096)

    t_check = p
    lhs = bilinear_form(
        enharmonic_orbit,
        lambda th: adj.value(t_check + th),
        lambda th: float(forced.value(t_check + th)[0]),
        t_check,
    ) - bilinear_form(
        enharmonic_orbit,
        lambda th: adj.value(th),
        lambda th: float(forced.value(th)[0]),
        0.0,
    )
    nodes, weights = np.polynomial.legendre.leggauss(96)
    pieces = sorted({0.0, t_check} | {p - k for k in range(5) if 0 < p - k < t_check})
    rhs = 0.0
    for lo, hi in zip(pieces, pieces[1:]):
        s = lo + 0.5 * (hi - lo) * (nodes + 1.0)
        w = 0.5 * (hi - lo) * weights
        vals = np.array([adj.value(ss) * float(enharmonic_orbit.xdot(ss)) / enharmonic_orbit.delay for ss in s])
        rhs += float(np.dot(w, vals))
    assert abs(lhs - rhs) < 1e-7 * max(abs(lhs), abs(rhs), 1.0)


def test_linear_integrator_matches_nonlinear_variational(enharmonic_orbit):
    # the orbit derivative solves the linearized equation with multiplier 1
    A_fn, B_fn = linear_coefficients(enharmonic_orbit)
    p = enharmonic_orbit.period
    mesh = np.linspace(-1.0, 0.0, 129)
    y0 = enharmonic_orbit.xdot(mesh)
    d0 = enharmonic_orbit.xddot(mesh)
    traj = integrate_linear(A_fn, B_fn, mesh, y0[:, None], d0[:, None], p)
    end = np.array([float(traj.value(p + th)[0]) for th in mesh])
    assert np.max(np.abs(end - y0)) < 1e-7
