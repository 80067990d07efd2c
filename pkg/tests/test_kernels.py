"""Backend equivalence: the compiled kernel must match the reference twin."""

import math

import numpy as np
import pytest

from ddebranch import models
from ddebranch._kernels import reference

try:
    from ddebranch._kernels import _speedups
except ImportError:
    _speedups = None

needs_compiled = pytest.mark.skipif(_speedups is None, reason="compiled kernel unavailable")


def _run(impl, model, r, hist_vals, hist_derivs, n_steps, m):
    ops, iargs, consts = model.kernel_args()
    y = np.zeros(m + n_steps + 1)
    d = np.zeros(m + n_steps + 1)
    y[: m + 1] = hist_vals
    d[: m + 1] = hist_derivs
    status, last, viol = impl.simulate_scalar(
        ops, iargs, consts, r, y, d, m, n_steps, 1e6, -10.0, 10.0, -10.0, 10.0
    )
    return status, y, d


@needs_compiled
def test_eval_scalar_bitwise_equal():
    rng = np.random.default_rng(0)
    for name in ("hutchinson-log", "enharmonic", "qrt-doublewell"):
        model = models.builtin(name)
        ops, iargs, consts = model.kernel_args()
        pts = rng.uniform(-2.0, 2.0, size=(300, 2))
        for u, v in pts:
            a = reference.eval_scalar(ops, iargs, consts, u, v)
            b = _speedups.eval_scalar(ops, iargs, consts, u, v)
            assert a == b


@needs_compiled
def test_trajectory_bitwise_equal():
    model = models.builtin("hutchinson-log")
    m = 64
    theta = np.linspace(-1, 0, m + 1)
    hv = 0.1 + 0.05 * np.sin(3 * theta)
    hd = 0.15 * np.cos(3 * theta)
    s1, y1, d1 = _run(reference, model, 1.8, hv, hd, 40 * m, m)
    s2, y2, d2 = _run(_speedups, model, 1.8, hv, hd, 40 * m, m)
    assert s1 == s2 == 0
    assert np.array_equal(y1, y2)
    assert np.array_equal(d1, d2)


def test_blowup_status():
    model = models.parse_model("u", domain=((-1e7, 1e7), (-1e7, 1e7)))  # x' = r x blows up
    m = 32
    s, y, d = _run(reference, model, 5.0, np.ones(m + 1), np.zeros(m + 1), 40 * m, m)
    assert s == reference.BLOWUP


def test_domain_guard_status():
    model = models.parse_model("sqrt(u)", domain=((0.01, 10.0), (0.01, 10.0)))
    m = 32
    hv = np.full(m + 1, 0.5)
    # x' = -5 sqrt(x) reaches zero in finite time and crosses it
    s, y, d = _run(reference, model, -5.0, hv, np.zeros(m + 1), 100 * m, m)
    assert s == reference.DOMAIN


def test_domain_violation_recorded_not_fatal():
    model = models.builtin("hutchinson-log", domain=((-0.05, 0.05), (-0.05, 0.05)))
    m = 64
    s, y, d = _run(reference, model, 2.0, np.full(m + 1, 0.01), np.zeros(m + 1), 10 * m, m)
    assert s == reference.OK  # leaving the rectangle is recorded, not fatal


@needs_compiled
def test_backend_selection_env(monkeypatch):
    import importlib

    import ddebranch._kernels as K

    monkeypatch.setenv("DDEBRANCH_DISABLE_SPEEDUPS", "1")
    reloaded = importlib.reload(K)
    assert reloaded.backend_name() == "python"
    monkeypatch.delenv("DDEBRANCH_DISABLE_SPEEDUPS")
    reloaded = importlib.reload(K)
    assert reloaded.backend_name() == "compiled"
