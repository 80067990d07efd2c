import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddebranch import expressions as ex


def compile_text(text, **kw):
    return ex.compile_ast(ex.parse(text, **kw), source=text)


def test_basic_values():
    prog = compile_text("1 - exp(v)")
    assert ex.eval_program(prog, 0.0, 0.0) == 0.0
    f, du, dv = ex.eval_program_grad(prog, 0.0, 0.0)
    assert du == 0.0
    assert dv == -1.0


def test_power_right_associative():
    prog = compile_text("2^3^2")
    assert ex.eval_program(prog, 0.0, 0.0) == 512.0


def test_double_star_power():
    prog = compile_text("u**2 + v**2")
    assert ex.eval_program(prog, 3.0, 4.0) == 25.0


def test_scientific_literals():
    prog = compile_text("1.5e-3 + 2E2")
    assert ex.eval_program(prog, 0, 0) == pytest.approx(200.0015)


def test_unary_minus_precedence():
    # unary minus binds looser than power: -u^2 == -(u^2)
    prog = compile_text("-u^2")
    assert ex.eval_program(prog, 3.0, 0.0) == -9.0


def test_parameters_fold():
    prog = compile_text("k*u + c", params={"k": 2.5, "c": -1.0})
    assert ex.eval_program(prog, 2.0, 0.0) == 4.0


def test_syntax_error_offset():
    with pytest.raises(ex.ExpressionError) as err:
        ex.parse("1+*v")
    assert err.value.position == 2
    with pytest.raises(ex.ExpressionError):
        ex.parse("1 +* v")


def test_unknown_identifier():
    with pytest.raises(ex.ExpressionError, match="unknown identifier"):
        ex.parse("u + w")


def test_empty_expression():
    with pytest.raises(ex.ExpressionError, match="empty"):
        ex.parse("   ")


def test_division_guard():
    prog = compile_text("1/(u - 1)")
    with pytest.raises(ex.DomainError):
        ex.eval_program(prog, 1.0, 0.0)


def test_log_sqrt_guards():
    with pytest.raises(ex.DomainError):
        ex.eval_program(compile_text("log(u)"), -1.0, 0.0)
    with pytest.raises(ex.DomainError):
        ex.eval_program(compile_text("sqrt(u)"), -1.0, 0.0)


def test_vectorized_broadcast():
    prog = compile_text("u*v")
    u = np.linspace(0, 1, 5)[None, :]
    v = np.linspace(-1, 1, 3)[:, None]
    f, du, dv = ex.eval_program_grad(prog, u, v)
    assert f.shape == (3, 5)
    assert np.allclose(du, np.broadcast_to(v, (3, 5)))


def _random_tree(rng, depth=0):
    choice = rng.integers(0, 8 if depth < 4 else 3)
    if choice == 0:
        return ex.Num(float(np.round(rng.uniform(-3, 3), 3)))
    if choice == 1:
        return ex.Var("u")
    if choice == 2:
        return ex.Var("v")
    if choice == 3:
        return ex.Neg(_random_tree(rng, depth + 1))
    if choice == 4:
        return ex.Call(("exp", "sin", "cos")[rng.integers(0, 3)], _random_tree(rng, depth + 1))
    op = "+-*"[rng.integers(0, 3)]
    return ex.Bin(op, _random_tree(rng, depth + 1), _random_tree(rng, depth + 1))


def test_pretty_print_round_trip():
    rng = np.random.default_rng(42)
    pts = rng.uniform(-2.0, 2.0, size=(100, 2))
    for _ in range(60):
        tree = _random_tree(rng)
        text = ex.to_text(tree)
        reparsed = ex.parse(text)
        p1 = ex.compile_ast(tree)
        p2 = ex.compile_ast(reparsed)
        v1 = ex.eval_program(p1, pts[:, 0], pts[:, 1])
        v2 = ex.eval_program(p2, pts[:, 0], pts[:, 1])
        assert np.array_equal(v1, v2), text


@given(
    st.floats(-3, 3, allow_nan=False),
    st.floats(-3, 3, allow_nan=False),
)
@settings(max_examples=60, deadline=None)
def test_dual_partials_match_central_differences(u, v):
    prog = compile_text("u*v + sin(u) - exp(v)*cos(u*v)")
    f, du, dv = ex.eval_program_grad(prog, u, v)
    h = 1e-6
    du_fd = (ex.eval_program(prog, u + h, v) - ex.eval_program(prog, u - h, v)) / (2 * h)
    dv_fd = (ex.eval_program(prog, u, v + h) - ex.eval_program(prog, u, v - h)) / (2 * h)
    scale = max(1.0, abs(du), abs(dv))
    assert abs(du - du_fd) <= 2e-6 * scale
    assert abs(dv - dv_fd) <= 2e-6 * scale


def test_substitute_grafts_subtree():
    omega = ex.parse("1 + s", variables=("s",))
    grafted = ex.substitute(omega, {"s": ex.parse("u^2 + v^2")})
    prog = ex.compile_ast(grafted)
    assert ex.eval_program(prog, 1.0, 2.0) == 6.0
