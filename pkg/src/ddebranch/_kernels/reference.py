"""Pure-Python stepping kernel (twin of the compiled extension).

Implements the scalar expression interpreter and the fixed-step RK4
method-of-steps loop with cubic Hermite dense output.  The compiled
Cython version in ``_speedups.pyx`` mirrors this file operation for
operation (same arithmetic order, same guards) so both produce
identical trajectories; a test asserts bitwise agreement.

Status codes returned by :func:`simulate_scalar`:

* 0  completed
* 1  blow-up guard tripped (|x| above bound or nonfinite)
* 2  expression domain guard tripped
"""

from __future__ import annotations

import math

OK = 0
BLOWUP = 1
DOMAIN = 2

_GUARD_EPS = 1e-300


def _powi(x: float, n: int) -> float:
    if n < 0:
        if abs(x) < _GUARD_EPS:
            raise ZeroDivisionError
        x = 1.0 / x
        n = -n
    result = 1.0
    while n:
        if n & 1:
            result *= x
        x *= x
        n >>= 1
    return result


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def eval_scalar(ops, iargs, consts, u: float, v: float) -> float:
    """Value-only evaluation of a compiled expression program.

    Raises ArithmeticError when a domain guard trips.
    """
    stack = []
    push = stack.append
    for op, arg in zip(ops, iargs):
        if op == 0:  # CONST
            push(consts[arg])
        elif op == 1:  # U
            push(u)
        elif op == 2:  # V
            push(v)
        elif op == 3:
            b = stack.pop()
            stack[-1] = stack[-1] + b
        elif op == 4:
            b = stack.pop()
            stack[-1] = stack[-1] - b
        elif op == 5:
            b = stack.pop()
            stack[-1] = stack[-1] * b
        elif op == 6:
            b = stack.pop()
            if abs(b) < _GUARD_EPS:
                raise ArithmeticError("division by zero")
            stack[-1] = stack[-1] / b
        elif op == 7:
            b = stack.pop()
            a = stack[-1]
            if a <= 0.0:
                raise ArithmeticError("power with nonpositive base")
            try:
                stack[-1] = math.pow(a, b)
            except OverflowError:
                stack[-1] = math.inf
        elif op == 8:
            stack[-1] = -stack[-1]
        elif op == 9:
            stack[-1] = _exp(stack[-1])
        elif op == 10:
            a = stack[-1]
            if a <= 0.0:
                raise ArithmeticError("log of nonpositive value")
            stack[-1] = math.log(a)
        elif op == 11:
            stack[-1] = math.sin(stack[-1])
        elif op == 12:
            stack[-1] = math.cos(stack[-1])
        elif op == 13:
            a = stack[-1]
            if a < 0.0:
                raise ArithmeticError("sqrt of negative value")
            stack[-1] = math.sqrt(a)
        elif op == 14:
            try:
                stack[-1] = _powi(stack[-1], int(arg))
            except ZeroDivisionError:
                raise ArithmeticError("negative power of zero") from None
        else:  # pragma: no cover
            raise ValueError(f"bad opcode {op}")
    return stack[0]


def simulate_scalar(ops, iargs, consts, r, y, d, m, n_steps, blowup, u_lo, u_hi, v_lo, v_hi):
    """March the DDE x'(t) = r f(x(t), x(t-1)) over ``n_steps`` nodes.

    ``y`` and ``d`` are preallocated float64 arrays of length at least
    ``m + n_steps + 1`` whose first ``m + 1`` entries hold the history
    values and derivatives on a uniform mesh with spacing ``1/m``.
    Delayed mid-step values come from cubic Hermite interpolation of
    already-computed nodes.

    Returns ``(status, last_node, first_domain_violation)`` where the
    violation index is -1 when the certified rectangle was never left.
    """
    ops = list(ops)
    iargs = list(iargs)
    consts = list(consts)
    h = 1.0 / m
    viol = -1

    def f(uu, vv):
        return eval_scalar(ops, iargs, consts, uu, vv)

    k = m
    try:
        for k in range(m, m + n_steps):
            xk = y[k]
            y0 = y[k - m]
            y1 = y[k - m + 1]
            d0 = d[k - m]
            d1 = d[k - m + 1]
            xdh = 0.5 * (y0 + y1) + 0.125 * h * (d0 - d1)

            k1 = r * f(xk, y0)
            k2 = r * f(xk + 0.5 * h * k1, xdh)
            k3 = r * f(xk + 0.5 * h * k2, xdh)
            k4 = r * f(xk + h * k3, y1)
            xn = xk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            y[k + 1] = xn
            d[k + 1] = r * f(xn, y1)

            if not math.isfinite(xn) or abs(xn) > blowup:
                return BLOWUP, k + 1, viol
            if viol < 0 and not (u_lo <= xn <= u_hi and v_lo <= y1 <= v_hi):
                viol = k + 1
    except ArithmeticError:
        return DOMAIN, k, viol
    return OK, m + n_steps, viol
