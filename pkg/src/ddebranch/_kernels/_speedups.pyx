# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of the reference stepping kernel.

Keeps the arithmetic order identical to ``reference.py`` so both
backends produce bitwise-equal trajectories (the build disables FMA
contraction for the same reason).
"""

from libc.math cimport exp, log, sin, cos, sqrt, pow, fabs, isfinite

cdef int OK = 0
cdef int BLOWUP = 1
cdef int DOMAIN = 2

cdef double GUARD_EPS = 1e-300
cdef int STACK_MAX = 128


cdef inline double _powi(double x, int n, int* err) nogil:
    cdef double result = 1.0
    if n < 0:
        if fabs(x) < GUARD_EPS:
            err[0] = 1
            return 0.0
        x = 1.0 / x
        n = -n
    while n:
        if n & 1:
            result = result * x
        x = x * x
        n >>= 1
    return result


cdef double _eval(const int* ops, const int* iargs, const double* consts,
                  int n_ops, double u, double v, double* stack, int* err) nogil:
    cdef int i, op, arg, top = -1
    cdef double a, b
    for i in range(n_ops):
        op = ops[i]
        arg = iargs[i]
        if op == 0:
            top += 1
            stack[top] = consts[arg]
        elif op == 1:
            top += 1
            stack[top] = u
        elif op == 2:
            top += 1
            stack[top] = v
        elif op == 3:
            b = stack[top]
            top -= 1
            stack[top] = stack[top] + b
        elif op == 4:
            b = stack[top]
            top -= 1
            stack[top] = stack[top] - b
        elif op == 5:
            b = stack[top]
            top -= 1
            stack[top] = stack[top] * b
        elif op == 6:
            b = stack[top]
            top -= 1
            if fabs(b) < GUARD_EPS:
                err[0] = 1
                return 0.0
            stack[top] = stack[top] / b
        elif op == 7:
            b = stack[top]
            top -= 1
            a = stack[top]
            if a <= 0.0:
                err[0] = 1
                return 0.0
            stack[top] = pow(a, b)
        elif op == 8:
            stack[top] = -stack[top]
        elif op == 9:
            stack[top] = exp(stack[top])
        elif op == 10:
            a = stack[top]
            if a <= 0.0:
                err[0] = 1
                return 0.0
            stack[top] = log(a)
        elif op == 11:
            stack[top] = sin(stack[top])
        elif op == 12:
            stack[top] = cos(stack[top])
        elif op == 13:
            a = stack[top]
            if a < 0.0:
                err[0] = 1
                return 0.0
            stack[top] = sqrt(a)
        elif op == 14:
            stack[top] = _powi(stack[top], arg, err)
            if err[0]:
                return 0.0
    return stack[0]


def eval_scalar(int[::1] ops, int[::1] iargs, double[::1] consts, double u, double v):
    cdef double stack[128]
    cdef int err = 0
    cdef double out = _eval(&ops[0], &iargs[0], &consts[0], ops.shape[0], u, v, stack, &err)
    if err:
        raise ArithmeticError("expression domain guard tripped")
    return out


def simulate_scalar(int[::1] ops, int[::1] iargs, double[::1] consts, double r,
                    double[::1] y, double[::1] d, int m, int n_steps, double blowup,
                    double u_lo, double u_hi, double v_lo, double v_hi):
    cdef double stack[128]
    cdef int err = 0
    cdef int viol = -1
    cdef int k
    cdef int n_ops = ops.shape[0]
    cdef const int* cops = &ops[0]
    cdef const int* cargs = &iargs[0]
    cdef const double* cconsts = &consts[0]
    cdef double h = 1.0 / m
    cdef double xk, y0, y1, d0, d1, xdh, k1, k2, k3, k4, xn

    for k in range(m, m + n_steps):
        xk = y[k]
        y0 = y[k - m]
        y1 = y[k - m + 1]
        d0 = d[k - m]
        d1 = d[k - m + 1]
        xdh = 0.5 * (y0 + y1) + 0.125 * h * (d0 - d1)

        k1 = r * _eval(cops, cargs, cconsts, n_ops, xk, y0, stack, &err)
        if err:
            return DOMAIN, k, viol
        k2 = r * _eval(cops, cargs, cconsts, n_ops, xk + 0.5 * h * k1, xdh, stack, &err)
        if err:
            return DOMAIN, k, viol
        k3 = r * _eval(cops, cargs, cconsts, n_ops, xk + 0.5 * h * k2, xdh, stack, &err)
        if err:
            return DOMAIN, k, viol
        k4 = r * _eval(cops, cargs, cconsts, n_ops, xk + h * k3, y1, stack, &err)
        if err:
            return DOMAIN, k, viol
        xn = xk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[k + 1] = xn
        d[k + 1] = r * _eval(cops, cargs, cconsts, n_ops, xn, y1, stack, &err)
        if err:
            return DOMAIN, k, viol

        if (not isfinite(xn)) or fabs(xn) > blowup:
            return BLOWUP, k + 1, viol
        if viol < 0 and not (u_lo <= xn <= u_hi and v_lo <= y1 <= v_hi):
            viol = k + 1
    return OK, m + n_steps, viol
