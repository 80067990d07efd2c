"""Model definitions f(u, v) for the delayed-feedback equation.

A model packages the nonlinearity, its exact first partials (via the
expression engine's forward-mode evaluation), the rectangle on which
the feedback sign was certified, and optional companion expressions
(e.g. the Hamiltonian of the double-well model) used by verification
code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import expressions as ex

__all__ = [
    "ModelDefinition",
    "CertificationReport",
    "CertificationError",
    "parse_model",
    "eval_with_grad",
    "certify_feedback",
    "builtin",
    "builtin_names",
]

Rect = Tuple[Tuple[float, float], Tuple[float, float]]

DEFAULT_DOMAIN: Rect = ((-3.0, 3.0), (-3.0, 3.0))
CERT_GRID = 256
CERT_TOL = 1e-10


class CertificationError(ValueError):
    """Feedback-sign certification failed on the requested rectangle."""


@dataclass(frozen=True)
class ModelDefinition:
    """A nonlinearity f(u, v) with exact partials and certified domain.

    ``feedback_sign`` is the intended sign of r * d2f under the r > 0
    convention, i.e. the uniform sign of d2f on the certified domain.
    """

    name: str
    f_text: str
    tree: ex.Node
    program: ex.Program
    domain: Rect
    feedback_sign: int
    params: Dict[str, float] = field(default_factory=dict)
    companions: Dict[str, ex.Program] = field(default_factory=dict)

    def f(self, u, v):
        return ex.eval_program(self.program, u, v)

    def with_grad(self, u, v):
        return ex.eval_program_grad(self.program, u, v)

    def d2f(self, u, v):
        return ex.eval_program_grad(self.program, u, v)[2]

    def companion(self, key: str, u, v):
        return ex.eval_program(self.companions[key], u, v)

    def in_domain(self, u, v) -> np.ndarray:
        (u0, u1), (v0, v1) = self.domain
        return (np.asarray(u) >= u0) & (np.asarray(u) <= u1) & (np.asarray(v) >= v0) & (np.asarray(v) <= v1)

    def kernel_args(self):
        """Program arrays in the layout the stepping kernels expect."""
        p = self.program
        return p.ops, p.iargs, p.consts


@dataclass(frozen=True)
class CertificationReport:
    certified: bool
    sign: int
    min_abs_d2: float
    argmin: Tuple[float, float]
    grid: Tuple[int, int]
    tol: float
    offending_cells: Tuple[Tuple[float, float], ...] = ()

    def require(self) -> "CertificationReport":
        if not self.certified:
            cells = ", ".join(f"({u:.4g}, {v:.4g})" for u, v in self.offending_cells[:8])
            raise CertificationError(
                f"d2f is not sign-definite (min |d2f| = {self.min_abs_d2:.3g}; cells: {cells})"
            )
        return self


def _infer_sign(program: ex.Program, domain: Rect) -> int:
    (u0, u1), (v0, v1) = domain
    uu = np.linspace(u0, u1, 7)
    vv = np.linspace(v0, v1, 7)
    _, _, d2 = ex.eval_program_grad(program, uu[None, :], vv[:, None])
    pos = np.count_nonzero(d2 > 0)
    neg = np.count_nonzero(d2 < 0)
    return 1 if pos >= neg else -1


def parse_model(
    source: str,
    params: Optional[Dict[str, float]] = None,
    *,
    name: str = "expr",
    domain: Rect = DEFAULT_DOMAIN,
    feedback_sign: Optional[int] = None,
    companions: Optional[Dict[str, ex.Program]] = None,
) -> ModelDefinition:
    """Parse an expression in u, v (and declared parameters) into a model.

    The partials are produced by forward-mode evaluation of the parsed
    tree; parameter values are folded in at compile time so repeated
    runs are deterministic.
    """
    tree = ex.parse(source, variables=("u", "v"), params=params or {})
    text = ex.to_text(tree)
    program = ex.compile_ast(tree, source=text)
    sign = feedback_sign if feedback_sign is not None else _infer_sign(program, domain)
    return ModelDefinition(
        name=name,
        f_text=text,
        tree=tree,
        program=program,
        domain=domain,
        feedback_sign=sign,
        params=dict(params or {}),
        companions=dict(companions or {}),
    )


def eval_with_grad(model: ModelDefinition, u, v, *, check_domain: bool = True):
    """Return (f, d1f, d2f) at (u, v); partials are exact for the expression."""
    if check_domain and not np.all(model.in_domain(u, v)):
        raise ex.DomainError(
            f"evaluation point outside certified domain {model.domain}"
        )
    return model.with_grad(u, v)


def certify_feedback(
    model: ModelDefinition,
    grid: Tuple[int, int] = (CERT_GRID, CERT_GRID),
    tol: float = CERT_TOL,
) -> CertificationReport:
    """Sampled sign-definiteness check of d2f over the model rectangle.

    The model is certified iff min |d2f| on the grid exceeds ``tol`` and
    the sign is uniform; otherwise the offending grid cells are listed.
    """
    (u0, u1), (v0, v1) = model.domain
    nu, nv = grid
    uu = np.linspace(u0, u1, nu)
    vv = np.linspace(v0, v1, nv)
    _, _, d2 = ex.eval_program_grad(model.program, uu[None, :], vv[:, None])

    abs_d2 = np.abs(d2)
    k = int(np.argmin(abs_d2))
    iv, iu = np.unravel_index(k, abs_d2.shape)
    min_abs = float(abs_d2[iv, iu])
    sign_grid = np.sign(d2)
    majority = 1 if np.count_nonzero(sign_grid > 0) >= np.count_nonzero(sign_grid < 0) else -1
    bad = (sign_grid != majority) | (abs_d2 <= tol)
    certified = not bool(np.any(bad))

    offending: list[Tuple[float, float]] = []
    if not certified:
        jv, ju = np.nonzero(bad)
        for a, b in zip(jv[:64], ju[:64]):
            offending.append((float(uu[b]), float(vv[a])))

    return CertificationReport(
        certified=certified,
        sign=majority,
        min_abs_d2=min_abs,
        argmin=(float(uu[iu]), float(vv[iv])),
        grid=grid,
        tol=tol,
        offending_cells=tuple(offending),
    )


# ---------------------------------------------------------------------------
# Builtins

_QRT_F = "-(2*u^2*v + u^2 + 2*u*v + v)"
_QRT_H = "u^2*v^2 + u^2*v + u*v^2 + (u^2 + v^2)/2"
_QRT_G = "2*u*v^2 + 2*u*v + v^2 + u"


def builtin(name: str, *, omega: str = "1", domain: Optional[Rect] = None) -> ModelDefinition:
    """Construct a shipped model by name.

    ``hutchinson-log``   f = 1 - exp(v)          (log coordinates)
    ``hutchinson-raw``   f = u*(1 - v)           (population coordinates)
    ``enharmonic``       f = -Omega(u^2+v^2)*v   (omega given in the variable s)
    ``qrt-doublewell``   f = -dH/dv for the biquadric double-well H
    """
    if name == "hutchinson-log":
        return parse_model(
            "1 - exp(v)",
            name=name,
            domain=domain or ((-7.0, 3.0), (-7.0, 3.0)),
        )
    if name == "hutchinson-raw":
        return parse_model(
            "u*(1 - v)",
            name=name,
            domain=domain or ((0.05, 12.0), (0.05, 12.0)),
        )
    if name == "enharmonic":
        omega_tree = ex.parse(omega, variables=("s",))
        radius2 = ex.parse("u^2 + v^2")
        omega_sub = ex.substitute(omega_tree, {"s": radius2})
        f_tree = ex.Neg(ex.Bin("*", omega_sub, ex.Var("v")))
        g_tree = ex.Bin("*", omega_sub, ex.Var("u"))
        omega_of_u = ex.substitute(omega_tree, {"s": ex.Var("u")})
        dom = domain or ((-4.0, 4.0), (-4.0, 4.0))
        text = ex.to_text(f_tree)
        program = ex.compile_ast(f_tree, source=text)
        return ModelDefinition(
            name=name,
            f_text=text,
            tree=f_tree,
            program=program,
            domain=dom,
            feedback_sign=-1,
            params={},
            companions={
                "g_analytic": ex.compile_ast(g_tree, source=ex.to_text(g_tree)),
                "omega_of_u": ex.compile_ast(omega_of_u, source=ex.to_text(omega_of_u)),
            },
        )
    if name == "qrt-doublewell":
        return parse_model(
            _QRT_F,
            name=name,
            domain=domain or ((-4.0, 4.0), (-4.0, 4.0)),
            companions={
                "hamiltonian": ex.compile_ast(ex.parse(_QRT_H), source=_QRT_H),
                "g_analytic": ex.compile_ast(ex.parse(_QRT_G), source=_QRT_G),
            },
        )
    raise ValueError(f"unknown builtin model {name!r}")


def builtin_names() -> Tuple[str, ...]:
    return ("hutchinson-log", "hutchinson-raw", "enharmonic", "qrt-doublewell")
