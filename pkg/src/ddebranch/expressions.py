"""Arithmetic expressions in two state variables with exact first partials.

Expressions are parsed into a small AST and then flattened into a stack
program (opcode/argument arrays).  The program is evaluated in two ways:

* :func:`eval_program` / :func:`eval_program_grad` run a vectorised
  numpy interpreter.  The gradient variant propagates dual numbers with
  two tangent components, so the partials with respect to ``u`` and
  ``v`` are exact for the expression (no finite differences).
* The stepping kernels (:mod:`ddebranch._kernels`) run the same program
  in a scalar value-only interpreter inside the integration loop.

Grammar: infix ``+ - * /`` with usual precedence, right-associative
power (``^`` or ``**``), unary minus, scientific-notation literals, the
functions ``exp log sin cos sqrt``, and named parameters supplied at
parse time.  Parameter values are folded into the constant table, which
keeps evaluation deterministic across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np

__all__ = [
    "ExpressionError",
    "DomainError",
    "Node",
    "Num",
    "Var",
    "Bin",
    "Neg",
    "Call",
    "Program",
    "parse",
    "substitute",
    "to_text",
    "compile_ast",
    "eval_program",
    "eval_program_grad",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")

# opcodes shared with the stepping kernels
OP_CONST = 0
OP_VAR_U = 1
OP_VAR_V = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_POW = 7
OP_NEG = 8
OP_EXP = 9
OP_LOG = 10
OP_SIN = 11
OP_COS = 12
OP_SQRT = 13
OP_POWI = 14

_FUNC_OPS = {
    "exp": OP_EXP,
    "log": OP_LOG,
    "sin": OP_SIN,
    "cos": OP_COS,
    "sqrt": OP_SQRT,
}

_GUARD_EPS = 1e-300


class ExpressionError(ValueError):
    """Parse failure; carries the character offset of the offending token."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (offset {position})")
        self.position = position


class DomainError(ArithmeticError):
    """Evaluation guard tripped (division, log, sqrt or power domain)."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Bin(Node):
    op: str  # one of + - * / ^
    left: Node
    right: Node


@dataclass(frozen=True)
class Neg(Node):
    child: Node


@dataclass(frozen=True)
class Call(Node):
    func: str
    child: Node


# ---------------------------------------------------------------------------
# Tokenizer / parser


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | lparen | rparen | end
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExpressionError(f"malformed number {text!r}", i) from None
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("name", source[i:j], i))
            i = j
            continue
        if c == "*" and i + 1 < n and source[i + 1] == "*":
            tokens.append(_Token("op", "^", i))
            i += 2
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            tokens.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            tokens.append(_Token("rparen", c, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


_BINARY_PRECEDENCE = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_PRECEDENCE = 25  # binds tighter than * but looser than ^


class _Parser:
    def __init__(self, tokens: list[_Token], variables: Tuple[str, ...], params: Dict[str, float]):
        self.tokens = tokens
        self.k = 0
        self.variables = variables
        self.params = params

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def advance(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def parse_expression(self, min_prec: int = 0) -> Node:
        left = self.parse_operand()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _BINARY_PRECEDENCE:
                return left
            prec = _BINARY_PRECEDENCE[tok.text]
            if prec < min_prec:
                return left
            self.advance()
            # power is right-associative, the rest left-associative
            next_min = prec if tok.text == "^" else prec + 1
            right = self.parse_expression(next_min)
            left = Bin(tok.text, left, right)

    def parse_operand(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.parse_expression(_UNARY_PRECEDENCE))
        if tok.kind == "op" and tok.text == "+":
            return self.parse_expression(_UNARY_PRECEDENCE)
        if tok.kind == "name":
            if tok.text in FUNCTIONS:
                opening = self.advance()
                if opening.kind != "lparen":
                    raise ExpressionError(
                        f"expected '(' after function {tok.text!r}", opening.pos
                    )
                arg = self.parse_expression()
                closing = self.advance()
                if closing.kind != "rparen":
                    raise ExpressionError("expected ')'", closing.pos)
                return Call(tok.text, arg)
            if tok.text in self.variables:
                return Var(tok.text)
            if tok.text in self.params:
                return Num(float(self.params[tok.text]))
            raise ExpressionError(f"unknown identifier {tok.text!r}", tok.pos)
        if tok.kind == "lparen":
            inner = self.parse_expression()
            closing = self.advance()
            if closing.kind != "rparen":
                raise ExpressionError("expected ')'", closing.pos)
            return inner
        raise ExpressionError(
            f"expected number, variable or '(', found {tok.text!r}"
            if tok.kind != "end"
            else "unexpected end of expression",
            tok.pos,
        )


def parse(
    source: str,
    variables: Tuple[str, ...] = ("u", "v"),
    params: Optional[Dict[str, float]] = None,
) -> Node:
    """Parse ``source`` into an AST over the given variables.

    Parameter names are replaced by their numeric values; any other
    identifier raises :class:`ExpressionError` with its offset.
    """
    if not source or not source.strip():
        raise ExpressionError("empty expression", 0)
    parser = _Parser(_tokenize(source), variables, params or {})
    tree = parser.parse_expression()
    trailing = parser.peek()
    if trailing.kind != "end":
        raise ExpressionError(f"unexpected token {trailing.text!r}", trailing.pos)
    return tree


def substitute(tree: Node, replacements: Dict[str, Node]) -> Node:
    """Replace variables by subtrees (used to graft Omega(s) into builtins)."""
    if isinstance(tree, Var):
        return replacements.get(tree.name, tree)
    if isinstance(tree, Bin):
        return Bin(tree.op, substitute(tree.left, replacements), substitute(tree.right, replacements))
    if isinstance(tree, Neg):
        return Neg(substitute(tree.child, replacements))
    if isinstance(tree, Call):
        return Call(tree.func, substitute(tree.child, replacements))
    return tree


# ---------------------------------------------------------------------------
# Pretty printer

_NODE_PRECEDENCE = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}


def _prec(node: Node) -> int:
    if isinstance(node, Bin):
        return _NODE_PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _UNARY_PRECEDENCE
    return 100


def to_text(node: Node) -> str:
    """Render an AST back to parseable text (round-trips through parse)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_text(node.child)
        if _prec(node.child) < _UNARY_PRECEDENCE or isinstance(node.child, Neg):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.child)})"
    if isinstance(node, Bin):
        lp, rp = _prec(node.left), _prec(node.right)
        prec = _NODE_PRECEDENCE[node.op]
        left = to_text(node.left)
        right = to_text(node.right)
        if lp < prec or (node.op == "^" and lp == prec):
            left = f"({left})"
        # left-assoc operators need parens on equal-precedence right children
        if rp < prec or (node.op in "-/" and rp == prec) or (node.op in "+*" and rp == prec and node.op != "^"):
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Compilation


@dataclass(frozen=True)
class Program:
    """Flattened stack program: parallel opcode/argument arrays."""

    ops: np.ndarray  # int32
    iargs: np.ndarray  # int32 (const index or integer exponent)
    consts: np.ndarray  # float64
    stack_size: int
    source: str

    def __len__(self) -> int:
        return len(self.ops)


def compile_ast(tree: Node, source: str = "") -> Program:
    ops: list[int] = []
    iargs: list[int] = []
    consts: list[float] = []

    def const_index(value: float) -> int:
        consts.append(float(value))
        return len(consts) - 1

    def emit(node: Node) -> None:
        if isinstance(node, Num):
            ops.append(OP_CONST)
            iargs.append(const_index(node.value))
        elif isinstance(node, Var):
            if node.name == "u":
                ops.append(OP_VAR_U)
            elif node.name == "v":
                ops.append(OP_VAR_V)
            else:
                raise ExpressionError(f"unbound variable {node.name!r}", 0)
            iargs.append(0)
        elif isinstance(node, Neg):
            emit(node.child)
            ops.append(OP_NEG)
            iargs.append(0)
        elif isinstance(node, Call):
            emit(node.child)
            ops.append(_FUNC_OPS[node.func])
            iargs.append(0)
        elif isinstance(node, Bin):
            if node.op == "^" and _integer_exponent(node.right) is not None:
                emit(node.left)
                ops.append(OP_POWI)
                iargs.append(_integer_exponent(node.right))
                return
            emit(node.left)
            emit(node.right)
            ops.append({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}[node.op])
            iargs.append(0)
        else:
            raise TypeError(f"unknown node {node!r}")

    emit(tree)

    depth = 0
    peak = 0
    for op in ops:
        if op in (OP_CONST, OP_VAR_U, OP_VAR_V):
            depth += 1
        elif op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW):
            depth -= 1
        peak = max(peak, depth)

    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        iargs=np.asarray(iargs, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        stack_size=max(peak, 1),
        source=source,
    )


def _integer_exponent(node: Node) -> Optional[int]:
    if isinstance(node, Num) and float(node.value).is_integer() and abs(node.value) <= 64:
        return int(node.value)
    if isinstance(node, Neg):
        inner = _integer_exponent(node.child)
        return None if inner is None else -inner
    return None


# ---------------------------------------------------------------------------
# Vectorised interpreter

ArrayLike = Union[float, np.ndarray]


def eval_program(prog: Program, u: ArrayLike, v: ArrayLike) -> np.ndarray:
    """Evaluate values only (vectorised over broadcast u, v)."""
    return eval_program_grad(prog, u, v)[0]


def eval_program_grad(
    prog: Program, u: ArrayLike, v: ArrayLike
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate ``(f, d1f, d2f)`` by forward-mode dual propagation.

    ``u`` and ``v`` broadcast; the outputs share the broadcast shape.
    Raises :class:`DomainError` when a guard (division by zero, log or
    sqrt of a nonpositive value, nonpositive power base) trips anywhere
    in the batch.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    v_arr = np.asarray(v, dtype=np.float64)
    shape = np.broadcast_shapes(u_arr.shape, v_arr.shape)
    u_b = np.broadcast_to(u_arr, shape)
    v_b = np.broadcast_to(v_arr, shape)

    vals: list[np.ndarray] = []
    dus: list[np.ndarray] = []
    dvs: list[np.ndarray] = []
    zeros = np.zeros(shape)
    ones = np.ones(shape)

    for op, arg in zip(prog.ops, prog.iargs):
        if op == OP_CONST:
            vals.append(np.full(shape, prog.consts[arg]))
            dus.append(zeros)
            dvs.append(zeros)
        elif op == OP_VAR_U:
            vals.append(u_b.astype(np.float64, copy=True))
            dus.append(ones)
            dvs.append(zeros)
        elif op == OP_VAR_V:
            vals.append(v_b.astype(np.float64, copy=True))
            dus.append(zeros)
            dvs.append(ones)
        elif op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW):
            bv, bdu, bdv = vals.pop(), dus.pop(), dvs.pop()
            av, adu, adv = vals.pop(), dus.pop(), dvs.pop()
            if op == OP_ADD:
                vals.append(av + bv)
                dus.append(adu + bdu)
                dvs.append(adv + bdv)
            elif op == OP_SUB:
                vals.append(av - bv)
                dus.append(adu - bdu)
                dvs.append(adv - bdv)
            elif op == OP_MUL:
                vals.append(av * bv)
                dus.append(adu * bv + av * bdu)
                dvs.append(adv * bv + av * bdv)
            elif op == OP_DIV:
                if np.any(np.abs(bv) < _GUARD_EPS):
                    raise DomainError("division by zero")
                inv = 1.0 / bv
                q = av * inv
                vals.append(q)
                dus.append((adu - q * bdu) * inv)
                dvs.append((adv - q * bdv) * inv)
            else:  # general power, requires positive base
                if np.any(av <= 0.0):
                    raise DomainError("power with nonpositive base")
                y = np.power(av, bv)
                logs = np.log(av)
                vals.append(y)
                dus.append(y * (bdu * logs + bv * adu / av))
                dvs.append(y * (bdv * logs + bv * adv / av))
        elif op == OP_POWI:
            av, adu, adv = vals.pop(), dus.pop(), dvs.pop()
            n = int(arg)
            if n < 0 and np.any(np.abs(av) < _GUARD_EPS):
                raise DomainError("negative power of zero")
            if n == 0:
                vals.append(np.ones(shape))
                dus.append(zeros)
                dvs.append(zeros)
            else:
                y = np.power(av, n)
                slope = n * np.power(av, n - 1)
                vals.append(y)
                dus.append(slope * adu)
                dvs.append(slope * adv)
        elif op == OP_NEG:
            vals[-1] = -vals[-1]
            dus[-1] = -dus[-1]
            dvs[-1] = -dvs[-1]
        elif op == OP_EXP:
            av, adu, adv = vals.pop(), dus.pop(), dvs.pop()
            y = np.exp(av)
            vals.append(y)
            dus.append(y * adu)
            dvs.append(y * adv)
        elif op == OP_LOG:
            av, adu, adv = vals.pop(), dus.pop(), dvs.pop()
            if np.any(av <= 0.0):
                raise DomainError("log of nonpositive value")
            vals.append(np.log(av))
            dus.append(adu / av)
            dvs.append(adv / av)
        elif op == OP_SIN:
            av, adu, adv = vals.pop(), dus.pop(), dvs.pop()
            c = np.cos(av)
            vals.append(np.sin(av))
            dus.append(c * adu)
            dvs.append(c * adv)
        elif op == OP_COS:
            av, adu, adv = vals.pop(), dus.pop(), dvs.pop()
            s = np.sin(av)
            vals.append(np.cos(av))
            dus.append(-s * adu)
            dvs.append(-s * adv)
        elif op == OP_SQRT:
            av, adu, adv = vals.pop(), dus.pop(), dvs.pop()
            if np.any(av < 0.0):
                raise DomainError("sqrt of negative value")
            y = np.sqrt(av)
            safe = np.where(y > _GUARD_EPS, y, 1.0)
            if np.any(y <= _GUARD_EPS) and (np.any(adu != 0) or np.any(adv != 0)):
                raise DomainError("sqrt derivative at zero")
            vals.append(y)
            dus.append(0.5 * adu / safe)
            dvs.append(0.5 * adv / safe)
        else:  # pragma: no cover - compile emits known opcodes only
            raise ValueError(f"bad opcode {op}")

    return vals[0], dus[0], dvs[0]


def free_variables(tree: Node) -> set:
    """Names of variables appearing in the tree."""
    if isinstance(tree, Var):
        return {tree.name}
    if isinstance(tree, Bin):
        return free_variables(tree.left) | free_variables(tree.right)
    if isinstance(tree, (Neg, Call)):
        return free_variables(tree.child)
    return set()
