"""Factor-graph decomposition of dynamics expressions.

An infix expression over named variables is parsed and lowered into an
ordered list of factors: the inputs come first, and every later factor is a
binary arithmetic operation, an intrinsic univariate function, or an affine
combination ``p*z + q`` of a single earlier factor (constants fold into the
affine form, which keeps both the factor count and the relaxation row count
small).  Outputs select factors by index.

Evaluation is a forward sweep over the factors: over reals, over intervals
(the natural interval extension), and in forward mode for interval
Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DivisionByZeroInterval,
    DomainError,
    ExpressionSyntaxError,
    NonIntegerExponent,
    UnknownIdentifier,
)
from .intervals import (
    Interval,
    IntervalMatrix,
    IntervalVector,
    iv_add,
    iv_div,
    iv_exp,
    iv_log,
    iv_mul,
    iv_pow_int,
    iv_sub,
)

_FUNCTIONS = ("exp", "log")


@dataclass(frozen=True)
class FactorNode:
    """One factor; unused fields keep their defaults.

    kinds: input, const(value), add/sub/mul/div(a, b), exp/log(a),
    pow(a, power), affine(a, p, q) meaning p*z_a + q.
    """

    kind: str
    a: int = -1
    b: int = -1
    value: float = 0.0
    power: int = 0
    p: float = 1.0
    q: float = 0.0


@dataclass(frozen=True)
class FactorGraph:
    n_inputs: int
    nodes: tuple[FactorNode, ...]
    outputs: tuple[int, ...]
    var_names: tuple[str, ...]

    @property
    def n_factors(self) -> int:
        return len(self.nodes)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def output_selector(self) -> np.ndarray:
        """Row-selector matrix mapping the factor vector to the outputs."""
        E = np.zeros((len(self.outputs), self.n_factors))
        for i, j in enumerate(self.outputs):
            E[i, j] = 1.0
        return E

    def validate(self) -> None:
        for j, node in enumerate(self.nodes):
            if j < self.n_inputs:
                if node.kind != "input":
                    raise ValueError(f"factor {j} must be an input")
                continue
            if node.kind == "input":
                raise ValueError(f"input node at non-input position {j}")
            if node.kind != "const":
                if not 0 <= node.a < j:
                    raise ValueError(f"factor {j} references {node.a}")
                if node.kind in ("add", "sub", "mul", "div") and not 0 <= node.b < j:
                    raise ValueError(f"factor {j} references {node.b}")
        for j in self.outputs:
            if not 0 <= j < self.n_factors:
                raise ValueError(f"output index {j} out of range")


# --- tokenizer --------------------------------------------------------------


def _tokenize(text: str):
    tokens = []  # (kind, value, position)
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            try:
                value = float(text[i:j])
            except ValueError:
                raise ExpressionSyntaxError(f"bad number literal {text[i:j]!r}", i)
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", None, n))
    return tokens


# --- recursive-descent parser to an AST of plain tuples --------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise ExpressionSyntaxError(f"expected {kind!r}, found {tok[0]!r}", tok[2])
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionSyntaxError(f"unexpected trailing {tok[0]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek()[0] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            pos = self.take()[2]
            exponent = self.unary()  # right-associative, unary minus allowed
            return ("pow", base, exponent, pos)
        return base

    def atom(self):
        tok = self.take()
        kind, value, pos = tok
        if kind == "num":
            return ("num", value)
        if kind == "(":
            node = self.expr()
            self.take(")")
            return node
        if kind == "ident":
            if self.peek()[0] == "(":
                self.take("(")
                arg = self.expr()
                self.take(")")
                if value not in _FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {value!r}", pos)
                return ("call", value, arg)
            return ("var", value, pos)
        raise ExpressionSyntaxError(f"unexpected token {kind!r}", pos)


# --- lowering: AST -> factor list with folding, affine capture, CSE --------


class _Lowerer:
    """Lowers ASTs to factors.

    Intermediate results are either ("const", v) or a lazy affine view
    ("aff", base, p, q) meaning p*z_base + q.  The view only materializes
    as an affine factor when a non-affine operation consumes it, so chains
    of constant arithmetic collapse into a single factor.
    """

    def __init__(self, var_names: Sequence[str], cse: bool):
        self.var_names = list(var_names)
        self.cse = cse
        self.nodes: list[FactorNode] = [FactorNode("input") for _ in var_names]
        self.memo: dict[tuple, int] = {}

    def emit(self, key: tuple, node: FactorNode) -> int:
        if self.cse and key in self.memo:
            return self.memo[key]
        self.nodes.append(node)
        idx = len(self.nodes) - 1
        if self.cse:
            self.memo[key] = idx
        return idx

    def const_node(self, value: float) -> int:
        return self.emit(("const", float(value)), FactorNode("const", value=float(value)))

    def force(self, rep) -> int:
        """Materialize a lazy result as a factor index."""
        if rep[0] == "const":
            return self.const_node(rep[1])
        _, a, p, q = rep
        if p == 1.0 and q == 0.0:
            return a
        inner = self.nodes[a]
        if inner.kind == "affine":  # compose onto the (live) inner base
            p, q, a = p * inner.p, p * inner.q + q, inner.a
            if p == 1.0 and q == 0.0:
                return a
        return self.emit(("affine", a, p, q), FactorNode("affine", a=a, p=float(p), q=float(q)))

    @staticmethod
    def _aff(a: int, p: float = 1.0, q: float = 0.0):
        return ("aff", a, float(p), float(q))

    def binary(self, kind: str, left, right):
        lc = left[0] == "const"
        rc = right[0] == "const"
        if lc and rc:
            lv, rv = left[1], right[1]
            if kind == "div" and rv == 0:
                raise DomainError("division by zero in constant subexpression")
            value = {"add": lv + rv, "sub": lv - rv, "mul": lv * rv}.get(kind)
            return ("const", value if value is not None else lv / rv)
        if kind in ("add", "sub"):
            if rc:
                _, a, p, q = left
                return self._aff(a, p, q + right[1] if kind == "add" else q - right[1])
            if lc:
                _, a, p, q = right
                if kind == "add":
                    return self._aff(a, p, q + left[1])
                return self._aff(a, -p, left[1] - q)
            if left[1] == right[1]:  # same base: combine coefficients
                p = left[2] + right[2] if kind == "add" else left[2] - right[2]
                q = left[3] + right[3] if kind == "add" else left[3] - right[3]
                if p == 0.0:
                    return ("const", q)
                return self._aff(left[1], p, q)
            a, b = self.force(left), self.force(right)
            if kind == "add" and self.cse:
                key = ("add", min(a, b), max(a, b))
            else:
                key = (kind, a, b)
            return self._aff(self.emit(key, FactorNode(kind, a=a, b=b)))
        if kind == "mul":
            if lc or rc:
                cval = left[1] if lc else right[1]
                other = right if lc else left
                if cval == 0.0:
                    return ("const", 0.0)
                _, a, p, q = other
                return self._aff(a, cval * p, cval * q)
            a, b = self.force(left), self.force(right)
            key = ("mul", min(a, b), max(a, b)) if self.cse else ("mul", a, b)
            return self._aff(self.emit(key, FactorNode("mul", a=a, b=b)))
        if kind == "div":
            if rc:
                cval = right[1]
                if cval == 0.0:
                    raise DomainError("division by a zero constant")
                _, a, p, q = left
                return self._aff(a, p / cval, q / cval)
            a = self.force(left) if not lc else self.const_node(left[1])
            b = self.force(right)
            return self._aff(self.emit(("div", a, b), FactorNode("div", a=a, b=b)))
        raise AssertionError(kind)

    def lower(self, ast):
        head = ast[0]
        if head == "num":
            return ("const", float(ast[1]))
        if head == "var":
            name, pos = ast[1], ast[2]
            if name not in self.var_names:
                raise UnknownIdentifier(f"unknown variable {name!r}", pos)
            return self._aff(self.var_names.index(name))
        if head == "neg":
            inner = self.lower(ast[1])
            if inner[0] == "const":
                return ("const", -inner[1])
            _, a, p, q = inner
            return self._aff(a, -p, -q)
        if head in ("add", "sub", "mul", "div"):
            return self.binary(head, self.lower(ast[1]), self.lower(ast[2]))
        if head == "call":
            fn, arg = ast[1], self.lower(ast[2])
            if arg[0] == "const":
                v = arg[1]
                if fn == "log" and v <= 0:
                    raise DomainError(f"log of non-positive constant {v}")
                return ("const", math.exp(v) if fn == "exp" else math.log(v))
            a = self.force(arg)
            return self._aff(self.emit((fn, a), FactorNode(fn, a=a)))
        if head == "pow":
            base = self.lower(ast[1])
            exponent = self.lower(ast[2])
            pos = ast[3]
            if exponent[0] != "const":
                raise NonIntegerExponent("exponent must be a constant integer", pos)
            qf = exponent[1]
            q = round(qf)
            if abs(qf - q) > 1e-9:
                raise NonIntegerExponent(f"exponent {qf} is not an integer", pos)
            q = int(q)
            if base[0] == "const":
                return ("const", float(base[1]) ** q)
            if q == 0:
                return ("const", 1.0)
            if q == 1:
                return base
            a = self.force(base)
            inner = self.emit(("pow", a, abs(q)), FactorNode("pow", a=a, power=abs(q)))
            if q > 0:
                return self._aff(inner)
            one = self.const_node(1.0)
            return self._aff(self.emit(("div", one, inner), FactorNode("div", a=one, b=inner)))
        raise AssertionError(f"unhandled AST node {head!r}")

    def output_of(self, ast) -> int:
        return self.force(self.lower(ast))


def parse_system(
    texts: Sequence[str], var_names: Sequence[str], *, cse: bool = True
) -> FactorGraph:
    """Parse several expressions over shared variables into one factor graph
    with one output per expression."""
    names = list(var_names)
    if len(set(names)) != len(names):
        raise ExpressionSyntaxError("duplicate variable names")
    lowerer = _Lowerer(names, cse)
    outputs = []
    for text in texts:
        ast = _Parser(text).parse()
        outputs.append(lowerer.output_of(ast))
    graph = FactorGraph(len(names), tuple(lowerer.nodes), tuple(outputs), tuple(names))
    graph.validate()
    return graph


def parse(text: str, var_names: Sequence[str], *, cse: bool = True) -> FactorGraph:
    """Parse a single expression into a factor graph with one output."""
    return parse_system([text], var_names, cse=cse)


# --- pretty printing --------------------------------------------------------


def _node_str(g: FactorGraph, j: int, memo: dict) -> str:
    if j in memo:
        return memo[j]
    node = g.nodes[j]
    if node.kind == "input":
        s = g.var_names[j]
    elif node.kind == "const":
        s = repr(node.value)
    elif node.kind == "affine":
        a = _node_str(g, node.a, memo)
        if node.p == 1.0:
            s = f"({a} + {node.q!r})"
        elif node.q == 0.0:
            s = f"({node.p!r}*{a})"
        else:
            s = f"({node.p!r}*{a} + {node.q!r})"
    elif node.kind in ("add", "sub", "mul", "div"):
        a = _node_str(g, node.a, memo)
        b = _node_str(g, node.b, memo)
        op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[node.kind]
        s = f"({a} {op} {b})"
    elif node.kind in ("exp", "log"):
        s = f"{node.kind}({_node_str(g, node.a, memo)})"
    elif node.kind == "pow":
        s = f"{_node_str(g, node.a, memo)}^{node.power}"
    else:
        raise AssertionError(node.kind)
    memo[j] = s
    return s


def pretty(g: FactorGraph) -> list[str]:
    """Expression strings that re-parse to a structurally identical graph."""
    memo: dict = {}
    return [_node_str(g, j, memo) for j in g.outputs]


def graph_to_dict(g: FactorGraph) -> dict:
    nodes = []
    for node in g.nodes:
        d = {"kind": node.kind}
        if node.kind == "const":
            d["value"] = node.value
        elif node.kind == "affine":
            d.update(a=node.a, p=node.p, q=node.q)
        elif node.kind == "pow":
            d.update(a=node.a, power=node.power)
        elif node.kind in ("add", "sub", "mul", "div"):
            d.update(a=node.a, b=node.b)
        elif node.kind in ("exp", "log"):
            d["a"] = node.a
        nodes.append(d)
    return {
        "n_inputs": g.n_inputs,
        "var_names": list(g.var_names),
        "nodes": nodes,
        "outputs": list(g.outputs),
    }


# --- evaluation -------------------------------------------------------------


def eval_factors_real(g: FactorGraph, x: Sequence[float]) -> np.ndarray:
    """Forward sweep returning every factor value at a point."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != g.n_inputs:
        raise DomainError(f"expected {g.n_inputs} inputs, got {x.size}")
    z = np.empty(g.n_factors)
    for j, node in enumerate(g.nodes):
        k = node.kind
        if k == "input":
            z[j] = x[j]
        elif k == "const":
            z[j] = node.value
        elif k == "add":
            z[j] = z[node.a] + z[node.b]
        elif k == "sub":
            z[j] = z[node.a] - z[node.b]
        elif k == "mul":
            z[j] = z[node.a] * z[node.b]
        elif k == "div":
            den = z[node.b]
            if den == 0.0:
                raise DomainError("division by zero", factor=j)
            z[j] = z[node.a] / den
        elif k == "exp":
            z[j] = math.exp(z[node.a])
        elif k == "log":
            v = z[node.a]
            if v <= 0.0:
                raise DomainError(f"log of non-positive value {v}", factor=j)
            z[j] = math.log(v)
        elif k == "pow":
            z[j] = z[node.a] ** node.power
        elif k == "affine":
            z[j] = node.p * z[node.a] + node.q
        else:
            raise AssertionError(k)
    return z


def eval_real(g: FactorGraph, x: Sequence[float]) -> np.ndarray:
    return eval_factors_real(g, x)[list(g.outputs)]


def eval_real_batch(g: FactorGraph, xs: np.ndarray) -> np.ndarray:
    """Vectorized forward sweep over rows of ``xs``; returns (rows, outputs)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[1] != g.n_inputs:
        raise DomainError(f"expected {g.n_inputs} inputs, got {xs.shape[1]}")
    cols: list[np.ndarray] = []
    for j, node in enumerate(g.nodes):
        k = node.kind
        if k == "input":
            v = xs[:, j]
        elif k == "const":
            v = np.full(xs.shape[0], node.value)
        elif k == "add":
            v = cols[node.a] + cols[node.b]
        elif k == "sub":
            v = cols[node.a] - cols[node.b]
        elif k == "mul":
            v = cols[node.a] * cols[node.b]
        elif k == "div":
            den = cols[node.b]
            if np.any(den == 0.0):
                raise DomainError("division by zero", factor=j)
            v = cols[node.a] / den
        elif k == "exp":
            v = np.exp(cols[node.a])
        elif k == "log":
            arg = cols[node.a]
            if np.any(arg <= 0.0):
                raise DomainError("log of non-positive value", factor=j)
            v = np.log(arg)
        elif k == "pow":
            v = cols[node.a] ** node.power
        elif k == "affine":
            v = node.p * cols[node.a] + node.q
        else:
            raise AssertionError(k)
        cols.append(v)
    return np.column_stack([cols[j] for j in g.outputs])


def eval_interval(g: FactorGraph, X: IntervalVector) -> IntervalVector:
    """Natural interval extension of every factor; the first ``n_inputs``
    entries are the inputs themselves."""
    if len(X) != g.n_inputs:
        raise DomainError(f"expected {g.n_inputs} inputs, got {len(X)}")
    z: list[Interval] = []
    for j, node in enumerate(g.nodes):
        k = node.kind
        try:
            if k == "input":
                v = X[j]
            elif k == "const":
                v = Interval.point(node.value)
            elif k == "add":
                v = iv_add(z[node.a], z[node.b])
            elif k == "sub":
                v = iv_sub(z[node.a], z[node.b])
            elif k == "mul":
                v = iv_mul(z[node.a], z[node.b])
            elif k == "div":
                v = iv_div(z[node.a], z[node.b])
            elif k == "exp":
                v = iv_exp(z[node.a])
            elif k == "log":
                v = iv_log(z[node.a])
            elif k == "pow":
                v = iv_pow_int(z[node.a], node.power)
            elif k == "affine":
                scaled = iv_mul(Interval.point(node.p), z[node.a])
                v = iv_add(scaled, Interval.point(node.q))
            else:
                raise AssertionError(k)
        except DivisionByZeroInterval as exc:
            raise DivisionByZeroInterval(str(exc), factor=j) from None
        except DomainError as exc:
            if exc.factor is None:
                raise DomainError(str(exc), factor=j) from None
            raise
        z.append(v)
    return IntervalVector(z)


def eval_output_interval(g: FactorGraph, X: IntervalVector) -> IntervalVector:
    z = eval_interval(g, X)
    return IntervalVector([z[j] for j in g.outputs])


def eval_interval_jacobian(g: FactorGraph, X: IntervalVector) -> IntervalMatrix:
    """Forward-mode interval derivatives of the outputs w.r.t. the inputs.

    Each row encloses the gradient of one output over the whole box X.
    """
    z = eval_interval(g, X)
    n = g.n_inputs
    zero = Interval.point(0.0)
    rows: list[list[Interval]] = []
    for j, node in enumerate(g.nodes):
        k = node.kind
        if k == "input":
            grad = [zero] * n
            grad[j] = Interval.point(1.0)
        elif k == "const":
            grad = [zero] * n
        elif k == "add":
            ga, gb = rows[node.a], rows[node.b]
            grad = [iv_add(ga[i], gb[i]) for i in range(n)]
        elif k == "sub":
            ga, gb = rows[node.a], rows[node.b]
            grad = [iv_sub(ga[i], gb[i]) for i in range(n)]
        elif k == "mul":
            ga, gb = rows[node.a], rows[node.b]
            za, zb = z[node.a], z[node.b]
            grad = [iv_add(iv_mul(za, gb[i]), iv_mul(zb, ga[i])) for i in range(n)]
        elif k == "div":
            ga, gb = rows[node.a], rows[node.b]
            zb, zj = z[node.b], z[j]
            try:
                grad = [iv_div(iv_sub(ga[i], iv_mul(zj, gb[i])), zb) for i in range(n)]
            except DivisionByZeroInterval as exc:
                raise DivisionByZeroInterval(str(exc), factor=j) from None
        elif k == "exp":
            ga = rows[node.a]
            grad = [iv_mul(z[j], ga[i]) for i in range(n)]
        elif k == "log":
            ga = rows[node.a]
            za = z[node.a]
            grad = [iv_div(ga[i], za) for i in range(n)]
        elif k == "pow":
            ga = rows[node.a]
            dz = iv_mul(Interval.point(float(node.power)), iv_pow_int(z[node.a], node.power - 1))
            grad = [iv_mul(dz, ga[i]) for i in range(n)]
        elif k == "affine":
            ga = rows[node.a]
            grad = [iv_mul(Interval.point(node.p), ga[i]) for i in range(n)]
        else:
            raise AssertionError(k)
        rows.append(grad)
    lo = np.array([[rows[j][i].lo for i in range(n)] for j in g.outputs])
    hi = np.array([[rows[j][i].hi for i in range(n)] for j in g.outputs])
    return IntervalMatrix(lo, hi)
