"""Algebraic expressions used for vertex and edge equations.

Grammar (whitespace ignored)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | NAME '(' args ')' | NAME '[' INT (',' INT)* ']' '(' args ')'
             | '(' expr ')'

``sqrt``, ``abs`` and ``sign`` are the only built-in functions. Any other
call ``name(a, b)`` is a table lookup resolved by name at evaluation time;
``name[1,0](a, b)`` denotes the partial derivative of that table with respect
to its first argument. A minus sign directly in front of a bare number is read
as a negative literal, so ``-3`` is the constant -3 while ``-2^2`` is -(2^2).

Trees are immutable. :func:`to_string` emits the same grammar with the minimal
parentheses needed for ``parse(to_string(e)) == e``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

from .errors import (
    DomainError,
    ExpressionSyntaxError,
    NotDifferentiableError,
    UnboundSymbolError,
)

SYMBOL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
BUILTINS = ("sqrt", "abs", "sign")


class Expression:
    """Base class of expression tree nodes."""

    __slots__ = ()

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Const(Expression):
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise ValueError(f"constant must be finite, got {self.value!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Sym(Expression):
    name: str

    def __post_init__(self):
        if not SYMBOL_RE.match(self.name):
            raise ValueError(f"invalid symbol name {self.name!r}")


@dataclass(frozen=True)
class Unary(Expression):
    op: str  # 'neg', 'sqrt', 'abs', 'sign'
    arg: Expression


@dataclass(frozen=True)
class Binary(Expression):
    op: str  # '+', '-', '*', '/', '^'
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call(Expression):
    """Table lookup ``name(args)``; ``orders`` gives partial-derivative orders."""

    name: str
    args: tuple
    orders: tuple = ()

    def __post_init__(self):
        if not SYMBOL_RE.match(self.name) or self.name in BUILTINS:
            raise ValueError(f"invalid function name {self.name!r}")
        object.__setattr__(self, "args", tuple(self.args))
        orders = tuple(int(o) for o in self.orders)
        if orders and len(orders) != len(self.args):
            raise ValueError("derivative orders must match argument count")
        if orders and not any(orders):
            orders = ()
        object.__setattr__(self, "orders", orders)


Bindings = Mapping[str, float]
ExprLike = Union[Expression, str, float, int]

ZERO = Const(0.0)
ONE = Const(1.0)


def as_expression(value: ExprLike) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(value)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),\[\]]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"illegal character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ExpressionSyntaxError(message, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {value!r}, found {what}")
        return self.advance()

    def parse(self):
        if self.peek()[0] == "end":
            self.error("empty expression")
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            if tok[1] == ")":
                self.error("unbalanced ')'")
            self.error(f"unexpected token {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.advance()
            nxt, after = self.peek(), self.peek(1)
            if tok[1] == "-" and nxt[0] == "num" and not (after[0] == "op" and after[1] == "^"):
                self.advance()
                return Const(-float(nxt[1]))
            operand = self.unary()
            return operand if tok[1] == "+" else Unary("neg", operand)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.advance()
            return Const(float(value))
        if kind == "name":
            self.advance()
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] in "([":
                return self.call(value, tok)
            return Sym(value)
        if kind == "op" and value == "(":
            self.advance()
            if self.peek()[0] == "op" and self.peek()[1] == ")":
                self.error("empty parentheses")
            node = self.expr()
            if self.peek()[0] != "op" or self.peek()[1] != ")":
                self.error("unbalanced '('", tok)
            self.advance()
            return node
        if kind == "end":
            self.error("unexpected end of input (dangling operator?)")
        self.error(f"unexpected token {value!r}")

    def call(self, name, name_tok):
        orders = ()
        if self.peek()[1] == "[":
            if name in BUILTINS:
                self.error(f"'{name}' does not take derivative orders")
            self.advance()
            ords = []
            while True:
                tok = self.advance()
                if tok[0] != "num" or not tok[1].isdigit():
                    self.error("expected integer derivative order", tok)
                ords.append(int(tok[1]))
                if self.peek()[1] == ",":
                    self.advance()
                    continue
                self.expect("]")
                break
            orders = tuple(ords)
        open_tok = self.expect("(")
        args = []
        if self.peek()[1] == ")":
            self.error("function call without arguments")
        while True:
            args.append(self.expr())
            tok = self.peek()
            if tok[0] == "op" and tok[1] == ",":
                self.advance()
                continue
            if tok[0] == "op" and tok[1] == ")":
                self.advance()
                break
            self.error("unbalanced '(' in function call", open_tok)
        if name in BUILTINS:
            if len(args) != 1:
                self.error(f"'{name}' takes exactly one argument", name_tok)
            return Unary(name, args[0])
        if orders and len(orders) != len(args):
            self.error("derivative orders must match argument count", name_tok)
        return Call(name, tuple(args), orders)


def parse(text: str) -> Expression:
    """Parse an equation string into an expression tree.

    Raises:
        ExpressionSyntaxError: with the offending character position.
    """
    if not isinstance(text, str):
        raise TypeError("equation must be a string")
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# serialization

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_PREC_UNARY = 3
_PREC_ATOM = 5


def _format_number(v):
    if v.is_integer() and abs(v) < 1e15 and not (v == 0 and math.copysign(1, v) < 0):
        return str(int(v))
    return repr(v)


def _prec(node):
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return _PREC_UNARY if node.op == "neg" else _PREC_ATOM
    if isinstance(node, Const):
        return _PREC_UNARY if math.copysign(1, node.value) < 0 else _PREC_ATOM
    return _PREC_ATOM


def to_string(node: Expression) -> str:
    """Canonical text form; re-parses to a structurally identical tree."""
    if isinstance(node, Const):
        return _format_number(node.value)
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Call):
        args = ", ".join(to_string(a) for a in node.args)
        if node.orders:
            return f"{node.name}[{','.join(str(o) for o in node.orders)}]({args})"
        return f"{node.name}({args})"
    if isinstance(node, Unary):
        if node.op != "neg":
            return f"{node.op}({to_string(node.arg)})"
        arg = node.arg
        inner = to_string(arg)
        if isinstance(arg, Const) and _prec(arg) == _PREC_ATOM:
            return f"-({inner})"
        if _prec(arg) < _PREC_UNARY:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(node, Binary):
        p = _PREC[node.op]
        left, right = to_string(node.left), to_string(node.right)
        if node.op == "^":
            if _prec(node.left) <= p:
                left = f"({left})"
            if _prec(node.right) < _PREC_UNARY:
                right = f"({right})"
        else:
            if _prec(node.left) < p:
                left = f"({left})"
            if _prec(node.right) <= p:
                right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression: {node!r}")


# ---------------------------------------------------------------------------
# evaluation


def _sign(v):
    return float((v > 0) - (v < 0))


def _sqrt(v):
    return math.sqrt(v)


_UNARY_FUNCS = {"neg": lambda v: -v, "sqrt": _sqrt, "abs": abs, "sign": _sign}


def _binary(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    return math.pow(a, b)


def _call_table(table, args, orders):
    if orders:
        return float(table(*args, orders=orders))
    return float(table(*args))


def evaluate(expr: Expression, bindings: Bindings, tables: Mapping[str, Callable] | None = None) -> float:
    """Evaluate ``expr`` with IEEE double arithmetic.

    Args:
        expr: Expression tree (or equation string).
        bindings: Symbol values.
        tables: Callables for table lookups, keyed by name. Derivative calls
            pass ``orders=`` as a keyword argument.

    Raises:
        UnboundSymbolError: A free symbol has no binding.
        DomainError: sqrt of a negative number, division by zero, invalid power.
    """
    expr = as_expression(expr)
    tables = tables or {}

    def ev(node):
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Sym):
            try:
                return float(bindings[node.name])
            except KeyError:
                raise UnboundSymbolError(node.name) from None
        if isinstance(node, Binary):
            a, b = ev(node.left), ev(node.right)
            try:
                return _binary(node.op, a, b)
            except ZeroDivisionError:
                raise DomainError("division by zero", to_string(node)) from None
            except (ValueError, OverflowError) as exc:
                raise DomainError(f"invalid power ({exc})", to_string(node)) from None
        if isinstance(node, Unary):
            a = ev(node.arg)
            if node.op == "sqrt" and a < 0:
                raise DomainError("square root of negative value", to_string(node))
            return _UNARY_FUNCS[node.op](a)
        if isinstance(node, Call):
            try:
                table = tables[node.name]
            except KeyError:
                raise UnboundSymbolError(node.name) from None
            return _call_table(table, [ev(a) for a in node.args], node.orders)
        raise TypeError(f"not an expression: {node!r}")

    return ev(expr)


# ---------------------------------------------------------------------------
# structural queries and rewriting


def walk(expr: Expression):
    """Yield every node of the tree in pre-order."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Call):
            stack.extend(reversed(node.args))


def free_symbols(expr: ExprLike) -> set:
    expr = as_expression(expr)
    return {n.name for n in walk(expr) if isinstance(n, Sym)}


def function_names(expr: ExprLike) -> set:
    """Names of table lookups called in ``expr``."""
    expr = as_expression(expr)
    return {n.name for n in walk(expr) if isinstance(n, Call)}


def _rebuild(node, fn):
    """Apply ``fn`` bottom-up; ``fn`` returns a replacement node."""
    if isinstance(node, Unary):
        arg = _rebuild(node.arg, fn)
        node = node if arg is node.arg else Unary(node.op, arg)
    elif isinstance(node, Binary):
        left, right = _rebuild(node.left, fn), _rebuild(node.right, fn)
        if left is not node.left or right is not node.right:
            node = Binary(node.op, left, right)
    elif isinstance(node, Call):
        args = tuple(_rebuild(a, fn) for a in node.args)
        if any(a is not b for a, b in zip(args, node.args)):
            node = Call(node.name, args, node.orders)
    return fn(node)


def substitute(expr: ExprLike, rules: Mapping[str, ExprLike]) -> Expression:
    """Simultaneously replace symbols; replacements are not re-scanned."""
    expr = as_expression(expr)
    if not rules:
        return expr
    repl = {k: as_expression(v) for k, v in rules.items()}

    def fn(node):
        if isinstance(node, Sym) and node.name in repl:
            return repl[node.name]
        return node

    # replacements are inserted as leaves, so bottom-up rebuild never revisits them
    return _rebuild(expr, fn)


def rename_functions(expr: Expression, mapping: Mapping[str, str]) -> Expression:
    if not mapping:
        return expr

    def fn(node):
        if isinstance(node, Call) and node.name in mapping:
            return Call(mapping[node.name], node.args, node.orders)
        return node

    return _rebuild(expr, fn)


# ---------------------------------------------------------------------------
# smart constructors (constant folding and identity elimination)


def _is(node, value):
    return isinstance(node, Const) and node.value == value


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Binary("+", a, b)


def sub(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return Binary("-", a, b)


def mul(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    return Binary("*", a, b)


def div(a, b):
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    return Binary("/", a, b)


def power(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(math.pow(a.value, b.value))
        except (ValueError, OverflowError):
            return Binary("^", a, b)
    if _is(b, 1):
        return a
    if _is(b, 0):
        return ONE
    return Binary("^", a, b)


def unary(op, a):
    if op == "neg":
        return neg(a)
    if isinstance(a, Const) and not (op == "sqrt" and a.value < 0):
        return Const(_UNARY_FUNCS[op](a.value))
    return Unary(op, a)


_SMART = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


def simplify(expr: ExprLike) -> Expression:
    """Constant folding plus removal of additive zeros and multiplicative ones."""
    expr = as_expression(expr)

    def fn(node):
        if isinstance(node, Binary):
            return _SMART[node.op](node.left, node.right)
        if isinstance(node, Unary):
            return unary(node.op, node.arg)
        return node

    return _rebuild(expr, fn)


def is_zero(expr: Expression) -> bool:
    return _is(simplify(expr), 0)


# ---------------------------------------------------------------------------
# differentiation


def differentiate(expr: ExprLike, sym: str) -> Expression:
    """Symbolic partial derivative of ``expr`` with respect to ``sym``.

    ``abs`` and ``sign`` are treated as piecewise constant in slope: the
    derivative of ``abs(a)`` is ``sign(a)*a'`` and of ``sign(a)`` is 0.

    Raises:
        NotDifferentiableError: for powers whose exponent depends on ``sym``
            (the grammar has no logarithm).
    """
    expr = as_expression(expr)
    cache = {}

    def d(node):
        key = id(node)
        if key in cache:
            return cache[key][1]
        out = _d(node)
        cache[key] = (node, out)
        return out

    def _d(node):
        if isinstance(node, Const):
            return ZERO
        if isinstance(node, Sym):
            return ONE if node.name == sym else ZERO
        if isinstance(node, Unary):
            da = d(node.arg)
            if node.op == "neg":
                return neg(da)
            if node.op == "sqrt":
                if _is(da, 0):
                    return ZERO
                return div(da, mul(Const(2.0), node))
            if node.op == "abs":
                return mul(Unary("sign", node.arg), da)
            return ZERO
        if isinstance(node, Binary):
            a, b = node.left, node.right
            da, db = d(a), d(b)
            if node.op == "+":
                return add(da, db)
            if node.op == "-":
                return sub(da, db)
            if node.op == "*":
                return add(mul(da, b), mul(a, db))
            if node.op == "/":
                if _is(db, 0):
                    return div(da, b)
                return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
            # power
            if not _is(db, 0):
                raise NotDifferentiableError(
                    f"exponent of '{to_string(node)}' depends on '{sym}'"
                )
            if _is(da, 0):
                return ZERO
            return mul(mul(b, power(a, sub(b, ONE))), da)
        if isinstance(node, Call):
            total = ZERO
            base = node.orders or (0,) * len(node.args)
            for k, arg in enumerate(node.args):
                dk = d(arg)
                if _is(dk, 0):
                    continue
                orders = tuple(o + (1 if i == k else 0) for i, o in enumerate(base))
                total = add(total, mul(Call(node.name, node.args, orders), dk))
            return total
        raise TypeError(f"not an expression: {node!r}")

    return d(expr)


# ---------------------------------------------------------------------------
# compilation to Python source, used by the simulator's fast path


def to_python(expr: Expression, name_of: Callable[[str], str], table_of: Callable[[str], str]) -> str:
    """Fully parenthesized Python source evaluating ``expr``.

    Operation order matches :func:`evaluate`, so both paths give bit-identical
    results. ``name_of`` maps a symbol to a Python expression; ``table_of``
    maps a table name to a Python expression for the callable.
    """

    def py(node):
        if isinstance(node, Const):
            return repr(node.value)
        if isinstance(node, Sym):
            return name_of(node.name)
        if isinstance(node, Unary):
            a = py(node.arg)
            if node.op == "neg":
                return f"(-{a})"
            return f"_{node.op}({a})"
        if isinstance(node, Binary):
            a, b = py(node.left), py(node.right)
            if node.op == "^":
                return f"_pow({a}, {b})"
            return f"({a} {node.op} {b})"
        if isinstance(node, Call):
            args = ", ".join(py(a) for a in node.args)
            if node.orders:
                return f"_call({table_of(node.name)}, ({args},), {node.orders!r})"
            return f"_call({table_of(node.name)}, ({args},), ())"
        raise TypeError(f"not an expression: {node!r}")

    return py(expr)


PY_NAMESPACE = {
    "_sqrt": _sqrt,
    "_abs": abs,
    "_sign": _sign,
    "_pow": math.pow,
    "_call": _call_table,
}


def compile_function(params: Iterable[str], body_lines: Iterable[str], namespace: dict | None = None):
    """Build a Python function from generated source lines."""
    ns = dict(PY_NAMESPACE)
    if namespace:
        ns.update(namespace)
    src = f"def _generated({', '.join(params)}):\n" + "".join(f"    {ln}\n" for ln in body_lines)
    exec(compile(src, "<energygraph-generated>", "exec"), ns)
    fn = ns["_generated"]
    fn.source = src
    return fn
