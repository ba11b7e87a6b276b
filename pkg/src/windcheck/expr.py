"""Expression layer of the guarded-command language.

Lexer, expression AST, type checker, constant folding (exact rationals) and
compilation of expressions to Python source fragments.  Shared by the model
parser (`gcl`) and the property parser (`pctl`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence, Union


class GclSyntaxError(ValueError):
    """Raised on malformed model or formula text, with line/column info."""

    def __init__(self, message: str, line: int = -1, col: int = -1):
        self.line = line
        self.col = col
        if line >= 0:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class GclTypeError(ValueError):
    """Raised when an expression fails to type-check."""


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

PUNCT = [
    "..", "->", "<=", ">=", "!=", "=?",
    "[", "]", "(", ")", "{", "}", ":", ";", ",", "?",
    "+", "-", "*", "/", "<", ">", "=", "&", "|", "!", "'",
]

KEYWORDS = {
    "dtmc", "const", "int", "double", "bool", "formula", "module",
    "endmodule", "init", "label", "rewards", "endrewards", "true", "false",
}


@dataclass
class Token:
    kind: str          # 'ident', 'int', 'double', 'string', 'punct', 'kw', 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise GclSyntaxError("unterminated string", line, col)
                j += 1
            if j >= n:
                raise GclSyntaxError("unterminated string", line, col)
            tokens.append(Token("string", text[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            is_double = False
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and not text.startswith("..", j):
                is_double = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_double = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(Token("double" if is_double else "int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                col += len(p)
                i += len(p)
                break
        else:
            raise GclSyntaxError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self._tokens = tokens
        self._pos = 0

    @property
    def current(self) -> Token:
        return self._tokens[self._pos]

    def consume(self) -> Token:
        tok = self._tokens[self._pos]
        if tok.kind != "eof":
            self._pos += 1
        return tok

    def accept(self, text: str) -> Optional[Token]:
        tok = self.current
        if tok.kind in ("punct", "kw") and tok.text == text:
            return self.consume()
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            raise self.error(f"expected {text!r}, found {self.current.text!r}")
        return tok

    def accept_kind(self, kind: str) -> Optional[Token]:
        if self.current.kind == kind:
            return self.consume()
        return None

    def expect_kind(self, kind: str) -> Token:
        tok = self.accept_kind(kind)
        if tok is None:
            raise self.error(f"expected {kind}, found {self.current.text!r}")
        return tok

    def at(self, text: str) -> bool:
        return self.current.kind in ("punct", "kw") and self.current.text == text

    def error(self, message: str) -> GclSyntaxError:
        return GclSyntaxError(message, self.current.line, self.current.col)


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------

INT, DOUBLE, BOOL = "int", "double", "bool"


@dataclass(frozen=True)
class Lit:
    value: Union[int, Fraction, bool]

    def __str__(self):
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        if isinstance(self.value, Fraction) and self.value.denominator != 1:
            return repr(float(self.value))
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Unary:
    op: str            # '-' or '!'
    operand: "Expr"

    def __str__(self):
        return f"{self.op}{paren(self.operand)}"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self):
        return f"{paren(self.left)}{self.op}{paren(self.right)}"


@dataclass(frozen=True)
class Cond:
    test: "Expr"
    then: "Expr"
    other: "Expr"

    def __str__(self):
        return f"({self.test} ? {self.then} : {self.other})"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple

    def __str__(self):
        return f"{self.func}({', '.join(str(a) for a in self.args)})"


Expr = Union[Lit, Var, Unary, Binary, Cond, Call]


def paren(e: Expr) -> str:
    if isinstance(e, (Lit, Var, Call)):
        return str(e)
    return f"({e})"


FUNCTIONS = {
    # name -> (min arity, max arity or None for unbounded)
    "min": (2, None),
    "max": (2, None),
    "floor": (1, 1),
    "ceil": (1, 1),
    "round": (1, 1),
    "abs": (1, 1),
    "pow": (2, 2),
    "div": (2, 2),
    "mod": (2, 2),
}

COMPARISONS = {"<", "<=", ">", ">=", "=", "!="}
ARITH = {"+", "-", "*", "/"}


def parse_expression(ts: TokenStream) -> Expr:
    return _parse_cond(ts)


def _parse_cond(ts: TokenStream) -> Expr:
    test = _parse_or(ts)
    if ts.accept("?"):
        then = _parse_cond(ts)
        ts.expect(":")
        other = _parse_cond(ts)
        return Cond(test, then, other)
    return test


def _parse_or(ts: TokenStream) -> Expr:
    left = _parse_and(ts)
    while ts.accept("|"):
        left = Binary("|", left, _parse_and(ts))
    return left


def _parse_and(ts: TokenStream) -> Expr:
    left = _parse_not(ts)
    while ts.accept("&"):
        left = Binary("&", left, _parse_not(ts))
    return left


def _parse_not(ts: TokenStream) -> Expr:
    if ts.accept("!"):
        return Unary("!", _parse_not(ts))
    return _parse_comparison(ts)


def _parse_comparison(ts: TokenStream) -> Expr:
    left = _parse_additive(ts)
    for op in ("<=", ">=", "!=", "<", ">", "="):
        if ts.at(op):
            ts.consume()
            return Binary(op, left, _parse_additive(ts))
    return left


def _parse_additive(ts: TokenStream) -> Expr:
    left = _parse_multiplicative(ts)
    while True:
        if ts.accept("+"):
            left = Binary("+", left, _parse_multiplicative(ts))
        elif ts.accept("-"):
            left = Binary("-", left, _parse_multiplicative(ts))
        else:
            return left


def _parse_multiplicative(ts: TokenStream) -> Expr:
    left = _parse_unary(ts)
    while True:
        if ts.accept("*"):
            left = Binary("*", left, _parse_unary(ts))
        elif ts.accept("/"):
            left = Binary("/", left, _parse_unary(ts))
        else:
            return left


def _parse_unary(ts: TokenStream) -> Expr:
    if ts.accept("-"):
        return Unary("-", _parse_unary(ts))
    return _parse_primary(ts)


def _parse_primary(ts: TokenStream) -> Expr:
    tok = ts.current
    if tok.kind == "int":
        ts.consume()
        return Lit(int(tok.text))
    if tok.kind == "double":
        ts.consume()
        return Lit(Fraction(tok.text))
    if ts.accept("true"):
        return Lit(True)
    if ts.accept("false"):
        return Lit(False)
    if ts.accept("("):
        inner = parse_expression(ts)
        ts.expect(")")
        return inner
    if tok.kind == "ident":
        ts.consume()
        if tok.text in FUNCTIONS and ts.at("("):
            ts.expect("(")
            args = [parse_expression(ts)]
            while ts.accept(","):
                args.append(parse_expression(ts))
            ts.expect(")")
            lo, hi = FUNCTIONS[tok.text]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise GclSyntaxError(
                    f"{tok.text} takes {lo}{'+' if hi is None else ''} argument(s)",
                    tok.line, tok.col)
            return Call(tok.text, tuple(args))
        return Var(tok.text)
    raise ts.error(f"expected expression, found {tok.text!r}")


def parse_expression_text(text: str) -> Expr:
    ts = TokenStream(tokenize(text))
    e = parse_expression(ts)
    if ts.current.kind != "eof":
        raise ts.error(f"trailing input: {ts.current.text!r}")
    return e


# ---------------------------------------------------------------------------
# Type checking
# ---------------------------------------------------------------------------

def type_of(e: Expr, env: dict) -> str:
    """Infer the type of `e` given `env`: name -> 'int'|'double'|'bool'.

    Raises GclTypeError on ill-typed expressions or unknown names.
    """
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return BOOL
        if isinstance(e.value, int):
            return INT
        return INT if e.value.denominator == 1 else DOUBLE
    if isinstance(e, Var):
        if e.name not in env:
            raise GclTypeError(f"undeclared identifier {e.name!r}")
        return env[e.name]
    if isinstance(e, Unary):
        t = type_of(e.operand, env)
        if e.op == "-":
            if t == BOOL:
                raise GclTypeError("unary '-' applied to a boolean")
            return t
        if t != BOOL:
            raise GclTypeError("'!' applied to a non-boolean")
        return BOOL
    if isinstance(e, Binary):
        lt = type_of(e.left, env)
        rt = type_of(e.right, env)
        if e.op in ("&", "|"):
            if lt != BOOL or rt != BOOL:
                raise GclTypeError(f"'{e.op}' requires boolean operands")
            return BOOL
        if e.op in ("=", "!="):
            if (lt == BOOL) != (rt == BOOL):
                raise GclTypeError("'=' compares a boolean with a number")
            return BOOL
        if e.op in COMPARISONS:
            if BOOL in (lt, rt):
                raise GclTypeError(f"'{e.op}' requires numeric operands")
            return BOOL
        if BOOL in (lt, rt):
            raise GclTypeError(f"'{e.op}' requires numeric operands")
        if e.op == "/":
            return DOUBLE
        return INT if lt == rt == INT else DOUBLE
    if isinstance(e, Cond):
        tt = type_of(e.test, env)
        if tt != BOOL:
            raise GclTypeError("condition of '?:' must be boolean")
        at, bt = type_of(e.then, env), type_of(e.other, env)
        if at == bt:
            return at
        if BOOL in (at, bt):
            raise GclTypeError("branches of '?:' mix boolean and numeric")
        return DOUBLE
    if isinstance(e, Call):
        ats = [type_of(a, env) for a in e.args]
        if any(t == BOOL for t in ats):
            raise GclTypeError(f"{e.func}() requires numeric arguments")
        if e.func in ("floor", "ceil", "round"):
            return INT
        if e.func == "pow":
            return DOUBLE
        if e.func in ("div", "mod"):
            if any(t != INT for t in ats):
                raise GclTypeError(f"{e.func}() requires integer arguments")
            return INT
        # min/max/abs preserve int-ness
        return INT if all(t == INT for t in ats) else DOUBLE
    raise TypeError(f"unknown expression node {e!r}")


def free_names(e: Expr) -> set:
    if isinstance(e, Lit):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return free_names(e.operand)
    if isinstance(e, Binary):
        return free_names(e.left) | free_names(e.right)
    if isinstance(e, Cond):
        return free_names(e.test) | free_names(e.then) | free_names(e.other)
    if isinstance(e, Call):
        out: set = set()
        for a in e.args:
            out |= free_names(a)
        return out
    raise TypeError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# Constant evaluation (exact where possible)
# ---------------------------------------------------------------------------

def const_eval(e: Expr, env: dict):
    """Evaluate a constant expression.

    Rational arithmetic is kept exact with Fraction; pow falls back to float
    unless the exponent is a nonnegative integer.  `env` maps names to
    already-evaluated constant values.
    """
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise GclTypeError(f"{e.name!r} is not a constant")
        return env[e.name]
    if isinstance(e, Unary):
        v = const_eval(e.operand, env)
        return (not v) if e.op == "!" else -v
    if isinstance(e, Binary):
        a = const_eval(e.left, env)
        b = const_eval(e.right, env)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return Fraction(a) / Fraction(b) if not isinstance(a, float) and not isinstance(b, float) else a / b
        if op == "&":
            return a and b
        if op == "|":
            return a or b
        if op == "=":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
    if isinstance(e, Cond):
        return const_eval(e.then if const_eval(e.test, env) else e.other, env)
    if isinstance(e, Call):
        args = [const_eval(a, env) for a in e.args]
        f = e.func
        if f == "min":
            return min(args)
        if f == "max":
            return max(args)
        if f == "abs":
            return abs(args[0])
        if f == "floor":
            return math.floor(args[0])
        if f == "ceil":
            return math.ceil(args[0])
        if f == "round":
            return round(args[0])
        if f == "div":
            return args[0] // args[1]
        if f == "mod":
            return args[0] % args[1]
        if f == "pow":
            base, ex = args
            if isinstance(ex, int) and ex >= 0 and not isinstance(base, float):
                return Fraction(base) ** ex
            return float(base) ** float(ex)
    raise TypeError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# Compilation to Python source
# ---------------------------------------------------------------------------

_PYOP = {"&": "and", "|": "or", "=": "==", "!=": "!=",
         "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def to_python(e: Expr, rename: Callable[[str], str]) -> str:
    """Render `e` as a Python expression string.

    `rename` maps source identifiers (variables, formulas, constants) to the
    Python names they are bound to in the generated scope.
    """
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "True" if e.value else "False"
        if isinstance(e.value, Fraction) and e.value.denominator != 1:
            return repr(float(e.value))
        return str(int(e.value))
    if isinstance(e, Var):
        return rename(e.name)
    if isinstance(e, Unary):
        inner = to_python(e.operand, rename)
        return f"(not {inner})" if e.op == "!" else f"(-{inner})"
    if isinstance(e, Binary):
        a = to_python(e.left, rename)
        b = to_python(e.right, rename)
        op = _PYOP.get(e.op, e.op)
        return f"({a} {op} {b})"
    if isinstance(e, Cond):
        return (f"({to_python(e.then, rename)} if {to_python(e.test, rename)}"
                f" else {to_python(e.other, rename)})")
    if isinstance(e, Call):
        args = ", ".join(to_python(a, rename) for a in e.args)
        if e.func == "pow":
            a, b = (to_python(x, rename) for x in e.args)
            return f"({a} ** {b})"
        if e.func == "div":
            a, b = (to_python(x, rename) for x in e.args)
            return f"({a} // {b})"
        if e.func == "mod":
            a, b = (to_python(x, rename) for x in e.args)
            return f"({a} % {b})"
        return f"{e.func}({args})"
    raise TypeError(f"unknown expression node {e!r}")


#: Names that compiled expressions may reference.
EVAL_GLOBALS = {
    "floor": math.floor,
    "ceil": math.ceil,
    "round": round,
    "abs": abs,
    "min": min,
    "max": max,
}
