"""Arithmetic/boolean expression trees over model variables and constants.

Shared by guards, updates, rewards, label definitions and the predicate
atoms of the property language. Integer arithmetic is checked against a
64-bit range so a runaway expression fails loudly instead of silently
growing the state space.

Operator precedence, loosest first: `? :`, `|`, `&`, `!`, comparisons,
`+ -`, `* /`, unary minus.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError
from .lexer import IDENT, NUMBER, SYMBOL, TokenStream

INT_MAX = 2**63 - 1

_FUNCTIONS = {"min", "max", "floor", "ceil", "pow", "mod", "abs"}


class EvalError(InputError):
    """Expression evaluation failure (bad types, unknown name, overflow)."""


@dataclass(frozen=True)
class Expr:
    def evaluate(self, env):
        raise NotImplementedError

    def free_names(self) -> set[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Lit(Expr):
    value: object  # int, float or bool

    def evaluate(self, env):
        return self.value

    def free_names(self):
        return set()

    def __str__(self):
        if self.value is True:
            return "true"
        if self.value is False:
            return "false"
        return repr(self.value) if isinstance(self.value, float) else str(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvalError(f"unknown identifier {self.name!r}") from None

    def free_names(self):
        return {self.name}

    def __str__(self):
        return self.name


def _check_int(value, what):
    if isinstance(value, int) and abs(value) > INT_MAX:
        raise EvalError(f"integer overflow in {what}")
    return value


def _numeric(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise EvalError(f"{what} needs a numeric operand, got {value!r}")
    return value


def _boolean(value, what):
    if not isinstance(value, bool):
        raise EvalError(f"{what} needs a boolean operand, got {value!r}")
    return value


@dataclass(frozen=True)
class UnOp(Expr):
    op: str
    operand: Expr

    def evaluate(self, env):
        v = self.operand.evaluate(env)
        if self.op == "-":
            return _check_int(-_numeric(v, "unary -"), "negation")
        if self.op == "!":
            return not _boolean(v, "'!'")
        raise EvalError(f"unknown unary operator {self.op!r}")

    def free_names(self):
        return self.operand.free_names()

    def __str__(self):
        return f"{self.op}{_paren(self.operand)}"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, env):
        op = self.op
        if op == "&":
            return _boolean(self.left.evaluate(env), "'&'") and _boolean(
                self.right.evaluate(env), "'&'"
            )
        if op == "|":
            return _boolean(self.left.evaluate(env), "'|'") or _boolean(
                self.right.evaluate(env), "'|'"
            )
        lv = self.left.evaluate(env)
        rv = self.right.evaluate(env)
        if op in ("=", "!="):
            if isinstance(lv, bool) != isinstance(rv, bool):
                raise EvalError("comparing boolean with number")
            return (lv == rv) if op == "=" else (lv != rv)
        _numeric(lv, f"'{op}'")
        _numeric(rv, f"'{op}'")
        if op == "<":
            return lv < rv
        if op == "<=":
            return lv <= rv
        if op == ">":
            return lv > rv
        if op == ">=":
            return lv >= rv
        if op == "+":
            return _check_int(lv + rv, "'+'")
        if op == "-":
            return _check_int(lv - rv, "'-'")
        if op == "*":
            return _check_int(lv * rv, "'*'")
        if op == "/":
            if rv == 0:
                raise EvalError("division by zero")
            return lv / rv
        raise EvalError(f"unknown operator {op!r}")

    def free_names(self):
        return self.left.free_names() | self.right.free_names()

    def __str__(self):
        return f"{_paren(self.left)} {self.op} {_paren(self.right)}"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]

    def evaluate(self, env):
        vals = [a.evaluate(env) for a in self.args]
        f = self.func
        if f in ("min", "max"):
            if len(vals) < 2:
                raise EvalError(f"{f} needs at least two arguments")
            return _check_int((min if f == "min" else max)(vals), f)
        if f == "abs":
            (v,) = _arity(vals, 1, f)
            return _check_int(abs(_numeric(v, f)), f)
        if f in ("floor", "ceil"):
            (v,) = _arity(vals, 1, f)
            import math

            out = math.floor(v) if f == "floor" else math.ceil(v)
            return _check_int(int(out), f)
        if f == "pow":
            base, expo = _arity(vals, 2, f)
            if isinstance(base, int) and isinstance(expo, int) and expo >= 0:
                if expo > 63:
                    raise EvalError("pow exponent too large")
                return _check_int(base**expo, f)
            return float(base) ** float(expo)
        if f == "mod":
            a, b = _arity(vals, 2, f)
            if not (isinstance(a, int) and isinstance(b, int)):
                raise EvalError("mod needs integer arguments")
            if b == 0:
                raise EvalError("mod by zero")
            return a % b
        raise EvalError(f"unknown function {f!r}")

    def free_names(self):
        out = set()
        for a in self.args:
            out |= a.free_names()
        return out

    def __str__(self):
        return f"{self.func}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Cond(Expr):
    test: Expr
    then: Expr
    other: Expr

    def evaluate(self, env):
        return (
            self.then.evaluate(env)
            if _boolean(self.test.evaluate(env), "'?'")
            else self.other.evaluate(env)
        )

    def free_names(self):
        return self.test.free_names() | self.then.free_names() | self.other.free_names()

    def __str__(self):
        return f"{_paren(self.test)} ? {_paren(self.then)} : {_paren(self.other)}"


def _arity(vals, n, f):
    if len(vals) != n:
        raise EvalError(f"{f} takes {n} arguments, got {len(vals)}")
    return vals


def _paren(e: Expr) -> str:
    if isinstance(e, (Lit, Var, Call)):
        return str(e)
    return f"({e})"


# --- parsing -------------------------------------------------------------------

_COMPARISONS = ("<=", ">=", "!=", "<", ">", "=")


def parse_expression(ts: TokenStream) -> Expr:
    expr = _parse_or(ts)
    if ts.at_symbol("?"):
        ts.next()
        then = parse_expression(ts)
        ts.expect_symbol(":")
        other = parse_expression(ts)
        return Cond(expr, then, other)
    return expr


def parse_comparison_expression(ts: TokenStream) -> Expr:
    """Expression without `&`, `|` or `? :` at top level.

    The property parser uses this for predicate atoms so the formula layer
    keeps ownership of the boolean connectives.
    """
    return _parse_comparison(ts)


def _parse_or(ts):
    left = _parse_and(ts)
    while ts.at_symbol("|"):
        ts.next()
        left = BinOp("|", left, _parse_and(ts))
    return left


def _parse_and(ts):
    left = _parse_not(ts)
    while ts.at_symbol("&"):
        ts.next()
        left = BinOp("&", left, _parse_not(ts))
    return left


def _parse_not(ts):
    if ts.at_symbol("!"):
        ts.next()
        return UnOp("!", _parse_not(ts))
    return _parse_comparison(ts)


def _parse_comparison(ts):
    left = _parse_additive(ts)
    if ts.at_symbol(*_COMPARISONS):
        op = ts.next().text
        right = _parse_additive(ts)
        return BinOp(op, left, right)
    return left


def _parse_additive(ts):
    left = _parse_multiplicative(ts)
    while ts.at_symbol("+", "-"):
        op = ts.next().text
        left = BinOp(op, left, _parse_multiplicative(ts))
    return left


def _parse_multiplicative(ts):
    left = _parse_unary(ts)
    while ts.at_symbol("*", "/"):
        op = ts.next().text
        left = BinOp(op, left, _parse_unary(ts))
    return left


def _parse_unary(ts):
    if ts.at_symbol("-"):
        ts.next()
        return UnOp("-", _parse_unary(ts))
    return _parse_atom(ts)


def _parse_atom(ts):
    tok = ts.peek()
    if tok.kind == NUMBER:
        ts.next()
        if "." in tok.text:
            return Lit(float(tok.text))
        return Lit(int(tok.text))
    if tok.kind == IDENT:
        if tok.text == "true":
            ts.next()
            return Lit(True)
        if tok.text == "false":
            ts.next()
            return Lit(False)
        if tok.text in _FUNCTIONS and ts.peek(1).kind == SYMBOL and ts.peek(1).text == "(":
            ts.next()
            ts.expect_symbol("(")
            args = [parse_expression(ts)]
            while ts.accept_symbol(","):
                args.append(parse_expression(ts))
            ts.expect_symbol(")")
            return Call(tok.text, tuple(args))
        ts.next()
        return Var(tok.text)
    if ts.accept_symbol("("):
        inner = parse_expression(ts)
        ts.expect_symbol(")")
        return inner
    raise ts.error("expected an expression")
