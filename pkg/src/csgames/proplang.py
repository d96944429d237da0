"""Temporal property language: coalition values and optimal equilibria.

ASCII surface syntax, one property per line in `.props` files:

    <<usr1>> Pmax=? [ F ("sent1" & t<=D) ]
    <<usr1>> R{"time"}min=? [ F "sent1" ]
    <<p1>> P>=0.5 [ X "win1" ]
    <<c1:c2:c3>>(NE,SW)max=? (R{"u1"}[ C<=1 ] + R{"u2"}[ C<=1 ] + R{"u3"}[ C<=1 ])

State formulae combine `true`, quoted label atoms, comparisons over model
variables, `!`, `&`, `|` and parentheses (`|` is parsed as negated
conjunction). Path formulae: `X f`, `f U g`, `f U<=k g`, with `F` and
`F<=k` as reachability sugar. Reward formulae: `I=k`, `C<=k`, `F f`.
Step and threshold bounds may name model constants.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError
from .expr import Expr, Lit, parse_comparison_expression
from .lexer import EOF, IDENT, NUMBER, STRING, TokenStream, tokenize

# --- state formulae ----------------------------------------------------------


@dataclass(frozen=True)
class StateFormula:
    pass


@dataclass(frozen=True)
class BoolLit(StateFormula):
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Atom(StateFormula):
    name: str

    def __str__(self):
        return f'"{self.name}"'


@dataclass(frozen=True)
class Predicate(StateFormula):
    expr: Expr

    def __str__(self):
        return str(self.expr)


@dataclass(frozen=True)
class Not(StateFormula):
    sub: StateFormula

    def __str__(self):
        return f"!{_wrap(self.sub)}"


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"{_wrap(self.left)} & {_wrap(self.right)}"


@dataclass(frozen=True)
class ZeroSumProb(StateFormula):
    coalition: tuple[str, ...]
    query: str | None  # "max" | "min" | None (bare =?)
    bound: tuple[str, Expr] | None  # (relation, threshold) or None for =?
    path: "PathFormula"

    def __str__(self):
        return f"<<{','.join(self.coalition)}>> P{_query_suffix(self)} [ {self.path} ]"


@dataclass(frozen=True)
class ZeroSumReward(StateFormula):
    coalition: tuple[str, ...]
    reward: str
    query: str | None
    bound: tuple[str, Expr] | None
    formula: "RewardFormula"

    def __str__(self):
        return (
            f"<<{','.join(self.coalition)}>> R{{\"{self.reward}\"}}"
            f"{_query_suffix(self)} [ {self.formula} ]"
        )


@dataclass(frozen=True)
class PathObjective:
    path: "PathFormula"

    def __str__(self):
        return f"P[ {self.path} ]"


@dataclass(frozen=True)
class RewardObjective:
    reward: str
    formula: "RewardFormula"

    def __str__(self):
        return f"R{{\"{self.reward}\"}}[ {self.formula} ]"


@dataclass(frozen=True)
class EquilibriumOp(StateFormula):
    coalitions: tuple[tuple[str, ...], ...]
    kind: str  # "NE" | "CE"
    criterion: str  # "SW" | "SF"
    opt: str  # "max" | "min"
    bound: tuple[str, Expr] | None  # None for =?
    objectives: tuple[PathObjective | RewardObjective, ...]

    def __str__(self):
        coalitions = ":".join(",".join(c) for c in self.coalitions)
        if self.bound is None:
            suffix = f"{self.opt}=?"
        else:
            rel, x = self.bound
            suffix = f"{self.opt}{rel}{x}"
        body = " + ".join(str(o) for o in self.objectives)
        return f"<<{coalitions}>>({self.kind},{self.criterion}){suffix} ({body})"


def _query_suffix(node) -> str:
    if node.bound is None:
        return f"{node.query}=?" if node.query else "=?"
    rel, x = node.bound
    prefix = node.query or ""
    return f"{prefix}{rel}{x}"


def _wrap(f: StateFormula) -> str:
    if isinstance(f, (BoolLit, Atom, Not)):
        return str(f)
    if isinstance(f, Predicate):
        return str(f)
    return f"({f})"


# --- path and reward formulae ---------------------------------------------------


@dataclass(frozen=True)
class PathFormula:
    pass


@dataclass(frozen=True)
class Next(PathFormula):
    sub: StateFormula

    def __str__(self):
        return f"X {_wrap(self.sub)}"


@dataclass(frozen=True)
class Until(PathFormula):
    left: StateFormula
    right: StateFormula
    bound: Expr | None  # step bound (<=k) or None

    def __str__(self):
        step = f"<={self.bound}" if self.bound is not None else ""
        if self.left == BoolLit(True):
            return f"F{step} {_wrap(self.right)}"
        return f"{_wrap(self.left)} U{step} {_wrap(self.right)}"


@dataclass(frozen=True)
class RewardFormula:
    pass


@dataclass(frozen=True)
class Instant(RewardFormula):
    step: Expr

    def __str__(self):
        return f"I={self.step}"


@dataclass(frozen=True)
class Cumulative(RewardFormula):
    bound: Expr

    def __str__(self):
        return f"C<={self.bound}"


@dataclass(frozen=True)
class ReachReward(RewardFormula):
    target: StateFormula

    def __str__(self):
        return f"F {_wrap(self.target)}"


# --- parser --------------------------------------------------------------------


def parse_property(text: str) -> StateFormula:
    ts = TokenStream(tokenize(text))
    formula = _parse_state_formula(ts)
    if ts.peek().kind != EOF:
        raise ts.error("trailing input after property")
    return formula


def parse_properties_file(text: str) -> list[tuple[str, StateFormula]]:
    """One property per non-empty, non-comment line."""
    out = []
    for raw in text.splitlines():
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        out.append((line, parse_property(line)))
    return out


def _parse_state_formula(ts) -> StateFormula:
    return _parse_or(ts)


def _parse_or(ts):
    left = _parse_and(ts)
    while ts.at_symbol("|"):
        ts.next()
        right = _parse_and(ts)
        left = Not(And(Not(left), Not(right)))
    return left


def _parse_and(ts):
    left = _parse_not(ts)
    while ts.at_symbol("&"):
        ts.next()
        left = And(left, _parse_not(ts))
    return left


def _parse_not(ts):
    if ts.at_symbol("!"):
        ts.next()
        return Not(_parse_not(ts))
    return _parse_state_atom(ts)


def _parse_state_atom(ts):
    tok = ts.peek()
    if ts.at_symbol("<<"):
        return _parse_game_operator(ts)
    if tok.kind == STRING:
        ts.next()
        return Atom(tok.text[1:-1])
    if ts.at_keyword("true"):
        ts.next()
        return BoolLit(True)
    if ts.at_keyword("false"):
        ts.next()
        return BoolLit(False)
    if ts.at_symbol("("):
        ts.next()
        inner = _parse_state_formula(ts)
        ts.expect_symbol(")")
        return inner
    if tok.kind in (IDENT, NUMBER):
        return Predicate(parse_comparison_expression(ts))
    raise ts.error("expected a state formula")


def _parse_coalitions(ts) -> tuple[tuple[str, ...], ...]:
    ts.expect_symbol("<<")
    groups = [[ts.expect_ident("player name").text]]
    while True:
        if ts.accept_symbol(","):
            groups[-1].append(ts.expect_ident("player name").text)
        elif ts.accept_symbol(":"):
            groups.append([ts.expect_ident("player name").text])
        else:
            break
    ts.expect_symbol(">>")
    return tuple(tuple(g) for g in groups)


def _parse_game_operator(ts):
    coalitions = _parse_coalitions(ts)
    if ts.at_symbol("("):
        return _parse_equilibrium_tail(ts, coalitions)
    tok = ts.expect_ident("P or R operator")
    if len(coalitions) != 1:
        raise ts.error("a value query takes a single coalition")
    coalition = coalitions[0]
    if tok.text in ("P", "Pmax", "Pmin"):
        query = {"P": None, "Pmax": "max", "Pmin": "min"}[tok.text]
        bound = _parse_query_bound(ts)
        ts.expect_symbol("[")
        path = _parse_path_formula(ts)
        ts.expect_symbol("]")
        return ZeroSumProb(coalition, query, bound, path)
    if tok.text in ("R", "Rmax", "Rmin"):
        query = {"R": None, "Rmax": "max", "Rmin": "min"}[tok.text]
        ts.expect_symbol("{")
        reward = ts.expect_string()
        ts.expect_symbol("}")
        if query is None:
            suffix = ts.accept_keyword("max", "min")
            if suffix:
                query = suffix.text
        bound = _parse_query_bound(ts)
        ts.expect_symbol("[")
        formula = _parse_reward_formula(ts)
        ts.expect_symbol("]")
        return ZeroSumReward(coalition, reward, query, bound, formula)
    raise ts.error(f"unknown operator {tok.text!r}")


def _parse_query_bound(ts):
    """`=?` gives None; otherwise a (relation, threshold) pair."""
    if ts.at_symbol("="):
        if ts.peek(1).text == "?":
            ts.next()
            ts.next()
            return None
        raise ts.error("expected =? or a comparison bound")
    tok = ts.peek()
    if ts.at_symbol("<", "<=", ">", ">="):
        ts.next()
        value = parse_comparison_expression(ts)
        return (tok.text, value)
    raise ts.error("expected =? or a comparison bound")


def _parse_equilibrium_tail(ts, coalitions):
    ts.expect_symbol("(")
    kind = ts.expect_ident("NE or CE").text
    if kind not in ("NE", "CE"):
        raise ts.error("equilibrium kind must be NE or CE")
    ts.expect_symbol(",")
    criterion = ts.expect_ident("SW or SF").text
    if criterion not in ("SW", "SF"):
        raise ts.error("criterion must be SW or SF")
    ts.expect_symbol(")")
    opt_tok = ts.expect_ident("max or min")
    if opt_tok.text not in ("max", "min"):
        raise ts.error("optimisation direction must be max or min")
    bound = _parse_query_bound(ts)
    ts.expect_symbol("(")
    objectives = [_parse_objective(ts)]
    while ts.accept_symbol("+"):
        objectives.append(_parse_objective(ts))
    ts.expect_symbol(")")
    return EquilibriumOp(coalitions, kind, criterion, opt_tok.text, bound, tuple(objectives))


def _parse_objective(ts):
    tok = ts.expect_ident("P or R objective")
    if tok.text == "P":
        ts.expect_symbol("[")
        path = _parse_path_formula(ts)
        ts.expect_symbol("]")
        return PathObjective(path)
    if tok.text == "R":
        ts.expect_symbol("{")
        reward = ts.expect_string()
        ts.expect_symbol("}")
        ts.expect_symbol("[")
        formula = _parse_reward_formula(ts)
        ts.expect_symbol("]")
        return RewardObjective(reward, formula)
    raise ts.error("objectives are P[...] or R{\"name\"}[...]")


def _parse_path_formula(ts):
    if ts.at_keyword("X"):
        ts.next()
        return Next(_parse_state_formula(ts))
    if ts.at_keyword("F"):
        ts.next()
        bound = _parse_step_bound(ts)
        return Until(BoolLit(True), _parse_state_formula(ts), bound)
    left = _parse_state_formula(ts)
    ts.expect_keyword("U")
    bound = _parse_step_bound(ts)
    right = _parse_state_formula(ts)
    return Until(left, right, bound)


def _parse_step_bound(ts):
    if ts.accept_symbol("<="):
        return parse_comparison_expression(ts)
    return None


def _parse_reward_formula(ts):
    if ts.at_keyword("I"):
        ts.next()
        ts.expect_symbol("=")
        return Instant(parse_comparison_expression(ts))
    if ts.at_keyword("C"):
        ts.next()
        ts.expect_symbol("<=")
        return Cumulative(parse_comparison_expression(ts))
    if ts.at_keyword("F"):
        ts.next()
        return ReachReward(_parse_state_formula(ts))
    raise ts.error("expected a reward formula (I=k, C<=k or F)")


def print_property(formula: StateFormula) -> str:
    return str(formula)


# --- typechecking ------------------------------------------------------------


def typecheck(formula: StateFormula, game, constants=None) -> list[str]:
    """Diagnostics for a property against an elaborated game.

    Checks atoms, reward names, coalition membership and disjointness,
    predicate identifiers, query directions and operator nesting depth.
    """
    diagnostics: list[str] = []
    known_vars = set()
    for valuation in game.valuations:
        known_vars |= set(valuation)
    known_vars |= set(constants or ())

    def check_coalitions(groups, where):
        seen = set()
        for group in groups:
            for p in group:
                if p not in game.players:
                    diagnostics.append(f"{where}: unknown player {p!r}")
                elif p in seen:
                    diagnostics.append(f"{where}: player {p!r} in two coalitions")
                seen.add(p)

    def visit_state(f, depth):
        if isinstance(f, Atom):
            if f.name not in game.atomic_propositions:
                diagnostics.append(f"unknown label {f.name!r}")
        elif isinstance(f, Predicate):
            for name in f.expr.free_names():
                if name not in known_vars:
                    diagnostics.append(f"unknown identifier {name!r} in predicate")
        elif isinstance(f, Not):
            visit_state(f.sub, depth)
        elif isinstance(f, And):
            visit_state(f.left, depth)
            visit_state(f.right, depth)
        elif isinstance(f, ZeroSumProb):
            visit_game_op(f, depth)
            visit_path(f.path, depth + 1)
        elif isinstance(f, ZeroSumReward):
            visit_game_op(f, depth)
            if not _has_reward(game, f.reward):
                diagnostics.append(f"unknown reward structure {f.reward!r}")
            visit_reward_formula(f.formula, depth + 1)
        elif isinstance(f, EquilibriumOp):
            if depth >= 1:
                diagnostics.append("unsupported nesting depth for equilibrium operators")
            check_coalitions(f.coalitions, "equilibrium operator")
            if len(f.coalitions) < 2:
                diagnostics.append("equilibrium operators need at least two coalitions")
            if len(f.objectives) != len(f.coalitions):
                diagnostics.append(
                    f"{len(f.coalitions)} coalitions but {len(f.objectives)} objectives"
                )
            for obj in f.objectives:
                if isinstance(obj, RewardObjective):
                    if not _has_reward(game, obj.reward):
                        diagnostics.append(f"unknown reward structure {obj.reward!r}")
                    visit_reward_formula(obj.formula, depth + 1)
                else:
                    visit_path(obj.path, depth + 1)

    def visit_game_op(f, depth):
        if depth >= 1:
            diagnostics.append("unsupported nesting depth for game operators")
        check_coalitions([f.coalition], "coalition")
        if f.bound is None and f.query is None:
            diagnostics.append(
                "numeric value queries need a direction (use max=? or min=?)"
            )

    def visit_path(p, depth):
        if isinstance(p, Next):
            visit_state(p.sub, depth)
        elif isinstance(p, Until):
            visit_state(p.left, depth)
            visit_state(p.right, depth)

    def visit_reward_formula(r, depth):
        if isinstance(r, ReachReward):
            visit_state(r.target, depth)

    visit_state(formula, 0)
    return diagnostics


def _has_reward(game, name):
    try:
        game.reward_structure(name)
        return True
    except Exception:
        return False
