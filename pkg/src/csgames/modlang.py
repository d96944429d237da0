"""Guarded-command modeling language for concurrent stochastic games.

A model is a `csg` header followed by constants, player blocks, modules,
reward blocks and label definitions:

    csg
    const double q = 0.9;
    player usr1 mac1 endplayer
    module mac1
      sent : bool init false;
      [send] !sent -> q:(sent'=true) + 1-q:true;
    endmodule
    rewards "time" !sent : 1; endrewards
    label "done" = sent;

Commands carry an action list. A singleton list in a player-owned module
both defines when that action is available and what it does; lists in
shared (unowned) modules react to combinations of player actions. See
elaborator.py for the firing semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError
from .expr import Expr, Lit, parse_expression
from .lexer import EOF, IDENT, TokenStream, tokenize

_KEYWORDS = {
    "csg", "const", "player", "endplayer", "module", "endmodule",
    "rewards", "endrewards", "label", "init", "bool", "int", "double",
    "true", "false",
}


@dataclass(frozen=True)
class ConstDecl:
    name: str
    type: str  # "int" | "double" | "bool"
    value: Expr | None  # None: must be bound externally


@dataclass(frozen=True)
class PlayerDecl:
    name: str
    modules: tuple[str, ...]
    actions: tuple[str, ...]  # explicitly granted action names


@dataclass(frozen=True)
class VarDecl:
    name: str
    is_bool: bool
    low: Expr | None
    high: Expr | None
    init: Expr


@dataclass(frozen=True)
class Command:
    actions: tuple[str, ...]
    guard: Expr
    updates: tuple[tuple[Expr, tuple[tuple[str, Expr], ...]], ...]
    # updates: (probability, assignments); assignments: (variable, value)


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    variables: tuple[VarDecl, ...]
    commands: tuple[Command, ...]


@dataclass(frozen=True)
class RewardItem:
    actions: tuple[str, ...] | None  # None: state reward item
    guard: Expr
    value: Expr


@dataclass(frozen=True)
class RewardsDecl:
    name: str
    items: tuple[RewardItem, ...]


@dataclass(frozen=True)
class LabelDecl:
    name: str
    guard: Expr


@dataclass(frozen=True)
class ModelAst:
    constants: tuple[ConstDecl, ...]
    players: tuple[PlayerDecl, ...]
    modules: tuple[ModuleDecl, ...]
    rewards: tuple[RewardsDecl, ...]
    labels: tuple[LabelDecl, ...]


def parse_model(text: str) -> ModelAst:
    ts = TokenStream(tokenize(text))
    ts.expect_keyword("csg")
    constants: list[ConstDecl] = []
    players: list[PlayerDecl] = []
    modules: list[ModuleDecl] = []
    rewards: list[RewardsDecl] = []
    labels: list[LabelDecl] = []
    seen_names: set[str] = set()

    def declare(name: str, tok_hint):
        if name in seen_names:
            raise ParseError(f"duplicate identifier {name!r}", tok_hint.line, tok_hint.column)
        seen_names.add(name)

    while ts.peek().kind != EOF:
        if ts.at_keyword("const"):
            constants.append(_parse_const(ts, declare))
        elif ts.at_keyword("player"):
            players.append(_parse_player(ts, declare))
        elif ts.at_keyword("module"):
            modules.append(_parse_module(ts, declare))
        elif ts.at_keyword("rewards"):
            rewards.append(_parse_rewards(ts))
        elif ts.at_keyword("label"):
            labels.append(_parse_label(ts))
        else:
            raise ts.error("expected const, player, module, rewards or label")
    return ModelAst(
        tuple(constants), tuple(players), tuple(modules), tuple(rewards), tuple(labels)
    )


def _parse_const(ts, declare):
    ts.expect_keyword("const")
    ctype = "int"
    tok = ts.accept_keyword("int", "double", "bool")
    if tok:
        ctype = tok.text
    name_tok = ts.expect_ident("constant name")
    declare(name_tok.text, name_tok)
    value = None
    if ts.accept_symbol("="):
        value = parse_expression(ts)
    ts.expect_symbol(";")
    return ConstDecl(name_tok.text, ctype, value)


def _parse_player(ts, declare):
    ts.expect_keyword("player")
    name_tok = ts.expect_ident("player name")
    declare(name_tok.text, name_tok)
    modules: list[str] = []
    actions: list[str] = []
    while not ts.at_keyword("endplayer"):
        if ts.accept_symbol("["):
            actions.append(ts.expect_ident("action name").text)
            ts.expect_symbol("]")
        else:
            modules.append(ts.expect_ident("module or [action] name").text)
        if not ts.accept_symbol(","):
            break
    ts.expect_keyword("endplayer")
    return PlayerDecl(name_tok.text, tuple(modules), tuple(actions))


def _parse_module(ts, declare):
    ts.expect_keyword("module")
    name_tok = ts.expect_ident("module name")
    declare(name_tok.text, name_tok)
    variables: list[VarDecl] = []
    commands: list[Command] = []
    while not ts.at_keyword("endmodule"):
        if ts.at_symbol("["):
            commands.append(_parse_command(ts))
        elif ts.peek().kind == IDENT and ts.peek().text not in _KEYWORDS:
            variables.append(_parse_variable(ts, declare))
        else:
            raise ts.error("expected a variable declaration, command or endmodule")
    ts.expect_keyword("endmodule")
    return ModuleDecl(name_tok.text, tuple(variables), tuple(commands))


def _parse_variable(ts, declare):
    name_tok = ts.expect_ident("variable name")
    declare(name_tok.text, name_tok)
    ts.expect_symbol(":")
    if ts.accept_keyword("bool"):
        is_bool, low, high = True, None, None
    else:
        ts.expect_symbol("[")
        low = parse_expression(ts)
        ts.expect_symbol("..")
        high = parse_expression(ts)
        ts.expect_symbol("]")
        is_bool = False
    ts.expect_keyword("init")
    init = parse_expression(ts)
    ts.expect_symbol(";")
    return VarDecl(name_tok.text, is_bool, low, high, init)


def _parse_command(ts):
    ts.expect_symbol("[")
    actions = [ts.expect_ident("action name").text]
    while ts.accept_symbol(","):
        actions.append(ts.expect_ident("action name").text)
    ts.expect_symbol("]")
    guard = parse_expression(ts)
    ts.expect_symbol("->")
    updates = [_parse_update(ts)]
    while ts.accept_symbol("+"):
        updates.append(_parse_update(ts))
    ts.expect_symbol(";")
    if len(updates) == 1 and updates[0][0] is None:
        updates[0] = (Lit(1), updates[0][1])
    if any(prob is None for prob, _ in updates):
        raise ts.error("every branch of a probabilistic update needs a probability")
    return Command(tuple(actions), guard, tuple(updates))


def _parse_update(ts):
    """One `prob : assignments` branch; the probability may be omitted for
    a single deterministic branch. `true` is the empty assignment list."""
    mark = ts.pos
    prob = None
    if not ts.at_keyword("true"):
        try:
            candidate = parse_expression(ts)
            if ts.accept_symbol(":"):
                prob = candidate
            else:
                ts.pos = mark
        except ParseError:
            ts.pos = mark
    if ts.at_keyword("true"):
        ts.next()
        return (prob, ())
    assigns = [_parse_assign(ts)]
    while ts.accept_symbol("&"):
        assigns.append(_parse_assign(ts))
    return (prob, tuple(assigns))


def _parse_assign(ts):
    ts.expect_symbol("(")
    var = ts.expect_ident("variable name").text
    ts.expect_symbol("'")
    ts.expect_symbol("=")
    value = parse_expression(ts)
    ts.expect_symbol(")")
    return (var, value)


def _parse_rewards(ts):
    ts.expect_keyword("rewards")
    name = ts.expect_string()
    items: list[RewardItem] = []
    while not ts.at_keyword("endrewards"):
        actions = None
        if ts.accept_symbol("["):
            acts = [ts.expect_ident("action name").text]
            while ts.accept_symbol(","):
                acts.append(ts.expect_ident("action name").text)
            ts.expect_symbol("]")
            actions = tuple(acts)
        guard = parse_expression(ts)
        ts.expect_symbol(":")
        value = parse_expression(ts)
        ts.expect_symbol(";")
        items.append(RewardItem(actions, guard, value))
    ts.expect_keyword("endrewards")
    return RewardsDecl(name, tuple(items))


def _parse_label(ts):
    ts.expect_keyword("label")
    name = ts.expect_string()
    ts.expect_symbol("=")
    guard = parse_expression(ts)
    ts.expect_symbol(";")
    return LabelDecl(name, guard)


# --- pretty printing -----------------------------------------------------------


def print_model(ast: ModelAst) -> str:
    """Canonical source text; parse(print_model(parse(t))) == parse(t)."""
    out = ["csg", ""]
    for c in ast.constants:
        rhs = f" = {c.value}" if c.value is not None else ""
        out.append(f"const {c.type} {c.name}{rhs};")
    if ast.constants:
        out.append("")
    for p in ast.players:
        parts = list(p.modules) + [f"[{a}]" for a in p.actions]
        out.append(f"player {p.name} {', '.join(parts)} endplayer")
    if ast.players:
        out.append("")
    for m in ast.modules:
        out.append(f"module {m.name}")
        for v in m.variables:
            if v.is_bool:
                out.append(f"  {v.name} : bool init {v.init};")
            else:
                out.append(f"  {v.name} : [{v.low}..{v.high}] init {v.init};")
        for cmd in m.commands:
            branches = []
            for prob, assigns in cmd.updates:
                body = " & ".join(f"({var}'={value})" for var, value in assigns) or "true"
                branches.append(f"{_prob_prefix(prob)}{body}")
            out.append(
                f"  [{','.join(cmd.actions)}] {cmd.guard} -> {' + '.join(branches)};"
            )
        out.append("endmodule")
        out.append("")
    for r in ast.rewards:
        out.append(f'rewards "{r.name}"')
        for item in r.items:
            prefix = f"[{','.join(item.actions)}] " if item.actions is not None else ""
            out.append(f"  {prefix}{item.guard} : {item.value};")
        out.append("endrewards")
        out.append("")
    for lab in ast.labels:
        out.append(f'label "{lab.name}" = {lab.guard};')
    return "\n".join(out).rstrip() + "\n"


def _prob_prefix(prob: Expr) -> str:
    if isinstance(prob, Lit) and prob.value == 1:
        return "1:"
    return f"{prob}:"
