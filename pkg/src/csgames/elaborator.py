"""Explicit-game construction from a parsed model.

Semantics of a joint step, given each player's chosen action (or idle):

  * an action of player P is available in a state iff some command with
    that action as its whole (singleton) action list is enabled in a
    module owned by P; actions granted to a player via an explicit
    `[action]` listing may draw availability from unowned modules too;
  * every enabled command (in any module) whose action list is a subset
    of the chosen non-idle actions fires; commands of unowned shared
    modules react this way to one or several players' actions;
  * the probabilistic branches of all firing commands compose
    independently (probabilities multiply, assignments merge); two firing
    commands assigning the same variable is an elaboration error;
  * variables not assigned keep their value; if nothing fires the state
    self-loops.

Exploration is breadth-first from the initial valuation; only reachable
states are emitted, in deterministic order.
"""

from __future__ import annotations

import itertools
from collections import deque

from .csg import Csg
from .errors import InputError
from .expr import EvalError, Expr, Lit
from .modlang import Command, ModelAst, ModuleDecl

PROB_SUM_TOL = 1e-12


class ElaborationError(InputError):
    pass


def resolve_constants(ast: ModelAst, bindings: dict | None = None) -> dict:
    """Constant environment after applying command-line bindings.

    Bindings override declared defaults and must cover every constant
    declared without a value.
    """
    bindings = dict(bindings or {})
    env: dict[str, object] = {}
    pending = {c.name: c for c in ast.constants}
    for name, value in bindings.items():
        if name not in pending:
            raise InputError(f"-const binding for undeclared constant {name!r}")
    for _ in range(len(pending) + 1):
        progressed = False
        for name, decl in list(pending.items()):
            if name in bindings:
                env[name] = _coerce_constant(decl, bindings[name])
                del pending[name]
                progressed = True
                continue
            if decl.value is None:
                continue
            try:
                env[name] = _coerce_constant(decl, decl.value.evaluate(env))
            except EvalError:
                continue
            del pending[name]
            progressed = True
        if not progressed:
            break
    unresolved = [n for n, d in pending.items()]
    if unresolved:
        raise InputError(
            "unresolved constants (bind with -const): " + ", ".join(sorted(unresolved))
        )
    return env


def _coerce_constant(decl, value):
    if isinstance(value, str):
        text = value.strip()
        if decl.type == "bool":
            if text in ("true", "false"):
                value = text == "true"
            else:
                raise InputError(f"constant {decl.name!r}: expected true/false, got {text!r}")
        elif decl.type == "double":
            value = float(text)
        else:
            try:
                value = int(text)
            except ValueError:
                raise InputError(f"constant {decl.name!r}: expected an integer, got {text!r}")
    if decl.type == "bool" and not isinstance(value, bool):
        raise InputError(f"constant {decl.name!r} must be boolean")
    if decl.type == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise InputError(f"constant {decl.name!r} must be an integer")
    if decl.type == "double":
        if isinstance(value, bool):
            raise InputError(f"constant {decl.name!r} must be numeric")
        value = float(value)
    return value


class _Variable:
    __slots__ = ("name", "is_bool", "low", "high", "init", "module")

    def __init__(self, name, is_bool, low, high, init, module):
        self.name = name
        self.is_bool = is_bool
        self.low = low
        self.high = high
        self.init = init
        self.module = module


def elaborate(ast: ModelAst, constant_bindings: dict | None = None) -> Csg:
    consts = resolve_constants(ast, constant_bindings)
    variables = _collect_variables(ast, consts)
    var_order = [v.name for v in variables]
    owner_of_module = {}
    for player in ast.players:
        for mod in player.modules:
            if mod not in {m.name for m in ast.modules}:
                raise InputError(f"player {player.name!r} lists unknown module {mod!r}")
            if mod in owner_of_module:
                raise InputError(f"module {mod!r} owned by two players")
            owner_of_module[mod] = player.name
    if not ast.players:
        raise InputError("a model needs at least one player")

    # Action ownership: singleton commands of owned modules, plus explicit
    # grants. Every action used anywhere must end up owned.
    player_names = [p.name for p in ast.players]
    owner_of_action: dict[str, str] = {}
    for player in ast.players:
        for action in player.actions:
            _claim(owner_of_action, action, player.name)
    for module in ast.modules:
        owner = owner_of_module.get(module.name)
        for cmd in module.commands:
            if owner is not None:
                if len(cmd.actions) != 1:
                    raise InputError(
                        f"module {module.name!r} (owned by {owner!r}): commands in "
                        f"player-owned modules take exactly one action label"
                    )
                _claim(owner_of_action, cmd.actions[0], owner)
    for module in ast.modules:
        for cmd in module.commands:
            for action in cmd.actions:
                if action not in owner_of_action:
                    raise InputError(
                        f"action {action!r} in module {module.name!r} is not owned by any player"
                    )
    action_sets = [
        tuple(sorted(a for a, p in owner_of_action.items() if p == name))
        for name in player_names
    ]

    # Availability sources per action.
    avail_commands: dict[str, list[tuple[ModuleDecl, Command]]] = {a: [] for a in owner_of_action}
    for module in ast.modules:
        owner = owner_of_module.get(module.name)
        for cmd in module.commands:
            if len(cmd.actions) != 1:
                continue
            action = cmd.actions[0]
            if owner is not None and owner == owner_of_action.get(action):
                avail_commands[action].append((module, cmd))
            elif owner is None and _explicitly_granted(ast, action):
                avail_commands[action].append((module, cmd))

    init_env = dict(consts)
    for v in variables:
        init_env[v.name] = v.init

    state_key = lambda env: tuple(env[name] for name in var_order)

    def state_name(key) -> str:
        parts = []
        for name, value in zip(var_order, key):
            if isinstance(value, bool):
                parts.append(f"{name}={'true' if value else 'false'}")
            else:
                parts.append(f"{name}={value}")
        return "(" + ",".join(parts) + ")"

    initial_key = state_key(init_env)
    order: list[tuple] = [initial_key]
    seen = {initial_key}
    queue = deque([initial_key])
    transitions: dict[tuple[str, tuple], list[tuple[str, float]]] = {}
    firing_cache: dict[tuple, list] = {}

    var_by_name = {v.name: v for v in variables}

    while queue:
        key = queue.popleft()
        env = dict(consts)
        env.update(zip(var_order, key))
        sname = state_name(key)

        enabled_cmds = []
        for module in ast.modules:
            for cmd in module.commands:
                try:
                    if cmd.guard.evaluate(env) is True:
                        enabled_cmds.append((module, cmd))
                except EvalError as exc:
                    raise ElaborationError(
                        f"state {sname}: guard of a [{','.join(cmd.actions)}] command in "
                        f"module {module.name!r}: {exc}"
                    ) from None

        per_player: list[list[str | None]] = []
        for pname, actions in zip(player_names, action_sets):
            enabled = [
                a
                for a in actions
                if any(
                    cmd.guard.evaluate(env) is True for _, cmd in avail_commands[a]
                )
            ]
            per_player.append(enabled if enabled else [None])

        for alpha in itertools.product(*per_player):
            chosen = {a for a in alpha if a is not None}
            firing = [
                (module, cmd)
                for module, cmd in enabled_cmds
                if set(cmd.actions) <= chosen
            ]
            _check_write_conflicts(firing, sname)
            distribution = _compose(firing, env, sname, var_by_name, consts)
            entry: dict[tuple, float] = {}
            for prob, assigns in distribution:
                new_env = dict(zip(var_order, key))
                for var, value in assigns.items():
                    new_env[var] = value
                succ_key = tuple(new_env[name] for name in var_order)
                entry[succ_key] = entry.get(succ_key, 0.0) + prob
            total = sum(entry.values())
            if abs(total - 1.0) > 1e-9:
                raise ElaborationError(
                    f"state {sname}, joint action {tuple(chosen)}: probabilities sum to {total}"
                )
            succs = []
            for succ_key in sorted(entry, key=lambda k: tuple(map(_sort_key, k))):
                if succ_key not in seen:
                    seen.add(succ_key)
                    order.append(succ_key)
                    queue.append(succ_key)
                succs.append((state_name(succ_key), entry[succ_key]))
            transitions[(sname, alpha)] = succs

    state_names = [state_name(k) for k in order]
    labels = {}
    valuations = {}
    for key, sname in zip(order, state_names):
        env = dict(consts)
        env.update(zip(var_order, key))
        labs = set()
        for lab in ast.labels:
            try:
                if lab.guard.evaluate(env) is True:
                    labs.add(lab.name)
            except EvalError as exc:
                raise ElaborationError(f'label "{lab.name}": {exc}') from None
        if labs:
            labels[sname] = labs
        valuations[sname] = dict(zip(var_order, key))

    rewards = []
    for block in ast.rewards:
        state_rewards = {}
        action_rewards = {}
        for key, sname in zip(order, state_names):
            env = dict(consts)
            env.update(zip(var_order, key))
            for item in block.items:
                try:
                    if item.guard.evaluate(env) is not True:
                        continue
                    value = float(item.value.evaluate(env))
                except EvalError as exc:
                    raise ElaborationError(f'rewards "{block.name}": {exc}') from None
                if item.actions is None:
                    state_rewards[sname] = state_rewards.get(sname, 0.0) + value
        for (sname, alpha), _ in transitions.items():
            env = dict(consts)
            env.update(valuations[sname])
            chosen = {a for a in alpha if a is not None}
            for item in block.items:
                if item.actions is None:
                    continue
                if not set(item.actions) <= chosen:
                    continue
                try:
                    if item.guard.evaluate(env) is not True:
                        continue
                    value = float(item.value.evaluate(env))
                except EvalError as exc:
                    raise ElaborationError(f'rewards "{block.name}": {exc}') from None
                action_rewards[(sname, alpha)] = (
                    action_rewards.get((sname, alpha), 0.0) + value
                )
        rewards.append((block.name, state_rewards, action_rewards))

    return Csg(
        players=player_names,
        action_sets=action_sets,
        states=state_names,
        initial=state_names[0],
        transitions=transitions,
        labels=labels,
        rewards=rewards,
        valuations=valuations,
    )


def _sort_key(v):
    return (0, int(v)) if isinstance(v, bool) else (1, v)


def _claim(owner_of_action, action, player):
    prior = owner_of_action.get(action)
    if prior is not None and prior != player:
        raise InputError(f"action {action!r} claimed by players {prior!r} and {player!r}")
    owner_of_action[action] = player


def _explicitly_granted(ast, action):
    return any(action in p.actions for p in ast.players)


def _collect_variables(ast: ModelAst, consts) -> list[_Variable]:
    variables = []
    seen = set()
    for module in ast.modules:
        for decl in module.variables:
            if decl.name in seen:
                raise InputError(f"variable {decl.name!r} declared twice")
            seen.add(decl.name)
            if decl.is_bool:
                init = decl.init.evaluate(consts)
                if not isinstance(init, bool):
                    raise InputError(f"variable {decl.name!r}: init must be boolean")
                variables.append(_Variable(decl.name, True, None, None, init, module.name))
            else:
                low = decl.low.evaluate(consts)
                high = decl.high.evaluate(consts)
                init = decl.init.evaluate(consts)
                for v, what in ((low, "lower bound"), (high, "upper bound"), (init, "init")):
                    if isinstance(v, bool) or not isinstance(v, int):
                        raise InputError(f"variable {decl.name!r}: {what} must be an integer")
                if low > high:
                    raise InputError(f"variable {decl.name!r}: empty range [{low}..{high}]")
                if not low <= init <= high:
                    raise InputError(f"variable {decl.name!r}: init {init} outside range")
                variables.append(_Variable(decl.name, False, low, high, init, module.name))
    if not variables:
        raise InputError("a model needs at least one variable")
    return variables


def _check_write_conflicts(firing, sname):
    written: dict[str, str] = {}
    for module, cmd in firing:
        vars_here = {var for _, assigns in cmd.updates for var, _ in assigns}
        for var in vars_here:
            if var in written:
                raise ElaborationError(
                    f"state {sname}: variable {var!r} written by two commands firing "
                    f"in one joint step (modules {written[var]!r} and {module.name!r})"
                )
            written[var] = module.name


def _compose(firing, env, sname, var_by_name, consts):
    """Product of the firing commands' probabilistic branches.

    Returns [(probability, {var: value})]; assignments are evaluated in
    the source state environment (no primed reads).
    """
    result = [(1.0, {})]
    for module, cmd in firing:
        evaluated = []
        total = 0.0
        for prob_expr, assigns in cmd.updates:
            try:
                p = prob_expr.evaluate(env)
            except EvalError as exc:
                raise ElaborationError(
                    f"state {sname}, module {module.name!r}: probability expression: {exc}"
                ) from None
            if isinstance(p, bool) or not isinstance(p, (int, float)):
                raise ElaborationError(
                    f"state {sname}, module {module.name!r}: probability is not numeric"
                )
            p = float(p)
            if p < -PROB_SUM_TOL or p > 1.0 + PROB_SUM_TOL:
                raise ElaborationError(
                    f"state {sname}, module {module.name!r}: probability {p} outside [0,1]"
                )
            total += p
            values = {}
            for var, expr in assigns:
                decl = var_by_name.get(var)
                if decl is None:
                    raise ElaborationError(
                        f"state {sname}, module {module.name!r}: assignment to unknown "
                        f"variable {var!r}"
                    )
                if decl.module != module.name:
                    raise ElaborationError(
                        f"state {sname}: module {module.name!r} assigns variable {var!r} "
                        f"of module {decl.module!r} (updates are module-local)"
                    )
                try:
                    value = expr.evaluate(env)
                except EvalError as exc:
                    raise ElaborationError(
                        f"state {sname}, module {module.name!r}, ({var}'=...): {exc}"
                    ) from None
                if decl.is_bool:
                    if not isinstance(value, bool):
                        raise ElaborationError(
                            f"state {sname}: ({var}'=...) needs a boolean value"
                        )
                else:
                    if isinstance(value, bool) or not isinstance(value, int):
                        raise ElaborationError(
                            f"state {sname}: ({var}'=...) needs an integer value "
                            f"(got {value!r}; use floor/ceil for reals)"
                        )
                    if not decl.low <= value <= decl.high:
                        raise ElaborationError(
                            f"state {sname}, command [{','.join(cmd.actions)}] of module "
                            f"{module.name!r}: value {value} for {var!r} outside "
                            f"[{decl.low}..{decl.high}]"
                        )
                values[var] = value
            if p > 0.0:
                evaluated.append((p, values))
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ElaborationError(
                f"state {sname}, command [{','.join(cmd.actions)}] of module "
                f"{module.name!r}: branch probabilities sum to {total}"
            )
        result = [
            (p0 * p1, {**v0, **v1}) for p0, v0 in result for p1, v1 in evaluated
        ]
    return result
