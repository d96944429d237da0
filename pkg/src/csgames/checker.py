"""Model checking engine for coalition values and optimal equilibria.

Zero-sum queries build the two-coalition game and solve one matrix game
per state: exactly, stage by stage, for finite-horizon operators, and by
value iteration from zero for infinite-horizon ones (after a qualitative
graph analysis that pins probability-zero and infinite-reward states).
Nonzero-sum queries solve one optimal-equilibrium game per state, over a
product with objective-satisfaction flags in the infinite-horizon case.

Within a sweep every state reads the previous iterate, so per-state work
is order-independent; results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csg import CoalitionPartition, Csg, build_coalition_game
from .equilibria import EquilibriumQuery, solve_equilibrium
from .errors import InputError, NonconvergenceError, SolverError
from .expr import EvalError, Expr
from .games import NormalFormGame
from .lp import solve_matrix
from .proplang import (
    And,
    Atom,
    BoolLit,
    Cumulative,
    EquilibriumOp,
    Instant,
    Next,
    Not,
    PathObjective,
    Predicate,
    ReachReward,
    RewardObjective,
    StateFormula,
    Until,
    ZeroSumProb,
    ZeroSumReward,
)

DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITERS = 10**6


@dataclass
class SynthesizedStrategy:
    """Per-(state, memory) decisions for every coalition.

    kind "profile": entries hold one action distribution per coalition.
    kind "joint": entries hold a distribution over coalition action
    tuples (shared-signal strategies). Memory is the remaining step count
    for finite-horizon queries, objective-satisfaction flags for
    infinite-horizon equilibria, and trivial otherwise.
    """

    kind: str  # "profile" | "joint"
    coalitions: tuple[str, ...]
    memory_kind: str  # "none" | "steps" | "flags"
    entries: dict = field(default_factory=dict)
    initial_memory: object = None

    def decision(self, state, memory):
        return self.entries.get((state, memory))


@dataclass
class CheckResult:
    query: str
    value: object  # float for numeric queries, bool for bounded ones
    numeric_value: float | None
    values: object  # per-state vector, or dict for flag-product queries
    strategy: SynthesizedStrategy | None
    iterations: int
    residual: float

    # The game the strategy lives on (coalition game) for evaluation.
    coalition_game: Csg | None = None
    partition: CoalitionPartition | None = None
    # Per-coalition value vectors for equilibrium queries ("initial" key or
    # state-indexed array).
    coalition_values: object = None
    formula: object = None


# --- helpers -------------------------------------------------------------------


def _resolve_step_bound(expr: Expr, constants) -> int:
    try:
        value = expr.evaluate(dict(constants or {}))
    except EvalError as exc:
        raise InputError(f"step bound: {exc}") from None
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"step bound must be an integer, got {value!r}")
    if value < 0:
        raise InputError("step bounds must be nonnegative")
    return value


def _resolve_threshold(expr: Expr, constants) -> float:
    try:
        value = expr.evaluate(dict(constants or {}))
    except EvalError as exc:
        raise InputError(f"threshold: {exc}") from None
    if isinstance(value, bool):
        raise InputError("threshold must be numeric")
    return float(value)


def _compare(value: float, relation: str, threshold: float) -> bool:
    return {
        "<": value < threshold,
        "<=": value <= threshold,
        ">": value > threshold,
        ">=": value >= threshold,
    }[relation]


def evaluate_state_set(game: Csg, formula: StateFormula, constants=None, depth=0,
                       epsilon=DEFAULT_EPSILON, max_iters=DEFAULT_MAX_ITERS) -> frozenset:
    """States satisfying a boolean state formula.

    Game operators are admitted one level deep; the numeric `=?` forms
    have no truth value and are rejected as subformulae.
    """
    env_base = dict(constants or {})
    if isinstance(formula, BoolLit):
        return frozenset(range(game.num_states)) if formula.value else frozenset()
    if isinstance(formula, Atom):
        return frozenset(
            s for s in range(game.num_states) if formula.name in game.labels[s]
        )
    if isinstance(formula, Predicate):
        out = set()
        for s in range(game.num_states):
            env = dict(env_base)
            env.update(game.valuations[s])
            try:
                value = formula.expr.evaluate(env)
            except EvalError as exc:
                raise InputError(f"predicate {formula.expr}: {exc}") from None
            if not isinstance(value, bool):
                raise InputError(f"predicate {formula.expr} is not boolean")
            if value:
                out.add(s)
        return frozenset(out)
    if isinstance(formula, Not):
        inner = evaluate_state_set(game, formula.sub, constants, depth, epsilon, max_iters)
        return frozenset(range(game.num_states)) - inner
    if isinstance(formula, And):
        return evaluate_state_set(
            game, formula.left, constants, depth, epsilon, max_iters
        ) & evaluate_state_set(game, formula.right, constants, depth, epsilon, max_iters)
    if isinstance(formula, (ZeroSumProb, ZeroSumReward)):
        if depth >= 1:
            raise InputError("unsupported nesting depth for game operators")
        if formula.bound is None:
            raise InputError("a numeric =? query has no truth value as a subformula")
        result = check_zero_sum_formula(
            game, formula, constants, epsilon=epsilon, max_iters=max_iters
        )
        rel, expr = formula.bound
        threshold = _resolve_threshold(expr, constants)
        return frozenset(
            s
            for s in range(game.num_states)
            if _compare(result.values[s], rel, threshold)
        )
    if isinstance(formula, EquilibriumOp):
        if depth >= 1:
            raise InputError("unsupported nesting depth for game operators")
        if formula.bound is None:
            raise InputError("a numeric =? query has no truth value as a subformula")
        result = check_equilibrium_formula(
            game, formula, constants, epsilon=epsilon, max_iters=max_iters
        )
        sums = result.values
        if isinstance(sums, dict):
            raise InputError(
                "bounded infinite-horizon equilibrium operators are only "
                "supported at the top level"
            )
        rel, expr = formula.bound
        threshold = _resolve_threshold(expr, constants)
        return frozenset(
            s for s in range(game.num_states) if _compare(sums[s], rel, threshold)
        )
    raise InputError(f"cannot evaluate formula {formula}")


# --- qualitative analysis --------------------------------------------------------


def prob0_max(game: Csg, target: frozenset | set, safe=None) -> frozenset:
    """States where the maximiser (player 0 of a 2-coalition game) cannot
    reach the target with positive probability however it plays.

    Greatest fixpoint: keep states where the opponent has an action that,
    against every maximiser action, stays inside the kept set. States
    outside `safe` (when given) count as sinks of the kept region.
    """
    if game.num_players > 2:
        raise InputError("qualitative analysis expects a 2-coalition game")
    all_states = frozenset(range(game.num_states))
    target = frozenset(target)
    safe = all_states if safe is None else frozenset(safe)
    kept = set(all_states - target)
    changed = True
    while changed:
        changed = False
        for s in list(kept):
            if s not in safe:
                continue  # a value-zero sink stays kept
            if not _opponent_confines(game, s, kept):
                kept.discard(s)
                changed = True
    return frozenset(kept)


def _opponent_confines(game: Csg, s: int, kept: set) -> bool:
    rows = game.available(s, 0)
    cols = game.available(s, 1) if game.num_players == 2 else (0,)
    for b in cols:
        ok = True
        for a in rows:
            alpha = (a, b) if game.num_players == 2 else (a,)
            succs = game.successors(s, alpha)
            if any(t not in kept for t, p in succs if p > 0.0):
                ok = False
                break
        if ok:
            return True
    return False


def _controller_confines(game: Csg, s: int, kept: set) -> bool:
    """Player 0 has an action keeping all successors inside `kept`."""
    rows = game.available(s, 0)
    cols = game.available(s, 1) if game.num_players == 2 else (0,)
    for a in rows:
        ok = True
        for b in cols:
            alpha = (a, b) if game.num_players == 2 else (a,)
            if any(t not in kept for t, p in game.successors(s, alpha) if p > 0.0):
                ok = False
                break
        if ok:
            return True
    return False


def _sure_avoid(game: Csg, target: frozenset, controller_is_row: bool) -> frozenset:
    """States from which one side can surely confine play away from target."""
    kept = set(frozenset(range(game.num_states)) - target)
    confines = _controller_confines if controller_is_row else _opponent_confines
    changed = True
    while changed:
        changed = False
        for s in list(kept):
            if not confines(game, s, kept):
                kept.discard(s)
                changed = True
    return frozenset(kept)


def _infinite_reward_states(game: Csg, target: frozenset, row_maximizes_reward: bool) -> frozenset:
    """States with infinite optimal expected reward to `target`.

    Seed: the reward-maximising side can surely avoid the target forever.
    Closure: states where that side forces a positive probability of
    entering the seeded region, whatever the other side does.
    """
    region = set(_sure_avoid(game, target, controller_is_row=row_maximizes_reward))
    changed = True
    while changed:
        changed = False
        for s in range(game.num_states):
            if s in region or s in target:
                continue
            rows = game.available(s, 0)
            cols = game.available(s, 1) if game.num_players == 2 else (0,)
            if row_maximizes_reward:
                # for every column some row hits the region
                hit = all(
                    any(
                        any(t in region for t, p in game.successors(
                            s, (a, b) if game.num_players == 2 else (a,)) if p > 0.0)
                        for a in rows
                    )
                    for b in cols
                )
            else:
                hit = all(
                    any(
                        any(t in region for t, p in game.successors(
                            s, (a, b) if game.num_players == 2 else (a,)) if p > 0.0)
                        for b in cols
                    )
                    for a in rows
                )
            if hit:
                region.add(s)
                changed = True
    return frozenset(region)


# --- zero-sum checking -----------------------------------------------------------


def _two_coalition_game(game: Csg, coalition: tuple[str, ...]):
    for p in coalition:
        if p not in game.players:
            raise InputError(f"unknown player {p!r} in coalition")
    if not coalition:
        raise InputError("empty coalition")
    partition = CoalitionPartition((tuple(coalition),))
    lifted = build_coalition_game(game, partition)
    return lifted, partition


class _ZeroSumEngine:
    """Stage solver for one zero-sum query on a 2-coalition game."""

    def __init__(self, game2: Csg, maximize: bool):
        self.game = game2
        self.sign = 1.0 if maximize else -1.0
        self.two = game2.num_players == 2

    def local_solve(self, s, value_of_entry):
        """Solve the state's matrix game; returns (value, row, col dists)."""
        rows = self.game.available(s, 0)
        cols = self.game.available(s, 1) if self.two else (0,)
        z = np.empty((len(rows), len(cols)))
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                alpha = (a, b) if self.two else (a,)
                z[i, j] = value_of_entry(s, alpha)
        value, x, y = solve_matrix(self.sign * z)
        return self.sign * value, rows, x, cols, y

    def expected(self, s, alpha, v):
        return sum(p * v[t] for t, p in self.game.successors(s, alpha))


def check_zero_sum_formula(game: Csg, formula, constants=None,
                           epsilon=DEFAULT_EPSILON, max_iters=DEFAULT_MAX_ITERS) -> CheckResult:
    """Coalition value of a probability or reward query, with strategy."""
    constants = dict(constants or {})
    coalition = formula.coalition
    game2, partition = _two_coalition_game(game, coalition)

    if formula.bound is not None:
        rel = formula.bound[0]
        direction = formula.query or ("max" if rel in (">", ">=") else "min")
    else:
        direction = formula.query
        if direction is None:
            raise InputError("numeric value queries need a direction (max=? or min=?)")
    maximize = direction == "max"

    if isinstance(formula, ZeroSumProb):
        values, strategy, iters, residual = _prob_value(
            game2, formula.path, constants, maximize, epsilon, max_iters
        )
    else:
        reward = game2.reward_structure(formula.reward)
        values, strategy, iters, residual = _reward_value(
            game2, reward, formula.formula, constants, maximize, epsilon, max_iters
        )

    numeric = float(values[game2.initial])
    if formula.bound is not None:
        rel, expr = formula.bound
        payload = _compare(numeric, rel, _resolve_threshold(expr, constants))
    else:
        payload = numeric
    return CheckResult(
        query=str(formula),
        value=payload,
        numeric_value=numeric,
        values=values,
        strategy=strategy,
        iterations=iters,
        residual=residual,
        coalition_game=game2,
        partition=partition,
        formula=formula,
    )


def _new_strategy(game2, memory_kind):
    return SynthesizedStrategy(
        kind="profile",
        coalitions=game2.players,
        memory_kind=memory_kind,
        entries={},
    )


def _record_profile(strategy, game2, s, memory, rows, x, cols, y):
    dists = [
        {game2.action_names[0][a]: float(p) for a, p in zip(rows, x) if p > 0.0}
    ]
    if game2.num_players == 2:
        dists.append(
            {game2.action_names[1][b]: float(p) for b, p in zip(cols, y) if p > 0.0}
        )
    strategy.entries[(s, memory)] = dists


def _prob_value(game2, path, constants, maximize, epsilon, max_iters):
    engine = _ZeroSumEngine(game2, maximize)
    n = game2.num_states

    if isinstance(path, Next):
        target = evaluate_state_set(game2, path.sub, constants, depth=1)
        ind = np.array([1.0 if s in target else 0.0 for s in range(n)])
        values = np.zeros(n)
        strategy = _new_strategy(game2, "steps")
        strategy.initial_memory = 1
        for s in range(n):
            value, rows, x, cols, y = engine.local_solve(
                s, lambda st, alpha: engine.expected(st, alpha, ind)
            )
            values[s] = value
            _record_profile(strategy, game2, s, 1, rows, x, cols, y)
        return values, strategy, 1, 0.0

    assert isinstance(path, Until)
    safe = evaluate_state_set(game2, path.left, constants, depth=1)
    target = evaluate_state_set(game2, path.right, constants, depth=1)

    if path.bound is not None:
        k = _resolve_step_bound(path.bound, constants)
        v = np.array([1.0 if s in target else 0.0 for s in range(n)])
        strategy = _new_strategy(game2, "steps")
        strategy.initial_memory = k
        for stage in range(1, k + 1):
            nv = np.empty(n)
            prev = v
            for s in range(n):
                if s in target:
                    nv[s] = 1.0
                    continue
                if s not in safe:
                    nv[s] = 0.0
                    continue
                value, rows, x, cols, y = engine.local_solve(
                    s, lambda st, alpha: engine.expected(st, alpha, prev)
                )
                nv[s] = value
                _record_profile(strategy, game2, s, stage, rows, x, cols, y)
            v = nv
        return v, strategy, k, 0.0

    # Unbounded until: mask value-zero states, then iterate to fixpoint.
    if maximize:
        zero = prob0_max(game2, target, safe)
    else:
        swapped = _swap_players(game2)
        zero = prob0_max(swapped, target, safe)
    v = np.array([1.0 if s in target else 0.0 for s in range(n)])
    undecided = [s for s in range(n) if s not in target and s not in zero and s in safe]
    iters = 0
    residual = 0.0
    while True:
        if iters >= max_iters:
            raise NonconvergenceError(
                f"value iteration did not converge within {max_iters} sweeps",
                residual=residual,
                iterations=iters,
            )
        iters += 1
        prev = v.copy()
        residual = 0.0
        for s in undecided:
            value, *_ = engine.local_solve(
                s, lambda st, alpha: engine.expected(st, alpha, prev)
            )
            v[s] = value
            residual = max(residual, abs(value - prev[s]))
        if residual < epsilon:
            break
    strategy = _new_strategy(game2, "none")
    for s in undecided:
        value, rows, x, cols, y = engine.local_solve(
            s, lambda st, alpha: engine.expected(st, alpha, v)
        )
        _record_profile(strategy, game2, s, None, rows, x, cols, y)
    for s in range(n):
        if (s, None) not in strategy.entries:
            _record_default(strategy, game2, s, None)
    return v, strategy, iters, residual


def _reward_value(game2, reward, formula, constants, maximize, epsilon, max_iters):
    engine = _ZeroSumEngine(game2, maximize)
    n = game2.num_states

    if isinstance(formula, Instant):
        k = _resolve_step_bound(formula.step, constants)
        v = np.array([reward.state_reward(s) for s in range(n)])
        strategy = _new_strategy(game2, "steps")
        strategy.initial_memory = k
        for stage in range(1, k + 1):
            prev = v
            nv = np.empty(n)
            for s in range(n):
                value, rows, x, cols, y = engine.local_solve(
                    s, lambda st, alpha: engine.expected(st, alpha, prev)
                )
                nv[s] = value
                _record_profile(strategy, game2, s, stage, rows, x, cols, y)
            v = nv
        return v, strategy, k, 0.0

    if isinstance(formula, Cumulative):
        k = _resolve_step_bound(formula.bound, constants)
        v = np.zeros(n)
        strategy = _new_strategy(game2, "steps")
        strategy.initial_memory = k
        for stage in range(1, k + 1):
            prev = v
            nv = np.empty(n)
            for s in range(n):
                value, rows, x, cols, y = engine.local_solve(
                    s,
                    lambda st, alpha: reward.state_reward(st)
                    + reward.action_reward(st, alpha)
                    + engine.expected(st, alpha, prev),
                )
                nv[s] = value
                _record_profile(strategy, game2, s, stage, rows, x, cols, y)
            v = nv
        return v, strategy, k, 0.0

    assert isinstance(formula, ReachReward)
    target = evaluate_state_set(game2, formula.target, constants, depth=1)
    infinite = _infinite_reward_states(game2, target, row_maximizes_reward=maximize)
    v = np.zeros(n)
    for s in infinite:
        v[s] = np.inf
    undecided = [s for s in range(n) if s not in target and s not in infinite]

    def entry(st, alpha, prev):
        total = reward.state_reward(st) + reward.action_reward(st, alpha)
        for t, p in game2.successors(st, alpha):
            if prev[t] == np.inf:
                return np.inf
            total += p * prev[t]
        return total

    def masked_solve(s, prev):
        rows = game2.available(s, 0)
        cols = game2.available(s, 1) if engine.two else (0,)
        z = np.empty((len(rows), len(cols)))
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                alpha = (a, b) if engine.two else (a,)
                z[i, j] = entry(s, alpha, prev)
        if maximize:
            finite_cols = [j for j in range(len(cols)) if not np.isinf(z[:, j]).any()]
            if not finite_cols:
                return np.inf, rows, np.ones(len(rows)) / len(rows), cols, None
            zr = z[:, finite_cols]
            value, x, y_sub = solve_matrix(zr)
            y = np.zeros(len(cols))
            for jj, j in enumerate(finite_cols):
                y[j] = y_sub[jj]
            return value, rows, x, cols, y
        finite_rows = [i for i in range(len(rows)) if not np.isinf(z[i, :]).any()]
        if not finite_rows:
            return np.inf, rows, None, cols, np.ones(len(cols)) / len(cols)
        zr = z[finite_rows, :]
        value, x_sub, y = solve_matrix(-zr)
        x = np.zeros(len(rows))
        for ii, i in enumerate(finite_rows):
            x[i] = x_sub[ii]
        return -value, rows, x, cols, y

    iters = 0
    residual = 0.0
    while True:
        if iters >= max_iters:
            raise NonconvergenceError(
                f"value iteration did not converge within {max_iters} sweeps",
                residual=residual,
                iterations=iters,
            )
        iters += 1
        prev = v.copy()
        residual = 0.0
        for s in undecided:
            value, *_ = masked_solve(s, prev)
            v[s] = value
            if np.isinf(value) and np.isinf(prev[s]):
                continue
            residual = max(residual, abs(value - prev[s]))
        if residual < epsilon:
            break
    strategy = _new_strategy(game2, "none")
    for s in undecided:
        value, rows, x, cols, y = masked_solve(s, v)
        if x is None or y is None:
            _record_default(strategy, game2, s, None)
        else:
            _record_profile(strategy, game2, s, None, rows, x, cols, y)
    for s in range(n):
        if (s, None) not in strategy.entries:
            _record_default(strategy, game2, s, None)
    return v, strategy, iters, residual


def _record_default(strategy, game2, s, memory):
    """Deterministic first-available action; used where the value does not
    depend on play (targets, masked states)."""
    dists = []
    for i in range(game2.num_players):
        a = game2.available(s, i)[0]
        dists.append({game2.action_names[i][a]: 1.0})
    strategy.entries[(s, memory)] = dists


def _swap_players(game2: Csg) -> Csg:
    """The same game with the two coalitions swapped."""
    if game2.num_players == 1:
        return game2
    transitions = {}
    for (s, alpha), succs in game2.transition_items():
        names = tuple(
            None if a == 0 else game2.action_names[i][a] for i, a in enumerate(alpha)
        )
        transitions[(game2.state_names[s], (names[1], names[0]))] = [
            (game2.state_names[t], p) for t, p in succs
        ]
    return Csg(
        players=[game2.players[1], game2.players[0]],
        action_sets=[game2.action_names[1][1:], game2.action_names[0][1:]],
        states=game2.state_names,
        initial=game2.state_names[game2.initial],
        transitions=transitions,
        labels={
            s: set(labs) for s, labs in zip(game2.state_names, game2.labels) if labs
        },
        valuations={s: v for s, v in zip(game2.state_names, game2.valuations) if v},
    )


# --- optimal equilibria ----------------------------------------------------------


def check_equilibrium_formula(game: Csg, formula: EquilibriumOp, constants=None,
                              epsilon=DEFAULT_EPSILON, max_iters=DEFAULT_MAX_ITERS) -> CheckResult:
    constants = dict(constants or {})
    partition = CoalitionPartition(formula.coalitions)
    if set(partition.members) != set(game.players):
        # uncovered players join as an extra coalition, but then objective
        # arities no longer line up; demand full coverage here.
        missing = set(game.players) - set(partition.members)
        raise InputError(
            f"equilibrium queries must partition all players; missing {sorted(missing)}"
        )
    gameC = build_coalition_game(game, partition)
    m = len(formula.coalitions)
    if m < 2:
        raise InputError("equilibrium queries need at least two coalitions")

    horizons = [_objective_horizon(obj, constants) for obj in formula.objectives]
    if all(h is not None for h in horizons):
        values, sums, strategy, iters, residual = _equilibria_finite(
            gameC, formula, constants, horizons
        )
    elif all(h is None for h in horizons):
        if m != 2:
            raise InputError(
                "infinite-horizon equilibrium queries support exactly two coalitions"
            )
        values, sums, strategy, iters, residual = _equilibria_infinite(
            gameC, formula, constants, epsilon, max_iters
        )
    else:
        raise InputError(
            "objectives must be all finite-horizon or all infinite-horizon"
        )

    numeric = float(sums[gameC.initial]) if not isinstance(sums, dict) else float(
        sums["initial"]
    )
    if formula.bound is not None:
        rel, expr = formula.bound
        payload = _compare(numeric, rel, _resolve_threshold(expr, constants))
    else:
        payload = numeric
    return CheckResult(
        query=str(formula),
        value=payload,
        numeric_value=numeric,
        values=sums,
        strategy=strategy,
        iterations=iters,
        residual=residual,
        coalition_game=gameC,
        partition=partition,
        coalition_values=values,
        formula=formula,
    )


def _objective_horizon(obj, constants):
    """Steps of a finite-horizon objective, or None for unbounded ones."""
    if isinstance(obj, PathObjective):
        path = obj.path
        if isinstance(path, Next):
            return 1
        if isinstance(path, Until):
            if path.bound is None:
                return None
            return _resolve_step_bound(path.bound, constants)
        raise InputError(f"unsupported path objective {path}")
    if isinstance(obj, RewardObjective):
        f = obj.formula
        if isinstance(f, Instant):
            return _resolve_step_bound(f.step, constants)
        if isinstance(f, Cumulative):
            return _resolve_step_bound(f.bound, constants)
        if isinstance(f, ReachReward):
            return None
    raise InputError(f"unsupported objective {obj}")


def _equilibria_finite(gameC, formula, constants, horizons):
    """Backward induction over the maximum horizon, solving one optimal-
    equilibrium game per state and stage."""
    m = gameC.num_players
    n = gameC.num_states
    kmax = max(horizons)
    query = EquilibriumQuery(formula.kind, formula.criterion, formula.opt)

    specs = []
    for obj, k in zip(formula.objectives, horizons):
        if isinstance(obj, PathObjective):
            path = obj.path
            if isinstance(path, Next):
                target = evaluate_state_set(gameC, path.sub, constants, depth=1)
                specs.append(("next", k, None, frozenset(range(n)), target))
            else:
                safe = evaluate_state_set(gameC, path.left, constants, depth=1)
                target = evaluate_state_set(gameC, path.right, constants, depth=1)
                specs.append(("until", k, None, safe, target))
        else:
            reward = gameC.reward_structure(obj.reward)
            if isinstance(obj.formula, Instant):
                if k != kmax:
                    raise InputError(
                        "instantaneous-reward objectives must use the longest horizon"
                    )
                specs.append(("instant", k, reward, None, None))
            else:
                specs.append(("cumulative", k, reward, None, None))

    V = np.zeros((n, m))
    for s in range(n):
        V[s] = [_finite_base(spec, s) for spec in specs]
    strategy = SynthesizedStrategy(
        kind="joint" if formula.kind == "CE" else "profile",
        coalitions=gameC.players,
        memory_kind="steps",
        entries={},
        initial_memory=kmax,
    )

    for stage in range(1, kmax + 1):
        prev = V.copy()
        for s in range(n):
            fixed = {}
            live = []
            for i, spec in enumerate(specs):
                budget = spec[1] - (kmax - stage)
                frozen = _finite_frozen(spec, s, budget)
                if frozen is not None:
                    fixed[i] = frozen
                else:
                    live.append(i)
            nfg, names = _local_equilibrium_game(gameC, s, prev, specs, fixed)
            result = solve_equilibrium(nfg, query)
            V[s] = result.values
            strategy.entries[(s, stage)] = _witness_rows(result, formula.kind, m)
        # prev snapshot semantics: V rows written fresh each stage
    sums = V.sum(axis=1)
    return V, sums, strategy, kmax, 0.0


def _finite_base(spec, s):
    kind, k, reward, safe, target = spec
    if kind in ("next", "until"):
        return 1.0 if (kind == "until" and s in target) else 0.0
    if kind == "instant":
        return reward.state_reward(s)
    return 0.0


def _finite_frozen(spec, s, budget):
    """Fixed utility when an objective is settled at this state/stage,
    None when it still depends on play."""
    kind, k, reward, safe, target = spec
    if kind == "next":
        if budget == 1:
            return None
        return 0.0 if budget < 1 else None
    if kind == "until":
        if s in target:
            return 1.0
        if s not in safe:
            return 0.0
        if budget <= 0:
            return 0.0
        return None
    if kind == "instant":
        if budget == 0:
            return reward.state_reward(s)
        return None
    if kind == "cumulative":
        if budget <= 0:
            return 0.0
        return None
    raise AssertionError(kind)


def _local_equilibrium_game(gameC, s, prev, specs, fixed):
    """Normal form game at a state from per-objective continuations."""
    m = gameC.num_players
    action_names = []
    for i in range(m):
        action_names.append(
            tuple(gameC.action_names[i][a] for a in gameC.available(s, i))
        )
    utilities = {}
    for alpha in gameC.joint_actions(s):
        vec = np.zeros(m)
        succs = gameC.successors(s, alpha)
        for i, spec in enumerate(specs):
            if i in fixed:
                vec[i] = fixed[i]
                continue
            kind, k, reward, safe, target = spec
            total = 0.0
            if kind == "cumulative":
                total += reward.state_reward(s) + reward.action_reward(s, alpha)
            if kind == "next":
                total += sum(p * (1.0 if t in target else 0.0) for t, p in succs)
            else:
                total += sum(p * prev[t][i] for t, p in succs)
            vec[i] = total
        names = tuple(gameC.action_names[i][a] for i, a in enumerate(alpha))
        utilities[names] = tuple(float(v) for v in vec)
    return NormalFormGame(tuple(action_names), utilities), action_names


def _witness_rows(result, kind, m):
    if kind == "CE":
        return dict(result.witness.probabilities)
    return [dict(strat.distribution) for strat in result.witness.strategies]


def _equilibria_infinite(gameC, formula, constants, epsilon, max_iters):
    """Value iteration over the game extended with per-coalition
    objective-satisfaction flags.

    Once a coalition's objective is settled (reached, or impossible from
    the current state), the remaining coalition's value is a single-agent
    optimisation in which the settled coalition cooperates.
    """
    n = gameC.num_states
    query = EquilibriumQuery(formula.kind, formula.criterion, formula.opt)
    maximize = formula.opt == "max"

    specs = []
    for obj in formula.objectives:
        if isinstance(obj, PathObjective):
            path = obj.path
            if not isinstance(path, Until) or path.bound is not None or path.left != BoolLit(True):
                raise InputError(
                    "infinite-horizon probability objectives must be reachability (F)"
                )
            target = evaluate_state_set(gameC, path.right, constants, depth=1)
            specs.append(("prob", None, target))
        else:
            if not isinstance(obj.formula, ReachReward):
                raise InputError(
                    "infinite-horizon reward objectives must be reachability rewards"
                )
            target = evaluate_state_set(gameC, obj.formula.target, constants, depth=1)
            specs.append(("reward", gameC.reward_structure(obj.reward), target))
    if len({kind for kind, *_ in specs}) != 1:
        raise InputError("objectives must all be probabilities or all rewards")
    is_reward = specs[0][0] == "reward"

    dead = [_unreachable_from(gameC, spec[2]) for spec in specs]

    def flag_of(s, prior, i):
        return prior[i] or (s in specs[i][2])

    init_flags = tuple(bool(gameC.initial in specs[i][2]) for i in range(2))
    start = (gameC.initial, init_flags)
    product = []
    seen = {start}
    queue = [start]
    while queue:
        node = queue.pop()
        product.append(node)
        s, flags = node
        for alpha in gameC.joint_actions(s):
            for t, p in gameC.successors(s, alpha):
                nf = tuple(flag_of(t, flags, i) for i in range(2))
                nxt = (t, nf)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    product.sort(key=lambda node: (node[0], node[1]))
    index = {node: k for k, node in enumerate(product)}

    def decided(node, i):
        s, flags = node
        if flags[i]:
            return 0.0 if is_reward else 1.0
        if s in dead[i]:
            return np.inf if is_reward else 0.0
        return None

    V = np.zeros((len(product), 2))
    status = []
    for node in product:
        d = (decided(node, 0), decided(node, 1))
        status.append(d)
        k = index[node]
        for i in range(2):
            if d[i] is not None:
                V[k][i] = d[i]

    def successor_value(node, alpha, i, values):
        s, flags = node
        total = 0.0
        for t, p in gameC.successors(s, alpha):
            nf = tuple(flag_of(t, flags, j) for j in range(2))
            val = values[index[(t, nf)]][i]
            if np.isinf(val):
                return np.inf
            total += p * val
        return total

    def immediate(node, alpha, i):
        if not is_reward:
            return 0.0
        s, flags = node
        if flags[i]:
            return 0.0
        reward = specs[i][1]
        return reward.state_reward(s) + reward.action_reward(s, alpha)

    pick = max if maximize else min

    iters = 0
    residual = 0.0
    while True:
        if iters >= max_iters:
            raise NonconvergenceError(
                f"equilibrium value iteration did not converge within {max_iters} sweeps",
                residual=residual,
                iterations=iters,
            )
        iters += 1
        prev = V.copy()
        residual = 0.0
        for k, node in enumerate(product):
            d = status[k]
            if d[0] is not None and d[1] is not None:
                continue
            if d[0] is not None or d[1] is not None:
                live = 0 if d[0] is None else 1
                s, flags = node
                best = None
                for alpha in gameC.joint_actions(s):
                    total = immediate(node, alpha, live) + successor_value(
                        node, alpha, live, prev
                    )
                    best = total if best is None else pick(best, total)
                V[k][live] = best
                residual = max(residual, _diff(best, prev[k][live]))
                continue
            nfg = _flag_local_game(gameC, node, prev, index, specs, is_reward, flag_of)
            result = solve_equilibrium(nfg, query)
            V[k] = result.values
            residual = max(
                residual,
                _diff(V[k][0], prev[k][0]),
                _diff(V[k][1], prev[k][1]),
            )
        if residual < epsilon:
            break

    strategy = SynthesizedStrategy(
        kind="joint" if formula.kind == "CE" else "profile",
        coalitions=gameC.players,
        memory_kind="flags",
        entries={},
        initial_memory=init_flags,
    )
    for k, node in enumerate(product):
        s, flags = node
        d = status[k]
        if d[0] is not None and d[1] is not None:
            _record_flag_default(strategy, gameC, node, formula.kind)
        elif d[0] is not None or d[1] is not None:
            live = 0 if d[0] is None else 1
            best = None
            best_alpha = gameC.joint_actions(s)[0]
            for alpha in gameC.joint_actions(s):
                total = immediate(node, alpha, live) + successor_value(node, alpha, live, V)
                if best is None or (maximize and total > best) or (
                    not maximize and total < best
                ):
                    best = total
                    best_alpha = alpha
            names = tuple(
                gameC.action_names[i][a] for i, a in enumerate(best_alpha)
            )
            if formula.kind == "CE":
                strategy.entries[(s, flags)] = {names: 1.0}
            else:
                strategy.entries[(s, flags)] = [{names[0]: 1.0}, {names[1]: 1.0}]
        else:
            nfg = _flag_local_game(gameC, node, V, index, specs, is_reward, flag_of)
            result = solve_equilibrium(nfg, query)
            strategy.entries[(s, flags)] = _witness_rows(result, formula.kind, 2)

    values = {node: V[index[node]].copy() for node in product}
    sums = {node: float(V[index[node]].sum()) for node in product}
    sums["initial"] = float(V[index[start]].sum())
    values["initial"] = V[index[start]].copy()
    return values, sums, strategy, iters, residual


def _diff(a, b):
    if np.isinf(a) and np.isinf(b):
        return 0.0
    return abs(a - b)


def _flag_local_game(gameC, node, values, index, specs, is_reward, flag_of):
    s, flags = node
    m = 2
    action_names = tuple(
        tuple(gameC.action_names[i][a] for a in gameC.available(s, i)) for i in range(m)
    )
    utilities = {}
    for alpha in gameC.joint_actions(s):
        vec = []
        for i in range(m):
            total = 0.0
            if is_reward and not flags[i]:
                reward = specs[i][1]
                total += reward.state_reward(s) + reward.action_reward(s, alpha)
            for t, p in gameC.successors(s, alpha):
                nf = tuple(flag_of(t, flags, j) for j in range(m))
                val = values[index[(t, nf)]][i]
                if np.isinf(val):
                    raise SolverError(
                        "equilibrium query reaches a state with infinite expected "
                        "reward; not supported"
                    )
                total += p * val
            vec.append(float(total))
        names = tuple(gameC.action_names[i][a] for i, a in enumerate(alpha))
        utilities[names] = tuple(vec)
    return NormalFormGame(action_names, utilities)


def _record_flag_default(strategy, gameC, node, kind):
    s, flags = node
    alpha = gameC.joint_actions(s)[0]
    names = tuple(gameC.action_names[i][a] for i, a in enumerate(alpha))
    if kind == "CE":
        strategy.entries[(s, flags)] = {names: 1.0}
    else:
        strategy.entries[(s, flags)] = [{names[i]: 1.0} for i in range(len(names))]


def _unreachable_from(game: Csg, target: frozenset) -> frozenset:
    """States with no path to the target in the underlying graph."""
    reach = set(target)
    changed = True
    while changed:
        changed = False
        for s in range(game.num_states):
            if s in reach:
                continue
            for alpha in game.joint_actions(s):
                if any(t in reach for t, p in game.successors(s, alpha) if p > 0.0):
                    reach.add(s)
                    changed = True
                    break
    return frozenset(range(game.num_states)) - reach


# --- top-level dispatch -----------------------------------------------------------


def check_property(game: Csg, formula: StateFormula, constants=None,
                   epsilon=DEFAULT_EPSILON, max_iters=DEFAULT_MAX_ITERS) -> CheckResult:
    """Check one property; values and strategies land in the CheckResult."""
    if isinstance(formula, (ZeroSumProb, ZeroSumReward)):
        return check_zero_sum_formula(game, formula, constants, epsilon, max_iters)
    if isinstance(formula, EquilibriumOp):
        return check_equilibrium_formula(game, formula, constants, epsilon, max_iters)
    sat = evaluate_state_set(game, formula, constants, depth=0,
                             epsilon=epsilon, max_iters=max_iters)
    return CheckResult(
        query=str(formula),
        value=game.initial in sat,
        numeric_value=None,
        values=sat,
        strategy=None,
        iterations=0,
        residual=0.0,
    )
