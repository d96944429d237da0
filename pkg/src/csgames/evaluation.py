"""Strategy evaluation: induced chains, exact values, simulation, and
best-response certification.

A synthesized strategy plus the coalition game induce a Markov chain over
(state, memory) nodes. Exact values come from linear solves on that
chain; simulation draws seeded sample paths; certification fixes all
coalitions but one and solves the deviator's decision problem, comparing
against the profile's own value in every reachable node.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .checker import CheckResult, SynthesizedStrategy, evaluate_state_set
from .csg import Csg
from .errors import InputError, NonconvergenceError, SolverError
from .proplang import (
    Cumulative,
    EquilibriumOp,
    Instant,
    Next,
    PathObjective,
    ReachReward,
    RewardObjective,
    Until,
    ZeroSumProb,
    ZeroSumReward,
)

ROW_SUM_TOL = 1e-9


@dataclass
class InducedChain:
    """Markov chain over (state, memory) product nodes."""

    game: Csg
    nodes: list  # (state id, memory)
    index: dict
    rows: list  # per node: [(succ node index, prob)]
    mixtures: list  # per node: {joint action ids: prob} driving the mixture

    def node_states(self):
        return [s for s, _ in self.nodes]

    def nodes_where(self, predicate) -> frozenset:
        """Indices of nodes whose (state, memory) satisfies the predicate."""
        return frozenset(
            k for k, (s, m) in enumerate(self.nodes) if predicate(s, m)
        )

    def expected_reward(self, reward) -> np.ndarray:
        """Per-node one-step expected reward under the mixture."""
        out = np.zeros(len(self.nodes))
        for k, (s, _) in enumerate(self.nodes):
            total = reward.state_reward(s)
            for alpha, p in self.mixtures[k].items():
                total += p * reward.action_reward(s, alpha)
            out[k] = total
        return out


def _memory_successor(strategy: SynthesizedStrategy, memory, succ_state, flag_targets):
    if strategy.memory_kind == "none":
        return None
    if strategy.memory_kind == "steps":
        return max(memory - 1, 0)
    if strategy.memory_kind == "flags":
        return tuple(
            memory[i] or (succ_state in flag_targets[i])
            for i in range(len(memory))
        )
    raise InputError(f"unknown memory kind {strategy.memory_kind!r}")


def _decision_mixture(game: Csg, strategy: SynthesizedStrategy, state, memory):
    """Joint-action distribution the strategy plays at a node, id-keyed."""
    decision = strategy.decision(state, memory)
    if decision is None:
        if strategy.memory_kind == "steps" and memory == 0:
            return None  # horizon exhausted: park the chain
        raise InputError(
            f"profile has no decision for state {game.state_names[state]!r}, "
            f"memory {memory!r}"
        )
    out: dict[tuple, float] = {}
    if strategy.kind == "joint":
        for names, p in decision.items():
            alpha = game._intern_joint(names)
            out[alpha] = out.get(alpha, 0.0) + float(p)
    else:
        dists = []
        for i, row in enumerate(decision):
            dists.append([(game.action_id(i, a), float(p)) for a, p in row.items()])
        for combo in itertools.product(*dists):
            alpha = tuple(a for a, _ in combo)
            p = 1.0
            for _, q in combo:
                p *= q
            if p > 0.0:
                out[alpha] = out.get(alpha, 0.0) + p
    total = sum(out.values())
    if abs(total - 1.0) > ROW_SUM_TOL:
        raise InputError(f"strategy row sums to {total} at state {state}, memory {memory}")
    return out


def induce_chain(game: Csg, strategy: SynthesizedStrategy, flag_targets=None) -> InducedChain:
    """Compose the strategy's mixtures with the transition function.

    flag_targets: per-coalition target state sets, required for
    flag-memory strategies to advance the memory.
    """
    if strategy.memory_kind == "flags" and flag_targets is None:
        raise InputError("flag-memory strategies need their target sets to advance")
    start = (game.initial, strategy.initial_memory)
    nodes = [start]
    index = {start: 0}
    rows: list = []
    mixtures: list = []
    frontier = [start]
    while frontier:
        state, memory = node = frontier.pop(0)
        mixture = _decision_mixture(game, strategy, state, memory)
        if mixture is None:
            rows.append([(index[node], 1.0)])
            mixtures.append({})
            continue
        succ_probs: dict[int, float] = {}
        for alpha, p_alpha in mixture.items():
            for t, p in game.successors(state, alpha):
                succ_memory = _memory_successor(strategy, memory, t, flag_targets)
                succ = (t, succ_memory)
                if succ not in index:
                    index[succ] = len(nodes)
                    nodes.append(succ)
                    frontier.append(succ)
                succ_probs[index[succ]] = succ_probs.get(index[succ], 0.0) + p_alpha * p
        total = sum(succ_probs.values())
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise SolverError(f"chain row sums to {total}")
        rows.append(sorted(succ_probs.items()))
        mixtures.append(mixture)
    # rows were appended in traversal order matching nodes
    return InducedChain(game, nodes, index, rows, mixtures)


# --- exact evaluation -------------------------------------------------------------


def _transition_matrix(chain: InducedChain) -> np.ndarray:
    n = len(chain.nodes)
    P = np.zeros((n, n))
    for k, row in enumerate(chain.rows):
        for j, p in row:
            P[k, j] += p
    return P


def reach_probability(chain: InducedChain, target: frozenset, bound=None) -> np.ndarray:
    """Per-node probability of hitting `target` (within `bound` steps)."""
    n = len(chain.nodes)
    P = _transition_matrix(chain)
    t = np.array([1.0 if k in target else 0.0 for k in range(n)])
    if bound is not None:
        v = t.copy()
        for _ in range(bound):
            v = P @ v
            v[list(target)] = 1.0
        return v
    cannot = _cannot_reach(chain, target)
    solve_idx = [k for k in range(n) if k not in target and k not in cannot]
    v = t.copy()
    if solve_idx:
        A = np.eye(len(solve_idx)) - P[np.ix_(solve_idx, solve_idx)]
        b = np.array(
            [sum(p for j, p in chain.rows[k] if j in target) for k in solve_idx]
        )
        v[solve_idx] = _linear_solve(A, b)
    return v


def expected_reward_to_target(chain: InducedChain, reward, target: frozenset) -> np.ndarray:
    """Per-node expected accumulated reward until `target`; +inf where the
    target is not almost-surely reached."""
    n = len(chain.nodes)
    probs = reach_probability(chain, target)
    v = np.zeros(n)
    unsafe = [k for k in range(n) if probs[k] < 1.0 - 1e-9]
    for k in unsafe:
        v[k] = np.inf
    c = chain.expected_reward(reward)
    P = _transition_matrix(chain)
    solve_idx = [k for k in range(n) if k not in target and np.isfinite(v[k])]
    if solve_idx:
        A = np.eye(len(solve_idx)) - P[np.ix_(solve_idx, solve_idx)]
        b = c[solve_idx].copy()
        v_idx = _linear_solve(A, b)
        for pos, k in enumerate(solve_idx):
            v[k] = v_idx[pos]
    for k in target:
        v[k] = 0.0
    return v


def bounded_cumulative_reward(chain: InducedChain, reward, k: int) -> np.ndarray:
    P = _transition_matrix(chain)
    c = chain.expected_reward(reward)
    v = np.zeros(len(chain.nodes))
    for _ in range(k):
        v = c + P @ v
    return v


def instant_reward(chain: InducedChain, reward, k: int) -> np.ndarray:
    P = _transition_matrix(chain)
    v = np.array([reward.state_reward(s) for s, _ in chain.nodes])
    for _ in range(k):
        v = P @ v
    return v


def _cannot_reach(chain: InducedChain, target: frozenset) -> frozenset:
    reach = set(target)
    changed = True
    while changed:
        changed = False
        for k, row in enumerate(chain.rows):
            if k in reach:
                continue
            if any(j in reach and p > 0.0 for j, p in row):
                reach.add(k)
                changed = True
    return frozenset(range(len(chain.nodes))) - reach


def _linear_solve(A, b):
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular linear system in chain evaluation: {exc}") from None


# --- simulation --------------------------------------------------------------------


@dataclass
class SimulationReport:
    estimate: float
    half_width: float
    runs: int
    seed: int
    truncated: int
    outcomes: list = field(default_factory=list)


def _run_rng(seed: int, run_index: int) -> np.random.Generator:
    """Stream split rule: run r draws from PCG64 seeded with
    SeedSequence(entropy=seed, spawn_key=(r,))."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(run_index,)))
    )


def simulate(game: Csg, strategy: SynthesizedStrategy, objective, runs: int,
             seed: int = 0, flag_targets=None, horizon: int = 100_000,
             jobs: int = 1) -> SimulationReport:
    """Monte Carlo estimate of an objective under a strategy.

    objective: ("reach", node predicate, step bound or None) or
    ("reach_reward", reward structure, node predicate). Unbounded runs are
    truncated at `horizon` steps and counted in the report. Runs carry
    index-derived seeds, so splitting them over `jobs` worker threads
    keeps the outcome stream byte-identical.
    """
    if runs < 1:
        raise InputError("simulation needs at least one run")
    chain = induce_chain(game, strategy, flag_targets)
    kind = objective[0]
    bound = None
    if kind == "reach":
        _, predicate, bound = objective
        cap = horizon if bound is None else bound
    elif kind == "reach_reward":
        _, reward, predicate = objective
        cap = horizon
    else:
        raise InputError(f"unknown simulation objective {kind!r}")
    target = chain.nodes_where(predicate)
    # Nodes from which the target is graph-unreachable end a run early.
    dead = _cannot_reach(chain, target)

    def run_block(indices):
        outcomes = []
        truncated = 0
        for r in indices:
            rng = _run_rng(seed, r)
            node = 0
            steps = 0
            total = 0.0
            hit = node in target
            while not hit and steps < cap and node not in dead:
                row = chain.rows[node]
                if kind == "reach_reward":
                    s, _ = chain.nodes[node]
                    total += reward.state_reward(s)
                    mix = chain.mixtures[node]
                    if mix:
                        actions = list(mix.items())
                        probs = np.array([p for _, p in actions])
                        probs = probs / probs.sum()
                        pick = rng.choice(len(actions), p=probs)
                        total += reward.action_reward(s, actions[pick][0])
                probs = np.array([p for _, p in row])
                probs = probs / probs.sum()
                node = row[rng.choice(len(row), p=probs)][0]
                steps += 1
                hit = node in target
            if not hit and kind == "reach_reward" and (steps >= cap or node in dead):
                truncated += 1  # accumulation cut off: the target was not hit
            elif not hit and bound is None and kind == "reach" and steps >= cap:
                truncated += 1
            outcomes.append(total if kind == "reach_reward" else (1.0 if hit else 0.0))
        return outcomes, truncated

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        blocks = np.array_split(np.arange(runs), min(jobs, runs))
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run_block, blocks))
        outcomes = [o for part, _ in parts for o in part]
        truncated = sum(t for _, t in parts)
    else:
        outcomes, truncated = run_block(range(runs))

    arr = np.asarray(outcomes)
    estimate = float(arr.mean())
    half = float(1.96 * arr.std(ddof=1) / np.sqrt(runs)) if runs > 1 else 0.0
    return SimulationReport(estimate, half, runs, seed, truncated, outcomes)


# --- best-response certification ----------------------------------------------------


@dataclass
class DeviationReport:
    certified: bool
    gains: list  # per coalition, max gain over reachable nodes
    violations: list  # (coalition, node, gain) above eps


def flag_targets_for(gameC: Csg, formula, constants=None):
    """Per-coalition target state sets; drives flag-memory updates."""
    if not isinstance(formula, EquilibriumOp):
        return None
    targets = []
    for obj in formula.objectives:
        if isinstance(obj, PathObjective):
            if not isinstance(obj.path, Until):
                return None
            sub = obj.path.right
        else:
            if not isinstance(obj.formula, ReachReward):
                return None
            sub = obj.formula.target
        targets.append(evaluate_state_set(gameC, sub, constants, depth=1))
    return tuple(targets)


def objectives_from_result(result: CheckResult, constants=None):
    """Per-coalition objective specs for certification, derived from the
    checked formula on the coalition game."""
    return objectives_for(result.coalition_game, result.formula, constants)


def objectives_for(gameC: Csg, formula, constants=None):
    if isinstance(formula, (ZeroSumProb, ZeroSumReward)):
        if formula.bound is not None:
            rel = formula.bound[0]
            direction = formula.query or ("max" if rel in (">", ">=") else "min")
        else:
            direction = formula.query
        flip = "min" if direction == "max" else "max"
        spec = _objective_spec_zero_sum(gameC, formula, constants)
        specs = [spec + (direction,), spec + (flip,)]
        return specs[: gameC.num_players]
    if isinstance(formula, EquilibriumOp):
        out = []
        for obj in formula.objectives:
            out.append(_objective_spec(gameC, obj, constants) + (formula.opt,))
        return out
    raise InputError("certification needs a game-operator formula")


def _objective_spec_zero_sum(gameC, formula, constants):
    if isinstance(formula, ZeroSumProb):
        return _objective_spec(gameC, PathObjective(formula.path), constants)
    return _objective_spec(
        gameC, RewardObjective(formula.reward, formula.formula), constants
    )


def _objective_spec(gameC, obj, constants):
    from .checker import _resolve_step_bound

    if isinstance(obj, PathObjective):
        path = obj.path
        if isinstance(path, Next):
            target = evaluate_state_set(gameC, path.sub, constants, depth=1)
            return ("prob_next", None, target)
        safe = evaluate_state_set(gameC, path.left, constants, depth=1)
        target = evaluate_state_set(gameC, path.right, constants, depth=1)
        bound = (
            None if path.bound is None else _resolve_step_bound(path.bound, constants)
        )
        return ("prob_reach", (safe, bound), target)
    formula = obj.formula
    reward = gameC.reward_structure(obj.reward)
    if isinstance(formula, Instant):
        return ("reward_instant", (reward, _resolve_step_bound(formula.step, constants)), None)
    if isinstance(formula, Cumulative):
        return ("reward_cumulative", (reward, _resolve_step_bound(formula.bound, constants)), None)
    target = evaluate_state_set(gameC, formula.target, constants, depth=1)
    return ("reward_reach", (reward, None), target)


def best_response_check(game: Csg, strategy: SynthesizedStrategy, objectives,
                        eps: float, flag_targets=None,
                        residual=1e-8, max_iters=200_000) -> DeviationReport:
    """Certify a profile as an eps-equilibrium for the given objectives.

    For each coalition the others' play is frozen, the coalition's best
    deviation value is computed over all reachable (state, memory) nodes,
    and compared to the profile's own value node by node.
    """
    chain = induce_chain(game, strategy, flag_targets)
    gains = []
    violations = []
    for i, spec in enumerate(objectives):
        profile_values = profile_objective_values(chain, spec, i)
        dev_values, dev_nodes = _deviation_values(
            game, strategy, spec, i, flag_targets, residual, max_iters
        )
        worst = -np.inf
        for k, node in enumerate(chain.nodes):
            prof = profile_values[k]
            dev = dev_values[dev_nodes[node]]
            direction = spec[-1]
            gain = (dev - prof) if direction == "max" else (prof - dev)
            if np.isinf(dev) and np.isinf(prof):
                gain = 0.0
            worst = max(worst, gain)
            if gain > eps:
                violations.append((i, node, float(gain)))
        gains.append(float(worst))
    return DeviationReport(not violations, gains, violations)


def profile_objective_values(chain: InducedChain, spec, coalition):
    kind, params, target_states = spec[0], spec[1], spec[2]
    if kind == "prob_next":
        P = _transition_matrix(chain)
        ind = np.array([1.0 if s in target_states else 0.0 for s, _ in chain.nodes])
        return P @ ind
    if kind == "prob_reach":
        safe, bound = params
        target = chain.nodes_where(_flag_or_state_target(chain, target_states, coalition))
        if bound is None:
            return reach_probability(chain, target)
        return reach_probability(chain, target, bound=bound)
    if kind == "reward_instant":
        reward, k = params
        return instant_reward(chain, reward, k)
    if kind == "reward_cumulative":
        reward, k = params
        return bounded_cumulative_reward(chain, reward, k)
    if kind == "reward_reach":
        reward, _ = params
        target = chain.nodes_where(_flag_or_state_target(chain, target_states, coalition))
        return expected_reward_to_target(chain, reward, target)
    raise InputError(f"unknown objective kind {kind!r}")


def _flag_or_state_target(chain, target_states, coalition):
    def predicate(s, m):
        if isinstance(m, tuple) and len(m) > coalition:
            return bool(m[coalition]) or s in target_states
        return s in target_states

    return predicate


def _deviation_values(game, strategy, spec, coalition, flag_targets, residual, max_iters):
    """Optimal objective value of `coalition` deviating against the frozen
    strategies of everyone else, over all deviation-reachable nodes."""
    kind, params, target_states = spec[0], spec[1], spec[2]
    direction = spec[-1]
    maximize = direction == "max"

    nodes = []
    index = {}

    def intern(node):
        if node not in index:
            index[node] = len(nodes)
            nodes.append(node)
            frontier.append(node)
        return index[node]

    start = (game.initial, strategy.initial_memory)
    frontier = []
    intern(start)
    # Per node: list of (own-choice key, [(succ idx, prob)], immediate reward)
    # For CE witnesses the own-choice key is (recommendation, action).
    structure = []
    pos = 0
    while pos < len(nodes):
        state, memory = node = nodes[pos]
        pos += 1
        options = _deviation_options(game, strategy, node, coalition)
        entry = []
        for key, weight, dist in options:
            succs = {}
            for alpha, p_alpha in dist.items():
                for t, p in game.successors(state, alpha):
                    succ_memory = _memory_successor(strategy, memory, t, flag_targets)
                    j = intern((t, succ_memory))
                    succs[j] = succs.get(j, 0.0) + p_alpha * p
            imm = 0.0
            if kind in ("reward_cumulative", "reward_reach"):
                reward = params[0]
                imm = reward.state_reward(state)
                for alpha, p_alpha in dist.items():
                    imm += p_alpha * reward.action_reward(state, alpha)
            entry.append((key, weight, sorted(succs.items()), imm))
        structure.append(entry)

    n = len(nodes)
    pick = max if maximize else min

    def node_is_target(node):
        s, m = node
        if kind in ("prob_reach", "reward_reach"):
            if isinstance(m, tuple) and len(m) > coalition:
                return bool(m[coalition]) or s in target_states
            return s in target_states
        return False

    targets = np.array([node_is_target(node) for node in nodes])

    if kind == "prob_next":
        ind = np.array([1.0 if nodes[j][0] in target_states else 0.0 for j in range(n)])
        v = np.zeros(n)
        for k in range(n):
            v[k] = _dev_step(structure[k], ind, pick)
        return v, index

    if kind in ("reward_instant", "reward_cumulative"):
        reward, steps = params
        v = (
            np.array([reward.state_reward(nodes[k][0]) for k in range(n)])
            if kind == "reward_instant"
            else np.zeros(n)
        )
        for _ in range(steps):
            prev = v.copy()
            nv = np.empty(n)
            for k in range(n):
                nv[k] = _dev_step(structure[k], prev, pick, include_imm=(kind == "reward_cumulative"))
            v = nv
        return v, index

    if kind == "prob_reach":
        safe, bound = params
        v = np.where(targets, 1.0, 0.0)
        if bound is not None:
            for _ in range(bound):
                prev = v.copy()
                for k in range(n):
                    if targets[k]:
                        continue
                    if nodes[k][0] not in safe:
                        v[k] = 0.0
                        continue
                    v[k] = _dev_step(structure[k], prev, pick)
            return v, index
        iters = 0
        while True:
            if iters >= max_iters:
                raise NonconvergenceError("deviation value iteration did not converge")
            iters += 1
            prev = v.copy()
            delta = 0.0
            for k in range(n):
                if targets[k] or nodes[k][0] not in safe:
                    continue
                v[k] = _dev_step(structure[k], prev, pick)
                delta = max(delta, abs(v[k] - prev[k]))
            if delta < residual:
                return v, index

    assert kind == "reward_reach"
    v = np.zeros(n)
    iters = 0
    while True:
        if iters >= max_iters:
            raise NonconvergenceError("deviation value iteration did not converge")
        iters += 1
        prev = v.copy()
        delta = 0.0
        for k in range(n):
            if targets[k]:
                continue
            v[k] = _dev_step(structure[k], prev, pick, include_imm=True)
            delta = max(delta, _finite_diff(v[k], prev[k]))
        if delta < residual:
            return v, index


def _finite_diff(a, b):
    if np.isinf(a) and np.isinf(b):
        return 0.0
    return abs(a - b)


def _dev_step(entry, values, pick, include_imm=False):
    """One Bellman step of the deviator at a node.

    entry groups options by recommendation weight: the value is the
    weighted sum over recommendations of the best response per
    recommendation (weight 1.0 single group for profile witnesses).
    """
    by_rec: dict = {}
    for key, weight, succs, imm in entry:
        rec = key[0]
        by_rec.setdefault(rec, []).append((weight, succs, imm))
    total = 0.0
    for rec, options in by_rec.items():
        weight = options[0][0]
        best = None
        for _, succs, imm in options:
            val = (imm if include_imm else 0.0) + sum(p * values[j] for j, p in succs)
            best = val if best is None else pick(best, val)
        total += weight * best
    return total


def _deviation_options(game, strategy, node, coalition):
    """The deviator's choice set at a node.

    Profile witnesses: one option per own action, weight 1, others mixing
    per their frozen rows. Joint witnesses: one option per recommendation
    and substituted action; the recommendation's weight is its marginal
    probability and others play their conditional distribution.
    """
    state, memory = node
    decision = strategy.decision(state, memory)
    if decision is None:
        if strategy.memory_kind == "steps" and memory == 0:
            return [(("park", None), 1.0, {_idle_alpha(game, state): 1.0})]
        raise InputError(
            f"profile has no decision for state {game.state_names[state]!r}, "
            f"memory {memory!r}"
        )
    own_actions = game.available(state, coalition)
    if strategy.kind == "profile":
        others = []
        for i, row in enumerate(decision):
            if i == coalition:
                continue
            others.append(
                [(i, game.action_id(i, a), float(p)) for a, p in row.items()]
            )
        options = []
        for a in own_actions:
            dist: dict[tuple, float] = {}
            for combo in itertools.product(*others) if others else [()]:
                alpha = [None] * game.num_players
                alpha[coalition] = a
                p = 1.0
                for i, aid, q in combo:
                    alpha[i] = aid
                    p *= q
                dist[tuple(alpha)] = dist.get(tuple(alpha), 0.0) + p
            options.append((("*", a), 1.0, dist))
        return options
    # Joint witness: condition on the recommendation to this coalition.
    marginals: dict[int, float] = {}
    conditionals: dict[int, dict] = {}
    for names, p in decision.items():
        alpha = game._intern_joint(names)
        rec = alpha[coalition]
        marginals[rec] = marginals.get(rec, 0.0) + float(p)
        conditionals.setdefault(rec, {})
        conditionals[rec][alpha] = conditionals[rec].get(alpha, 0.0) + float(p)
    options = []
    for rec, weight in marginals.items():
        cond = {
            alpha: p / weight for alpha, p in conditionals[rec].items() if weight > 0
        }
        for a in own_actions:
            dist: dict[tuple, float] = {}
            for alpha, p in cond.items():
                dev_alpha = alpha[:coalition] + (a,) + alpha[coalition + 1:]
                dist[dev_alpha] = dist.get(dev_alpha, 0.0) + p
            options.append(((rec, a), weight, dist))
    return options


def _idle_alpha(game, state):
    return tuple(game.available(state, i)[0] for i in range(game.num_players))


# --- strategy files ------------------------------------------------------------------


def export_strategy(strategy: SynthesizedStrategy, game: Csg) -> str:
    """Strategy file: kind, coalitions, memory kind and one entry per
    (state, memory) pair; probabilities carry 17 significant digits."""
    import json

    def memory_json(m):
        if m is None:
            return None
        if isinstance(m, tuple):
            return list(bool(x) for x in m)
        return int(m)

    entries = []
    for (state, memory), rows in sorted(
        strategy.entries.items(), key=lambda kv: (kv[0][0], _memory_key(kv[0][1]))
    ):
        if strategy.kind == "joint":
            rows_json = [
                {"actions": list(names), "prob": format(p, ".17g")}
                for names, p in sorted(rows.items())
            ]
        else:
            rows_json = [
                {a: format(p, ".17g") for a, p in sorted(dist.items())}
                for dist in rows
            ]
        entries.append(
            {
                "state": game.state_names[state],
                "memory": memory_json(memory),
                "rows": rows_json,
            }
        )
    doc = {
        "kind": strategy.kind,
        "coalitions": list(strategy.coalitions),
        "memory_kind": strategy.memory_kind,
        "initial_memory": memory_json(strategy.initial_memory),
        "entries": entries,
    }
    return json.dumps(doc, indent=2) + "\n"


def _memory_key(m):
    if m is None:
        return (0,)
    if isinstance(m, tuple):
        return tuple(int(x) for x in m)
    return (int(m),)


def import_strategy(text: str, game: Csg) -> SynthesizedStrategy:
    import json

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"bad strategy file: {exc}") from None

    def memory_back(m):
        if m is None:
            return None
        if isinstance(m, list):
            return tuple(bool(x) for x in m)
        return int(m)

    try:
        kind = doc["kind"]
        if kind not in ("profile", "joint"):
            raise InputError(f"bad strategy kind {kind!r}")
        coalitions = tuple(doc["coalitions"])
        if coalitions != game.players:
            raise InputError(
                f"strategy coalitions {coalitions} do not match the game "
                f"({game.players})"
            )
        strategy = SynthesizedStrategy(
            kind=kind,
            coalitions=coalitions,
            memory_kind=doc["memory_kind"],
            entries={},
            initial_memory=memory_back(doc["initial_memory"]),
        )
        for entry in doc["entries"]:
            state = game.state_id(entry["state"])
            memory = memory_back(entry["memory"])
            rows = entry["rows"]
            if kind == "joint":
                parsed = {}
                for item in rows:
                    parsed[tuple(item["actions"])] = float(item["prob"])
                strategy.entries[(state, memory)] = parsed
            else:
                if len(rows) != game.num_players:
                    raise InputError("profile entry arity mismatch")
                strategy.entries[(state, memory)] = [
                    {a: float(p) for a, p in dist.items()} for dist in rows
                ]
        return strategy
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad strategy file: {exc}") from None
