"""Optimal Nash and correlated equilibria for normal form games.

Nash equilibria come from support enumeration: per support the
indifference system is linear for two players and polynomial above, where
a damped Newton iteration takes over. Correlated equilibria are linear
programs over joint action distributions. Optimality criteria: welfare
(maximal utility sum) and fairness (minimal utility spread). Minimising
players are handled by negating utilities and negating reported values.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SolverError
from .games import JointDistribution, MixedStrategy, NormalFormGame, StrategyProfile
from .lp import EQUAL, GREATER, LESS, LinearProgram, lp_solve

log = logging.getLogger(__name__)

NASH = "NE"
CORRELATED = "CE"
WELFARE = "SW"
FAIR = "SF"

# Equilibria whose strategy vectors differ by less than this are one point.
DEDUP_TOL = 1e-7
BR_TOL = 1e-8
NEWTON_ITERS = 200
NEWTON_RESIDUAL = 1e-10


@dataclass(frozen=True)
class EquilibriumQuery:
    kind: str  # NASH or CORRELATED
    criterion: str  # WELFARE or FAIR
    direction: str = "max"

    def __post_init__(self):
        if self.kind not in (NASH, CORRELATED):
            raise InputError(f"unknown equilibrium kind {self.kind!r}")
        if self.criterion not in (WELFARE, FAIR):
            raise InputError(f"unknown criterion {self.criterion!r}")
        if self.direction not in ("max", "min"):
            raise InputError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class Support:
    """Per-player action subsets assigned nonzero probability."""

    action_sets: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if any(not acts for acts in self.action_sets):
            raise InputError("supports must be nonempty for every player")


@dataclass
class EquilibriumResult:
    values: np.ndarray
    witness: StrategyProfile | JointDistribution
    epsilon: float

    @property
    def welfare(self) -> float:
        return float(self.values.sum())

    @property
    def spread(self) -> float:
        return float(self.values.max() - self.values.min())


def negate_for_social_cost(game: NormalFormGame) -> NormalFormGame:
    """The game with utilities negated; equilibria of it realise
    minimum-direction queries."""
    return game.negated()


def best_response_value(
    game: NormalFormGame, player: int, others: tuple[MixedStrategy, ...]
) -> tuple[float, str]:
    """Best pure-response value and an achieving action for `player`,
    against fixed strategies of everyone else."""
    if len(others) != game.num_players - 1:
        raise InputError("expected one strategy per other player")
    best = -np.inf
    best_action = None
    for a in game.action_sets[player]:
        strategies = list(others[:player]) + [MixedStrategy.pure(a)] + list(others[player:])
        value = game.expected_utilities(StrategyProfile(tuple(strategies)))[player]
        if value > best:
            best = value
            best_action = a
    return float(best), best_action


def check_epsilon_ne(game: NormalFormGame, profile: StrategyProfile, eps: float) -> bool:
    """True iff no player can gain more than eps by a unilateral deviation."""
    profile.check_against(game)
    values = game.expected_utilities(profile)
    for i in range(game.num_players):
        br, _ = best_response_value(game, i, profile.without(i))
        if br > values[i] + eps:
            return False
    return True


def check_ce(game: NormalFormGame, joint: JointDistribution, eps: float) -> bool:
    """True iff every conditional deviation inequality holds within eps.

    For each player i and action pair (a, a'):
        sum over alpha with alpha_i = a of
            tau(alpha) * (u_i(alpha) - u_i(alpha with i -> a'))  >= -eps.
    Pairs whose recommendation carries no mass hold vacuously.
    """
    for alpha in joint.probabilities:
        if alpha not in game.utilities:
            raise InputError(f"joint action {alpha} not in game")
    for i in range(game.num_players):
        for a in game.action_sets[i]:
            for ap in game.action_sets[i]:
                if a == ap:
                    continue
                total = 0.0
                for alpha, p in joint.probabilities.items():
                    if alpha[i] != a or p == 0.0:
                        continue
                    dev = alpha[:i] + (ap,) + alpha[i + 1:]
                    total += p * (game.utilities[alpha][i] - game.utilities[dev][i])
                if total < -eps:
                    return False
    return True


# --- tensor helpers ----------------------------------------------------------


def _profile_values(U: np.ndarray, strategies: list[np.ndarray]) -> np.ndarray:
    """Expected utility vector; U has shape (|A_1|, ..., |A_n|, n)."""
    out = U
    for sigma in strategies:
        out = np.tensordot(sigma, out, axes=([0], [0]))
    return np.asarray(out, dtype=float)


def _deviation_values(U: np.ndarray, strategies: list[np.ndarray], player: int) -> np.ndarray:
    """Expected utility of each pure action of `player` against the rest."""
    ui = np.moveaxis(U[..., player], player, 0)
    for j in range(len(strategies)):
        if j == player:
            continue
        ui = np.tensordot(ui, strategies[j], axes=([1], [0]))
    return np.asarray(ui, dtype=float)


# --- Nash equilibria ---------------------------------------------------------


def find_ne(game: NormalFormGame, criterion: str) -> EquilibriumResult:
    """Optimal Nash equilibrium under SW or SF.

    Enumerates supports by increasing total size (then lexicographically),
    solves each candidate system, keeps every verified equilibrium, and
    picks the criterion optimum. Supports whose Newton solve fails are
    skipped with a warning, so in pathological games an equilibrium can be
    missed; every reported one is verified before selection.
    """
    if criterion not in (WELFARE, FAIR):
        raise InputError(f"unknown criterion {criterion!r}")
    n = game.num_players
    shape = game.shape
    if n > 2 and int(np.prod(shape)) > 64:
        raise InputError("support enumeration above 2 players is limited to 64 joint actions")
    U = game.utility_array()
    found: list[tuple[np.ndarray, list[np.ndarray]]] = []

    skipped = 0
    for supports in _enumerate_supports(shape, two_player=(n == 2)):
        if all(len(s) == 1 for s in supports):
            result = _try_pure(U, shape, supports)
        elif n == 2:
            result = _try_two_player(U, shape, supports)
        else:
            result = _try_newton(U, shape, supports)
            if result is _STALLED:
                skipped += 1
                result = None
        if result is None:
            continue
        values, strategies = result
        if _is_duplicate(found, strategies):
            continue
        found.append((values, strategies))
    if skipped:
        log.warning(
            "%d supports skipped by the Newton solve; equilibria there, if any, "
            "were not enumerated",
            skipped,
        )

    if not found:
        raise SolverError("support enumeration found no equilibrium (numeric breakdown)")

    values, strategies = _select(found, criterion)
    profile = StrategyProfile(
        tuple(
            MixedStrategy(
                {a: float(p) for a, p in zip(game.action_sets[i], strategies[i]) if p > 0.0}
            )
            for i in range(n)
        )
    )
    eps = _achieved_eps_ne(U, strategies, values)
    return EquilibriumResult(values, profile, eps)


def _enumerate_supports(shape, two_player):
    """Size-lexicographic support enumeration.

    For two players only equal-size supports are emitted: mixed equilibria
    of nondegenerate bimatrix games have balanced supports, and those are
    what the linear indifference solve can pin down.
    """
    n = len(shape)
    for total in range(n, sum(shape) + 1):
        for sizes in _size_splits(total, shape):
            if two_player and sizes[0] != sizes[1]:
                continue
            pools = [
                list(itertools.combinations(range(shape[i]), sizes[i])) for i in range(n)
            ]
            yield from itertools.product(*pools)


def _size_splits(total, shape):
    def rec(i, remaining):
        if i == len(shape) - 1:
            if 1 <= remaining <= shape[i]:
                yield (remaining,)
            return
        hi = min(shape[i], remaining - (len(shape) - i - 1))
        for k in range(1, hi + 1):
            for rest in rec(i + 1, remaining - k):
                yield (k,) + rest

    yield from rec(0, total)


def _try_pure(U, shape, supports):
    idx = tuple(s[0] for s in supports)
    values = np.asarray(U[idx], dtype=float).copy()
    for i in range(len(shape)):
        column = list(idx)
        for a in range(shape[i]):
            column[i] = a
            if U[tuple(column)][i] > values[i] + BR_TOL:
                return None
    strategies = []
    for i, size in enumerate(shape):
        v = np.zeros(size)
        v[idx[i]] = 1.0
        strategies.append(v)
    return values, strategies


def _try_two_player(U, shape, supports):
    rows, cols = supports
    u1 = U[..., 0]
    u2 = U[..., 1]
    x = _linear_indifference(u2, rows, cols, own_axis=0)
    y = _linear_indifference(u1, cols, rows, own_axis=1)
    if x is None or y is None:
        return None
    xs = np.zeros(shape[0])
    xs[list(rows)] = x
    ys = np.zeros(shape[1])
    ys[list(cols)] = y
    payoff1 = float(xs @ u1 @ ys)
    payoff2 = float(xs @ u2 @ ys)
    if (u1 @ ys).max() > payoff1 + BR_TOL:
        return None
    if (xs @ u2).max() > payoff2 + BR_TOL:
        return None
    return np.array([payoff1, payoff2]), [xs, ys]


def _linear_indifference(u_other, own_support, other_support, own_axis):
    """Probabilities over own_support that equalise the opponent's utility
    across other_support (the square system of support enumeration)."""
    k = len(own_support)
    A = np.zeros((k + 1, k + 1))
    b = np.zeros(k + 1)
    for r, other_a in enumerate(other_support):
        for c, own_a in enumerate(own_support):
            A[r, c] = u_other[own_a, other_a] if own_axis == 0 else u_other[other_a, own_a]
        A[r, k] = -1.0
    A[k, :k] = 1.0
    b[k] = 1.0
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None
    probs = sol[:k]
    if np.any(probs < -1e-9):
        return None
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total <= 0.0:
        return None
    return probs / total


_STALLED = object()  # sentinel: the support was skipped, not refuted


def _try_newton(U, shape, supports):
    """Damped Newton on the indifference-plus-normalisation system.

    Unknowns are the support probabilities and one value per player. A
    solve that diverges, stalls or hits a singular Jacobian skips the
    support; any solution is re-verified from scratch. Most candidate
    supports admit no solution at all, so slow progress bails out early.
    """
    n = len(shape)
    sizes = [len(s) for s in supports]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    nvars = int(offsets[-1]) + n
    tuples = list(itertools.product(*supports))
    utils = np.array([[U[t + (i,)] for i in range(n)] for t in tuples])
    support_pos = [{a: k for k, a in enumerate(s)} for s in supports]

    def residual_and_jac(z):
        F = np.zeros(nvars)
        J = np.zeros((nvars, nvars))
        row = 0
        sig = [z[offsets[i]:offsets[i + 1]] for i in range(n)]
        for i in range(n):
            for ai_pos, ai in enumerate(supports[i]):
                total = 0.0
                for t_idx, t in enumerate(tuples):
                    if t[i] != ai:
                        continue
                    p = 1.0
                    for j in range(n):
                        if j != i:
                            p *= sig[j][support_pos[j][t[j]]]
                    total += p * utils[t_idx, i]
                    for j in range(n):
                        if j == i:
                            continue
                        g = utils[t_idx, i]
                        for k in range(n):
                            if k != i and k != j:
                                g *= sig[k][support_pos[k][t[k]]]
                        J[row, offsets[j] + support_pos[j][t[j]]] += g
                F[row] = total - z[offsets[-1] + i]
                J[row, offsets[-1] + i] = -1.0
                row += 1
        for i in range(n):
            F[row] = sig[i].sum() - 1.0
            J[row, offsets[i]:offsets[i + 1]] = 1.0
            row += 1
        return F, J

    z = np.zeros(nvars)
    for i in range(n):
        z[offsets[i]:offsets[i + 1]] = 1.0 / sizes[i]
    F, J = residual_and_jac(z)
    res = float(np.abs(F).max())
    slow = 0
    for _ in range(NEWTON_ITERS):
        if res < NEWTON_RESIDUAL:
            break
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return _STALLED
        lam = 1.0
        improved = False
        for _ in range(15):
            z_new = z + lam * step
            F_new, J_new = residual_and_jac(z_new)
            res_new = float(np.abs(F_new).max())
            if res_new < res:
                improved = True
                break
            lam *= 0.5
        if not improved:
            return _STALLED
        slow = slow + 1 if res_new > 0.9 * res else 0
        z, F, J, res = z_new, F_new, J_new, res_new
        if slow >= 3 or res > 1e8 or np.abs(z[:offsets[-1]]).max() > 50.0:
            return _STALLED
    if res >= NEWTON_RESIDUAL:
        log.debug("Newton stalled on support %s (residual %.2e)", supports, res)
        return _STALLED

    strategies = []
    for i in range(n):
        s = np.zeros(shape[i])
        s[list(supports[i])] = z[offsets[i]:offsets[i + 1]]
        if np.any(s < -1e-8):
            return None
        s = np.clip(s, 0.0, None)
        strategies.append(s / s.sum())
    values = _profile_values(U, strategies)
    for i in range(n):
        if _deviation_values(U, strategies, i).max() > values[i] + BR_TOL:
            return None
    return values, strategies


def _is_duplicate(found, strategies):
    flat = np.concatenate(strategies)
    for _, other in found:
        if np.abs(flat - np.concatenate(other)).max() < DEDUP_TOL:
            return True
    return False


def _witness_key(strategies):
    return tuple(round(float(p), 12) for p in np.concatenate(strategies))


def _select(found, criterion):
    if criterion == WELFARE:
        key = lambda item: (-item[0].sum(), _witness_key(item[1]))
    else:
        key = lambda item: (
            item[0].max() - item[0].min(),
            -item[0].sum(),
            _witness_key(item[1]),
        )
    return min(found, key=key)


def _achieved_eps_ne(U, strategies, values):
    worst = 0.0
    for i in range(len(strategies)):
        gain = _deviation_values(U, strategies, i).max() - values[i]
        worst = max(worst, float(gain))
    return max(worst, 0.0)


# --- correlated equilibria ----------------------------------------------------


def _regret_rows(game: NormalFormGame, outcomes):
    """One LP row per (player, recommended, deviation) regret inequality,
    as coefficient vectors over the outcome ordering."""
    index = {alpha: k for k, alpha in enumerate(outcomes)}
    rows = []
    for i in range(game.num_players):
        for a in game.action_sets[i]:
            for ap in game.action_sets[i]:
                if a == ap:
                    continue
                row = np.zeros(len(outcomes))
                for alpha in outcomes:
                    if alpha[i] != a:
                        continue
                    dev = alpha[:i] + (ap,) + alpha[i + 1:]
                    row[index[alpha]] += game.utilities[alpha][i] - game.utilities[dev][i]
                rows.append(row)
    return rows


def find_ce(game: NormalFormGame, criterion: str) -> EquilibriumResult:
    """Optimal correlated equilibrium under SW or SF.

    SW is one LP over the joint distribution with the regret constraints.
    SF runs two stages: minimise the utility spread with per-player value
    variables bracketed between a floor and a ceiling, then re-maximise
    welfare subject to the optimal spread.
    """
    if criterion not in (WELFARE, FAIR):
        raise InputError(f"unknown criterion {criterion!r}")
    outcomes = list(itertools.product(*game.action_sets))
    nout = len(outcomes)
    n = game.num_players
    regret = _regret_rows(game, outcomes)
    util_cols = np.array([[game.utilities[alpha][i] for alpha in outcomes] for i in range(n)])

    if criterion == WELFARE:
        lp = LinearProgram(objective=util_cols.sum(axis=0), maximize=True)
        for row in regret:
            lp.add(row, GREATER, 0.0)
        lp.add(np.ones(nout), EQUAL, 1.0)
        res = lp_solve(lp)
        if not res.optimal:
            raise SolverError(f"welfare CE program came back {res.status}")
        tau = res.x
    else:
        tau = _fair_ce(game, outcomes, regret, util_cols)

    tau = np.clip(tau, 0.0, None)
    tau /= tau.sum()
    values = util_cols @ tau
    joint = JointDistribution(
        {alpha: float(p) for alpha, p in zip(outcomes, tau) if p > 0.0}
    )
    eps = _achieved_eps_ce(game, outcomes, tau)
    return EquilibriumResult(np.asarray(values, dtype=float), joint, eps)


def _fair_ce(game, outcomes, regret, util_cols):
    nout = len(outcomes)
    n = game.num_players
    total = nout + n + 2  # tau, per-player values, floor, ceiling
    lo_col = nout + n
    hi_col = nout + n + 1

    def base_program(objective, maximize):
        lp = LinearProgram(
            objective=objective,
            maximize=maximize,
            lower=np.concatenate([np.zeros(nout), np.full(n + 2, -np.inf)]),
        )
        for row in regret:
            lp.add(np.concatenate([row, np.zeros(n + 2)]), GREATER, 0.0)
        lp.add(np.concatenate([np.ones(nout), np.zeros(n + 2)]), EQUAL, 1.0)
        for i in range(n):
            row = np.zeros(total)
            row[:nout] = util_cols[i]
            row[nout + i] = -1.0
            lp.add(row, EQUAL, 0.0)
            bracket = np.zeros(total)
            bracket[nout + i] = 1.0
            bracket[lo_col] = -1.0
            lp.add(bracket, GREATER, 0.0)
            bracket = np.zeros(total)
            bracket[hi_col] = 1.0
            bracket[nout + i] = -1.0
            lp.add(bracket, GREATER, 0.0)
        return lp

    spread_obj = np.zeros(total)
    spread_obj[hi_col] = 1.0
    spread_obj[lo_col] = -1.0
    stage1 = lp_solve(base_program(spread_obj, maximize=False))
    if not stage1.optimal:
        raise SolverError(f"fairness CE stage 1 came back {stage1.status}")
    best_spread = stage1.objective

    welfare_obj = np.zeros(total)
    welfare_obj[nout:nout + n] = 1.0
    lp2 = base_program(welfare_obj, maximize=True)
    lp2.add(spread_obj, LESS, best_spread + 1e-9)
    stage2 = lp_solve(lp2)
    if not stage2.optimal:
        raise SolverError(f"fairness CE stage 2 came back {stage2.status}")
    return stage2.x[:nout]


def _achieved_eps_ce(game, outcomes, tau):
    worst = 0.0
    joint = {alpha: p for alpha, p in zip(outcomes, tau)}
    for i in range(game.num_players):
        for a in game.action_sets[i]:
            for ap in game.action_sets[i]:
                if a == ap:
                    continue
                total = 0.0
                for alpha, p in joint.items():
                    if alpha[i] != a or p == 0.0:
                        continue
                    dev = alpha[:i] + (ap,) + alpha[i + 1:]
                    total += p * (game.utilities[alpha][i] - game.utilities[dev][i])
                worst = max(worst, -total)
    return max(worst, 0.0)


# --- direction handling --------------------------------------------------------


def solve_equilibrium(game: NormalFormGame, query: EquilibriumQuery) -> EquilibriumResult:
    """Dispatch on kind/criterion, realising min-direction queries on the
    negated game and flipping the reported values back."""
    target = game if query.direction == "max" else negate_for_social_cost(game)
    if query.kind == NASH:
        result = find_ne(target, query.criterion)
    else:
        result = find_ce(target, query.criterion)
    if query.direction == "min":
        result = EquilibriumResult(-result.values, result.witness, result.epsilon)
    return result
