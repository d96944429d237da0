"""One-shot games in normal form, mixed strategies and joint distributions.

A game holds one utility vector per joint action. Strategies are kept
name-keyed at the API surface; dense index-based arrays are derived on
demand for the numeric code.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

PROB_TOL = 1e-9


@dataclass(frozen=True)
class NormalFormGame:
    """n-player normal form game.

    action_sets[i] lists player i's action names; utilities maps every
    joint action name tuple to a length-n utility vector.
    """

    action_sets: tuple[tuple[str, ...], ...]
    utilities: dict[tuple[str, ...], tuple[float, ...]]

    def __post_init__(self):
        n = len(self.action_sets)
        if n < 1:
            raise InputError("a game needs at least one player")
        for i, acts in enumerate(self.action_sets):
            if not acts:
                raise InputError(f"player {i} has an empty action set")
            if len(set(acts)) != len(acts):
                raise InputError(f"player {i} has duplicate action names")
        expected = set(itertools.product(*self.action_sets))
        got = set(self.utilities)
        if got != expected:
            missing = expected - got
            extra = got - expected
            parts = []
            if missing:
                parts.append(f"missing utilities for {sorted(missing)[:3]}")
            if extra:
                parts.append(f"utilities for unknown joint actions {sorted(extra)[:3]}")
            raise InputError("; ".join(parts))
        for alpha, vec in self.utilities.items():
            if len(vec) != n:
                raise InputError(f"utility vector for {alpha} has length {len(vec)}, want {n}")
            if not all(np.isfinite(v) for v in vec):
                raise InputError(f"non-finite utility for {alpha}")

    @property
    def num_players(self) -> int:
        return len(self.action_sets)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.action_sets)

    def utility_array(self) -> np.ndarray:
        """Dense utilities of shape (|A_1|, ..., |A_n|, n)."""
        arr = np.empty(self.shape + (self.num_players,))
        for alpha, vec in self.utilities.items():
            idx = tuple(self.action_sets[i].index(a) for i, a in enumerate(alpha))
            arr[idx] = vec
        return arr

    def utility(self, alpha: tuple[str, ...], player: int) -> float:
        return self.utilities[alpha][player]

    def expected_utilities(self, profile: StrategyProfile) -> np.ndarray:
        """Expected utility vector under independent mixing."""
        if len(profile.strategies) != self.num_players:
            raise InputError("profile length does not match player count")
        out = np.zeros(self.num_players)
        for alpha, vec in self.utilities.items():
            p = 1.0
            for i, a in enumerate(alpha):
                p *= profile.strategies[i].probability(a)
                if p == 0.0:
                    break
            if p:
                out += p * np.asarray(vec)
        return out

    def expected_utilities_joint(self, joint: JointDistribution) -> np.ndarray:
        out = np.zeros(self.num_players)
        for alpha, p in joint.probabilities.items():
            if alpha not in self.utilities:
                raise InputError(f"joint action {alpha} not in game")
            out += p * np.asarray(self.utilities[alpha])
        return out

    def negated(self) -> NormalFormGame:
        """Same game with all utilities negated.

        Minimisation queries run on the negated game and negate reported
        values back.
        """
        return NormalFormGame(
            self.action_sets,
            {alpha: tuple(-v for v in vec) for alpha, vec in self.utilities.items()},
        )


@dataclass(frozen=True)
class MixedStrategy:
    """Probability distribution over one player's actions."""

    distribution: dict[str, float]

    def __post_init__(self):
        total = 0.0
        for a, p in self.distribution.items():
            if p < -PROB_TOL:
                raise InputError(f"negative probability {p} for action {a}")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            raise InputError(f"probabilities sum to {total}, not 1")

    def probability(self, action: str) -> float:
        return self.distribution.get(action, 0.0)

    def support(self) -> set[str]:
        return {a for a, p in self.distribution.items() if p > PROB_TOL}

    @staticmethod
    def pure(action: str) -> MixedStrategy:
        return MixedStrategy({action: 1.0})

    @staticmethod
    def uniform(actions) -> MixedStrategy:
        acts = list(actions)
        return MixedStrategy({a: 1.0 / len(acts) for a in acts})

    def vector(self, actions) -> np.ndarray:
        return np.array([self.probability(a) for a in actions])


@dataclass(frozen=True)
class StrategyProfile:
    """One mixed strategy per player."""

    strategies: tuple[MixedStrategy, ...]

    def check_against(self, game: NormalFormGame):
        if len(self.strategies) != game.num_players:
            raise InputError("profile length does not match player count")
        for i, strat in enumerate(self.strategies):
            extra = strat.support() - set(game.action_sets[i])
            if extra:
                raise InputError(f"player {i} puts mass on unknown actions {sorted(extra)}")

    def without(self, player: int) -> tuple[MixedStrategy, ...]:
        """The tuple with `player`'s strategy removed."""
        return self.strategies[:player] + self.strategies[player + 1:]

    def replace(self, player: int, strategy: MixedStrategy) -> StrategyProfile:
        """The profile with `player`'s strategy substituted."""
        strats = list(self.strategies)
        strats[player] = strategy
        return StrategyProfile(tuple(strats))

    def as_joint(self, game: NormalFormGame) -> JointDistribution:
        """Product distribution over joint actions."""
        probs = {}
        for alpha in itertools.product(*game.action_sets):
            p = 1.0
            for i, a in enumerate(alpha):
                p *= self.strategies[i].probability(a)
            if p > 0.0:
                probs[alpha] = p
        return JointDistribution(probs)


@dataclass(frozen=True)
class JointDistribution:
    """Distribution over joint action tuples (a shared-signal strategy)."""

    probabilities: dict[tuple[str, ...], float]

    def __post_init__(self):
        total = 0.0
        for alpha, p in self.probabilities.items():
            if p < -PROB_TOL:
                raise InputError(f"negative probability {p} for {alpha}")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            raise InputError(f"joint probabilities sum to {total}, not 1")

    def probability(self, alpha: tuple[str, ...]) -> float:
        return self.probabilities.get(alpha, 0.0)

    def marginal(self, player: int) -> dict[str, float]:
        out: dict[str, float] = {}
        for alpha, p in self.probabilities.items():
            out[alpha[player]] = out.get(alpha[player], 0.0) + p
        return out


def read_nfg_table(text: str) -> NormalFormGame:
    """Parse the plain-text table format: one `a1 ... an : u1 ... un` line
    per joint action, `//` comments."""
    rows = []
    n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise InputError(f"line {lineno}: expected `actions : utilities`")
        left, right = line.split(":", 1)
        actions = tuple(left.split())
        try:
            utils = tuple(float(tok) for tok in right.split())
        except ValueError as exc:
            raise InputError(f"line {lineno}: bad utility value ({exc})") from None
        if n is None:
            n = len(actions)
        if len(actions) != n or len(utils) != n:
            raise InputError(f"line {lineno}: expected {n} actions and {n} utilities")
        rows.append((actions, utils))
    if not rows:
        raise InputError("empty game table")
    action_sets = []
    for i in range(n):
        seen: list[str] = []
        for actions, _ in rows:
            if actions[i] not in seen:
                seen.append(actions[i])
        action_sets.append(tuple(seen))
    utilities = {actions: utils for actions, utils in rows}
    if len(utilities) != len(rows):
        raise InputError("duplicate joint action line")
    return NormalFormGame(tuple(action_sets), utilities)


def write_nfg_table(game: NormalFormGame) -> str:
    lines = []
    for alpha in itertools.product(*game.action_sets):
        us = " ".join(format(u, ".17g") for u in game.utilities[alpha])
        lines.append(f"{' '.join(alpha)} : {us}")
    return "\n".join(lines) + "\n"
