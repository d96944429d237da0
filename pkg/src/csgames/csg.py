"""Concurrent stochastic game model: states, joint actions, transitions.

States, players and actions are interned to dense integer ids at build
time; external names live in symbol tables on the game object. Action id
0 is the idle action of every player, so joint actions are uniform id
tuples. Transition distributions are sparse successor lists.

All types are immutable after construction and safe to share between
concurrent readers.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .games import NormalFormGame

IDLE = "<idle>"

SUM_TOL = 1e-12  # model validation; computed strategies use 1e-9


@dataclass(frozen=True)
class RewardStructure:
    """State rewards plus joint-action rewards, id-keyed."""

    name: str
    state_rewards: dict[int, float] = field(default_factory=dict)
    action_rewards: dict[tuple[int, tuple[int, ...]], float] = field(default_factory=dict)

    def state_reward(self, state: int) -> float:
        return self.state_rewards.get(state, 0.0)

    def action_reward(self, state: int, alpha: tuple[int, ...]) -> float:
        return self.action_rewards.get((state, alpha), 0.0)


@dataclass(frozen=True)
class CoalitionPartition:
    """Disjoint groups of player names, each acting as one player."""

    coalitions: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        seen: set[str] = set()
        for group in self.coalitions:
            if not group:
                raise InputError("empty coalition")
            for p in group:
                if p in seen:
                    raise InputError(f"player {p!r} appears in two coalitions")
                seen.add(p)

    @property
    def members(self) -> set[str]:
        return {p for group in self.coalitions for p in group}


class Csg:
    """Explicit concurrent stochastic game.

    Construction interns everything; the raw tables passed in are
    name-based. `transitions` maps (state name, joint action name tuple)
    to [(successor name, probability)]; idle components are None or IDLE.
    """

    def __init__(
        self,
        players,
        action_sets,
        states,
        initial,
        transitions,
        labels=None,
        rewards=None,
        valuations=None,
    ):
        self.players: tuple[str, ...] = tuple(players)
        if not self.players:
            raise InputError("a game needs at least one player")
        if len(set(self.players)) != len(self.players):
            raise InputError("duplicate player names")
        self.action_names: tuple[tuple[str, ...], ...] = tuple(
            (IDLE,) + tuple(acts) for acts in action_sets
        )
        if len(self.action_names) != len(self.players):
            raise InputError("need one action set per player")
        self.state_names: tuple[str, ...] = tuple(states)
        if len(set(self.state_names)) != len(self.state_names):
            raise InputError("duplicate state names")
        self._state_id = {name: i for i, name in enumerate(self.state_names)}
        if initial not in self._state_id:
            raise InputError(f"initial state {initial!r} is not a state")
        self.initial: int = self._state_id[initial]
        self._action_id = [
            {name: i for i, name in enumerate(acts)} for acts in self.action_names
        ]

        n = len(self.players)
        labels = labels or {}
        self.labels: tuple[frozenset[str], ...] = tuple(
            frozenset(labels.get(s, ())) for s in self.state_names
        )
        self.atomic_propositions: frozenset[str] = frozenset(
            ap for labs in self.labels for ap in labs
        )
        valuations = valuations or {}
        self.valuations: tuple[dict, ...] = tuple(
            dict(valuations.get(s, {})) for s in self.state_names
        )

        self._transitions: dict[tuple[int, tuple[int, ...]], tuple[tuple[int, float], ...]] = {}
        for (sname, alpha), succs in transitions.items():
            s = self._require_state(sname)
            aid = self._intern_joint(alpha)
            if (s, aid) in self._transitions:
                raise InputError(f"duplicate transition for {sname!r} / {alpha}")
            entry = []
            for tname, prob in succs:
                entry.append((self._require_state(tname), float(prob)))
            self._transitions[(s, aid)] = tuple(entry)

        # Per-state availability, derived from the defined joint actions.
        self._avail: list[tuple[tuple[int, ...], ...]] = []
        self._joint: list[tuple[tuple[int, ...], ...]] = []
        per_state: dict[int, set[tuple[int, ...]]] = {}
        for (s, aid) in self._transitions:
            per_state.setdefault(s, set()).add(aid)
        for s in range(len(self.state_names)):
            alphas = per_state.get(s, set())
            avail = []
            for i in range(n):
                ids = sorted({a[i] for a in alphas} - {0})
                avail.append(tuple(ids) if ids else (0,))
            self._avail.append(tuple(avail))
            self._joint.append(tuple(sorted(itertools.product(*avail))))

        self.rewards: tuple[RewardStructure, ...] = tuple(
            self._intern_reward(r) for r in (rewards or ())
        )
        self._reward_by_name = {r.name: r for r in self.rewards}

    # -- symbol handling -----------------------------------------------------

    def _require_state(self, name) -> int:
        if name not in self._state_id:
            raise InputError(f"unknown state {name!r}")
        return self._state_id[name]

    def _require_player(self, name) -> int:
        if name not in self.players:
            raise InputError(f"unknown player {name!r}")
        return self.players.index(name)

    def _intern_joint(self, alpha) -> tuple[int, ...]:
        if len(alpha) != len(self.players):
            raise InputError(f"joint action {alpha} has wrong arity")
        out = []
        for i, a in enumerate(alpha):
            if a is None or a == IDLE:
                out.append(0)
            elif a in self._action_id[i]:
                out.append(self._action_id[i][a])
            else:
                raise InputError(f"unknown action {a!r} for player {self.players[i]!r}")
        return tuple(out)

    def _intern_reward(self, spec) -> RewardStructure:
        name, state_rewards, action_rewards = spec
        sr = {self._require_state(s): float(v) for s, v in state_rewards.items()}
        ar = {}
        for (s, alpha), v in action_rewards.items():
            ar[(self._require_state(s), self._intern_joint(alpha))] = float(v)
        return RewardStructure(name, sr, ar)

    # -- queries ---------------------------------------------------------------

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    @property
    def num_players(self) -> int:
        return len(self.players)

    def state_id(self, name) -> int:
        return self._require_state(name)

    def action_name(self, player: int, action_id: int) -> str:
        return self.action_names[player][action_id]

    def action_id(self, player: int, name: str) -> int:
        if name is None or name == IDLE:
            return 0
        if name not in self._action_id[player]:
            raise InputError(f"unknown action {name!r} for player {self.players[player]!r}")
        return self._action_id[player][name]

    def joint_action_names(self, alpha: tuple[int, ...]) -> tuple[str, ...]:
        return tuple(self.action_names[i][a] for i, a in enumerate(alpha))

    def available(self, state: int, player: int) -> tuple[int, ...]:
        return self._avail[state][player]

    def joint_actions(self, state: int) -> tuple[tuple[int, ...], ...]:
        return self._joint[state]

    def successors(self, state: int, alpha: tuple[int, ...]):
        try:
            return self._transitions[(state, alpha)]
        except KeyError:
            raise InputError(
                f"no transition for state {self.state_names[state]!r}, "
                f"joint action {self.joint_action_names(alpha)}"
            ) from None

    def transition_items(self):
        return self._transitions.items()

    def reward_structure(self, name: str) -> RewardStructure:
        if name not in self._reward_by_name:
            raise InputError(f"unknown reward structure {name!r}")
        return self._reward_by_name[name]


def available_actions(game: Csg, state, player) -> set[str]:
    """Actions player may take in a state; the idle marker when none."""
    s = game.state_id(state) if not isinstance(state, int) else state
    if isinstance(player, str):
        p = game._require_player(player)
    else:
        if not 0 <= player < game.num_players:
            raise InputError(f"unknown player index {player}")
        p = player
    if not 0 <= s < game.num_states:
        raise InputError(f"unknown state index {s}")
    return {game.action_names[p][a] for a in game.available(s, p)}


def validate_csg(game: Csg) -> list[str]:
    """All invariant violations, as human-readable diagnostics."""
    problems = []
    defined = {}
    for (s, alpha), succs in game.transition_items():
        defined.setdefault(s, set()).add(alpha)
        total = 0.0
        for succ, prob in succs:
            if prob < 0.0:
                problems.append(
                    f"state {game.state_names[s]!r}, action "
                    f"{game.joint_action_names(alpha)}: negative probability {prob}"
                )
            total += prob
        if abs(total - 1.0) > SUM_TOL:
            problems.append(
                f"state {game.state_names[s]!r}, action "
                f"{game.joint_action_names(alpha)}: distribution sum {total!r} != 1"
            )
    for s in range(game.num_states):
        expected = set(itertools.product(*(game.available(s, i) for i in range(game.num_players))))
        got = defined.get(s, set())
        for alpha in expected - got:
            problems.append(
                f"state {game.state_names[s]!r}: joint action "
                f"{game.joint_action_names(alpha)} is available but has no transition"
            )
        for alpha in got - expected:
            problems.append(
                f"state {game.state_names[s]!r}: transition on unavailable joint action "
                f"{game.joint_action_names(alpha)}"
            )
    for reward in game.rewards:
        for (s, alpha) in reward.action_rewards:
            if alpha not in defined.get(s, set()):
                problems.append(
                    f"reward {reward.name!r}: action reward on undefined transition "
                    f"{game.state_names[s]!r}/{game.joint_action_names(alpha)}"
                )
        for mapping in (reward.state_rewards, reward.action_rewards):
            for key, v in mapping.items():
                if not np.isfinite(v):
                    problems.append(f"reward {reward.name!r}: non-finite value at {key}")
    return problems


def build_coalition_game(game: Csg, partition: CoalitionPartition) -> Csg:
    """Group players into coalitions acting as single players.

    Players not covered by the partition are appended as one final
    coalition. Coalition actions are tuples of member actions (rendered
    as comma-joined names); rewards, labels and valuations carry over.
    The member decomposition of every coalition action is recorded in
    `coalition_members` / `action_lift` on the result for strategy
    lift-back.
    """
    for p in partition.members:
        if p not in game.players:
            raise InputError(f"unknown player {p!r} in partition")
    groups = [tuple(group) for group in partition.coalitions]
    uncovered = tuple(p for p in game.players if p not in partition.members)
    if uncovered:
        groups.append(uncovered)
    member_ids = [tuple(game.players.index(p) for p in group) for group in groups]

    def lift_name(parts: tuple[str, ...]) -> str:
        return "(" + ",".join(parts) + ")"

    # Collect coalition actions per group over all states.
    action_sets: list[list[str]] = [[] for _ in groups]
    lift_back: list[dict[str, tuple[int, ...]]] = [dict() for _ in groups]
    transitions = {}
    for (s, alpha), succs in game.transition_items():
        coalition_alpha = []
        for g, ids in enumerate(member_ids):
            parts = tuple(alpha[i] for i in ids)
            if all(a == 0 for a in parts):
                coalition_alpha.append(None)
                continue
            name = lift_name(tuple(game.action_names[i][alpha[i]] for i in ids))
            if name not in lift_back[g]:
                lift_back[g][name] = parts
                action_sets[g].append(name)
            coalition_alpha.append(name)
        sname = game.state_names[s]
        transitions[(sname, tuple(coalition_alpha))] = [
            (game.state_names[t], p) for t, p in succs
        ]

    rewards = []
    for reward in game.rewards:
        sr = {game.state_names[s]: v for s, v in reward.state_rewards.items()}
        ar = {}
        for (s, alpha), v in reward.action_rewards.items():
            coalition_alpha = []
            for g, ids in enumerate(member_ids):
                parts = tuple(alpha[i] for i in ids)
                if all(a == 0 for a in parts):
                    coalition_alpha.append(None)
                else:
                    coalition_alpha.append(
                        lift_name(tuple(game.action_names[i][alpha[i]] for i in ids))
                    )
            ar[(game.state_names[s], tuple(coalition_alpha))] = v
        rewards.append((reward.name, sr, ar))

    result = Csg(
        players=[lift_name(g) for g in groups],
        action_sets=[tuple(acts) for acts in action_sets],
        states=game.state_names,
        initial=game.state_names[game.initial],
        transitions=transitions,
        labels={s: set(labs) for s, labs in zip(game.state_names, game.labels)},
        rewards=rewards,
        valuations={s: v for s, v in zip(game.state_names, game.valuations) if v},
    )
    result.coalition_members = tuple(groups)
    result.action_lift = tuple(lift_back)
    return result


def local_nfg(game: Csg, state: int, continuation, rewards=None) -> NormalFormGame:
    """One-shot game at a state from continuation values.

    continuation[s'] must be a length-n vector for every state;
    u_i(alpha) = immediate_i(state, alpha) + sum_s' P(s') continuation[s'][i].
    `rewards`, when given, is one (state_reward_fn, action_reward_fn)-like
    RewardStructure per player supplying the immediate term.
    """
    n = game.num_players
    action_sets = []
    for i in range(n):
        action_sets.append(tuple(game.action_names[i][a] for a in game.available(state, i)))
    utilities = {}
    for alpha in game.joint_actions(state):
        vec = np.zeros(n)
        if rewards is not None:
            for i, reward in enumerate(rewards):
                if reward is not None:
                    vec[i] += reward.state_reward(state)
                    vec[i] += reward.action_reward(state, alpha)
        for succ, prob in game.successors(state, alpha):
            cont = continuation[succ]
            if cont is None:
                raise SystemError(f"missing continuation value for state {succ}")
            vec += prob * np.asarray(cont, dtype=float)
        names = tuple(game.action_names[i][a] for i, a in enumerate(alpha))
        utilities[names] = tuple(float(v) for v in vec)
    return NormalFormGame(tuple(action_sets), utilities)


# --- interchange format -------------------------------------------------------


def export_game(game: Csg) -> str:
    """Canonical JSON for the explicit-game interchange format."""
    doc = {
        "players": [
            {"name": p, "actions": list(game.action_names[i][1:])}
            for i, p in enumerate(game.players)
        ],
        "states": [
            {"name": s, "labels": sorted(game.labels[i])}
            for i, s in enumerate(game.state_names)
        ],
        "initial": game.state_names[game.initial],
        "transitions": [
            {
                "state": game.state_names[s],
                "joint_action": [
                    None if a == 0 else game.action_names[i][a]
                    for i, a in enumerate(alpha)
                ],
                "successors": [
                    {"state": game.state_names[t], "prob": p} for t, p in succs
                ],
            }
            for (s, alpha), succs in sorted(game.transition_items())
        ],
        "rewards": [
            {
                "name": r.name,
                "state_rewards": {
                    game.state_names[s]: v for s, v in sorted(r.state_rewards.items())
                },
                "action_rewards": [
                    {
                        "state": game.state_names[s],
                        "joint_action": [
                            None if a == 0 else game.action_names[i][a]
                            for i, a in enumerate(alpha)
                        ],
                        "value": v,
                    }
                    for (s, alpha), v in sorted(r.action_rewards.items())
                ],
            }
            for r in game.rewards
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def import_game(text: str) -> Csg:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"bad game file: {exc}") from None
    try:
        players = [p["name"] for p in doc["players"]]
        action_sets = [tuple(p["actions"]) for p in doc["players"]]
        states = [s["name"] for s in doc["states"]]
        labels = {s["name"]: set(s.get("labels", ())) for s in doc["states"]}
        transitions = {}
        for t in doc["transitions"]:
            key = (t["state"], tuple(t["joint_action"]))
            transitions[key] = [(e["state"], e["prob"]) for e in t["successors"]]
        rewards = []
        for r in doc.get("rewards", ()):
            ar = {}
            for item in r.get("action_rewards", ()):
                ar[(item["state"], tuple(item["joint_action"]))] = item["value"]
            rewards.append((r["name"], dict(r.get("state_rewards", {})), ar))
        return Csg(
            players=players,
            action_sets=action_sets,
            states=states,
            initial=doc["initial"],
            transitions=transitions,
            labels=labels,
            rewards=rewards,
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad game file: missing or malformed field ({exc})") from None
