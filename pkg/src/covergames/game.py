"""Core covering game: instances, joint states, costs, potential, best response.

Agents choose between ``on`` and ``off``. An on-agent pays its own cost; an
off-agent pays the total weight of its incident sets that contain no on-agent
at all. The game is an exact potential game, so asynchronous best-response
dynamics always reaches a pure Nash equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, NamedTuple

# Cost aggregates are compared with this absolute tolerance everywhere; ties
# within the tolerance are treated as exact ties.
COST_TOL = 1e-9


@dataclass(frozen=True)
class WeightedSet:
    """A hyperedge: distinct member agent ids and a positive weight."""

    members: tuple[int, ...]
    weight: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(int(i) for i in self.members))
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class CoveringInstance:
    """A covering game instance: ``n`` agents, per-agent costs, weighted sets.

    Construction canonicalizes the set family (members sorted ascending, sets
    sorted lexicographically by member list) and validates:

    * every set is non-empty with distinct members in ``[0, n)``,
    * no two sets share the same member list (express multiplicity via weight),
    * all costs and weights are strictly positive.
    """

    n: int
    costs: tuple[float, ...]
    sets: tuple[WeightedSet, ...]

    def __post_init__(self) -> None:
        n = int(self.n)
        costs = tuple(float(c) for c in self.costs)
        if n < 0:
            raise ValueError(f"agent count must be non-negative, got {n}")
        if len(costs) != n:
            raise ValueError(f"expected {n} costs, got {len(costs)}")
        for i, c in enumerate(costs):
            if not c > 0.0:
                raise ValueError(f"cost of agent {i} must be > 0, got {c}")

        canonical: list[WeightedSet] = []
        for idx, ws in enumerate(self.sets):
            if not isinstance(ws, WeightedSet):
                ws = WeightedSet(tuple(ws[0]), ws[1])
            members = tuple(sorted(ws.members))
            if not members:
                raise ValueError(f"set {idx} is empty")
            if len(set(members)) != len(members):
                raise ValueError(f"set {idx} has repeated members: {members}")
            if members[0] < 0 or members[-1] >= n:
                raise ValueError(f"set {idx} has members outside [0, {n}): {members}")
            if not ws.weight > 0.0:
                raise ValueError(f"set {idx} weight must be > 0, got {ws.weight}")
            canonical.append(WeightedSet(members, ws.weight))

        canonical.sort(key=lambda ws: ws.members)
        for a, b in zip(canonical, canonical[1:]):
            if a.members == b.members:
                raise ValueError(
                    f"duplicate set with members {list(a.members)}; merge by weight instead"
                )

        object.__setattr__(self, "n", n)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "sets", tuple(canonical))

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """For each agent, the ids of the sets containing it."""
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for sid, ws in enumerate(self.sets):
            for i in ws.members:
                inc[i].append(sid)
        return tuple(tuple(v) for v in inc)

    @property
    def num_sets(self) -> int:
        return len(self.sets)

    def total_weight(self) -> float:
        return sum(ws.weight for ws in self.sets)


@dataclass(frozen=True)
class JointState:
    """One on/off action per agent; ``True`` means on."""

    actions: tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(bool(a) for a in self.actions))

    @classmethod
    def all_on(cls, n: int) -> JointState:
        return cls((True,) * n)

    @classmethod
    def all_off(cls, n: int) -> JointState:
        return cls((False,) * n)

    @classmethod
    def from_on_agents(cls, n: int, on: Iterable[int]) -> JointState:
        acts = [False] * n
        for i in on:
            acts[i] = True
        return cls(tuple(acts))

    @classmethod
    def from_string(cls, text: str) -> JointState:
        """Parse a '0101' action string ('1' = on)."""
        if any(ch not in "01" for ch in text):
            raise ValueError(f"action string must contain only 0/1, got {text!r}")
        return cls(tuple(ch == "1" for ch in text))

    def to_string(self) -> str:
        return "".join("1" if a else "0" for a in self.actions)

    @property
    def n(self) -> int:
        return len(self.actions)

    def on_agents(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.actions) if a)

    def off_agents(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.actions) if not a)

    def with_action(self, i: int, action: bool) -> JointState:
        acts = list(self.actions)
        acts[i] = bool(action)
        return JointState(tuple(acts))

    def flipped(self, i: int) -> JointState:
        return self.with_action(i, not self.actions[i])


@dataclass(frozen=True)
class InstanceStats:
    """Structural statistics of an instance.

    ``delta1`` / ``delta2`` are the maximum number of sets containing any one
    agent / any fixed pair of agents. Weight extremes are ``None`` when the
    set family is empty.
    """

    f_max: int
    delta1: int
    delta2: int
    c_max: float
    c_min: float
    w_max: float | None
    w_min: float | None

    def delta(self, k: int) -> int:
        if k == 1:
            return self.delta1
        if k == 2:
            return self.delta2
        raise ValueError(f"only k in {{1, 2}} supported, got {k}")


class NashResult(NamedTuple):
    is_nash: bool
    witness: int | None


def _check_state(inst: CoveringInstance, s: JointState) -> None:
    if s.n != inst.n:
        raise ValueError(f"state length {s.n} does not match instance n={inst.n}")


def _check_agent(inst: CoveringInstance, i: int) -> None:
    if not 0 <= i < inst.n:
        raise IndexError(f"agent id {i} out of range [0, {inst.n})")


def uncovered_sets(
    inst: CoveringInstance, s: JointState, agent: int | None = None
) -> tuple[int, ...]:
    """Ids of sets with every member off; restricted to one agent's incident
    sets when ``agent`` is given."""
    _check_state(inst, s)
    acts = s.actions
    if agent is None:
        return tuple(
            sid for sid, ws in enumerate(inst.sets) if not any(acts[j] for j in ws.members)
        )
    _check_agent(inst, agent)
    return tuple(
        sid
        for sid in inst.incident[agent]
        if not any(acts[j] for j in inst.sets[sid].members)
    )


def agent_cost(inst: CoveringInstance, s: JointState, i: int) -> float:
    """Cost of agent ``i``: its own cost if on, else the weight of its
    incident uncovered sets."""
    _check_state(inst, s)
    _check_agent(inst, i)
    if s.actions[i]:
        return inst.costs[i]
    acts = s.actions
    return sum(
        inst.sets[sid].weight
        for sid in inst.incident[i]
        if not any(acts[j] for j in inst.sets[sid].members)
    )


def social_cost(inst: CoveringInstance, s: JointState) -> float:
    """Total cost: on-agent costs plus ``|set| * weight`` per uncovered set.

    Equals the sum of all agent costs (each member of an uncovered set pays
    its weight once).
    """
    _check_state(inst, s)
    acts = s.actions
    total = sum(c for c, a in zip(inst.costs, acts) if a)
    for ws in inst.sets:
        if not any(acts[j] for j in ws.members):
            total += ws.size * ws.weight
    return total


def potential(inst: CoveringInstance, s: JointState) -> float:
    """Exact potential: on-agent costs plus the weight of uncovered sets."""
    _check_state(inst, s)
    acts = s.actions
    total = sum(c for c, a in zip(inst.costs, acts) if a)
    for ws in inst.sets:
        if not any(acts[j] for j in ws.members):
            total += ws.weight
    return total


def _weight_if_off(inst: CoveringInstance, s: JointState, i: int) -> float:
    """Weight of i's incident sets that are uncovered when i plays off."""
    acts = s.actions
    total = 0.0
    for sid in inst.incident[i]:
        if not any(acts[j] for j in inst.sets[sid].members if j != i):
            total += inst.sets[sid].weight
    return total


def best_response(inst: CoveringInstance, s: JointState, i: int) -> bool:
    """Best response of agent ``i`` given everyone else's actions in ``s``.

    Returns on when its cost is strictly below the weight it would pay off,
    off in the strict reverse case, and the agent's current action on a tie
    (within ``COST_TOL``) so fixpoints are well defined.
    """
    _check_state(inst, s)
    _check_agent(inst, i)
    w_off = _weight_if_off(inst, s, i)
    c = inst.costs[i]
    if c < w_off - COST_TOL:
        return True
    if c > w_off + COST_TOL:
        return False
    return s.actions[i]


def is_nash(inst: CoveringInstance, s: JointState) -> NashResult:
    """Whether no agent has a strictly improving deviation.

    On failure the witness is the lowest-id agent whose best response differs
    strictly from its current action.
    """
    _check_state(inst, s)
    for i in range(inst.n):
        w_off = _weight_if_off(inst, s, i)
        c = inst.costs[i]
        if s.actions[i]:
            if c > w_off + COST_TOL:
                return NashResult(False, i)
        else:
            if w_off > c + COST_TOL:
                return NashResult(False, i)
    return NashResult(True, None)


def compute_stats(inst: CoveringInstance) -> InstanceStats:
    """Structural statistics: largest set, first/second order degrees, cost
    and weight extremes."""
    f_max = max((ws.size for ws in inst.sets), default=0)
    delta1 = max((len(v) for v in inst.incident), default=0)
    pair_counts: dict[tuple[int, int], int] = {}
    for ws in inst.sets:
        for pair in combinations(ws.members, 2):
            pair_counts[pair] = pair_counts.get(pair, 0) + 1
    delta2 = max(pair_counts.values(), default=0)
    weights = [ws.weight for ws in inst.sets]
    return InstanceStats(
        f_max=f_max,
        delta1=delta1,
        delta2=delta2,
        c_max=max(inst.costs) if inst.costs else 0.0,
        c_min=min(inst.costs) if inst.costs else 0.0,
        w_max=max(weights) if weights else None,
        w_min=min(weights) if weights else None,
    )
