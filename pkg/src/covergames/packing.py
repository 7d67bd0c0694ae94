"""Packing reinterpretation of a covering instance.

Here an off-agent pays its own cost and an on-agent pays the weight of its
fully-covered sets (every member on). Flipping all actions maps one view onto
the other; for size-2 sets the equilibrium on-sets of the packing view are
exactly the maximal independent sets of the underlying graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .game import COST_TOL, CoveringInstance, JointState, is_nash


@dataclass(frozen=True)
class PackingView:
    """A cost reinterpretation over the same instance (no data is copied)."""

    instance: CoveringInstance
    interpretation: str = "packing"


def packing_agent_cost(view: PackingView, s: JointState, i: int) -> float:
    """Own cost if off, else the weight of fully-covered sets containing i."""
    inst = view.instance
    if s.n != inst.n:
        raise ValueError(f"state length {s.n} != n={inst.n}")
    if not 0 <= i < inst.n:
        raise IndexError(f"agent id {i} out of range [0, {inst.n})")
    if not s.actions[i]:
        return inst.costs[i]
    acts = s.actions
    return sum(
        inst.sets[sid].weight
        for sid in inst.incident[i]
        if all(acts[j] for j in inst.sets[sid].members)
    )


def packing_social_cost(view: PackingView, s: JointState) -> float:
    return sum(packing_agent_cost(view, s, i) for i in range(view.instance.n))


def relabel_state(s: JointState) -> JointState:
    """Flip every action (an involution)."""
    return JointState(tuple(not a for a in s.actions))


def is_packing_nash(view: PackingView, s: JointState) -> bool:
    """No agent strictly gains from flipping, under the packing costs."""
    inst = view.instance
    acts = s.actions
    for i in range(inst.n):
        # Weight i would pay when on: sets where every other member is on.
        w_on = sum(
            inst.sets[sid].weight
            for sid in inst.incident[i]
            if all(acts[j] for j in inst.sets[sid].members if j != i)
        )
        c = inst.costs[i]
        if acts[i] and w_on > c + COST_TOL:
            return False
        if not acts[i] and c > w_on + COST_TOL:
            return False
    return True


@dataclass(frozen=True)
class CorrespondenceReport:
    """Result of exhaustively comparing equilibria across the two views."""

    n: int
    covering_nash: tuple[JointState, ...]
    packing_nash: tuple[JointState, ...]
    matches: bool
    counterexamples: tuple[JointState, ...] = field(default_factory=tuple)


def nash_correspondence_check(inst: CoveringInstance, nmax: int = 22) -> CorrespondenceReport:
    """Enumerate all states and compare packing equilibria against relabeled
    covering equilibria.

    A counterexample is a state that is an equilibrium in exactly one view
    after relabeling. Refuses instances with more than ``nmax`` agents.
    """
    if inst.n > nmax:
        raise ValueError(f"refusing exhaustive check for n={inst.n} > nmax={nmax}")
    view = PackingView(inst)
    covering: list[JointState] = []
    packing: list[JointState] = []
    mismatches: list[JointState] = []
    for code in range(1 << inst.n):
        s = JointState(tuple((code >> (inst.n - 1 - k)) & 1 == 1 for k in range(inst.n)))
        cov = is_nash(inst, s).is_nash
        if cov:
            covering.append(s)
        pack = is_packing_nash(view, relabel_state(s))
        if pack:
            packing.append(relabel_state(s))
        if cov != pack:
            mismatches.append(s)
    return CorrespondenceReport(
        n=inst.n,
        covering_nash=tuple(covering),
        packing_nash=tuple(packing),
        matches=not mismatches,
        counterexamples=tuple(mismatches),
    )
