"""Best-response dynamics and the two broadcast protocols.

``run_best_response`` settles a state to a pure Nash equilibrium. ``run_psa``
runs the two-phase advertising protocol: a random receptive subset is pinned
to the broadcast profile while the rest best-respond to a constrained
equilibrium, then everyone is released. ``run_ltd`` runs the exploration
protocol: agents activated uniformly at random either follow the broadcast or
best-respond, then commit once each and the responders settle.

All runs are deterministic given the instance, the broadcast profile, and the
config (including its seed). Traces record flips for best-response phases and
every activation for the exploration phase, so protocol time is preserved
where the update order matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import IO

import numpy as np

from .game import COST_TOL, CoveringInstance, JointState

MODE_BR = "best-response"
MODE_AD = "follow-ad"
MODE_COMMIT = "commit"

SCHEDULE_POLICIES = ("uniform-random", "random-permutation-sweeps", "round-robin")
COMMIT_POLICIES = ("myopic-compare", "always-best-response", "bernoulli-p")


@dataclass(frozen=True)
class ScheduleConfig:
    """Activation policy, seed, and step cap for best-response settling.

    ``max_steps`` of ``None`` derives a cap from the instance's potential
    descent (see ``default_step_cap``); a run that exhausts the cap returns a
    trace with ``converged=False`` rather than pretending to have settled.
    """

    policy: str = "random-permutation-sweeps"
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.policy not in SCHEDULE_POLICIES:
            raise ValueError(f"unknown schedule policy {self.policy!r}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class PsaConfig:
    """Advertising protocol parameters; each agent is receptive with
    probability ``alpha``. ``initial_state=None`` draws the arbitrary initial
    state uniformly from the schedule seed."""

    alpha: float
    schedule: ScheduleConfig = ScheduleConfig()
    initial_state: JointState | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class LtdConfig:
    """Exploration protocol parameters.

    Each activated agent follows the broadcast with its probability ``p_i``
    (all equal to ``beta`` when ``p`` is None) and best-responds otherwise.
    ``t_star``/``t_prime`` default to ceil(12 n ln(n+1)) and half of it.
    """

    beta: float
    seed: int = 0
    p: tuple[float, ...] | None = None
    t_star: int | None = None
    t_prime: int | None = None
    commit_policy: str = "myopic-compare"
    max_steps: int | None = None
    initial_state: JointState | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.commit_policy not in COMMIT_POLICIES:
            raise ValueError(f"unknown commit policy {self.commit_policy!r}")
        if self.p is not None:
            for i, pi in enumerate(self.p):
                if not self.beta <= pi <= 1.0:
                    raise ValueError(f"p[{i}]={pi} outside [beta, 1]")
        if self.t_star is not None and self.t_star < 1:
            raise ValueError("t_star must be >= 1")
        if self.t_star is not None and self.t_prime is not None:
            if not 0 < self.t_prime < self.t_star:
                raise ValueError("need 0 < t_prime < t_star")

    def resolve(self, n: int) -> tuple[np.ndarray, int, int]:
        """Per-agent follow probabilities and the (t_star, t_prime) pair."""
        p = np.full(n, self.beta) if self.p is None else np.asarray(self.p, dtype=float)
        if p.shape != (n,):
            raise ValueError(f"p has length {p.shape[0]}, expected {n}")
        t_star = self.t_star if self.t_star is not None else default_t_star(n)
        t_prime = self.t_prime if self.t_prime is not None else math.ceil(t_star / 2)
        if not 0 < t_prime < t_star:
            raise ValueError(f"need 0 < t_prime < t_star, got {t_prime}, {t_star}")
        return p, t_star, t_prime


@dataclass(frozen=True)
class TraceEvent:
    time: int
    agent: int
    old: bool
    new: bool
    mode: str
    potential: float


@dataclass(frozen=True)
class DynamicsTrace:
    """Record of one run: events (with the potential after each), the time at
    each phase boundary, the end-of-phase-1 state ``s_prime`` where the
    protocol has one, and the final state.

    Best-response phases record only actual flips; the exploration phase of
    the learn-then-decide protocol records every activation so that protocol
    time is reconstructible. ``converged=False`` means a step cap was
    exhausted and the trace is partial.
    """

    events: tuple[TraceEvent, ...]
    phase_ends: tuple[int, ...]
    s_prime: JointState | None
    s_final: JointState
    converged: bool
    steps_phase1: int
    steps_phase2: int
    final_potential: float
    # Agents still pinned to the broadcast in the final settling pass
    # (committed followers in learn-then-decide, empty otherwise).
    pinned_final: tuple[int, ...] = ()


@dataclass(frozen=True)
class PhaseDiagnostics:
    """End-of-phase-1 comparison between the broadcast profile and ``s_prime``.

    ``l_agents``/``r_agents`` partition agents by their broadcast action
    (on/off); ``l_off``/``r_on`` are the disagreements at the end of phase 1.
    ``f_r`` holds sets uncovered by the broadcast itself, ``f_bad`` sets
    covered by the broadcast but uncovered in ``s_prime``, and ``f_off`` sets
    whose on-side intersection is non-empty and entirely deviating.
    ``event_e_holds`` is the ordering event for learn-then-decide runs, None
    otherwise.
    """

    l_agents: tuple[int, ...]
    r_agents: tuple[int, ...]
    l_off: tuple[int, ...]
    r_on: tuple[int, ...]
    f_r: tuple[int, ...]
    f_bad: tuple[int, ...]
    f_off: tuple[int, ...]
    event_e_holds: bool | None = None


def default_t_star(n: int) -> int:
    """Exploration length: ceil(12 n ln(n+1)), several coupon-collector
    epochs so the phase-ordering event is near-certain at desk scale."""
    return math.ceil(12.0 * n * math.log(n + 1))


def _min_potential_gap(inst: CoveringInstance) -> float | None:
    """Smallest possible nonzero potential change, when costs and weights are
    recognizably small-denominator rationals; None otherwise."""
    lcm = 1
    for value in list(inst.costs) + [ws.weight for ws in inst.sets]:
        frac = Fraction(value).limit_denominator(10**6)
        if abs(float(frac) - value) > 1e-12 * max(1.0, abs(value)):
            return None
        lcm = lcm * frac.denominator // math.gcd(lcm, frac.denominator)
        if lcm > 10**9:
            return None
    return 1.0 / lcm


def default_step_cap(inst: CoveringInstance) -> int:
    """Activation cap for one settling pass: potential descent bounds the
    number of strict moves, padded by a factor of 10n for no-op activations.
    Falls back to a fixed million steps when no gap is computable."""
    gap = _min_potential_gap(inst)
    if gap is None or inst.n == 0:
        return 1_000_000
    return math.ceil(10 * inst.n * (1.0 + inst.total_weight() / gap))


class _Sim:
    """Mutable simulation state: actions, per-set on-counts, and a running
    potential maintained incrementally."""

    __slots__ = ("acts", "on_count", "pot", "_costs", "_weights", "_members", "_incident")

    def __init__(self, inst: CoveringInstance, acts: list[bool]):
        self._costs = inst.costs
        self._weights = [ws.weight for ws in inst.sets]
        self._members = [ws.members for ws in inst.sets]
        self._incident = inst.incident
        self.acts = acts
        self.on_count = [sum(1 for j in mem if acts[j]) for mem in self._members]
        self.pot = self._fresh_potential()

    def _fresh_potential(self) -> float:
        total = sum(c for c, a in zip(self._costs, self.acts) if a)
        total += sum(w for w, cnt in zip(self._weights, self.on_count) if cnt == 0)
        return total

    def weight_if_off(self, i: int) -> float:
        """Weight of i's incident sets that are (or become) uncovered when i
        plays off, given everyone else's current actions."""
        threshold = 1 if self.acts[i] else 0
        oc = self.on_count
        w = self._weights
        return sum(w[s] for s in self._incident[i] if oc[s] == threshold)

    def action_cost(self, i: int, action: bool) -> float:
        """Instantaneous cost of agent i playing ``action`` now."""
        return self._costs[i] if action else self.weight_if_off(i)

    def best_response(self, i: int) -> bool:
        w_off = self.weight_if_off(i)
        c = self._costs[i]
        if c < w_off - COST_TOL:
            return True
        if c > w_off + COST_TOL:
            return False
        return self.acts[i]

    def play(self, i: int, new: bool) -> float:
        """Set agent i's action, returning the potential change."""
        if new == self.acts[i]:
            return 0.0
        delta = 0.0
        oc = self.on_count
        w = self._weights
        if new:
            delta += self._costs[i]
            for s in self._incident[i]:
                if oc[s] == 0:
                    delta -= w[s]
                oc[s] += 1
        else:
            delta -= self._costs[i]
            for s in self._incident[i]:
                oc[s] -= 1
                if oc[s] == 0:
                    delta += w[s]
        self.acts[i] = new
        self.pot += delta
        return delta

    def refresh_potential(self) -> None:
        """Recompute the potential from scratch to cancel float drift."""
        fresh = self._fresh_potential()
        if abs(fresh - self.pot) > 1e-9 * (1.0 + abs(fresh)):
            raise RuntimeError(
                f"incremental potential drifted: tracked {self.pot}, fresh {fresh}"
            )
        self.pot = fresh

    def is_settled(self, agents: list[int]) -> bool:
        return all(self.best_response(i) == self.acts[i] for i in agents)

    def state(self) -> JointState:
        return JointState(tuple(self.acts))


class _Recorder:
    """Collects trace events; a disabled recorder only advances time."""

    __slots__ = ("events", "enabled", "time")

    def __init__(self, enabled: bool):
        self.events: list[TraceEvent] = []
        self.enabled = enabled
        self.time = 0

    def emit(self, agent: int, old: bool, new: bool, mode: str, pot: float) -> None:
        self.time += 1
        if self.enabled:
            self.events.append(TraceEvent(self.time, agent, old, new, mode, pot))


def _settle(
    sim: _Sim,
    free: list[int],
    policy: str,
    rng: np.random.Generator,
    cap: int,
    rec: _Recorder,
) -> tuple[int, bool]:
    """Run best-response updates over ``free`` until none improves or the cap
    is hit. Returns (activations used, converged). Only flips are recorded;
    every recorded flip strictly decreases the potential."""
    if not free:
        return 0, True
    steps = 0

    def activate(i: int) -> bool:
        new = sim.best_response(i)
        if new == sim.acts[i]:
            return False
        old = sim.acts[i]
        delta = sim.play(i, new)
        if delta >= 0.0:
            raise RuntimeError(f"best-response flip raised potential by {delta}")
        rec.emit(i, old, new, MODE_BR, sim.pot)
        return True

    if policy == "uniform-random":
        idle = 0
        while steps < cap:
            i = free[int(rng.integers(len(free)))]
            steps += 1
            if activate(i):
                idle = 0
            else:
                idle += 1
            if idle >= len(free):
                if sim.is_settled(free):
                    return steps, True
                idle = 0
        return steps, False

    sweep = sorted(free)
    while True:
        if policy == "random-permutation-sweeps":
            order = list(free)
            rng.shuffle(order)
        else:  # round-robin
            order = sweep
        changed = False
        for i in order:
            if steps >= cap:
                return steps, False
            steps += 1
            changed |= activate(i)
        if not changed:
            return steps, True


def _verify_settled(sim: _Sim, agents: list[int], label: str) -> None:
    if not sim.is_settled(agents):
        raise RuntimeError(f"{label} ended in a non-equilibrium state")


def _initial_actions(
    inst: CoveringInstance, given: JointState | None, rng: np.random.Generator
) -> list[bool]:
    if given is not None:
        if given.n != inst.n:
            raise ValueError(f"initial state length {given.n} != n={inst.n}")
        return list(given.actions)
    return [bool(b) for b in rng.integers(0, 2, size=inst.n)]


def run_best_response(
    inst: CoveringInstance,
    start: JointState,
    sched: ScheduleConfig,
    record_events: bool = True,
) -> DynamicsTrace:
    """Settle ``start`` to a pure Nash equilibrium under the given schedule."""
    if start.n != inst.n:
        raise ValueError(f"state length {start.n} != n={inst.n}")
    rng = np.random.default_rng(sched.seed)
    sim = _Sim(inst, list(start.actions))
    rec = _Recorder(record_events)
    cap = sched.max_steps if sched.max_steps is not None else default_step_cap(inst)
    steps, converged = _settle(sim, list(range(inst.n)), sched.policy, rng, cap, rec)
    sim.refresh_potential()
    if converged:
        _verify_settled(sim, list(range(inst.n)), "best-response run")
    return DynamicsTrace(
        events=tuple(rec.events),
        phase_ends=(rec.time,),
        s_prime=None,
        s_final=sim.state(),
        converged=converged,
        steps_phase1=steps,
        steps_phase2=0,
        final_potential=sim.pot,
    )


def compute_diagnostics(
    inst: CoveringInstance, s_ad: JointState, s_prime: JointState
) -> PhaseDiagnostics:
    """Exact set computations comparing the broadcast with an end-of-phase-1
    state; see PhaseDiagnostics for the field meanings."""
    if s_ad.n != inst.n or s_prime.n != inst.n:
        raise ValueError("state lengths must match the instance")
    ad = s_ad.actions
    sp = s_prime.actions
    l_agents = tuple(i for i in range(inst.n) if ad[i])
    r_agents = tuple(i for i in range(inst.n) if not ad[i])
    l_off = tuple(i for i in l_agents if not sp[i])
    r_on = tuple(i for i in r_agents if sp[i])
    l_off_set = set(l_off)

    f_r: list[int] = []
    f_bad: list[int] = []
    f_off: list[int] = []
    for sid, ws in enumerate(inst.sets):
        covered_ad = any(ad[j] for j in ws.members)
        covered_sp = any(sp[j] for j in ws.members)
        if not covered_ad:
            f_r.append(sid)
        elif not covered_sp:
            f_bad.append(sid)
        l_part = [j for j in ws.members if ad[j]]
        if l_part and all(j in l_off_set for j in l_part):
            f_off.append(sid)
    return PhaseDiagnostics(
        l_agents=l_agents,
        r_agents=r_agents,
        l_off=l_off,
        r_on=r_on,
        f_r=tuple(f_r),
        f_bad=tuple(f_bad),
        f_off=tuple(f_off),
    )


def run_psa(
    inst: CoveringInstance,
    s_ad: JointState,
    cfg: PsaConfig,
    record_events: bool = True,
) -> tuple[DynamicsTrace, PhaseDiagnostics]:
    """Two-phase advertising run.

    Phase 1 draws the receptive set i.i.d. with probability alpha, pins it to
    the broadcast, and settles the rest to an equilibrium constrained by the
    pinned agents. Phase 2 releases everyone and settles again. The seed
    stream is consumed in a fixed order: initial state (when arbitrary),
    receptive draws, then scheduling draws.
    """
    if s_ad.n != inst.n:
        raise ValueError(f"broadcast length {s_ad.n} != n={inst.n}")
    rng = np.random.default_rng(cfg.schedule.seed)
    acts = _initial_actions(inst, cfg.initial_state, rng)
    receptive = rng.random(inst.n) < cfg.alpha

    sim = _Sim(inst, acts)
    rec = _Recorder(record_events)
    for i in range(inst.n):
        if receptive[i] and sim.acts[i] != s_ad.actions[i]:
            old = sim.acts[i]
            sim.play(i, s_ad.actions[i])
            rec.emit(i, old, s_ad.actions[i], MODE_AD, sim.pot)

    free = [i for i in range(inst.n) if not receptive[i]]
    cap = cfg.schedule.max_steps if cfg.schedule.max_steps is not None else default_step_cap(inst)
    steps1, conv1 = _settle(sim, free, cfg.schedule.policy, rng, cap, rec)
    sim.refresh_potential()
    s_prime = sim.state()
    diag = compute_diagnostics(inst, s_ad, s_prime)
    phase1_end = rec.time

    if not conv1:
        return (
            DynamicsTrace(
                events=tuple(rec.events),
                phase_ends=(phase1_end,),
                s_prime=s_prime,
                s_final=s_prime,
                converged=False,
                steps_phase1=steps1,
                steps_phase2=0,
                final_potential=sim.pot,
            ),
            diag,
        )
    _verify_settled(sim, free, "advertising phase 1")

    steps2, conv2 = _settle(sim, list(range(inst.n)), cfg.schedule.policy, rng, cap, rec)
    sim.refresh_potential()
    if conv2:
        _verify_settled(sim, list(range(inst.n)), "advertising phase 2")
    return (
        DynamicsTrace(
            events=tuple(rec.events),
            phase_ends=(phase1_end, rec.time),
            s_prime=s_prime,
            s_final=sim.state(),
            converged=conv2,
            steps_phase1=steps1,
            steps_phase2=steps2,
            final_potential=sim.pot,
        ),
        diag,
    )


def run_ltd(
    inst: CoveringInstance,
    s_ad: JointState,
    cfg: LtdConfig,
    record_events: bool = True,
) -> tuple[DynamicsTrace, PhaseDiagnostics]:
    """Two-phase learn-then-decide run.

    Phase 1 performs t_star uniform-random activations; the activated agent
    follows the broadcast with its probability p_i and best-responds
    otherwise (every activation is recorded). Phase 2 visits agents once in
    random order: each commits to follower or responder per the commit
    policy and plays its committed choice, then responders settle to an
    equilibrium constrained by the pinned followers.

    The diagnostics carry the phase-1 ordering event: all of the broadcast's
    off-side updated, then all of its on-side before t_prime, then all of the
    off-side again within [t_prime, t_star].
    """
    if s_ad.n != inst.n:
        raise ValueError(f"broadcast length {s_ad.n} != n={inst.n}")
    n = inst.n
    rng = np.random.default_rng(cfg.seed)
    p, t_star, t_prime = cfg.resolve(n)
    acts = _initial_actions(inst, cfg.initial_state, rng)
    agents = rng.integers(0, n, size=t_star)
    coins = rng.random(t_star)

    sim = _Sim(inst, acts)
    rec = _Recorder(record_events)
    ad = s_ad.actions

    l_pending = {i for i in range(n) if ad[i]}
    r_all = {i for i in range(n) if not ad[i]}
    r_pending1 = set(r_all)
    r_pending2 = set(r_all)
    tau_r1: int | None = 0 if not r_all else None

    for t in range(1, t_star + 1):
        i = int(agents[t - 1])
        follows = coins[t - 1] < p[i]
        new = ad[i] if follows else sim.best_response(i)
        old = sim.acts[i]
        if new != old:
            delta = sim.play(i, new)
            if not follows and delta >= 0.0:
                raise RuntimeError(f"best-response flip raised potential by {delta}")
        rec.emit(i, old, new, MODE_AD if follows else MODE_BR, sim.pot)
        if tau_r1 is None:
            if i in r_pending1:
                r_pending1.discard(i)
                if not r_pending1:
                    tau_r1 = t
        elif t < t_prime:
            l_pending.discard(i)
        if t >= t_prime:
            r_pending2.discard(i)

    sim.refresh_potential()
    s_prime = sim.state()
    event_e = tau_r1 is not None and not l_pending and not r_pending2
    diag = replace(compute_diagnostics(inst, s_ad, s_prime), event_e_holds=event_e)
    phase1_end = rec.time

    commit_order = rng.permutation(n)
    commit_coins = rng.random(n)
    followers: list[int] = []
    responders: list[int] = []
    for rank, i_raw in enumerate(commit_order):
        i = int(i_raw)
        br = sim.best_response(i)
        if cfg.commit_policy == "always-best-response":
            follow = False
        elif cfg.commit_policy == "bernoulli-p":
            follow = commit_coins[rank] < p[i]
        else:  # myopic-compare: follow unless best response is strictly cheaper
            follow = sim.action_cost(i, ad[i]) <= sim.action_cost(i, br) + COST_TOL
        chosen = ad[i] if follow else br
        (followers if follow else responders).append(i)
        old = sim.acts[i]
        sim.play(i, chosen)
        rec.emit(i, old, chosen, MODE_COMMIT, sim.pot)

    cap = cfg.max_steps if cfg.max_steps is not None else default_step_cap(inst)
    steps2_settle, conv2 = _settle(
        sim, responders, "random-permutation-sweeps", rng, cap, rec
    )
    sim.refresh_potential()
    if conv2:
        _verify_settled(sim, responders, "learn-then-decide phase 2")
    return (
        DynamicsTrace(
            events=tuple(rec.events),
            phase_ends=(phase1_end, rec.time),
            s_prime=s_prime,
            s_final=sim.state(),
            converged=conv2,
            steps_phase1=t_star,
            steps_phase2=n + steps2_settle,
            final_potential=sim.pot,
            pinned_final=tuple(sorted(followers)),
        ),
        diag,
    )


def export_trace(trace: DynamicsTrace, target: str | Path | IO[str]) -> None:
    """Write one 't,agent,old,new,mode,potential' line per event."""
    lines = [
        f"{e.time},{e.agent},{'on' if e.old else 'off'},"
        f"{'on' if e.new else 'off'},{e.mode},{e.potential!r}\n"
        for e in trace.events
    ]
    if isinstance(target, (str, Path)):
        Path(target).write_text("".join(lines), encoding="utf-8")
    else:
        target.write("".join(lines))
