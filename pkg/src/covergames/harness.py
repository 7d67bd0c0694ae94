"""Monte-Carlo harness: exhaustive oracles, seeded trial running, and the
binomial-tail boundedness check.

Per-trial seeds derive from the master seed through a fixed splitmix64-based
mixer, so trial t is reproducible in isolation and results are independent of
how trials are spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .advertiser import advertise_lp
from .dynamics import (
    DynamicsTrace,
    LtdConfig,
    PhaseDiagnostics,
    PsaConfig,
    ScheduleConfig,
    compute_diagnostics,
    run_best_response,
    run_ltd,
    run_psa,
)
from .game import (
    COST_TOL,
    CoveringInstance,
    JointState,
    best_response,
    social_cost,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

EXPERIMENT_MODELS = ("psa", "ltd", "br-only")


def splitmix64(z: int) -> int:
    """The splitmix64 finalizer; the published trial-seed mixing function."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, index: int) -> int:
    """Seed for trial ``index``: splitmix64 output stream of the master."""
    return splitmix64((master_seed + (index + 1) * _GOLDEN) & _MASK64)


def _encode_shifts(n: int) -> np.ndarray:
    # Agent 0 occupies the most significant bit so that ascending state codes
    # follow the lexicographic order of action vectors (off < on).
    return np.asarray([n - 1 - i for i in range(n)], dtype=np.int64)


def _decode(code: int, n: int) -> JointState:
    return JointState(tuple((code >> (n - 1 - i)) & 1 == 1 for i in range(n)))


def _all_state_costs(inst: CoveringInstance) -> np.ndarray:
    """Social cost of every state, indexed by the lexicographic state code."""
    n = inst.n
    codes = np.arange(1 << n, dtype=np.int64)
    cost = np.zeros(len(codes))
    for i, c in enumerate(inst.costs):
        cost += c * ((codes >> (n - 1 - i)) & 1)
    for ws in inst.sets:
        mask = 0
        for j in ws.members:
            mask |= 1 << (n - 1 - j)
        cost += (ws.size * ws.weight) * ((codes & mask) == 0)
    return cost


class BruteForceResult(NamedTuple):
    cost: float
    state: JointState


def brute_force_opt(inst: CoveringInstance, nmax: int = 22) -> BruteForceResult:
    """Exact minimum social cost over all 2^n states; ties go to the
    lexicographically smallest action vector."""
    if inst.n > nmax:
        raise ValueError(
            f"refusing brute force for n={inst.n} > nmax={nmax}; "
            "use the LP relaxation objective as a lower bound instead"
        )
    cost = _all_state_costs(inst)
    best = int(np.argmin(cost))  # argmin returns the first (lex-smallest) code
    return BruteForceResult(float(cost[best]), _decode(best, inst.n))


def _nash_mask(inst: CoveringInstance) -> np.ndarray:
    """Boolean flag per state code: no agent has a strictly improving flip."""
    n = inst.n
    codes = np.arange(1 << n, dtype=np.int64)
    nash = np.ones(len(codes), dtype=bool)
    for i in range(n):
        w_off = np.zeros(len(codes))
        for sid in inst.incident[i]:
            mask = 0
            for j in inst.sets[sid].members:
                if j != i:
                    mask |= 1 << (n - 1 - j)
            w_off += inst.sets[sid].weight * ((codes & mask) == 0)
        on = ((codes >> (n - 1 - i)) & 1) == 1
        c = inst.costs[i]
        ok = np.where(on, c <= w_off + COST_TOL, w_off <= c + COST_TOL)
        nash &= ok
    return nash


@dataclass(frozen=True)
class NashEnumeration:
    equilibria: tuple[JointState, ...]
    costs: tuple[float, ...]
    opt: float
    poa: float
    pos: float


def enumerate_nash(inst: CoveringInstance, nmax: int = 22) -> NashEnumeration:
    """All pure equilibria by exhaustive check, with the worst/best
    equilibrium-to-optimum cost ratios."""
    if inst.n > nmax:
        raise ValueError(
            f"refusing enumeration for n={inst.n} > nmax={nmax}; "
            "use the LP relaxation objective as a lower bound instead"
        )
    cost = _all_state_costs(inst)
    nash = _nash_mask(inst)
    codes = np.flatnonzero(nash)
    if len(codes) == 0:
        raise RuntimeError("no pure equilibrium found in an exact potential game")
    eq_costs = cost[codes]
    opt = float(cost.min())
    if opt <= 0.0:
        poa = pos = 1.0  # only reachable with zero-cost equilibria
    else:
        poa = float(eq_costs.max() / opt)
        pos = float(eq_costs.min() / opt)
    return NashEnumeration(
        equilibria=tuple(_decode(int(c), inst.n) for c in codes),
        costs=tuple(float(v) for v in eq_costs),
        opt=opt,
        poa=poa,
        pos=pos,
    )


@dataclass(frozen=True)
class AppendixRow:
    """Scan of d -> d * P[Binomial(d, a) <= floor(c)] for one (a, c)."""

    a: float
    c: float
    max_ratio: float
    argmax_d: int
    finite: bool
    interior: bool  # peak strictly before the right edge of the scan
    monotone_after_peak: bool


def _tail_scan(a: float, c: float, d_max: int) -> tuple[np.ndarray, np.ndarray]:
    d_start = max(1, math.ceil(c))
    ds = np.arange(d_start, d_max + 1, dtype=np.float64)
    log1ma = math.log1p(-a)
    loga = math.log(a)
    log_choose = np.zeros_like(ds)
    total = np.exp(np.log(ds) + ds * log1ma)  # i = 0 term
    for i in range(1, math.floor(c) + 1):
        log_choose += np.log(ds - i + 1) - math.log(i)
        total += np.exp(np.log(ds) + log_choose + (ds - i) * log1ma + i * loga)
    return ds, total


def check_appendix_bound(
    a_list: list[float], c_list: list[float], d_max: int
) -> tuple[AppendixRow, ...]:
    """Boundedness scan of the truncated binomial tail expression.

    For each (a, c) computes S(d) = sum over i <= floor(c) of
    d * C(d, i) * (1-a)^(d-i) * a^i (binomials in log space) for d from
    ceil(c) to d_max, and reports the largest S/ceil(c) with where it occurs
    and whether S is non-increasing past its peak.
    """
    for a in a_list:
        if not 0.0 < a < 1.0:
            raise ValueError(f"a must be in (0, 1), got {a}")
    for c in c_list:
        if c <= 0:
            raise ValueError(f"c must be > 0, got {c}")
    if d_max < max(c_list):
        raise ValueError(f"d_max={d_max} must cover the largest c")

    rows = []
    for a in a_list:
        for c in c_list:
            ds, s = _tail_scan(a, c, d_max)
            ratio = s / math.ceil(c)
            peak = int(np.argmax(s))
            after = s[peak:]
            monotone = bool(np.all(after[1:] <= after[:-1] * (1.0 + 1e-9) + 1e-12))
            rows.append(
                AppendixRow(
                    a=a,
                    c=c,
                    max_ratio=float(ratio[peak]),
                    argmax_d=int(ds[peak]),
                    finite=bool(np.isfinite(s).all()),
                    interior=peak < len(ds) - 1,
                    monotone_after_peak=monotone,
                )
            )
    return tuple(rows)


@dataclass(frozen=True)
class TrialRow:
    """One seeded protocol run, as written to the trials CSV."""

    trial: int
    seed: int
    cost_ad: float
    cost_s1: float
    cost_s2: float
    w_fbad: float
    c_l: float
    ron: int
    fr: int
    steps_p1: int
    steps_p2: int
    invariants_ok: bool


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, independent of output paths."""

    instance: CoveringInstance
    model: str  # psa | ltd | br-only
    trials: int
    master_seed: int
    s_ad: JointState | None = None  # None: LP-rounding profile (br: all-off reference)
    alpha: float = 0.2
    beta: float = 0.2
    p: tuple[float, ...] | None = None
    t_star: int | None = None
    t_prime: int | None = None
    commit_policy: str = "myopic-compare"
    schedule_policy: str = "random-permutation-sweeps"
    max_steps: int | None = None
    initial_state: JointState | None = None
    workers: int = 1
    opt_nmax: int = 18  # brute-force OPT and equilibria when n is at most this

    def __post_init__(self) -> None:
        model = "br-only" if self.model == "br" else self.model
        object.__setattr__(self, "model", model)
        if model not in EXPERIMENT_MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolved_ad(self) -> JointState:
        if self.s_ad is not None:
            return self.s_ad
        if self.model == "br-only":
            return JointState.all_off(self.instance.n)
        return advertise_lp(self.instance).state


@dataclass(frozen=True)
class TrialReport:
    """Per-trial rows plus aggregates recomputable from them."""

    model: str
    master_seed: int
    cost_ad: float
    rows: tuple[TrialRow, ...]
    mean_cost_s2: float
    stderr_cost_s2: float
    mean_ratio_to_ad: float
    opt: float | None = None
    mean_ratio_to_opt: float | None = None
    poa: float | None = None
    pos: float | None = None
    failures: tuple[tuple[int, int], ...] = field(default_factory=tuple)  # (trial, seed)


def _final_state_settled(
    inst: CoveringInstance, s_final: JointState, pinned: tuple[int, ...]
) -> bool:
    pinned_set = set(pinned)
    return all(
        best_response(inst, s_final, i) == s_final.actions[i]
        for i in range(inst.n)
        if i not in pinned_set
    )


def run_trial(cfg: ExperimentConfig, index: int, s_ad: JointState) -> TrialRow:
    """Run one seeded trial and assert its deterministic invariants."""
    inst = cfg.instance
    seed = trial_seed(cfg.master_seed, index)
    trace: DynamicsTrace
    diag: PhaseDiagnostics | None

    if cfg.model == "psa":
        psa = PsaConfig(
            alpha=cfg.alpha,
            schedule=ScheduleConfig(cfg.schedule_policy, seed, cfg.max_steps),
            initial_state=cfg.initial_state,
        )
        trace, diag = run_psa(inst, s_ad, psa, record_events=False)
    elif cfg.model == "ltd":
        ltd = LtdConfig(
            beta=cfg.beta,
            seed=seed,
            p=cfg.p,
            t_star=cfg.t_star,
            t_prime=cfg.t_prime,
            commit_policy=cfg.commit_policy,
            max_steps=cfg.max_steps,
            initial_state=cfg.initial_state,
        )
        trace, diag = run_ltd(inst, s_ad, ltd, record_events=False)
    else:  # br-only
        rng = np.random.default_rng(seed)
        if cfg.initial_state is not None:
            start = cfg.initial_state
        else:
            start = JointState(tuple(bool(b) for b in rng.integers(0, 2, inst.n)))
        sched = ScheduleConfig(cfg.schedule_policy, int(rng.integers(1 << 63)), cfg.max_steps)
        trace = run_best_response(inst, start, sched, record_events=False)
        diag = compute_diagnostics(inst, s_ad, trace.s_final)

    w_fbad = sum(inst.sets[sid].weight for sid in diag.f_bad)
    c_l = sum(inst.costs[i] for i in diag.l_agents)

    ok = trace.converged
    if cfg.model == "psa":
        ok = ok and w_fbad <= c_l + COST_TOL
    if ok:
        ok = _final_state_settled(inst, trace.s_final, trace.pinned_final)

    s1 = trace.s_prime if trace.s_prime is not None else trace.s_final
    return TrialRow(
        trial=index,
        seed=seed,
        cost_ad=social_cost(inst, s_ad),
        cost_s1=social_cost(inst, s1),
        cost_s2=social_cost(inst, trace.s_final),
        w_fbad=w_fbad,
        c_l=c_l,
        ron=len(diag.r_on),
        fr=len(diag.f_r),
        steps_p1=trace.steps_phase1,
        steps_p2=trace.steps_phase2,
        invariants_ok=ok,
    )


def _trial_batch(args: tuple[ExperimentConfig, JointState, list[int]]) -> list[TrialRow]:
    cfg, s_ad, indices = args
    return [run_trial(cfg, i, s_ad) for i in indices]


def run_experiment(cfg: ExperimentConfig) -> TrialReport:
    """Run all trials (optionally across processes) and aggregate.

    Rows are merged in trial order, so the report is identical for any worker
    count. Statistical aggregates are plain means/standard errors of the
    per-trial columns; OPT and equilibrium ratios are included when the
    instance is small enough to enumerate.
    """
    s_ad = cfg.resolved_ad()
    indices = list(range(cfg.trials))
    if cfg.workers == 1:
        rows = [run_trial(cfg, i, s_ad) for i in indices]
    else:
        chunks = [
            (cfg, s_ad, indices[k :: cfg.workers]) for k in range(cfg.workers)
        ]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            batches = list(pool.map(_trial_batch, chunks))
        rows = sorted(
            (row for batch in batches for row in batch), key=lambda r: r.trial
        )

    cost_ad = rows[0].cost_ad
    s2 = np.asarray([r.cost_s2 for r in rows])
    mean = float(s2.mean())
    stderr = float(s2.std(ddof=1) / math.sqrt(len(s2))) if len(s2) > 1 else 0.0

    opt = ratio_opt = poa = pos = None
    if 0 < cfg.instance.n <= cfg.opt_nmax:
        enum = enumerate_nash(cfg.instance, nmax=cfg.opt_nmax)
        opt = enum.opt
        poa, pos = enum.poa, enum.pos
        ratio_opt = mean / opt if opt > 0 else None

    return TrialReport(
        model=cfg.model,
        master_seed=cfg.master_seed,
        cost_ad=cost_ad,
        rows=tuple(rows),
        mean_cost_s2=mean,
        stderr_cost_s2=stderr,
        mean_ratio_to_ad=mean / cost_ad if cost_ad > 0 else math.inf,
        opt=opt,
        mean_ratio_to_opt=ratio_opt,
        poa=poa,
        pos=pos,
        failures=tuple((r.trial, r.seed) for r in rows if not r.invariants_ok),
    )
