"""Broadcast-strategy construction.

Two constructions are provided: threshold rounding of the fractional covering
relaxation (an ``f_max * ceil(c_max/w_min)`` approximation of the optimal
social cost), and a greedy thin-out that keeps only agents who alone cover
many sets, which makes the advertised on-agents robust to partial adoption.
The LP is solved by a self-contained dense simplex with Bland's rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .game import CoveringInstance, JointState, compute_stats


@dataclass(frozen=True)
class LpSolution:
    """Fractional cover: x in [0,1]^n minimizing total cost subject to every
    set summing to at least 1."""

    x: tuple[float, ...]
    objective: float
    status: str  # optimal | infeasible | iteration-cap


@dataclass(frozen=True)
class AdStrategy:
    """A broadcast profile plus the diagnostics that drive the robustness
    condition.

    ``delta1_star`` is the minimum, over on-agents, of the number of sets
    that agent alone covers (infinity when nobody is on). ``f_r_weight`` is
    the total weight of sets left uncovered by the profile.
    """

    state: JointState
    provenance: str  # lp-rounding | star-greedy | custom
    delta1_star: float
    f_r_weight: float


@dataclass(frozen=True)
class StarCheck:
    """Verdict of the sole-coverage robustness condition.

    ``max_violation`` is the largest evaluated value of the bound expression
    minus the 1/n^2 target; negative values mean the condition holds with
    that margin. ``vacuous`` marks degenerate inputs (singleton-only sets,
    no pairwise overlap, or an empty on-set) where the condition carries no
    content.
    """

    holds: bool
    max_violation: float
    x_min: float
    k: int
    k_floor_adjusted: bool
    vacuous: bool = False


def delta1_star(inst: CoveringInstance, s: JointState) -> float:
    """Minimum over on-agents of the number of sets they alone cover;
    infinity when no agent is on."""
    on = [i for i, a in enumerate(s.actions) if a]
    if not on:
        return math.inf
    acts = s.actions
    best = math.inf
    for ell in on:
        count = 0
        for sid in inst.incident[ell]:
            if not any(acts[j] for j in inst.sets[sid].members if j != ell):
                count += 1
        best = min(best, count)
    return best


def _uncovered_weight(inst: CoveringInstance, s: JointState) -> float:
    acts = s.actions
    return sum(
        ws.weight for ws in inst.sets if not any(acts[j] for j in ws.members)
    )


def make_strategy(
    inst: CoveringInstance, state: JointState, provenance: str = "custom"
) -> AdStrategy:
    """Wrap a profile as an AdStrategy with its diagnostics computed."""
    return AdStrategy(
        state=state,
        provenance=provenance,
        delta1_star=delta1_star(inst, state),
        f_r_weight=_uncovered_weight(inst, state),
    )


def _simplex_max(
    a: np.ndarray, b: np.ndarray, obj: np.ndarray, max_pivots: int
) -> tuple[np.ndarray, str]:
    """Maximize obj.y subject to a@y <= b, y >= 0 (b >= 0), via the dense
    tableau method with Bland's rule. Returns (y, status)."""
    rows, cols = a.shape
    tol = 1e-9
    # Tableau: [A | I | b] with the reduced-cost row at the bottom.
    t = np.zeros((rows + 1, cols + rows + 1))
    t[:rows, :cols] = a
    t[:rows, cols : cols + rows] = np.eye(rows)
    t[:rows, -1] = b
    t[rows, :cols] = obj
    basis = list(range(cols, cols + rows))

    for _ in range(max_pivots):
        improving = np.flatnonzero(t[rows, :-1] > tol)
        if improving.size == 0:
            y = np.zeros(cols + rows)
            y[basis] = t[:rows, -1]
            return y[:cols], "optimal"
        enter = int(improving[0])  # Bland: lowest index with positive reduced cost
        col = t[:rows, enter]
        ratios = np.full(rows, np.inf)
        positive = col > tol
        ratios[positive] = t[:rows, -1][positive] / col[positive]
        best = ratios.min()
        if not np.isfinite(best):
            raise RuntimeError("unbounded tableau on a bounded problem")
        # Bland: among min-ratio rows, leave the smallest basic-variable index.
        leave = min(
            (r for r in range(rows) if positive[r] and ratios[r] <= best + tol),
            key=lambda r: basis[r],
        )
        t[leave] /= t[leave, enter]
        for r in range(rows + 1):
            if r != leave and t[r, enter] != 0.0:
                t[r] -= t[r, enter] * t[leave]
        basis[leave] = enter
    return np.zeros(cols), "iteration-cap"


def solve_lp_relaxation(
    inst: CoveringInstance, max_pivots: int | None = None
) -> LpSolution:
    """Optimal fractional cover of the instance.

    The substitution y = 1 - x turns the covering constraints into a
    feasible-at-origin maximization (sum of y over a set at most size-1,
    y in [0,1]), so a single simplex phase suffices.
    """
    n, m = inst.n, inst.num_sets
    if m == 0:
        return LpSolution(x=(0.0,) * n, objective=0.0, status="optimal")
    if max_pivots is None:
        max_pivots = 10_000 + 200 * (n + m)

    a = np.zeros((m + n, n))
    b = np.zeros(m + n)
    for sid, ws in enumerate(inst.sets):
        a[sid, list(ws.members)] = 1.0
        b[sid] = ws.size - 1
    a[m:, :] = np.eye(n)  # y_i <= 1
    b[m:] = 1.0

    y, status = _simplex_max(a, b, np.asarray(inst.costs, dtype=float), max_pivots)
    if status != "optimal":
        return LpSolution(x=(0.0,) * n, objective=math.nan, status=status)

    x = np.clip(1.0 - y, 0.0, 1.0)
    worst = min(sum(x[j] for j in ws.members) for ws in inst.sets)
    if worst < 1.0 - 1e-7:
        raise RuntimeError(f"simplex returned an infeasible cover (min row sum {worst})")
    objective = float(np.dot(inst.costs, x))
    return LpSolution(x=tuple(float(v) for v in x), objective=objective, status=status)


def round_lp(inst: CoveringInstance, lp: LpSolution) -> AdStrategy:
    """Threshold rounding: on iff x_i >= 1/f_max (within 1e-9).

    Every set has a member with fractional value at least 1/|set|, so the
    rounded profile covers all sets, at cost at most f_max times the LP
    objective.
    """
    if lp.status != "optimal":
        raise ValueError(f"cannot round an LP with status {lp.status!r}")
    f_max = compute_stats(inst).f_max
    if f_max == 0:
        return make_strategy(inst, JointState.all_off(inst.n), "lp-rounding")
    threshold = 1.0 / f_max - 1e-9
    state = JointState(tuple(x >= threshold for x in lp.x))
    return make_strategy(inst, state, "lp-rounding")


def repair_to_full_cover(inst: CoveringInstance, s: JointState) -> JointState:
    """Grow the on-set until every set is covered.

    Uncovered sets are visited in set-id order; each gets its cheapest member
    (ties to the smallest id) turned on.
    """
    acts = list(s.actions)
    for ws in inst.sets:
        if not any(acts[j] for j in ws.members):
            pick = min(ws.members, key=lambda j: (inst.costs[j], j))
            acts[pick] = True
    return JointState(tuple(acts))


def check_star_condition(
    inst: CoveringInstance, ad: AdStrategy, alpha: float
) -> StarCheck:
    """Check that every advertised-on agent solely covers enough sets.

    With K = max(1, floor(c_max/w_min)), beta = alpha^f_max and
    x_min = delta1_star / (delta2 * (f_max - 1)), verifies

        K * x^K * (1 - beta)^(x - K)  <=  1 / n^2   for all real x >= x_min.

    The left side is unimodal with maximizer K / ln(1/(1-beta)), so it is
    enough to evaluate at x_min and, when larger, at that maximizer. The
    floor is clamped up to 1 when c_max < w_min, since a zero leading factor
    would make the bound vacuously zero; ``k_floor_adjusted`` records this.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    stats = compute_stats(inst)
    raw_k = math.floor(stats.c_max / stats.w_min) if stats.w_min else 0
    k = max(1, raw_k)
    adjusted = raw_k < 1

    if stats.f_max <= 1 or stats.delta2 == 0:
        warnings.warn(
            "sole-coverage condition is vacuous (no set overlaps or f_max <= 1)",
            RuntimeWarning,
            stacklevel=2,
        )
        return StarCheck(True, -math.inf, math.inf, k, adjusted, vacuous=True)
    if math.isinf(ad.delta1_star):
        warnings.warn(
            "sole-coverage condition is vacuous (no agent is on)",
            RuntimeWarning,
            stacklevel=2,
        )
        return StarCheck(True, -math.inf, math.inf, k, adjusted, vacuous=True)

    beta = alpha**stats.f_max
    x_min = ad.delta1_star / (stats.delta2 * (stats.f_max - 1))
    decay = math.log1p(-beta)  # ln(1 - beta) < 0

    def log_bound(x: float) -> float:
        if x <= 0.0:
            return -math.inf
        return math.log(k) + k * math.log(x) + (x - k) * decay

    evaluate = [x_min]
    x_hat = -k / decay  # unique interior maximizer
    if x_hat > x_min:
        evaluate.append(x_hat)
    max_log = max(log_bound(x) for x in evaluate)
    target_log = -2.0 * math.log(inst.n)
    sup = math.exp(max_log) if max_log < 700 else math.inf
    return StarCheck(
        holds=max_log <= target_log,
        max_violation=sup - math.exp(target_log),
        x_min=x_min,
        k=k,
        k_floor_adjusted=adjusted,
    )


def default_greedy_scale(inst: CoveringInstance, alpha: float) -> float:
    """Default multiplier for the greedy sole-coverage threshold.

    Sized so that agents kept by the greedy pass give x_min large enough for
    the unimodal bound to clear 1/n^2 for moderate n; always re-validated by
    ``check_star_condition`` rather than trusted.
    """
    stats = compute_stats(inst)
    if stats.f_max == 0:
        return 0.0
    raw_k = math.floor(stats.c_max / stats.w_min) if stats.w_min else 0
    k = max(1, raw_k)
    beta = alpha**stats.f_max
    return 4.0 / -math.log1p(-beta) * (1.0 + 2.0 * k)


def build_star_greedy(
    inst: CoveringInstance, base: AdStrategy, alpha: float, b_scale: float | None = None
) -> AdStrategy:
    """Thin out a profile until every remaining on-agent alone covers at
    least ``b_scale * delta2 * ln n`` sets.

    Repeatedly turns off the lowest-id on-agent below the threshold; turning
    one agent off only raises the sole-coverage counts of the others, so the
    loop is monotone. Re-checks the robustness condition on the result and
    warns if it fails (or if everyone was turned off).
    """
    stats = compute_stats(inst)
    if stats.f_max == 0:
        warnings.warn("instance has no sets; greedy pass is a no-op", RuntimeWarning, stacklevel=2)
        return make_strategy(inst, base.state, "star-greedy")
    if b_scale is None:
        b_scale = default_greedy_scale(inst, alpha)
    threshold = b_scale * stats.delta2 * math.log(inst.n)

    acts = list(base.state.actions)

    def sole_cover_count(ell: int) -> int:
        return sum(
            1
            for sid in inst.incident[ell]
            if not any(acts[j] for j in inst.sets[sid].members if j != ell)
        )

    while True:
        victim = next(
            (
                i
                for i in range(inst.n)
                if acts[i] and sole_cover_count(i) < threshold
            ),
            None,
        )
        if victim is None:
            break
        acts[victim] = False

    strategy = make_strategy(inst, JointState(tuple(acts)), "star-greedy")
    if not any(acts):
        warnings.warn(
            "greedy pass turned every agent off (degenerate instance for this threshold)",
            RuntimeWarning,
            stacklevel=2,
        )
        return strategy
    check = check_star_condition(inst, strategy, alpha)
    if not check.holds:
        warnings.warn(
            f"greedy result fails the sole-coverage condition "
            f"(violation {check.max_violation:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return strategy


def advertise_lp(inst: CoveringInstance) -> AdStrategy:
    """LP relaxation followed by threshold rounding."""
    lp = solve_lp_relaxation(inst)
    if lp.status != "optimal":
        raise RuntimeError(f"LP solve failed with status {lp.status!r}")
    return round_lp(inst, lp)


def advertise_star_greedy(
    inst: CoveringInstance, alpha: float, b_scale: float | None = None
) -> AdStrategy:
    """Full pipeline: LP rounding, then the greedy sole-coverage thin-out."""
    return build_star_greedy(inst, advertise_lp(inst), alpha, b_scale)
