"""Best-response settling, the advertising protocol, and learn-then-decide."""

from __future__ import annotations

import io
import math
import re

import numpy as np
import pytest

from covergames import (
    JointState,
    LtdConfig,
    PsaConfig,
    ScheduleConfig,
    best_response,
    compute_diagnostics,
    default_step_cap,
    default_t_star,
    export_trace,
    gen_poa_bipartite,
    gen_star,
    is_nash,
    potential,
    run_best_response,
    run_ltd,
    run_psa,
    social_cost,
)
from covergames.dynamics import MODE_AD, MODE_BR, MODE_COMMIT
from helpers import edge_instance, random_instance, random_state


class TestConfigs:
    def test_schedule_policy_validated(self):
        with pytest.raises(ValueError, match="unknown schedule policy"):
            ScheduleConfig(policy="chaotic")

    def test_max_steps_validated(self):
        with pytest.raises(ValueError, match="max_steps"):
            ScheduleConfig(max_steps=0)

    def test_psa_alpha_range(self):
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError, match="alpha"):
                PsaConfig(alpha=bad)

    def test_ltd_validation(self):
        with pytest.raises(ValueError, match="beta"):
            LtdConfig(beta=1.0)
        with pytest.raises(ValueError, match="outside"):
            LtdConfig(beta=0.5, p=(0.4, 0.6))
        with pytest.raises(ValueError, match="t_prime"):
            LtdConfig(beta=0.5, t_star=10, t_prime=10)
        with pytest.raises(ValueError, match="commit"):
            LtdConfig(beta=0.5, commit_policy="coin-flip")

    def test_default_t_star_formula(self):
        for n in (5, 20, 200):
            assert default_t_star(n) == math.ceil(12 * n * math.log(n + 1))

    def test_default_step_cap_uses_potential_gap(self):
        inst = gen_star(10, 0.5, 1.0)
        # Denominator lcm is 2, total weight 9: 10 * 10 * (1 + 18).
        assert default_step_cap(inst) == 10 * 10 * 19

    def test_default_step_cap_falls_back_for_awkward_reals(self):
        inst = edge_instance(2, [(0, 1)], c=math.pi / 10, w=1.0)
        assert default_step_cap(inst) == 1_000_000


class TestRunBestResponse:
    def test_star_round_robin_from_all_off(self):
        # Center (agent 0) acts first, turns on; every leaf then stays off.
        inst = gen_star(4, 0.5, 1.0)
        trace = run_best_response(
            inst, JointState.all_off(4), ScheduleConfig("round-robin", seed=0)
        )
        assert trace.converged
        assert trace.s_final.to_string() == "1000"
        assert social_cost(inst, trace.s_final) == pytest.approx(0.5)
        assert [e.agent for e in trace.events] == [0]

    def test_nash_start_is_fixpoint(self):
        inst = gen_star(4, 0.5, 1.0)
        start = JointState.from_string("1000")
        trace = run_best_response(inst, start, ScheduleConfig("round-robin", seed=0))
        assert trace.events == ()
        assert trace.s_final == start

    def test_adversarial_order_reaches_bad_equilibrium(self):
        # Round-robin visits the cheap side first; it turns off and the
        # expensive side is then stuck on by the tie rule.
        n, c = 12, 2.0
        inst = gen_poa_bipartite(n, c)
        trace = run_best_response(
            inst, JointState.all_on(n), ScheduleConfig("round-robin", seed=0)
        )
        assert trace.converged
        k = math.ceil(c)
        assert trace.s_final == JointState.from_on_agents(n, range(k, n))
        assert social_cost(inst, trace.s_final) == pytest.approx(c * (n - k))

    def test_reaches_nash_under_every_policy(self):
        for policy in ("uniform-random", "random-permutation-sweeps", "round-robin"):
            for seed in range(5):
                inst = random_instance(seed)
                rng = np.random.default_rng(seed)
                start = random_state(rng, inst.n)
                trace = run_best_response(inst, start, ScheduleConfig(policy, seed=seed))
                assert trace.converged, policy
                assert is_nash(inst, trace.s_final).is_nash

    def test_every_recorded_move_strictly_decreases_potential(self):
        for seed in range(10):
            inst = random_instance(seed)
            rng = np.random.default_rng(1000 + seed)
            start = random_state(rng, inst.n)
            trace = run_best_response(
                inst, start, ScheduleConfig("random-permutation-sweeps", seed=seed)
            )
            last = potential(inst, start)
            for e in trace.events:
                assert e.mode == MODE_BR
                assert e.potential < last - 1e-12
                last = e.potential

    def test_cap_exhaustion_is_explicit(self):
        inst = gen_star(30, 0.5, 1.0)
        trace = run_best_response(
            inst,
            JointState.all_on(30),
            ScheduleConfig("round-robin", seed=0, max_steps=3),
        )
        assert not trace.converged
        assert trace.steps_phase1 == 3

    def test_mismatched_start_rejected(self):
        inst = gen_star(4, 0.5, 1.0)
        with pytest.raises(ValueError, match="length"):
            run_best_response(inst, JointState.all_off(5), ScheduleConfig())


class TestComputeDiagnostics:
    def test_no_disagreement(self):
        inst = gen_star(5, 0.5, 1.0)
        ad = JointState.from_on_agents(5, [0])
        diag = compute_diagnostics(inst, ad, ad)
        assert diag.l_off == () and diag.r_on == () and diag.f_bad == ()
        assert diag.l_agents == (0,)
        assert diag.event_e_holds is None

    def test_star_collapse(self):
        inst = gen_star(4, 0.5, 1.0)
        ad = JointState.from_on_agents(4, [0])
        diag = compute_diagnostics(inst, ad, JointState.all_off(4))
        assert diag.l_off == (0,)
        assert diag.f_bad == (0, 1, 2)
        assert diag.f_r == ()
        assert diag.f_off == (0, 1, 2)

    def test_bipartite_flip(self):
        n, c = 8, 2.0
        inst = gen_poa_bipartite(n, c)
        k = math.ceil(c)
        ad = JointState.from_on_agents(n, range(k))
        s_prime = JointState.from_on_agents(n, range(k, n))
        diag = compute_diagnostics(inst, ad, s_prime)
        assert diag.r_on == tuple(range(k, n))
        assert diag.f_bad == ()
        assert diag.l_off == tuple(range(k))

    def test_disjointness_invariant(self):
        rng = np.random.default_rng(5)
        for seed in range(10):
            inst = random_instance(seed)
            ad = random_state(rng, inst.n)
            sp = random_state(rng, inst.n)
            diag = compute_diagnostics(inst, ad, sp)
            assert not set(diag.f_bad) & set(diag.f_r)
            assert set(diag.l_off) <= set(diag.l_agents)
            assert set(diag.r_on) <= set(diag.r_agents)


class TestRunPsa:
    def test_all_receptive_adopts_broadcast(self):
        n, alpha, seed = 6, 0.999, 0
        inst = gen_star(n, 0.5, 1.0)
        ad = JointState.from_on_agents(n, [0])
        # With the initial state given, the first seed consumption is the
        # receptive draw; confirm everyone is receptive for this seed.
        assert bool(np.all(np.random.default_rng(seed).random(n) < alpha))
        cfg = PsaConfig(alpha=alpha, schedule=ScheduleConfig(seed=seed),
                        initial_state=JointState.all_off(n))
        trace, diag = run_psa(inst, ad, cfg)
        assert trace.s_prime == ad
        assert diag.f_bad == ()

    def test_phase1_deviators_best_respond(self):
        # Any agent disagreeing with the broadcast at the end of phase 1 must
        # be best-responding (the receptive ones are pinned to the broadcast).
        for seed in range(20):
            inst = random_instance(seed)
            ad = JointState.from_on_agents(inst.n, [0])
            cfg = PsaConfig(alpha=0.3, schedule=ScheduleConfig(seed=seed))
            trace, _ = run_psa(inst, ad, cfg)
            sp = trace.s_prime
            for i in range(inst.n):
                if sp.actions[i] != ad.actions[i]:
                    assert best_response(inst, sp, i) == sp.actions[i]

    def test_final_state_is_nash(self):
        for seed in range(20):
            inst = random_instance(seed)
            ad = JointState.from_on_agents(inst.n, [0])
            trace, _ = run_psa(inst, ad, PsaConfig(alpha=0.4, schedule=ScheduleConfig(seed=seed)))
            assert trace.converged
            assert is_nash(inst, trace.s_final).is_nash

    def test_deviation_weight_bounded_by_on_side_cost(self):
        for seed in range(50):
            inst = random_instance(seed)
            ad = JointState.from_on_agents(inst.n, [0, inst.n - 1])
            trace, diag = run_psa(
                inst, ad, PsaConfig(alpha=0.25, schedule=ScheduleConfig(seed=seed))
            )
            w_fbad = sum(inst.sets[sid].weight for sid in diag.f_bad)
            c_l = sum(inst.costs[i] for i in diag.l_agents)
            assert w_fbad <= c_l + 1e-9

    def test_deterministic_trace(self):
        inst = gen_star(12, 0.5, 1.0)
        ad = JointState.from_on_agents(12, [0])
        cfg = PsaConfig(alpha=0.3, schedule=ScheduleConfig(seed=99))
        t1, d1 = run_psa(inst, ad, cfg)
        t2, d2 = run_psa(inst, ad, cfg)
        assert t1 == t2
        assert d1 == d2
        buf1, buf2 = io.StringIO(), io.StringIO()
        export_trace(t1, buf1)
        export_trace(t2, buf2)
        assert buf1.getvalue() == buf2.getvalue()

    def test_phase_boundary_markers(self):
        inst = gen_star(10, 0.5, 1.0)
        ad = JointState.from_on_agents(10, [0])
        trace, _ = run_psa(inst, ad, PsaConfig(alpha=0.3, schedule=ScheduleConfig(seed=3)))
        assert len(trace.phase_ends) == 2
        assert trace.phase_ends[0] <= trace.phase_ends[1] == trace.events[-1].time if trace.events else True

    def test_regression_star50_mean_cost(self):
        # Seeded Monte-Carlo baseline: the good equilibrium is reached in
        # every one of these 300 trials.
        from covergames import ExperimentConfig, run_experiment

        inst = gen_star(50, 0.5, 1.0)
        ad = JointState.from_on_agents(50, [0])
        rep = run_experiment(
            ExperimentConfig(
                instance=inst, model="psa", trials=300, master_seed=7,
                s_ad=ad, alpha=0.3, opt_nmax=0,
            )
        )
        assert rep.mean_cost_s2 == pytest.approx(0.5, abs=1e-12)
        assert not rep.failures


class TestRunLtd:
    def test_always_follow_matches_broadcast_on_activated(self):
        inst = gen_star(15, 0.5, 1.0)
        ad = JointState.from_on_agents(15, [0])
        cfg = LtdConfig(beta=0.5, p=(1.0,) * 15, seed=4, t_star=60, t_prime=30,
                        initial_state=JointState.all_on(15))
        trace, _ = run_ltd(inst, ad, cfg)
        activated = {e.agent for e in trace.events[:60]}
        for i in activated:
            assert trace.s_prime.actions[i] == ad.actions[i]

    def test_bernoulli_commit_with_p_one_adopts_broadcast(self):
        inst = gen_star(10, 0.5, 1.0)
        ad = JointState.from_on_agents(10, [0])
        cfg = LtdConfig(beta=0.5, p=(1.0,) * 10, seed=8, commit_policy="bernoulli-p")
        trace, _ = run_ltd(inst, ad, cfg)
        assert trace.s_final == ad
        assert trace.pinned_final == tuple(range(10))

    def test_always_best_response_commit_pins_nobody(self):
        inst = gen_star(10, 0.5, 1.0)
        ad = JointState.from_on_agents(10, [0])
        trace, _ = run_ltd(
            inst, ad, LtdConfig(beta=0.2, seed=8, commit_policy="always-best-response")
        )
        assert trace.pinned_final == ()
        assert is_nash(inst, trace.s_final).is_nash

    def test_myopic_commit_star_reaches_broadcast(self):
        inst = gen_star(20, 0.5, 1.0)
        ad = JointState.from_on_agents(20, [0])
        trace, diag = run_ltd(inst, ad, LtdConfig(beta=0.3, seed=21))
        assert trace.converged
        assert social_cost(inst, trace.s_final) == pytest.approx(0.5)
        assert diag.event_e_holds is True

    def test_final_state_nash_given_pinned(self):
        for seed in range(15):
            inst = random_instance(seed)
            ad = JointState.from_on_agents(inst.n, [0])
            trace, _ = run_ltd(inst, ad, LtdConfig(beta=0.4, seed=seed))
            assert trace.converged
            pinned = set(trace.pinned_final)
            for i in range(inst.n):
                if i in pinned:
                    assert trace.s_final.actions[i] == ad.actions[i]
                else:
                    assert best_response(inst, trace.s_final, i) == trace.s_final.actions[i]

    def test_short_exploration_fails_ordering_event(self):
        inst = gen_star(8, 0.5, 1.0)
        ad = JointState.from_on_agents(8, [0])
        trace, diag = run_ltd(inst, ad, LtdConfig(beta=0.3, seed=2, t_star=3, t_prime=2))
        assert diag.event_e_holds is False

    def test_phase1_records_every_activation(self):
        inst = gen_star(6, 0.5, 1.0)
        ad = JointState.from_on_agents(6, [0])
        t_star = 40
        trace, _ = run_ltd(inst, ad, LtdConfig(beta=0.3, seed=3, t_star=t_star, t_prime=20))
        phase1 = [e for e in trace.events if e.time <= trace.phase_ends[0]]
        assert len(phase1) == t_star
        assert all(e.mode in (MODE_AD, MODE_BR) for e in phase1)
        assert {e.mode for e in trace.events[t_star : t_star + 6]} == {MODE_COMMIT}

    def test_deterministic(self):
        inst = gen_star(9, 0.5, 1.0)
        ad = JointState.from_on_agents(9, [0])
        cfg = LtdConfig(beta=0.25, seed=77)
        t1, d1 = run_ltd(inst, ad, cfg)
        t2, d2 = run_ltd(inst, ad, cfg)
        assert t1 == t2 and d1 == d2

    def test_regression_star50_mean_cost(self):
        from covergames import ExperimentConfig, run_experiment

        inst = gen_star(50, 0.5, 1.0)
        ad = JointState.from_on_agents(50, [0])
        rep = run_experiment(
            ExperimentConfig(
                instance=inst, model="ltd", trials=200, master_seed=7,
                s_ad=ad, beta=0.3, opt_nmax=0,
            )
        )
        assert rep.mean_cost_s2 == pytest.approx(0.5, abs=1e-12)
        assert not rep.failures


class TestTraceExport:
    def test_line_format(self):
        inst = gen_star(5, 0.5, 1.0)
        ad = JointState.from_on_agents(5, [0])
        trace, _ = run_psa(inst, ad, PsaConfig(alpha=0.4, schedule=ScheduleConfig(seed=13)))
        buf = io.StringIO()
        export_trace(trace, buf)
        lines = buf.getvalue().splitlines()
        assert len(lines) == len(trace.events)
        pattern = re.compile(
            r"^\d+,\d+,(on|off),(on|off),(best-response|follow-ad|commit),[-+0-9.e]+$"
        )
        for line in lines:
            assert pattern.match(line), line

    def test_writes_to_path(self, tmp_path):
        inst = gen_star(4, 0.5, 1.0)
        trace = run_best_response(inst, JointState.all_off(4), ScheduleConfig(seed=1))
        out = tmp_path / "run.trace"
        export_trace(trace, out)
        assert out.read_text().count("\n") == len(trace.events)
