"""Command-line front end.

Exit codes: 0 success, 1 invariant/convergence failure, 2 usage error.
Every subcommand is deterministic given its flags.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import advertiser, dynamics, harness, instances, packing, report
from .game import JointState, compute_stats, social_cost
from .instances import ParseError


def _parent_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", type=str, default=None, help="output path")
    p.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    return p


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_instance(path: str):
    return instances.load_instance(path)


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.family == "star":
        inst = instances.gen_star(args.n, args.c, args.w)
    elif args.family == "poa":
        inst = instances.gen_poa_bipartite(args.n, args.c)
    elif args.family == "random":
        inst = instances.gen_random_uniform(
            args.n, args.m, args.k,
            tuple(args.cost_range), tuple(args.weight_range), args.seed,
        )
    else:  # grid
        inst = instances.gen_grid_sensor(args.rows, args.cols, args.radius, args.c, args.w)
    _write_or_print(instances.serialize_instance(inst), args.out)
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    st = compute_stats(inst)
    items = [
        ("n", inst.n),
        ("sets", inst.num_sets),
        ("f_max", st.f_max),
        ("delta1", st.delta1),
        ("delta2", st.delta2),
        ("c_max", st.c_max),
        ("c_min", st.c_min),
        ("w_max", "na" if st.w_max is None else st.w_max),
        ("w_min", "na" if st.w_min is None else st.w_min),
    ]
    if args.fmt == "json":
        import json

        _write_or_print(json.dumps(dict(items), indent=2) + "\n", args.out)
    else:
        _write_or_print("".join(f"{k}: {v}\n" for k, v in items), args.out)
    return 0


def _cmd_opt(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    result = harness.brute_force_opt(inst, nmax=args.nmax)
    _write_or_print(
        f"opt: {result.cost!r}\nstate: {result.state.to_string()}\n", args.out
    )
    return 0


def _cmd_nash(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    enum = harness.enumerate_nash(inst, nmax=args.nmax)
    if args.fmt == "json":
        import json

        doc = {
            "count": len(enum.equilibria),
            "opt": enum.opt,
            "poa": enum.poa,
            "pos": enum.pos,
            "equilibria": [
                {"state": s.to_string(), "cost": c}
                for s, c in zip(enum.equilibria, enum.costs)
            ],
        }
        _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
        return 0
    lines = [
        f"count: {len(enum.equilibria)}",
        f"opt: {enum.opt!r}",
        f"poa: {enum.poa!r}",
        f"pos: {enum.pos!r}",
    ]
    if args.list:
        lines.append("state,cost")
        lines.extend(f"{s.to_string()},{c!r}" for s, c in zip(enum.equilibria, enum.costs))
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_advertise(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    if args.method == "lp":
        ad = advertiser.advertise_lp(inst)
    else:
        ad = advertiser.advertise_star_greedy(inst, args.alpha, args.b_scale)
    lines = [
        f"provenance: {ad.provenance}",
        f"state: {ad.state.to_string()}",
        f"cost: {social_cost(inst, ad.state)!r}",
        f"delta1_star: {ad.delta1_star!r}",
        f"f_r_weight: {ad.f_r_weight!r}",
    ]
    if args.method == "star-greedy":
        check = advertiser.check_star_condition(inst, ad, args.alpha)
        lines.append(f"star_condition: {'holds' if check.holds else 'fails'}")
        lines.append(f"max_violation: {check.max_violation!r}")
        lines.append(f"vacuous: {check.vacuous}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        instances.save_state(ad.state, args.out)
    return 0


def _cmd_check_star(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    state = instances.load_state(args.ad)
    ad = advertiser.make_strategy(inst, state)
    check = advertiser.check_star_condition(inst, ad, args.alpha)
    sys.stdout.write(
        f"holds: {check.holds}\nmax_violation: {check.max_violation!r}\n"
        f"x_min: {check.x_min!r}\nk: {check.k}\nvacuous: {check.vacuous}\n"
    )
    return 0


def _resolve_ad(args: argparse.Namespace, inst) -> JointState:
    if getattr(args, "ad", None):
        return instances.load_state(args.ad)
    if getattr(args, "ad_strategy", "lp") == "star-greedy":
        alpha = getattr(args, "alpha", 0.2)
        return advertiser.advertise_star_greedy(inst, alpha).state
    return advertiser.advertise_lp(inst).state


def _cmd_run(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    start = instances.load_state(args.start) if args.start else None
    if args.protocol == "br":
        import numpy as np

        rng = np.random.default_rng(args.seed)
        if start is None:
            start = JointState(tuple(bool(b) for b in rng.integers(0, 2, inst.n)))
        sched = dynamics.ScheduleConfig(
            args.policy, int(rng.integers(1 << 63)), args.max_steps
        )
        trace = dynamics.run_best_response(inst, start, sched)
        diag = None
    elif args.protocol == "psa":
        s_ad = _resolve_ad(args, inst)
        cfg = dynamics.PsaConfig(
            alpha=args.alpha,
            schedule=dynamics.ScheduleConfig(args.policy, args.seed, args.max_steps),
            initial_state=start,
        )
        trace, diag = dynamics.run_psa(inst, s_ad, cfg)
    else:  # ltd
        s_ad = _resolve_ad(args, inst)
        cfg = dynamics.LtdConfig(
            beta=args.beta,
            seed=args.seed,
            t_star=args.t_star,
            t_prime=args.t_prime,
            commit_policy=args.commit_policy,
            max_steps=args.max_steps,
            initial_state=start,
        )
        trace, diag = dynamics.run_ltd(inst, s_ad, cfg)

    lines = [
        f"converged: {trace.converged}",
        f"final_state: {trace.s_final.to_string()}",
        f"final_cost: {social_cost(inst, trace.s_final)!r}",
        f"final_potential: {trace.final_potential!r}",
        f"steps_p1: {trace.steps_phase1}",
        f"steps_p2: {trace.steps_phase2}",
    ]
    if trace.s_prime is not None:
        lines.insert(2, f"phase1_state: {trace.s_prime.to_string()}")
        lines.insert(3, f"phase1_cost: {social_cost(inst, trace.s_prime)!r}")
    if diag is not None and diag.event_e_holds is not None:
        lines.append(f"event_e: {diag.event_e_holds}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.trace:
        dynamics.export_trace(trace, args.trace)
    if args.plot:
        from . import plots

        plots.render_trace_figure(trace, args.plot)
    if args.out:
        instances.save_state(trace.s_final, args.out)
    return 0 if trace.converged else 1


def _cmd_experiment(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    s_ad = None
    if args.ad:
        s_ad = instances.load_state(args.ad)
    elif args.ad_strategy == "star-greedy":
        s_ad = advertiser.advertise_star_greedy(inst, args.alpha).state
    cfg = harness.ExperimentConfig(
        instance=inst,
        model=args.model,
        trials=args.trials,
        master_seed=args.seed,
        s_ad=s_ad,
        alpha=args.alpha,
        beta=args.beta,
        t_star=args.t_star,
        t_prime=args.t_prime,
        commit_policy=args.commit_policy,
        schedule_policy=args.policy,
        max_steps=args.max_steps,
        workers=args.workers,
        opt_nmax=args.opt_nmax,
    )
    rep = harness.run_experiment(cfg)
    out_csv = Path(args.out or "trials.csv")
    report.write_trials_csv(rep, out_csv)
    summary_path = out_csv.with_suffix(".summary.json" if args.fmt == "json" else ".summary.txt")
    report.write_summary(rep, summary_path, args.fmt)
    sys.stdout.write(report.summary_text(rep))
    if args.plots:
        from . import plots

        plots.render_experiment_figures(list(rep.rows), out_csv.with_suffix(""))
    return 1 if rep.failures else 0


def _cmd_check_appendix(args: argparse.Namespace) -> int:
    rows = harness.check_appendix_bound(args.a, args.c, args.dmax)
    if args.fmt == "json":
        import json

        doc = [row.__dict__ for row in rows]
        _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        lines = ["a,c,max_ratio,argmax_d,finite,interior,monotone_after_peak"]
        lines.extend(
            f"{r.a!r},{r.c!r},{r.max_ratio!r},{r.argmax_d},"
            f"{int(r.finite)},{int(r.interior)},{int(r.monotone_after_peak)}"
            for r in rows
        )
        _write_or_print("\n".join(lines) + "\n", args.out)
    bad = [r for r in rows if not (r.finite and r.interior and r.monotone_after_peak)]
    return 1 if bad else 0


def _cmd_pack_check(args: argparse.Namespace) -> int:
    inst = _load_instance(args.infile)
    rep = packing.nash_correspondence_check(inst, nmax=args.nmax)
    sys.stdout.write(
        f"covering_equilibria: {len(rep.covering_nash)}\n"
        f"packing_equilibria: {len(rep.packing_nash)}\n"
        f"matches: {rep.matches}\n"
    )
    for s in rep.counterexamples[:10]:
        sys.stdout.write(f"counterexample: {s.to_string()}\n")
    return 0 if rep.matches else 1


def _cmd_plot(args: argparse.Namespace) -> int:
    from . import plots

    rows = report.read_trials_csv(args.infile)
    stem = Path(args.stem) if args.stem else Path(args.infile).with_suffix("")
    written = plots.render_experiment_figures(rows, stem)
    for p in written:
        sys.stdout.write(f"wrote: {p}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = _parent_flags()
    parser = argparse.ArgumentParser(
        prog="covergames",
        description="Covering/packing game simulator and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance", parents=[shared])
    gen_sub = gen.add_subparsers(dest="family", required=True)
    g_star = gen_sub.add_parser("star", parents=[shared])
    g_star.add_argument("--n", type=int, required=True)
    g_star.add_argument("--c", type=float, required=True)
    g_star.add_argument("--w", type=float, required=True)
    g_star.set_defaults(func=_cmd_gen, family="star")
    g_poa = gen_sub.add_parser("poa", parents=[shared])
    g_poa.add_argument("--n", type=int, required=True)
    g_poa.add_argument("--c", type=float, required=True)
    g_poa.set_defaults(func=_cmd_gen, family="poa")
    g_rand = gen_sub.add_parser("random", parents=[shared])
    g_rand.add_argument("--n", type=int, required=True)
    g_rand.add_argument("--m", type=int, required=True)
    g_rand.add_argument("--k", type=int, required=True)
    g_rand.add_argument("--cost-range", type=float, nargs=2, default=(0.5, 2.0))
    g_rand.add_argument("--weight-range", type=float, nargs=2, default=(0.5, 2.0))
    g_rand.set_defaults(func=_cmd_gen, family="random")
    g_grid = gen_sub.add_parser("grid", parents=[shared])
    g_grid.add_argument("--rows", type=int, required=True)
    g_grid.add_argument("--cols", type=int, required=True)
    g_grid.add_argument("--radius", type=int, required=True)
    g_grid.add_argument("--c", type=float, required=True)
    g_grid.add_argument("--w", type=float, required=True)
    g_grid.set_defaults(func=_cmd_gen, family="grid")

    st = sub.add_parser("stats", help="structural statistics", parents=[shared])
    st.add_argument("--in", dest="infile", required=True)
    st.set_defaults(func=_cmd_stats)

    opt = sub.add_parser("opt", help="brute-force optimum", parents=[shared])
    opt.add_argument("--in", dest="infile", required=True)
    opt.add_argument("--nmax", type=int, default=22)
    opt.set_defaults(func=_cmd_opt)

    nash = sub.add_parser("nash", help="enumerate pure equilibria", parents=[shared])
    nash.add_argument("--in", dest="infile", required=True)
    nash.add_argument("--nmax", type=int, default=22)
    nash.add_argument("--list", action="store_true")
    nash.set_defaults(func=_cmd_nash)

    adv = sub.add_parser("advertise", help="construct a broadcast profile", parents=[shared])
    adv_sub = adv.add_subparsers(dest="method", required=True)
    a_lp = adv_sub.add_parser("lp", parents=[shared])
    a_lp.add_argument("--in", dest="infile", required=True)
    a_lp.set_defaults(func=_cmd_advertise, method="lp")
    a_sg = adv_sub.add_parser("star-greedy", parents=[shared])
    a_sg.add_argument("--in", dest="infile", required=True)
    a_sg.add_argument("--alpha", type=float, required=True)
    a_sg.add_argument("--b-scale", type=float, default=None)
    a_sg.set_defaults(func=_cmd_advertise, method="star-greedy")

    cs = sub.add_parser("check-star", help="check the sole-coverage condition", parents=[shared])
    cs.add_argument("--in", dest="infile", required=True)
    cs.add_argument("--ad", required=True, help="state file with the broadcast profile")
    cs.add_argument("--alpha", type=float, required=True)
    cs.set_defaults(func=_cmd_check_star)

    run = sub.add_parser("run", help="run one protocol instance", parents=[shared])
    run_sub = run.add_subparsers(dest="protocol", required=True)
    for name in ("psa", "ltd", "br"):
        rp = run_sub.add_parser(name, parents=[shared])
        rp.add_argument("--in", dest="infile", required=True)
        rp.add_argument("--start", default=None, help="state file with the initial state")
        rp.add_argument("--policy", choices=dynamics.SCHEDULE_POLICIES,
                        default="random-permutation-sweeps")
        rp.add_argument("--max-steps", type=int, default=None)
        rp.add_argument("--trace", default=None, help="write t,agent,old,new,mode,potential lines")
        rp.add_argument("--plot", default=None, help="write a potential-vs-time figure")
        if name != "br":
            rp.add_argument("--ad", default=None, help="state file with the broadcast profile")
            rp.add_argument("--ad-strategy", choices=("lp", "star-greedy"), default="lp")
        if name == "psa":
            rp.add_argument("--alpha", type=float, default=0.2)
        if name == "ltd":
            rp.add_argument("--alpha", type=float, default=0.2)  # for --ad-strategy star-greedy
            rp.add_argument("--beta", type=float, default=0.2)
            rp.add_argument("--t-star", type=int, default=None)
            rp.add_argument("--t-prime", type=int, default=None)
            rp.add_argument("--commit-policy", choices=dynamics.COMMIT_POLICIES,
                            default="myopic-compare")
        rp.set_defaults(func=_cmd_run, protocol=name)

    exp = sub.add_parser("experiment", help="seeded Monte-Carlo experiment", parents=[shared])
    exp.add_argument("--in", dest="infile", required=True)
    exp.add_argument("--model", choices=harness.EXPERIMENT_MODELS + ("br",), required=True)
    exp.add_argument("--trials", type=int, required=True)
    exp.add_argument("--ad", default=None, help="state file with the broadcast profile")
    exp.add_argument("--ad-strategy", choices=("lp", "star-greedy"), default="lp")
    exp.add_argument("--alpha", type=float, default=0.2)
    exp.add_argument("--beta", type=float, default=0.2)
    exp.add_argument("--t-star", type=int, default=None)
    exp.add_argument("--t-prime", type=int, default=None)
    exp.add_argument("--commit-policy", choices=dynamics.COMMIT_POLICIES,
                     default="myopic-compare")
    exp.add_argument("--policy", choices=dynamics.SCHEDULE_POLICIES,
                     default="random-permutation-sweeps")
    exp.add_argument("--max-steps", type=int, default=None)
    exp.add_argument("--workers", type=int, default=1)
    exp.add_argument("--opt-nmax", type=int, default=18)
    exp.add_argument("--plots", action="store_true", help="render figures next to the CSV")
    exp.set_defaults(func=_cmd_experiment)

    ca = sub.add_parser("check-appendix", help="binomial-tail boundedness scan", parents=[shared])
    ca.add_argument("--a", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    ca.add_argument("--c", type=float, nargs="+", default=[0.5, 1, 2, 3, 5])
    ca.add_argument("--dmax", type=int, default=10_000)
    ca.set_defaults(func=_cmd_check_appendix)

    pc = sub.add_parser("pack-check", help="covering/packing equilibrium correspondence",
                        parents=[shared])
    pc.add_argument("--in", dest="infile", required=True)
    pc.add_argument("--nmax", type=int, default=22)
    pc.set_defaults(func=_cmd_pack_check)

    pl = sub.add_parser("plot", help="render figures from a trials CSV", parents=[shared])
    pl.add_argument("--in", dest="infile", required=True)
    pl.add_argument("--stem", default=None)
    pl.set_defaults(func=_cmd_plot)

    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except (ParseError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
