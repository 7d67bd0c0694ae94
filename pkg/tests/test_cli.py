"""Report writers and the command-line surface."""

from __future__ import annotations

import numpy as np
import pytest

from covergames import (
    ExperimentConfig,
    JointState,
    gen_star,
    load_instance,
    load_state,
    run_experiment,
)
from covergames.cli import cli_main
from covergames.report import (
    CSV_HEADER,
    read_trials_csv,
    summary_text,
    trials_csv_text,
    write_trials_csv,
)


@pytest.fixture()
def star_file(tmp_path):
    path = tmp_path / "star.json"
    assert cli_main(["gen", "star", "--n", "10", "--c", "0.5", "--w", "1",
                     "--out", str(path)]) == 0
    return path


def small_report():
    inst = gen_star(8, 0.5, 1.0)
    cfg = ExperimentConfig(instance=inst, model="psa", trials=12, master_seed=5,
                           alpha=0.3, opt_nmax=10)
    return run_experiment(cfg)


class TestReportFiles:
    def test_csv_header_and_round_trip(self, tmp_path):
        rep = small_report()
        path = tmp_path / "trials.csv"
        write_trials_csv(rep, path)
        text = path.read_text()
        assert text.splitlines()[0] == CSV_HEADER
        assert read_trials_csv(path) == list(rep.rows)

    def test_summary_mean_matches_csv_column(self, tmp_path):
        rep = small_report()
        path = tmp_path / "trials.csv"
        write_trials_csv(rep, path)
        rows = read_trials_csv(path)
        mean = float(np.mean([r.cost_s2 for r in rows]))
        assert abs(mean - rep.mean_cost_s2) <= 1e-12
        assert f"mean_cost_s2: {rep.mean_cost_s2!r}" in summary_text(rep)

    def test_rejects_foreign_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="unexpected header"):
            read_trials_csv(path)


class TestCliBasics:
    def test_gen_writes_parseable_instance(self, star_file):
        inst = load_instance(star_file)
        assert inst == gen_star(10, 0.5, 1.0)

    def test_stats(self, star_file, capsys):
        assert cli_main(["stats", "--in", str(star_file)]) == 0
        out = capsys.readouterr().out
        assert "f_max: 2" in out and "delta1: 9" in out

    def test_opt(self, star_file, capsys):
        assert cli_main(["opt", "--in", str(star_file)]) == 0
        out = capsys.readouterr().out
        assert "opt: 0.5" in out
        assert "state: 1000000000" in out

    def test_opt_refuses_large_instance(self, tmp_path, capsys):
        path = tmp_path / "big.json"
        cli_main(["gen", "star", "--n", "25", "--c", "0.5", "--w", "1", "--out", str(path)])
        assert cli_main(["opt", "--in", str(path)]) == 2
        assert "LP relaxation" in capsys.readouterr().err

    def test_nash_list(self, star_file, capsys):
        assert cli_main(["nash", "--in", str(star_file), "--list"]) == 0
        out = capsys.readouterr().out
        assert "poa: 9.0" in out
        assert "1000000000," in out

    def test_bad_flags_exit_2(self):
        assert cli_main(["opt"]) == 2  # missing --in
        assert cli_main(["definitely-not-a-command"]) == 2

    def test_missing_file_exit_2(self, capsys):
        assert cli_main(["stats", "--in", "/nonexistent/inst.json"]) == 2

    def test_advertise_lp(self, star_file, tmp_path, capsys):
        ad_path = tmp_path / "ad.json"
        assert cli_main(["advertise", "lp", "--in", str(star_file),
                         "--out", str(ad_path)]) == 0
        assert load_state(ad_path) == JointState.from_on_agents(10, [0])
        out = capsys.readouterr().out
        assert "delta1_star: 9" in out

    def test_check_star(self, star_file, tmp_path, capsys):
        ad_path = tmp_path / "ad.json"
        cli_main(["advertise", "lp", "--in", str(star_file), "--out", str(ad_path)])
        capsys.readouterr()
        assert cli_main(["check-star", "--in", str(star_file), "--ad", str(ad_path),
                         "--alpha", "0.9"]) == 0
        assert "holds: True" in capsys.readouterr().out

    def test_run_psa_with_trace_and_state_out(self, star_file, tmp_path, capsys):
        trace_path = tmp_path / "run.trace"
        out_state = tmp_path / "final.json"
        rc = cli_main([
            "run", "psa", "--in", str(star_file), "--alpha", "0.3", "--seed", "5",
            "--trace", str(trace_path), "--out", str(out_state),
        ])
        assert rc == 0
        assert "converged: True" in capsys.readouterr().out
        for line in trace_path.read_text().splitlines():
            parts = line.split(",")
            assert len(parts) == 6
            assert parts[4] in ("best-response", "follow-ad", "commit")
        assert load_state(out_state).n == 10

    def test_run_ltd(self, star_file, capsys):
        rc = cli_main(["run", "ltd", "--in", str(star_file), "--beta", "0.3",
                       "--seed", "9"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "event_e: True" in out

    def test_pack_check(self, star_file, capsys):
        assert cli_main(["pack-check", "--in", str(star_file)]) == 0
        assert "matches: True" in capsys.readouterr().out

    def test_check_appendix(self, capsys):
        assert cli_main(["check-appendix", "--a", "0.5", "--c", "2",
                         "--dmax", "500"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("a,c,max_ratio")


class TestCliExperiment:
    def test_byte_identical_across_runs_and_workers(self, star_file, tmp_path):
        args = ["experiment", "--model", "psa", "--alpha", "0.2", "--trials", "30",
                "--seed", "7", "--in", str(star_file)]
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        out3 = tmp_path / "c.csv"
        assert cli_main(args + ["--out", str(out1)]) == 0
        assert cli_main(args + ["--out", str(out2)]) == 0
        assert cli_main(args + ["--out", str(out3), "--workers", "4"]) == 0
        assert out1.read_bytes() == out2.read_bytes() == out3.read_bytes()
        assert (tmp_path / "a.summary.txt").read_bytes() == (
            tmp_path / "b.summary.txt"
        ).read_bytes()

    def test_summary_json_format(self, star_file, tmp_path):
        out = tmp_path / "t.csv"
        assert cli_main(["experiment", "--model", "ltd", "--beta", "0.3",
                         "--trials", "5", "--seed", "1", "--in", str(star_file),
                         "--out", str(out), "--format", "json"]) == 0
        import json

        doc = json.loads((tmp_path / "t.summary.json").read_text())
        assert doc["model"] == "ltd"
        assert doc["invariant_failures"] == "0"

    def test_plots_flag_renders_figures(self, star_file, tmp_path):
        out = tmp_path / "t.csv"
        assert cli_main(["experiment", "--model", "psa", "--alpha", "0.3",
                         "--trials", "8", "--seed", "2", "--in", str(star_file),
                         "--out", str(out), "--plots"]) == 0
        assert (tmp_path / "t_cost_hist.png").exists()
        assert (tmp_path / "t_deviation_scatter.png").exists()

    def test_plot_subcommand_from_csv(self, star_file, tmp_path, capsys):
        out = tmp_path / "t.csv"
        cli_main(["experiment", "--model", "psa", "--alpha", "0.3", "--trials", "6",
                  "--seed", "2", "--in", str(star_file), "--out", str(out)])
        assert cli_main(["plot", "--in", str(out)]) == 0
        assert (tmp_path / "t_cost_hist.png").exists()

    def test_experiment_csv_loads_as_rows(self, star_file, tmp_path):
        out = tmp_path / "t.csv"
        cli_main(["experiment", "--model", "br-only", "--trials", "6", "--seed", "3",
                  "--in", str(star_file), "--out", str(out)])
        rows = read_trials_csv(out)
        assert len(rows) == 6
        assert all(r.invariants_ok for r in rows)
