"""Delimited output for experiments: the per-trial CSV and the summary block.

Float fields are written with ``repr`` (shortest round-trip form), so files
are byte-identical across runs with the same flags and reload losslessly.
"""

from __future__ import annotations

from pathlib import Path

from .harness import TrialReport, TrialRow

CSV_HEADER = "trial,seed,cost_ad,cost_s1,cost_s2,w_fbad,c_L,ron,fr,steps_p1,steps_p2,invariants_ok"


def trials_csv_text(report: TrialReport) -> str:
    lines = [CSV_HEADER]
    for r in report.rows:
        lines.append(
            f"{r.trial},{r.seed},{r.cost_ad!r},{r.cost_s1!r},{r.cost_s2!r},"
            f"{r.w_fbad!r},{r.c_l!r},{r.ron},{r.fr},"
            f"{r.steps_p1},{r.steps_p2},{int(r.invariants_ok)}"
        )
    return "\n".join(lines) + "\n"


def write_trials_csv(report: TrialReport, path: str | Path) -> None:
    Path(path).write_text(trials_csv_text(report), encoding="utf-8")


def read_trials_csv(path: str | Path) -> list[TrialRow]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: not a trials CSV (unexpected header)")
    rows = []
    for line in lines[1:]:
        f = line.split(",")
        if len(f) != 12:
            raise ValueError(f"{path}: malformed row {line!r}")
        rows.append(
            TrialRow(
                trial=int(f[0]),
                seed=int(f[1]),
                cost_ad=float(f[2]),
                cost_s1=float(f[3]),
                cost_s2=float(f[4]),
                w_fbad=float(f[5]),
                c_l=float(f[6]),
                ron=int(f[7]),
                fr=int(f[8]),
                steps_p1=int(f[9]),
                steps_p2=int(f[10]),
                invariants_ok=bool(int(f[11])),
            )
        )
    return rows


def summary_items(report: TrialReport) -> list[tuple[str, str]]:
    """Summary key/value pairs in their fixed output order."""

    def fmt(v: float | None) -> str:
        return "na" if v is None else repr(v)

    return [
        ("model", report.model),
        ("trials", str(len(report.rows))),
        ("master_seed", str(report.master_seed)),
        ("cost_ad", repr(report.cost_ad)),
        ("mean_cost_s2", repr(report.mean_cost_s2)),
        ("stderr_cost_s2", repr(report.stderr_cost_s2)),
        ("mean_ratio_to_ad", repr(report.mean_ratio_to_ad)),
        ("opt", fmt(report.opt)),
        ("mean_ratio_to_opt", fmt(report.mean_ratio_to_opt)),
        ("poa", fmt(report.poa)),
        ("pos", fmt(report.pos)),
        ("invariant_failures", str(len(report.failures))),
        (
            "failing_seeds",
            ";".join(str(seed) for _, seed in report.failures) or "none",
        ),
    ]


def summary_text(report: TrialReport) -> str:
    return "\n".join(f"{k}: {v}" for k, v in summary_items(report)) + "\n"


def summary_json(report: TrialReport) -> str:
    import json

    doc: dict[str, object] = {}
    for k, v in summary_items(report):
        doc[k] = v
    return json.dumps(doc, indent=2) + "\n"


def write_summary(report: TrialReport, path: str | Path, fmt: str = "csv") -> None:
    text = summary_json(report) if fmt == "json" else summary_text(report)
    Path(path).write_text(text, encoding="utf-8")
