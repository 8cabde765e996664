"""Render a benchmark report as text, TSV, JSON and a PNG figure."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .evaluation import GroupStats, Report

COLUMNS = ("domain", "difficulty", "n", "RL", "judge", "judged", "failures", "time_s", "attempts")


def _row(domain: str, difficulty: str, s: GroupStats) -> list[str]:
    judge = "-" if s.judge_score is None else f"{s.judge_score:.2f}"
    return [domain, difficulty, str(s.n), f"{s.rouge_l:.2f}", judge, str(s.judged),
            str(s.failures), f"{s.mean_wall_time_s:.2f}", f"{s.mean_attempts:.2f}"]


def rows(report: Report) -> list[list[str]]:
    out = [_row(d, diff, s) for (d, diff), s in report.by_group.items()]
    out += [_row(d, "all", s) for d, s in report.by_domain.items()]
    out.append(_row("overall", "all", report.overall))
    return out


def format_table(report: Report) -> str:
    table = [list(COLUMNS)] + rows(report)
    widths = [max(len(r[i]) for r in table) for i in range(len(COLUMNS))]
    lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if report.overall.failures:
        lines.append(f"\n{report.overall.failures} record(s) failed; see the 'error' field in the results file.")
    return "\n".join(lines) + "\n"


def format_tsv(report: Report) -> str:
    return "\n".join("\t".join(r) for r in [list(COLUMNS)] + rows(report)) + "\n"


def plot_report(report: Report, path: str | Path, title: Optional[str] = None) -> Path:
    """Grouped bars of Rouge-L and judge score per domain."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = list(report.by_domain) + ["overall"]
    stats = list(report.by_domain.values()) + [report.overall]
    rl = [s.rouge_l for s in stats]
    js = [s.judge_score or 0.0 for s in stats]
    x = range(len(labels))
    width = 0.38

    fig, ax = plt.subplots(figsize=(max(4.0, 1.3 * len(labels) + 1.5), 3.4))
    ax.bar([i - width / 2 for i in x], rl, width, label="Rouge-L", color="#4c72b0")
    ax.bar([i + width / 2 for i in x], js, width, label="judge score", color="#dd8452")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylim(0, 105)
    ax.set_ylabel("score (%)")
    ax.legend(frameon=False, fontsize=8)
    ax.spines[["top", "right"]].set_visible(False)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report(report: Report, out_dir: str | Path, figure: bool = True) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "table": out_dir / "report.txt",
        "tsv": out_dir / "report.tsv",
        "summary": out_dir / "summary.json",
    }
    paths["table"].write_text(format_table(report), encoding="utf-8")
    paths["tsv"].write_text(format_tsv(report), encoding="utf-8")
    paths["summary"].write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if figure:
        paths["figure"] = plot_report(report, out_dir / "report.png")
    return paths
