"""File outputs for evaluations: delimited tables, episode traces, and
accuracy-curve figures rendered next to them."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .agent import TrainingLog
from .env import TraceStep
from .evaluate import EvalReport, _ordered

_POLICY_COLORS = {"prior-only": "tab:gray", "greedy": "tab:blue", "rl": "tab:red"}
_K_STYLES = {1: "-", 2: "--", 3: ":"}


def write_comparison_csv(path: str | Path, reports: Sequence[EvalReport]) -> None:
    reports = _ordered(reports)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "metric", "mean", "std"])
        for r in reports:
            for k in sorted(r.curves.keys()):
                w.writerow([r.policy, f"top{k}", f"{r.topk_mean(k):.6f}", f"{r.topk_std(k):.6f}"])
            w.writerow(
                [r.policy, "avg_questions",
                 f"{r.avg_questions_mean():.6f}", f"{r.avg_questions_std():.6f}"]
            )


def write_curves_csv(path: str | Path, reports: Sequence[EvalReport]) -> None:
    reports = _ordered(reports)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "k", "questions_asked", "accuracy"])
        for r in reports:
            for k in sorted(r.curves.keys()):
                for q, acc in enumerate(r.curves[k]):
                    w.writerow([r.policy, k, q, f"{acc:.6f}"])


def render_curves_figure(path: str | Path, reports: Sequence[EvalReport]) -> None:
    """Accuracy vs questions asked, one line per (policy, k)."""
    reports = _ordered(reports)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for r in reports:
        color = _POLICY_COLORS.get(r.policy)
        for k in sorted(r.curves.keys()):
            ax.plot(
                range(len(r.curves[k])),
                r.curves[k],
                _K_STYLES.get(k, "-"),
                color=color,
                label=f"{r.policy} top-{k}",
            )
    ax.set_xlabel("questions asked")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, ncol=max(1, len(reports)))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_trace_csv(path: str | Path, traces: Sequence[TraceStep], n_conditions: int) -> None:
    """One row per step: episode, step, action, answer, reward, posterior, done_reason."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["episode", "step", "action", "answer", "reward"]
            + [f"post_{i}" for i in range(n_conditions)]
            + ["done_reason"]
        )
        for t in traces:
            w.writerow(
                [t.episode, t.step, t.action, t.answer, f"{t.reward:.9f}"]
                + [f"{p:.9f}" for p in t.posterior]
                + [t.done_reason]
            )


def write_training_log_csv(path: str | Path, log: TrainingLog) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "return", "length", "epsilon", "mean_loss", "done_reason"])
        for e in log.episodes:
            w.writerow(
                [e.episode, f"{e.ret:.6f}", e.length, f"{e.epsilon:.6f}",
                 f"{e.mean_loss:.6f}", e.done_reason]
            )


def write_report_bundle(
    out_dir: str | Path, reports: Sequence[EvalReport], table_text: str
) -> dict[str, Path]:
    """Write the standard report set: text table, comparison + curve CSVs,
    and the curves figure.  Returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "table": out / "report.txt",
        "comparison": out / "comparison.csv",
        "curves": out / "curves.csv",
        "figure": out / "curves.png",
    }
    paths["table"].write_text(table_text, encoding="utf-8")
    write_comparison_csv(paths["comparison"], reports)
    write_curves_csv(paths["curves"], reports)
    render_curves_figure(paths["figure"], reports)
    return paths
