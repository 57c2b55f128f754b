"""Figures and delimited summaries for rule-campaign reports."""

from __future__ import annotations

import csv
from pathlib import Path


def write_summary_csv(report: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule", "theorem", "backend", "instances", "attempts",
                    "counterexamples", "seconds", "sound"])
        for row in report["rules"]:
            w.writerow([row["rule"], row["theorem"], row["backend"],
                        row["instances"], row["attempts"],
                        len(row["counterexamples"]), row["seconds"],
                        row["sound"]])


def write_plots(report: dict, outdir: Path) -> list[Path]:
    """Render the campaign summary figures next to the delimited output."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    rows = report["rules"]
    backends = report["backends"]

    write_summary_csv(report, outdir / "summary.csv")
    written.append(outdir / "summary.csv")

    rules = sorted({r["rule"] for r in rows})
    by_key = {(r["rule"], r["backend"]): r for r in rows}

    # instances per rule, stacked by backend
    fig, ax = plt.subplots(figsize=(9, max(4, 0.22 * len(rules))))
    base = [0.0] * len(rules)
    for backend in backends:
        vals = [by_key.get((rule, backend), {}).get("instances", 0)
                for rule in rules]
        ax.barh(rules, vals, left=base, label=backend, height=0.7)
        base = [b + v for b, v in zip(base, vals)]
    ax.set_xlabel("applicable instances")
    ax.set_title(f"rule campaign, seed {report['seed']}")
    ax.legend(fontsize=8)
    ax.tick_params(axis="y", labelsize=6)
    fig.tight_layout()
    p1 = outdir / "instances.png"
    fig.savefig(p1, dpi=150)
    plt.close(fig)
    written.append(p1)

    # premise hit rate: applicable / attempts
    fig, ax = plt.subplots(figsize=(9, max(4, 0.22 * len(rules))))
    for backend in backends:
        ratios = []
        for rule in rules:
            r = by_key.get((rule, backend))
            ratios.append(r["instances"] / max(1, r["attempts"]) if r else 0)
        ax.plot(ratios, range(len(rules)), marker=".", linestyle="",
                label=backend)
    ax.set_yticks(range(len(rules)))
    ax.set_yticklabels(rules, fontsize=6)
    ax.set_xlabel("applicable / attempts")
    ax.set_xlim(0, 1.05)
    ax.set_title("premise hit rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    p2 = outdir / "hit_rate.png"
    fig.savefig(p2, dpi=150)
    plt.close(fig)
    written.append(p2)

    # time per rule/backend
    fig, ax = plt.subplots(figsize=(9, max(4, 0.22 * len(rules))))
    base = [0.0] * len(rules)
    for backend in backends:
        vals = [by_key.get((rule, backend), {}).get("seconds", 0)
                for rule in rules]
        ax.barh(rules, vals, left=base, label=backend, height=0.7)
        base = [b + v for b, v in zip(base, vals)]
    ax.set_xlabel("seconds")
    ax.set_title("campaign time by rule")
    ax.legend(fontsize=8)
    ax.tick_params(axis="y", labelsize=6)
    fig.tight_layout()
    p3 = outdir / "timing.png"
    fig.savefig(p3, dpi=150)
    plt.close(fig)
    written.append(p3)
    return written
