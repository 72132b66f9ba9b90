"""Delimited output and figure rendering for the CLI report paths.

Every report command writes its numbers as CSV (or aligned text) and, when
an output path is given, renders a matching matplotlib figure next to it.
Figures are a convenience view; the delimited file is the normative output
and is byte-identical for identical config and seed.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .blindness import BlindnessReport, StrategyScore
from .noise import StabilityPoint, SuccessEstimate

TruthTable = dict[tuple[int, int], SuccessEstimate]


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# ---------------------------------------------------------------------------
# truth table


def truth_table_rows(table: TruthTable) -> list[tuple]:
    rows = []
    for (a, b), est in sorted(table.items()):
        for r in (0, 1):
            e = est.by_r[r]
            rows.append((a, b, r, e.p_hat, e.stderr, e.n))
    return rows


def write_truth_table(path: Path, table: TruthTable, fmt: str = "csv") -> None:
    rows = truth_table_rows(table)
    header = ("a", "b", "r", "success", "stderr", "n_conclusive")
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [
            ",".join([str(a), str(b), str(r), _fmt(p), _fmt(se), str(n)])
            for a, b, r, p, se, n in rows
        ]
    else:
        lines = ["{:>2} {:>2} {:>2} {:>12} {:>12} {:>12}".format(*header)]
        lines += [
            f"{a:>2} {b:>2} {r:>2} {p:>12.6f} {se:>12.6f} {n:>12}"
            for a, b, r, p, se, n in rows
        ]
    path.write_text("\n".join(lines) + "\n")


def grand_mean(table: TruthTable) -> float:
    ks = sum(e.overall.p_hat * e.overall.n for e in table.values())
    ns = sum(e.overall.n for e in table.values())
    return ks / ns if ns else float("nan")


def render_truth_table(path: Path, table: TruthTable) -> None:
    """Grouped bar chart of success per input pair, split by pad value."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    labels = [f"({a},{b})" for a, b in sorted(table)]
    xs = range(len(labels))
    width = 0.38
    for r, offset, color in ((0, -width / 2, "#2c7fb8"), (1, width / 2, "#d95f0e")):
        ests = [table[ab].by_r[r] for ab in sorted(table)]
        ax.bar(
            [x + offset for x in xs],
            [e.p_hat for e in ests],
            width,
            yerr=[3 * e.stderr for e in ests],
            capsize=3,
            label=f"r = {r}",
            color=color,
        )
    ax.set_xticks(list(xs), labels)
    ax.set_xlabel("inputs (a, b)")
    ax.set_ylabel("success probability")
    lo = min(e.p_hat for t in table.values() for e in t.by_r)
    ax.set_ylim(max(0.0, lo - 0.05), 1.005)
    ax.axhline(1.0, lw=0.5, color="gray")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# stability series


def write_stability(path: Path, series: list[StabilityPoint], fmt: str = "csv") -> None:
    header = ("t_min", "success", "stderr", "n_conclusive")
    rows = [
        (p.t_min, p.estimate.overall.p_hat, p.estimate.overall.stderr, p.estimate.overall.n)
        for p in series
    ]
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [
            ",".join([_fmt(t), _fmt(p), _fmt(se), str(n)]) for t, p, se, n in rows
        ]
    else:
        lines = ["{:>8} {:>12} {:>12} {:>12}".format(*header)]
        lines += [
            f"{t:>8.1f} {p:>12.6f} {se:>12.6f} {n:>12}" for t, p, se, n in rows
        ]
    path.write_text("\n".join(lines) + "\n")


def render_stability(path: Path, series: list[StabilityPoint]) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ts = [p.t_min for p in series]
    ps = [p.estimate.overall.p_hat for p in series]
    errs = [3 * p.estimate.overall.stderr for p in series]
    ax.errorbar(ts, ps, yerr=errs, fmt="o-", capsize=3, color="#2c7fb8")
    ax.set_xlabel("elapsed time (min)")
    ax.set_ylabel("success probability")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# blindness


def write_blindness(
    path: Path,
    report: BlindnessReport,
    scores: list[StrategyScore],
    fmt: str = "csv",
) -> None:
    if fmt == "csv":
        lines = ["metric,value"]
        lines += [
            f"mode,{report.mode}",
            f"pad_removed,{report.pad_removed}",
            f"max_distance_from_mixed,{_fmt(report.max_distance_from_mixed)}",
            f"max_pairwise_distance,{_fmt(report.max_pairwise_distance)}",
            f"multiset_ok,{report.multiset_ok}",
            f"multi_copy_ok,{report.multi_copy_ok}",
            f"probe_ok,{report.probe_ok}",
            f"verdict,{'PASS' if report.passed else 'FAIL'}",
        ]
        for sc in scores:
            lines.append(
                f"strategy_{sc.name}_inputs_accuracy,{_fmt(sc.inputs_accuracy.p_hat)}"
            )
            lines.append(
                f"strategy_{sc.name}_and_accuracy,{_fmt(sc.and_accuracy.p_hat)}"
            )
    else:
        lines = report.to_lines()
        if scores:
            lines.append("guessing strategies:")
            for sc in scores:
                lines.append(
                    f"  {sc.name}: inputs {sc.inputs_accuracy.p_hat:.4f}"
                    f" (+/- {sc.inputs_accuracy.stderr:.4f}),"
                    f" AND {sc.and_accuracy.p_hat:.4f}"
                    f" (+/- {sc.and_accuracy.stderr:.4f})"
                )
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# circuit sweeps


def write_circuit_sweep(
    path: Path,
    rows: list[tuple[dict[str, int], dict[str, int], dict[str, int]]],
    inputs: tuple[str, ...],
    outputs: tuple[str, ...],
    fmt: str = "csv",
) -> None:
    header = ["inputs"] + [f"{w}_delegated" for w in outputs] + [
        f"{w}_reference" for w in outputs
    ] + ["match"]
    table = []
    for assignment, got, want in rows:
        bits = "".join(str(assignment[k]) for k in inputs)
        table.append(
            [bits]
            + [str(got[w]) for w in outputs]
            + [str(want[w]) for w in outputs]
            + [str(got == want)]
        )
    if fmt == "csv":
        lines = [",".join(header)] + [",".join(row) for row in table]
    else:
        widths = [max(len(h), *(len(r[i]) for r in table)) for i, h in enumerate(header)]
        lines = [" ".join(h.rjust(w) for h, w in zip(header, widths))]
        lines += [
            " ".join(c.rjust(w) for c, w in zip(row, widths)) for row in table
        ]
    path.write_text("\n".join(lines) + "\n")
