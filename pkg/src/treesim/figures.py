# figures.py
# ----------------------------------------------------------------------
# Report figures for the CLI: variant frequencies, the discovered tree
# as a node-link diagram, per-activity KPI bars, and the EMD transport
# plan.  Everything renders headless (Agg) to PNG files; functions take
# a target path and return it, so the CLI can list what it wrote.
#
# DESIGN DECISIONS
#  - Matplotlib only, fixed figure sizes scaled by content, dpi 120:
#    deterministic output good enough for a run report, not a charting
#    framework.
#  - The tree layout is the classic tidy recursion: leaves get unit-
#    spaced x slots, operators sit centered above their children at
#    y = -depth.
# ----------------------------------------------------------------------
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

from matplotlib import pyplot as plt  # noqa: E402  (backend must be set first)

from .emd import EmdReport  # noqa: E402
from .eventlog import EventLog, variants  # noqa: E402
from .ptree import (  # noqa: E402
    ActivityLeaf,
    Op,
    OperatorNode,
    ProcessTree,
    PTNode,
)
from .simengine import KpiReport  # noqa: E402

__all__ = [
    "figure_emd",
    "figure_kpis",
    "figure_tree",
    "figure_variants",
]

_OP_GLYPH = {Op.SEQUENCE: "->", Op.XOR: "X", Op.PARALLEL: "+", Op.LOOP: "*"}


def figure_variants(log: EventLog, path: str | Path, top: int = 20) -> Path:
    """Horizontal bar chart of the most frequent trace variants."""
    entries = sorted(variants(log), key=lambda v: (-v.count, v.sequence))[:top]
    labels = [" > ".join(v.sequence)[:60] or "(empty)" for v in entries]
    counts = [v.count for v in entries]
    height = max(2.0, 0.4 * len(entries) + 1.2)
    fig, ax = plt.subplots(figsize=(8, height))
    ax.barh(range(len(entries)), counts, color="#4878a8")
    ax.set_yticks(range(len(entries)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("cases")
    ax.set_title(f"Trace variants (top {len(entries)} of {len(variants(log))})")
    return _save(fig, path)


def _node_label(node: PTNode) -> str:
    if isinstance(node, ActivityLeaf):
        return node.name
    if isinstance(node, OperatorNode):
        label = _OP_GLYPH[node.kind]
        if node.kind is Op.LOOP:
            parts = []
            if node.max_redo is not None:
                parts.append(f"max {node.max_redo}")
            if node.p_redo is not None:
                parts.append(f"p {node.p_redo:.2f}")
            if parts:
                label += "\n" + ", ".join(parts)
        return label
    return "tau"


def _layout(node: PTNode, depth: int, slots: list[int],
            positions: dict[int, tuple[float, int]],
            edges: list[tuple[int, int, str]]) -> float:
    """Assign x = centered leaf slot, y = -depth; return the node's x."""
    node_key = id(node)
    if isinstance(node, OperatorNode) and node.children:
        xs = []
        for i, child in enumerate(node.children):
            xs.append(_layout(child, depth + 1, slots, positions, edges))
            label = ""
            if node.kind is Op.XOR and node.xor_weights is not None:
                label = f"{node.xor_weights[i]:.2f}"
            edges.append((node_key, id(child), label))
        x = (xs[0] + xs[-1]) / 2.0
    else:
        x = float(slots[0])
        slots[0] += 1
    positions[node_key] = (x, -depth)
    return x


def figure_tree(tree: ProcessTree, path: str | Path) -> Path:
    """Node-link diagram of the process tree with operator glyphs."""
    positions: dict[int, tuple[float, int]] = {}
    edges: list[tuple[int, int, str]] = []
    labels: dict[int, str] = {}

    def collect(node: PTNode) -> None:
        labels[id(node)] = _node_label(node)
        if isinstance(node, OperatorNode):
            for child in node.children:
                collect(child)

    collect(tree.root)
    _layout(tree.root, 0, [0], positions, edges)
    width = max(x for x, _ in positions.values()) + 1
    depth = -min(y for _, y in positions.values()) + 1
    fig, ax = plt.subplots(figsize=(max(4.0, 1.3 * width),
                                    max(3.0, 1.2 * depth)))
    for parent, child, label in edges:
        (x1, y1), (x2, y2) = positions[parent], positions[child]
        ax.plot([x1, x2], [y1, y2], color="#888888", zorder=1, linewidth=1)
        if label:
            ax.text((x1 + x2) / 2, (y1 + y2) / 2, label, fontsize=7,
                    color="#555555", ha="center",
                    bbox={"boxstyle": "round,pad=0.1", "facecolor": "white",
                          "edgecolor": "none"})
    for key, (x, y) in positions.items():
        leaf = "\n" not in labels[key] and labels[key] not in _OP_GLYPH.values()
        ax.text(x, y, labels[key], ha="center", va="center", fontsize=9,
                zorder=2,
                bbox={"boxstyle": "round,pad=0.35",
                      "facecolor": "#eef3fa" if leaf else "#cfe0f0",
                      "edgecolor": "#4878a8"})
    if tree.max_trace_length is not None:
        ax.set_title(f"Process tree (max trace length {tree.max_trace_length})")
    else:
        ax.set_title("Process tree")
    ax.set_xlim(-0.8, width - 0.2)
    ax.set_ylim(-depth + 0.2, 0.8)
    ax.axis("off")
    return _save(fig, path)


def figure_kpis(kpis: KpiReport, path: str | Path) -> Path:
    """Per-activity mean waiting/service bars plus max queue lengths."""
    names = sorted(kpis.activities)
    waiting = [kpis.activities[n].mean_waiting for n in names]
    service = [kpis.activities[n].mean_service for n in names]
    queues = [kpis.activities[n].max_queue for n in names]
    fig, (top, bottom) = plt.subplots(
        2, 1, figsize=(max(6.0, 0.9 * len(names) + 2), 6), sharex=True)
    xs = range(len(names))
    top.bar([x - 0.2 for x in xs], waiting, width=0.4, label="mean waiting",
            color="#c08030")
    top.bar([x + 0.2 for x in xs], service, width=0.4, label="mean service",
            color="#4878a8")
    top.set_ylabel("seconds")
    top.legend(fontsize=8)
    top.set_title(f"Activity KPIs (mean sojourn {kpis.mean_sojourn:.1f}s, "
                  f"max {kpis.max_sojourn:.1f}s)")
    bottom.bar(xs, queues, width=0.5, color="#70a070")
    bottom.set_ylabel("max queue")
    bottom.set_xticks(list(xs))
    bottom.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    return _save(fig, path)


def figure_emd(report: EmdReport, path: str | Path) -> Path:
    """Ground-cost heatmap with the optimal flow overlaid as dots."""
    rows, cols = len(report.variants1), len(report.variants2)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * cols + 2),
                                    max(3.5, 0.5 * rows + 2)))
    image = ax.imshow(report.ground_costs, cmap="YlOrRd", vmin=0.0, vmax=1.0,
                      aspect="auto")
    fig.colorbar(image, ax=ax, label="ground cost")
    if report.flow:
        biggest = max(report.flow.values())
        ys = [i for (i, _) in report.flow]
        xs = [j for (_, j) in report.flow]
        sizes = [40 + 360 * m / biggest for m in report.flow.values()]
        ax.scatter(xs, ys, s=sizes, facecolor="none", edgecolor="#204060",
                   linewidth=1.5, label="flow mass")
        ax.legend(fontsize=8, loc="upper right")
    ax.set_xlabel("log 2 variant")
    ax.set_ylabel("log 1 variant")
    ax.set_xticks(range(cols))
    ax.set_yticks(range(rows))
    ax.set_title(f"EMD transport plan (distance {report.distance:.4f})")
    return _save(fig, path)


def _save(fig, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return target
