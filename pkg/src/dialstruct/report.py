"""Figure rendering for the report path.

Every report-producing CLI stage writes its delimited/JSON artifact plus a
PNG figure next to it: the slot-count sweep as an ARI/AMI curve, and the
transition graph laid out in layers by total modification count.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .structure import TransitionGraph


def render_sweep_figure(
    rows: list[tuple[int, float | None, float | None]],
    path: str | Path,
    true_n: int | None = None,
) -> None:
    """Plot clustering quality against the assumed number of slots.

    rows: (n, ari, ami) triples; rows with None metrics (failed sweep
    points) are skipped on the curve.
    """
    good = [(n, a, m) for n, a, m in rows if a is not None and m is not None]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if good:
        ns = [r[0] for r in good]
        ax.plot(ns, [r[1] for r in good], marker="o", label="ARI")
        ax.plot(ns, [r[2] for r in good], marker="s", label="AMI")
        if true_n is not None:
            for series in (1, 2):
                at_true = [r[series] for r in good if r[0] == true_n]
                if at_true:
                    ax.plot(
                        [true_n],
                        at_true[:1],
                        marker="*",
                        markersize=14,
                        linestyle="none",
                        color="black",
                    )
    ax.set_xlabel("assumed number of slots")
    ax.set_ylabel("score")
    ax.set_title("Robustness to the estimated slot count")
    if good:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _layered_positions(graph: TransitionGraph) -> dict[int, tuple[float, float]]:
    """Lay nodes out left-to-right by total modification count."""
    layers: dict[int, list[int]] = defaultdict(list)
    for node in graph.nodes:
        layers[sum(node.state)].append(node.id)
    positions: dict[int, tuple[float, float]] = {}
    for depth in sorted(layers):
        ids = sorted(layers[depth])
        for rank, node_id in enumerate(ids):
            positions[node_id] = (float(depth), rank - (len(ids) - 1) / 2.0)
    return positions


def render_graph_figure(
    graph: TransitionGraph, path: str | Path, max_nodes: int = 40
) -> None:
    """Draw the transition graph with nodes layered by state depth.

    Large graphs are pruned to the most-visited nodes so labels stay
    readable; the title notes when pruning happened.
    """
    nodes = sorted(graph.nodes, key=lambda n: (-n.visit_count, n.id))
    pruned = len(nodes) > max_nodes
    keep = {n.id for n in nodes[:max_nodes]}
    shown = TransitionGraph(
        nodes=[n for n in graph.nodes if n.id in keep],
        edges=[e for e in graph.edges if e.src in keep and e.dst in keep],
        initial_state_id=graph.initial_state_id,
    )
    positions = _layered_positions(shown)

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for e in shown.edges:
        x0, y0 = positions[e.src]
        x1, y1 = positions[e.dst]
        if e.src == e.dst:
            ax.annotate(
                f"{e.prob:.2f}",
                xy=(x0, y0 + 0.28),
                ha="center",
                fontsize=7,
                color="gray",
            )
            continue
        ax.annotate(
            "",
            xy=(x1, y1),
            xytext=(x0, y0),
            arrowprops=dict(
                arrowstyle="-|>",
                color="tab:gray",
                alpha=0.35 + 0.6 * e.prob,
                shrinkA=12,
                shrinkB=12,
            ),
        )
        if len(shown.edges) <= 20:
            ax.annotate(
                f"{e.prob:.2f}",
                xy=((x0 + x1) / 2, (y0 + y1) / 2),
                fontsize=7,
                color="gray",
                ha="center",
            )
    for node in shown.nodes:
        x, y = positions[node.id]
        is_initial = node.id == shown.initial_state_id
        ax.scatter(
            [x],
            [y],
            s=480,
            color="tab:blue" if not is_initial else "tab:orange",
            zorder=3,
        )
        ax.annotate(
            str(node.id),
            xy=(x, y),
            ha="center",
            va="center",
            color="white",
            fontsize=9,
            zorder=4,
        )
    title = f"Transition structure: {len(shown.nodes)} states, {len(shown.edges)} transitions"
    if pruned:
        title += f" (top {max_nodes} of {len(graph.nodes)} states)"
    ax.set_title(title)
    ax.set_xlabel("total modifications")
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
