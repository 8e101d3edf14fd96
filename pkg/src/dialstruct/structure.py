"""State-transition graphs over distinct dialogue states.

Nodes are distinct state vectors in first-visit order; edges carry raw
transition counts and probabilities normalized per source node. Every
trajectory implicitly starts at the all-zero state, so a virtual transition
from the zero vector to a dialogue's first recorded state is added whenever
the first turn already changed the state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from collections.abc import Sequence
from pathlib import Path

from .statetrack import LabeledDialogue, State


@dataclass
class GraphNode:
    id: int
    state: State
    visit_count: int


@dataclass
class GraphEdge:
    src: int
    dst: int
    count: int
    prob: float


@dataclass
class TransitionGraph:
    nodes: list[GraphNode]
    edges: list[GraphEdge]
    initial_state_id: int | None

    def node_by_state(self, state: State) -> GraphNode:
        for node in self.nodes:
            if node.state == tuple(state):
                return node
        raise KeyError(f"state {state} not in graph")

    def out_edges(self, node_id: int) -> list[GraphEdge]:
        return [e for e in self.edges if e.src == node_id]


def build_graph(labeled: Sequence[LabeledDialogue]) -> TransitionGraph:
    """Count transitions between consecutive turn states across dialogues."""
    if not labeled:
        raise ValueError("no labeled dialogues given")
    lengths = {len(s) for ld in labeled for s in ld.states}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent state vector lengths: {sorted(lengths)}")
    if not lengths:
        raise ValueError("labeled dialogues contain no states")
    zero: State = (0,) * lengths.pop()

    node_ids: dict[State, int] = {}
    visits: dict[State, int] = {}
    edge_counts: dict[tuple[int, int], int] = {}

    def node_id(state: State) -> int:
        if state not in node_ids:
            node_ids[state] = len(node_ids)
            visits[state] = 0
        return node_ids[state]

    for ld in labeled:
        if not ld.states:
            continue
        trajectory = list(ld.states)
        if trajectory[0] != zero:
            trajectory.insert(0, zero)
        for state in trajectory:
            node_id(state)
            visits[state] += 1
        for src, dst in zip(trajectory, trajectory[1:]):
            key = (node_ids[src], node_ids[dst])
            edge_counts[key] = edge_counts.get(key, 0) + 1

    out_totals: dict[int, int] = {}
    for (src, _), count in edge_counts.items():
        out_totals[src] = out_totals.get(src, 0) + count

    nodes = [
        GraphNode(id=i, state=state, visit_count=visits[state])
        for state, i in node_ids.items()
    ]
    edges = [
        GraphEdge(src=src, dst=dst, count=count, prob=count / out_totals[src])
        for (src, dst), count in sorted(edge_counts.items())
    ]
    return TransitionGraph(
        nodes=nodes,
        edges=edges,
        initial_state_id=node_ids.get(zero),
    )


def graph_to_dict(graph: TransitionGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "state": list(n.state), "count": n.visit_count}
            for n in graph.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "count": e.count, "prob": e.prob}
            for e in graph.edges
        ],
    }


def graph_from_dict(payload: dict) -> TransitionGraph:
    nodes = [
        GraphNode(id=n["id"], state=tuple(n["state"]), visit_count=n["count"])
        for n in payload["nodes"]
    ]
    edges = [
        GraphEdge(src=e["src"], dst=e["dst"], count=e["count"], prob=e["prob"])
        for e in payload["edges"]
    ]
    initial = None
    for n in nodes:
        if all(c == 0 for c in n.state):
            initial = n.id
            break
    return TransitionGraph(nodes=nodes, edges=edges, initial_state_id=initial)


def _dot_escape(text: str) -> str:
    return text.replace('"', '\\"')


def export_graph(graph: TransitionGraph, format: str, path: str | Path) -> None:
    """Write the graph as DOT (for rendering) or JSON (full precision)."""
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps(graph_to_dict(graph), indent=2))
        return
    if format == "dot":
        lines = ["digraph dialogue_structure {", "  node [shape=circle];"]
        for n in graph.nodes:
            label = _dot_escape(f"{n.id}\\n{list(n.state)}\\nvisits={n.visit_count}")
            lines.append(f'  n{n.id} [label="{label}"];')
        for e in graph.edges:
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.prob:.2f}"];')
        lines.append("}")
        path.write_text("\n".join(lines) + "\n")
        return
    raise ValueError(f"unknown format {format!r}; choose dot or json")


def read_graph_json(path: str | Path) -> TransitionGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))
