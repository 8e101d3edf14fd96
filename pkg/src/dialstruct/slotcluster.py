"""Cluster detected span embeddings into a fixed number of slot groups.

The fit runs over every detected span of the target-domain corpus. Distance
is Euclidean over the raw embeddings; the three supported algorithms are the
conventional scikit-learn implementations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sbd import SpanPrediction

logger = logging.getLogger(__name__)

ALGORITHMS = ("kmeans", "birch", "agglomerative")

SpanKey = tuple[str, int, int, int]


@dataclass
class SlotGrouping:
    """Partition of span ids into group indices [0, n_groups)."""

    n_groups: int
    assignment: dict[SpanKey, int]
    algorithm: str
    seed: int

    def group_of(self, span: SpanPrediction) -> int:
        return self.assignment[span.key()]


def fit_labels(
    matrix: np.ndarray, n_clusters: int, algorithm: str, seed: int
) -> np.ndarray:
    """Cluster rows of a matrix; shared by span and utterance clustering."""
    from sklearn.cluster import AgglomerativeClustering, Birch, KMeans

    if algorithm == "kmeans":
        model = KMeans(n_clusters=n_clusters, random_state=seed, n_init=10)
        return model.fit_predict(matrix)
    if algorithm == "birch":
        return Birch(n_clusters=n_clusters).fit_predict(matrix)
    if algorithm == "agglomerative":
        if n_clusters == 1:
            return np.zeros(matrix.shape[0], dtype=int)
        return AgglomerativeClustering(
            n_clusters=n_clusters, linkage="ward"
        ).fit_predict(matrix)
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


def _repair_empty_groups(matrix: np.ndarray, labels: np.ndarray, n_groups: int) -> np.ndarray:
    """Seed each empty group with the point farthest from its own centroid.

    Only groups with at least two members donate points, so the repair
    terminates and never re-empties a group.
    """
    labels = labels.copy()
    for empty in sorted(set(range(n_groups)) - set(labels.tolist())):
        counts = np.bincount(labels, minlength=n_groups)
        distances = np.zeros(len(labels))
        for g in range(n_groups):
            members = np.flatnonzero(labels == g)
            if len(members) < 2:
                continue
            centroid_vec = matrix[members].mean(axis=0)
            distances[members] = np.linalg.norm(matrix[members] - centroid_vec, axis=1)
        donors = np.flatnonzero(counts[labels] >= 2)
        if len(donors) == 0:
            break
        chosen = donors[int(np.argmax(distances[donors]))]
        labels[chosen] = empty
    return labels


def cluster_spans(
    spans: list[SpanPrediction],
    n_groups: int,
    algorithm: str = "kmeans",
    seed: int = 0,
) -> SlotGrouping:
    """Partition span embeddings into n_groups slot groups.

    Deterministic for a given seed. The same surface text may land in
    different groups because the embeddings are contextual.
    """
    if n_groups < 1:
        raise ValueError("n_groups must be at least 1")
    if len(spans) < n_groups:
        raise ValueError(
            f"cannot form {n_groups} groups from {len(spans)} spans"
        )
    matrix = np.stack([s.embedding for s in spans]).astype(np.float64)
    if np.allclose(matrix, matrix[0]):
        # degenerate input: clustering cannot separate identical points
        logger.warning(
            "all %d span embeddings identical; %d of %d groups left empty",
            len(spans),
            n_groups - 1,
            n_groups,
        )
        labels = np.zeros(len(spans), dtype=int)
    else:
        labels = np.asarray(fit_labels(matrix, n_groups, algorithm, seed))
        if len(set(labels.tolist())) < n_groups:
            labels = _repair_empty_groups(matrix, labels, n_groups)
    assignment = {s.key(): int(lab) for s, lab in zip(spans, labels)}
    if len(assignment) != len(spans):
        raise ValueError("duplicate span ids in input")
    return SlotGrouping(
        n_groups=n_groups, assignment=assignment, algorithm=algorithm, seed=seed
    )


def centroid(
    grouping: SlotGrouping, spans: list[SpanPrediction], group_index: int
) -> np.ndarray:
    """Arithmetic mean embedding of a group's members."""
    members = [
        s.embedding for s in spans if grouping.assignment.get(s.key()) == group_index
    ]
    if not members:
        raise ValueError(f"group {group_index} is empty")
    return np.mean(np.stack(members).astype(np.float64), axis=0)


def write_grouping(grouping: SlotGrouping, path: str | Path) -> None:
    payload = {
        "n_groups": grouping.n_groups,
        "algorithm": grouping.algorithm,
        "seed": grouping.seed,
        "assignment": [
            {
                "span_ref": {
                    "dialogue_id": key[0],
                    "turn": key[1],
                    "start": key[2],
                    "end": key[3],
                },
                "group": group,
            }
            for key, group in grouping.assignment.items()
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def read_grouping(path: str | Path) -> SlotGrouping:
    payload = json.loads(Path(path).read_text())
    assignment = {}
    for entry in payload["assignment"]:
        ref = entry["span_ref"]
        assignment[(ref["dialogue_id"], ref["turn"], ref["start"], ref["end"])] = entry[
            "group"
        ]
    return SlotGrouping(
        n_groups=payload["n_groups"],
        assignment=assignment,
        algorithm=payload["algorithm"],
        seed=payload["seed"],
    )
