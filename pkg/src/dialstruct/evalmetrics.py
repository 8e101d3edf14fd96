"""Partition-agreement metrics and corpus BLEU, computed from first principles.

Pair-counting metrics (Rand index, adjusted Rand index) use exact integer
arithmetic over the contingency table; information-theoretic sums use
``math.fsum`` so results do not depend on label iteration order.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

import numpy as np

__all__ = [
    "rand_index",
    "adjusted_rand_index",
    "adjusted_mutual_info",
    "silhouette",
    "corpus_bleu",
]


def _check_assignments(gold: Sequence[int], pred: Sequence[int]) -> None:
    if len(gold) != len(pred):
        raise ValueError(
            f"assignment length mismatch: {len(gold)} vs {len(pred)}"
        )
    if len(gold) < 2:
        raise ValueError("need at least 2 items to compare assignments")


def _contingency(gold: Sequence[int], pred: Sequence[int]):
    """Joint label counts and the two marginal count tables."""
    cells = Counter(zip(gold, pred))
    row = Counter(gold)
    col = Counter(pred)
    return cells, row, col


def _pair_counts(gold: Sequence[int], pred: Sequence[int]):
    """Unordered-pair statistics: (same_both, same_gold, same_pred, total)."""
    cells, row, col = _contingency(gold, pred)
    same_both = sum(math.comb(c, 2) for c in cells.values())
    same_gold = sum(math.comb(c, 2) for c in row.values())
    same_pred = sum(math.comb(c, 2) for c in col.values())
    total = math.comb(len(gold), 2)
    return same_both, same_gold, same_pred, total


def rand_index(gold: Sequence[int], pred: Sequence[int]) -> float:
    """Fraction of item pairs on which the two assignments agree.

    Agreement means a pair is grouped together by both assignments or kept
    apart by both. Result lies in [0, 1].
    """
    _check_assignments(gold, pred)
    same_both, same_gold, same_pred, total = _pair_counts(gold, pred)
    apart_both = total - same_gold - same_pred + same_both
    return (same_both + apart_both) / total


def adjusted_rand_index(gold: Sequence[int], pred: Sequence[int]) -> float:
    """Rand index corrected for chance agreement.

    Uniformly random assignments score near 0; identical partitions score
    exactly 1, including the degenerate case where both assignments place
    every item in one cluster.
    """
    _check_assignments(gold, pred)
    same_both, same_gold, same_pred, total = _pair_counts(gold, pred)
    if same_gold == same_both and same_pred == same_both:
        # identical partitions; covers both-single-cluster and all-singletons
        return 1.0
    expected = same_gold * same_pred / total
    max_index = (same_gold + same_pred) / 2
    return (same_both - expected) / (max_index - expected)


def _entropy(marginal: Counter, n: int) -> float:
    return -math.fsum((c / n) * math.log(c / n) for c in marginal.values())


def _mutual_information(cells: Counter, row: Counter, col: Counter, n: int) -> float:
    return math.fsum(
        (nij / n) * math.log(n * nij / (row[g] * col[p]))
        for (g, p), nij in cells.items()
    )


def _expected_mutual_information(row: Counter, col: Counter, n: int) -> float:
    """Expectation of mutual information under the permutation model.

    For each pair of marginals (a, b) the joint cell count follows a
    hypergeometric distribution; the expectation sums the MI contribution of
    every feasible cell value weighted by its probability. Log-gamma keeps
    the factorial ratios stable.
    """
    lg = math.lgamma
    log_n_fact = lg(n + 1)
    terms = []
    for a in row.values():
        base_a = lg(a + 1) + lg(n - a + 1)
        for b in col.values():
            base = base_a + lg(b + 1) + lg(n - b + 1) - log_n_fact
            lo = max(1, a + b - n)
            hi = min(a, b)
            for nij in range(lo, hi + 1):
                log_prob = base - (
                    lg(nij + 1)
                    + lg(a - nij + 1)
                    + lg(b - nij + 1)
                    + lg(n - a - b + nij + 1)
                )
                terms.append(
                    (nij / n) * math.log(n * nij / (a * b)) * math.exp(log_prob)
                )
    return math.fsum(terms)


def adjusted_mutual_info(gold: Sequence[int], pred: Sequence[int]) -> float:
    """Mutual information adjusted for chance, normalized by the arithmetic
    mean of the two label entropies.

    Identical partitions score exactly 1; independent random assignments
    score near 0.
    """
    _check_assignments(gold, pred)
    same_both, same_gold, same_pred, _ = _pair_counts(gold, pred)
    if same_gold == same_both and same_pred == same_both:
        return 1.0
    cells, row, col = _contingency(gold, pred)
    n = len(gold)
    mi = _mutual_information(cells, row, col, n)
    emi = _expected_mutual_information(row, col, n)
    normalizer = 0.5 * (_entropy(row, n) + _entropy(col, n))
    denominator = normalizer - emi
    # guard against 0/0 from floating-point cancellation, keeping the sign
    eps = np.finfo(np.float64).eps
    if denominator < 0:
        denominator = min(denominator, -eps)
    else:
        denominator = max(denominator, eps)
    return (mi - emi) / denominator


def silhouette(embeddings: Sequence[Sequence[float]], pred: Sequence[int]) -> float:
    """Mean silhouette score over items under Euclidean distance.

    For an item, a is the mean distance to its own cluster's other members
    and b the smallest mean distance to any other cluster; the item scores
    (b - a) / max(a, b). Items in singleton clusters score 0.
    """
    if len(embeddings) != len(pred):
        raise ValueError(
            f"embeddings/labels length mismatch: {len(embeddings)} vs {len(pred)}"
        )
    n = len(pred)
    if n < 3:
        raise ValueError("silhouette needs at least 3 items")
    labels = list(pred)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    if len(groups) < 2:
        raise ValueError("silhouette undefined for a single cluster")

    x = np.asarray(embeddings, dtype=np.float64)
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1)
    dist = np.sqrt(np.maximum(sq, 0.0))

    scores = []
    for i, lab in enumerate(labels):
        own = groups[lab]
        if len(own) == 1:
            scores.append(0.0)
            continue
        a = float(np.mean([dist[i, j] for j in own if j != i]))
        b = min(
            float(np.mean(dist[i, members]))
            for other, members in groups.items()
            if other != lab
        )
        denom = max(a, b)
        scores.append(0.0 if denom == 0.0 else (b - a) / denom)
    return float(np.mean(scores))


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def corpus_bleu(
    references: Sequence[Sequence[str]], hypotheses: Sequence[Sequence[str]]
) -> float:
    """Corpus-level BLEU on a 0-100 scale.

    Standard 4-gram formulation: geometric mean of modified n-gram
    precisions with uniform weights, times the brevity penalty computed on
    corpus totals. One reference per hypothesis, no smoothing; a zero
    precision at any order yields 0.
    """
    if len(references) != len(hypotheses):
        raise ValueError(
            f"reference/hypothesis count mismatch: {len(references)} vs {len(hypotheses)}"
        )
    if not references:
        raise ValueError("empty corpus")

    clipped = [0] * 4
    totals = [0] * 4
    ref_len = 0
    hyp_len = 0
    for ref, hyp in zip(references, hypotheses):
        ref_len += len(ref)
        hyp_len += len(hyp)
        for k in range(1, 5):
            hyp_counts = _ngram_counts(hyp, k)
            if not hyp_counts:
                continue
            ref_counts = _ngram_counts(ref, k)
            totals[k - 1] += sum(hyp_counts.values())
            clipped[k - 1] += sum(
                min(c, ref_counts[g]) for g, c in hyp_counts.items()
            )

    if hyp_len == 0:
        return 0.0
    precisions = [c / t if t else 0.0 for c, t in zip(clipped, totals)]
    if any(p == 0.0 for p in precisions):
        return 0.0
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(
        math.fsum(0.25 * math.log(p) for p in precisions)
    )
