"""End-to-end pipeline orchestration with reproducible per-stage seeds.

A run directory accumulates every stage artifact plus a manifest recording
input hashes, the config, and the derived stage seeds, so a rerun from the
same manifest reproduces the same artifacts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, asdict
from pathlib import Path

from . import report
from .corpus import (
    Dialogue,
    corpus_to_bio,
    load_dialogue_corpus,
    make_split,
    write_bio_file,
)
from .encoders import make_encoder
from .evalmetrics import adjusted_mutual_info, adjusted_rand_index
from .sbd import (
    SpanPrediction,
    TaggerModel,
    TrainConfig,
    predict_corpus_spans,
    predict_labels,
    score_f1,
    train_tagger,
    write_span_predictions,
)
from .slotcluster import cluster_spans, write_grouping
from .statetrack import (
    LabeledDialogue,
    distinct_states,
    label_states,
    label_states_gold,
    states_to_assignment,
    write_labeled_states,
)
from .structure import build_graph, export_graph

logger = logging.getLogger(__name__)


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    corpus_path: str
    test_domain: str
    out_dir: str
    encoder: str = "hash"
    hidden_size: int = 64
    n_slots: int = 3
    algorithm: str = "kmeans"
    seed: int = 0
    epochs: int = 5
    learning_rate: float = 5e-5
    dropout: float = 0.1
    batch_size: int = 32
    include_system_bio: bool = False


def stage_seed(global_seed: int, stage: str) -> int:
    """Fan a single global seed out to independent per-stage seeds."""
    digest = hashlib.sha256(f"{global_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def spans_by_turn_map(
    spans: list[SpanPrediction],
) -> dict[str, dict[int, list[tuple]]]:
    out: dict[str, dict[int, list[tuple]]] = {}
    for s in spans:
        out.setdefault(s.dialogue_id, {}).setdefault(s.turn_index, []).append(s.key())
    return out


def label_corpus(
    dialogues: list[Dialogue], spans: list[SpanPrediction], grouping
) -> list[LabeledDialogue]:
    by_dialogue = spans_by_turn_map(spans)
    return [
        label_states(d, by_dialogue.get(d.dialogue_id, {}), grouping)
        for d in dialogues
    ]


def gold_slot_order(dialogues: list[Dialogue]) -> list[str]:
    names = {
        slot.name for d in dialogues for turn in d.turns for slot in turn.gold_slots
    }
    return sorted(names)


def label_corpus_gold(dialogues: list[Dialogue]) -> list[LabeledDialogue]:
    order = gold_slot_order(dialogues)
    return [label_states_gold(d, order) for d in dialogues]


def evaluate_states(
    predicted: list[LabeledDialogue], gold: list[LabeledDialogue]
) -> dict:
    if [p.dialogue_id for p in predicted] != [g.dialogue_id for g in gold]:
        raise ValueError("predicted/gold dialogue alignment mismatch")
    pred_assign = states_to_assignment(predicted)
    gold_assign = states_to_assignment(gold)
    return {
        "ari": adjusted_rand_index(gold_assign, pred_assign),
        "ami": adjusted_mutual_info(gold_assign, pred_assign),
        "sc": None,
        "n": len(pred_assign),
    }


def run_pipeline(config: PipelineConfig) -> Path:
    """sbd-train -> sbd-predict -> cluster -> label-states -> graph -> evaluate.

    Artifacts land in config.out_dir; a stage failure aborts with the stage
    name while earlier artifacts stay on disk.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = {
        name: stage_seed(config.seed, name)
        for name in ("split", "bio", "train", "cluster")
    }
    artifacts: list[Path] = []

    def run_stage(name: str, fn):
        try:
            return fn()
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc

    def corpus_stage():
        corpus = load_dialogue_corpus(config.corpus_path)
        split = make_split(corpus, config.test_domain, seeds["split"])
        train_dialogues = [d for d in corpus if d.domain in split.train_domains]
        target_dialogues = [d for d in corpus if d.domain == config.test_domain]
        return train_dialogues, target_dialogues

    train_dialogues, target_dialogues = run_stage("split", corpus_stage)

    def bio_stage():
        entries = corpus_to_bio(
            train_dialogues, include_system=config.include_system_bio
        )
        order = list(range(len(entries)))
        random.Random(seeds["bio"]).shuffle(order)
        n_valid = max(1, len(order) // 10)
        valid = [entries[i] for i in order[:n_valid]]
        train = [entries[i] for i in order[n_valid:]]
        write_bio_file(train, out / "train.bio")
        write_bio_file(valid, out / "valid.bio")
        artifacts.extend([out / "train.bio", out / "valid.bio"])
        return train, valid

    train_bio, valid_bio = run_stage("bio", bio_stage)

    def train_stage():
        encoder = make_encoder(config.encoder, hidden_size=config.hidden_size)
        model = train_tagger(
            [u for _, _, u in train_bio],
            [u for _, _, u in valid_bio],
            TrainConfig(
                encoder=encoder,
                epochs=config.epochs,
                learning_rate=config.learning_rate,
                dropout=config.dropout,
                batch_size=config.batch_size,
                seed=seeds["train"],
            ),
        )
        model.save(out / "checkpoint")
        return model

    model = run_stage("train", train_stage)

    def predict_stage():
        spans = predict_corpus_spans(model, target_dialogues)
        write_span_predictions(spans, out / "spans.jsonl", out / "spans.spem")
        artifacts.extend([out / "spans.jsonl", out / "spans.spem"])
        return spans

    spans = run_stage("predict", predict_stage)

    def cluster_stage():
        grouping = cluster_spans(
            spans, config.n_slots, config.algorithm, seeds["cluster"]
        )
        write_grouping(grouping, out / "grouping.json")
        artifacts.append(out / "grouping.json")
        return grouping

    grouping = run_stage("cluster", cluster_stage)

    def label_stage():
        labeled = label_corpus(target_dialogues, spans, grouping)
        write_labeled_states(labeled, out / "states.jsonl")
        gold = label_corpus_gold(target_dialogues)
        write_labeled_states(gold, out / "gold_states.jsonl")
        artifacts.extend([out / "states.jsonl", out / "gold_states.jsonl"])
        return labeled, gold

    labeled, gold = run_stage("label", label_stage)

    def graph_stage():
        graph = build_graph(labeled)
        export_graph(graph, "json", out / "graph.json")
        export_graph(graph, "dot", out / "graph.dot")
        report.render_graph_figure(graph, out / "graph.png")
        artifacts.extend([out / "graph.json", out / "graph.dot", out / "graph.png"])
        return graph

    run_stage("graph", graph_stage)

    def evaluate_stage():
        metrics = evaluate_states(labeled, gold)
        gold_bio = corpus_to_bio(target_dialogues)
        predicted_labels = [
            predict_labels(model, utt.tokens) for _, _, utt in gold_bio
        ]
        f1_slot, f1_token = score_f1([u for _, _, u in gold_bio], predicted_labels)
        metrics.update(
            {
                "f1_slot": f1_slot,
                "f1_token": f1_token,
                "n_states_predicted": len(distinct_states(labeled)),
                "n_states_gold": len(distinct_states(gold)),
            }
        )
        (out / "report.json").write_text(json.dumps(metrics, indent=2))
        artifacts.append(out / "report.json")
        return metrics

    metrics = run_stage("evaluate", evaluate_stage)
    logger.info("pipeline metrics: %s", metrics)

    manifest = {
        "config": asdict(config),
        "inputs": {config.corpus_path: file_sha256(config.corpus_path)},
        "stage_seeds": seeds,
        "artifacts": {
            str(p.relative_to(out)): file_sha256(p) for p in artifacts if p.exists()
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


def sweep_slots(
    target_dialogues: list[Dialogue],
    spans: list[SpanPrediction],
    gold: list[LabeledDialogue],
    n_values: list[int],
    algorithm: str,
    seed: int,
) -> list[tuple[int, float | None, float | None, str | None]]:
    """Cluster/label/evaluate once per candidate slot count.

    A failing slot count (e.g. more groups than spans) yields an error row;
    the sweep continues.
    """
    if not n_values:
        raise ValueError("empty sweep range")
    gold_assign = states_to_assignment(gold)
    rows: list[tuple[int, float | None, float | None, str | None]] = []
    for n in n_values:
        try:
            grouping = cluster_spans(spans, n, algorithm, seed)
            labeled = label_corpus(target_dialogues, spans, grouping)
            pred_assign = states_to_assignment(labeled)
            rows.append(
                (
                    n,
                    adjusted_rand_index(gold_assign, pred_assign),
                    adjusted_mutual_info(gold_assign, pred_assign),
                    None,
                )
            )
        except ValueError as exc:
            logger.warning("sweep point n=%d failed: %s", n, exc)
            rows.append((n, None, None, str(exc)))
    return rows


def load_tagger(checkpoint_dir: str | Path) -> TaggerModel:
    return TaggerModel.load(checkpoint_dir)
