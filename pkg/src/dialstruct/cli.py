"""dialstruct command-line interface.

Subcommands cover the pipeline stages individually plus a run-all
orchestrator. Every option can also be set in a flat ``key = value`` config
file passed via --config; an explicit command-line flag wins over the file.
Exit codes: 0 success, 2 validation/usage error, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import augment as aug
from . import report
from .baselines import read_utterance_embeddings
from .corpus import (
    CorpusParseError,
    CorpusValidationError,
    load_dialogue_corpus,
    read_bio_file,
)
from .encoders import make_encoder
from .evalmetrics import silhouette
from .pipeline import (
    PipelineConfig,
    PipelineStageError,
    evaluate_states,
    gold_slot_order,
    label_corpus,
    label_corpus_gold,
    run_pipeline,
    sweep_slots,
)
from .sbd import (
    TaggerModel,
    TrainConfig,
    predict_corpus_spans,
    read_span_predictions,
    train_tagger,
    write_span_predictions,
)
from .slotcluster import cluster_spans, read_grouping, write_grouping
from .statetrack import (
    label_states_gold,
    read_labeled_states,
    states_to_assignment,
    write_labeled_states,
)
from .structure import build_graph, export_graph


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key = value file; blank lines and # comments ignored."""
    config: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = stripped.split("=", 1)
            config[key.strip()] = value.strip()
    return config


class Settings:
    """Resolve option values: CLI flag, then config file, then default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = (
            parse_config_file(args.config) if getattr(args, "config", None) else {}
        )

    def get(self, key: str, default=None, cast=str, required: bool = False):
        cli_value = getattr(self.args, key.replace("-", "_"), None)
        if cli_value is not None:
            return cli_value
        if key in self.config:
            raw = self.config[key]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return cast(raw)
        if required and default is None:
            raise ValueError(f"missing required option --{key} (or config key {key})")
        return default


def _out_dir(settings: Settings) -> Path:
    out = Path(settings.get("out-dir", required=True))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_n_range(text: str) -> list[int]:
    """"2:6" (inclusive) or "2,4,6"."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_sbd_train(settings: Settings) -> int:
    out = _out_dir(settings)
    train = read_bio_file(settings.get("train-bio", required=True))
    valid_path = settings.get("valid-bio")
    valid = read_bio_file(valid_path) if valid_path else []
    seed = settings.get("seed", 0, int)
    encoder = make_encoder(
        settings.get("encoder", "hash"),
        hidden_size=settings.get("hidden-size", 64, int),
        max_sequence_length=settings.get("max-sequence-length", 128, int),
    )
    config = TrainConfig(
        encoder=encoder,
        epochs=settings.get("epochs", 5, int),
        learning_rate=settings.get("learning-rate", 5e-5, float),
        dropout=settings.get("dropout", 0.1, float),
        batch_size=settings.get("batch-size", 32, int),
        seed=seed,
    )
    model = train_tagger([u for _, _, u in train], [u for _, _, u in valid], config)
    model.save(out / "checkpoint")
    print(f"checkpoint written to {out / 'checkpoint'}")
    return 0


def cmd_sbd_predict(settings: Settings) -> int:
    out = _out_dir(settings)
    model = TaggerModel.load(settings.get("checkpoint", required=True))
    corpus = load_dialogue_corpus(
        settings.get("corpus", required=True), settings.get("domain")
    )
    spans = predict_corpus_spans(model, corpus)
    write_span_predictions(spans, out / "spans.jsonl", out / "spans.spem")
    print(f"{len(spans)} spans written to {out / 'spans.jsonl'}")
    return 0


def cmd_cluster(settings: Settings) -> int:
    out = _out_dir(settings)
    spans = read_span_predictions(
        settings.get("spans-jsonl", required=True),
        settings.get("spans-matrix", required=True),
    )
    grouping = cluster_spans(
        spans,
        settings.get("n-groups", required=True, cast=int),
        settings.get("algorithm", "kmeans"),
        settings.get("seed", 0, int),
    )
    write_grouping(grouping, out / "grouping.json")
    print(f"grouping written to {out / 'grouping.json'}")
    return 0


def cmd_label_states(settings: Settings) -> int:
    out = _out_dir(settings)
    corpus = load_dialogue_corpus(
        settings.get("corpus", required=True), settings.get("domain")
    )
    mode = settings.get("states", "predicted")
    if mode == "gold":
        order_arg = settings.get("slot-order")
        order = (
            [s.strip() for s in order_arg.split(",")]
            if order_arg
            else gold_slot_order(corpus)
        )
        labeled = [label_states_gold(d, order) for d in corpus]
        path = out / "gold_states.jsonl"
    elif mode == "predicted":
        spans = read_span_predictions(
            settings.get("spans-jsonl", required=True),
            settings.get("spans-matrix", required=True),
        )
        grouping = read_grouping(settings.get("grouping", required=True))
        labeled = label_corpus(corpus, spans, grouping)
        path = out / "states.jsonl"
    else:
        raise ValueError(f"--states must be 'predicted' or 'gold', got {mode!r}")
    write_labeled_states(labeled, path)
    print(f"states written to {path}")
    return 0


def cmd_graph(settings: Settings) -> int:
    out = _out_dir(settings)
    labeled = read_labeled_states(settings.get("states", required=True))
    graph = build_graph(labeled)
    export_graph(graph, "json", out / "graph.json")
    export_graph(graph, "dot", out / "graph.dot")
    report.render_graph_figure(graph, out / "graph.png")
    print(
        f"graph with {len(graph.nodes)} nodes / {len(graph.edges)} edges "
        f"written to {out}"
    )
    return 0


def cmd_evaluate(settings: Settings) -> int:
    out = _out_dir(settings)
    predicted = read_labeled_states(settings.get("pred-states", required=True))
    gold = read_labeled_states(settings.get("gold-states", required=True))
    result = evaluate_states(predicted, gold)
    emb_jsonl = settings.get("embeddings-jsonl")
    emb_matrix = settings.get("embeddings-matrix")
    if emb_jsonl and emb_matrix:
        embeddings = read_utterance_embeddings(emb_jsonl, emb_matrix)
        vectors = [e.vector for e in embeddings]
        result["sc"] = silhouette(vectors, states_to_assignment(predicted))
    path = out / "report.json"
    path.write_text(json.dumps(result, indent=2))
    print(json.dumps(result, indent=2))
    return 0


def cmd_augment(settings: Settings) -> int:
    out = _out_dir(settings)
    corpus = load_dialogue_corpus(
        settings.get("corpus", required=True), settings.get("domain")
    )
    mode = settings.get("states", "gold")
    if mode == "gold":
        labeled = label_corpus_gold(corpus)
    elif mode == "predicted":
        labeled = read_labeled_states(settings.get("states-file", required=True))
    else:
        raise ValueError(f"--states must be 'predicted' or 'gold', got {mode!r}")
    turns = aug.collect_turn_examples(corpus, labeled)
    method = settings.get("method", "mrda")
    r_train = settings.get("r-train", 1.0, float)
    r_aug = settings.get("r-aug", 1.0, float)
    seed = settings.get("seed", 0, int)
    if method == "mrda":
        used = aug.subsample_turns(turns, r_train, seed)
        dictionary = aug.build_dictionary(used)
        examples = aug.mrda_emit(turns, dictionary, r_train, r_aug, seed)
    elif method == "mfs":
        if mode != "gold":
            raise ValueError("the mfs method requires --states gold")
        used = aug.subsample_turns(turns, r_train, seed)
        graph = build_graph(labeled)
        examples = aug.mfs_emit(used, graph, r_aug, seed)
    else:
        raise ValueError(f"--method must be 'mrda' or 'mfs', got {method!r}")
    path = out / "augmented.jsonl"
    aug.write_examples(examples, path)
    print(f"{len(examples)} examples written to {path}")
    return 0


def cmd_sweep_slots(settings: Settings) -> int:
    out = _out_dir(settings)
    corpus = load_dialogue_corpus(
        settings.get("corpus", required=True), settings.get("domain")
    )
    spans = read_span_predictions(
        settings.get("spans-jsonl", required=True),
        settings.get("spans-matrix", required=True),
    )
    gold_path = settings.get("gold-states")
    gold = read_labeled_states(gold_path) if gold_path else label_corpus_gold(corpus)
    n_values = _parse_n_range(settings.get("n-range", required=True))
    rows = sweep_slots(
        corpus,
        spans,
        gold,
        n_values,
        settings.get("algorithm", "kmeans"),
        settings.get("seed", 0, int),
    )
    csv_path = out / "sweep.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "ari", "ami"])
        for n, ari, ami, error in rows:
            if error is None:
                writer.writerow([n, f"{ari:.6f}", f"{ami:.6f}"])
            else:
                writer.writerow([n, "error", "error"])
    true_n = settings.get("true-n", None, int)
    report.render_sweep_figure(
        [(n, ari, ami) for n, ari, ami, _ in rows], out / "sweep.png", true_n=true_n
    )
    print(f"sweep written to {csv_path}")
    return 0


def cmd_run_all(settings: Settings) -> int:
    config = PipelineConfig(
        corpus_path=settings.get("corpus", required=True),
        test_domain=settings.get("test-domain", required=True),
        out_dir=settings.get("out-dir", required=True),
        encoder=settings.get("encoder", "hash"),
        hidden_size=settings.get("hidden-size", 64, int),
        n_slots=settings.get("n-slots", 3, int),
        algorithm=settings.get("algorithm", "kmeans"),
        seed=settings.get("seed", 0, int),
        epochs=settings.get("epochs", 5, int),
        learning_rate=settings.get("learning-rate", 5e-5, float),
        dropout=settings.get("dropout", 0.1, float),
        batch_size=settings.get("batch-size", 32, int),
        include_system_bio=settings.get("include-system-bio", False, bool),
    )
    out = run_pipeline(config)
    result = json.loads((out / "report.json").read_text())
    print(json.dumps(result, indent=2))
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="stage seed (default 0)")
    parser.add_argument("--out-dir", help="directory for artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialstruct",
        description="Dialogue structure extraction and augmentation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sbd-train", help="train the slot boundary tagger")
    _add_common(p)
    p.add_argument("--train-bio")
    p.add_argument("--valid-bio")
    p.add_argument("--encoder")
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--max-sequence-length", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", type=int)
    p.set_defaults(handler=cmd_sbd_train)

    p = sub.add_parser("sbd-predict", help="detect and embed slot spans")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--domain")
    p.set_defaults(handler=cmd_sbd_predict)

    p = sub.add_parser("cluster", help="cluster span embeddings into slot groups")
    _add_common(p)
    p.add_argument("--spans-jsonl")
    p.add_argument("--spans-matrix")
    p.add_argument("--n-groups", type=int)
    p.add_argument("--algorithm", choices=["kmeans", "birch", "agglomerative"])
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser("label-states", help="label turns with state vectors")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--domain")
    p.add_argument("--states", choices=["predicted", "gold"])
    p.add_argument("--spans-jsonl")
    p.add_argument("--spans-matrix")
    p.add_argument("--grouping")
    p.add_argument("--slot-order")
    p.set_defaults(handler=cmd_label_states)

    p = sub.add_parser("graph", help="build and export the transition graph")
    _add_common(p)
    p.add_argument("--states")
    p.set_defaults(handler=cmd_graph)

    p = sub.add_parser("evaluate", help="score predicted states against gold")
    _add_common(p)
    p.add_argument("--pred-states")
    p.add_argument("--gold-states")
    p.add_argument("--embeddings-jsonl")
    p.add_argument("--embeddings-matrix")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("augment", help="emit augmented training examples")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--domain")
    p.add_argument("--states", choices=["predicted", "gold"])
    p.add_argument("--states-file")
    p.add_argument("--method", choices=["mrda", "mfs"])
    p.add_argument("--r-train", type=float)
    p.add_argument("--r-aug", type=float)
    p.set_defaults(handler=cmd_augment)

    p = sub.add_parser("sweep-slots", help="sweep the assumed slot count")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--domain")
    p.add_argument("--spans-jsonl")
    p.add_argument("--spans-matrix")
    p.add_argument("--gold-states")
    p.add_argument("--n-range")
    p.add_argument("--true-n", type=int)
    p.add_argument("--algorithm", choices=["kmeans", "birch", "agglomerative"])
    p.set_defaults(handler=cmd_sweep_slots)

    p = sub.add_parser("run-all", help="run the full extraction pipeline")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--test-domain")
    p.add_argument("--encoder")
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--n-slots", type=int)
    p.add_argument("--algorithm", choices=["kmeans", "birch", "agglomerative"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument(
        "--include-system-bio",
        action="store_const",
        const=True,
        help="also feed system utterances (as all-O) to tagger training",
    )
    p.set_defaults(handler=cmd_run_all)

    return parser


_VALIDATION_ERRORS = (
    CorpusParseError,
    CorpusValidationError,
    ValueError,
    FileNotFoundError,
    NotADirectoryError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args)
        return args.handler(settings)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.cause, _VALIDATION_ERRORS) else 1
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
