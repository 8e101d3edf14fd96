"""Reference structure extractors: random states, whole-utterance clustering,
and the heuristic noun-span detector.

The noun detector is pluggable. The built-in lexicon backend marks every
content word not in a closed-class/common-verb stoplist as a noun, which is
deliberately permissive; a spaCy-backed alternative is available when spaCy
and an English model are installed.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .corpus import Dialogue, Turn, tokenize
from .encoders import EncoderBackend
from .matrixio import read_matrix, write_matrix
from .sbd import TaggerModel, extract_spans, predict_labels
from .slotcluster import fit_labels

logger = logging.getLogger(__name__)


@dataclass
class UtteranceEmbedding:
    dialogue_id: str
    turn: int
    vector: np.ndarray
    source: str  # "cls" or "mean_slot_words"


def random_states(corpus: list[Dialogue], n_states: int, seed: int) -> list[int]:
    """Uniform state labels in [1, n_states], one per turn."""
    if n_states < 1:
        raise ValueError("n_states must be at least 1")
    rng = random.Random(seed)
    return [
        rng.randint(1, n_states) for d in corpus for _ in d.turns
    ]


def _exchange_words(turn: Turn, text_mode: str) -> list[str]:
    if text_mode == "user":
        return ["[usr]", *turn.user_tokens]
    if text_mode == "pair":
        return ["[usr]", *turn.user_tokens, "[sys]", *tokenize(turn.system_text)]
    raise ValueError(f"unknown text mode {text_mode!r}")


def cls_utterance_embeddings(
    corpus: list[Dialogue], encoder: EncoderBackend, text_mode: str = "pair"
) -> list[UtteranceEmbedding]:
    """Encode each exchange and keep the leading classification vector."""
    out = []
    encoder.train_mode(False)
    for dialogue in corpus:
        for turn in dialogue.turns:
            with torch.no_grad():
                batch = encoder.encode([_exchange_words(turn, text_mode)])
            out.append(
                UtteranceEmbedding(
                    dialogue_id=dialogue.dialogue_id,
                    turn=turn.index,
                    vector=batch.hidden[0, 0].numpy().astype(np.float32),
                    source="cls",
                )
            )
    return out


def cluster_utterances(
    embeddings: list[UtteranceEmbedding],
    n_clusters: int,
    algorithm: str = "kmeans",
    seed: int = 0,
) -> list[int]:
    """One cluster label per turn, in the embeddings' order."""
    if n_clusters > len(embeddings):
        raise ValueError(
            f"cannot form {n_clusters} clusters from {len(embeddings)} utterances"
        )
    matrix = np.stack([e.vector for e in embeddings]).astype(np.float64)
    labels = fit_labels(matrix, n_clusters, algorithm, seed)
    return [int(x) for x in labels]


# -- part-of-speech backends -------------------------------------------------

_STOPLIST = frozenset(
    """
    a an the this that these those some any no every each either neither such
    another other both all more most few little lot
    i you he she it we they me him her us them my your his its our their
    mine yours myself yourself one's somebody someone anything something
    nothing everything anyone everyone
    in on at to from of for with about by after before between near around
    over under during within without into onto off up down out through
    and or but so because if when while although though than as nor
    am is are was were be been being do does did done doing have has had
    having will would can could shall should may might must wo ca
    what where which who whom whose why how whatever wherever
    not now then there here please yes yeah okay ok hi hello thanks thank
    goodbye bye just also very too really quite only even still again soon
    away back maybe perhaps actually sure great good fine nice sorry
    want wants wanted like likes liked need needs needed find finds found
    look looks looking looked book books booked reserve help helps helped
    go goes going went get gets getting got make makes made try tries tried
    leave leaves leaving left arrive arrives arriving arrived depart departs
    departing departed give gives tell tells know knows see sees stay stays
    call calls visit visits prefer prefers recommend recommends let lets
    come comes came say says said think thinks thought
    """.split()
)

_CONTRACTION_HEADS = frozenset(
    "i you he she it we they that this what there who let don can won isn"
    " aren didn doesn haven hasn couldn wouldn shouldn wasn weren".split()
)


class LexiconPOSBackend:
    """Stoplist-based noun detector; no external model required."""

    name = "lexicon"

    def noun_indices(self, tokens: list[str]) -> list[int]:
        out = []
        for i, token in enumerate(tokens):
            word = token.lower()
            if not any(ch.isalpha() for ch in word):
                continue
            if "'" in word and word.split("'", 1)[0] in _CONTRACTION_HEADS:
                continue
            if word in _STOPLIST:
                continue
            out.append(i)
        return out


class SpacyPOSBackend:
    """spaCy-based noun detector (NOUN and PROPN tags)."""

    name = "spacy"

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy
        except ImportError as exc:
            raise RuntimeError(
                "spaCy is not installed; install spacy and the "
                f"{model} model, or use the lexicon backend"
            ) from exc
        try:
            self._nlp = spacy.load(model)
        except OSError as exc:
            raise RuntimeError(
                f"spaCy model {model!r} is not available; download it with "
                f"'python -m spacy download {model}', or use the lexicon backend"
            ) from exc

    def noun_indices(self, tokens: list[str]) -> list[int]:
        from spacy.tokens import Doc

        doc = Doc(self._nlp.vocab, words=list(tokens))
        for _, proc in self._nlp.pipeline:
            doc = proc(doc)
        return [i for i, tok in enumerate(doc) if tok.pos_ in ("NOUN", "PROPN")]


def heuristic_slot_words(turn: Turn, pos_backend) -> list[int]:
    """Indices of user-utterance words the backend tags as nouns."""
    if pos_backend is None:
        raise RuntimeError(
            "no part-of-speech backend configured; pass LexiconPOSBackend() "
            "or SpacyPOSBackend()"
        )
    return pos_backend.noun_indices(turn.user_tokens)


def mean_slot_word_embedding(
    turn: Turn,
    slot_word_indices: list[int],
    encoder: EncoderBackend,
    dialogue_id: str = "",
) -> UtteranceEmbedding:
    """Two-level average of the selected words' hidden states.

    Each word is pooled over its own subwords first, then the word means are
    averaged; words with many subwords therefore do not dominate. Turns with
    no selected words get the zero vector.
    """
    if not slot_word_indices:
        logger.warning(
            "turn %s/%d has no slot words; using zero vector",
            dialogue_id,
            turn.index,
        )
        return UtteranceEmbedding(
            dialogue_id=dialogue_id,
            turn=turn.index,
            vector=np.zeros(encoder.hidden_size, dtype=np.float32),
            source="mean_slot_words",
        )
    encoder.train_mode(False)
    with torch.no_grad():
        batch = encoder.encode([turn.user_tokens])
    hidden = batch.hidden[0].numpy()
    word_ids = batch.word_ids[0]
    word_means = []
    for i in sorted(set(slot_word_indices)):
        rows = [pos for pos, wid in enumerate(word_ids) if wid == i]
        if not rows:
            raise ValueError(f"word index {i} out of range for turn {turn.index}")
        word_means.append(hidden[rows].mean(axis=0))
    vector = np.mean(word_means, axis=0).astype(np.float32)
    return UtteranceEmbedding(
        dialogue_id=dialogue_id,
        turn=turn.index,
        vector=vector,
        source="mean_slot_words",
    )


def sbd_utterance_embeddings(
    model: TaggerModel, corpus: list[Dialogue]
) -> list[UtteranceEmbedding]:
    """Represent each turn by its tagger-detected slot words (two-level mean)."""
    out = []
    for dialogue in corpus:
        for turn in dialogue.turns:
            indices: list[int] = []
            if turn.user_tokens:
                labels = predict_labels(model, turn.user_tokens)
                for start, end in extract_spans(labels):
                    indices.extend(range(start, end + 1))
            out.append(
                mean_slot_word_embedding(
                    turn, indices, model.encoder, dialogue_id=dialogue.dialogue_id
                )
            )
    return out


def write_utterance_embeddings(
    embeddings: list[UtteranceEmbedding],
    jsonl_path: str | Path,
    matrix_path: str | Path,
) -> None:
    rows = (
        np.stack([e.vector for e in embeddings])
        if embeddings
        else np.zeros((0, 0), dtype=np.float32)
    )
    write_matrix(rows, matrix_path)
    with Path(jsonl_path).open("w", encoding="utf-8") as fh:
        for row, e in enumerate(embeddings):
            fh.write(
                json.dumps(
                    {
                        "dialogue_id": e.dialogue_id,
                        "turn": e.turn,
                        "source": e.source,
                        "emb_row": row,
                    }
                )
                + "\n"
            )


def read_utterance_embeddings(
    jsonl_path: str | Path, matrix_path: str | Path
) -> list[UtteranceEmbedding]:
    matrix = read_matrix(matrix_path)
    out = []
    with Path(jsonl_path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                UtteranceEmbedding(
                    dialogue_id=rec["dialogue_id"],
                    turn=rec["turn"],
                    vector=matrix[rec["emb_row"]],
                    source=rec["source"],
                )
            )
    return out
