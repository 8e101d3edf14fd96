"""Slot boundary detection: a 3-way token tagger over a contextual encoder.

The tagger is a linear projection of the encoder's final hidden states into
B/I/O scores (softmax-normalized). Word labels are propagated to all of a
word's subwords during training; at inference a word takes the label of its
first subword. Span extraction and F1 scoring operate on the word-level
label sequences.
"""

from __future__ import annotations

import copy
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .corpus import BIOUtterance
from .encoders import EncoderBackend, load_encoder
from .matrixio import read_matrix, write_matrix

logger = logging.getLogger(__name__)

LABELS = ("B", "I", "O")
LABEL_TO_ID = {lab: i for i, lab in enumerate(LABELS)}
_IGNORE = -100


@dataclass
class TrainConfig:
    encoder: EncoderBackend
    epochs: int = 5
    learning_rate: float = 5e-5
    dropout: float = 0.1
    batch_size: int = 32
    seed: int = 0


@dataclass
class SpanPrediction:
    """A detected slot mention with its pooled contextual embedding."""

    dialogue_id: str
    turn_index: int
    token_start: int
    token_end: int
    text: str
    embedding: np.ndarray

    def key(self) -> tuple[str, int, int, int]:
        return (self.dialogue_id, self.turn_index, self.token_start, self.token_end)


class TaggerModel:
    """Trained boundary tagger: encoder backend plus linear projection."""

    def __init__(self, encoder: EncoderBackend, seed: int = 0):
        self.encoder = encoder
        self.seed = seed
        self.projection = nn.Linear(encoder.hidden_size, len(LABELS))
        self.label_order = LABELS

    @property
    def max_words(self) -> int:
        # the sequence budget counts the two special positions
        return self.encoder.max_sequence_length - 2

    def _truncate(self, tokens: list[str]) -> list[str]:
        if len(tokens) > self.max_words:
            logger.warning(
                "utterance of %d words truncated to %d", len(tokens), self.max_words
            )
            return tokens[: self.max_words]
        return tokens

    def _encode(self, batch_tokens: list[list[str]]):
        return self.encoder.encode([self._truncate(t) for t in batch_tokens])

    def predict_probs(self, tokens: list[str]) -> list[tuple[float, float, float]]:
        """Per-word (B, I, O) probabilities from each word's first subword."""
        if not tokens:
            raise ValueError("token list must be non-empty")
        self.projection.eval()
        self.encoder.train_mode(False)
        with torch.no_grad():
            batch = self._encode([tokens])
            logits = self.projection(batch.hidden)[0]
            probs = torch.softmax(logits, dim=-1)
        word_ids = batch.word_ids[0]
        first_rows: dict[int, int] = {}
        for pos, wid in enumerate(word_ids):
            if wid is not None and wid not in first_rows:
                first_rows[wid] = pos
        out = []
        for i in range(min(len(tokens), self.max_words)):
            p = probs[first_rows[i]]
            out.append((float(p[0]), float(p[1]), float(p[2])))
        return out

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        metadata = {
            "encoder_name": self.encoder.name,
            "hidden_size": self.encoder.hidden_size,
            "max_sequence_length": self.encoder.max_sequence_length,
            "label_order": list(self.label_order),
            "seed": self.seed,
        }
        (directory / "metadata.json").write_text(json.dumps(metadata, indent=2))
        weight = self.projection.weight.detach().numpy().astype("<f4")
        bias = self.projection.bias.detach().numpy().astype("<f4")
        with (directory / "projection.bin").open("wb") as fh:
            fh.write(weight.tobytes())
            fh.write(bias.tobytes())
        self.encoder.save(directory / "encoder")

    @classmethod
    def load(cls, directory: str | Path) -> "TaggerModel":
        directory = Path(directory)
        metadata = json.loads((directory / "metadata.json").read_text())
        encoder = load_encoder(directory / "encoder")
        encoder.max_sequence_length = metadata["max_sequence_length"]
        model = cls(encoder, seed=metadata["seed"])
        hidden = metadata["hidden_size"]
        raw = (directory / "projection.bin").read_bytes()
        expected = (len(LABELS) * hidden + len(LABELS)) * 4
        if len(raw) != expected:
            raise ValueError(
                f"projection.bin has {len(raw)} bytes, expected {expected}"
            )
        flat = np.frombuffer(raw, dtype="<f4")
        weight = flat[: len(LABELS) * hidden].reshape(len(LABELS), hidden)
        bias = flat[len(LABELS) * hidden :]
        with torch.no_grad():
            model.projection.weight.copy_(torch.from_numpy(weight.copy()))
            model.projection.bias.copy_(torch.from_numpy(bias.copy()))
        return model


def _batch_targets(batch, labels_per_utt: list[list[str]]) -> torch.Tensor:
    """Propagate word labels to subword positions; specials/padding ignored."""
    targets = torch.full(batch.hidden.shape[:2], _IGNORE, dtype=torch.long)
    for b, word_ids in enumerate(batch.word_ids):
        labs = labels_per_utt[b]
        for pos, wid in enumerate(word_ids):
            if wid is not None and wid < len(labs):
                targets[b, pos] = LABEL_TO_ID[labs[wid]]
    return targets


def _epoch_loss(model: TaggerModel, utterances: list[BIOUtterance], batch_size: int) -> float:
    """Mean cross-entropy per labeled subword position, without grad."""
    loss_fn = nn.CrossEntropyLoss(ignore_index=_IGNORE, reduction="sum")
    model.projection.eval()
    model.encoder.train_mode(False)
    total, count = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(utterances), batch_size):
            chunk = utterances[i : i + batch_size]
            batch = model._encode([u.tokens for u in chunk])
            targets = _batch_targets(batch, [u.labels for u in chunk])
            logits = model.projection(batch.hidden)
            total += float(loss_fn(logits.view(-1, len(LABELS)), targets.view(-1)))
            count += int((targets != _IGNORE).sum())
    return total / max(count, 1)


def train_tagger(
    train_bio: list[BIOUtterance],
    valid_bio: list[BIOUtterance],
    config: TrainConfig,
) -> TaggerModel:
    """Train the tagger, returning the checkpoint with the lowest validation
    token-level cross-entropy. Deterministic for a given config seed."""
    if not train_bio:
        raise ValueError("training set is empty")
    torch.manual_seed(config.seed)
    model = TaggerModel(config.encoder, seed=config.seed)
    dropout = nn.Dropout(config.dropout)
    params = list(model.projection.parameters()) + list(config.encoder.parameters())
    optimizer = torch.optim.AdamW(params, lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss(ignore_index=_IGNORE)
    rng = random.Random(config.seed)

    def snapshot():
        state = {"projection": copy.deepcopy(model.projection.state_dict())}
        if config.encoder.trainable:
            state["encoder"] = copy.deepcopy(
                {k: v.cpu() for k, v in config.encoder.model.state_dict().items()}
            )
        return state

    def restore(state) -> None:
        model.projection.load_state_dict(state["projection"])
        if "encoder" in state:
            config.encoder.model.load_state_dict(state["encoder"])

    best_loss = _epoch_loss(model, valid_bio, config.batch_size) if valid_bio else float("inf")
    best_state = snapshot()
    order = list(range(len(train_bio)))
    for epoch in range(config.epochs):
        rng.shuffle(order)
        model.projection.train()
        model.encoder.train_mode(True)
        for i in range(0, len(order), config.batch_size):
            chunk = [train_bio[j] for j in order[i : i + config.batch_size]]
            batch = model._encode([u.tokens for u in chunk])
            targets = _batch_targets(batch, [u.labels for u in chunk])
            logits = model.projection(dropout(batch.hidden))
            loss = loss_fn(logits.view(-1, len(LABELS)), targets.view(-1))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        if valid_bio:
            val_loss = _epoch_loss(model, valid_bio, config.batch_size)
            logger.info("epoch %d validation loss %.6f", epoch + 1, val_loss)
            if val_loss < best_loss:
                best_loss = val_loss
                best_state = snapshot()
    if valid_bio:
        restore(best_state)
    return model


def predict_labels(model: TaggerModel, utterance_tokens: list[str]) -> list[str]:
    """One hard B/I/O label per input word; truncated tail defaults to O."""
    probs = model.predict_probs(utterance_tokens)
    labels = [LABELS[max(range(len(LABELS)), key=lambda k: p[k])] for p in probs]
    labels.extend("O" for _ in range(len(utterance_tokens) - len(labels)))
    return labels


def extract_spans(labels: list[str]) -> list[tuple[int, int]]:
    """Maximal B/I runs as inclusive (start, end) token ranges.

    A span opens at B (or at an orphan I) and extends through consecutive I;
    it closes at B, O, or the end of the sequence.
    """
    spans: list[tuple[int, int]] = []
    start: int | None = None
    for i, lab in enumerate(labels):
        if lab == "B":
            if start is not None:
                spans.append((start, i - 1))
            start = i
        elif lab == "I":
            if start is None:
                start = i
        elif lab == "O":
            if start is not None:
                spans.append((start, i - 1))
                start = None
        else:
            raise ValueError(f"invalid label {lab!r} at position {i}")
    if start is not None:
        spans.append((start, len(labels) - 1))
    return spans


def embed_spans(
    model: TaggerModel,
    utterance_tokens: list[str],
    spans: list[tuple[int, int]],
    dialogue_id: str = "",
    turn_index: int = 0,
) -> list[SpanPrediction]:
    """Pool each span into the mean of its words' subword hidden states."""
    for start, end in spans:
        if not (0 <= start <= end < len(utterance_tokens)):
            raise ValueError(f"span ({start}, {end}) invalid for utterance")
        if end >= model.max_words:
            raise ValueError(f"span ({start}, {end}) beyond encoder budget")
    model.encoder.train_mode(False)
    with torch.no_grad():
        batch = model._encode([utterance_tokens])
    hidden = batch.hidden[0].numpy()
    word_ids = batch.word_ids[0]
    out = []
    for start, end in spans:
        rows = [
            pos
            for pos, wid in enumerate(word_ids)
            if wid is not None and start <= wid <= end
        ]
        pooled = hidden[rows].mean(axis=0).astype(np.float32)
        out.append(
            SpanPrediction(
                dialogue_id=dialogue_id,
                turn_index=turn_index,
                token_start=start,
                token_end=end,
                text=" ".join(utterance_tokens[start : end + 1]),
                embedding=pooled,
            )
        )
    return out


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def score_f1(
    gold: list[BIOUtterance], predicted: list[list[str]]
) -> tuple[float, float]:
    """(span-exact micro F1, token-level micro F1) over aligned utterances.

    Span F1 counts a prediction correct only on exact (start, end) match.
    Token F1 treats membership in {B, I} as the positive class.
    """
    if len(gold) != len(predicted):
        raise ValueError(
            f"gold/predicted utterance count mismatch: {len(gold)} vs {len(predicted)}"
        )
    span_tp = span_fp = span_fn = 0
    tok_tp = tok_fp = tok_fn = 0
    for g, p in zip(gold, predicted):
        if len(g.labels) != len(p):
            raise ValueError("gold/predicted label length mismatch")
        gold_spans = set(extract_spans(g.labels))
        pred_spans = set(extract_spans(list(p)))
        span_tp += len(gold_spans & pred_spans)
        span_fp += len(pred_spans - gold_spans)
        span_fn += len(gold_spans - pred_spans)
        for gl, pl in zip(g.labels, p):
            g_pos = gl in ("B", "I")
            p_pos = pl in ("B", "I")
            if g_pos and p_pos:
                tok_tp += 1
            elif p_pos:
                tok_fp += 1
            elif g_pos:
                tok_fn += 1
    return _f1_from_counts(span_tp, span_fp, span_fn), _f1_from_counts(
        tok_tp, tok_fp, tok_fn
    )


def predict_corpus_spans(model: TaggerModel, dialogues) -> list[SpanPrediction]:
    """Detect and embed spans over every user utterance of a corpus."""
    spans: list[SpanPrediction] = []
    for dialogue in dialogues:
        for turn in dialogue.turns:
            if not turn.user_tokens:
                continue
            labels = predict_labels(model, turn.user_tokens)
            ranges = extract_spans(labels)
            if ranges:
                spans.extend(
                    embed_spans(
                        model,
                        turn.user_tokens,
                        ranges,
                        dialogue_id=dialogue.dialogue_id,
                        turn_index=turn.index,
                    )
                )
    return spans


def write_span_predictions(
    spans: list[SpanPrediction], jsonl_path: str | Path, matrix_path: str | Path
) -> None:
    """JSONL records with an ``emb_row`` pointer into the sidecar matrix."""
    rows = (
        np.stack([s.embedding for s in spans])
        if spans
        else np.zeros((0, 0), dtype=np.float32)
    )
    write_matrix(rows, matrix_path)
    with Path(jsonl_path).open("w", encoding="utf-8") as fh:
        for row, s in enumerate(spans):
            fh.write(
                json.dumps(
                    {
                        "dialogue_id": s.dialogue_id,
                        "turn": s.turn_index,
                        "start": s.token_start,
                        "end": s.token_end,
                        "text": s.text,
                        "emb_row": row,
                    }
                )
                + "\n"
            )


def read_span_predictions(
    jsonl_path: str | Path, matrix_path: str | Path
) -> list[SpanPrediction]:
    matrix = read_matrix(matrix_path)
    spans = []
    with Path(jsonl_path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            spans.append(
                SpanPrediction(
                    dialogue_id=rec["dialogue_id"],
                    turn_index=rec["turn"],
                    token_start=rec["start"],
                    token_end=rec["end"],
                    text=rec["text"],
                    embedding=matrix[rec["emb_row"]],
                )
            )
    return spans
