"""Contextual encoder backends for the boundary tagger.

A backend turns word sequences into per-subword hidden states bracketed by a
leading classification vector and a trailing separator vector, and exposes
the subword-to-word alignment. Two backends ship here:

    - HashEncoder: a deterministic, dependency-free featurizer. Vectors are
      derived from content hashes mixed with neighboring-word and whole-
      utterance components, so identical spans in different contexts get
      different encodings. It has no trainable weights; the tagger's
      projection is trained on top of it. Intended for tests, CI, and
      synthetic pipelines.
    - TransformersEncoder: wraps a HuggingFace masked-LM encoder (e.g. an
      uncased 12-layer base model) for full-scale runs; trainable end to end.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

DEFAULT_MAX_SEQUENCE_LENGTH = 128


@dataclass
class EncodedBatch:
    """Encoder output for a batch of word sequences.

    hidden: float tensor [batch, positions, hidden_size]
    word_ids: per position, the source word index or None for the leading
        classification / trailing separator / padding positions
    attention_mask: 1 for real positions (specials included), 0 for padding
    """

    hidden: torch.Tensor
    word_ids: list[list[int | None]]
    attention_mask: torch.Tensor


class EncoderBackend:
    """Interface shared by all encoder backends."""

    name: str
    hidden_size: int
    max_sequence_length: int
    trainable: bool = False

    def encode(self, batch_words: list[list[str]]) -> EncodedBatch:
        raise NotImplementedError

    def parameters(self):
        return iter(())

    def train_mode(self, training: bool) -> None:
        pass

    def save(self, directory: str | Path) -> None:
        raise NotImplementedError


def _hash_seed(salt: int, key: str) -> int:
    digest = hashlib.sha256(f"{salt}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class HashEncoder(EncoderBackend):
    """Deterministic pseudo-contextual encoder.

    Words split into fixed-width character pieces; each position's vector is
    the piece's hash vector mixed with the neighboring words' and the whole
    utterance's hash vectors, then unit-normalized. Fully reproducible
    across processes for a given salt.
    """

    trainable = False

    def __init__(
        self,
        hidden_size: int = 64,
        salt: int = 0,
        piece_width: int = 4,
        max_sequence_length: int = DEFAULT_MAX_SEQUENCE_LENGTH,
    ):
        self.hidden_size = hidden_size
        self.salt = salt
        self.piece_width = piece_width
        self.max_sequence_length = max_sequence_length
        self.name = f"hash-{hidden_size}"
        self._cache: dict[str, np.ndarray] = {}

    def _vec(self, key: str) -> np.ndarray:
        vec = self._cache.get(key)
        if vec is None:
            rng = np.random.default_rng(_hash_seed(self.salt, key))
            vec = rng.standard_normal(self.hidden_size)
            vec /= np.linalg.norm(vec)
            self._cache[key] = vec
        return vec

    def subword_split(self, word: str) -> list[str]:
        w = word.lower()
        if not w:
            return [""]
        return [w[i : i + self.piece_width] for i in range(0, len(w), self.piece_width)]

    def _encode_words(self, words: list[str]) -> tuple[np.ndarray, list[int | None]]:
        word_vecs = [self._vec(f"w|{w.lower()}") for w in words]
        utt_vec = (
            np.mean(word_vecs, axis=0)
            if word_vecs
            else self._vec("w|<empty>")
        )
        rows: list[np.ndarray] = []
        word_ids: list[int | None] = []

        cls = self._vec("s|<cls>") + 0.5 * utt_vec
        rows.append(cls / np.linalg.norm(cls))
        word_ids.append(None)

        for i, word in enumerate(words):
            prev_vec = word_vecs[i - 1] if i > 0 else self._vec("s|<bos>")
            next_vec = (
                word_vecs[i + 1] if i + 1 < len(words) else self._vec("s|<eos>")
            )
            ctx = 0.5 * prev_vec + 0.5 * next_vec + 0.25 * utt_vec
            for j, piece in enumerate(self.subword_split(word)):
                h = self._vec(f"p|{piece}|{j}") + ctx
                rows.append(h / np.linalg.norm(h))
                word_ids.append(i)

        rows.append(self._vec("s|<sep>"))
        word_ids.append(None)
        return np.stack(rows), word_ids

    def encode(self, batch_words: list[list[str]]) -> EncodedBatch:
        encoded = [self._encode_words(words) for words in batch_words]
        max_len = max(mat.shape[0] for mat, _ in encoded)
        batch = np.zeros((len(encoded), max_len, self.hidden_size), dtype=np.float32)
        mask = np.zeros((len(encoded), max_len), dtype=np.int64)
        word_ids: list[list[int | None]] = []
        for b, (mat, ids) in enumerate(encoded):
            batch[b, : mat.shape[0]] = mat
            mask[b, : mat.shape[0]] = 1
            word_ids.append(ids + [None] * (max_len - len(ids)))
        return EncodedBatch(
            hidden=torch.from_numpy(batch),
            word_ids=word_ids,
            attention_mask=torch.from_numpy(mask),
        )

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        config = {
            "type": "hash",
            "hidden_size": self.hidden_size,
            "salt": self.salt,
            "piece_width": self.piece_width,
            "max_sequence_length": self.max_sequence_length,
        }
        (directory / "encoder.json").write_text(json.dumps(config, indent=2))

    @classmethod
    def load(cls, directory: str | Path) -> "HashEncoder":
        config = json.loads((Path(directory) / "encoder.json").read_text())
        return cls(
            hidden_size=config["hidden_size"],
            salt=config["salt"],
            piece_width=config["piece_width"],
            max_sequence_length=config["max_sequence_length"],
        )


class TransformersEncoder(EncoderBackend):
    """HuggingFace encoder wrapper; requires the optional ``hf`` extra."""

    trainable = True

    def __init__(
        self,
        model_name: str,
        max_sequence_length: int = DEFAULT_MAX_SEQUENCE_LENGTH,
        subword_limit: int = 512,
    ):
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ImportError(
                "transformers is required for pretrained encoders; "
                "install with: pip install dialstruct[hf]"
            ) from exc
        self.name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.hidden_size = self.model.config.hidden_size
        self.max_sequence_length = max_sequence_length
        self.subword_limit = subword_limit

    def encode(self, batch_words: list[list[str]]) -> EncodedBatch:
        enc = self.tokenizer(
            batch_words,
            is_split_into_words=True,
            padding=True,
            truncation=True,
            max_length=self.subword_limit,
            return_tensors="pt",
        )
        out = self.model(**enc)
        word_ids = [enc.word_ids(batch_index=b) for b in range(len(batch_words))]
        return EncodedBatch(
            hidden=out.last_hidden_state,
            word_ids=word_ids,
            attention_mask=enc["attention_mask"],
        )

    def parameters(self):
        return self.model.parameters()

    def train_mode(self, training: bool) -> None:
        self.model.train(training)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "encoder.json").write_text(
            json.dumps({"type": "transformers", "model_name": self.name}, indent=2)
        )
        self.model.save_pretrained(directory / "weights")
        self.tokenizer.save_pretrained(directory / "weights")


def make_encoder(
    name: str,
    hidden_size: int = 64,
    salt: int = 0,
    max_sequence_length: int = DEFAULT_MAX_SEQUENCE_LENGTH,
) -> EncoderBackend:
    """Build a backend from a config string.

    "hash" (optionally "hash-<dim>") selects the deterministic featurizer;
    anything else is treated as a HuggingFace model name.
    """
    if name == "hash" or name.startswith("hash-"):
        if name.startswith("hash-"):
            hidden_size = int(name.split("-", 1)[1])
        return HashEncoder(
            hidden_size=hidden_size,
            salt=salt,
            max_sequence_length=max_sequence_length,
        )
    return TransformersEncoder(name, max_sequence_length=max_sequence_length)


def load_encoder(directory: str | Path) -> EncoderBackend:
    config = json.loads((Path(directory) / "encoder.json").read_text())
    if config["type"] == "hash":
        return HashEncoder.load(directory)
    if config["type"] == "transformers":
        enc = TransformersEncoder.__new__(TransformersEncoder)
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ImportError(
                "transformers is required to load this checkpoint"
            ) from exc
        weights = Path(directory) / "weights"
        enc.name = config["model_name"]
        enc.tokenizer = AutoTokenizer.from_pretrained(weights)
        enc.model = AutoModel.from_pretrained(weights)
        enc.hidden_size = enc.model.config.hidden_size
        enc.max_sequence_length = DEFAULT_MAX_SEQUENCE_LENGTH
        enc.subword_limit = 512
        return enc
    raise ValueError(f"unknown encoder type {config['type']!r}")
