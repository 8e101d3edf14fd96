"""Dialogue corpus loading, validation, BIO conversion, and domain splits.

Persisted forms:
    - corpus: JSON Lines, one dialogue object per line (see ``load_dialogue_corpus``)
    - boundary-labeled utterances: CoNLL-style token<TAB>label blocks
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

KNOWN_DOMAINS = ("taxi", "restaurant", "hotel", "attraction", "train")

_TERMINAL_PUNCT = ".,!?;:"
_TOKEN_RE = re.compile(r"\S+")


class CorpusParseError(ValueError):
    """Raised when a corpus file line cannot be parsed."""


class CorpusValidationError(ValueError):
    """Raised when a parsed record violates a corpus invariant."""


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Whitespace tokenization with terminal punctuation detached.

    Returns (token, char_start, char_end) triples; apostrophes and internal
    punctuation (e.g. "08:15") are preserved inside a token.
    """
    out: list[tuple[str, int, int]] = []
    for m in _TOKEN_RE.finditer(text):
        core = m.group()
        start = m.start()
        tail: list[tuple[str, int, int]] = []
        while len(core) > 1 and core[-1] in _TERMINAL_PUNCT:
            tail.append((core[-1], start + len(core) - 1, start + len(core)))
            core = core[:-1]
        out.append((core, start, start + len(core)))
        out.extend(reversed(tail))
    return out


def tokenize(text: str) -> list[str]:
    return [tok for tok, _, _ in tokenize_with_offsets(text)]


@dataclass
class GoldSlot:
    name: str
    value: str
    char_span: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "span": list(self.char_span) if self.char_span else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GoldSlot":
        span = d.get("span")
        return cls(
            name=d["name"],
            value=d["value"],
            char_span=(span[0], span[1]) if span else None,
        )


@dataclass
class Turn:
    """One exchange: the user utterance and the system reply to it."""

    index: int
    user_text: str
    system_text: str
    user_tokens: list[str] = field(default_factory=list)
    gold_slots: list[GoldSlot] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.user_tokens:
            self.user_tokens = tokenize(self.user_text)

    def token_offsets(self) -> list[tuple[str, int, int]]:
        return tokenize_with_offsets(self.user_text)


@dataclass
class Dialogue:
    dialogue_id: str
    domain: str
    turns: list[Turn]
    gold_state_sequence: list[tuple[int, ...]] | None = None

    def validate(self) -> None:
        for i, turn in enumerate(self.turns):
            if turn.index != i:
                raise CorpusValidationError(
                    f"{self.dialogue_id}: turn indices not consecutive at {i}"
                )
            spans = sorted(
                s.char_span for s in turn.gold_slots if s.char_span is not None
            )
            for span in spans:
                if not (0 <= span[0] < span[1] <= len(turn.user_text)):
                    raise CorpusValidationError(
                        f"{self.dialogue_id}: turn {i} span {span} outside utterance"
                    )
            for prev, cur in zip(spans, spans[1:]):
                if cur[0] < prev[1]:
                    raise CorpusValidationError(
                        f"{self.dialogue_id}: turn {i} has overlapping gold spans"
                    )
        if self.gold_state_sequence is not None and len(
            self.gold_state_sequence
        ) != len(self.turns):
            raise CorpusValidationError(
                f"{self.dialogue_id}: gold state sequence length mismatch"
            )


@dataclass
class BIOUtterance:
    tokens: list[str]
    labels: list[str]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.labels):
            raise CorpusValidationError(
                f"{len(self.tokens)} tokens but {len(self.labels)} labels"
            )
        bad = set(self.labels) - {"B", "I", "O"}
        if bad:
            raise CorpusValidationError(f"labels outside B/I/O: {sorted(bad)}")


@dataclass
class DomainSplit:
    train_domains: set[str]
    test_domain: str
    train: list[Dialogue]
    valid: list[Dialogue]
    test: list[Dialogue]


def _dialogue_from_dict(record: dict) -> Dialogue:
    turns = []
    for i, t in enumerate(record.get("turns", [])):
        turns.append(
            Turn(
                index=i,
                user_text=t.get("user", ""),
                system_text=t.get("system", ""),
                gold_slots=[GoldSlot.from_dict(s) for s in t.get("slots", [])],
            )
        )
    return Dialogue(
        dialogue_id=record["dialogue_id"],
        domain=record.get("domain", ""),
        turns=turns,
    )


def dialogue_to_dict(dialogue: Dialogue) -> dict:
    return {
        "dialogue_id": dialogue.dialogue_id,
        "domain": dialogue.domain,
        "turns": [
            {
                "user": t.user_text,
                "system": t.system_text,
                "slots": [s.to_dict() for s in t.gold_slots],
            }
            for t in dialogue.turns
        ],
    }


def load_dialogue_corpus(
    path: str | Path, domain_filter: str | None = None
) -> list[Dialogue]:
    """Load a JSONL dialogue corpus, optionally keeping a single domain.

    Each line holds one dialogue record. With ``domain_filter`` set, only
    dialogues whose domain is exactly that value are returned.
    """
    path = Path(path)
    dialogues = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(f"{path}:{lineno}: {exc}") from exc
            if "dialogue_id" not in record:
                raise CorpusParseError(f"{path}:{lineno}: missing dialogue_id")
            dialogue = _dialogue_from_dict(record)
            try:
                dialogue.validate()
            except CorpusValidationError as exc:
                raise CorpusValidationError(f"{path}:{lineno}: {exc}") from exc
            if domain_filter is None or dialogue.domain == domain_filter:
                dialogues.append(dialogue)
    return dialogues


def write_dialogue_corpus(dialogues: list[Dialogue], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for d in dialogues:
            fh.write(json.dumps(dialogue_to_dict(d)) + "\n")


def _locate_value(text: str, value: str, used: list[tuple[int, int]]) -> tuple[int, int] | None:
    """First occurrence of value in text not overlapping an already-used span."""
    for haystack, needle in ((text, value), (text.lower(), value.lower())):
        start = 0
        while True:
            pos = haystack.find(needle, start)
            if pos < 0:
                break
            span = (pos, pos + len(needle))
            if all(span[1] <= s or span[0] >= e for s, e in used):
                return span
            start = pos + 1
    return None


def to_bio(turn: Turn) -> BIOUtterance:
    """Convert a turn's gold slot annotations to nameless B/I/O labels.

    Tokens covered by a slot value get B on the first token and I on the
    rest; everything else is O. Slot names are discarded. Values that cannot
    be located in the utterance are skipped with a warning.
    """
    offsets = turn.token_offsets()
    labels = ["O"] * len(offsets)
    used: list[tuple[int, int]] = [
        s.char_span for s in turn.gold_slots if s.char_span is not None
    ]
    for slot in turn.gold_slots:
        span = slot.char_span
        if span is None:
            span = _locate_value(turn.user_text, slot.value, used)
            if span is None:
                logger.warning(
                    "slot value %r not locatable in utterance %r; skipped",
                    slot.value,
                    turn.user_text,
                )
                continue
            used.append(span)
        covered = [
            i
            for i, (_, ts, te) in enumerate(offsets)
            if ts < span[1] and te > span[0]
        ]
        if not covered:
            logger.warning(
                "slot value %r maps to no tokens in %r; skipped",
                slot.value,
                turn.user_text,
            )
            continue
        first = True
        for i in covered:
            if labels[i] != "O":
                # token shared with an earlier slot: continue that span
                first = False
                continue
            labels[i] = "B" if first else "I"
            first = False
    return BIOUtterance(tokens=[tok for tok, _, _ in offsets], labels=labels)


def make_split(
    corpus: list[Dialogue], test_domain: str, seed: int
) -> DomainSplit:
    """Hold out one domain and split its dialogues 60/20/20.

    Train/valid sizes are floor(0.6n) and floor(0.2n); the remainder goes to
    test. Deterministic for a given seed.
    """
    domains = {d.domain for d in corpus}
    if test_domain not in domains:
        raise CorpusValidationError(f"domain {test_domain!r} not present in corpus")
    if len(domains) < 2:
        raise CorpusValidationError(
            "corpus must contain at least 2 domains to hold one out"
        )
    held_out = [d for d in corpus if d.domain == test_domain]
    order = list(range(len(held_out)))
    random.Random(seed).shuffle(order)
    shuffled = [held_out[i] for i in order]
    n = len(shuffled)
    n_train = int(0.6 * n)
    n_valid = int(0.2 * n)
    return DomainSplit(
        train_domains=domains - {test_domain},
        test_domain=test_domain,
        train=shuffled[:n_train],
        valid=shuffled[n_train : n_train + n_valid],
        test=shuffled[n_train + n_valid :],
    )


def write_bio_file(
    entries: list[tuple[str, int, BIOUtterance]], path: str | Path
) -> None:
    """CoNLL-style dump: a comment line per utterance, then token<TAB>label."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for dialogue_id, turn_index, utt in entries:
            fh.write(f"# {dialogue_id} {turn_index}\n")
            for tok, lab in zip(utt.tokens, utt.labels):
                fh.write(f"{tok}\t{lab}\n")
            fh.write("\n")


def read_bio_file(path: str | Path) -> list[tuple[str, int, BIOUtterance]]:
    path = Path(path)
    entries: list[tuple[str, int, BIOUtterance]] = []
    dialogue_id, turn_index = "", 0
    tokens: list[str] = []
    labels: list[str] = []

    def flush() -> None:
        if tokens:
            entries.append((dialogue_id, turn_index, BIOUtterance(list(tokens), list(labels))))
            tokens.clear()
            labels.clear()

    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                flush()
                parts = line[1:].split()
                if len(parts) != 2:
                    raise CorpusParseError(f"{path}:{lineno}: bad comment line")
                dialogue_id, turn_index = parts[0], int(parts[1])
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise CorpusParseError(f"{path}:{lineno}: expected token<TAB>label")
            tokens.append(cols[0])
            labels.append(cols[1])
    flush()
    return entries


def corpus_to_bio(
    dialogues: list[Dialogue], include_system: bool = False
) -> list[tuple[str, int, BIOUtterance]]:
    """BIO-convert every user turn of every dialogue.

    System-side utterances carry no slot annotation in this scheme; with
    ``include_system`` they are emitted as all-O utterances.
    """
    out = []
    for d in dialogues:
        for turn in d.turns:
            out.append((d.dialogue_id, turn.index, to_bio(turn)))
            if include_system and turn.system_text:
                sys_tokens = tokenize(turn.system_text)
                out.append(
                    (
                        d.dialogue_id,
                        turn.index,
                        BIOUtterance(sys_tokens, ["O"] * len(sys_tokens)),
                    )
                )
    return out
