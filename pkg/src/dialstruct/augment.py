"""Structure-guided data augmentation for single-turn response generation.

Builds a dictionary from dialogue states to the system responses observed
under them, then emits augmented training pairs: either by re-pairing each
context with alternative valid responses of its own state (multi-response
augmentation), or by pairing each state's most frequent response with the
other histories entering that state (the frequency-based baseline, which
needs annotated states).
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from collections.abc import Mapping, Sequence
from pathlib import Path

from .corpus import Dialogue
from .statetrack import LabeledDialogue, State
from .structure import TransitionGraph


@dataclass
class TurnExample:
    """One training turn: the context string, its response, and its state."""

    dialogue_id: str
    turn_index: int
    state: State
    context: str
    response: str


@dataclass
class AugmentedExample:
    context: str
    response: str
    state: State
    origin: str  # "original", "mrda", or "mfs"

    def to_dict(self) -> dict:
        return {
            "context": self.context,
            "response": self.response,
            "state": list(self.state),
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentedExample":
        return cls(
            context=d["context"],
            response=d["response"],
            state=tuple(d["state"]),
            origin=d["origin"],
        )


@dataclass
class StateUtteranceDictionary:
    """Deduplicated valid-response sets per dialogue state."""

    entries: dict[State, dict[str, tuple[str, int]]] = field(default_factory=dict)

    def responses(self, state: State) -> list[str]:
        return list(self.entries.get(tuple(state), {}))

    def contains(self, state: State, response: str) -> bool:
        return response in self.entries.get(tuple(state), {})


def build_context(dialogue: Dialogue, turn_index: int) -> str:
    """Single-turn history: the previous system reply (if any) plus the
    current user utterance, with role tags."""
    turn = dialogue.turns[turn_index]
    if turn_index > 0:
        prev = dialogue.turns[turn_index - 1].system_text
        return f"[sys] {prev} [usr] {turn.user_text}"
    return f"[usr] {turn.user_text}"


def collect_turn_examples(
    dialogues: Sequence[Dialogue],
    labeled: Sequence[LabeledDialogue],
) -> list[TurnExample]:
    """Align dialogue texts with their per-turn states."""
    states_by_id: Mapping[str, LabeledDialogue] = {
        ld.dialogue_id: ld for ld in labeled
    }
    out = []
    for dialogue in dialogues:
        ld = states_by_id.get(dialogue.dialogue_id)
        if ld is None:
            raise ValueError(f"no labeled states for dialogue {dialogue.dialogue_id}")
        if len(ld.states) != len(dialogue.turns):
            raise ValueError(
                f"{dialogue.dialogue_id}: {len(ld.states)} states for "
                f"{len(dialogue.turns)} turns"
            )
        for turn in dialogue.turns:
            out.append(
                TurnExample(
                    dialogue_id=dialogue.dialogue_id,
                    turn_index=turn.index,
                    state=ld.states[turn.index],
                    context=build_context(dialogue, turn.index),
                    response=turn.system_text,
                )
            )
    return out


def build_dictionary(
    labeled_train: Sequence[TurnExample],
) -> StateUtteranceDictionary:
    """Map each state to its observed system responses, deduplicated by
    exact string; the first source turn is kept as the reference."""
    entries: dict[State, dict[str, tuple[str, int]]] = {}
    for ex in labeled_train:
        bucket = entries.setdefault(ex.state, {})
        bucket.setdefault(ex.response, (ex.dialogue_id, ex.turn_index))
    return StateUtteranceDictionary(entries=entries)


def subsample_turns(
    turns: Sequence[TurnExample], r_train: float, seed: int
) -> list[TurnExample]:
    """Keep floor(r_train * n) turns, chosen uniformly without replacement,
    preserving corpus order. Deterministic for a given seed."""
    if not 0 < r_train <= 1:
        raise ValueError(f"r_train must be in (0, 1], got {r_train}")
    k = math.floor(r_train * len(turns))
    if k == len(turns):
        return list(turns)
    indices = sorted(random.Random(seed).sample(range(len(turns)), k))
    return [turns[i] for i in indices]


def mrda_emit(
    train_turns: Sequence[TurnExample],
    dictionary: StateUtteranceDictionary,
    r_train: float,
    r_aug: float,
    seed: int,
) -> list[AugmentedExample]:
    """Emit originals plus floor(r_aug * used) multi-response pairs.

    The r_train subsample is drawn first (the dictionary must come from that
    same subset). Augmentation cycles over the used turns, drawing each
    turn's alternative responses uniformly without replacement and falling
    back to the turn's own response once its alternatives are exhausted.
    """
    if r_aug < 0:
        raise ValueError(f"r_aug must be non-negative, got {r_aug}")
    used = subsample_turns(train_turns, r_train, seed)
    out = [
        AugmentedExample(
            context=t.context, response=t.response, state=t.state, origin="original"
        )
        for t in used
    ]
    quota = math.floor(r_aug * len(used))
    if quota == 0:
        return out
    rng = random.Random(f"{seed}:mrda")
    remaining: list[list[str] | None] = [None] * len(used)
    emitted = 0
    while emitted < quota:
        for i, turn in enumerate(used):
            if emitted >= quota:
                break
            if remaining[i] is None:
                alts = sorted(set(dictionary.responses(turn.state)) - {turn.response})
                rng.shuffle(alts)
                remaining[i] = alts
            pool = remaining[i]
            response = pool.pop(0) if pool else turn.response
            out.append(
                AugmentedExample(
                    context=turn.context,
                    response=response,
                    state=turn.state,
                    origin="mrda",
                )
            )
            emitted += 1
    return out


def mfs_emit(
    train_turns: Sequence[TurnExample],
    gold_graph: TransitionGraph,
    r_aug: float,
    seed: int,
) -> list[AugmentedExample]:
    """Emit originals plus floor(r_aug * used) most-frequent-response pairs.

    For each annotated state, the most frequent response is re-paired with
    the histories observed entering that state. States are visited in
    decreasing order of that response's frequency.
    """
    if r_aug < 0:
        raise ValueError(f"r_aug must be non-negative, got {r_aug}")
    if not train_turns:
        raise ValueError("no training turns given")
    if gold_graph is None:
        raise ValueError("annotated states are required: no gold graph given")
    graph_states = {node.state for node in gold_graph.nodes}
    for t in train_turns:
        if t.state not in graph_states:
            raise ValueError(
                f"turn {t.dialogue_id}/{t.turn_index} has state {t.state} "
                "absent from the annotated-state graph"
            )

    by_state: dict[State, list[TurnExample]] = {}
    for t in train_turns:
        by_state.setdefault(t.state, []).append(t)

    rng = random.Random(f"{seed}:mfs")
    ranked: list[tuple[int, State, str, list[TurnExample]]] = []
    for state, turns in by_state.items():
        freq: dict[str, int] = {}
        for t in turns:
            freq[t.response] = freq.get(t.response, 0) + 1
        top = min((r for r in freq), key=lambda r: (-freq[r], r))
        histories = list(turns)
        rng.shuffle(histories)
        ranked.append((freq[top], state, top, histories))
    ranked.sort(key=lambda item: (-item[0], item[1]))

    out = [
        AugmentedExample(
            context=t.context, response=t.response, state=t.state, origin="original"
        )
        for t in train_turns
    ]
    quota = math.floor(r_aug * len(train_turns))
    candidates = [
        (history, top, state)
        for _, state, top, histories in ranked
        for history in histories
    ]
    emitted = 0
    while emitted < quota:
        for history, top, state in candidates:
            if emitted >= quota:
                break
            out.append(
                AugmentedExample(
                    context=history.context, response=top, state=state, origin="mfs"
                )
            )
            emitted += 1
    return out


def write_examples(examples: Sequence[AugmentedExample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict()) + "\n")


def read_examples(path: str | Path) -> list[AugmentedExample]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(AugmentedExample.from_dict(json.loads(line)))
    return out
