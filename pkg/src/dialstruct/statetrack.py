"""Deterministic dialogue-state labeling.

A state is an integer vector of per-slot-group modification counts, starting
from all zeros and never decreasing. Each turn's recorded state is the
vector after applying that turn's updates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from collections.abc import Mapping, Sequence
from pathlib import Path

from .corpus import Dialogue
from .slotcluster import SlotGrouping, SpanKey

State = tuple[int, ...]


@dataclass
class LabeledDialogue:
    dialogue_id: str
    states: list[State]

    def validate(self) -> None:
        for state in self.states:
            if any(c < 0 for c in state):
                raise ValueError(f"{self.dialogue_id}: negative count in {state}")
        for prev, cur in zip(self.states, self.states[1:]):
            if len(prev) != len(cur):
                raise ValueError(f"{self.dialogue_id}: state length changed mid-dialogue")
            if any(c < p for p, c in zip(prev, cur)):
                raise ValueError(
                    f"{self.dialogue_id}: states not coordinatewise monotone"
                )


def label_states(
    dialogue: Dialogue,
    spans_by_turn: Mapping[int, Sequence[SpanKey]],
    grouping: SlotGrouping,
) -> LabeledDialogue:
    """Count per-group detections cumulatively across a dialogue's turns.

    Every detected span increments its group's coordinate by one; the turn's
    recorded state is the post-update vector.
    """
    counts = [0] * grouping.n_groups
    states: list[State] = []
    for turn in dialogue.turns:
        for key in spans_by_turn.get(turn.index, ()):
            group = grouping.assignment.get(tuple(key))
            if group is None:
                raise ValueError(
                    f"{dialogue.dialogue_id}: span {tuple(key)} missing from grouping"
                )
            counts[group] += 1
        states.append(tuple(counts))
    return LabeledDialogue(dialogue_id=dialogue.dialogue_id, states=states)


def label_states_gold(dialogue: Dialogue, slot_order: list[str]) -> LabeledDialogue:
    """Count annotated-value changes per slot.

    A slot's coordinate increments at a turn iff its annotated value there
    differs from the value carried over from the previous turn; the first
    assignment counts as a change and disappearing values do not decrement.
    """
    index_of = {name: i for i, name in enumerate(slot_order)}
    counts = [0] * len(slot_order)
    current: dict[str, str] = {}
    states: list[State] = []
    for turn in dialogue.turns:
        for slot in turn.gold_slots:
            if slot.name not in index_of:
                raise ValueError(
                    f"{dialogue.dialogue_id}: unknown slot {slot.name!r} at turn {turn.index}"
                )
            if current.get(slot.name) != slot.value:
                counts[index_of[slot.name]] += 1
                current[slot.name] = slot.value
        states.append(tuple(counts))
    return LabeledDialogue(dialogue_id=dialogue.dialogue_id, states=states)


def distinct_states(labeled: Sequence[LabeledDialogue]) -> set[State]:
    """Unique state vectors across all turns of all dialogues."""
    out: set[State] = set()
    for ld in labeled:
        out.update(ld.states)
    return out


def state_overlap(
    splits: Mapping[str, Sequence[LabeledDialogue]],
) -> dict[str, int]:
    """Distinct-state counts per region across train/valid/test splits.

    The "* Only" entries count states exclusive to one split; the pairwise
    entries are full intersection sizes (they include states shared by all
    three), matching the conventional overlap-table presentation.
    """
    train = distinct_states(splits.get("train", ()))
    valid = distinct_states(splits.get("valid", ()))
    test = distinct_states(splits.get("test", ()))
    return {
        "train_only": len(train - valid - test),
        "valid_only": len(valid - train - test),
        "test_only": len(test - train - valid),
        "train_valid": len(train & valid),
        "train_test": len(train & test),
        "test_valid": len(test & valid),
        "train_valid_test": len(train & valid & test),
    }


def states_to_assignment(labeled: Sequence[LabeledDialogue]) -> list[int]:
    """Flatten per-turn states into integer cluster labels.

    States are numbered by first occurrence; turns sharing a state vector get
    the same label. Order follows the given dialogue and turn order.
    """
    ids: dict[State, int] = {}
    out = []
    for ld in labeled:
        for state in ld.states:
            if state not in ids:
                ids[state] = len(ids)
            out.append(ids[state])
    return out


def write_labeled_states(
    labeled: Sequence[LabeledDialogue], path: str | Path
) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ld in labeled:
            fh.write(
                json.dumps(
                    {"dialogue_id": ld.dialogue_id, "states": [list(s) for s in ld.states]}
                )
                + "\n"
            )


def read_labeled_states(path: str | Path) -> list[LabeledDialogue]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                LabeledDialogue(
                    dialogue_id=rec["dialogue_id"],
                    states=[tuple(s) for s in rec["states"]],
                )
            )
    return out
