"""Convert a raw MultiWOZ 2.1 ``data.json`` into the corpus JSONL schema.

Only single-domain dialogues are kept (a dialogue qualifies when exactly one
domain goal is non-empty, and it is one of the five core domains). Each
exchange pairs a user turn with the following system turn; the system turn's
belief state for the dialogue's domain becomes the turn's slot annotations:
all ``semi`` fields plus ``book`` fields except the ``booked`` list, skipping
the empty markers ("", "not mentioned", "none").

Usage: python -m dialstruct.multiwoz data.json corpus.jsonl [--domain NAME]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from .corpus import Dialogue, GoldSlot, Turn, write_dialogue_corpus

CORE_DOMAINS = ("taxi", "restaurant", "hotel", "attraction", "train")
ALL_DOMAINS = CORE_DOMAINS + ("police", "hospital")
EMPTY_VALUES = {"", "not mentioned", "none"}


def single_domain_of(goal: dict) -> str | None:
    touched = [d for d in ALL_DOMAINS if goal.get(d)]
    if len(touched) == 1 and touched[0] in CORE_DOMAINS:
        return touched[0]
    return None


def belief_slots(metadata: dict, domain: str) -> list[GoldSlot]:
    frame = metadata.get(domain, {})
    slots = []
    for name, value in sorted(frame.get("semi", {}).items()):
        value = str(value).strip()
        if value.lower() not in EMPTY_VALUES:
            slots.append(GoldSlot(name=name, value=value))
    for name, value in sorted(frame.get("book", {}).items()):
        if name == "booked":
            continue
        value = str(value).strip()
        if value.lower() not in EMPTY_VALUES:
            slots.append(GoldSlot(name=name, value=value))
    return slots


def convert_dialogue(dialogue_id: str, record: dict) -> Dialogue | None:
    domain = single_domain_of(record.get("goal", {}))
    if domain is None:
        return None
    log = record.get("log", [])
    turns = []
    for i in range(0, len(log) - 1, 2):
        user = log[i].get("text", "").strip()
        system = log[i + 1].get("text", "").strip()
        slots = belief_slots(log[i + 1].get("metadata", {}), domain)
        turns.append(
            Turn(
                index=len(turns),
                user_text=user,
                system_text=system,
                gold_slots=slots,
            )
        )
    if not turns:
        return None
    return Dialogue(dialogue_id=dialogue_id, domain=domain, turns=turns)


def convert_corpus(
    data_json: str | Path, domain_filter: str | None = None
) -> list[Dialogue]:
    raw = json.loads(Path(data_json).read_text(encoding="utf-8"))
    dialogues = []
    for dialogue_id in sorted(raw):
        dialogue = convert_dialogue(dialogue_id, raw[dialogue_id])
        if dialogue is None:
            continue
        if domain_filter is None or dialogue.domain == domain_filter:
            dialogues.append(dialogue)
    return dialogues


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("data_json", help="raw MultiWOZ 2.1 data.json")
    parser.add_argument("out_path", help="corpus JSONL to write")
    parser.add_argument("--domain", choices=CORE_DOMAINS)
    args = parser.parse_args(argv)
    dialogues = convert_corpus(args.data_json, args.domain)
    write_dialogue_corpus(dialogues, args.out_path)
    print(f"wrote {len(dialogues)} single-domain dialogues to {args.out_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
