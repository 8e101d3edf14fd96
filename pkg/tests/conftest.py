from __future__ import annotations

import random

import pytest

from dialstruct.corpus import Dialogue, GoldSlot, Turn

# The area inventory is shared across domains (as area-style slots are in
# real task-oriented corpora), so a tagger trained on other domains still
# detects something in a held-out one.
SLOT_INVENTORIES = {
    "attraction": {
        "type": ["museum", "cinema", "park", "theatre", "gallery", "stadium"],
        "area": ["centre", "north", "south", "east", "west"],
        "name": ["funland", "starview", "oakhall", "riverside"],
    },
    "restaurant": {
        "type": ["bistro", "diner", "pizzeria", "steakhouse", "cafe", "noodlebar"],
        "area": ["centre", "north", "south", "east", "west"],
        "name": ["goldfork", "lanterns", "thecove", "maplerow"],
    },
    "hotel": {
        "type": ["guesthouse", "hostel", "lodge", "inn", "motel", "resort"],
        "area": ["centre", "north", "south", "east", "west"],
        "name": ["archway", "pinehill", "harborview", "stonegate"],
    },
}

TEMPLATES = [
    ("i want a {type} in the {area}", ("type", "area")),
    ("how about a {type} instead", ("type",)),
    ("is there a {type} near the {area}", ("type", "area")),
    ("tell me about {name} please", ("name",)),
    ("anything fun to do around here", ()),
    ("maybe the {area} part of town", ("area",)),
    ("do you know {name} in the {area}", ("name", "area")),
]

RESPONSES = [
    "there are several options for you",
    "i found a great match",
    "no results for that request",
    "sure thing let me check",
    "here is what i found",
    "would you like anything else",
]


def make_turn(index: int, rng: random.Random, inventory: dict) -> Turn:
    template, slots = TEMPLATES[rng.randrange(len(TEMPLATES))]
    values = {slot: rng.choice(inventory[slot]) for slot in slots}
    user_text = template.format(**values)
    gold = []
    for slot, value in values.items():
        start = user_text.find(value)
        gold.append(GoldSlot(name=slot, value=value, char_span=(start, start + len(value))))
    return Turn(
        index=index,
        user_text=user_text,
        system_text=rng.choice(RESPONSES),
        gold_slots=gold,
    )


def make_corpus(
    n_dialogues: int,
    domain: str = "attraction",
    seed: int = 0,
    min_turns: int = 2,
    max_turns: int = 4,
) -> list[Dialogue]:
    rng = random.Random(seed)
    inventory = SLOT_INVENTORIES.get(domain, SLOT_INVENTORIES["attraction"])
    corpus = []
    for k in range(n_dialogues):
        n_turns = rng.randint(min_turns, max_turns)
        turns = [make_turn(i, rng, inventory) for i in range(n_turns)]
        corpus.append(
            Dialogue(dialogue_id=f"{domain}-{k:04d}", domain=domain, turns=turns)
        )
    return corpus


def make_multi_domain_corpus(per_domain: int, seed: int = 0) -> list[Dialogue]:
    corpus = []
    for i, domain in enumerate(sorted(SLOT_INVENTORIES)):
        corpus.extend(make_corpus(per_domain, domain=domain, seed=seed + i))
    return corpus


def make_random_labeled_corpus(seed: int, n_dialogues: int = 8, width: int = 3):
    """Monotone random state sequences, shaped like pipeline output."""
    from dialstruct.statetrack import LabeledDialogue

    rng = random.Random(seed)
    corpus = []
    for k in range(n_dialogues):
        counts = [0] * width
        states = []
        for _ in range(rng.randint(1, 6)):
            for _ in range(rng.randint(0, 2)):
                counts[rng.randrange(width)] += 1
            states.append(tuple(counts))
        corpus.append(LabeledDialogue(f"d{seed}-{k}", states))
    return corpus


def count_transitions(labeled) -> int:
    """Observed transitions including virtual starts out of the zero state."""
    total = 0
    for ld in labeled:
        if not ld.states:
            continue
        width = len(ld.states[0])
        total += len(ld.states) - 1
        if ld.states[0] != (0,) * width:
            total += 1
    return total


@pytest.fixture(scope="session")
def small_corpus() -> list[Dialogue]:
    return make_corpus(12, seed=7)


@pytest.fixture(scope="session")
def trained_tagger():
    """A tagger memorized on a small in-domain corpus; used by span tests."""
    from dialstruct.corpus import corpus_to_bio
    from dialstruct.encoders import HashEncoder
    from dialstruct.sbd import TrainConfig, train_tagger

    corpus = make_corpus(20, seed=3)
    entries = corpus_to_bio(corpus)
    utterances = [u for _, _, u in entries]
    split = max(1, len(utterances) // 10)
    config = TrainConfig(
        encoder=HashEncoder(hidden_size=48),
        epochs=20,
        learning_rate=0.05,
        batch_size=16,
        seed=11,
    )
    return train_tagger(utterances[split:], utterances[:split], config), corpus
