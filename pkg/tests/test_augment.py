from __future__ import annotations

import math

import pytest

from dialstruct.augment import (
    TurnExample,
    build_context,
    build_dictionary,
    collect_turn_examples,
    mfs_emit,
    mrda_emit,
    read_examples,
    subsample_turns,
    write_examples,
)
from dialstruct.corpus import Dialogue, Turn
from dialstruct.pipeline import label_corpus_gold
from dialstruct.structure import build_graph
from dialstruct.statetrack import LabeledDialogue

from conftest import make_corpus


def turn_example(i: int, state, response: str) -> TurnExample:
    return TurnExample(
        dialogue_id=f"d{i}",
        turn_index=0,
        state=tuple(state),
        context=f"[usr] context {i}",
        response=response,
    )


def synthetic_turns() -> list[TurnExample]:
    corpus = make_corpus(50, seed=13)  # about 150 turns
    labeled = label_corpus_gold(corpus)
    return collect_turn_examples(corpus, labeled)


class TestContext:
    def test_first_turn_has_user_only(self):
        d = Dialogue(
            "d0",
            "attraction",
            [
                Turn(index=0, user_text="hi there", system_text="hello"),
                Turn(index=1, user_text="a museum please", system_text="sure"),
            ],
        )
        assert build_context(d, 0) == "[usr] hi there"
        assert build_context(d, 1) == "[sys] hello [usr] a museum please"

    def test_collect_alignment_checks(self):
        corpus = make_corpus(3, seed=0)
        labeled = label_corpus_gold(corpus)
        turns = collect_turn_examples(corpus, labeled)
        assert len(turns) == sum(len(d.turns) for d in corpus)
        with pytest.raises(ValueError):
            collect_turn_examples(corpus, labeled[:-1])
        bad = [LabeledDialogue(ld.dialogue_id, ld.states[:-1]) for ld in labeled]
        with pytest.raises(ValueError):
            collect_turn_examples(corpus, bad)


class TestDictionary:
    def test_shared_state_collects_both_responses(self):
        turns = [turn_example(0, (1, 0), "say a"), turn_example(1, (1, 0), "say b")]
        d = build_dictionary(turns)
        assert sorted(d.responses((1, 0))) == ["say a", "say b"]

    def test_deduplicated_by_exact_string(self):
        turns = [turn_example(i, (0,), "same reply") for i in range(5)]
        d = build_dictionary(turns)
        assert d.responses((0,)) == ["same reply"]

    def test_every_pair_appears(self):
        turns = synthetic_turns()
        d = build_dictionary(turns)
        assert all(d.contains(t.state, t.response) for t in turns)


class TestSubsample:
    def test_full_ratio_keeps_everything_in_order(self):
        turns = synthetic_turns()
        assert subsample_turns(turns, 1.0, seed=4) == turns

    def test_sizes_and_determinism(self):
        turns = synthetic_turns()
        for r in (0.1, 0.5, 0.9):
            a = subsample_turns(turns, r, seed=2)
            b = subsample_turns(turns, r, seed=2)
            assert a == b
            assert len(a) == math.floor(r * len(turns))

    def test_zero_ratio_is_error(self):
        with pytest.raises(ValueError):
            subsample_turns(synthetic_turns()[:4], 0.0, seed=0)


class TestMrdaEmit:
    def test_doubling_at_full_ratios(self):
        turns = synthetic_turns()
        d = build_dictionary(turns)
        out = mrda_emit(turns, d, r_train=1.0, r_aug=1.0, seed=0)
        assert len(out) == 2 * len(turns)

    def test_r_aug_zero_gives_originals_exactly(self):
        turns = synthetic_turns()
        d = build_dictionary(turns)
        out = mrda_emit(turns, d, r_train=1.0, r_aug=0.0, seed=0)
        assert [(e.context, e.response) for e in out] == [
            (t.context, t.response) for t in turns
        ]
        assert all(e.origin == "original" for e in out)

    def test_membership_on_toy_two_state_corpus(self):
        turns = [
            turn_example(0, (1, 0), "r1"),
            turn_example(1, (1, 0), "r2"),
            turn_example(2, (0, 1), "r3"),
            turn_example(3, (0, 1), "r4"),
        ]
        d = build_dictionary(turns)
        out = mrda_emit(turns, d, r_train=1.0, r_aug=1.0, seed=5)
        by_context = {t.context: t for t in turns}
        for ex in out:
            assert d.contains(ex.state, ex.response)
            if ex.origin == "mrda":
                source = by_context[ex.context]
                assert ex.response != source.response  # alternatives exist here

    def test_singleton_states_fall_back_to_original_response(self):
        turns = [turn_example(i, (i,), f"only-{i}") for i in range(4)]
        d = build_dictionary(turns)
        out = mrda_emit(turns, d, r_train=1.0, r_aug=1.0, seed=1)
        augmented = [e for e in out if e.origin == "mrda"]
        assert len(augmented) == 4
        assert all(e.response == f"only-{list(e.state)[0]}" for e in augmented)

    def test_never_invents_text(self):
        turns = synthetic_turns()
        d = build_dictionary(turns)
        out = mrda_emit(turns, d, r_train=1.0, r_aug=2.5, seed=3)
        known = {t.response for t in turns}
        assert all(e.response in known for e in out)

    def test_grid_sizes_with_rebuilt_dictionaries(self):
        turns = synthetic_turns()
        for r_train in (0.1, 0.5, 1.0):
            used = subsample_turns(turns, r_train, seed=7)
            d = build_dictionary(used)
            for r_aug in (0.1, 0.5, 1.0):
                out = mrda_emit(turns, d, r_train=r_train, r_aug=r_aug, seed=7)
                assert len(out) == len(used) + math.floor(r_aug * len(used))

    def test_byte_identical_given_seed(self, tmp_path):
        turns = synthetic_turns()
        d = build_dictionary(turns)
        paths = []
        for k in range(2):
            out = mrda_emit(turns, d, r_train=0.8, r_aug=1.3, seed=21)
            path = tmp_path / f"aug{k}.jsonl"
            write_examples(out, path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_r_train_zero_is_error(self):
        turns = synthetic_turns()[:5]
        with pytest.raises(ValueError):
            mrda_emit(turns, build_dictionary(turns), 0.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            mrda_emit(turns, build_dictionary(turns), 1.0, -0.5, seed=0)


class TestMfsEmit:
    def test_single_history_duplicates_itself(self):
        turns = [turn_example(0, (1,), "hello there")]
        graph = build_graph([LabeledDialogue("d0", [(1,)])])
        out = mfs_emit(turns, graph, r_aug=1.0, seed=0)
        assert len(out) == 2
        assert out[1].origin == "mfs"
        assert (out[1].context, out[1].response) == (out[0].context, out[0].response)

    def test_two_history_re_pairing(self):
        # two histories enter state z; the most frequent response is paired
        # with both of them, covering the swapped combination
        turns = [
            turn_example(0, (1,), "popular"),
            turn_example(1, (1,), "popular"),
            turn_example(2, (1,), "rare"),
        ]
        graph = build_graph([LabeledDialogue(f"d{i}", [(1,)]) for i in range(3)])
        out = mfs_emit(turns, graph, r_aug=1.0, seed=0)
        augmented = [e for e in out if e.origin == "mfs"]
        assert len(augmented) == 3
        assert {e.response for e in augmented} == {"popular"}
        contexts = {e.context for e in augmented}
        assert turns[2].context in contexts  # rare history re-paired with popular

    def test_requires_annotated_states(self):
        turns = [turn_example(0, (3,), "x")]
        graph = build_graph([LabeledDialogue("d0", [(1,)])])
        with pytest.raises(ValueError, match="absent from the annotated-state graph"):
            mfs_emit(turns, graph, r_aug=1.0, seed=0)
        with pytest.raises(ValueError, match="gold graph"):
            mfs_emit(turns, None, r_aug=1.0, seed=0)

    def test_quota_and_determinism(self):
        turns = synthetic_turns()
        labeled = label_corpus_gold(make_corpus(50, seed=13))
        graph = build_graph(labeled)
        a = mfs_emit(turns, graph, r_aug=0.5, seed=9)
        b = mfs_emit(turns, graph, r_aug=0.5, seed=9)
        assert a == b
        assert len(a) == len(turns) + math.floor(0.5 * len(turns))


class TestExamplesIO:
    def test_round_trip(self, tmp_path):
        turns = synthetic_turns()[:6]
        d = build_dictionary(turns)
        out = mrda_emit(turns, d, 1.0, 1.0, seed=2)
        path = tmp_path / "examples.jsonl"
        write_examples(out, path)
        assert read_examples(path) == out
