from __future__ import annotations

import numpy as np
import pytest
import torch

from dialstruct.baselines import (
    LexiconPOSBackend,
    UtteranceEmbedding,
    cls_utterance_embeddings,
    cluster_utterances,
    heuristic_slot_words,
    mean_slot_word_embedding,
    random_states,
    read_utterance_embeddings,
    sbd_utterance_embeddings,
    write_utterance_embeddings,
)
from dialstruct.corpus import Turn
from dialstruct.encoders import HashEncoder
from dialstruct.evalmetrics import adjusted_rand_index
from dialstruct.pipeline import label_corpus_gold
from dialstruct.statetrack import states_to_assignment

from conftest import make_corpus


class TestRandomStates:
    def test_labels_in_range_and_one_per_turn(self, small_corpus):
        labels = random_states(small_corpus, 5, seed=0)
        n_turns = sum(len(d.turns) for d in small_corpus)
        assert len(labels) == n_turns
        assert all(1 <= x <= 5 for x in labels)

    def test_single_state(self, small_corpus):
        assert set(random_states(small_corpus, 1, seed=3)) == {1}

    def test_deterministic(self, small_corpus):
        assert random_states(small_corpus, 7, seed=9) == random_states(
            small_corpus, 7, seed=9
        )

    def test_different_seeds_differ(self):
        corpus = make_corpus(250, seed=0)  # about a thousand turns
        runs = [random_states(corpus, 6, seed=s) for s in (1, 2, 3)]
        assert runs[0] != runs[1] != runs[2]

    def test_chance_level_ari_vs_gold(self):
        corpus = make_corpus(120, seed=8)
        gold = states_to_assignment(label_corpus_gold(corpus))
        values = [
            adjusted_rand_index(gold, random_states(corpus, len(set(gold)), seed=s))
            for s in range(20)
        ]
        assert abs(sum(values) / len(values)) < 0.02


class TestClusterUtterances:
    def test_every_turn_its_own_cluster(self):
        rng = np.random.default_rng(0)
        embeddings = [
            UtteranceEmbedding("d0", i, rng.normal(size=4).astype(np.float32), "cls")
            for i in range(6)
        ]
        labels = cluster_utterances(embeddings, 6, seed=0)
        assert sorted(labels) == list(range(6))
        gold = [0, 0, 1, 1, 2, 2]
        assert adjusted_rand_index(gold, labels) <= 1.0

    def test_doubled_input_refines_consistently(self):
        rng = np.random.default_rng(1)
        base = [
            UtteranceEmbedding("d0", i, rng.normal(size=3).astype(np.float32), "cls")
            for i in range(10)
        ]
        doubled = base + [
            UtteranceEmbedding("d1", e.turn, e.vector, e.source) for e in base
        ]
        labels = cluster_utterances(doubled, 3, seed=2)
        assert labels[:10] == labels[10:]

    def test_too_many_clusters_is_error(self):
        embeddings = [
            UtteranceEmbedding("d0", 0, np.zeros(2, dtype=np.float32), "cls")
        ]
        with pytest.raises(ValueError):
            cluster_utterances(embeddings, 2)


class TestHeuristicSlotWords:
    def test_example_sentence(self):
        turn = Turn(
            index=0,
            user_text="I'd like a sports place in the centre please",
            system_text="",
        )
        indices = heuristic_slot_words(turn, LexiconPOSBackend())
        assert [turn.user_tokens[i] for i in indices] == ["sports", "place", "centre"]

    def test_no_nouns(self):
        turn = Turn(index=0, user_text="yes please do that now", system_text="")
        assert heuristic_slot_words(turn, LexiconPOSBackend()) == []

    def test_missing_backend_is_error(self):
        turn = Turn(index=0, user_text="hello", system_text="")
        with pytest.raises(RuntimeError, match="backend"):
            heuristic_slot_words(turn, None)

    def test_punctuation_and_numbers_excluded(self):
        turn = Turn(index=0, user_text="arrive by 08:15 please !", system_text="")
        indices = heuristic_slot_words(turn, LexiconPOSBackend())
        assert all(turn.user_tokens[i].isalpha() for i in indices)


class TestMeanSlotWordEmbedding:
    def test_single_subword_noun_equals_hidden_state(self):
        enc = HashEncoder(hidden_size=24)
        turn = Turn(index=0, user_text="a park here", system_text="")
        batch = enc.encode([turn.user_tokens])
        row = batch.word_ids[0].index(1)
        expected = batch.hidden[0][row].numpy()
        emb = mean_slot_word_embedding(turn, [1], enc)
        assert np.allclose(emb.vector, expected, atol=1e-6)
        assert emb.source == "mean_slot_words"

    def test_two_level_average_differs_from_flat(self):
        # words with 1 and 3 subwords: per-word means get equal weight, so
        # the result differs from averaging all 4 subword vectors
        enc = HashEncoder(hidden_size=24)
        turn = Turn(index=0, user_text="park harborview today", system_text="")
        assert len(enc.subword_split("park")) == 1
        assert len(enc.subword_split("harborview")) == 3
        batch = enc.encode([turn.user_tokens])
        hidden = batch.hidden[0].numpy()
        ids = batch.word_ids[0]
        rows_a = [p for p, w in enumerate(ids) if w == 0]
        rows_b = [p for p, w in enumerate(ids) if w == 1]
        two_level = (hidden[rows_a].mean(axis=0) + hidden[rows_b].mean(axis=0)) / 2
        flat = hidden[rows_a + rows_b].mean(axis=0)
        emb = mean_slot_word_embedding(turn, [0, 1], enc)
        assert np.allclose(emb.vector, two_level, atol=1e-6)
        assert not np.allclose(emb.vector, flat, atol=1e-6)

    def test_two_level_equals_flat_for_equal_subword_counts(self):
        enc = HashEncoder(hidden_size=24)
        turn = Turn(index=0, user_text="park dome now", system_text="")
        assert len(enc.subword_split("park")) == len(enc.subword_split("dome")) == 1
        batch = enc.encode([turn.user_tokens])
        hidden = batch.hidden[0].numpy()
        ids = batch.word_ids[0]
        rows = [p for p, w in enumerate(ids) if w in (0, 1)]
        flat = hidden[rows].mean(axis=0)
        emb = mean_slot_word_embedding(turn, [0, 1], enc)
        assert np.allclose(emb.vector, flat, atol=1e-6)

    def test_index_order_invariance(self):
        enc = HashEncoder(hidden_size=16)
        turn = Turn(index=0, user_text="a sports place in town", system_text="")
        a = mean_slot_word_embedding(turn, [1, 2, 4], enc)
        b = mean_slot_word_embedding(turn, [4, 1, 2], enc)
        assert np.array_equal(a.vector, b.vector)

    def test_empty_indices_zero_vector_with_warning(self, caplog):
        enc = HashEncoder(hidden_size=16)
        turn = Turn(index=2, user_text="nothing here", system_text="")
        with caplog.at_level("WARNING"):
            emb = mean_slot_word_embedding(turn, [], enc, dialogue_id="d7")
        assert np.array_equal(emb.vector, np.zeros(16, dtype=np.float32))
        assert "no slot words" in caplog.text


class TestUtteranceEmbeddings:
    def test_cls_embeddings_shape_and_context_sensitivity(self, small_corpus):
        enc = HashEncoder(hidden_size=32)
        embeddings = cls_utterance_embeddings(small_corpus[:3], enc)
        n_turns = sum(len(d.turns) for d in small_corpus[:3])
        assert len(embeddings) == n_turns
        assert all(e.vector.shape == (32,) for e in embeddings)
        assert all(e.source == "cls" for e in embeddings)
        # the classification vector reflects utterance content
        assert not np.array_equal(embeddings[0].vector, embeddings[1].vector)

    def test_cls_matches_leading_position(self):
        enc = HashEncoder(hidden_size=16)
        turn = Turn(index=0, user_text="a museum please", system_text="sure thing")
        from dialstruct.corpus import Dialogue

        [emb] = cls_utterance_embeddings(
            [Dialogue("d0", "attraction", [turn])], enc
        )
        words = ["[usr]", "a", "museum", "please", "[sys]", "sure", "thing"]
        with torch.no_grad():
            batch = enc.encode([words])
        assert np.allclose(emb.vector, batch.hidden[0, 0].numpy(), atol=1e-6)

    def test_sbd_composition_has_one_embedding_per_turn(self, trained_tagger):
        model, corpus = trained_tagger
        embeddings = sbd_utterance_embeddings(model, corpus[:4])
        assert len(embeddings) == sum(len(d.turns) for d in corpus[:4])

    def test_io_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        embeddings = [
            UtteranceEmbedding(f"d{i % 2}", i, rng.normal(size=8).astype(np.float32), "cls")
            for i in range(7)
        ]
        write_utterance_embeddings(embeddings, tmp_path / "u.jsonl", tmp_path / "u.spem")
        loaded = read_utterance_embeddings(tmp_path / "u.jsonl", tmp_path / "u.spem")
        assert [(e.dialogue_id, e.turn, e.source) for e in loaded] == [
            (e.dialogue_id, e.turn, e.source) for e in embeddings
        ]
        assert all(np.array_equal(a.vector, b.vector) for a, b in zip(embeddings, loaded))
