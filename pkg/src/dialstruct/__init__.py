"""Dialogue structure extraction and augmentation toolkit.

Pipeline: detect slot-mention boundaries with a token tagger, cluster the
detected span embeddings into slot groups, count per-group modifications
into dialogue-state vectors, build the state transition graph, and reuse
the structure for multi-response data augmentation.
"""

from .augment import (
    AugmentedExample,
    StateUtteranceDictionary,
    TurnExample,
    build_context,
    build_dictionary,
    collect_turn_examples,
    mfs_emit,
    mrda_emit,
    subsample_turns,
)
from .baselines import (
    LexiconPOSBackend,
    SpacyPOSBackend,
    UtteranceEmbedding,
    cls_utterance_embeddings,
    cluster_utterances,
    heuristic_slot_words,
    mean_slot_word_embedding,
    random_states,
    sbd_utterance_embeddings,
)
from .corpus import (
    BIOUtterance,
    CorpusParseError,
    CorpusValidationError,
    Dialogue,
    DomainSplit,
    GoldSlot,
    Turn,
    corpus_to_bio,
    load_dialogue_corpus,
    make_split,
    read_bio_file,
    to_bio,
    tokenize,
    write_bio_file,
    write_dialogue_corpus,
)
from .encoders import EncoderBackend, HashEncoder, TransformersEncoder, make_encoder
from .evalmetrics import (
    adjusted_mutual_info,
    adjusted_rand_index,
    corpus_bleu,
    rand_index,
    silhouette,
)
from .pipeline import (
    PipelineConfig,
    PipelineStageError,
    run_pipeline,
    stage_seed,
    sweep_slots,
)
from .sbd import (
    SpanPrediction,
    TaggerModel,
    TrainConfig,
    embed_spans,
    extract_spans,
    predict_corpus_spans,
    predict_labels,
    read_span_predictions,
    score_f1,
    train_tagger,
    write_span_predictions,
)
from .slotcluster import (
    SlotGrouping,
    centroid,
    cluster_spans,
    read_grouping,
    write_grouping,
)
from .statetrack import (
    LabeledDialogue,
    distinct_states,
    label_states,
    label_states_gold,
    read_labeled_states,
    state_overlap,
    states_to_assignment,
    write_labeled_states,
)
from .structure import (
    GraphEdge,
    GraphNode,
    TransitionGraph,
    build_graph,
    export_graph,
    read_graph_json,
)

__version__ = "0.1.0"
