"""Lyrics-to-melody generation: corpus parsing, BLEU, MIDI output and
trained-model inference over the C++ core."""

from ._ltmn import (
    DURATION_VALUES,
    REST_VALUES,
    AlignmentError,
    NoteAttributeError,
    Error,
    MelodyModel,
    MissingArtifactError,
    Note,
    ParseError,
    PreconditionError,
    ShapeError,
    Song,
    attribute_distribution,
    baseline_melody,
    bleu_corpus,
    compose,
    composed_dim,
    entropy,
    midi_bytes,
    note_name,
    parse_corpus,
    parse_corpus_text,
    project,
    softmax_with_temperature,
    text_score,
    validate_attributes,
    write_midi_file,
)

__all__ = [
    "DURATION_VALUES",
    "REST_VALUES",
    "AlignmentError",
    "NoteAttributeError",
    "Error",
    "MelodyModel",
    "MissingArtifactError",
    "Note",
    "ParseError",
    "PreconditionError",
    "ShapeError",
    "Song",
    "attribute_distribution",
    "baseline_melody",
    "bleu_corpus",
    "compose",
    "composed_dim",
    "entropy",
    "midi_bytes",
    "note_name",
    "parse_corpus",
    "parse_corpus_text",
    "project",
    "softmax_with_temperature",
    "text_score",
    "validate_attributes",
    "write_midi_file",
]
