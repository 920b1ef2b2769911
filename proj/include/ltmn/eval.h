#pragma once

// Corpus-level BLEU over class-id streams and the random-sampling baselines.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltmn/corpus.h"
#include "ltmn/melody.h"
#include "ltmn/vocabulary.h"

namespace ltmn {

using ClassSequence = std::vector<int>;

struct BleuScore {
  double bleu = 0.0;
  std::vector<double> precisions;  // p_1..p_max_n after smoothing, 0 when absent
  double brevity_penalty = 0.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
  std::size_t sequences = 0;
};

/// Modified n-gram precision with clipping, uniform weights and the brevity
/// penalty. A zero p_n is replaced by 1 / (2 * candidate n-gram count). An
/// order with no candidate n-grams is reported as 0 and skipped in the mean.
BleuScore bleu_corpus(std::span<const ClassSequence> candidates,
                      std::span<const ClassSequence> references, int max_n = 4);

struct BleuReport {
  BleuScore pitch;
  BleuScore duration;
  BleuScore rest;

  const BleuScore& of(AttributeKind kind) const;
  /// `key = value` lines.
  std::string to_text() const;
  std::string to_json() const;
};

/// Scores the three attribute streams separately.
BleuReport bleu_report(std::span<const std::vector<NoteAttributes>> candidates,
                       std::span<const std::vector<NoteAttributes>> references, int max_n = 4);

/// Each attribute drawn independently per position from its histogram.
std::vector<NoteAttributes> baseline_melody(const AttributeDistribution& dist, std::size_t length,
                                            std::uint64_t seed);

inline constexpr std::size_t kBaselineTopK = 50;

/// Syllables drawn uniformly from the `top_k` most frequent non-reserved tokens.
std::vector<std::string> baseline_lyrics(const Vocabulary& vocab, std::size_t length, std::uint64_t seed,
                                         std::size_t top_k = kBaselineTopK);

/// Greedy-decodes every test lyric and scores against the ground truth.
BleuReport evaluate_model(const LtmnModel& model, std::span<const AlignedSong> testset);

/// Same protocol with baseline_melody in place of the model; song k uses
/// seed + k.
BleuReport evaluate_baseline(const AttributeDistribution& dist, std::span<const AlignedSong> testset,
                             std::uint64_t seed);

}  // namespace ltmn
