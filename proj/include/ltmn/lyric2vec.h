#pragma once

// Skip-gram embeddings over syllable and word streams, and the four ways of
// composing a syllable vector with the vector of its word.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ltmn/neural.h"
#include "ltmn/vocabulary.h"

namespace ltmn {

/// SE: syllable only. SWC: syllable ++ word. ASW: syllable + word.
/// CSWP: syllable ++ word ++ projection of syllable onto word.
enum class Composition { kSE, kSWC, kASW, kCSWP };

inline constexpr Composition kAllCompositions[] = {Composition::kSE, Composition::kSWC,
                                                   Composition::kASW, Composition::kCSWP};

std::string_view to_string(Composition scheme);
Composition parse_composition(std::string_view name);
Eigen::Index composed_dim(Composition scheme, Eigen::Index dim);

struct SkipgramConfig {
  int window = 7;
  int dim = 50;
  int negatives = 5;
  double alpha = 0.75;
  double lr_start = 0.03;
  double lr_end = 0.0007;
  int epochs = 5;
  std::uint64_t seed = 1;

  /// Throws PreconditionError on out-of-range fields.
  void validate() const;
};

/// Rows are tokens of the level's vocabulary. `input` rows are the published
/// embeddings; `output` rows are the context vectors used during training.
struct EmbeddingTable {
  TokenLevel level = TokenLevel::kSyllable;
  Matrix input;
  Matrix output;

  Eigen::Index dim() const { return input.cols(); }
  Eigen::Index size() const { return input.rows(); }
  Vector vector(TokenId id) const;

  /// First line `<|V|> <v>`, then `token v_1 ... v_v` per row.
  void save(const std::filesystem::path& path, const Vocabulary& vocab) const;
  std::string to_text(const Vocabulary& vocab) const;
  /// Loads input vectors; token order must match `vocab`.
  static EmbeddingTable load(const std::filesystem::path& path, const Vocabulary& vocab,
                             TokenLevel level);
  static EmbeddingTable from_text(std::string_view text, const Vocabulary& vocab, TokenLevel level);
};

/// P(i) proportional to count(i)^alpha.
std::vector<double> negative_sampling_distribution(const Vocabulary& vocab, double alpha);

/// Every (center, context) pair within `window` positions.
std::vector<std::pair<TokenId, TokenId>> skipgram_pairs(std::span<const TokenId> tokens, int window);

/// Negative-sampling loss for one pair,
///   -log sigmoid(u_ctx . v_center) - sum_k log sigmoid(-u_neg_k . v_center),
/// with gradients accumulated into `d_input` / `d_output` when given.
double skipgram_pair_loss(const Matrix& input, const Matrix& output, TokenId center,
                          TokenId context, std::span<const TokenId> negatives,
                          Matrix* d_input = nullptr, Matrix* d_output = nullptr);

/// Mean of the negated pair loss over probes (higher is better).
/// `negatives` holds `k` ids per probe, laid out probe-major.
double negative_sampling_objective(const EmbeddingTable& table,
                                   std::span<const std::pair<TokenId, TokenId>> probes,
                                   std::span<const TokenId> negatives, int k);

/// Initial table: input uniform in [-0.5/v, 0.5/v], output zero.
EmbeddingTable init_embedding_table(const Vocabulary& vocab, const SkipgramConfig& config,
                                    TokenLevel level);

/// Single-threaded SGD with negative sampling and a learning rate decayed
/// linearly per processed token from lr_start to lr_end.
EmbeddingTable train_skipgram(std::span<const TokenId> tokens, const Vocabulary& vocab,
                              const SkipgramConfig& config,
                              TokenLevel level = TokenLevel::kSyllable);

/// (s . w / |w|^2) w.
Vector project(const Vector& s, const Vector& w);
Vector compose(Composition scheme, const Vector& s, const Vector& w);

double cosine_similarity(const Vector& a, const Vector& b);

/// Maps syllables (and the words they belong to) to composed vectors.
/// A word missing from the word vocabulary falls back to the syllable
/// vector in the word slot.
class LyricEmbedder {
 public:
  LyricEmbedder(Composition scheme, Vocabulary syllable_vocab, EmbeddingTable syllable_table,
                Vocabulary word_vocab, EmbeddingTable word_table);

  Composition scheme() const noexcept { return scheme_; }
  Eigen::Index dim() const { return composed_dim(scheme_, syllable_table_.dim()); }
  const Vocabulary& syllable_vocab() const noexcept { return syllable_vocab_; }
  const Vocabulary& word_vocab() const noexcept { return word_vocab_; }
  const EmbeddingTable& syllable_table() const noexcept { return syllable_table_; }
  const EmbeddingTable& word_table() const noexcept { return word_table_; }

  /// `word` empty means the word is not known yet.
  Vector embed(std::string_view syllable, std::optional<std::string_view> word) const;
  /// Reserved-token vector (<bos>, <eos>, <unk>) from both tables.
  Vector embed_special(TokenId id) const;

  /// One vector per syllable using complete words.
  std::vector<Vector> embed_song(const AlignedSong& song) const;

  /// Left-to-right embedding of tagged syllables (and reserved tokens). A
  /// syllable that continues its word has no word yet and uses the fallback;
  /// a word-final syllable uses the word assembled so far.
  std::vector<Vector> embed_causal(std::span<const std::string> tagged) const;
  /// One step of embed_causal; `pending` carries the unfinished word.
  Vector embed_next(std::string_view tagged, std::string& pending) const;

 private:
  Vector syllable_vector(std::string_view syllable) const;

  Composition scheme_;
  Vocabulary syllable_vocab_;
  EmbeddingTable syllable_table_;
  Vocabulary word_vocab_;
  EmbeddingTable word_table_;
};

}  // namespace ltmn
