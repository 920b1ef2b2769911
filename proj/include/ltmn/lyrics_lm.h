#pragma once

// LSTM language model over tagged syllables. Each song is framed as
//   <bos> s_1 ... s_T <eos>
// and trained with teacher forcing to predict s_{t} from s_1..s_{t-1}.
// During generation <eos> doubles as the end-of-line marker.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ltmn/checkpoint.h"
#include "ltmn/lyric2vec.h"
#include "ltmn/neural.h"

namespace ltmn {

struct LmConfig {
  int hidden = 128;
  double init_scale = 0.2;
  LrSchedule schedule{};
  int epochs = 500;
  int batch = 32;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Training progress, one entry per epoch (mean loss per predicted token).
using LossCurve = std::vector<double>;

class LyricsLm {
 public:
  /// Fresh model over `vocab` (tagged syllables) with random weights.
  LyricsLm(LyricEmbedder embedder, Vocabulary vocab, const LmConfig& config);

  const LyricEmbedder& embedder() const noexcept { return embedder_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const LmConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  Eigen::Index hidden() const { return params_[lstm_.recurrent_weights].cols(); }

  /// Input vectors for `<bos> tokens...` (causal word lookup).
  std::vector<Vector> input_vectors(std::span<const TokenId> tokens) const;

  /// Summed cross-entropy of predicting `targets[t]` after reading
  /// `inputs[0..t]`. Gradients are accumulated into `grads` when given.
  double sequence_loss(const ParameterSet& params, std::span<const Vector> inputs,
                       std::span<const TokenId> targets, ParameterSet* grads) const;

  /// One recurrent step with the current weights.
  LstmState step(const Vector& x, const LstmState& state) const;
  Vector output_logits(const Vector& h) const { return logits(params_, h); }

  /// Distribution of the token following `<bos> prefix`.
  Vector next_token_distribution(std::span<const TokenId> prefix, double tau) const;

  /// Teacher-forced argmax accuracy over the songs.
  double teacher_forced_accuracy(std::span<const std::vector<TokenId>> songs) const;

  /// Mean per-token loss over the songs.
  double mean_loss(std::span<const std::vector<TokenId>> songs) const;

  ConfigMap checkpoint_config() const;
  void save(const std::filesystem::path& path) const;
  /// Restores weights saved by save(); the embedder and vocabulary are
  /// supplied by the caller and must match the recorded sizes.
  static LyricsLm load(const std::filesystem::path& path, LyricEmbedder embedder, Vocabulary vocab);

 private:
  struct Slots {
    std::size_t out_weights = 0;
    std::size_t out_bias = 0;
  };

  Vector logits(const ParameterSet& params, const Vector& h) const;

  LyricEmbedder embedder_;
  Vocabulary vocab_;
  LmConfig config_;
  ParameterSet params_;
  LstmSlots lstm_;
  Slots out_;
};

/// Tagged-syllable ids of every song, without framing tokens.
std::vector<std::vector<TokenId>> lm_sequences(std::span<const AlignedSong> songs, const Vocabulary& vocab);

/// Mini-batch Adam with teacher forcing. Returns the per-epoch mean loss.
LossCurve train_lm(LyricsLm& model, std::span<const std::vector<TokenId>> songs);

/// Builds and trains a model; throws on an empty corpus.
LyricsLm train_lm(std::span<const AlignedSong> corpus, const LyricEmbedder& embedder,
                  const LmConfig& config, LossCurve* curve = nullptr);

struct GeneratedLyrics {
  std::vector<TokenId> tokens;          // syllables only, seed first
  std::vector<std::size_t> line_breaks;  // token index where each later line starts
  AlignedSong song;                      // syllables, word and sentence bounds; no notes

  /// Corpus-style text: `|` joins syllables of a word, one line per lyric line.
  std::string text() const;
};

/// Samples continuations from `seed` until `lines` end-of-line tokens have
/// been drawn or `max_len` syllables exist.
GeneratedLyrics generate_lyrics(const LyricsLm& model, std::span<const TokenId> seed, double tau,
                                std::size_t max_len, std::uint64_t rng_seed, int lines = 1);

/// Word -> tagged syllables, as first seen in the corpus.
class Lexicon {
 public:
  explicit Lexicon(std::span<const AlignedSong> songs);
  /// Splits whitespace-separated words into tagged syllables. Words with a
  /// `|` are taken as already syllabified; unknown words stay whole.
  std::vector<std::string> syllabify(std::string_view text) const;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

}  // namespace ltmn
