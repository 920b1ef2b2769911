#pragma once

// Attention encoder-decoder from syllables to (pitch, duration, rest).
//
// A left-to-right LSTM encodes the composed syllable embeddings into
// h_1..h_T. Three decoder LSTMs (pitch, duration, rest) advance in lockstep,
// one step per syllable. At step t each head reads
//   [E_pitch(m_{t-1}) ; E_duration(m_{t-1}) ; E_rest(m_{t-1}) ; c_t]
// where c_t = sum_j alpha_tj h_j and
//   alpha_t = softmax_j( v^T tanh(W h~_{t-1} + U h_j) ).
// In shared mode one attention block, driven by the pitch head's previous
// state, feeds all heads; in per-head mode every head has its own block.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltmn/checkpoint.h"
#include "ltmn/corpus.h"
#include "ltmn/lyric2vec.h"
#include "ltmn/neural.h"

namespace ltmn {

enum class AttentionMode { kShared, kPerHead };

std::string_view to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view name);

struct LtmnConfig {
  int hidden = 128;
  int attention_dim = 128;
  int attr_embed = 128;
  AttentionMode attention = AttentionMode::kShared;
  double init_scale = 0.4;
  LrSchedule schedule{};
  int epochs = 2000;
  int batch = 32;
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr std::array<AttributeKind, 3> kHeads = {AttributeKind::kPitch, AttributeKind::kDuration,
                                                        AttributeKind::kRest};

struct EncoderStates {
  std::vector<Vector> hidden;
  std::vector<Vector> cell;

  std::size_t size() const noexcept { return hidden.size(); }
};

/// Additive alignment weights: v (A), W (A x H) on the decoder state and
/// U (A x H) on encoder states.
struct AttentionParams {
  Vector v;
  Matrix w;
  Matrix u;
};

struct AttentionStep {
  Vector energies;
  Vector alpha;
  Vector context;
};

AttentionStep attend(const AttentionParams& params, const Vector& decoder_prev,
                     std::span<const Vector> states);

/// Alignment weights for every decoder step (rows) over encoder positions.
struct AttentionTrace {
  Matrix alpha;
  Matrix energies;
  std::vector<Vector> contexts;

  /// One row of alpha per line, space-separated.
  std::string to_text() const;
};

struct DecoderState {
  std::array<LstmState, 3> heads;
  NoteClasses previous;
  bool at_start = true;
};

struct DecodeStep {
  std::array<Vector, 3> logits;
  DecoderState next;
};

struct DecodeMode {
  bool greedy = true;
  double tau = 1.0;
  std::uint64_t seed = 1;

  static DecodeMode Greedy() { return {}; }
  static DecodeMode Sample(double tau, std::uint64_t seed) { return {false, tau, seed}; }
};

struct GeneratedMelody {
  std::vector<NoteAttributes> notes;
  AttentionTrace trace;
};

/// Learnable parameters of the melody generator together with the frozen
/// lyric embedder they read from.
class LtmnModel {
 public:
  LtmnModel(LyricEmbedder embedder, const LtmnConfig& config);

  const LyricEmbedder& embedder() const noexcept { return embedder_; }
  const LtmnConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  std::size_t attention_blocks() const noexcept { return attention_.size(); }

  EncoderStates encode(std::span<const Vector> embeddings) const;
  AttentionParams attention_params(std::size_t block = 0) const;
  DecoderState initial_state(const EncoderStates& states) const;

  /// Context vector(s) for the next step: one per attention block.
  std::vector<AttentionStep> attend_step(const DecoderState& state, const EncoderStates& states) const;
  /// Advances all three heads given one context per attention block.
  DecodeStep decode_step(const DecoderState& state, std::span<const Vector> contexts) const;

  /// Summed cross-entropy of the three heads over all steps, teacher-forced.
  double sequence_loss(const ParameterSet& params, std::span<const Vector> inputs,
                       std::span<const NoteClasses> targets, ParameterSet* grads) const;

  GeneratedMelody generate(std::span<const Vector> embeddings, const DecodeMode& mode) const;
  GeneratedMelody generate(const AlignedSong& lyrics, const DecodeMode& mode) const;

  ConfigMap checkpoint_config() const;
  void save(const std::filesystem::path& path) const;
  static LtmnModel load(const std::filesystem::path& path, LyricEmbedder embedder);

 private:
  struct HeadSlots {
    LstmSlots lstm;
    std::size_t out_weights = 0;
    std::size_t out_bias = 0;
  };
  struct AttentionSlots {
    std::size_t v = 0;
    std::size_t w = 0;
    std::size_t u = 0;
  };

  std::size_t block_of_head(std::size_t head) const {
    return config_.attention == AttentionMode::kShared ? 0 : head;
  }
  Vector head_input(const ParameterSet& params, const NoteClasses& prev, bool at_start,
                    const Vector& context) const;

  LyricEmbedder embedder_;
  LtmnConfig config_;
  ParameterSet params_;
  LstmSlots encoder_;
  std::vector<AttentionSlots> attention_;
  std::array<std::size_t, 3> attr_embed_{};
  std::array<HeadSlots, 3> heads_{};
};

/// Per-step loss summary of one training run.
struct LtmnTrainingLog {
  std::vector<double> epoch_loss;  // mean summed head loss per decoder step
};

/// Checks every pair before training starts; Adam on mini-batches with
/// gradient clipping and the stepwise learning-rate schedule.
LtmnTrainingLog train_ltmn(LtmnModel& model, std::span<const AlignedSong> pairs);

/// Mean per-step loss (pitch + duration + rest cross-entropy).
double mean_step_loss(const LtmnModel& model, std::span<const AlignedSong> pairs);

/// Generates a melody for the lyrics of `lyrics`.
GeneratedMelody generate_melody(const LtmnModel& model, const AlignedSong& lyrics, const DecodeMode& mode);

}  // namespace ltmn
