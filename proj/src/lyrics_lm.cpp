#include "ltmn/lyrics_lm.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace ltmn {

namespace {

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  return order;
}

std::vector<std::string> token_strings(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size() + 1);
  out.emplace_back(Vocabulary::kBosToken);
  for (TokenId id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace

void LmConfig::validate() const {
  if (hidden < 1) throw PreconditionError("hidden size must be >= 1");
  if (!(init_scale > 0.0)) throw PreconditionError("init scale must be > 0");
  if (!(schedule.initial > 0.0)) throw PreconditionError("learning rate must be > 0");
  if (schedule.decay_every < 1) throw PreconditionError("decay interval must be >= 1");
  if (epochs < 0) throw PreconditionError("epochs must be >= 0");
  if (batch < 1) throw PreconditionError("batch size must be >= 1");
}

LyricsLm::LyricsLm(LyricEmbedder embedder, Vocabulary vocab, const LmConfig& config)
    : embedder_(std::move(embedder)), vocab_(std::move(vocab)), config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const Eigen::Index in = embedder_.dim();
  const Eigen::Index h = config_.hidden;
  lstm_ = add_lstm(params_, "lm.lstm", in, h, rng, config_.init_scale);
  Matrix w(static_cast<Eigen::Index>(vocab_.size()), h);
  fill_uniform(w, rng, config_.init_scale);
  out_.out_weights = params_.add("lm.out.W", std::move(w));
  out_.out_bias = params_.add("lm.out.b", Matrix::Zero(static_cast<Eigen::Index>(vocab_.size()), 1));
}

std::vector<Vector> LyricsLm::input_vectors(std::span<const TokenId> tokens) const {
  auto strings = token_strings(vocab_, tokens);
  return embedder_.embed_causal(strings);
}

Vector LyricsLm::logits(const ParameterSet& params, const Vector& h) const {
  return params[out_.out_weights] * h + params[out_.out_bias].col(0);
}

double LyricsLm::sequence_loss(const ParameterSet& params, std::span<const Vector> inputs,
                               std::span<const TokenId> targets, ParameterSet* grads) const {
  if (inputs.size() != targets.size()) throw ShapeError("sequence_loss: inputs and targets differ in length");
  const Eigen::Index h = params[lstm_.recurrent_weights].cols();
  const LstmView lstm = lstm_.view(params);
  const Matrix& wo = params[out_.out_weights];

  std::vector<LstmStepCache> caches;
  std::vector<Vector> probs;
  caches.reserve(inputs.size());
  probs.reserve(inputs.size());
  Vector hs = Vector::Zero(h), cs = Vector::Zero(h);
  double loss = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    caches.push_back(lstm_forward(lstm, inputs[t], hs, cs));
    hs = caches.back().h;
    cs = caches.back().c;
    probs.push_back(softmax(logits(params, hs)));
    loss += cross_entropy(probs.back(), targets[t]);
  }
  if (!grads) return loss;

  Matrix& dwo = (*grads)[out_.out_weights];
  Matrix& dbo = (*grads)[out_.out_bias];
  Vector dh_next = Vector::Zero(h), dc_next = Vector::Zero(h);
  for (std::size_t t = inputs.size(); t-- > 0;) {
    Vector dlogits = probs[t];
    dlogits[targets[t]] -= 1.0;
    dwo.noalias() += dlogits * caches[t].h.transpose();
    dbo.col(0) += dlogits;
    Vector dh = dh_next + wo.transpose() * dlogits;
    auto back = lstm_backward(lstm, caches[t], dh, dc_next, lstm_.grads(*grads));
    dh_next = std::move(back.dh_prev);
    dc_next = std::move(back.dc_prev);
  }
  return loss;
}

LstmState LyricsLm::step(const Vector& x, const LstmState& state) const {
  auto cache = lstm_forward(lstm_.view(params_), x, state.h, state.c);
  return {std::move(cache.h), std::move(cache.c)};
}

Vector LyricsLm::next_token_distribution(std::span<const TokenId> prefix, double tau) const {
  if (!(tau > 0.0)) throw PreconditionError("temperature must be > 0");
  for (TokenId id : prefix) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size())
      throw PreconditionError("unknown token id " + std::to_string(id));
  }
  auto inputs = input_vectors(prefix);
  const Eigen::Index h = hidden();
  LstmState state{Vector::Zero(h), Vector::Zero(h)};
  for (const Vector& x : inputs) state = step(x, state);
  return softmax_with_temperature(logits(params_, state.h), tau);
}

double LyricsLm::teacher_forced_accuracy(std::span<const std::vector<TokenId>> songs) const {
  std::size_t correct = 0, total = 0;
  const LstmView lstm = lstm_.view(params_);
  for (const auto& song : songs) {
    auto inputs = input_vectors(song);
    Vector h = Vector::Zero(hidden()), c = Vector::Zero(hidden());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      auto cache = lstm_forward(lstm, inputs[t], h, c);
      h = cache.h;
      c = cache.c;
      TokenId target = t < song.size() ? song[t] : Vocabulary::kEos;
      correct += argmax(logits(params_, h)) == target ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double LyricsLm::mean_loss(std::span<const std::vector<TokenId>> songs) const {
  double loss = 0.0;
  std::size_t tokens = 0;
  for (const auto& song : songs) {
    auto inputs = input_vectors(song);
    std::vector<TokenId> targets(song.begin(), song.end());
    targets.push_back(Vocabulary::kEos);
    loss += sequence_loss(params_, inputs, targets, nullptr);
    tokens += targets.size();
  }
  return tokens == 0 ? 0.0 : loss / static_cast<double>(tokens);
}

ConfigMap LyricsLm::checkpoint_config() const {
  return {{"model", "lyrics_lm"},
          {"scheme", std::string(to_string(embedder_.scheme()))},
          {"input_dim", std::to_string(embedder_.dim())},
          {"hidden", std::to_string(config_.hidden)},
          {"vocab_size", std::to_string(vocab_.size())},
          {"init_scale", format_number(config_.init_scale)},
          {"lr", format_number(config_.schedule.initial)},
          {"decay_every", std::to_string(config_.schedule.decay_every)},
          {"epochs", std::to_string(config_.epochs)},
          {"batch", std::to_string(config_.batch)},
          {"seed", std::to_string(config_.seed)}};
}

void LyricsLm::save(const std::filesystem::path& path) const {
  save_checkpoint(path, checkpoint_config(), params_);
}

LyricsLm LyricsLm::load(const std::filesystem::path& path, LyricEmbedder embedder, Vocabulary vocab) {
  Checkpoint ckpt = load_checkpoint(path);
  auto get = [&](const std::string& key) {
    auto it = ckpt.config.find(key);
    if (it == ckpt.config.end()) throw ParseError(0, key, "missing from checkpoint " + path.string());
    return it->second;
  };
  if (get("model") != "lyrics_lm") throw ParseError(0, "model", path.string() + " is not a lyrics model");
  if (parse_composition(get("scheme")) != embedder.scheme())
    throw PreconditionError("checkpoint scheme " + get("scheme") + " does not match the embedder");
  if (std::stoul(get("vocab_size")) != vocab.size())
    throw PreconditionError("checkpoint vocabulary size does not match");
  if (std::stol(get("input_dim")) != embedder.dim())
    throw PreconditionError("checkpoint input dimension does not match the embedder");
  LmConfig config;
  config.hidden = std::stoi(get("hidden"));
  config.init_scale = std::stod(get("init_scale"));
  config.schedule.initial = std::stod(get("lr"));
  config.schedule.decay_every = std::stoi(get("decay_every"));
  config.epochs = std::stoi(get("epochs"));
  config.batch = std::stoi(get("batch"));
  config.seed = std::stoull(get("seed"));
  LyricsLm model(std::move(embedder), std::move(vocab), config);
  if (!model.params_.same_shapes(ckpt.params))
    throw ParseError(0, "tensors", "checkpoint tensor shapes do not match the model");
  for (std::size_t k = 0; k < ckpt.params.size(); ++k) {
    if (ckpt.params.name(k) != model.params_.name(k))
      throw ParseError(0, "tensors", "unexpected tensor " + ckpt.params.name(k));
  }
  model.params_ = std::move(ckpt.params);
  return model;
}

std::vector<std::vector<TokenId>> lm_sequences(std::span<const AlignedSong> songs, const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(songs.size());
  for (const AlignedSong& song : songs) {
    auto tokens = song_tokens(song, TokenLevel::kTaggedSyllable);
    out.push_back(vocab.encode(tokens));
  }
  return out;
}

LossCurve train_lm(LyricsLm& model, std::span<const std::vector<TokenId>> songs) {
  if (songs.empty()) throw PreconditionError("train_lm: empty corpus");
  const LmConfig& config = model.config();

  struct Example {
    std::vector<Vector> inputs;
    std::vector<TokenId> targets;
  };
  std::vector<Example> examples;
  examples.reserve(songs.size());
  for (const auto& song : songs) {
    Example ex;
    ex.inputs = model.input_vectors(song);
    ex.targets.assign(song.begin(), song.end());
    ex.targets.push_back(Vocabulary::kEos);
    examples.push_back(std::move(ex));
  }

  Rng rng(config.seed ^ 0x5851f42d4c957f2dULL);
  AdamState adam = AdamState::for_params(model.params());
  ParameterSet grads = model.params().zeros_like();
  LossCurve curve;
  curve.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.schedule.at(epoch);
    auto order = shuffled_order(examples.size(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      grads.set_zero();
      double batch_loss = 0.0;
      std::size_t batch_tokens = 0;
      for (std::size_t b = start; b < end; ++b) {
        const Example& ex = examples[order[b]];
        batch_loss += model.sequence_loss(model.params(), ex.inputs, ex.targets, &grads);
        batch_tokens += ex.targets.size();
      }
      grads.scale(1.0 / static_cast<double>(batch_tokens));
      clip_grad_norm(grads, kGradClipNorm);
      adam_step(model.params(), grads, adam, lr);
      epoch_loss += batch_loss;
      epoch_tokens += batch_tokens;
    }
    curve.push_back(epoch_loss / static_cast<double>(epoch_tokens));
  }
  return curve;
}

LyricsLm train_lm(std::span<const AlignedSong> corpus, const LyricEmbedder& embedder, const LmConfig& config,
                  LossCurve* curve) {
  if (corpus.empty()) throw PreconditionError("train_lm: empty corpus");
  Vocabulary vocab = build_vocab(corpus, TokenLevel::kTaggedSyllable, 1);
  LyricsLm model(embedder, std::move(vocab), config);
  auto sequences = lm_sequences(corpus, model.vocab());
  LossCurve c = train_lm(model, sequences);
  if (curve) *curve = std::move(c);
  return model;
}

std::string GeneratedLyrics::text() const {
  std::string out;
  for (std::size_t line = 0; line < song.sentence_bounds.size(); ++line) {
    const Span& sentence = song.sentence_bounds[line];
    bool first_word = true;
    for (const Span& word : song.word_bounds) {
      if (word.begin < sentence.begin || word.end > sentence.end) continue;
      if (!first_word) out += ' ';
      first_word = false;
      for (std::size_t s = word.begin; s < word.end; ++s) {
        if (s > word.begin) out += kJoinMarker;
        out += song.syllables[s];
      }
    }
    out += '\n';
  }
  return out;
}

GeneratedLyrics generate_lyrics(const LyricsLm& model, std::span<const TokenId> seed, double tau,
                                std::size_t max_len, std::uint64_t rng_seed, int lines) {
  if (seed.empty()) throw PreconditionError("generate_lyrics: empty seed");
  if (max_len < seed.size()) throw PreconditionError("generate_lyrics: max_len is shorter than the seed");
  if (lines < 1) throw PreconditionError("generate_lyrics: lines must be >= 1");
  if (!(tau > 0.0)) throw PreconditionError("temperature must be > 0");
  const Vocabulary& vocab = model.vocab();
  for (TokenId id : seed) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
      throw PreconditionError("unknown token id " + std::to_string(id));
  }

  GeneratedLyrics out;
  out.tokens.assign(seed.begin(), seed.end());

  const Eigen::Index h = model.hidden();
  Rng rng(rng_seed);
  LstmState state{Vector::Zero(h), Vector::Zero(h)};
  std::string pending;
  auto feed = [&](std::string_view token) {
    state = model.step(model.embedder().embed_next(token, pending), state);
  };
  feed(Vocabulary::kBosToken);
  for (TokenId id : seed) feed(vocab.token(id));

  int lines_done = 0;
  while (out.tokens.size() < max_len) {
    Vector probs = softmax_with_temperature(model.output_logits(state.h), tau);
    probs[Vocabulary::kBos] = 0.0;
    auto next = static_cast<TokenId>(
        sample_categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), rng));
    if (next == Vocabulary::kEos) {
      if (++lines_done >= lines) break;
      out.line_breaks.push_back(out.tokens.size());
      feed(Vocabulary::kEosToken);
      continue;
    }
    out.tokens.push_back(next);
    feed(vocab.token(next));
  }

  std::vector<std::string> tagged;
  tagged.reserve(out.tokens.size());
  for (TokenId id : out.tokens) tagged.push_back(vocab.token(id));
  // A break at the very end (no syllables after it) does not open a new line.
  while (!out.line_breaks.empty() && out.line_breaks.back() >= out.tokens.size()) out.line_breaks.pop_back();
  out.song = song_from_tagged(tagged, out.line_breaks);
  return out;
}

Lexicon::Lexicon(std::span<const AlignedSong> songs) {
  for (const AlignedSong& song : songs) {
    auto tagged = song_tokens(song, TokenLevel::kTaggedSyllable);
    for (std::size_t w = 0; w < song.word_bounds.size(); ++w) {
      const Span& span = song.word_bounds[w];
      entries_.try_emplace(song.word(w), tagged.begin() + static_cast<std::ptrdiff_t>(span.begin),
                           tagged.begin() + static_cast<std::ptrdiff_t>(span.end));
    }
  }
}

std::vector<std::string> Lexicon::syllabify(std::string_view text) const {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string word(text.substr(i, j - i));
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    i = j;
    if (word.find(kJoinMarker) != std::string::npos) {
      std::size_t start = 0;
      while (true) {
        auto bar = word.find(kJoinMarker, start);
        if (bar == std::string::npos) {
          if (start < word.size()) out.push_back(word.substr(start));
          break;
        }
        if (bar > start) out.push_back(word.substr(start, bar - start + 1));
        start = bar + 1;
      }
      continue;
    }
    auto it = entries_.find(word);
    if (it != entries_.end()) {
      out.insert(out.end(), it->second.begin(), it->second.end());
    } else {
      out.push_back(word);
    }
  }
  return out;
}

}  // namespace ltmn
