#include "ltmn/melody.h"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace ltmn {

namespace {

constexpr const char* kHeadNames[3] = {"pitch", "duration", "rest"};

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  return order;
}

int class_of(const NoteClasses& n, std::size_t head) {
  return head == 0 ? n.pitch : head == 1 ? n.duration : n.rest;
}

struct AttentionRefs {
  const Matrix& v;
  const Matrix& w;
  const Matrix& u;
};

struct AttentionCache {
  Vector query;               // W h~_{t-1}
  std::vector<Vector> hidden;  // tanh(query + U h_j)
  Vector energies;
  Vector alpha;
  Vector context;
};

// `projected[j]` is U h_j, precomputed once per sequence.
AttentionCache attend_cached(const AttentionRefs& a, const Vector& decoder_prev,
                             std::span<const Vector> states, std::span<const Vector> projected) {
  if (states.empty()) throw PreconditionError("attend: no encoder states");
  AttentionCache cache;
  cache.query = a.w * decoder_prev;
  const auto n = static_cast<Eigen::Index>(states.size());
  cache.energies.resize(n);
  cache.hidden.reserve(states.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    cache.hidden.push_back((cache.query + projected[static_cast<std::size_t>(j)]).array().tanh().matrix());
    cache.energies[j] = a.v.col(0).dot(cache.hidden.back());
  }
  cache.alpha = softmax(cache.energies);
  cache.context = Vector::Zero(states.front().size());
  for (Eigen::Index j = 0; j < n; ++j) cache.context += cache.alpha[j] * states[static_cast<std::size_t>(j)];
  return cache;
}

}  // namespace

std::string_view to_string(AttentionMode mode) {
  return mode == AttentionMode::kShared ? "shared" : "per-head";
}

AttentionMode parse_attention_mode(std::string_view name) {
  if (name == "shared") return AttentionMode::kShared;
  if (name == "per-head" || name == "per_head") return AttentionMode::kPerHead;
  throw PreconditionError("unknown attention mode '" + std::string(name) + "' (shared|per-head)");
}

void LtmnConfig::validate() const {
  if (hidden < 1) throw PreconditionError("hidden size must be >= 1");
  if (attention_dim < 1) throw PreconditionError("attention dim must be >= 1");
  if (attr_embed < 1) throw PreconditionError("attribute embedding size must be >= 1");
  if (!(init_scale > 0.0)) throw PreconditionError("init scale must be > 0");
  if (!(schedule.initial > 0.0)) throw PreconditionError("learning rate must be > 0");
  if (schedule.decay_every < 1) throw PreconditionError("decay interval must be >= 1");
  if (epochs < 0) throw PreconditionError("epochs must be >= 0");
  if (batch < 1) throw PreconditionError("batch size must be >= 1");
}

AttentionStep attend(const AttentionParams& params, const Vector& decoder_prev, std::span<const Vector> states) {
  if (states.empty()) throw PreconditionError("attend: no encoder states");
  if (params.w.rows() != params.v.size() || params.u.rows() != params.v.size() ||
      params.w.cols() != decoder_prev.size()) {
    throw ShapeError("attend: attention parameter shapes do not compose");
  }
  std::vector<Vector> projected;
  projected.reserve(states.size());
  for (const Vector& h : states) {
    if (h.size() != params.u.cols()) throw ShapeError("attend: encoder state size mismatch");
    projected.push_back(params.u * h);
  }
  Matrix v = params.v;
  auto cache = attend_cached({v, params.w, params.u}, decoder_prev, states, projected);
  return {std::move(cache.energies), std::move(cache.alpha), std::move(cache.context)};
}

std::string AttentionTrace::to_text() const {
  std::string out;
  for (Eigen::Index r = 0; r < alpha.rows(); ++r) {
    for (Eigen::Index c = 0; c < alpha.cols(); ++c) {
      if (c > 0) out += ' ';
      out += format_number(alpha(r, c));
    }
    out += '\n';
  }
  return out;
}

LtmnModel::LtmnModel(LyricEmbedder embedder, const LtmnConfig& config)
    : embedder_(std::move(embedder)), config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const Eigen::Index h = config_.hidden;
  const Eigen::Index a = config_.attention_dim;
  const Eigen::Index e = config_.attr_embed;
  const double scale = config_.init_scale;

  encoder_ = add_lstm(params_, "enc.lstm", embedder_.dim(), h, rng, scale);

  const std::size_t blocks = config_.attention == AttentionMode::kShared ? 1 : 3;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::string prefix = "att" + std::to_string(b);
    Matrix v(a, 1), w(a, h), u(a, h);
    fill_uniform(v, rng, scale);
    fill_uniform(w, rng, scale);
    fill_uniform(u, rng, scale);
    AttentionSlots slots;
    slots.v = params_.add(prefix + ".v", std::move(v));
    slots.w = params_.add(prefix + ".W", std::move(w));
    slots.u = params_.add(prefix + ".U", std::move(u));
    attention_.push_back(slots);
  }

  // One extra row per table: the learned start-of-melody token.
  for (std::size_t k = 0; k < 3; ++k) {
    Matrix table(class_count(kHeads[k]) + 1, e);
    fill_uniform(table, rng, scale);
    attr_embed_[k] = params_.add(std::string("emb.") + kHeadNames[k], std::move(table));
  }

  for (std::size_t k = 0; k < 3; ++k) {
    std::string prefix = std::string("dec.") + kHeadNames[k];
    HeadSlots& head = heads_[k];
    head.lstm = add_lstm(params_, prefix + ".lstm", 3 * e + h, h, rng, scale);
    Matrix w(class_count(kHeads[k]), h);
    fill_uniform(w, rng, scale);
    head.out_weights = params_.add(prefix + ".out.W", std::move(w));
    head.out_bias = params_.add(prefix + ".out.b", Matrix::Zero(class_count(kHeads[k]), 1));
  }
}

EncoderStates LtmnModel::encode(std::span<const Vector> embeddings) const {
  if (embeddings.empty()) throw PreconditionError("encode: empty input");
  const Eigen::Index h = config_.hidden;
  EncoderStates out;
  Vector hs = Vector::Zero(h), cs = Vector::Zero(h);
  const LstmView lstm = encoder_.view(params_);
  for (const Vector& x : embeddings) {
    if (x.size() != embedder_.dim()) throw ShapeError("encode: embedding dimension mismatch");
    auto cache = lstm_forward(lstm, x, hs, cs);
    hs = cache.h;
    cs = cache.c;
    out.hidden.push_back(hs);
    out.cell.push_back(cs);
  }
  return out;
}

AttentionParams LtmnModel::attention_params(std::size_t block) const {
  const AttentionSlots& s = attention_.at(block);
  return {params_[s.v].col(0), params_[s.w], params_[s.u]};
}

DecoderState LtmnModel::initial_state(const EncoderStates& states) const {
  if (states.size() == 0) throw PreconditionError("initial_state: no encoder states");
  DecoderState state;
  for (auto& head : state.heads) head = {states.hidden.back(), states.cell.back()};
  state.at_start = true;
  return state;
}

std::vector<AttentionStep> LtmnModel::attend_step(const DecoderState& state, const EncoderStates& states) const {
  std::vector<AttentionStep> out;
  for (std::size_t b = 0; b < attention_.size(); ++b) {
    // Block b is driven by head b; in shared mode that is the pitch head.
    out.push_back(attend(attention_params(b), state.heads[b].h, states.hidden));
  }
  return out;
}

Vector LtmnModel::head_input(const ParameterSet& params, const NoteClasses& prev, bool at_start,
                             const Vector& context) const {
  const Eigen::Index e = config_.attr_embed;
  Vector in(3 * e + context.size());
  for (std::size_t k = 0; k < 3; ++k) {
    const Matrix& table = params[attr_embed_[k]];
    const Eigen::Index row = at_start ? table.rows() - 1 : class_of(prev, k);
    in.segment(static_cast<Eigen::Index>(k) * e, e) = table.row(row).transpose();
  }
  in.tail(context.size()) = context;
  return in;
}

DecodeStep LtmnModel::decode_step(const DecoderState& state, std::span<const Vector> contexts) const {
  if (contexts.size() != attention_.size())
    throw ShapeError("decode_step: expected one context per attention block");
  DecodeStep out;
  for (std::size_t k = 0; k < 3; ++k) {
    const Vector& ctx = contexts[block_of_head(k)];
    if (ctx.size() != config_.hidden) throw ShapeError("decode_step: context size mismatch");
    const LstmState& prev = state.heads[k];
    if (prev.h.size() != config_.hidden || prev.c.size() != config_.hidden)
      throw ShapeError("decode_step: decoder state size mismatch");
    Vector x = head_input(params_, state.previous, state.at_start, ctx);
    auto cache = lstm_forward(heads_[k].lstm.view(params_), x, prev.h, prev.c);
    out.logits[k] = params_[heads_[k].out_weights] * cache.h + params_[heads_[k].out_bias].col(0);
    out.next.heads[k] = {std::move(cache.h), std::move(cache.c)};
  }
  out.next.previous = state.previous;
  out.next.at_start = state.at_start;
  return out;
}

double LtmnModel::sequence_loss(const ParameterSet& p, std::span<const Vector> inputs,
                                std::span<const NoteClasses> targets, ParameterSet* grads) const {
  const std::size_t T = inputs.size();
  if (T == 0) throw PreconditionError("sequence_loss: empty input");
  if (targets.size() != T) throw AlignmentError("sequence_loss: one note per syllable required");
  const Eigen::Index H = config_.hidden;
  const Eigen::Index E = config_.attr_embed;
  const std::size_t blocks = attention_.size();

  // Encoder.
  const LstmView enc = encoder_.view(p);
  std::vector<LstmStepCache> enc_cache;
  std::vector<Vector> states;
  enc_cache.reserve(T);
  states.reserve(T);
  {
    Vector hs = Vector::Zero(H), cs = Vector::Zero(H);
    for (std::size_t j = 0; j < T; ++j) {
      enc_cache.push_back(lstm_forward(enc, inputs[j], hs, cs));
      hs = enc_cache.back().h;
      cs = enc_cache.back().c;
      states.push_back(hs);
    }
  }

  std::vector<AttentionRefs> att;
  std::vector<std::vector<Vector>> projected(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    att.push_back({p[attention_[b].v], p[attention_[b].w], p[attention_[b].u]});
    for (const Vector& h : states) projected[b].push_back(att[b].u * h);
  }

  // Decoder, teacher-forced.
  struct Step {
    std::vector<AttentionCache> att;
    std::array<LstmStepCache, 3> lstm;
    std::array<Vector, 3> probs;
    std::array<Vector, 3> h_prev;  // h~_{t-1} per head
    NoteClasses prev;
    bool at_start = false;
  };
  std::vector<Step> steps(T);
  std::array<Vector, 3> hd, cd;
  for (std::size_t k = 0; k < 3; ++k) {
    hd[k] = enc_cache.back().h;
    cd[k] = enc_cache.back().c;
  }
  double loss = 0.0;
  NoteClasses prev{};
  for (std::size_t t = 0; t < T; ++t) {
    Step& s = steps[t];
    s.prev = prev;
    s.at_start = t == 0;
    s.h_prev = hd;
    for (std::size_t b = 0; b < blocks; ++b) s.att.push_back(attend_cached(att[b], hd[b], states, projected[b]));
    for (std::size_t k = 0; k < 3; ++k) {
      Vector x = head_input(p, prev, s.at_start, s.att[block_of_head(k)].context);
      s.lstm[k] = lstm_forward(heads_[k].lstm.view(p), x, hd[k], cd[k]);
      hd[k] = s.lstm[k].h;
      cd[k] = s.lstm[k].c;
      s.probs[k] = softmax(p[heads_[k].out_weights] * hd[k] + p[heads_[k].out_bias].col(0));
      loss += cross_entropy(s.probs[k], class_of(targets[t], k));
    }
    prev = targets[t];
  }
  if (!grads) return loss;

  // Backward through time.
  ParameterSet& g = *grads;
  std::array<Vector, 3> dh_carry, dc_carry;
  for (std::size_t k = 0; k < 3; ++k) {
    dh_carry[k] = Vector::Zero(H);
    dc_carry[k] = Vector::Zero(H);
  }
  std::vector<Vector> d_states(T, Vector::Zero(H));
  std::vector<std::vector<Vector>> d_projected(blocks, std::vector<Vector>(T, Vector::Zero(config_.attention_dim)));

  for (std::size_t t = T; t-- > 0;) {
    Step& s = steps[t];
    std::vector<Vector> d_context(blocks, Vector::Zero(H));
    for (std::size_t k = 0; k < 3; ++k) {
      Vector dlogits = s.probs[k];
      dlogits[class_of(targets[t], k)] -= 1.0;
      g[heads_[k].out_weights].noalias() += dlogits * s.lstm[k].h.transpose();
      g[heads_[k].out_bias].col(0) += dlogits;
      Vector dh = dh_carry[k] + p[heads_[k].out_weights].transpose() * dlogits;
      auto back = lstm_backward(heads_[k].lstm.view(p), s.lstm[k], dh, dc_carry[k], heads_[k].lstm.grads(g));
      dh_carry[k] = std::move(back.dh_prev);
      dc_carry[k] = std::move(back.dc_prev);
      for (std::size_t a = 0; a < 3; ++a) {
        const Matrix& table = p[attr_embed_[a]];
        const Eigen::Index row = s.at_start ? table.rows() - 1 : class_of(s.prev, a);
        g[attr_embed_[a]].row(row) += back.dx.segment(static_cast<Eigen::Index>(a) * E, E).transpose();
      }
      d_context[block_of_head(k)] += back.dx.tail(H);
    }
    for (std::size_t b = 0; b < blocks; ++b) {
      const AttentionCache& c = s.att[b];
      const Vector& dctx = d_context[b];
      const auto n = static_cast<Eigen::Index>(T);
      Vector d_alpha(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        d_alpha[j] = dctx.dot(states[static_cast<std::size_t>(j)]);
        d_states[static_cast<std::size_t>(j)] += c.alpha[j] * dctx;
      }
      const double mean = c.alpha.dot(d_alpha);
      Vector d_query = Vector::Zero(config_.attention_dim);
      const Vector v = att[b].v.col(0);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double de = c.alpha[j] * (d_alpha[j] - mean);
        const Vector& u = c.hidden[static_cast<std::size_t>(j)];
        g[attention_[b].v].col(0) += de * u;
        Vector d_pre = de * v.cwiseProduct((1.0 - u.array().square()).matrix());
        d_query += d_pre;
        d_projected[b][static_cast<std::size_t>(j)] += d_pre;
      }
      g[attention_[b].w].noalias() += d_query * s.h_prev[b].transpose();
      dh_carry[b] += att[b].w.transpose() * d_query;
    }
  }

  // h~_0 and c~_0 of every head are the encoder's final state.
  Vector dc_final = Vector::Zero(H);
  for (std::size_t k = 0; k < 3; ++k) {
    d_states[T - 1] += dh_carry[k];
    dc_final += dc_carry[k];
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t j = 0; j < T; ++j) {
      g[attention_[b].u].noalias() += d_projected[b][j] * states[j].transpose();
      d_states[j].noalias() += att[b].u.transpose() * d_projected[b][j];
    }
  }
  Vector dh_next = Vector::Zero(H), dc_next = dc_final;
  for (std::size_t j = T; j-- > 0;) {
    auto back = lstm_backward(enc, enc_cache[j], d_states[j] + dh_next, dc_next, encoder_.grads(g));
    dh_next = std::move(back.dh_prev);
    dc_next = std::move(back.dc_prev);
  }
  return loss;
}

GeneratedMelody LtmnModel::generate(std::span<const Vector> embeddings, const DecodeMode& mode) const {
  if (embeddings.empty()) throw PreconditionError("generate_melody: empty input");
  if (!mode.greedy && !(mode.tau > 0.0)) throw PreconditionError("temperature must be > 0");
  EncoderStates states = encode(embeddings);
  DecoderState state = initial_state(states);
  const auto T = static_cast<Eigen::Index>(embeddings.size());

  GeneratedMelody out;
  out.trace.alpha = Matrix::Zero(T, T);
  out.trace.energies = Matrix::Zero(T, T);
  Rng rng(mode.seed);
  for (Eigen::Index t = 0; t < T; ++t) {
    auto att = attend_step(state, states);
    std::vector<Vector> contexts;
    for (auto& a : att) contexts.push_back(a.context);
    out.trace.alpha.row(t) = att[0].alpha.transpose();
    out.trace.energies.row(t) = att[0].energies.transpose();
    out.trace.contexts.push_back(att[0].context);

    DecodeStep step = decode_step(state, contexts);
    std::array<int, 3> chosen{};
    for (std::size_t k = 0; k < 3; ++k) {
      if (mode.greedy) {
        chosen[k] = argmax(step.logits[k]);
      } else {
        Vector probs = softmax_with_temperature(step.logits[k], mode.tau);
        chosen[k] = sample_categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), rng);
      }
    }
    NoteClasses classes{chosen[0], chosen[1], chosen[2]};
    out.notes.push_back(from_classes(classes));
    state = std::move(step.next);
    state.previous = classes;
    state.at_start = false;
  }
  return out;
}

GeneratedMelody LtmnModel::generate(const AlignedSong& lyrics, const DecodeMode& mode) const {
  if (lyrics.length() == 0) throw PreconditionError("generate_melody: empty lyrics");
  auto inputs = embedder_.embed_song(lyrics);
  return generate(inputs, mode);
}

ConfigMap LtmnModel::checkpoint_config() const {
  return {{"model", "ltmn"},
          {"scheme", std::string(to_string(embedder_.scheme()))},
          {"input_dim", std::to_string(embedder_.dim())},
          {"hidden", std::to_string(config_.hidden)},
          {"attention_dim", std::to_string(config_.attention_dim)},
          {"attr_embed", std::to_string(config_.attr_embed)},
          {"attention", std::string(to_string(config_.attention))},
          {"init_scale", format_number(config_.init_scale)},
          {"lr", format_number(config_.schedule.initial)},
          {"decay_every", std::to_string(config_.schedule.decay_every)},
          {"epochs", std::to_string(config_.epochs)},
          {"batch", std::to_string(config_.batch)},
          {"seed", std::to_string(config_.seed)}};
}

void LtmnModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, checkpoint_config(), params_);
}

LtmnModel LtmnModel::load(const std::filesystem::path& path, LyricEmbedder embedder) {
  Checkpoint ckpt = load_checkpoint(path);
  auto get = [&](const std::string& key) {
    auto it = ckpt.config.find(key);
    if (it == ckpt.config.end()) throw ParseError(0, key, "missing from checkpoint " + path.string());
    return it->second;
  };
  if (get("model") != "ltmn") throw ParseError(0, "model", path.string() + " is not a melody model");
  if (parse_composition(get("scheme")) != embedder.scheme())
    throw PreconditionError("checkpoint scheme " + get("scheme") + " does not match the embedder");
  if (std::stol(get("input_dim")) != embedder.dim())
    throw PreconditionError("checkpoint input dimension does not match the embedder");
  LtmnConfig config;
  config.hidden = std::stoi(get("hidden"));
  config.attention_dim = std::stoi(get("attention_dim"));
  config.attr_embed = std::stoi(get("attr_embed"));
  config.attention = parse_attention_mode(get("attention"));
  config.init_scale = std::stod(get("init_scale"));
  config.schedule.initial = std::stod(get("lr"));
  config.schedule.decay_every = std::stoi(get("decay_every"));
  config.epochs = std::stoi(get("epochs"));
  config.batch = std::stoi(get("batch"));
  config.seed = std::stoull(get("seed"));
  LtmnModel model(std::move(embedder), config);
  if (!model.params_.same_shapes(ckpt.params))
    throw ParseError(0, "tensors", "checkpoint tensor shapes do not match the model");
  for (std::size_t k = 0; k < ckpt.params.size(); ++k) {
    if (ckpt.params.name(k) != model.params_.name(k))
      throw ParseError(0, "tensors", "unexpected tensor " + ckpt.params.name(k));
  }
  model.params_ = std::move(ckpt.params);
  return model;
}

LtmnTrainingLog train_ltmn(LtmnModel& model, std::span<const AlignedSong> pairs) {
  if (pairs.empty()) throw PreconditionError("train_ltmn: empty training set");
  struct Example {
    std::vector<Vector> inputs;
    std::vector<NoteClasses> targets;
  };
  std::vector<Example> examples;
  examples.reserve(pairs.size());
  for (const AlignedSong& song : pairs) {
    song.check();
    if (song.length() == 0) throw PreconditionError("train_ltmn: empty song");
    Example ex;
    ex.inputs = model.embedder().embed_song(song);
    for (const NoteAttributes& n : song.notes) ex.targets.push_back(to_classes(n));
    examples.push_back(std::move(ex));
  }

  const LtmnConfig& config = model.config();
  Rng rng(config.seed ^ 0x2545f4914f6cdd1dULL);
  AdamState adam = AdamState::for_params(model.params());
  ParameterSet grads = model.params().zeros_like();
  LtmnTrainingLog log;
  log.epoch_loss.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.schedule.at(epoch);
    auto order = shuffled_order(examples.size(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      grads.set_zero();
      double batch_loss = 0.0;
      std::size_t batch_steps = 0;
      for (std::size_t b = start; b < end; ++b) {
        const Example& ex = examples[order[b]];
        batch_loss += model.sequence_loss(model.params(), ex.inputs, ex.targets, &grads);
        batch_steps += ex.targets.size();
      }
      grads.scale(1.0 / static_cast<double>(batch_steps));
      clip_grad_norm(grads, kGradClipNorm);
      adam_step(model.params(), grads, adam, lr);
      epoch_loss += batch_loss;
      epoch_steps += batch_steps;
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_steps));
  }
  return log;
}

double mean_step_loss(const LtmnModel& model, std::span<const AlignedSong> pairs) {
  double loss = 0.0;
  std::size_t steps = 0;
  for (const AlignedSong& song : pairs) {
    song.check();
    auto inputs = model.embedder().embed_song(song);
    std::vector<NoteClasses> targets;
    for (const NoteAttributes& n : song.notes) targets.push_back(to_classes(n));
    loss += model.sequence_loss(model.params(), inputs, targets, nullptr);
    steps += targets.size();
  }
  if (steps == 0) throw PreconditionError("mean_step_loss: no steps");
  return loss / static_cast<double>(steps);
}

GeneratedMelody generate_melody(const LtmnModel& model, const AlignedSong& lyrics, const DecodeMode& mode) {
  return model.generate(lyrics, mode);
}

}  // namespace ltmn
