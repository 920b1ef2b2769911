#include "doctest.h"

#include <cmath>
#include <random>

#include "ltmn/melody.h"
#include "support.h"

using namespace ltmn;

namespace {

std::vector<AlignedSong> micro_songs() {
  return parse_corpus_text("la mi|do : 60/1/0 62/0.5/0.5 64/2/0\nla : 61/1/0\n");
}

LtmnModel micro_model(AttentionMode mode, double init_scale = 0.8, std::uint64_t seed = 2) {
  auto songs = micro_songs();
  LtmnConfig config;
  config.hidden = 4;
  config.attention_dim = 3;
  config.attr_embed = 2;
  config.attention = mode;
  config.init_scale = init_scale;
  return LtmnModel(testing::random_embedder(songs, Composition::kSWC, 2, seed, 1.0), config);
}

Objective micro_objective(const LtmnModel& model) {
  auto song = micro_songs()[0];
  auto inputs = model.embedder().embed_song(song);
  std::vector<NoteClasses> targets;
  for (const auto& n : song.notes) targets.push_back(to_classes(n));
  return [&model, inputs, targets](const ParameterSet& p, ParameterSet* g) {
    return model.sequence_loss(p, inputs, targets, g);
  };
}

double micro_grad_error(const LtmnModel& model, const std::string& prefix) {
  return grad_check_report(micro_objective(model), model.params(), 1e-4,
                           [&](std::string_view name) { return name.rfind(prefix, 0) == 0; })
      .max_relative_error;
}

}  // namespace

TEST_CASE("micro model sizes") {
  auto model = micro_model(AttentionMode::kShared);
  CHECK(model.embedder().syllable_vocab().size() <= 6);
  CHECK(model.attention_blocks() == 1);
  CHECK(micro_model(AttentionMode::kPerHead).attention_blocks() == 3);
  CHECK(model.params().at("emb.pitch").rows() == 129);
  CHECK(model.params().at("emb.duration").rows() == 12);
  CHECK(model.params().at("emb.rest").rows() == 13);
  CHECK(model.params().at("dec.pitch.out.W").rows() == 128);
  CHECK(model.params().at("dec.duration.out.W").rows() == 11);
  CHECK(model.params().at("dec.rest.out.W").rows() == 12);
}

TEST_CASE("gradients of every sub-network match finite differences") {
  for (AttentionMode mode : {AttentionMode::kShared, AttentionMode::kPerHead}) {
    auto model = micro_model(mode);
    for (const std::string prefix : {"enc.", "att", "emb.", "dec.pitch.", "dec.duration.", "dec.rest."}) {
      CAPTURE(prefix);
      CAPTURE(to_string(mode));
      CHECK(micro_grad_error(model, prefix) <= 1e-4);
    }
  }
}

TEST_CASE("gradients hold entry by entry across seeds") {
  for (std::uint64_t seed = 1; seed <= 9; ++seed) {
    for (AttentionMode mode : {AttentionMode::kShared, AttentionMode::kPerHead}) {
      auto model = micro_model(mode, 0.8, seed);
      CAPTURE(seed);
      CHECK(testing::gradient_violations(micro_objective(model), model.params(), 1e-4, 1e-4, 1e-9) == 0);
    }
  }
}

TEST_CASE("attention invariants") {
  std::mt19937_64 rng(17);
  AttentionParams params{testing::random_vector(rng, 4), Matrix::Random(4, 3), Matrix::Random(4, 3)};
  std::vector<Vector> states;
  for (int j = 0; j < 3; ++j) states.push_back(testing::random_vector(rng, 3));
  Vector prev = testing::random_vector(rng, 3);
  AttentionStep step = attend(params, prev, states);

  // Independent evaluation of the additive score, softmax and weighted sum.
  std::vector<double> e(3);
  double z = 0;
  for (int j = 0; j < 3; ++j) {
    double s = 0;
    for (int a = 0; a < 4; ++a) {
      double pre = 0;
      for (int k = 0; k < 3; ++k) pre += params.w(a, k) * prev[k] + params.u(a, k) * states[j][k];
      s += params.v[a] * std::tanh(pre);
    }
    e[j] = s;
  }
  const double m = *std::max_element(e.begin(), e.end());
  for (double x : e) z += std::exp(x - m);
  Vector ctx = Vector::Zero(3);
  for (int j = 0; j < 3; ++j) {
    const double alpha = std::exp(e[j] - m) / z;
    CHECK(step.energies[j] == doctest::Approx(e[j]).epsilon(1e-12));
    CHECK(step.alpha[j] == doctest::Approx(alpha).epsilon(1e-12));
    ctx += alpha * states[j];
  }
  CHECK((step.context - ctx).cwiseAbs().maxCoeff() <= 1e-12);
  for (Eigen::Index k = 0; k < 3; ++k) {
    double lo = 1e9, hi = -1e9;
    for (const auto& h : states) {
      lo = std::min(lo, h[k]);
      hi = std::max(hi, h[k]);
    }
    CHECK(step.context[k] >= lo - 1e-12);
    CHECK(step.context[k] <= hi + 1e-12);
  }

  AttentionParams flat = params;
  flat.v.setZero();
  AttentionStep uniform = attend(flat, prev, states);
  for (int j = 0; j < 3; ++j) CHECK(uniform.alpha[j] == 1.0 / 3.0);

  std::vector<Vector> one{states[0]};
  AttentionStep single = attend(params, prev, one);
  CHECK(single.alpha.size() == 1);
  CHECK(single.alpha[0] == 1.0);
  CHECK(single.context == states[0]);

  std::vector<Vector> none;
  CHECK_THROWS_AS(attend(params, prev, none), PreconditionError);
  CHECK_THROWS_AS(attend(params, Vector::Zero(2), states), ShapeError);
}

TEST_CASE("encoder") {
  auto model = micro_model(AttentionMode::kShared);
  std::vector<Vector> one{Vector::Constant(4, 0.3)};
  CHECK(model.encode(one).size() == 1);
  std::vector<Vector> three(3, Vector::Constant(4, 0.2));
  auto a = model.encode(three);
  auto b = model.encode(three);
  CHECK(a.hidden == b.hidden);
  std::vector<Vector> wrong{Vector::Zero(5)};
  CHECK_THROWS_AS(model.encode(wrong), ShapeError);
  std::vector<Vector> empty;
  CHECK_THROWS_AS(model.encode(empty), PreconditionError);

  model.params().set_zero();
  std::vector<Vector> zeros(3, Vector::Zero(4));
  for (const auto& h : model.encode(zeros).hidden) CHECK(h.isZero(0.0));
}

TEST_CASE("decode step widths and validation") {
  auto model = micro_model(AttentionMode::kShared);
  std::vector<Vector> inputs(2, Vector::Constant(4, 0.1));
  auto states = model.encode(inputs);
  auto state = model.initial_state(states);
  for (const auto& head : state.heads) CHECK(head.h == states.hidden.back());
  auto att = model.attend_step(state, states);
  REQUIRE(att.size() == 1);
  std::vector<Vector> ctx{att[0].context};
  auto step = model.decode_step(state, ctx);
  CHECK(step.logits[0].size() == 128);
  CHECK(step.logits[1].size() == 11);
  CHECK(step.logits[2].size() == 12);
  for (const auto& l : step.logits) CHECK(std::abs(softmax(l).sum() - 1.0) <= 1e-9);
  std::vector<Vector> bad{Vector::Zero(3)};
  CHECK_THROWS_AS(model.decode_step(state, bad), ShapeError);
  std::vector<Vector> two{att[0].context, att[0].context};
  CHECK_THROWS_AS(model.decode_step(state, two), ShapeError);
}

TEST_CASE("generation aligns with the lyrics") {
  auto songs = parse_corpus(testing::toy_corpus_path());
  LtmnConfig config;
  config.hidden = 16;
  config.attention_dim = 8;
  config.attr_embed = 4;
  LtmnModel model(testing::random_embedder(songs, Composition::kCSWP, 4, 1), config);
  for (const auto& song : songs) {
    auto greedy = model.generate(song, DecodeMode::Greedy());
    CHECK(greedy.notes.size() == song.length());
    CHECK(greedy.trace.alpha.rows() == static_cast<Eigen::Index>(song.length()));
    for (Eigen::Index r = 0; r < greedy.trace.alpha.rows(); ++r)
      CHECK(std::abs(greedy.trace.alpha.row(r).sum() - 1.0) <= 1e-9);
    for (const auto& n : greedy.notes) CHECK_NOTHROW(validate_attributes(n.pitch, n.duration, n.rest));
    CHECK(model.generate(song, DecodeMode::Greedy()).notes == greedy.notes);
    auto s1 = model.generate(song, DecodeMode::Sample(0.8, 3));
    auto s2 = model.generate(song, DecodeMode::Sample(0.8, 3));
    CHECK(s1.notes == s2.notes);
  }
  auto four = parse_corpus_text("a b c d : 60/1/0 60/1/0 60/1/0 60/1/0\n")[0];
  CHECK(model.generate(four, DecodeMode::Greedy()).notes.size() == 4);
  AlignedSong empty;
  CHECK_THROWS_AS(model.generate(empty, DecodeMode::Greedy()), PreconditionError);
  CHECK_THROWS_AS(model.generate(four, DecodeMode::Sample(0.0, 1)), PreconditionError);
  CHECK(model.generate(four, DecodeMode::Greedy()).trace.to_text().find('\n') != std::string::npos);
}

TEST_CASE("initial loss is the uniform-prediction entropy") {
  auto songs = parse_corpus(testing::toy_corpus_path());
  LtmnConfig config;
  config.init_scale = 0.001;
  LtmnModel model(testing::random_embedder(songs, Composition::kSE, 8, 1), config);
  const double uniform = std::log(128.0) + std::log(11.0) + std::log(12.0);
  CHECK(mean_step_loss(model, songs) == doctest::Approx(uniform).epsilon(1e-3));
}

TEST_CASE("one small Adam step lowers the batch loss") {
  auto model = micro_model(AttentionMode::kShared, 0.3);
  auto song = micro_songs()[0];
  auto inputs = model.embedder().embed_song(song);
  std::vector<NoteClasses> targets;
  for (const auto& n : song.notes) targets.push_back(to_classes(n));
  ParameterSet grads = model.params().zeros_like();
  const double before = model.sequence_loss(model.params(), inputs, targets, &grads);
  AdamState adam = AdamState::for_params(model.params());
  adam_step(model.params(), grads, adam, 1e-4);
  CHECK(model.sequence_loss(model.params(), inputs, targets, nullptr) < before);
}

TEST_CASE("training validates pairs first and is deterministic") {
  auto songs = parse_corpus(testing::toy_corpus_path());
  LtmnConfig config;
  config.hidden = 12;
  config.attention_dim = 6;
  config.attr_embed = 4;
  config.epochs = 3;
  config.batch = 2;
  auto emb = testing::random_embedder(songs, Composition::kASW, 4, 1);
  LtmnModel a(emb, config), b(emb, config);
  auto la = train_ltmn(a, songs);
  auto lb = train_ltmn(b, songs);
  CHECK(la.epoch_loss.size() == 3);
  CHECK(la.epoch_loss == lb.epoch_loss);
  CHECK(a.params() == b.params());

  auto broken = songs;
  broken[3].notes.pop_back();
  LtmnModel c(emb, config);
  const ParameterSet before = c.params();
  CHECK_THROWS_AS(train_ltmn(c, broken), AlignmentError);
  CHECK(c.params() == before);

  std::vector<AlignedSong> none;
  CHECK_THROWS_AS(train_ltmn(c, none), PreconditionError);
  CHECK(LtmnConfig{}.batch == 32);
  CHECK(LtmnConfig{}.hidden == 128);
  CHECK(LtmnConfig{}.attr_embed == 128);
}

TEST_CASE("checkpoint round trip") {
  auto model = micro_model(AttentionMode::kPerHead);
  auto dir = testing::scratch_dir("melody");
  model.save(dir / "m.ckpt");
  auto loaded = LtmnModel::load(dir / "m.ckpt", model.embedder());
  CHECK(loaded.params() == model.params());
  CHECK(loaded.config().attention == AttentionMode::kPerHead);
  auto song = micro_songs()[0];
  CHECK(loaded.generate(song, DecodeMode::Greedy()).notes == model.generate(song, DecodeMode::Greedy()).notes);
  auto other = testing::random_embedder(micro_songs(), Composition::kSE, 2, 9);
  CHECK_THROWS(LtmnModel::load(dir / "m.ckpt", other));
  CHECK_THROWS_AS(LtmnModel::load(dir / "absent.ckpt", model.embedder()), MissingArtifactError);
}

TEST_CASE("configuration is validated") {
  auto songs = micro_songs();
  auto emb = testing::random_embedder(songs, Composition::kSE, 2, 1);
  LtmnConfig bad;
  bad.hidden = 0;
  CHECK_THROWS_AS(LtmnModel(emb, bad), PreconditionError);
  bad = {};
  bad.batch = 0;
  CHECK_THROWS_AS(LtmnModel(emb, bad), PreconditionError);
  CHECK(parse_attention_mode("per-head") == AttentionMode::kPerHead);
  CHECK_THROWS_AS(parse_attention_mode("both"), PreconditionError);
}
