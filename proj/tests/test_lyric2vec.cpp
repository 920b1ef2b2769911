#include "doctest.h"

#include <cmath>
#include <random>

#include "ltmn/lyric2vec.h"
#include "support.h"

using namespace ltmn;

namespace {

Vocabulary counted(std::vector<std::pair<std::string, int>> counts) {
  std::vector<std::string> tokens;
  for (auto& [t, n] : counts)
    for (int i = 0; i < n; ++i) tokens.push_back(t);
  return Vocabulary::from_tokens(tokens, 1);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("negative sampling distribution") {
  auto v = counted({{"a", 16}, {"b", 1}});
  auto p = negative_sampling_distribution(v, 0.75);
  CHECK(p[static_cast<std::size_t>(v.id("a"))] == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(p[static_cast<std::size_t>(v.id("b"))] == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  for (TokenId r : {Vocabulary::kBos, Vocabulary::kEos, Vocabulary::kUnk}) CHECK(p[static_cast<std::size_t>(r)] == 0.0);

  auto plain = negative_sampling_distribution(counted({{"a", 3}, {"b", 1}}), 1.0);
  CHECK(plain[3] == doctest::Approx(0.75));

  auto uniform = negative_sampling_distribution(counted({{"a", 5}, {"b", 5}, {"c", 5}}), 0.3);
  double sum = 0;
  for (double x : uniform) sum += x;
  CHECK(std::abs(sum - 1.0) <= 1e-9);
  CHECK(uniform[3] == doctest::Approx(1.0 / 3.0));
  CHECK(uniform[5] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("skip-gram pairs cover the full window") {
  std::vector<TokenId> tokens{3, 4, 5, 6};
  auto pairs = skipgram_pairs(tokens, 2);
  CHECK(pairs.size() == 10);
  std::size_t brute = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) brute += i != j && std::abs(i - j) <= 2;
  CHECK(pairs.size() == brute);
  CHECK(std::find(pairs.begin(), pairs.end(), std::pair<TokenId, TokenId>{3, 5}) != pairs.end());
  CHECK(std::find(pairs.begin(), pairs.end(), std::pair<TokenId, TokenId>{3, 6}) == pairs.end());
}

TEST_CASE("pair loss equals the sigmoid formula") {
  std::mt19937_64 rng(3);
  Matrix in(6, 4), out(6, 4);
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    in.data()[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    out.data()[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
  }
  std::vector<TokenId> neg{4, 5};
  double expected = -std::log(sigmoid(out.row(3).dot(in.row(1))));
  for (TokenId n : neg) expected -= std::log(sigmoid(-out.row(n).dot(in.row(1))));
  CHECK(skipgram_pair_loss(in, out, 1, 3, neg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("skip-gram gradients match finite differences on a 5-token vocabulary") {
  std::mt19937_64 rng(8);
  ParameterSet p;
  p.add("input", Matrix(5, 3));
  p.add("output", Matrix(5, 3));
  for (std::size_t s = 0; s < 2; ++s)
    for (Eigen::Index i = 0; i < p[s].size(); ++i) p[s].data()[i] = std::uniform_real_distribution<double>(-0.8, 0.8)(rng);
  const std::vector<std::pair<TokenId, TokenId>> probes{{0, 1}, {2, 3}, {4, 0}, {1, 2}};
  const std::vector<TokenId> negs{2, 3, 4, 0, 1, 2, 3, 1};
  Objective f = [&](const ParameterSet& q, ParameterSet* g) {
    double loss = 0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
      std::span<const TokenId> n(negs.data() + 2 * k, 2);
      loss += skipgram_pair_loss(q[0], q[1], probes[k].first, probes[k].second, n, g ? &(*g)[0] : nullptr,
                                 g ? &(*g)[1] : nullptr);
    }
    return loss;
  };
  CHECK(grad_check(f, p, 1e-5) <= 1e-4);
}

TEST_CASE("training separates co-occurring from disjoint tokens and is deterministic") {
  // Two groups of words that only ever appear in long blocks of their own.
  std::mt19937_64 rng(21);
  std::vector<std::string> stream;
  for (int block = 0; block < 40; ++block) {
    const char group = block % 2 ? 'a' : 'b';
    for (int i = 0; i < 25; ++i) {
      stream.push_back(std::string(1, group) + std::to_string(std::uniform_int_distribution<int>(0, 3)(rng)));
    }
  }
  auto vocab = Vocabulary::from_tokens(stream, 1);
  auto ids = vocab.encode(stream);
  SkipgramConfig config;
  config.epochs = 5;
  auto table = train_skipgram(ids, vocab, config, TokenLevel::kWord);

  // Mean sigmoid score of (input, output) pairs within and across groups.
  auto score = [&](char x, char y) {
    double total = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const auto u = vocab.id(std::string(1, x) + std::to_string(i));
        const auto v = vocab.id(std::string(1, y) + std::to_string(j));
        total += 1.0 / (1.0 + std::exp(-table.input.row(u).dot(table.output.row(v))));
      }
    return total / 16;
  };
  CHECK(score('a', 'a') > score('a', 'b'));
  CHECK(score('b', 'b') > score('b', 'a'));

  auto again = train_skipgram(ids, vocab, config, TokenLevel::kWord);
  CHECK(again.input == table.input);
  CHECK(again.output == table.output);
  CHECK(table.input.allFinite());
  CHECK(table.dim() == 50);
}

TEST_CASE("initial table ranges") {
  auto vocab = counted({{"a", 1}, {"b", 2}});
  SkipgramConfig config;
  config.dim = 10;
  auto t = init_embedding_table(vocab, config, TokenLevel::kSyllable);
  CHECK(t.input.cwiseAbs().maxCoeff() <= 0.05);
  CHECK(t.output.isZero(0.0));
  CHECK(t.size() == 5);
}

TEST_CASE("skip-gram configuration is validated") {
  auto vocab = counted({{"a", 1}});
  std::vector<TokenId> ids{3, 3};
  auto bad = [&](auto mutate) {
    SkipgramConfig c;
    c.epochs = 1;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(train_skipgram(ids, vocab, bad([](SkipgramConfig& c) { c.window = 0; })), PreconditionError);
  CHECK_THROWS_AS(train_skipgram(ids, vocab, bad([](SkipgramConfig& c) { c.dim = 0; })), PreconditionError);
  CHECK_THROWS_AS(train_skipgram(ids, vocab, bad([](SkipgramConfig& c) { c.negatives = 0; })), PreconditionError);
  CHECK_THROWS_AS(train_skipgram(ids, vocab, bad([](SkipgramConfig& c) { c.alpha = 0; })), PreconditionError);
  CHECK_THROWS_AS(train_skipgram(ids, vocab, bad([](SkipgramConfig& c) { c.alpha = 1.5; })), PreconditionError);
  CHECK_THROWS_AS(train_skipgram(ids, vocab, bad([](SkipgramConfig& c) { c.lr_end = c.lr_start; })), PreconditionError);
  std::vector<TokenId> empty;
  CHECK_THROWS_AS(train_skipgram(empty, vocab, SkipgramConfig{}), PreconditionError);
  std::vector<TokenId> invalid{9};
  CHECK_THROWS_AS(train_skipgram(invalid, vocab, SkipgramConfig{}), PreconditionError);
}

TEST_CASE("projection") {
  Vector s(2), w(2);
  s << 1, 1;
  w << 2, 0;
  Vector p = project(s, w);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.0));
  CHECK((project(w, w) - w).norm() <= 1e-12);
  Vector perp(2);
  perp << 0, 3;
  CHECK(project(perp, w).norm() == 0.0);
  CHECK_THROWS_AS(project(s, Vector::Zero(2)), PreconditionError);
  CHECK_THROWS_AS(project(s, Vector::Zero(3)), ShapeError);
}

TEST_CASE("compositions") {
  Vector s(2), w(2);
  s << 1, 1;
  w << 2, 0;
  Vector cswp = compose(Composition::kCSWP, s, w);
  Vector expected(6);
  expected << 1, 1, 2, 0, 1, 0;
  CHECK((cswp - expected).norm() <= 1e-12);
  CHECK(compose(Composition::kSE, s, w) == s);
  Vector swc(4);
  swc << 1, 1, 2, 0;
  CHECK(compose(Composition::kSWC, s, w) == swc);
  CHECK(compose(Composition::kASW, Vector::Zero(2), w) == w);

  Vector zero_w = compose(Composition::kCSWP, s, Vector::Zero(2));
  CHECK(zero_w.tail(2).isZero(0.0));
  CHECK_THROWS_AS(compose(Composition::kASW, s, Vector::Zero(3)), ShapeError);

  for (Composition c : kAllCompositions) CHECK(parse_composition(to_string(c)) == c);
  CHECK(parse_composition("cswp") == Composition::kCSWP);
  CHECK_THROWS_AS(parse_composition("XYZ"), PreconditionError);
  CHECK(composed_dim(Composition::kSE, 50) == 50);
  CHECK(composed_dim(Composition::kSWC, 50) == 100);
  CHECK(composed_dim(Composition::kASW, 50) == 50);
  CHECK(composed_dim(Composition::kCSWP, 50) == 150);
}

TEST_CASE("embedding table persistence") {
  auto songs = parse_corpus(testing::toy_corpus_path());
  auto vocab = build_vocab(songs, TokenLevel::kSyllable, 1);
  SkipgramConfig config;
  config.dim = 7;
  config.epochs = 2;
  std::vector<TokenId> ids;
  for (auto& s : songs) {
    auto e = vocab.encode(song_tokens(s, TokenLevel::kSyllable));
    ids.insert(ids.end(), e.begin(), e.end());
  }
  auto table = train_skipgram(ids, vocab, config);
  auto dir = testing::scratch_dir("emb");
  table.save(dir / "e.txt", vocab);
  auto loaded = EmbeddingTable::load(dir / "e.txt", vocab, TokenLevel::kSyllable);
  CHECK(loaded.input == table.input);
  std::string text = table.to_text(vocab);
  CHECK(text.rfind(std::to_string(vocab.size()) + " 7\n", 0) == 0);
  auto other = build_vocab(songs, TokenLevel::kWord, 1);
  CHECK_THROWS_AS(EmbeddingTable::from_text(text, other, TokenLevel::kWord), ParseError);
  CHECK_THROWS_AS(EmbeddingTable::load(dir / "absent.txt", vocab, TokenLevel::kSyllable), MissingArtifactError);
}

TEST_CASE("lyric embedder word slot and causal fallback") {
  auto songs = parse_corpus(testing::toy_corpus_path());
  auto emb = testing::random_embedder(songs, Composition::kSWC, 3, 5);
  const auto& sv = emb.syllable_vocab();
  const auto& wv = emb.word_vocab();
  Vector lis = emb.syllable_table().vector(sv.id("lis"));
  Vector listen = emb.word_table().vector(wv.id("listen"));

  Vector full = emb.embed("lis", "listen");
  CHECK(full.head(3) == lis);
  CHECK(full.tail(3) == listen);
  Vector unknown = emb.embed("lis", "lisfoo");
  CHECK(unknown.tail(3) == lis);
  Vector pending = emb.embed("lis", std::nullopt);
  CHECK(pending.tail(3) == lis);

  auto song = songs[0];
  auto vectors = emb.embed_song(song);
  REQUIRE(vectors.size() == song.length());
  CHECK(vectors[0] == full);
  CHECK(vectors[1].tail(3) == listen);

  std::vector<std::string> tagged{"lis|", "ten", "to"};
  auto causal = emb.embed_causal(tagged);
  CHECK(causal[0] == pending);
  CHECK(causal[1] == vectors[1]);
  CHECK(causal[2] == vectors[2]);
  CHECK(emb.dim() == 6);
}
