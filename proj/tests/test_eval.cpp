#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ltmn/eval.h"
#include "support.h"

using namespace ltmn;

namespace {

std::vector<ClassSequence> random_corpus(std::mt19937_64& rng, std::size_t count, int max_len, int alphabet) {
  std::uniform_int_distribution<int> len(0, max_len), sym(0, alphabet - 1);
  std::vector<ClassSequence> out(count);
  for (auto& s : out) {
    s.resize(static_cast<std::size_t>(len(rng)));
    for (auto& x : s) x = sym(rng);
  }
  return out;
}

AttributeDistribution point_mass(int pitch, int duration, int rest) {
  AttributeDistribution d{std::vector<double>(kPitchClasses, 0.0), std::vector<double>(kDurationClasses, 0.0),
                          std::vector<double>(kRestClasses, 0.0)};
  d.pitch[static_cast<std::size_t>(pitch)] = 1.0;
  d.duration[static_cast<std::size_t>(duration)] = 1.0;
  d.rest[static_cast<std::size_t>(rest)] = 1.0;
  return d;
}

}  // namespace

TEST_CASE("worked bleu example") {
  // A B B C against A B C D. Unigrams: A, B (clipped to one), C match.
  // Bigrams AB and BC match out of AB BB BC. No trigram or 4-gram matches,
  // so those are smoothed to 1/(2*2) and 1/(2*1).
  std::vector<ClassSequence> cand{{0, 1, 1, 2}}, ref{{0, 1, 2, 3}};
  BleuScore s = bleu_corpus(cand, ref);
  REQUIRE(s.precisions.size() == 4);
  CHECK(s.precisions[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s.precisions[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.precisions[2] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.precisions[3] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.brevity_penalty == 1.0);
  CHECK(s.bleu == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bleu boundary cases") {
  std::vector<ClassSequence> a{{1, 2, 3}, {4, 5}};
  CHECK(bleu_corpus(a, a).bleu == 1.0);
  // No shared unigram: every order sits at its smoothing floor.
  std::vector<ClassSequence> ten{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, flat{ClassSequence(10, 11)};
  const double floor = std::pow(1.0 / 20 * 1.0 / 18 * 1.0 / 16 * 1.0 / 14, 0.25);
  CHECK(bleu_corpus(flat, ten).bleu == doctest::Approx(floor).epsilon(1e-12));
  CHECK(floor < 0.06);
  // Orders longer than the candidates do not count.
  std::vector<ClassSequence> pair{{1, 2}};
  CHECK(bleu_corpus(pair, pair).bleu == 1.0);
  CHECK(bleu_corpus(pair, pair).precisions[2] == 0.0);
  std::vector<ClassSequence> one{{1}};
  CHECK_THROWS_AS(bleu_corpus(one, a), PreconditionError);
  CHECK_THROWS_AS(bleu_corpus(a, a, 0), PreconditionError);
  std::vector<ClassSequence> empty{{}, {}};
  CHECK(bleu_corpus(empty, a).bleu == 0.0);
}

TEST_CASE("bleu matches the brute-force oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> count(1, 5), alpha(1, 4);
    const auto n = static_cast<std::size_t>(count(rng));
    const int k = alpha(rng);
    auto cand = random_corpus(rng, n, 8, k);
    auto ref = random_corpus(rng, n, 8, k);
    BleuScore s = bleu_corpus(cand, ref);
    auto o = testing::brute_force_bleu(cand, ref, 4);
    CHECK(std::abs(s.bleu - o.bleu) <= 1e-12);
    CHECK(std::abs(s.brevity_penalty - o.bp) <= 1e-12);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(s.precisions[i] - o.precisions[i]) <= 1e-12);
    CHECK(s.bleu >= 0.0);
    CHECK(s.bleu <= 1.0);
  }
}

TEST_CASE("bleu properties") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto cand = random_corpus(rng, 5, 10, 3);
    auto ref = random_corpus(rng, 5, 10, 3);
    for (auto& s : cand)
      if (s.size() < 2) s = {0, 1, 2, 0};
    for (auto& s : ref)
      if (s.size() < 2) s = {0, 1};
    if (std::all_of(cand.begin(), cand.end(), [](const auto& s) { return s.empty(); })) continue;

    // Permuting the pairs leaves the corpus score unchanged.
    std::vector<std::size_t> order{0, 1, 2, 3, 4};
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<ClassSequence> pc, pr;
    for (auto i : order) {
      pc.push_back(cand[i]);
      pr.push_back(ref[i]);
    }
    CHECK(bleu_corpus(pc, pr).bleu == doctest::Approx(bleu_corpus(cand, ref).bleu).epsilon(1e-12));
    CHECK(bleu_corpus(cand, cand).bleu == 1.0);

    // Halving every candidate makes the brevity penalty strictly smaller.
    auto half = cand;
    for (auto& s : half) s.resize(s.size() / 2);
    auto full = bleu_corpus(cand, cand);
    auto cut = bleu_corpus(half, cand);
    CHECK(cut.brevity_penalty < full.brevity_penalty);
  }
}

TEST_CASE("bleu report scores attributes separately") {
  std::vector<std::vector<NoteAttributes>> ref{{{60, 1.0, 0.0}, {62, 0.5, 0.0}, {64, 1.0, 0.5}}};
  auto cand = ref;
  for (auto& n : cand[0]) n.pitch += 1;
  BleuReport r = bleu_report(cand, ref);
  CHECK(r.duration.bleu == 1.0);
  CHECK(r.rest.bleu == 1.0);
  CHECK(r.pitch.bleu < 0.5);
  CHECK(&r.of(AttributeKind::kPitch) == &r.pitch);
  CHECK(r.to_text().find("pitch.bleu = ") != std::string::npos);
  CHECK(r.to_json().find("\"duration\"") != std::string::npos);
}

TEST_CASE("baseline melody sampling") {
  auto d = point_mass(67, 4, 0);
  auto constant = baseline_melody(d, 20, 3);
  for (const auto& n : constant) CHECK(n == NoteAttributes{67, 1.0, 0.0});
  CHECK(baseline_melody(d, 5, 11) == baseline_melody(d, 5, 11));
  CHECK_THROWS_AS(baseline_melody(d, 0, 1), PreconditionError);
  auto bad = d;
  bad.rest.pop_back();
  CHECK_THROWS_AS(baseline_melody(bad, 3, 1), PreconditionError);

  // Durations 1 and 2 with probability one half each: chi-square with one
  // degree of freedom against the 1% critical value.
  d.duration[4] = 0.5;
  d.duration[6] = 0.5;
  const int n = 10000;
  auto draws = baseline_melody(d, n, 21);
  int ones = 0;
  for (const auto& note : draws) {
    CHECK((note.duration == 1.0 || note.duration == 2.0));
    ones += note.duration == 1.0;
  }
  const double expected = n / 2.0;
  const double chi2 = 2 * (ones - expected) * (ones - expected) / expected;
  CHECK(chi2 < 6.635);
  CHECK(std::abs(ones / double(n) - 0.5) <= 0.02);
}

TEST_CASE("baseline lyrics sampling") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 60; ++i)
    for (int r = 0; r <= i; ++r) tokens.push_back("s" + std::to_string(i));
  Vocabulary vocab = Vocabulary::from_tokens(tokens, 1);
  const std::size_t k = 10;
  std::set<std::string> top;
  for (int i = 59; i >= 50; --i) top.insert("s" + std::to_string(i));
  const int n = 10000;
  auto draws = baseline_lyrics(vocab, n, 4, k);
  std::map<std::string, int> freq;
  for (const auto& t : draws) {
    CHECK(top.count(t) == 1);
    ++freq[t];
  }
  CHECK(freq.size() == k);
  for (const auto& [t, c] : freq) CHECK(std::abs(c / double(n) - 1.0 / k) <= 0.02);
  CHECK(baseline_lyrics(vocab, 8, 4) == baseline_lyrics(vocab, 8, 4));

  std::vector<std::string> single{"la", "la"};
  auto constant = baseline_lyrics(Vocabulary::from_tokens(single, 1), 6, 1);
  CHECK(constant == std::vector<std::string>(6, "la"));
  CHECK_THROWS_AS(baseline_lyrics(vocab, 0, 1), PreconditionError);
  CHECK_THROWS_AS(baseline_lyrics(Vocabulary{}, 3, 1), PreconditionError);
}

TEST_CASE("evaluation protocol") {
  auto songs = parse_corpus(testing::toy_corpus_path());
  LtmnConfig config;
  config.hidden = 8;
  config.attention_dim = 4;
  config.attr_embed = 2;
  LtmnModel model(testing::random_embedder(songs, Composition::kSE, 4, 1), config);
  std::vector<AlignedSong> none;
  CHECK_THROWS_AS(evaluate_model(model, none), PreconditionError);
  auto dist = attribute_distribution(songs);
  CHECK_THROWS_AS(evaluate_baseline(dist, none, 1), PreconditionError);
  auto a = evaluate_baseline(dist, songs, 1);
  auto b = evaluate_baseline(dist, songs, 1);
  CHECK(a.to_text() == b.to_text());
  auto m = evaluate_model(model, songs);
  CHECK(m.pitch.sequences == songs.size());
}
