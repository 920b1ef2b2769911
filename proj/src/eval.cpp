#include "ltmn/eval.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

namespace ltmn {

namespace {

using NGramCounts = std::map<std::vector<int>, std::size_t>;

NGramCounts ngrams(const ClassSequence& seq, std::size_t n) {
  NGramCounts counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    ++counts[std::vector<int>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                              seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

ClassSequence stream(const std::vector<NoteAttributes>& notes, AttributeKind kind) {
  ClassSequence out;
  out.reserve(notes.size());
  for (const NoteAttributes& n : notes) {
    const NoteClasses c = to_classes(n);
    out.push_back(kind == AttributeKind::kPitch ? c.pitch : kind == AttributeKind::kDuration ? c.duration : c.rest);
  }
  return out;
}

nlohmann::json score_json(const BleuScore& s) {
  return {{"bleu", s.bleu},
          {"precisions", s.precisions},
          {"brevity_penalty", s.brevity_penalty},
          {"candidate_length", s.candidate_length},
          {"reference_length", s.reference_length},
          {"sequences", s.sequences}};
}

}  // namespace

BleuScore bleu_corpus(std::span<const ClassSequence> candidates, std::span<const ClassSequence> references,
                      int max_n) {
  if (candidates.size() != references.size())
    throw PreconditionError("bleu: " + std::to_string(candidates.size()) + " candidates but " +
                            std::to_string(references.size()) + " references");
  if (max_n < 1) throw PreconditionError("bleu: max_n must be >= 1");

  BleuScore score;
  score.sequences = candidates.size();
  std::vector<std::size_t> matched(static_cast<std::size_t>(max_n), 0);
  std::vector<std::size_t> total(static_cast<std::size_t>(max_n), 0);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    score.candidate_length += candidates[k].size();
    score.reference_length += references[k].size();
    for (std::size_t n = 1; n <= static_cast<std::size_t>(max_n); ++n) {
      NGramCounts cand = ngrams(candidates[k], n);
      NGramCounts ref = ngrams(references[k], n);
      for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        matched[n - 1] += it == ref.end() ? 0 : std::min(count, it->second);
        total[n - 1] += count;
      }
    }
  }
  if (score.candidate_length == 0) {
    score.precisions.assign(static_cast<std::size_t>(max_n), 0.0);
    return score;
  }

  // Orders longer than every candidate have no n-grams to score and are left
  // out of the geometric mean; order 1 is always present here.
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 0; n < static_cast<std::size_t>(max_n); ++n) {
    if (total[n] == 0) {
      score.precisions.push_back(0.0);
      continue;
    }
    double p = static_cast<double>(matched[n]) / static_cast<double>(total[n]);
    if (p == 0.0) p = 1.0 / (2.0 * static_cast<double>(total[n]));
    score.precisions.push_back(p);
    log_sum += std::log(p);
    ++orders;
  }
  const auto c = static_cast<double>(score.candidate_length);
  const auto r = static_cast<double>(score.reference_length);
  score.brevity_penalty = c < r ? std::exp(1.0 - r / c) : 1.0;
  score.bleu = score.brevity_penalty * std::exp(log_sum / orders);
  return score;
}

const BleuScore& BleuReport::of(AttributeKind kind) const {
  return kind == AttributeKind::kPitch ? pitch : kind == AttributeKind::kDuration ? duration : rest;
}

std::string BleuReport::to_text() const {
  std::string out;
  for (AttributeKind kind : kHeads) {
    const BleuScore& s = of(kind);
    const std::string name = kind == AttributeKind::kPitch ? "pitch" : kind == AttributeKind::kDuration ? "duration" : "rest";
    out += name + ".bleu = " + format_number(s.bleu) + "\n";
    for (std::size_t n = 0; n < s.precisions.size(); ++n)
      out += name + ".p" + std::to_string(n + 1) + " = " + format_number(s.precisions[n]) + "\n";
    out += name + ".bp = " + format_number(s.brevity_penalty) + "\n";
    out += name + ".candidate_length = " + std::to_string(s.candidate_length) + "\n";
    out += name + ".reference_length = " + std::to_string(s.reference_length) + "\n";
  }
  return out;
}

std::string BleuReport::to_json() const {
  nlohmann::json j = {{"pitch", score_json(pitch)}, {"duration", score_json(duration)}, {"rest", score_json(rest)}};
  return j.dump(2);
}

BleuReport bleu_report(std::span<const std::vector<NoteAttributes>> candidates,
                       std::span<const std::vector<NoteAttributes>> references, int max_n) {
  if (candidates.size() != references.size())
    throw PreconditionError("bleu: candidate and reference counts differ");
  BleuReport report;
  for (AttributeKind kind : kHeads) {
    std::vector<ClassSequence> cand, ref;
    for (const auto& notes : candidates) cand.push_back(stream(notes, kind));
    for (const auto& notes : references) ref.push_back(stream(notes, kind));
    BleuScore s = bleu_corpus(cand, ref, max_n);
    (kind == AttributeKind::kPitch ? report.pitch : kind == AttributeKind::kDuration ? report.duration : report.rest) =
        std::move(s);
  }
  return report;
}

std::vector<NoteAttributes> baseline_melody(const AttributeDistribution& dist, std::size_t length,
                                            std::uint64_t seed) {
  if (length < 1) throw PreconditionError("baseline_melody: length must be >= 1");
  for (AttributeKind kind : kHeads) {
    const auto& p = dist.of(kind);
    if (p.size() != static_cast<std::size_t>(class_count(kind)))
      throw PreconditionError("baseline_melody: distribution has the wrong number of classes");
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("baseline_melody: invalid probability");
      sum += v;
    }
    if (!(sum > 0.0)) throw PreconditionError("baseline_melody: empty distribution");
  }
  Rng rng(seed);
  std::vector<NoteAttributes> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    NoteClasses c;
    c.pitch = sample_categorical(dist.pitch, rng);
    c.duration = sample_categorical(dist.duration, rng);
    c.rest = sample_categorical(dist.rest, rng);
    out.push_back(from_classes(c));
  }
  return out;
}

std::vector<std::string> baseline_lyrics(const Vocabulary& vocab, std::size_t length, std::uint64_t seed,
                                         std::size_t top_k) {
  if (length < 1) throw PreconditionError("baseline_lyrics: length must be >= 1");
  if (top_k < 1) throw PreconditionError("baseline_lyrics: top_k must be >= 1");
  // Non-reserved ids are already ordered by descending count.
  std::vector<TokenId> pool;
  for (std::size_t id = Vocabulary::kReserved; id < vocab.size() && pool.size() < top_k; ++id)
    pool.push_back(static_cast<TokenId>(id));
  if (pool.empty()) throw PreconditionError("baseline_lyrics: vocabulary has no tokens");
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pool.size()));
    out.push_back(vocab.token(pool[std::min(k, pool.size() - 1)]));
  }
  return out;
}

BleuReport evaluate_model(const LtmnModel& model, std::span<const AlignedSong> testset) {
  if (testset.empty()) throw PreconditionError("evaluate: empty test set");
  std::vector<std::vector<NoteAttributes>> cand, ref;
  for (const AlignedSong& song : testset) {
    song.check();
    cand.push_back(model.generate(song, DecodeMode::Greedy()).notes);
    ref.push_back(song.notes);
  }
  return bleu_report(cand, ref);
}

BleuReport evaluate_baseline(const AttributeDistribution& dist, std::span<const AlignedSong> testset,
                             std::uint64_t seed) {
  if (testset.empty()) throw PreconditionError("evaluate: empty test set");
  std::vector<std::vector<NoteAttributes>> cand, ref;
  for (std::size_t k = 0; k < testset.size(); ++k) {
    testset[k].check();
    cand.push_back(baseline_melody(dist, testset[k].length(), seed + k));
    ref.push_back(testset[k].notes);
  }
  return bleu_report(cand, ref);
}

}  // namespace ltmn
