#pragma once

// Fixtures and independent oracles shared by the unit and acceptance tests.
// Nothing here calls into the code under test to compute expected values.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ltmn/corpus.h"
#include "ltmn/lyric2vec.h"
#include "ltmn/neural.h"
#include "ltmn/vocabulary.h"

namespace ltmn::testing {

inline std::filesystem::path data_dir() { return LTMN_TEST_DATA_DIR; }
inline std::filesystem::path toy_corpus_path() { return data_dir() / "toy_corpus.txt"; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ltmn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Embedder with random (untrained) tables over the songs' vocabularies.
inline LyricEmbedder random_embedder(std::span<const AlignedSong> songs, Composition scheme, int dim,
                                     std::uint64_t seed, double scale = 0.5) {
  Vocabulary sv = build_vocab(songs, TokenLevel::kSyllable, 1);
  Vocabulary wv = build_vocab(songs, TokenLevel::kWord, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  auto table = [&](const Vocabulary& v, TokenLevel level) {
    EmbeddingTable t;
    t.level = level;
    t.input = Matrix(static_cast<Eigen::Index>(v.size()), dim);
    for (Eigen::Index i = 0; i < t.input.size(); ++i) t.input.data()[i] = u(rng);
    t.output = Matrix::Zero(t.input.rows(), dim);
    return t;
  };
  EmbeddingTable st = table(sv, TokenLevel::kSyllable);
  EmbeddingTable wt = table(wv, TokenLevel::kWord);
  return LyricEmbedder(scheme, std::move(sv), std::move(st), std::move(wv), std::move(wt));
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Random valid note; duration/rest chosen by index into the published sets.
inline NoteAttributes random_note(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> p(0, 127), d(0, 10), r(0, 11);
  return {p(rng), kDurationValues[static_cast<std::size_t>(d(rng))], kRestValues[static_cast<std::size_t>(r(rng))]};
}

/// Counts parameter entries whose analytic gradient differs from a central
/// difference by more than rtol * max(|a|, |n|) + atol. The absolute term
/// absorbs round-off on entries whose true gradient is essentially zero.
inline std::size_t gradient_violations(const Objective& f, const ParameterSet& params, double eps, double rtol,
                                       double atol) {
  ParameterSet grads = params.zeros_like();
  f(params, &grads);
  ParameterSet probe = params;
  std::size_t bad = 0;
  for (std::size_t s = 0; s < params.size(); ++s) {
    for (Eigen::Index i = 0; i < params[s].size(); ++i) {
      const double x = params[s].data()[i];
      probe[s].data()[i] = x + eps;
      const double up = f(probe, nullptr);
      probe[s].data()[i] = x - eps;
      const double down = f(probe, nullptr);
      probe[s].data()[i] = x;
      const double n = (up - down) / (2 * eps);
      const double a = grads[s].data()[i];
      bad += std::abs(a - n) > rtol * std::max(std::abs(a), std::abs(n)) + atol;
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------
// BLEU oracle: enumerate every n-gram window explicitly and clip by greedily
// consuming unused reference windows.
// ---------------------------------------------------------------------------

struct BleuOracle {
  double bleu = 0.0;
  std::vector<double> precisions;
  double bp = 0.0;
};

inline BleuOracle brute_force_bleu(const std::vector<std::vector<int>>& cand,
                                   const std::vector<std::vector<int>>& ref, int max_n) {
  BleuOracle out;
  double c = 0, r = 0;
  for (std::size_t k = 0; k < cand.size(); ++k) {
    c += static_cast<double>(cand[k].size());
    r += static_cast<double>(ref[k].size());
  }
  if (c == 0) {
    out.precisions.assign(static_cast<std::size_t>(max_n), 0.0);
    return out;
  }
  double log_sum = 0, orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    double hits = 0, total = 0;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      const auto& a = cand[k];
      const auto& b = ref[k];
      if (a.size() < static_cast<std::size_t>(n)) continue;
      std::vector<bool> used(b.size() >= static_cast<std::size_t>(n) ? b.size() - n + 1 : 0, false);
      for (std::size_t i = 0; i + n <= a.size(); ++i) {
        total += 1;
        for (std::size_t j = 0; j < used.size(); ++j) {
          if (used[j]) continue;
          bool same = true;
          for (int q = 0; q < n; ++q) same = same && a[i + q] == b[j + q];
          if (same) {
            used[j] = true;
            hits += 1;
            break;
          }
        }
      }
    }
    if (total == 0) {
      out.precisions.push_back(0.0);
      continue;
    }
    double p = hits / total;
    if (p == 0.0) p = 1.0 / (2.0 * total);
    out.precisions.push_back(p);
    log_sum += std::log(p);
    orders += 1;
  }
  out.bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  out.bleu = out.bp * std::exp(log_sum / orders);
  return out;
}

// ---------------------------------------------------------------------------
// Minimal standard MIDI reader, written against the file-format definition.
// ---------------------------------------------------------------------------

struct ReadNote {
  std::int64_t onset = 0;
  std::int64_t duration = 0;
  int pitch = 0;
  int velocity = 0;
};

struct ReadMidi {
  int format = -1;
  int tracks = 0;
  int division = 0;
  std::int64_t tempo_us = -1;
  std::vector<ReadNote> notes;
  std::vector<std::pair<std::int64_t, std::string>> lyrics;
  std::int64_t end_of_track = -1;
};

inline ReadMidi read_midi(const std::vector<std::uint8_t>& b) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > b.size()) throw std::runtime_error("truncated midi");
  };
  auto u32 = [&] {
    need(4);
    std::uint32_t v = (std::uint32_t(b[pos]) << 24) | (std::uint32_t(b[pos + 1]) << 16) |
                      (std::uint32_t(b[pos + 2]) << 8) | b[pos + 3];
    pos += 4;
    return v;
  };
  auto u16 = [&] {
    need(2);
    int v = (b[pos] << 8) | b[pos + 1];
    pos += 2;
    return v;
  };
  auto varlen = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 4; ++i) {
      need(1);
      std::uint8_t c = b[pos++];
      v = (v << 7) | (c & 0x7F);
      if (!(c & 0x80)) return v;
    }
    throw std::runtime_error("bad varlen");
  };
  ReadMidi out;
  need(4);
  if (std::string(b.begin(), b.begin() + 4) != "MThd") throw std::runtime_error("no MThd");
  pos = 4;
  if (u32() != 6) throw std::runtime_error("bad header length");
  out.format = u16();
  out.tracks = u16();
  out.division = u16();
  std::map<int, std::vector<std::int64_t>> open;
  for (int t = 0; t < out.tracks; ++t) {
    need(4);
    if (std::string(b.begin() + static_cast<long>(pos), b.begin() + static_cast<long>(pos) + 4) != "MTrk")
      throw std::runtime_error("no MTrk");
    pos += 4;
    const std::size_t end = pos + u32();
    std::int64_t tick = 0;
    std::uint8_t status = 0;
    while (pos < end) {
      tick += static_cast<std::int64_t>(varlen());
      need(1);
      std::uint8_t s = b[pos];
      if (s & 0x80) {
        status = s;
        ++pos;
      }
      if (status == 0xFF) {
        need(1);
        std::uint8_t type = b[pos++];
        std::size_t len = varlen();
        need(len);
        std::string data(b.begin() + static_cast<long>(pos), b.begin() + static_cast<long>(pos + len));
        pos += len;
        if (type == 0x51) out.tempo_us = ((unsigned char)data[0] << 16) | ((unsigned char)data[1] << 8) | (unsigned char)data[2];
        if (type == 0x05) out.lyrics.emplace_back(tick, data);
        if (type == 0x2F) out.end_of_track = tick;
        continue;
      }
      const int kind = status & 0xF0;
      need(2);
      int d1 = b[pos], d2 = b[pos + 1];
      pos += 2;
      if (kind == 0x90 && d2 > 0) {
        open[d1].push_back(tick);
        out.notes.push_back({tick, -1, d1, d2});
      } else if (kind == 0x80 || (kind == 0x90 && d2 == 0)) {
        auto& starts = open[d1];
        if (starts.empty()) throw std::runtime_error("note off without note on");
        const std::int64_t onset = starts.front();
        starts.erase(starts.begin());
        for (auto& n : out.notes) {
          if (n.pitch == d1 && n.onset == onset && n.duration < 0) {
            n.duration = tick - onset;
            break;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace ltmn::testing
