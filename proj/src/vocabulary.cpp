#include "ltmn/vocabulary.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace ltmn {

Vocabulary::Vocabulary() {
  push(std::string(kBosToken), 0);
  push(std::string(kEosToken), 0);
  push(std::string(kUnkToken), 0);
}

void Vocabulary::push(std::string token, std::int64_t count) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens, int min_count) {
  if (min_count < 1) throw PreconditionError("min_count must be >= 1");
  if (tokens.empty()) throw PreconditionError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::int64_t> counts;
  for (const std::string& t : tokens) ++counts[t];

  std::vector<std::pair<std::string, std::int64_t>> kept;
  std::int64_t dropped = 0;
  for (auto& [token, count] : counts) {
    if (token == kBosToken || token == kEosToken || token == kUnkToken) {
      dropped += count;
    } else if (count >= min_count) {
      kept.emplace_back(token, count);
    } else {
      dropped += count;
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  vocab.counts_[kUnk] = dropped;
  for (auto& [token, count] : kept) vocab.push(token, count);
  return vocab;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw PreconditionError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::int64_t Vocabulary::count(TokenId id) const {
  token(id);
  return counts_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\t';
    out += std::to_string(counts_[i]);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.counts_.clear();
  vocab.index_.clear();
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_number;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw ParseError(line_number, "vocabulary", "expected token<TAB>id<TAB>count");
    std::int64_t id = -1, count = -1;
    auto id_text = line.substr(t1 + 1, t2 - t1 - 1);
    auto count_text = line.substr(t2 + 1);
    auto r1 = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    auto r2 = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
    if (r1.ec != std::errc() || r1.ptr != id_text.data() + id_text.size())
      throw ParseError(line_number, "id", "not an integer");
    if (r2.ec != std::errc() || r2.ptr != count_text.data() + count_text.size() || count < 0)
      throw ParseError(line_number, "count", "not a non-negative integer");
    if (id != static_cast<std::int64_t>(vocab.tokens_.size()))
      throw ParseError(line_number, "id", "ids must be dense and in order");
    std::string token(line.substr(0, t1));
    if (vocab.index_.count(token)) throw ParseError(line_number, "token", "duplicate token '" + token + "'");
    vocab.push(std::move(token), count);
  }
  if (vocab.tokens_.size() < kReserved || vocab.tokens_[kBos] != kBosToken ||
      vocab.tokens_[kEos] != kEosToken || vocab.tokens_[kUnk] != kUnkToken) {
    throw ParseError(line_number, "vocabulary", "reserved tokens missing");
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

Vocabulary build_vocab(std::span<const AlignedSong> songs, TokenLevel level, int min_count) {
  if (min_count < 1) throw PreconditionError("min_count must be >= 1");
  std::vector<std::string> tokens;
  for (const AlignedSong& song : songs) {
    auto t = song_tokens(song, level);
    tokens.insert(tokens.end(), t.begin(), t.end());
  }
  if (tokens.empty()) throw PreconditionError("cannot build a vocabulary from an empty corpus");
  return Vocabulary::from_tokens(tokens, min_count);
}

}  // namespace ltmn
