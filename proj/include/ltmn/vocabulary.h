#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ltmn/corpus.h"

namespace ltmn {

using TokenId = std::int32_t;

/// Dense token ids. Ids 0..2 are reserved for <bos>, <eos> and <unk>; the
/// rest follow in order of descending frequency, ties broken by token text.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kReserved = 3;

  static constexpr std::string_view kBosToken = "<bos>";
  static constexpr std::string_view kEosToken = "<eos>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Counts `tokens` and keeps those seen at least `min_count` times. The
  /// total count of dropped tokens is credited to <unk>.
  static Vocabulary from_tokens(std::span<const std::string> tokens,
                                int min_count);

  std::size_t size() const noexcept { return tokens_.size(); }

  /// Id of `token`, or kUnk when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::int64_t count(TokenId id) const;
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;

  /// `token<TAB>id<TAB>count` per line, ids in order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  void push(std::string token, std::int64_t count);

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Vocabulary over all songs at the given granularity. Tokens are lowercased
/// by the parser already.
Vocabulary build_vocab(std::span<const AlignedSong> songs, TokenLevel level,
                       int min_count);

}  // namespace ltmn
