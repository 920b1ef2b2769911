#pragma once

// Lyrics/melody paired corpus: note attributes, aligned songs and the
// line-oriented corpus file format.
//
//   lis|ten TO ME : 62/1/0 64/0.5/0 60/1/0.5 58/2/0
//
// Words are separated by whitespace, `|` joins syllables of one word, and the
// k-th `pitch/duration/rest` triplet after the `:` belongs to the k-th
// syllable. `#` starts a comment line. Every line is one lyric line.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ltmn/error.h"

namespace ltmn {

/// Note lengths in stave units, ascending. Class id == index.
inline constexpr std::array<double, 11> kDurationValues = {
    0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0};

/// Rests share the duration values and may also be zero.
inline constexpr std::array<double, 12> kRestValues = {
    0.0, 0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0};

inline constexpr int kPitchClasses = 128;
inline constexpr int kDurationClasses = static_cast<int>(kDurationValues.size());
inline constexpr int kRestClasses = static_cast<int>(kRestValues.size());

/// One melody token: MIDI pitch plus duration and preceding rest in stave units.
struct NoteAttributes {
  int pitch = 60;
  double duration = 1.0;
  double rest = 0.0;

  friend bool operator==(const NoteAttributes&, const NoteAttributes&) = default;
};

/// A note expressed as decoder class ids.
struct NoteClasses {
  int pitch = 0;
  int duration = 0;
  int rest = 0;

  friend bool operator==(const NoteClasses&, const NoteClasses&) = default;
};

/// Half-open index range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Parallel syllables and notes, one note per syllable. Word and sentence
/// bounds are both ranges over syllable indices.
struct AlignedSong {
  std::vector<std::string> syllables;
  std::vector<Span> word_bounds;
  std::vector<Span> sentence_bounds;
  std::vector<NoteAttributes> notes;

  std::size_t length() const noexcept { return syllables.size(); }

  /// The word at index `w`, syllables concatenated.
  std::string word(std::size_t w) const;
  std::vector<std::string> words() const;
  /// Index of the word containing syllable `s`.
  std::size_t word_index_of(std::size_t s) const;

  /// Throws AlignmentError unless notes pair with syllables and both bound
  /// lists partition [0, length()).
  void check() const;

  friend bool operator==(const AlignedSong&, const AlignedSong&) = default;
};

/// Returns the note iff all three values belong to their sets exactly.
NoteAttributes validate_attributes(double raw_pitch, double raw_duration,
                                   double raw_rest);

int class_count(AttributeKind kind);
int attribute_class_index(AttributeKind kind, double value);
double attribute_value(AttributeKind kind, int class_id);

NoteClasses to_classes(const NoteAttributes& note);
NoteAttributes from_classes(const NoteClasses& classes);

/// Parses a single corpus line (already known not to be blank or a comment).
AlignedSong parse_song_line(std::string_view line, std::size_t line_number);

std::vector<AlignedSong> parse_corpus_text(std::string_view text);
std::vector<AlignedSong> parse_corpus(const std::filesystem::path& path);

/// Inverse of parse_song_line for single-sentence songs.
std::string serialize_song(const AlignedSong& song);
void write_corpus(const std::filesystem::path& path,
                  std::span<const AlignedSong> songs);

/// Shortest decimal text that parses back to `value`.
std::string format_number(double value);

/// Token granularity. Tagged syllables keep a trailing `|` when the word
/// continues, so a syllable stream can be regrouped into words.
enum class TokenLevel { kSyllable, kWord, kTaggedSyllable };

inline constexpr char kJoinMarker = '|';

std::vector<std::string> song_tokens(const AlignedSong& song, TokenLevel level);

/// Drops the join marker from a tagged syllable.
std::string_view plain_syllable(std::string_view tagged);
bool continues_word(std::string_view tagged);

/// Rebuilds syllables and word bounds from tagged syllables. `line_breaks`
/// holds the syllable index at which each lyric line after the first starts.
/// Notes are left empty.
AlignedSong song_from_tagged(std::span<const std::string> tagged,
                             std::span<const std::size_t> line_breaks = {});

/// Normalized histograms over class ids for each attribute.
struct AttributeDistribution {
  std::vector<double> pitch;
  std::vector<double> duration;
  std::vector<double> rest;

  const std::vector<double>& of(AttributeKind kind) const;
};

AttributeDistribution attribute_distribution(std::span<const AlignedSong> songs);

}  // namespace ltmn
