#include "ltmn/corpus.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ltmn {

namespace {

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

template <std::size_t N>
int index_in(const std::array<double, N>& values, double v) {
  auto it = std::find(values.begin(), values.end(), v);
  return it == values.end() ? -1 : static_cast<int>(it - values.begin());
}

bool is_blank_or_comment(std::string_view line) {
  auto t = trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace

std::string AlignedSong::word(std::size_t w) const {
  const Span& span = word_bounds.at(w);
  std::string out;
  for (std::size_t s = span.begin; s < span.end; ++s) out += syllables[s];
  return out;
}

std::vector<std::string> AlignedSong::words() const {
  std::vector<std::string> out;
  out.reserve(word_bounds.size());
  for (std::size_t w = 0; w < word_bounds.size(); ++w) out.push_back(word(w));
  return out;
}

std::size_t AlignedSong::word_index_of(std::size_t s) const {
  auto it = std::upper_bound(word_bounds.begin(), word_bounds.end(), s,
                             [](std::size_t v, const Span& b) { return v < b.end; });
  if (it == word_bounds.end() || s < it->begin)
    throw AlignmentError("syllable index " + std::to_string(s) + " is not inside any word");
  return static_cast<std::size_t>(it - word_bounds.begin());
}

void AlignedSong::check() const {
  if (notes.size() != syllables.size()) {
    throw AlignmentError("song has " + std::to_string(syllables.size()) + " syllables but " +
                         std::to_string(notes.size()) + " notes");
  }
  auto check_partition = [&](const std::vector<Span>& bounds, const char* what) {
    std::size_t next = 0;
    for (const Span& b : bounds) {
      if (b.begin != next || b.end <= b.begin)
        throw AlignmentError(std::string(what) + " bounds do not partition the syllables");
      next = b.end;
    }
    if (next != syllables.size())
      throw AlignmentError(std::string(what) + " bounds do not cover every syllable");
  };
  check_partition(word_bounds, "word");
  check_partition(sentence_bounds, "sentence");
}

NoteAttributes validate_attributes(double raw_pitch, double raw_duration, double raw_rest) {
  if (!(raw_pitch >= 0.0 && raw_pitch <= 127.0) || std::floor(raw_pitch) != raw_pitch) {
    throw AttributeError(AttributeKind::kPitch,
                         "pitch " + format_number(raw_pitch) + " is not a MIDI note number in [0, 127]");
  }
  if (index_in(kDurationValues, raw_duration) < 0) {
    throw AttributeError(AttributeKind::kDuration,
                         "duration " + format_number(raw_duration) + " is not in the duration set");
  }
  if (index_in(kRestValues, raw_rest) < 0) {
    throw AttributeError(AttributeKind::kRest,
                         "rest " + format_number(raw_rest) + " is not in the rest set");
  }
  return NoteAttributes{static_cast<int>(raw_pitch), raw_duration, raw_rest};
}

int class_count(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::kPitch:
      return kPitchClasses;
    case AttributeKind::kDuration:
      return kDurationClasses;
    case AttributeKind::kRest:
      return kRestClasses;
  }
  return 0;
}

int attribute_class_index(AttributeKind kind, double value) {
  int id = -1;
  switch (kind) {
    case AttributeKind::kPitch:
      if (value >= 0.0 && value <= 127.0 && std::floor(value) == value) id = static_cast<int>(value);
      break;
    case AttributeKind::kDuration:
      id = index_in(kDurationValues, value);
      break;
    case AttributeKind::kRest:
      id = index_in(kRestValues, value);
      break;
  }
  if (id < 0) throw AttributeError(kind, "value " + format_number(value) + " has no class");
  return id;
}

double attribute_value(AttributeKind kind, int class_id) {
  if (class_id < 0 || class_id >= class_count(kind))
    throw AttributeError(kind, "class id " + std::to_string(class_id) + " out of range");
  switch (kind) {
    case AttributeKind::kPitch:
      return class_id;
    case AttributeKind::kDuration:
      return kDurationValues[static_cast<std::size_t>(class_id)];
    case AttributeKind::kRest:
      return kRestValues[static_cast<std::size_t>(class_id)];
  }
  return 0.0;
}

NoteClasses to_classes(const NoteAttributes& note) {
  return {attribute_class_index(AttributeKind::kPitch, note.pitch),
          attribute_class_index(AttributeKind::kDuration, note.duration),
          attribute_class_index(AttributeKind::kRest, note.rest)};
}

NoteAttributes from_classes(const NoteClasses& classes) {
  return {static_cast<int>(attribute_value(AttributeKind::kPitch, classes.pitch)),
          attribute_value(AttributeKind::kDuration, classes.duration),
          attribute_value(AttributeKind::kRest, classes.rest)};
}

AlignedSong parse_song_line(std::string_view line, std::size_t line_number) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos)
    throw ParseError(line_number, "separator", "missing ':' between lyrics and notes");
  if (line.find(':', colon + 1) != std::string_view::npos)
    throw ParseError(line_number, "separator", "more than one ':'");

  AlignedSong song;
  for (std::string_view word : split_ws(line.substr(0, colon))) {
    Span span{song.syllables.size(), song.syllables.size()};
    std::size_t start = 0;
    while (true) {
      auto bar = word.find(kJoinMarker, start);
      auto piece = word.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
      if (piece.empty())
        throw ParseError(line_number, "syllable", "empty syllable in word '" + std::string(word) + "'");
      song.syllables.push_back(lowercase(piece));
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
    span.end = song.syllables.size();
    song.word_bounds.push_back(span);
  }
  if (song.syllables.empty()) throw ParseError(line_number, "lyrics", "no syllables");

  auto triplets = split_ws(line.substr(colon + 1));
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    std::string_view t = triplets[k];
    auto s1 = t.find('/');
    auto s2 = s1 == std::string_view::npos ? s1 : t.find('/', s1 + 1);
    if (s2 == std::string_view::npos || t.find('/', s2 + 1) != std::string_view::npos) {
      throw ParseError(line_number, "note " + std::to_string(k + 1),
                       "expected pitch/duration/rest, got '" + std::string(t) + "'");
    }
    double vals[3];
    std::string_view parts[3] = {t.substr(0, s1), t.substr(s1 + 1, s2 - s1 - 1), t.substr(s2 + 1)};
    const char* names[3] = {"pitch", "duration", "rest"};
    for (int i = 0; i < 3; ++i) {
      if (!parse_double(parts[i], vals[i])) {
        throw ParseError(line_number, std::string(names[i]) + " of note " + std::to_string(k + 1),
                         "not a number: '" + std::string(parts[i]) + "'");
      }
    }
    try {
      song.notes.push_back(validate_attributes(vals[0], vals[1], vals[2]));
    } catch (const AttributeError& e) {
      const char* field = names[static_cast<int>(e.kind())];
      throw ParseError(line_number, std::string(field) + " of note " + std::to_string(k + 1), e.what());
    }
  }
  if (song.notes.size() != song.syllables.size()) {
    throw AlignmentError("line " + std::to_string(line_number) + ": " +
                         std::to_string(song.syllables.size()) + " syllables but " +
                         std::to_string(song.notes.size()) + " notes");
  }
  song.sentence_bounds.push_back({0, song.syllables.size()});
  return song;
}

std::vector<AlignedSong> parse_corpus_text(std::string_view text) {
  std::vector<AlignedSong> songs;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank_or_comment(line)) continue;
    songs.push_back(parse_song_line(line, line_number));
  }
  return songs;
}

std::vector<AlignedSong> parse_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus_text(buffer.str());
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string serialize_song(const AlignedSong& song) {
  song.check();
  std::string out;
  for (std::size_t w = 0; w < song.word_bounds.size(); ++w) {
    if (w > 0) out += ' ';
    const Span& span = song.word_bounds[w];
    for (std::size_t s = span.begin; s < span.end; ++s) {
      if (s > span.begin) out += kJoinMarker;
      out += song.syllables[s];
    }
  }
  out += " :";
  for (const NoteAttributes& n : song.notes) {
    out += ' ';
    out += std::to_string(n.pitch);
    out += '/';
    out += format_number(n.duration);
    out += '/';
    out += format_number(n.rest);
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const AlignedSong> songs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const AlignedSong& song : songs) out << serialize_song(song) << '\n';
}

std::vector<std::string> song_tokens(const AlignedSong& song, TokenLevel level) {
  std::vector<std::string> out;
  switch (level) {
    case TokenLevel::kSyllable:
      out = song.syllables;
      break;
    case TokenLevel::kWord:
      out = song.words();
      break;
    case TokenLevel::kTaggedSyllable:
      for (const Span& span : song.word_bounds) {
        for (std::size_t s = span.begin; s < span.end; ++s) {
          out.push_back(song.syllables[s]);
          if (s + 1 < span.end) out.back() += kJoinMarker;
        }
      }
      break;
  }
  return out;
}

std::string_view plain_syllable(std::string_view tagged) {
  if (continues_word(tagged)) tagged.remove_suffix(1);
  return tagged;
}

bool continues_word(std::string_view tagged) {
  return tagged.size() > 1 && tagged.back() == kJoinMarker;
}

AlignedSong song_from_tagged(std::span<const std::string> tagged,
                             std::span<const std::size_t> line_breaks) {
  AlignedSong song;
  std::size_t word_start = 0;
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    song.syllables.emplace_back(plain_syllable(tagged[i]));
    bool line_ends = std::find(line_breaks.begin(), line_breaks.end(), i + 1) != line_breaks.end();
    if (!continues_word(tagged[i]) || i + 1 == tagged.size() || line_ends) {
      song.word_bounds.push_back({word_start, i + 1});
      word_start = i + 1;
    }
  }
  std::size_t start = 0;
  for (std::size_t b : line_breaks) {
    if (b > start && b < tagged.size()) {
      song.sentence_bounds.push_back({start, b});
      start = b;
    }
  }
  if (start < tagged.size()) song.sentence_bounds.push_back({start, tagged.size()});
  return song;
}

const std::vector<double>& AttributeDistribution::of(AttributeKind kind) const {
  switch (kind) {
    case AttributeKind::kPitch:
      return pitch;
    case AttributeKind::kDuration:
      return duration;
    case AttributeKind::kRest:
      return rest;
  }
  return pitch;
}

AttributeDistribution attribute_distribution(std::span<const AlignedSong> songs) {
  std::vector<long long> pitch(kPitchClasses, 0), duration(kDurationClasses, 0), rest(kRestClasses, 0);
  long long total = 0;
  for (const AlignedSong& song : songs) {
    for (const NoteAttributes& note : song.notes) {
      NoteClasses c = to_classes(note);
      ++pitch[static_cast<std::size_t>(c.pitch)];
      ++duration[static_cast<std::size_t>(c.duration)];
      ++rest[static_cast<std::size_t>(c.rest)];
      ++total;
    }
  }
  if (total == 0) throw PreconditionError("attribute_distribution: corpus has no notes");
  auto normalize = [total](const std::vector<long long>& counts) {
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    return p;
  };
  return {normalize(pitch), normalize(duration), normalize(rest)};
}

}  // namespace ltmn
