#pragma once

// Standard MIDI file (format 0, one track) and plain-text score output.
// One stave unit is one quarter note.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ltmn/corpus.h"

namespace ltmn {

inline constexpr int kDefaultTempoBpm = 120;
inline constexpr int kDefaultResolution = 480;
inline constexpr int kDefaultVelocity = 90;

struct MidiNote {
  std::int64_t onset = 0;     // ticks
  std::int64_t duration = 0;  // ticks
  int pitch = 60;
  int velocity = kDefaultVelocity;
  std::string lyric;
};

struct MidiSong {
  double tempo_bpm = kDefaultTempoBpm;
  int resolution = kDefaultResolution;  // ticks per quarter
  std::vector<MidiNote> notes;          // ascending onset

  /// Throws PreconditionError on unsorted, negative or out-of-range events.
  void check() const;
  std::int64_t end_tick() const;
};

/// onset_k = sum_{i<=k} rest_i * Q + sum_{i<k} duration_i * Q, Q = resolution.
MidiSong to_midi(std::span<const NoteAttributes> notes, std::span<const std::string> syllables,
                 double tempo_bpm = kDefaultTempoBpm, int resolution = kDefaultResolution);

std::vector<std::uint8_t> encode_midi(const MidiSong& song);
/// Returns the number of bytes written.
std::size_t write_midi_file(const MidiSong& song, const std::filesystem::path& path);

/// MIDI 60 -> "C4", sharps only.
std::string note_name(int pitch);

/// One line per note: `syllable name duration rest`.
std::string to_text_score(std::span<const NoteAttributes> notes, std::span<const std::string> syllables);

}  // namespace ltmn
