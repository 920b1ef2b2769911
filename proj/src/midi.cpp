#include "ltmn/midi.h"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ltmn {

namespace {

void put_u16(std::vector<std::uint8_t>& out, unsigned v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_varlen(std::vector<std::uint8_t>& out, std::uint64_t v) {
  if (v > 0x0FFFFFFF) throw PreconditionError("midi: delta time exceeds the variable-length range");
  std::uint8_t buf[4];
  int n = 0;
  buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

void put_meta(std::vector<std::uint8_t>& out, std::uint8_t type, const std::string& data) {
  out.push_back(0xFF);
  out.push_back(type);
  put_varlen(out, data.size());
  out.insert(out.end(), data.begin(), data.end());
}

std::int64_t to_ticks(double units, int resolution) {
  const double ticks = units * resolution;
  const double rounded = std::round(ticks);
  if (std::abs(ticks - rounded) > 1e-9)
    throw PreconditionError("midi: resolution " + std::to_string(resolution) + " cannot represent " +
                            format_number(units) + " stave units");
  return static_cast<std::int64_t>(rounded);
}

}  // namespace

void MidiSong::check() const {
  if (!(tempo_bpm > 0.0)) throw PreconditionError("midi: tempo must be > 0");
  if (resolution < 1 || resolution > 0x7FFF) throw PreconditionError("midi: resolution must be in [1, 32767]");
  std::int64_t last = 0;
  for (const MidiNote& n : notes) {
    if (n.onset < 0 || n.duration < 0) throw PreconditionError("midi: negative tick");
    if (n.onset < last) throw PreconditionError("midi: events not sorted by onset");
    if (n.pitch < 0 || n.pitch > 127) throw PreconditionError("midi: pitch out of range");
    if (n.velocity < 1 || n.velocity > 127) throw PreconditionError("midi: velocity out of range");
    last = n.onset;
  }
}

std::int64_t MidiSong::end_tick() const {
  std::int64_t end = 0;
  for (const MidiNote& n : notes) end = std::max(end, n.onset + n.duration);
  return end;
}

MidiSong to_midi(std::span<const NoteAttributes> notes, std::span<const std::string> syllables, double tempo_bpm,
                 int resolution) {
  if (notes.empty()) throw PreconditionError("to_midi: no notes");
  if (notes.size() != syllables.size())
    throw AlignmentError("to_midi: " + std::to_string(notes.size()) + " notes but " +
                         std::to_string(syllables.size()) + " syllables");
  MidiSong song;
  song.tempo_bpm = tempo_bpm;
  song.resolution = resolution;
  if (!(tempo_bpm > 0.0)) throw PreconditionError("to_midi: tempo must be > 0");
  if (resolution < 1 || resolution > 0x7FFF) throw PreconditionError("to_midi: resolution must be in [1, 32767]");
  std::int64_t cursor = 0;
  for (std::size_t k = 0; k < notes.size(); ++k) {
    const NoteAttributes& n = notes[k];
    if (n.pitch < 0 || n.pitch > 127) throw PreconditionError("to_midi: pitch out of range");
    if (!(n.duration > 0.0) || n.rest < 0.0) throw PreconditionError("to_midi: invalid duration or rest");
    cursor += to_ticks(n.rest, resolution);
    MidiNote event;
    event.onset = cursor;
    event.duration = to_ticks(n.duration, resolution);
    event.pitch = n.pitch;
    event.lyric = syllables[k];
    song.notes.push_back(std::move(event));
    cursor += song.notes.back().duration;
  }
  return song;
}

std::vector<std::uint8_t> encode_midi(const MidiSong& song) {
  song.check();
  struct Event {
    std::int64_t tick;
    int order;  // note-offs before lyrics before note-ons at the same tick
    std::size_t note;
  };
  std::vector<Event> events;
  for (std::size_t k = 0; k < song.notes.size(); ++k) {
    events.push_back({song.notes[k].onset, 1, k});
    events.push_back({song.notes[k].onset, 2, k});
    events.push_back({song.notes[k].onset + song.notes[k].duration, 0, k});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.tick != b.tick ? a.tick < b.tick : a.order < b.order;
  });

  std::vector<std::uint8_t> track;
  put_varlen(track, 0);
  const auto us_per_quarter = static_cast<std::uint32_t>(std::lround(60'000'000.0 / song.tempo_bpm));
  if (us_per_quarter > 0xFFFFFF || us_per_quarter == 0) throw PreconditionError("midi: tempo out of range");
  track.insert(track.end(), {0xFF, 0x51, 0x03, static_cast<std::uint8_t>(us_per_quarter >> 16),
                             static_cast<std::uint8_t>(us_per_quarter >> 8), static_cast<std::uint8_t>(us_per_quarter)});
  std::int64_t now = 0;
  for (const Event& e : events) {
    const MidiNote& n = song.notes[e.note];
    put_varlen(track, static_cast<std::uint64_t>(e.tick - now));
    now = e.tick;
    if (e.order == 1) {
      put_meta(track, 0x05, n.lyric);
    } else {
      track.push_back(e.order == 2 ? 0x90 : 0x80);
      track.push_back(static_cast<std::uint8_t>(n.pitch));
      track.push_back(static_cast<std::uint8_t>(e.order == 2 ? n.velocity : 0x40));
    }
  }
  put_varlen(track, 0);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd'};
  put_u32(out, 6);
  put_u16(out, 0);
  put_u16(out, 1);
  put_u16(out, static_cast<unsigned>(song.resolution));
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  put_u32(out, static_cast<std::uint32_t>(track.size()));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

std::size_t write_midi_file(const MidiSong& song, const std::filesystem::path& path) {
  const auto bytes = encode_midi(song);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
  return bytes.size();
}

std::string note_name(int pitch) {
  static constexpr const char* kNames[12] = {"C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};
  if (pitch < 0 || pitch > 127) throw PreconditionError("note_name: pitch out of range");
  return std::string(kNames[pitch % 12]) + std::to_string(pitch / 12 - 1);
}

std::string to_text_score(std::span<const NoteAttributes> notes, std::span<const std::string> syllables) {
  if (notes.size() != syllables.size())
    throw AlignmentError("text score: " + std::to_string(notes.size()) + " notes but " +
                         std::to_string(syllables.size()) + " syllables");
  std::string out;
  for (std::size_t k = 0; k < notes.size(); ++k) {
    out += syllables[k] + ' ' + note_name(notes[k].pitch) + ' ' + format_number(notes[k].duration) + ' ' +
           format_number(notes[k].rest) + '\n';
  }
  return out;
}

}  // namespace ltmn
