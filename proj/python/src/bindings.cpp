#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <optional>

#include "ltmn/eval.h"
#include "ltmn/lyric2vec.h"
#include "ltmn/melody.h"
#include "ltmn/midi.h"

namespace py = pybind11;
using namespace ltmn;
namespace fs = std::filesystem;

namespace {

using Distribution = std::map<std::string, std::vector<double>>;

Distribution to_dict(const AttributeDistribution& d) { return {{"pitch", d.pitch}, {"duration", d.duration}, {"rest", d.rest}}; }

AttributeDistribution from_dict(const Distribution& d) {
  auto get = [&](const char* key) {
    auto it = d.find(key);
    if (it == d.end()) throw PreconditionError(std::string("distribution lacks '") + key + "'");
    return it->second;
  };
  return {get("pitch"), get("duration"), get("rest")};
}

py::dict score_dict(const BleuScore& s) {
  py::dict out;
  out["bleu"] = s.bleu;
  out["precisions"] = s.precisions;
  out["brevity_penalty"] = s.brevity_penalty;
  out["candidate_length"] = s.candidate_length;
  out["reference_length"] = s.reference_length;
  return out;
}

fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifactError(p.string());
  return p;
}

LyricEmbedder load_embedder(const fs::path& run_dir, const std::string& scheme) {
  Vocabulary syl = Vocabulary::load(require(run_dir / "vocab.syllable.tsv"));
  Vocabulary word = Vocabulary::load(require(run_dir / "vocab.word.tsv"));
  EmbeddingTable st = EmbeddingTable::load(require(run_dir / "emb.syllable.txt"), syl, TokenLevel::kSyllable);
  EmbeddingTable wt = EmbeddingTable::load(require(run_dir / "emb.word.txt"), word, TokenLevel::kWord);
  return LyricEmbedder(parse_composition(scheme), std::move(syl), std::move(st), std::move(word), std::move(wt));
}

/// Trained melody generator read from a run directory.
class MelodyModel {
 public:
  MelodyModel(const fs::path& run_dir, const std::string& scheme)
      : model_(LtmnModel::load(require(run_dir / ("ltmn." + std::string(to_string(parse_composition(scheme))) + ".ckpt")),
                               load_embedder(run_dir, scheme))) {}

  py::tuple generate(const std::vector<std::string>& tagged_syllables, bool greedy, double tau,
                     std::uint64_t seed) const {
    AlignedSong lyrics = song_from_tagged(tagged_syllables);
    GeneratedMelody out =
        generate_melody(model_, lyrics, greedy ? DecodeMode::Greedy() : DecodeMode::Sample(tau, seed));
    return py::make_tuple(out.notes, Matrix(out.trace.alpha));
  }

  std::string scheme() const { return std::string(to_string(model_.embedder().scheme())); }

 private:
  LtmnModel model_;
};

}  // namespace

PYBIND11_MODULE(_ltmn, m) {
  m.doc() = "Lyrics-to-melody generation core";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<PreconditionError>(m, "PreconditionError", error);
  py::register_exception<ShapeError>(m, "ShapeError", error);
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<AlignmentError>(m, "AlignmentError", error);
  py::register_exception<AttributeError>(m, "NoteAttributeError", error);
  py::register_exception<MissingArtifactError>(m, "MissingArtifactError", error);

  m.attr("DURATION_VALUES") = std::vector<double>(kDurationValues.begin(), kDurationValues.end());
  m.attr("REST_VALUES") = std::vector<double>(kRestValues.begin(), kRestValues.end());

  py::class_<NoteAttributes>(m, "Note")
      .def(py::init<int, double, double>(), py::arg("pitch"), py::arg("duration"), py::arg("rest") = 0.0)
      .def_readwrite("pitch", &NoteAttributes::pitch)
      .def_readwrite("duration", &NoteAttributes::duration)
      .def_readwrite("rest", &NoteAttributes::rest)
      .def(py::self == py::self)
      .def("__repr__", [](const NoteAttributes& n) {
        return "Note(" + std::to_string(n.pitch) + ", " + format_number(n.duration) + ", " + format_number(n.rest) +
               ")";
      });

  py::class_<AlignedSong>(m, "Song")
      .def_readonly("syllables", &AlignedSong::syllables)
      .def_readonly("notes", &AlignedSong::notes)
      .def("__len__", &AlignedSong::length)
      .def("tokens", [](const AlignedSong& s, const std::string& level) {
        TokenLevel l = level == "word" ? TokenLevel::kWord
                       : level == "tagged" ? TokenLevel::kTaggedSyllable
                       : level == "syllable" ? TokenLevel::kSyllable
                       : throw PreconditionError("level must be syllable, word or tagged");
        return song_tokens(s, l);
      }, py::arg("level") = "syllable")
      .def("__str__", &serialize_song);

  m.def("validate_attributes", &validate_attributes, py::arg("pitch"), py::arg("duration"), py::arg("rest"));
  m.def("parse_corpus", [](const fs::path& p) { return parse_corpus(p); }, py::arg("path"));
  m.def("parse_corpus_text", [](const std::string& t) { return parse_corpus_text(t); }, py::arg("text"));
  m.def("attribute_distribution", [](const std::vector<AlignedSong>& songs) {
    return to_dict(attribute_distribution(songs));
  }, py::arg("songs"));

  m.def("project", &project, py::arg("s"), py::arg("w"));
  m.def("compose", [](const std::string& scheme, const Vector& s, const Vector& w) {
    return compose(parse_composition(scheme), s, w);
  }, py::arg("scheme"), py::arg("s"), py::arg("w"));
  m.def("composed_dim", [](const std::string& scheme, Eigen::Index v) {
    return composed_dim(parse_composition(scheme), v);
  }, py::arg("scheme"), py::arg("dim"));

  m.def("softmax_with_temperature", &softmax_with_temperature, py::arg("logits"), py::arg("tau"));
  m.def("entropy", &entropy, py::arg("probs"));

  m.def("bleu_corpus", [](const std::vector<ClassSequence>& c, const std::vector<ClassSequence>& r, int max_n) {
    return score_dict(bleu_corpus(c, r, max_n));
  }, py::arg("candidates"), py::arg("references"), py::arg("max_n") = 4);
  m.def("baseline_melody", [](const Distribution& d, std::size_t length, std::uint64_t seed) {
    return baseline_melody(from_dict(d), length, seed);
  }, py::arg("distribution"), py::arg("length"), py::arg("seed"));

  m.def("midi_bytes", [](const std::vector<NoteAttributes>& notes, const std::vector<std::string>& syllables,
                         double tempo, int resolution) {
    auto bytes = encode_midi(to_midi(notes, syllables, tempo, resolution));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }, py::arg("notes"), py::arg("syllables"), py::arg("tempo_bpm") = kDefaultTempoBpm,
        py::arg("resolution") = kDefaultResolution);
  m.def("write_midi_file", [](const std::vector<NoteAttributes>& notes, const std::vector<std::string>& syllables,
                              const fs::path& path, double tempo, int resolution) {
    return write_midi_file(to_midi(notes, syllables, tempo, resolution), path);
  }, py::arg("notes"), py::arg("syllables"), py::arg("path"), py::arg("tempo_bpm") = kDefaultTempoBpm,
        py::arg("resolution") = kDefaultResolution);
  m.def("note_name", &note_name, py::arg("pitch"));
  m.def("text_score", [](const std::vector<NoteAttributes>& notes, const std::vector<std::string>& syllables) {
    return to_text_score(notes, syllables);
  }, py::arg("notes"), py::arg("syllables"));

  py::class_<MelodyModel>(m, "MelodyModel")
      .def(py::init<const fs::path&, const std::string&>(), py::arg("run_dir"), py::arg("scheme") = "CSWP")
      .def_property_readonly("scheme", &MelodyModel::scheme)
      .def("generate", &MelodyModel::generate, py::arg("syllables"), py::arg("greedy") = true,
           py::arg("tau") = 0.8, py::arg("seed") = 1);
}
