// ltmn: parse, train-emb, train-lm, train-ltmn, compose, eval, baseline.
//
// Artifacts live under <run root>/<config hash>/. The run root is --run-root,
// else $LTMN_RUN_DIR, else ./runs. Exit codes: 0 ok, 1 usage, 2 data,
// 3 missing artifact.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ltmn/eval.h"
#include "ltmn/lyrics_lm.h"
#include "ltmn/melody.h"
#include "ltmn/midi.h"
#include "ltmn/vocabulary.h"

namespace fs = std::filesystem;
using namespace ltmn;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitMissing = 3;

struct UsageError : Error {
  using Error::Error;
};

struct RunConfig {
  std::string corpus;
  std::string scheme = "CSWP";
  int dim = 50;
  int window = 7;
  int negatives = 5;
  double emb_alpha = 0.75;
  double emb_lr_start = 0.03;
  double emb_lr_end = 0.0007;
  int emb_epochs = 5;
  int hidden = 128;
  int attr_embed = 128;
  int attention_dim = 128;
  std::string attention = "shared";
  double init_scale = 0.4;
  double lm_init_scale = 0.2;
  double lr = 1e-4;
  double lm_lr = 1e-4;
  int batch = 32;
  int lm_epochs = 500;
  int epochs = 2000;
  double tau = 0.8;
  std::uint64_t seed = 1;
  std::string run_root;
  std::string run_dir;

  // Per-command inputs; not part of the hash.
  std::string seed_text;
  std::string testset;
  std::string out;
  int lines = 1;
  int max_len = 40;
  int length = 8;
  int top_k = static_cast<int>(kBaselineTopK);
  bool sample_melody = false;

  SkipgramConfig skipgram() const {
    SkipgramConfig c;
    c.window = window;
    c.dim = dim;
    c.negatives = negatives;
    c.alpha = emb_alpha;
    c.lr_start = emb_lr_start;
    c.lr_end = emb_lr_end;
    c.epochs = emb_epochs;
    c.seed = seed;
    return c;
  }
  LmConfig lm() const {
    LmConfig c;
    c.hidden = hidden;
    c.init_scale = lm_init_scale;
    c.schedule.initial = lm_lr;
    c.epochs = lm_epochs;
    c.batch = batch;
    c.seed = seed;
    return c;
  }
  LtmnConfig ltmn() const {
    LtmnConfig c;
    c.hidden = hidden;
    c.attention_dim = attention_dim;
    c.attr_embed = attr_embed;
    c.attention = parse_attention_mode(attention);
    c.init_scale = init_scale;
    c.schedule.initial = lr;
    c.epochs = epochs;
    c.batch = batch;
    c.seed = seed;
    return c;
  }

  void validate() const {
    try {
      parse_composition(scheme);
      skipgram().validate();
      lm().validate();
      ltmn().validate();
    } catch (const PreconditionError& e) {
      throw UsageError(e.what());
    }
    if (!(tau > 0.0)) throw UsageError("tau must be > 0");
    if (lines < 1) throw UsageError("lines must be >= 1");
    if (max_len < 1) throw UsageError("max-len must be >= 1");
    if (length < 1) throw UsageError("length must be >= 1");
    if (top_k < 1) throw UsageError("top-k must be >= 1");
  }

  /// Canonical text of every field that shapes trained artifacts. The
  /// composition scheme is excluded so all four schemes share one run.
  std::string canonical() const {
    std::ostringstream s;
    s << "corpus_fnv=" << corpus_digest << "\ndim=" << dim << "\nwindow=" << window << "\nnegatives=" << negatives
      << "\nemb_alpha=" << format_number(emb_alpha) << "\nemb_lr_start=" << format_number(emb_lr_start)
      << "\nemb_lr_end=" << format_number(emb_lr_end) << "\nemb_epochs=" << emb_epochs << "\nhidden=" << hidden
      << "\nattr_embed=" << attr_embed << "\nattention_dim=" << attention_dim << "\nattention=" << attention
      << "\ninit_scale=" << format_number(init_scale) << "\nlm_init_scale=" << format_number(lm_init_scale) << "\nlr=" << format_number(lr)
      << "\nlm_lr=" << format_number(lm_lr) << "\nbatch=" << batch
      << "\nlm_epochs=" << lm_epochs << "\nepochs=" << epochs << "\nseed=" << seed << "\n";
    return s.str();
  }

  std::string corpus_digest;
};

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void require(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError(path.string());
}

class Run {
 public:
  explicit Run(RunConfig& config) : c_(config) {
    if (c_.corpus.empty()) throw UsageError("--corpus is required");
    c_.corpus_digest = hex64(fnv1a(read_file(c_.corpus)));
    if (!c_.run_dir.empty()) {
      dir_ = c_.run_dir;
    } else {
      fs::path root = c_.run_root;
      if (root.empty()) {
        const char* env = std::getenv("LTMN_RUN_DIR");
        root = env && *env ? env : "runs";
      }
      dir_ = root / hex64(fnv1a(c_.canonical()));
    }
    fs::create_directories(dir_);
    write_file(dir_ / "config.txt", c_.canonical());
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }
  std::string scheme_tag() const { return std::string(to_string(parse_composition(c_.scheme))); }

  const std::vector<AlignedSong>& songs() {
    if (songs_.empty()) {
      songs_ = parse_corpus(c_.corpus);
      if (songs_.empty()) throw ParseError(0, "corpus", c_.corpus + " contains no songs");
    }
    return songs_;
  }

  LyricEmbedder embedder(Composition scheme) {
    const fs::path sv = path("vocab.syllable.tsv"), wv = path("vocab.word.tsv");
    const fs::path se = path("emb.syllable.txt"), we = path("emb.word.txt");
    for (const auto& p : {sv, wv, se, we}) require(p);
    Vocabulary syl = Vocabulary::load(sv);
    Vocabulary word = Vocabulary::load(wv);
    EmbeddingTable syl_table = EmbeddingTable::load(se, syl, TokenLevel::kSyllable);
    EmbeddingTable word_table = EmbeddingTable::load(we, word, TokenLevel::kWord);
    return LyricEmbedder(scheme, std::move(syl), std::move(syl_table), std::move(word), std::move(word_table));
  }

  fs::path lm_path(const std::string& tag) const { return path("lm." + tag + ".ckpt"); }
  fs::path ltmn_path(const std::string& tag) const { return path("ltmn." + tag + ".ckpt"); }

 private:
  RunConfig& c_;
  fs::path dir_;
  std::vector<AlignedSong> songs_;
};

std::string loss_text(std::span<const double> curve) {
  std::string out;
  for (std::size_t e = 0; e < curve.size(); ++e) out += std::to_string(e) + '\t' + format_number(curve[e]) + '\n';
  return out;
}

std::string melody_tsv(const AlignedSong& song, std::span<const NoteAttributes> notes) {
  std::string out;
  for (std::size_t k = 0; k < notes.size(); ++k) {
    out += song.syllables[k] + '\t' + std::to_string(notes[k].pitch) + '\t' + format_number(notes[k].duration) +
           '\t' + format_number(notes[k].rest) + '\n';
  }
  return out;
}

void write_song(const fs::path& dir, const AlignedSong& lyrics, std::string_view lyrics_text,
                std::span<const NoteAttributes> notes) {
  fs::create_directories(dir);
  write_file(dir / "lyrics.txt", lyrics_text);
  write_file(dir / "melody.tsv", melody_tsv(lyrics, notes));
  write_file(dir / "score.txt", to_text_score(notes, lyrics.syllables));
  write_midi_file(to_midi(notes, lyrics.syllables), dir / "song.mid");
}

// ---------------------------------------------------------------------------

int cmd_parse(RunConfig& c) {
  if (c.corpus.empty()) throw UsageError("--corpus is required");
  auto songs = parse_corpus(c.corpus);
  if (songs.empty()) throw ParseError(0, "corpus", c.corpus + " contains no songs");
  std::size_t syllables = 0, words = 0;
  for (const auto& s : songs) {
    syllables += s.length();
    words += s.word_bounds.size();
  }
  const AttributeDistribution dist = attribute_distribution(songs);
  json hist;
  for (AttributeKind kind : kHeads) {
    json h = json::object();
    const auto& p = dist.of(kind);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] > 0.0) h[format_number(attribute_value(kind, static_cast<int>(k)))] = p[k];
    }
    hist[kind == AttributeKind::kPitch ? "pitch" : kind == AttributeKind::kDuration ? "duration" : "rest"] = h;
  }
  json out = {{"songs", songs.size()},
              {"syllables", syllables},
              {"words", words},
              {"syllable_vocab", build_vocab(songs, TokenLevel::kSyllable, 1).size()},
              {"word_vocab", build_vocab(songs, TokenLevel::kWord, 1).size()},
              {"histograms", hist}};
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_train_emb(RunConfig& c) {
  Run run(c);
  const auto& songs = run.songs();
  const SkipgramConfig sg = c.skipgram();
  for (TokenLevel level : {TokenLevel::kSyllable, TokenLevel::kWord}) {
    const std::string name = level == TokenLevel::kSyllable ? "syllable" : "word";
    Vocabulary vocab = build_vocab(songs, level, 1);
    std::vector<TokenId> stream;
    for (const auto& s : songs) {
      auto ids = vocab.encode(song_tokens(s, level));
      stream.insert(stream.end(), ids.begin(), ids.end());
    }
    EmbeddingTable table = train_skipgram(stream, vocab, sg, level);
    vocab.save(run.path("vocab." + name + ".tsv"));
    table.save(run.path("emb." + name + ".txt"), vocab);
    std::cout << name << ": " << vocab.size() << " tokens, dim " << table.dim() << '\n';
  }
  std::cout << "run dir: " << run.dir().string() << '\n';
  return kExitOk;
}

int cmd_train_lm(RunConfig& c) {
  Run run(c);
  const Composition scheme = parse_composition(c.scheme);
  LyricEmbedder embedder = run.embedder(scheme);
  LossCurve curve;
  LyricsLm model = train_lm(run.songs(), embedder, c.lm(), &curve);
  const std::string tag = run.scheme_tag();
  model.vocab().save(run.path("vocab.lm.tsv"));
  model.save(run.lm_path(tag));
  write_file(run.path("lm." + tag + ".loss.txt"), loss_text(curve));
  std::cout << "lm " << tag << ": final loss " << format_number(curve.empty() ? 0.0 : curve.back()) << '\n'
            << "run dir: " << run.dir().string() << '\n';
  return kExitOk;
}

int cmd_train_ltmn(RunConfig& c) {
  Run run(c);
  const Composition scheme = parse_composition(c.scheme);
  LtmnModel model(run.embedder(scheme), c.ltmn());
  LtmnTrainingLog log = train_ltmn(model, run.songs());
  const std::string tag = run.scheme_tag();
  model.save(run.ltmn_path(tag));
  write_file(run.path("ltmn." + tag + ".loss.txt"), loss_text(log.epoch_loss));
  std::cout << "ltmn " << tag << ": final loss "
            << format_number(log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back()) << '\n'
            << "run dir: " << run.dir().string() << '\n';
  return kExitOk;
}

int cmd_compose(RunConfig& c) {
  if (c.seed_text.empty()) throw UsageError("--seed-text is required");
  Run run(c);
  const Composition scheme = parse_composition(c.scheme);
  const std::string tag = run.scheme_tag();
  require(run.lm_path(tag));
  require(run.ltmn_path(tag));
  require(run.path("vocab.lm.tsv"));
  LyricEmbedder embedder = run.embedder(scheme);
  LyricsLm lm = LyricsLm::load(run.lm_path(tag), embedder, Vocabulary::load(run.path("vocab.lm.tsv")));
  LtmnModel melody = LtmnModel::load(run.ltmn_path(tag), embedder);

  std::string lowered = c.seed_text;
  for (char& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  const auto tagged = Lexicon(run.songs()).syllabify(lowered);
  if (tagged.empty()) throw UsageError("--seed-text has no words");
  std::vector<TokenId> seed = lm.vocab().encode(tagged);
  std::size_t unknown = 0;
  for (std::size_t k = 0; k < seed.size(); ++k) {
    if (seed[k] == Vocabulary::kUnk) {
      ++unknown;
      std::cerr << "warning: seed syllable '" << tagged[k] << "' is not in the vocabulary\n";
    }
  }
  if (unknown == seed.size()) throw ParseError(0, "seed", "every seed syllable is unknown");

  const std::size_t max_len = std::max<std::size_t>(static_cast<std::size_t>(c.max_len), seed.size());
  GeneratedLyrics lyrics = generate_lyrics(lm, seed, c.tau, max_len, c.seed, c.lines);
  const DecodeMode mode = c.sample_melody ? DecodeMode::Sample(c.tau, c.seed) : DecodeMode::Greedy();
  GeneratedMelody song = melody.generate(lyrics.song, mode);

  const fs::path out = c.out.empty() ? run.path("compose." + tag) : fs::path(c.out);
  write_song(out, lyrics.song, lyrics.text(), song.notes);
  write_file(out / "attention.txt", song.trace.to_text());
  std::cout << lyrics.text() << "output: " << out.string() << '\n';
  return kExitOk;
}

int cmd_eval(RunConfig& c) {
  Run run(c);
  const fs::path testset = c.testset.empty() ? fs::path(c.corpus) : fs::path(c.testset);
  auto test = parse_corpus(testset);
  if (test.empty()) throw ParseError(0, "testset", testset.string() + " contains no songs");
  const AttributeDistribution dist = attribute_distribution(run.songs());

  std::vector<std::pair<std::string, BleuReport>> rows;
  for (Composition scheme : kAllCompositions) {
    const std::string tag(to_string(scheme));
    if (!fs::exists(run.ltmn_path(tag))) continue;
    LtmnModel model = LtmnModel::load(run.ltmn_path(tag), run.embedder(scheme));
    rows.emplace_back(tag, evaluate_model(model, test));
  }
  if (rows.empty()) {
    const std::string tag = run.scheme_tag();
    throw MissingArtifactError(run.ltmn_path(tag).string());
  }
  rows.emplace_back("baseline", evaluate_baseline(dist, test, c.seed));

  json record = json::object();
  std::string text;
  std::printf("%-10s %10s %10s %10s\n", "model", "pitch", "duration", "rest");
  for (const auto& [name, report] : rows) {
    std::printf("%-10s %10.6f %10.6f %10.6f\n", name.c_str(), report.pitch.bleu, report.duration.bleu,
                report.rest.bleu);
    record[name] = json::parse(report.to_json());
    text += "[" + name + "]\n" + report.to_text();
  }
  write_file(run.path("eval.txt"), text);
  write_file(run.path("eval.json"), record.dump(2) + "\n");
  return kExitOk;
}

int cmd_baseline(RunConfig& c) {
  Run run(c);
  const auto& songs = run.songs();
  Vocabulary vocab = build_vocab(songs, TokenLevel::kSyllable, 1);
  auto syllables = baseline_lyrics(vocab, static_cast<std::size_t>(c.length), c.seed,
                                   static_cast<std::size_t>(c.top_k));
  auto notes = baseline_melody(attribute_distribution(songs), syllables.size(), c.seed);
  std::vector<std::string> tagged = syllables;  // every syllable is its own word
  AlignedSong lyrics = song_from_tagged(tagged, {});
  std::string text;
  for (std::size_t k = 0; k < syllables.size(); ++k) text += (k ? " " : "") + syllables[k];
  text += '\n';
  const fs::path out = c.out.empty() ? run.path("baseline") : fs::path(c.out);
  write_song(out, lyrics, text, notes);
  std::cout << text << "output: " << out.string() << '\n';
  return kExitOk;
}

void add_common(CLI::App* cmd, RunConfig& c) {
  // Lives on the root app; subcommands fall through so flags may follow them.
  cmd->set_config("--config", "", "flat key=value config file; flags override it");
  cmd->add_option("--corpus", c.corpus, "aligned lyrics-melody corpus");
  cmd->add_option("--scheme", c.scheme, "SE|SWC|ASW|CSWP")->capture_default_str();
  cmd->add_option("--dim", c.dim, "embedding dimension")->capture_default_str();
  cmd->add_option("--window", c.window, "skip-gram window")->capture_default_str();
  cmd->add_option("--negatives", c.negatives, "negative samples")->capture_default_str();
  cmd->add_option("--emb-alpha", c.emb_alpha, "negative sampling exponent")->capture_default_str();
  cmd->add_option("--emb-lr-start", c.emb_lr_start)->capture_default_str();
  cmd->add_option("--emb-lr-end", c.emb_lr_end)->capture_default_str();
  cmd->add_option("--emb-epochs", c.emb_epochs)->capture_default_str();
  cmd->add_option("--hidden", c.hidden, "LSTM units")->capture_default_str();
  cmd->add_option("--attr-embed", c.attr_embed, "melody attribute embedding size")->capture_default_str();
  cmd->add_option("--attention-dim", c.attention_dim)->capture_default_str();
  cmd->add_option("--attention", c.attention, "shared|per-head")->capture_default_str();
  cmd->add_option("--init-scale", c.init_scale, "melody model init range")->capture_default_str();
  cmd->add_option("--lm-init-scale", c.lm_init_scale, "language model init range")->capture_default_str();
  cmd->add_option("--lr", c.lr, "melody model Adam learning rate")->capture_default_str();
  cmd->add_option("--lm-lr", c.lm_lr, "language model Adam learning rate")->capture_default_str();
  cmd->add_option("--batch", c.batch)->capture_default_str();
  cmd->add_option("--lm-epochs", c.lm_epochs)->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "melody model epochs")->capture_default_str();
  cmd->add_option("--tau", c.tau, "sampling temperature")->capture_default_str();
  cmd->add_option("--seed", c.seed, "rng seed")->capture_default_str();
  cmd->add_option("--run-root", c.run_root, "parent of hashed run directories (default $LTMN_RUN_DIR or ./runs)");
  cmd->add_option("--run-dir", c.run_dir, "explicit run directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lyrics-to-melody generation"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  RunConfig c;

  auto* parse = app.add_subcommand("parse", "corpus statistics");
  auto* emb = app.add_subcommand("train-emb", "train syllable and word embeddings");
  auto* lm = app.add_subcommand("train-lm", "train the lyrics language model");
  auto* ltmn = app.add_subcommand("train-ltmn", "train the melody generator");
  auto* compose = app.add_subcommand("compose", "generate lyrics and melody from seed words");
  auto* eval = app.add_subcommand("eval", "BLEU of every trained scheme and the baseline");
  auto* baseline = app.add_subcommand("baseline", "random-sampling baseline song");
  add_common(&app, c);
  app.allow_config_extras(CLI::config_extras_mode::error);
  for (auto* cmd : {parse, emb, lm, ltmn, compose, eval, baseline}) cmd->fallthrough();
  compose->add_option("--seed-text", c.seed_text, "seed words");
  compose->add_option("--lines", c.lines, "lyric lines to generate")->capture_default_str();
  compose->add_option("--max-len", c.max_len, "maximum syllables")->capture_default_str();
  compose->add_flag("--sample-melody", c.sample_melody, "sample the melody at --tau instead of greedy decoding");
  compose->add_option("--out", c.out, "output directory");
  eval->add_option("--testset", c.testset, "test corpus (default: training corpus)");
  baseline->add_option("--length", c.length, "syllables")->capture_default_str();
  baseline->add_option("--top-k", c.top_k, "most frequent syllables to draw from")->capture_default_str();
  baseline->add_option("--out", c.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    c.validate();
    if (*parse) return cmd_parse(c);
    if (*emb) return cmd_train_emb(c);
    if (*lm) return cmd_train_lm(c);
    if (*ltmn) return cmd_train_ltmn(c);
    if (*compose) return cmd_compose(c);
    if (*eval) return cmd_eval(c);
    if (*baseline) return cmd_baseline(c);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
