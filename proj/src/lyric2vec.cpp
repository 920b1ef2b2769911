#include "ltmn/lyric2vec.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ltmn {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct PairGradient {
  double loss = 0.0;
  Vector d_center;
  std::vector<std::pair<TokenId, Vector>> d_output_rows;
};

void check_id(TokenId id, Eigen::Index rows) {
  if (id < 0 || id >= rows) throw PreconditionError("token id " + std::to_string(id) + " out of range");
}

PairGradient pair_gradient(const Matrix& input, const Matrix& output, TokenId center, TokenId context,
                           std::span<const TokenId> negatives, bool want_grads) {
  check_id(center, input.rows());
  check_id(context, output.rows());
  PairGradient out;
  const auto v = input.row(center);
  if (want_grads) out.d_center = Vector::Zero(input.cols());

  auto term = [&](TokenId id, double label) {
    check_id(id, output.rows());
    const auto u = output.row(id);
    double score = u.dot(v);
    // label 1: -log sigmoid(score); label 0: -log sigmoid(-score)
    out.loss -= label > 0 ? log_sigmoid(score) : log_sigmoid(-score);
    if (want_grads) {
      double g = sigmoid(score) - label;
      out.d_center += g * u.transpose();
      out.d_output_rows.emplace_back(id, g * v.transpose());
    }
  };
  term(context, 1.0);
  for (TokenId n : negatives) term(n, 0.0);
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string_view to_string(Composition scheme) {
  switch (scheme) {
    case Composition::kSE:
      return "SE";
    case Composition::kSWC:
      return "SWC";
    case Composition::kASW:
      return "ASW";
    case Composition::kCSWP:
      return "CSWP";
  }
  return "?";
}

Composition parse_composition(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (Composition s : kAllCompositions)
    if (to_string(s) == upper) return s;
  throw PreconditionError("unknown composition scheme '" + std::string(name) + "' (SE|SWC|ASW|CSWP)");
}

Eigen::Index composed_dim(Composition scheme, Eigen::Index dim) {
  switch (scheme) {
    case Composition::kSE:
    case Composition::kASW:
      return dim;
    case Composition::kSWC:
      return 2 * dim;
    case Composition::kCSWP:
      return 3 * dim;
  }
  return dim;
}

void SkipgramConfig::validate() const {
  if (window < 1) throw PreconditionError("skip-gram window must be >= 1");
  if (dim < 1) throw PreconditionError("embedding dim must be >= 1");
  if (negatives < 1) throw PreconditionError("negative samples must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw PreconditionError("alpha must be in (0, 1]");
  if (!(lr_end > 0.0 && lr_start > lr_end)) throw PreconditionError("need lr_start > lr_end > 0");
  if (epochs < 1) throw PreconditionError("epochs must be >= 1");
}

Vector EmbeddingTable::vector(TokenId id) const {
  check_id(id, input.rows());
  return input.row(id).transpose();
}

std::string EmbeddingTable::to_text(const Vocabulary& vocab) const {
  if (static_cast<std::size_t>(input.rows()) != vocab.size())
    throw ShapeError("embedding table does not match vocabulary size");
  std::string out = std::to_string(input.rows()) + " " + std::to_string(input.cols()) + "\n";
  for (Eigen::Index r = 0; r < input.rows(); ++r) {
    out += vocab.token(static_cast<TokenId>(r));
    for (Eigen::Index c = 0; c < input.cols(); ++c) {
      out += ' ';
      out += format_number(input(r, c));
    }
    out += '\n';
  }
  return out;
}

void EmbeddingTable::save(const std::filesystem::path& path, const Vocabulary& vocab) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_text(vocab);
}

EmbeddingTable EmbeddingTable::from_text(std::string_view text, const Vocabulary& vocab, TokenLevel level) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
  }
  if (lines.empty()) throw ParseError(1, "header", "empty embedding file");
  auto header = split_ws(lines[0]);
  long rows = -1, cols = -1;
  if (header.size() != 2 || std::sscanf(std::string(header[0]).c_str(), "%ld", &rows) != 1 ||
      std::sscanf(std::string(header[1]).c_str(), "%ld", &cols) != 1 || rows < 0 || cols < 1) {
    throw ParseError(1, "header", "expected '<|V|> <v>'");
  }
  if (static_cast<std::size_t>(rows) != vocab.size())
    throw ParseError(1, "header", "row count does not match vocabulary");
  EmbeddingTable table;
  table.level = level;
  table.input = Matrix::Zero(rows, cols);
  table.output = Matrix::Zero(rows, cols);
  for (long r = 0; r < rows; ++r) {
    std::size_t ln = static_cast<std::size_t>(r) + 1;
    if (ln >= lines.size()) throw ParseError(ln + 1, "row", "missing row");
    auto fields = split_ws(lines[ln]);
    if (fields.size() != static_cast<std::size_t>(cols) + 1)
      throw ParseError(ln + 1, "row", "expected token and " + std::to_string(cols) + " values");
    if (fields[0] != vocab.token(static_cast<TokenId>(r)))
      throw ParseError(ln + 1, "token", "token order does not match vocabulary");
    for (long c = 0; c < cols; ++c) {
      std::string field(fields[static_cast<std::size_t>(c) + 1]);
      char* end = nullptr;
      double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size() || !std::isfinite(v))
        throw ParseError(ln + 1, "value " + std::to_string(c + 1), "not a finite number");
      table.input(r, c) = v;
    }
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, const Vocabulary& vocab,
                                    TokenLevel level) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str(), vocab, level);
}

std::vector<double> negative_sampling_distribution(const Vocabulary& vocab, double alpha) {
  if (vocab.size() == 0) throw PreconditionError("empty vocabulary");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw PreconditionError("alpha must be in (0, 1]");
  std::vector<double> p(vocab.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto c = vocab.counts()[i];
    p[i] = c > 0 ? std::pow(static_cast<double>(c), alpha) : 0.0;
    total += p[i];
  }
  if (!(total > 0.0)) throw PreconditionError("vocabulary has no counted tokens");
  for (double& x : p) x /= total;
  return p;
}

std::vector<std::pair<TokenId, TokenId>> skipgram_pairs(std::span<const TokenId> tokens, int window) {
  if (window < 1) throw PreconditionError("window must be >= 1");
  std::vector<std::pair<TokenId, TokenId>> pairs;
  const auto n = static_cast<std::ptrdiff_t>(tokens.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    for (std::ptrdiff_t o = -window; o <= window; ++o) {
      if (o == 0 || t + o < 0 || t + o >= n) continue;
      pairs.emplace_back(tokens[static_cast<std::size_t>(t)], tokens[static_cast<std::size_t>(t + o)]);
    }
  }
  return pairs;
}

double skipgram_pair_loss(const Matrix& input, const Matrix& output, TokenId center, TokenId context,
                          std::span<const TokenId> negatives, Matrix* d_input, Matrix* d_output) {
  bool want = d_input != nullptr || d_output != nullptr;
  PairGradient g = pair_gradient(input, output, center, context, negatives, want);
  if (d_input) d_input->row(center) += g.d_center.transpose();
  if (d_output)
    for (const auto& [id, row] : g.d_output_rows) d_output->row(id) += row.transpose();
  return g.loss;
}

double negative_sampling_objective(const EmbeddingTable& table,
                                   std::span<const std::pair<TokenId, TokenId>> probes,
                                   std::span<const TokenId> negatives, int k) {
  if (probes.empty()) throw PreconditionError("empty probe set");
  if (k < 0 || negatives.size() != probes.size() * static_cast<std::size_t>(k))
    throw ShapeError("negatives must hold k ids per probe");
  double sum = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    auto neg = negatives.subspan(i * static_cast<std::size_t>(k), static_cast<std::size_t>(k));
    sum -= skipgram_pair_loss(table.input, table.output, probes[i].first, probes[i].second, neg);
  }
  return sum / static_cast<double>(probes.size());
}

EmbeddingTable init_embedding_table(const Vocabulary& vocab, const SkipgramConfig& config, TokenLevel level) {
  config.validate();
  Rng rng(config.seed);
  EmbeddingTable table;
  table.level = level;
  const auto rows = static_cast<Eigen::Index>(vocab.size());
  table.input = Matrix(rows, config.dim);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < config.dim; ++c)
      table.input(r, c) = uniform(rng, -0.5 / config.dim, 0.5 / config.dim);
  table.output = Matrix::Zero(rows, config.dim);
  return table;
}

EmbeddingTable train_skipgram(std::span<const TokenId> tokens, const Vocabulary& vocab,
                              const SkipgramConfig& config, TokenLevel level) {
  config.validate();
  if (tokens.empty()) throw PreconditionError("train_skipgram: empty token stream");
  for (TokenId t : tokens) check_id(t, static_cast<Eigen::Index>(vocab.size()));

  EmbeddingTable table = init_embedding_table(vocab, config, level);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<double> cumulative = negative_sampling_distribution(vocab, config.alpha);
  for (std::size_t i = 1; i < cumulative.size(); ++i) cumulative[i] += cumulative[i - 1];
  auto draw_negative = [&]() {
    double u = uniform01(rng) * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<TokenId>(it - cumulative.begin());
  };

  const auto n = static_cast<std::ptrdiff_t>(tokens.size());
  const double total = static_cast<double>(config.epochs) * static_cast<double>(n);
  double processed = 0.0;
  std::vector<TokenId> negatives;
  negatives.reserve(static_cast<std::size_t>(config.negatives));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::ptrdiff_t t = 0; t < n; ++t, processed += 1.0) {
      const double lr = config.lr_start - (config.lr_start - config.lr_end) * (processed / total);
      const TokenId center = tokens[static_cast<std::size_t>(t)];
      for (std::ptrdiff_t o = -config.window; o <= config.window; ++o) {
        if (o == 0 || t + o < 0 || t + o >= n) continue;
        const TokenId context = tokens[static_cast<std::size_t>(t + o)];
        negatives.clear();
        for (int k = 0; k < config.negatives; ++k) {
          TokenId neg = draw_negative();
          if (neg != context) negatives.push_back(neg);
        }
        PairGradient g = pair_gradient(table.input, table.output, center, context, negatives, true);
        for (const auto& [id, row] : g.d_output_rows) table.output.row(id) -= lr * row.transpose();
        table.input.row(center) -= lr * g.d_center.transpose();
      }
    }
  }
  return table;
}

Vector project(const Vector& s, const Vector& w) {
  if (s.size() != w.size()) throw ShapeError("project: dimension mismatch");
  double norm2 = w.squaredNorm();
  if (!(norm2 > 0.0)) throw PreconditionError("project: zero-norm target vector");
  return (s.dot(w) / norm2) * w;
}

Vector compose(Composition scheme, const Vector& s, const Vector& w) {
  if (scheme == Composition::kSE) return s;
  if (s.size() != w.size()) throw ShapeError("compose: syllable and word dimensions differ");
  const Eigen::Index v = s.size();
  Vector out(composed_dim(scheme, v));
  switch (scheme) {
    case Composition::kSWC:
      out << s, w;
      break;
    case Composition::kASW:
      out = s + w;
      break;
    case Composition::kCSWP:
      out << s, w, (w.squaredNorm() > 0.0 ? project(s, w) : Vector::Zero(v));
      break;
    case Composition::kSE:
      break;
  }
  return out;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: dimension mismatch");
  double denom = a.norm() * b.norm();
  return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

LyricEmbedder::LyricEmbedder(Composition scheme, Vocabulary syllable_vocab, EmbeddingTable syllable_table,
                             Vocabulary word_vocab, EmbeddingTable word_table)
    : scheme_(scheme),
      syllable_vocab_(std::move(syllable_vocab)),
      syllable_table_(std::move(syllable_table)),
      word_vocab_(std::move(word_vocab)),
      word_table_(std::move(word_table)) {
  if (static_cast<std::size_t>(syllable_table_.size()) != syllable_vocab_.size() ||
      static_cast<std::size_t>(word_table_.size()) != word_vocab_.size()) {
    throw ShapeError("embedding tables do not match their vocabularies");
  }
  if (syllable_table_.dim() != word_table_.dim())
    throw ShapeError("syllable and word embeddings have different dimensions");
}

Vector LyricEmbedder::syllable_vector(std::string_view syllable) const {
  return syllable_table_.vector(syllable_vocab_.id(syllable));
}

Vector LyricEmbedder::embed(std::string_view syllable, std::optional<std::string_view> word) const {
  Vector s = syllable_vector(syllable);
  if (scheme_ == Composition::kSE) return s;
  Vector w = s;
  if (word && word_vocab_.contains(*word)) {
    TokenId id = word_vocab_.id(*word);
    if (id >= Vocabulary::kReserved) w = word_table_.vector(id);
  }
  return compose(scheme_, s, w);
}

Vector LyricEmbedder::embed_special(TokenId id) const {
  if (id < 0 || id >= Vocabulary::kReserved) throw PreconditionError("not a reserved token id");
  return compose(scheme_, syllable_table_.vector(id), word_table_.vector(id));
}

std::vector<Vector> LyricEmbedder::embed_song(const AlignedSong& song) const {
  std::vector<Vector> out;
  out.reserve(song.length());
  for (std::size_t w = 0; w < song.word_bounds.size(); ++w) {
    const Span& span = song.word_bounds[w];
    std::string word = song.word(w);
    for (std::size_t s = span.begin; s < span.end; ++s) out.push_back(embed(song.syllables[s], word));
  }
  return out;
}

Vector LyricEmbedder::embed_next(std::string_view token, std::string& pending) const {
  if (token == Vocabulary::kBosToken || token == Vocabulary::kEosToken) {
    pending.clear();
    return embed_special(token == Vocabulary::kBosToken ? Vocabulary::kBos : Vocabulary::kEos);
  }
  std::string_view syllable = plain_syllable(token);
  pending += syllable;
  if (continues_word(token)) return embed(syllable, std::nullopt);
  Vector v = embed(syllable, pending);
  pending.clear();
  return v;
}

std::vector<Vector> LyricEmbedder::embed_causal(std::span<const std::string> tagged) const {
  std::vector<Vector> out;
  out.reserve(tagged.size());
  std::string pending;
  for (const std::string& token : tagged) out.push_back(embed_next(token, pending));
  return out;
}

}  // namespace ltmn
