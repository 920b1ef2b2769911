#include "ltmn/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ltmn {

namespace {

constexpr char kMagic[8] = {'L', 'T', 'M', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string() {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError(0, "checkpoint", "truncated data");
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 8;
};

}  // namespace

std::string encode_checkpoint(const ConfigMap& config, const ParameterSet& params) {
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  for (const auto& [key, value] : config) {
    put_string(out, key);
    put_string(out, value);
  }
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& m = params[k];
    put_string(out, params.name(k));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ParseError(0, "checkpoint", "bad magic");
  Reader in(bytes);
  if (in.get<std::uint32_t>() != kVersion) throw ParseError(0, "checkpoint", "unsupported version");
  Checkpoint ckpt;
  auto n_config = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_config; ++i) {
    std::string key = in.get_string();
    ckpt.config[key] = in.get_string();
  }
  auto n_tensors = in.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < n_tensors; ++k) {
    std::string name = in.get_string();
    auto rows = in.get<std::uint64_t>();
    auto cols = in.get<std::uint64_t>();
    in.need(rows * cols * 8);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(in.get<std::uint64_t>());
    require_finite(m, "checkpoint tensor " + name);
    ckpt.params.add(std::move(name), std::move(m));
  }
  if (!in.done()) throw ParseError(0, "checkpoint", "trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ConfigMap& config, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << encode_checkpoint(config, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_checkpoint(buffer.str());
}

}  // namespace ltmn
