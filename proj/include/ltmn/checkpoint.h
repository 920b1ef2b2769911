#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "ltmn/neural.h"

namespace ltmn {

using ConfigMap = std::map<std::string, std::string>;

/// Self-describing model container: string config plus named tensors.
struct Checkpoint {
  ConfigMap config;
  ParameterSet params;
};

// Binary layout, all integers little-endian:
//   "LTMNCKPT" u32 version
//   u32 n_config   { u32 len, key bytes, u32 len, value bytes } * n_config
//   u32 n_tensors  { u32 len, name bytes, u64 rows, u64 cols, f64 * rows*cols (column-major) } * n_tensors
std::string encode_checkpoint(const ConfigMap& config, const ParameterSet& params);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ConfigMap& config,
                     const ParameterSet& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ltmn
