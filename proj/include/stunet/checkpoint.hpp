#pragma once

#include <string>
#include <vector>

#include "stunet/model.hpp"

namespace stunet {

// Checkpoint container, all integers little-endian uint32:
//
//   magic "STCK0001"
//   in_channels squeezed_channels levels base_channels expansion width height
//   block_count
//   block_count x { name_len, name bytes, rank, dims[rank], float32 data[numel] }
//
// Parameters are stored as float32, so a save/load/save cycle is byte exact
// while a float64 -> float32 -> float64 trip rounds.
std::vector<char> encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::vector<char>& bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

// Throws ConfigError naming the first field where the configs differ.
void require_compatible(const ModelConfig& expected, const ModelConfig& actual);

}  // namespace stunet
