#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stunet/tensor.hpp"

namespace stunet {

enum class FeatureKind { kST3D, kI3D, k2D, kSynthetic };

const char* feature_kind_name(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& name);

// T x C x w x h features; each step stands for `expansion` video frames.
struct FeatureSequence {
  std::string video_id;
  Tensor features;
  std::size_t expansion = 1;
  FeatureKind kind = FeatureKind::kSynthetic;

  std::size_t steps() const { return features.dim(0); }
  std::size_t channels() const { return features.dim(1); }
  std::size_t frames() const { return steps() * expansion; }
};

// Row-major L x D matrix of per-frame vectors.
class FrameMatrix {
 public:
  FrameMatrix() = default;
  FrameMatrix(std::size_t rows, std::size_t cols);
  FrameMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Spatially pooled step vectors, each repeated `expansion` times so rows are
// indexed by frame.
FrameMatrix frame_vectors(const FeatureSequence& seq);

// FSEQ container: magic "FSEQ0001", little-endian uint32 T C w h n, then
// T*C*w*h little-endian float32 values in row-major order.
std::vector<char> encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(const std::vector<char>& bytes, const std::string& source);
void write_features(const std::string& path, const FeatureSequence& seq);
FeatureSequence read_features(const std::string& path);

struct PaddedSequence {
  FeatureSequence sequence;
  std::size_t original_steps = 0;
  std::size_t original_frames = 0;
};

// Right-pads by repeating the final step until T is a multiple of 2^levels.
PaddedSequence pad_to_pow2(const FeatureSequence& seq, std::size_t levels);

// Drops scores that belong to padded steps.
std::vector<double> truncate_scores(std::span<const double> scores, std::size_t original_frames);

}  // namespace stunet
