#include "stunet/features.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "stunet/error.hpp"

namespace stunet {

namespace {
constexpr std::string_view kMagic = "FSEQ0001";
}  // namespace

const char* feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kST3D: return "st3d";
    case FeatureKind::kI3D: return "i3d";
    case FeatureKind::k2D: return "2d";
    case FeatureKind::kSynthetic: return "synthetic";
  }
  return "synthetic";
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "st3d") return FeatureKind::kST3D;
  if (name == "i3d") return FeatureKind::kI3D;
  if (name == "2d") return FeatureKind::k2D;
  if (name == "synthetic") return FeatureKind::kSynthetic;
  throw ConfigError("unknown feature kind '" + name + "' (expected st3d, i3d, 2d or synthetic)");
}

FrameMatrix::FrameMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

FrameMatrix::FrameMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw ShapeError("FrameMatrix: data size mismatch");
}

FrameMatrix frame_vectors(const FeatureSequence& seq) {
  const Tensor& f = seq.features;
  const std::size_t steps = f.dim(0);
  const std::size_t channels = f.dim(1);
  const std::size_t area = f.dim(2) * f.dim(3);
  FrameMatrix m(steps * seq.expansion, channels);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::size_t s = 0; s < area; ++s) acc += f[(t * channels + c) * area + s];
      const double pooled = acc / static_cast<double>(area);
      for (std::size_t k = 0; k < seq.expansion; ++k) m.row(t * seq.expansion + k)[c] = pooled;
    }
  }
  return m;
}

std::vector<char> encode_features(const FeatureSequence& seq) {
  const Tensor& f = seq.features;
  if (f.rank() != 4) throw ShapeError("features must be [T, C, w, h], got " + f.shape().to_string());
  detail::ByteWriter w;
  w.bytes(kMagic);
  for (std::size_t axis = 0; axis < 4; ++axis) w.u32(static_cast<std::uint32_t>(f.dim(axis)));
  w.u32(static_cast<std::uint32_t>(seq.expansion));
  for (double v : f.data()) w.f32(static_cast<float>(v));
  return w.buffer();
}

FeatureSequence decode_features(const std::vector<char>& bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  if (r.bytes(kMagic.size(), "magic") != kMagic) r.fail("bad magic (expected FSEQ0001)");
  std::size_t dims[4];
  const char* names[4] = {"T", "C", "w", "h"};
  for (int i = 0; i < 4; ++i) {
    dims[i] = r.u32(names[i]);
    if (dims[i] == 0) r.fail(std::string("zero extent for ") + names[i]);
  }
  const std::size_t n = r.u32("n");
  if (n == 0) r.fail("expansion n must be >= 1");
  const std::size_t count = dims[0] * dims[1] * dims[2] * dims[3];
  if (count > r.remaining() / 4) {
    r.fail("truncated payload: header promises " + std::to_string(count) + " floats, " +
           std::to_string(r.remaining() / 4) + " present");
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float v = r.f32("feature value");
    if (!std::isfinite(v)) {
      throw DataError(source + ": non-finite feature value at byte offset " +
                      std::to_string(r.offset() - 4));
    }
    data[i] = v;
  }
  if (r.remaining() != 0) r.fail("trailing bytes after payload");

  FeatureSequence seq;
  seq.features = Tensor(Shape{dims[0], dims[1], dims[2], dims[3]}, std::move(data));
  seq.expansion = n;
  return seq;
}

void write_features(const std::string& path, const FeatureSequence& seq) {
  detail::write_file_bytes(path, encode_features(seq));
}

FeatureSequence read_features(const std::string& path) {
  return decode_features(detail::read_file_bytes(path), path);
}

PaddedSequence pad_to_pow2(const FeatureSequence& seq, std::size_t levels) {
  if (levels == 0) throw ConfigError("pad_to_pow2: levels must be >= 1");
  const std::size_t multiple = std::size_t{1} << levels;
  const std::size_t steps = seq.steps();
  const std::size_t padded_steps = (steps + multiple - 1) / multiple * multiple;

  PaddedSequence out;
  out.original_steps = steps;
  out.original_frames = seq.frames();
  out.sequence = seq;
  if (padded_steps == steps) return out;

  const std::size_t block = seq.features.size() / steps;
  std::vector<double> data(seq.features.data().begin(), seq.features.data().end());
  data.reserve(padded_steps * block);
  const std::size_t last = (steps - 1) * block;
  for (std::size_t t = steps; t < padded_steps; ++t) {
    for (std::size_t i = 0; i < block; ++i) data.push_back(data[last + i]);
  }
  std::vector<std::size_t> dims = seq.features.shape().dims();
  dims[0] = padded_steps;
  out.sequence.features = Tensor(Shape(dims), std::move(data));
  return out;
}

std::vector<double> truncate_scores(std::span<const double> scores, std::size_t original_frames) {
  if (scores.size() < original_frames) {
    throw ShapeError("truncate_scores: " + std::to_string(scores.size()) +
                     " scores cannot cover " + std::to_string(original_frames) + " frames");
  }
  return {scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(original_frames)};
}

}  // namespace stunet
