#include "stunet/checkpoint.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "binary_io.hpp"
#include "stunet/error.hpp"

namespace stunet {

namespace {

constexpr std::string_view kMagic = "STCK0001";

std::array<std::pair<const char*, std::size_t>, 7> config_fields(const ModelConfig& c) {
  return {{{"in_channels", c.in_channels},
           {"squeezed_channels", c.squeezed_channels},
           {"levels", c.levels},
           {"base_channels", c.base_channels},
           {"expansion", c.expansion},
           {"width", c.width},
           {"height", c.height}}};
}

}  // namespace

std::vector<char> encode_checkpoint(const ModelParams& params) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  for (const auto& [name, value] : config_fields(params.config())) {
    w.u32(static_cast<std::uint32_t>(value));
  }
  w.u32(static_cast<std::uint32_t>(params.tensors().size()));
  for (const NamedTensor& nt : params.tensors()) {
    w.u32(static_cast<std::uint32_t>(nt.name.size()));
    w.bytes(nt.name);
    w.u32(static_cast<std::uint32_t>(nt.value.rank()));
    for (std::size_t d : nt.value.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : nt.value.data()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

ModelParams decode_checkpoint(const std::vector<char>& bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  if (r.bytes(kMagic.size(), "magic") != kMagic) r.fail("bad checkpoint magic");
  ModelConfig config;
  config.in_channels = r.u32("in_channels");
  config.squeezed_channels = r.u32("squeezed_channels");
  config.levels = r.u32("levels");
  config.base_channels = r.u32("base_channels");
  config.expansion = r.u32("expansion");
  config.width = r.u32("width");
  config.height = r.u32("height");
  try {
    config.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid model header: ") + e.what());
  }

  const std::uint32_t count = r.u32("block count");
  if (count > 4096) r.fail("implausible block count " + std::to_string(count));
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::uint32_t name_len = r.u32("name length");
    if (name_len > 256) r.fail("implausible parameter name length");
    std::string name = r.bytes(name_len, "parameter name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > Shape::kMaxRank) r.fail("bad rank for '" + name + "'");
    std::vector<std::size_t> dims(rank);
    std::size_t numel = 1;
    for (auto& d : dims) {
      d = r.u32("dimension");
      if (d == 0) r.fail("zero dimension in '" + name + "'");
      numel *= d;
    }
    if (numel > r.remaining() / 4) r.fail("truncated payload for '" + name + "'");
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      const float v = r.f32("parameter value");
      if (!std::isfinite(v)) r.fail("non-finite value in '" + name + "'");
      data[i] = v;
    }
    tensors.push_back({std::move(name), Tensor(Shape(dims), std::move(data))});
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last block");
  try {
    return ModelParams(config, std::move(tensors));
  } catch (const ShapeError& e) {
    throw DataError(source + ": " + e.what());
  }
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  detail::write_file_bytes(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::string& path) {
  return decode_checkpoint(detail::read_file_bytes(path), path);
}

void require_compatible(const ModelConfig& expected, const ModelConfig& actual) {
  const auto want = config_fields(expected);
  const auto got = config_fields(actual);
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].second != got[i].second) {
      throw ConfigError(std::string("model config mismatch on '") + want[i].first +
                        "': config says " + std::to_string(want[i].second) +
                        ", checkpoint has " + std::to_string(got[i].second));
    }
  }
}

}  // namespace stunet
