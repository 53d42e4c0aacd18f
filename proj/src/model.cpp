#include "stunet/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stunet/error.hpp"

namespace stunet {

namespace {

constexpr Conv3dOptions kSamePadding{{1, 1, 1}, {1, 1, 1}};

std::string conv_name(const std::string& stage, char which, const char* field) {
  return stage + ".conv" + which + "." + field;
}

Var conv_relu(Var x, const BoundParams& params, const std::string& stage, char which) {
  Var y = ops::conv3d(x, params.at(conv_name(stage, which, "weight")), kSamePadding);
  y = ops::add_channel_bias(y, params.at(conv_name(stage, which, "bias")));
  return ops::relu(y);
}

Var double_conv(Var x, const BoundParams& params, const std::string& stage) {
  return conv_relu(conv_relu(x, params, stage, 'a'), params, stage, 'b');
}

}  // namespace

void ModelConfig::validate() const {
  if (in_channels == 0) throw ConfigError("model.in_channels must be >= 1");
  if (squeezed_channels == 0 || squeezed_channels > in_channels) {
    throw ConfigError("model.squeezed_channels must lie in [1, in_channels]");
  }
  if (levels == 0) throw ConfigError("model.levels must be >= 1");
  if (levels > 10) throw ConfigError("model.levels must be <= 10");
  if (base_channels == 0) throw ConfigError("model.base_channels must be >= 1");
  if (expansion == 0) throw ConfigError("model.expansion must be >= 1");
  if (width == 0 || height == 0) throw ConfigError("model spatial dims must be >= 1");
}

FramePolicy::FramePolicy(std::vector<double> probs) : p(std::move(probs)) {
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!(p[t] >= 0.0 && p[t] <= 1.0)) {
      throw NumericError("frame policy value p[" + std::to_string(t) + "] = " +
                         std::to_string(p[t]) + " is not a probability");
    }
  }
}

ModelParams::ModelParams(ModelConfig config, std::vector<NamedTensor> tensors)
    : config_(config), tensors_(std::move(tensors)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != tensors_.size()) {
    throw ShapeError("model expects " + std::to_string(layout.size()) + " parameter tensors, got " +
                     std::to_string(tensors_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != tensors_[i].name) {
      throw ShapeError("parameter " + std::to_string(i) + " should be '" + layout[i].first +
                       "', got '" + tensors_[i].name + "'");
    }
    if (layout[i].second != tensors_[i].value.shape()) {
      throw ShapeError("parameter '" + layout[i].first + "' should have shape " +
                       layout[i].second.to_string() + ", got " +
                       tensors_[i].value.shape().to_string());
    }
  }
}

const Tensor& ModelParams::at(std::string_view name) const {
  for (const NamedTensor& nt : tensors_) {
    if (nt.name == name) return nt.value;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

void ModelParams::set(std::string_view name, Tensor value) {
  for (NamedTensor& nt : tensors_) {
    if (nt.name != name) continue;
    if (nt.value.shape() != value.shape()) {
      throw ShapeError("parameter '" + nt.name + "' shape " + nt.value.shape().to_string() +
                       " cannot be replaced by " + value.shape().to_string());
    }
    nt.value = std::move(value);
    return;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& nt : tensors_) n += nt.value.size();
  return n;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, Shape>> layout;
  auto conv = [&layout](const std::string& stage, char which, std::size_t out, std::size_t in) {
    layout.emplace_back(conv_name(stage, which, "weight"), Shape{out, in, 3, 3, 3});
    layout.emplace_back(conv_name(stage, which, "bias"), Shape{out});
  };

  layout.emplace_back("squeeze.weight", Shape{config.squeezed_channels, config.in_channels, 1, 1, 1});
  std::size_t in = config.squeezed_channels;
  for (std::size_t l = 0; l < config.levels; ++l) {
    const std::size_t c = config.level_channels(l);
    conv("enc" + std::to_string(l), 'a', c, in);
    conv("enc" + std::to_string(l), 'b', c, c);
    in = c;
  }
  const std::size_t bottom = config.level_channels(config.levels);
  conv("bottleneck", 'a', bottom, in);
  conv("bottleneck", 'b', bottom, bottom);
  for (std::size_t l = config.levels; l-- > 0;) {
    const std::string stage = "dec" + std::to_string(l);
    const std::size_t c = config.level_channels(l);
    layout.emplace_back(stage + ".up.weight", Shape{config.level_channels(l + 1), c, 2, 1, 1});
    layout.emplace_back(stage + ".up.bias", Shape{c});
    conv(stage, 'a', c, 2 * c);
    conv(stage, 'b', c, c);
  }
  layout.emplace_back("head.weight", Shape{config.base_channels, 1, config.expansion, 1, 1});
  layout.emplace_back("head.bias", Shape{1});
  return layout;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<NamedTensor> tensors;
  for (auto& [name, shape] : parameter_layout(config)) {
    if (shape.rank() == 1) {
      tensors.push_back({name, Tensor(shape)});
      continue;
    }
    // Spatial taps that can never overlap a w x h input are left out of the fan.
    const std::size_t kernel_volume =
        shape[2] * std::min(shape[3], config.width) * std::min(shape[4], config.height);
    const double fan_in = static_cast<double>(shape[1] * kernel_volume);
    const double fan_out = static_cast<double>(shape[0] * kernel_volume);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> data(shape.numel());
    for (double& v : data) v = dist(rng);
    tensors.push_back({name, Tensor(shape, std::move(data))});
  }
  return ModelParams(config, std::move(tensors));
}

ModelParams zero_params(const ModelConfig& config) {
  std::vector<NamedTensor> tensors;
  for (auto& [name, shape] : parameter_layout(config)) tensors.push_back({name, Tensor(shape)});
  return ModelParams(config, std::move(tensors));
}

BoundParams bind(Tape& tape, const ModelParams& params) {
  BoundParams bound;
  for (const NamedTensor& nt : params.tensors()) {
    bound.emplace(nt.name, tape.parameter(nt.name, nt.value));
  }
  return bound;
}

Var squeeze(Var features, const BoundParams& params, const ModelConfig& config) {
  const Tensor& f = features.value();
  if (f.rank() != 4) {
    throw ShapeError("squeeze: features must be [T, C, w, h], got " + f.shape().to_string());
  }
  if (f.dim(1) != config.in_channels) {
    throw ShapeError("squeeze: channel axis has " + std::to_string(f.dim(1)) +
                     " channels, model expects " + std::to_string(config.in_channels));
  }
  return ops::conv3d(features, params.at("squeeze.weight"));
}

Tensor squeeze(const Tensor& features, const ModelParams& params) {
  Tape tape;
  BoundParams bound = bind(tape, params);
  return squeeze(tape.constant(features), bound, params.config()).value();
}

Var forward_graph(Tape& /*tape*/, Var features, const BoundParams& params, const ModelConfig& config) {
  const Tensor& f = features.value();
  if (f.rank() != 4) {
    throw ShapeError("forward: features must be [T, C, w, h], got " + f.shape().to_string());
  }
  if (f.dim(2) != config.width || f.dim(3) != config.height) {
    throw ShapeError("forward: spatial axes " + std::to_string(f.dim(2)) + "x" +
                     std::to_string(f.dim(3)) + " do not match model " +
                     std::to_string(config.width) + "x" + std::to_string(config.height));
  }
  const std::size_t steps = f.dim(0);
  if (steps % config.temporal_multiple() != 0) {
    throw DegenerateInputError("forward: temporal length " + std::to_string(steps) +
                               " is not divisible by 2^levels = " +
                               std::to_string(config.temporal_multiple()) +
                               "; pad the sequence with pad_to_pow2 first");
  }

  Var x = squeeze(features, params, config);
  std::vector<Var> skips;
  for (std::size_t l = 0; l < config.levels; ++l) {
    x = double_conv(x, params, "enc" + std::to_string(l));
    skips.push_back(x);
    x = ops::maxpool_temporal(x, 2, 2);
  }
  x = double_conv(x, params, "bottleneck");
  for (std::size_t l = config.levels; l-- > 0;) {
    const std::string stage = "dec" + std::to_string(l);
    Var up = ops::conv_transpose(x, params.at(stage + ".up.weight"), 2);
    up = ops::add_channel_bias(up, params.at(stage + ".up.bias"));
    x = double_conv(ops::concat_channels(skips[l], up), params, stage);
  }

  Var pooled = ops::global_avg_pool_spatial(x);
  pooled = ops::reshape(pooled, Shape{steps, config.base_channels, 1, 1});
  Var logits = ops::conv_transpose(pooled, params.at("head.weight"), config.expansion);
  logits = ops::add_channel_bias(logits, params.at("head.bias"));
  logits = ops::reshape(logits, Shape{steps * config.expansion});
  return ops::sigmoid(logits);
}

FramePolicy forward(const Tensor& features, const ModelParams& params) {
  Tape tape;
  BoundParams bound = bind(tape, params);
  Var probs = forward_graph(tape, tape.constant(features), bound, params.config());
  const auto data = probs.value().data();
  return FramePolicy(std::vector<double>(data.begin(), data.end()));
}

}  // namespace stunet
