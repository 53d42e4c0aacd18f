#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stunet/autograd.hpp"
#include "stunet/gradcheck.hpp"

namespace stunet {

struct ModelConfig {
  std::size_t in_channels = 16;        // C
  std::size_t squeezed_channels = 8;   // C'
  std::size_t levels = 2;              // encoder depth
  std::size_t base_channels = 8;       // channels of encoder level 0
  std::size_t expansion = 16;          // n, frames per feature step
  std::size_t width = 1;
  std::size_t height = 1;

  // Throws ConfigError on a violated invariant.
  void validate() const;
  // Channels at encoder level `level`; level == levels is the bottleneck.
  std::size_t level_channels(std::size_t level) const { return base_channels << level; }
  // Temporal length must be a multiple of this.
  std::size_t temporal_multiple() const { return std::size_t{1} << levels; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Per-frame selection probabilities p_t, L = T * n of them.
struct FramePolicy {
  std::vector<double> p;

  FramePolicy() = default;
  explicit FramePolicy(std::vector<double> probs);

  std::size_t size() const { return p.size(); }
  double operator[](std::size_t t) const { return p[t]; }
};

// Named parameter tensors in a fixed order derived from the config:
//
//   squeeze.weight            [C', C, 1, 1, 1]            (no bias)
//   enc{l}.conv{a,b}.weight   [c_l, c_in, 3, 3, 3] + bias [c_l]     l < levels
//   bottleneck.conv{a,b}      same, c = base * 2^levels
//   dec{l}.up.weight          [c_{l+1}, c_l, 2, 1, 1] + bias [c_l]
//   dec{l}.conv{a,b}.weight   [c_l, 2 c_l | c_l, 3, 3, 3] + bias [c_l]
//   head.weight               [base, 1, n, 1, 1] + bias [1]
//
// with c_l = base * 2^l and c_in(l) the previous stage's channels (C' at
// l = 0). The parameter count is therefore
//
//   C' C
//   + sum_{l=0}^{levels}   27 c_l c_in(l) + 27 c_l^2 + 2 c_l
//   + sum_{l=0}^{levels-1} 2 c_{l+1} c_l + 54 c_l^2 + 27 c_l^2 + 3 c_l
//   + n base + 1
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(ModelConfig config, std::vector<NamedTensor> tensors);

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  const Tensor& at(std::string_view name) const;
  void set(std::string_view name, Tensor value);
  std::size_t parameter_count() const;

 private:
  ModelConfig config_;
  std::vector<NamedTensor> tensors_;
};

// Parameter names and shapes implied by a config, in storage order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);

// Glorot-uniform kernels, zero biases. Deterministic per seed. The fans count
// kernel taps that can overlap the input, so on 1 x 1 spatial features a
// 3 x 3 x 3 kernel is initialised like a 3 x 1 x 1 one.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

ModelParams zero_params(const ModelConfig& config);

using BoundParams = std::map<std::string, Var, std::less<>>;

// Registers every parameter tensor on the tape.
BoundParams bind(Tape& tape, const ModelParams& params);

// 1x1x1 channel projection [T, C, w, h] -> [T, C', w, h].
Var squeeze(Var features, const BoundParams& params, const ModelConfig& config);
Tensor squeeze(const Tensor& features, const ModelParams& params);

// Full network on the tape; returns probabilities of shape [T * n].
Var forward_graph(Tape& tape, Var features, const BoundParams& params, const ModelConfig& config);

// Inference-only forward pass.
FramePolicy forward(const Tensor& features, const ModelParams& params);

}  // namespace stunet
