#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stunet/tensor.hpp"

namespace stunet {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Gradient {
  Tensor value;
  // Number of backward contributions summed into `value`.
  std::size_t accumulations = 0;
};

using GradientMap = std::map<std::string, Gradient>;

enum class OpKind {
  kConstant,
  kParameter,
  kConv3d,
  kConvTranspose,
  kMaxPoolTemporal,
  kRelu,
  kSigmoid,
  kGlobalAvgPoolSpatial,
  kConcatChannels,
  kAddChannelBias,
  kReshape,
  kSum,
  kMean,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kSquare,
  kAbs,
  kReciprocal,
  kLog,
  kClamp,
  kTakePrefix,
};

const char* op_name(OpKind kind);

// Receives the gradient w.r.t. the node output and returns one gradient per
// input (same order as TapeNode::inputs).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

struct TapeNode {
  OpKind kind = OpKind::kConstant;
  std::vector<std::size_t> inputs;
  Tensor value;
  BackwardFn backward;
  std::optional<std::string> parameter;
};

// Records operations in creation order, which is already a topological order
// of the graph. Single writer.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(const std::string& name, Tensor value);

  Var record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const TapeNode& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a single-element loss. Every parameter on the tape gets
  // an entry; parameters the loss does not depend on get zeros.
  GradientMap backward(Var loss) const;

 private:
  std::vector<TapeNode> nodes_;
};

struct Conv3dOptions {
  std::array<std::size_t, 3> stride{1, 1, 1};   // temporal, w, h
  std::array<std::size_t, 3> padding{0, 0, 0};  // zero padding on both sides
};

namespace ops {

// input [T, C, w, h], kernels [Cout, C, kt, kw, kh] -> [T', Cout, w', h'].
Var conv3d(Var input, Var kernels, const Conv3dOptions& options = {});
// input [T, Cin, w, h], kernels [Cin, Cout, kt, 1, 1], kt <= stride
// -> [stride * T, Cout, w, h]. Adjoint of a strided conv3d with the same kernels.
Var conv_transpose(Var input, Var kernels, std::size_t stride);
// Pools along the leading (temporal) axis only. Ties route gradient to the
// first maximal element.
Var maxpool_temporal(Var input, std::size_t window, std::size_t stride);
Var relu(Var x);
Var sigmoid(Var x);
// [T, C, w, h] -> [T, C]
Var global_avg_pool_spatial(Var input);
// Concatenates along axis 1: result channels are a's followed by b's.
Var concat_channels(Var a, Var b);
// x [T, C, ...] plus bias [C] broadcast over every other axis.
Var add_channel_bias(Var x, Var bias);
Var reshape(Var x, Shape shape);

Var sum(Var x);
Var mean(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var add_scalar(Var x, double offset);
Var square(Var x);
Var abs(Var x);
Var reciprocal(Var x);
Var log(Var x);
// Gradient passes through only where lo <= x <= hi.
Var clamp(Var x, double lo, double hi);
// First `count` entries of a rank-1 tensor.
Var take_prefix(Var x, std::size_t count);

}  // namespace ops

namespace testing {
// Flips the sign of the input gradient produced by conv3d backward. Used to
// prove that the gradient-check harness catches a broken backward pass.
void set_conv_backward_fault(bool enabled);
bool conv_backward_fault();
}  // namespace testing

}  // namespace stunet
