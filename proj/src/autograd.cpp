#include "stunet/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "stunet/error.hpp"

namespace stunet {

namespace {

std::atomic<bool> g_conv_backward_fault{false};

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (v.tape() == nullptr) throw ConfigError("operation on an unbound Var");
    if (tape != nullptr && tape != v.tape()) {
      throw ConfigError("operation mixes Vars from different tapes");
    }
    tape = v.tape();
  }
  return *tape;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + a.shape().to_string() + " vs " +
                     b.shape().to_string());
  }
}

void require_rank(const char* op, const char* what, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got shape " + t.shape().to_string());
  }
}

// Elementwise unary op whose derivative depends on input x and output y.
template <typename Fwd, typename Deriv>
Var unary(OpKind kind, Var x, Fwd fwd, Deriv deriv) {
  Tape& tape = tape_of({x});
  const Tensor& in = x.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  Tensor result(in.shape(), std::move(out));
  Tensor saved_in = in;
  Tensor saved_out = result;
  return tape.record(kind, {x}, std::move(result),
                     [saved_in, saved_out, deriv](const Tensor& g) {
                       std::vector<double> gi(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gi[i] = g[i] * deriv(saved_in[i], saved_out[i]);
                       }
                       return std::vector<Tensor>{Tensor(g.shape(), std::move(gi))};
                     });
}

struct Dims4 {
  std::size_t t, c, w, h;
  std::size_t at(std::size_t ti, std::size_t ci, std::size_t xi, std::size_t yi) const {
    return ((ti * c + ci) * w + xi) * h + yi;
  }
};

struct Dims5 {
  std::size_t a, b, kt, kw, kh;
  std::size_t at(std::size_t ai, std::size_t bi, std::size_t dt, std::size_t dx,
                 std::size_t dy) const {
    return (((ai * b + bi) * kt + dt) * kw + dx) * kh + dy;
  }
};

Dims4 dims4(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)}; }
Dims5 dims5(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), t.dim(4)}; }

std::size_t conv_out_extent(const char* axis, std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t pad) {
  if (stride == 0) throw ConfigError(std::string("conv3d: zero stride on ") + axis + " axis");
  if (k > in + 2 * pad) {
    throw ShapeError(std::string("conv3d: kernel extent ") + std::to_string(k) + " exceeds padded " +
                     axis + " extent " + std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kConv3d: return "conv3d";
    case OpKind::kConvTranspose: return "conv_transpose";
    case OpKind::kMaxPoolTemporal: return "maxpool_temporal";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kGlobalAvgPoolSpatial: return "global_avg_pool_spatial";
    case OpKind::kConcatChannels: return "concat_channels";
    case OpKind::kAddChannelBias: return "add_channel_bias";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kSquare: return "square";
    case OpKind::kAbs: return "abs";
    case OpKind::kReciprocal: return "reciprocal";
    case OpKind::kLog: return "log";
    case OpKind::kClamp: return "clamp";
    case OpKind::kTakePrefix: return "take_prefix";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ConfigError("value() on an unbound Var");
  return tape_->node(id_).value;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(TapeNode{OpKind::kConstant, {}, std::move(value), nullptr, std::nullopt});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const std::string& name, Tensor value) {
  for (const TapeNode& n : nodes_) {
    if (n.parameter && *n.parameter == name) {
      throw ConfigError("parameter '" + name + "' registered twice on one tape");
    }
  }
  nodes_.push_back(TapeNode{OpKind::kParameter, {}, std::move(value), nullptr, name});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  TapeNode node;
  node.kind = kind;
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ConfigError(std::string(op_name(kind)) + ": foreign Var");
    node.inputs.push_back(v.id());
  }
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

GradientMap Tape::backward(Var loss) const {
  if (loss.tape() != this) throw ConfigError("backward: loss belongs to another tape");
  const Tensor& loss_value = nodes_.at(loss.id()).value;
  if (loss_value.size() != 1) {
    throw ConfigError("backward: loss must be scalar, got shape " +
                      loss_value.shape().to_string());
  }

  std::vector<std::vector<double>> grads(nodes_.size());
  std::vector<std::size_t> counts(nodes_.size(), 0);
  grads[loss.id()] = {1.0};
  counts[loss.id()] = 1;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const TapeNode& node = nodes_[id];
    if (grads[id].empty() || !node.backward) continue;
    Tensor g(node.value.shape(), grads[id]);
    std::vector<Tensor> input_grads = node.backward(g);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      std::size_t src = node.inputs[k];
      const Tensor& gi = input_grads.at(k);
      std::vector<double>& acc = grads[src];
      if (acc.empty()) acc.assign(gi.size(), 0.0);
      for (std::size_t i = 0; i < gi.size(); ++i) acc[i] += gi[i];
      ++counts[src];
    }
  }

  GradientMap result;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const TapeNode& node = nodes_[id];
    if (!node.parameter) continue;
    Gradient grad;
    if (grads[id].empty()) {
      grad.value = Tensor(node.value.shape());
    } else {
      grad.value = Tensor(node.value.shape(), std::move(grads[id]));
    }
    grad.accumulations = counts[id];
    result.emplace(*node.parameter, std::move(grad));
  }
  return result;
}

namespace ops {

Var conv3d(Var input, Var kernels, const Conv3dOptions& options) {
  Tape& tape = tape_of({input, kernels});
  const Tensor& x = input.value();
  const Tensor& k = kernels.value();
  require_rank("conv3d", "input", x, 4);
  require_rank("conv3d", "kernels", k, 5);
  const Dims4 in = dims4(x);
  const Dims5 kd = dims5(k);
  if (kd.b != in.c) {
    throw ShapeError("conv3d: channel axis mismatch, input has " + std::to_string(in.c) +
                     " channels but kernels expect " + std::to_string(kd.b));
  }
  const auto& st = options.stride;
  const auto& pd = options.padding;
  const Dims4 out{conv_out_extent("temporal", in.t, kd.kt, st[0], pd[0]), kd.a,
                  conv_out_extent("width", in.w, kd.kw, st[1], pd[1]),
                  conv_out_extent("height", in.h, kd.kh, st[2], pd[2])};

  // Visits every (output, input, kernel) triple that touches real input.
  auto for_each_tap = [in, out, kd, st, pd](auto&& fn) {
    for (std::size_t to = 0; to < out.t; ++to) {
      for (std::size_t dt = 0; dt < kd.kt; ++dt) {
        const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * st[0] + dt) -
                                  static_cast<std::ptrdiff_t>(pd[0]);
        if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(in.t)) continue;
        for (std::size_t xo = 0; xo < out.w; ++xo) {
          for (std::size_t dx = 0; dx < kd.kw; ++dx) {
            const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(xo * st[1] + dx) -
                                      static_cast<std::ptrdiff_t>(pd[1]);
            if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(in.w)) continue;
            for (std::size_t yo = 0; yo < out.h; ++yo) {
              for (std::size_t dy = 0; dy < kd.kh; ++dy) {
                const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(yo * st[2] + dy) -
                                          static_cast<std::ptrdiff_t>(pd[2]);
                if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(in.h)) continue;
                for (std::size_t o = 0; o < out.c; ++o) {
                  const std::size_t out_idx = out.at(to, o, xo, yo);
                  for (std::size_t c = 0; c < in.c; ++c) {
                    fn(out_idx, in.at(static_cast<std::size_t>(ti), c, static_cast<std::size_t>(xi),
                                      static_cast<std::size_t>(yi)),
                       kd.at(o, c, dt, dx, dy));
                  }
                }
              }
            }
          }
        }
      }
    }
  };

  std::vector<double> y(out.t * out.c * out.w * out.h, 0.0);
  const auto xv = x.data();
  const auto kv = k.data();
  for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t ki) { y[oi] += xv[ii] * kv[ki]; });

  Tensor saved_x = x;
  Tensor saved_k = k;
  return tape.record(
      OpKind::kConv3d, {input, kernels}, Tensor(Shape{out.t, out.c, out.w, out.h}, std::move(y)),
      [saved_x, saved_k, for_each_tap](const Tensor& g) {
        std::vector<double> gx(saved_x.size(), 0.0);
        std::vector<double> gk(saved_k.size(), 0.0);
        const auto xv = saved_x.data();
        const auto kv = saved_k.data();
        const auto gv = g.data();
        for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t ki) {
          gx[ii] += gv[oi] * kv[ki];
          gk[ki] += gv[oi] * xv[ii];
        });
        if (g_conv_backward_fault.load(std::memory_order_relaxed)) {
          for (double& v : gx) v = -v;
        }
        return std::vector<Tensor>{Tensor(saved_x.shape(), std::move(gx)),
                                   Tensor(saved_k.shape(), std::move(gk))};
      });
}

Var conv_transpose(Var input, Var kernels, std::size_t stride) {
  Tape& tape = tape_of({input, kernels});
  const Tensor& x = input.value();
  const Tensor& k = kernels.value();
  require_rank("conv_transpose", "input", x, 4);
  require_rank("conv_transpose", "kernels", k, 5);
  if (stride == 0) throw ConfigError("conv_transpose: stride must be at least 1");
  const Dims4 in = dims4(x);
  const Dims5 kd = dims5(k);
  if (kd.a != in.c) {
    throw ShapeError("conv_transpose: channel axis mismatch, input has " + std::to_string(in.c) +
                     " channels but kernels expect " + std::to_string(kd.a));
  }
  if (kd.kw != 1 || kd.kh != 1) {
    throw ShapeError("conv_transpose: spatial kernel extent must be 1x1, got " +
                     k.shape().to_string());
  }
  if (kd.kt > stride) {
    throw ShapeError("conv_transpose: temporal kernel extent " + std::to_string(kd.kt) +
                     " exceeds stride " + std::to_string(stride));
  }
  const Dims4 out{in.t * stride, kd.b, in.w, in.h};

  auto for_each_tap = [in, out, kd, stride](auto&& fn) {
    for (std::size_t t = 0; t < in.t; ++t) {
      for (std::size_t dt = 0; dt < kd.kt; ++dt) {
        for (std::size_t c = 0; c < in.c; ++c) {
          for (std::size_t o = 0; o < out.c; ++o) {
            const std::size_t ki = kd.at(c, o, dt, 0, 0);
            for (std::size_t xi = 0; xi < in.w; ++xi) {
              for (std::size_t yi = 0; yi < in.h; ++yi) {
                fn(out.at(t * stride + dt, o, xi, yi), in.at(t, c, xi, yi), ki);
              }
            }
          }
        }
      }
    }
  };

  std::vector<double> y(out.t * out.c * out.w * out.h, 0.0);
  const auto xv = x.data();
  const auto kv = k.data();
  for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t ki) { y[oi] += xv[ii] * kv[ki]; });

  Tensor saved_x = x;
  Tensor saved_k = k;
  return tape.record(OpKind::kConvTranspose, {input, kernels},
                     Tensor(Shape{out.t, out.c, out.w, out.h}, std::move(y)),
                     [saved_x, saved_k, for_each_tap](const Tensor& g) {
                       std::vector<double> gx(saved_x.size(), 0.0);
                       std::vector<double> gk(saved_k.size(), 0.0);
                       const auto xv = saved_x.data();
                       const auto kv = saved_k.data();
                       const auto gv = g.data();
                       for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t ki) {
                         gx[ii] += gv[oi] * kv[ki];
                         gk[ki] += gv[oi] * xv[ii];
                       });
                       return std::vector<Tensor>{Tensor(saved_x.shape(), std::move(gx)),
                                                  Tensor(saved_k.shape(), std::move(gk))};
                     });
}

Var maxpool_temporal(Var input, std::size_t window, std::size_t stride) {
  Tape& tape = tape_of({input});
  const Tensor& x = input.value();
  if (x.rank() < 1) throw ShapeError("maxpool_temporal: scalar input");
  if (window == 0 || stride == 0) throw ConfigError("maxpool_temporal: window and stride must be >= 1");
  const std::size_t t_in = x.dim(0);
  if (t_in < window) {
    throw DegenerateInputError("maxpool_temporal: temporal extent " + std::to_string(t_in) +
                               " is shorter than window " + std::to_string(window));
  }
  const std::size_t inner = x.size() / t_in;
  const std::size_t t_out = (t_in - window) / stride + 1;

  std::vector<double> y(t_out * inner);
  std::vector<std::size_t> argmax(t_out * inner);
  for (std::size_t to = 0; to < t_out; ++to) {
    for (std::size_t r = 0; r < inner; ++r) {
      std::size_t best = (to * stride) * inner + r;
      for (std::size_t dt = 1; dt < window; ++dt) {
        const std::size_t cand = (to * stride + dt) * inner + r;
        if (x[cand] > x[best]) best = cand;
      }
      y[to * inner + r] = x[best];
      argmax[to * inner + r] = best;
    }
  }
  std::vector<std::size_t> dims = x.shape().dims();
  dims[0] = t_out;
  Shape in_shape = x.shape();
  return tape.record(OpKind::kMaxPoolTemporal, {input}, Tensor(Shape(dims), std::move(y)),
                     [in_shape, argmax = std::move(argmax)](const Tensor& g) {
                       std::vector<double> gx(in_shape.numel(), 0.0);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
                       return std::vector<Tensor>{Tensor(in_shape, std::move(gx))};
                     });
}

Var relu(Var x) {
  return unary(
      OpKind::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  // Two branches so exp() never overflows; the output stays in (0, 1).
  return unary(
      OpKind::kSigmoid, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Var global_avg_pool_spatial(Var input) {
  Tape& tape = tape_of({input});
  const Tensor& x = input.value();
  require_rank("global_avg_pool_spatial", "input", x, 4);
  const Dims4 d = dims4(x);
  const std::size_t area = d.w * d.h;
  std::vector<double> y(d.t * d.c, 0.0);
  for (std::size_t tc = 0; tc < d.t * d.c; ++tc) {
    double acc = 0.0;
    for (std::size_t s = 0; s < area; ++s) acc += x[tc * area + s];
    y[tc] = acc / static_cast<double>(area);
  }
  Shape in_shape = x.shape();
  return tape.record(OpKind::kGlobalAvgPoolSpatial, {input}, Tensor(Shape{d.t, d.c}, std::move(y)),
                     [in_shape, area](const Tensor& g) {
                       std::vector<double> gx(in_shape.numel());
                       const double inv = 1.0 / static_cast<double>(area);
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[i / area] * inv;
                       return std::vector<Tensor>{Tensor(in_shape, std::move(gx))};
                     });
}

Var concat_channels(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 2 || av.rank() != bv.rank()) {
    throw ShapeError("concat_channels: incompatible ranks " + av.shape().to_string() + " and " +
                     bv.shape().to_string());
  }
  for (std::size_t axis = 0; axis < av.rank(); ++axis) {
    if (axis != 1 && av.dim(axis) != bv.dim(axis)) {
      throw ShapeError("concat_channels: axis " + std::to_string(axis) + " differs, " +
                       av.shape().to_string() + " vs " + bv.shape().to_string());
    }
  }
  const std::size_t t = av.dim(0);
  const std::size_t a_block = av.size() / t;
  const std::size_t b_block = bv.size() / t;
  std::vector<double> y;
  y.reserve(av.size() + bv.size());
  for (std::size_t ti = 0; ti < t; ++ti) {
    y.insert(y.end(), av.data().begin() + ti * a_block, av.data().begin() + (ti + 1) * a_block);
    y.insert(y.end(), bv.data().begin() + ti * b_block, bv.data().begin() + (ti + 1) * b_block);
  }
  std::vector<std::size_t> dims = av.shape().dims();
  dims[1] += bv.dim(1);
  Shape a_shape = av.shape();
  Shape b_shape = bv.shape();
  return tape.record(OpKind::kConcatChannels, {a, b}, Tensor(Shape(dims), std::move(y)),
                     [a_shape, b_shape, t, a_block, b_block](const Tensor& g) {
                       std::vector<double> ga;
                       std::vector<double> gb;
                       ga.reserve(t * a_block);
                       gb.reserve(t * b_block);
                       const auto gv = g.data();
                       for (std::size_t ti = 0; ti < t; ++ti) {
                         const auto row = gv.begin() + ti * (a_block + b_block);
                         ga.insert(ga.end(), row, row + a_block);
                         gb.insert(gb.end(), row + a_block, row + a_block + b_block);
                       }
                       return std::vector<Tensor>{Tensor(a_shape, std::move(ga)),
                                                  Tensor(b_shape, std::move(gb))};
                     });
}

Var add_channel_bias(Var x, Var bias) {
  Tape& tape = tape_of({x, bias});
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() < 2) throw ShapeError("add_channel_bias: input needs a channel axis");
  const std::size_t channels = xv.dim(1);
  if (bv.rank() != 1 || bv.dim(0) != channels) {
    throw ShapeError("add_channel_bias: bias shape " + bv.shape().to_string() + " does not match " +
                     std::to_string(channels) + " channels");
  }
  const std::size_t inner = xv.size() / (xv.dim(0) * channels);
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] + bv[(i / inner) % channels];
  Shape x_shape = xv.shape();
  return tape.record(OpKind::kAddChannelBias, {x, bias}, Tensor(x_shape, std::move(y)),
                     [x_shape, channels, inner](const Tensor& g) {
                       std::vector<double> gb(channels, 0.0);
                       for (std::size_t i = 0; i < g.size(); ++i) gb[(i / inner) % channels] += g[i];
                       return std::vector<Tensor>{g, Tensor(Shape{channels}, std::move(gb))};
                     });
}

Var reshape(Var x, Shape shape) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  if (shape.numel() != xv.size()) {
    throw ShapeError("reshape: " + xv.shape().to_string() + " cannot become " + shape.to_string());
  }
  Shape in_shape = xv.shape();
  return tape.record(OpKind::kReshape, {x}, xv.reshaped(std::move(shape)),
                     [in_shape](const Tensor& g) {
                       return std::vector<Tensor>{g.reshaped(in_shape)};
                     });
}

Var sum(Var x) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.data()) acc += v;
  Shape in_shape = xv.shape();
  return tape.record(OpKind::kSum, {x}, Tensor::scalar(acc), [in_shape](const Tensor& g) {
    return std::vector<Tensor>{Tensor::full(in_shape, g[0])};
  });
}

Var mean(Var x) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.data()) acc += v;
  const double n = static_cast<double>(xv.size());
  Shape in_shape = xv.shape();
  return tape.record(OpKind::kMean, {x}, Tensor::scalar(acc / n), [in_shape, n](const Tensor& g) {
    return std::vector<Tensor>{Tensor::full(in_shape, g[0] / n)};
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same_shape("add", a.value(), b.value());
  std::vector<double> y(a.value().size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return tape.record(OpKind::kAdd, {a, b}, Tensor(a.shape(), std::move(y)),
                     [](const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same_shape("sub", a.value(), b.value());
  std::vector<double> y(a.value().size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return tape.record(OpKind::kSub, {a, b}, Tensor(a.shape(), std::move(y)), [](const Tensor& g) {
    std::vector<double> neg(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
    return std::vector<Tensor>{g, Tensor(g.shape(), std::move(neg))};
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same_shape("mul", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return tape.record(OpKind::kMul, {a, b}, Tensor(av.shape(), std::move(y)),
                     [av, bv](const Tensor& g) {
                       std::vector<double> ga(g.size());
                       std::vector<double> gb(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         ga[i] = g[i] * bv[i];
                         gb[i] = g[i] * av[i];
                       }
                       return std::vector<Tensor>{Tensor(g.shape(), std::move(ga)),
                                                  Tensor(g.shape(), std::move(gb))};
                     });
}

Var scale(Var x, double factor) {
  return unary(
      OpKind::kScale, x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var x, double offset) {
  return unary(
      OpKind::kAddScalar, x, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Var square(Var x) {
  return unary(
      OpKind::kSquare, x, [](double v) { return v * v; }, [](double in, double) { return 2.0 * in; });
}

Var abs(Var x) {
  return unary(
      OpKind::kAbs, x, [](double v) { return std::abs(v); },
      [](double in, double) { return in > 0.0 ? 1.0 : (in < 0.0 ? -1.0 : 0.0); });
}

Var reciprocal(Var x) {
  for (double v : x.value().data()) {
    if (v == 0.0) throw NumericError("reciprocal: division by zero");
  }
  return unary(
      OpKind::kReciprocal, x, [](double v) { return 1.0 / v; },
      [](double, double out) { return -out * out; });
}

Var log(Var x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive argument " + std::to_string(v));
  }
  return unary(
      OpKind::kLog, x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var clamp(Var x, double lo, double hi) {
  if (lo > hi) throw ConfigError("clamp: lo > hi");
  return unary(
      OpKind::kClamp, x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double in, double) { return (in >= lo && in <= hi) ? 1.0 : 0.0; });
}

Var take_prefix(Var x, std::size_t count) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  if (xv.rank() != 1) throw ShapeError("take_prefix: expects rank 1, got " + xv.shape().to_string());
  if (count == 0 || count > xv.size()) {
    throw ShapeError("take_prefix: cannot take " + std::to_string(count) + " of " +
                     std::to_string(xv.size()) + " entries");
  }
  const std::size_t full = xv.size();
  return tape.record(OpKind::kTakePrefix, {x},
                     Tensor(Shape{count}, std::vector<double>(xv.data().begin(),
                                                             xv.data().begin() + count)),
                     [full](const Tensor& g) {
                       std::vector<double> gx(full, 0.0);
                       std::copy(g.data().begin(), g.data().end(), gx.begin());
                       return std::vector<Tensor>{Tensor(Shape{full}, std::move(gx))};
                     });
}

}  // namespace ops

namespace testing {

void set_conv_backward_fault(bool enabled) { g_conv_backward_fault.store(enabled); }
bool conv_backward_fault() { return g_conv_backward_fault.load(); }

}  // namespace testing

}  // namespace stunet
