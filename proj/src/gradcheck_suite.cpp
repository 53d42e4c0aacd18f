#include <random>

#include "stunet/pipeline.hpp"
#include "stunet/rewards.hpp"

namespace stunet {

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  std::vector<double> data(t.size());
  for (double& v : data) v = u(rng);
  return Tensor(shape, std::move(data));
}

// Contracts an arbitrary output with fixed random weights so every output
// coordinate contributes a distinct amount to the scalar.
Var weighted_sum(Tape& tape, Var y, std::mt19937_64& rng) {
  return ops::sum(ops::mul(y, tape.constant(random_tensor(y.shape(), rng))));
}

struct Case {
  std::string name;
  std::vector<NamedTensor> point;
  std::function<Var(Tape&, const std::vector<Var>&, std::mt19937_64&)> f;
};

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(const GradCheckConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Case> cases;
  auto unary = [&](std::string name, Shape shape, auto op, double lo = -1.0, double hi = 1.0) {
    cases.push_back({std::move(name), {{"x", random_tensor(shape, rng, lo, hi)}},
                     [op](Tape& t, const std::vector<Var>& v, std::mt19937_64& r) {
                       return weighted_sum(t, op(v[0]), r);
                     }});
  };

  cases.push_back({"conv3d_padded",
                   {{"x", random_tensor({5, 2, 3, 3}, rng)}, {"k", random_tensor({3, 2, 3, 3, 3}, rng)}},
                   [](Tape& t, const std::vector<Var>& v, std::mt19937_64& r) {
                     Conv3dOptions o;
                     o.padding = {1, 1, 1};
                     return weighted_sum(t, ops::conv3d(v[0], v[1], o), r);
                   }});
  cases.push_back({"conv3d_strided",
                   {{"x", random_tensor({6, 2, 4, 3}, rng)}, {"k", random_tensor({2, 2, 2, 2, 1}, rng)}},
                   [](Tape& t, const std::vector<Var>& v, std::mt19937_64& r) {
                     Conv3dOptions o;
                     o.stride = {2, 2, 1};
                     return weighted_sum(t, ops::conv3d(v[0], v[1], o), r);
                   }});
  cases.push_back({"conv_transpose",
                   {{"x", random_tensor({3, 2, 2, 1}, rng)}, {"k", random_tensor({2, 3, 2, 1, 1}, rng)}},
                   [](Tape& t, const std::vector<Var>& v, std::mt19937_64& r) {
                     return weighted_sum(t, ops::conv_transpose(v[0], v[1], 3), r);
                   }});
  unary("maxpool_temporal", {6, 2, 2, 1}, [](Var x) { return ops::maxpool_temporal(x, 2, 2); });
  unary("relu", {4, 3, 1, 1}, [](Var x) { return ops::relu(x); });
  unary("sigmoid", {4, 3, 1, 1}, [](Var x) { return ops::sigmoid(x); });
  unary("global_avg_pool", {3, 2, 2, 3}, [](Var x) { return ops::global_avg_pool_spatial(x); });
  unary("reshape", {3, 4, 1, 1}, [](Var x) { return ops::reshape(x, Shape{12}); });
  unary("square_abs", {7}, [](Var x) { return ops::add(ops::square(x), ops::abs(x)); });
  unary("log_reciprocal", {7}, [](Var x) { return ops::add(ops::log(x), ops::reciprocal(x)); }, 0.2, 2.0);
  unary("clamp", {9}, [](Var x) { return ops::clamp(x, -0.5, 0.5); });
  unary("mean_scale_shift", {5}, [](Var x) { return ops::add_scalar(ops::scale(ops::mean(x), 3.0), 1.0); });
  unary("take_prefix", {6}, [](Var x) { return ops::take_prefix(x, 4); });
  cases.push_back({"concat_bias",
                   {{"a", random_tensor({3, 2, 2, 1}, rng)},
                    {"b", random_tensor({3, 1, 2, 1}, rng)},
                    {"bias", random_tensor({3}, rng)}},
                   [](Tape& t, const std::vector<Var>& v, std::mt19937_64& r) {
                     return weighted_sum(t, ops::add_channel_bias(ops::concat_channels(v[0], v[1]), v[2]), r);
                   }});
  cases.push_back({"binary_arith",
                   {{"a", random_tensor({6}, rng)}, {"b", random_tensor({6}, rng)}},
                   [](Tape& t, const std::vector<Var>& v, std::mt19937_64& r) {
                     return weighted_sum(t, ops::sub(ops::mul(v[0], v[1]), ops::add(v[0], v[1])), r);
                   }});

  {
    const std::size_t L = 6;
    std::vector<double> p_star(L);
    for (double& v : p_star) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::vector<ActionTrace> traces;
    std::vector<double> rewards;
    for (int e = 0; e < 3; ++e) {
      std::vector<std::uint8_t> a(L);
      for (auto& x : a) x = static_cast<std::uint8_t>(rng() & 1);
      traces.emplace_back(a);
      rewards.push_back(std::uniform_real_distribution<double>(0.0, 2.0)(rng));
    }
    cases.push_back({"training_losses",
                     {{"logits", random_tensor({L}, rng)}},
                     [=](Tape&, const std::vector<Var>& v, std::mt19937_64&) {
                       Var p = ops::sigmoid(v[0]);
                       Var reg = loss_reg_graph(p, ObjectiveWeights{0.01, 0.3});
                       Var pg = reinforce_surrogate(p, traces, rewards, 0.7);
                       return ops::add(ops::add(reg, pg), loss_pred_graph(p, p_star));
                     }});
  }

  {
    ModelConfig mc;
    mc.in_channels = 4;
    mc.squeezed_channels = 4;
    mc.levels = 2;
    mc.base_channels = 4;
    mc.expansion = 2;
    const ModelParams params = init_params(mc, seed);
    std::vector<NamedTensor> point = params.tensors();
    // Biases start at zero; move them off it so their paths are exercised.
    for (NamedTensor& nt : point) {
      if (nt.value.rank() == 1) nt.value = random_tensor(nt.value.shape(), rng, -0.1, 0.1);
    }
    point.push_back({"features", random_tensor({config.steps, mc.in_channels, 1, 1}, rng)});
    cases.push_back({"full_network", std::move(point),
                     [mc](Tape& t, const std::vector<Var>& v, std::mt19937_64& r) {
                       BoundParams bound;
                       for (const Var& leaf : v) bound.emplace(*t.node(leaf.id()).parameter, leaf);
                       return weighted_sum(t, forward_graph(t, bound.at("features"), bound, mc), r);
                     }});
  }

  std::vector<GradCheckCase> out;
  for (Case& c : cases) {
    const std::uint64_t weights_seed = rng();
    ScalarFn f = [&c, weights_seed](Tape& tape, const std::vector<Var>& leaves) {
      std::mt19937_64 r(weights_seed);
      return c.f(tape, leaves, r);
    };
    GradCheckCase result;
    result.name = c.name;
    result.report = grad_check(f, c.point, config.eps);
    result.passed = result.report.max_rel_error < config.tolerance;
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace stunet
