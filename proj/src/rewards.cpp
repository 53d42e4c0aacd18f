#include "stunet/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stunet/error.hpp"

namespace stunet {

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void require_nonempty(const char* what, std::span<const double> p) {
  if (p.empty()) throw DegenerateInputError(std::string(what) + ": empty policy");
}

}  // namespace

ActionTrace::ActionTrace(std::vector<std::uint8_t> actions) : a_(std::move(actions)) {
  for (std::size_t t = 0; t < a_.size(); ++t) {
    if (a_[t] > 1) throw DataError("action " + std::to_string(t) + " is not 0 or 1");
  }
}

std::vector<std::size_t> ActionTrace::summary_set() const {
  std::vector<std::size_t> s;
  for (std::size_t t = 0; t < a_.size(); ++t) {
    if (a_[t] != 0) s.push_back(t);
  }
  return s;
}

double reward_rep(const FrameMatrix& x, std::span<const std::size_t> s) {
  if (x.rows() == 0) throw DegenerateInputError("reward_rep: no frames");
  if (s.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : s) best = std::min(best, distance(x.row(t), x.row(i)));
    total += best;
  }
  return std::exp(-total / static_cast<double>(x.rows()));
}

double reward_div(const FrameMatrix& x, std::span<const std::size_t> s) {
  if (s.size() <= 1) return 0.0;
  std::vector<double> norms(s.size());
  for (std::size_t a = 0; a < s.size(); ++a) {
    norms[a] = std::sqrt(dot(x.row(s[a]), x.row(s[a])));
    if (norms[a] == 0.0) {
      throw DegenerateInputError("reward_div: frame " + std::to_string(s[a]) +
                                 " has a zero feature vector");
    }
  }
  double total = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = a + 1; b < s.size(); ++b) {
      total += 1.0 - dot(x.row(s[a]), x.row(s[b])) / (norms[a] * norms[b]);
    }
  }
  const double n = static_cast<double>(s.size());
  return 2.0 * total / (n * (n - 1.0));
}

RewardBreakdown episode_reward(const FrameMatrix& x, const ActionTrace& trace,
                               const RewardSwitches& switches) {
  if (trace.size() != x.rows()) {
    throw ShapeError("episode_reward: trace has " + std::to_string(trace.size()) +
                     " frames, features have " + std::to_string(x.rows()));
  }
  const std::vector<std::size_t> s = trace.summary_set();
  RewardBreakdown r;
  r.empty_summary = s.empty();
  r.single_frame = s.size() == 1;
  if (switches.rep) r.r_rep = reward_rep(x, s);
  if (switches.div) r.r_div = reward_div(x, s);
  r.total = r.r_rep + r.r_div;
  return r;
}

ActionTrace sample_actions(std::span<const double> p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> a(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) {
    const double q = std::clamp(p[t], kProbabilityFloor, 1.0 - kProbabilityFloor);
    a[t] = u(rng) < q ? 1 : 0;
  }
  return ActionTrace(std::move(a));
}

ActionTrace sample_actions(std::span<const double> p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_actions(p, rng);
}

double loss_reg_proportion(std::span<const double> p, double eps) {
  require_nonempty("loss_reg_proportion", p);
  const double d = mean_of(p) - eps;
  return d * d;
}

double loss_reg_binary(std::span<const double> p) {
  require_nonempty("loss_reg_binary", p);
  double s = 0.0;
  for (double v : p) s += std::abs(v - 0.5);
  if (s == 0.0) throw NumericError("loss_reg_binary: every probability is exactly 0.5");
  return static_cast<double>(p.size()) / s;
}

double loss_pred(std::span<const double> p, std::span<const double> p_star) {
  if (p.size() != p_star.size()) {
    throw ShapeError("loss_pred: " + std::to_string(p.size()) + " predictions vs " +
                     std::to_string(p_star.size()) + " targets");
  }
  require_nonempty("loss_pred", p);
  double s = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) s += (p[t] - p_star[t]) * (p[t] - p_star[t]);
  return s / static_cast<double>(p.size());
}

double loss_unsupervised(std::span<const double> p, double reward, const ObjectiveWeights& w) {
  return loss_reg_proportion(p, w.epsilon) + w.lambda * loss_reg_binary(p) - reward;
}

double loss_supervised(std::span<const double> p, std::span<const double> p_star, double reward,
                       const ObjectiveWeights& w) {
  return loss_pred(p, p_star) + loss_unsupervised(p, reward, w);
}

Var loss_reg_graph(Var p, const ObjectiveWeights& w) {
  Var prop = ops::square(ops::add_scalar(ops::mean(p), -w.epsilon));
  if (w.lambda == 0.0) return prop;
  Var dev = ops::mean(ops::abs(ops::add_scalar(p, -0.5)));
  Var binary;
  if (dev.value().item() == 0.0) {
    binary = p.tape()->constant(Tensor::scalar(kBinarySaturationPenalty));
  } else {
    binary = ops::reciprocal(dev);
  }
  return ops::add(prop, ops::scale(binary, w.lambda));
}

Var loss_pred_graph(Var p, std::span<const double> p_star) {
  if (p.value().size() != p_star.size()) {
    throw ShapeError("loss_pred: " + std::to_string(p.value().size()) + " predictions vs " +
                     std::to_string(p_star.size()) + " targets");
  }
  Var target = p.tape()->constant(
      Tensor(p.value().shape(), std::vector<double>(p_star.begin(), p_star.end())));
  return ops::mean(ops::square(ops::sub(p, target)));
}

void Baseline::update(double reward) {
  if (count_ == 0) {
    c_ = reward;
  } else {
    c_ = decay_ * c_ + (1.0 - decay_) * reward;
  }
  ++count_;
}

Var reinforce_surrogate(Var p, std::span<const ActionTrace> traces,
                        std::span<const double> rewards, double c) {
  if (traces.empty() || traces.size() != rewards.size()) {
    throw ConfigError("reinforce_surrogate: need one reward per episode and at least one episode");
  }
  const Shape shape = p.value().shape();
  const std::size_t frames = p.value().size();
  std::vector<double> w_on(frames, 0.0);
  std::vector<double> w_off(frames, 0.0);
  for (std::size_t e = 0; e < traces.size(); ++e) {
    if (traces[e].size() != frames) throw ShapeError("reinforce_surrogate: trace length mismatch");
    const double adv = rewards[e] - c;
    for (std::size_t t = 0; t < frames; ++t) {
      (traces[e][t] != 0 ? w_on : w_off)[t] += adv;
    }
  }
  Tape& tape = *p.tape();
  Var q = ops::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
  Var log_on = ops::log(q);
  Var log_off = ops::log(ops::add_scalar(ops::scale(q, -1.0), 1.0));
  Var on = ops::sum(ops::mul(log_on, tape.constant(Tensor(shape, std::move(w_on)))));
  Var off = ops::sum(ops::mul(log_off, tape.constant(Tensor(shape, std::move(w_off)))));
  return ops::scale(ops::add(on, off), -1.0 / static_cast<double>(traces.size()));
}

PolicyGradientResult policy_gradient_step(const PolicyFn& policy, const FrameMatrix& x,
                                          std::span<const double> p_star,
                                          const PolicyGradientConfig& cfg, Baseline& baseline,
                                          std::mt19937_64& rng) {
  if (cfg.episodes == 0) throw ConfigError("policy_gradient_step: episodes must be >= 1");
  Tape tape;
  Var p = policy(tape);
  const Tensor pv = p.value();  // copy: appending nodes may move tape storage
  if (pv.rank() != 1 || pv.size() != x.rows()) {
    throw ShapeError("policy_gradient_step: policy has shape " + pv.shape().to_string() +
                     " but the video has " + std::to_string(x.rows()) + " frames");
  }
  const bool supervised = !p_star.empty();

  PolicyGradientResult result;
  std::vector<double> rewards;
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    ActionTrace trace = sample_actions(pv.data(), rng);
    RewardBreakdown r = episode_reward(x, trace, cfg.rewards);
    rewards.push_back(r.total);
    result.episodes.push_back(r);
    result.traces.push_back(std::move(trace));
  }
  const double mean_reward = mean_of(rewards);
  const double c = baseline.count() == 0 ? mean_reward : baseline.value();
  result.baseline_used = c;

  Var reg = loss_reg_graph(p, cfg.weights);
  Var loss = ops::add(reg, reinforce_surrogate(p, result.traces, rewards, c));
  if (supervised) {
    Var pred = loss_pred_graph(p, p_star);
    result.loss.pred = pred.value().item();
    loss = ops::add(loss, pred);
  }
  result.loss.reg = reg.value().item();
  result.loss.mean_reward = mean_reward;
  result.loss.total = result.loss.pred + result.loss.reg - mean_reward;

  result.gradients = tape.backward(loss);
  for (const auto& [name, grad] : result.gradients) {
    const auto data = grad.value.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient in " << name << "[" << i << "]; episode rewards:";
        for (double r : rewards) msg << ' ' << r;
        msg << "; baseline " << c << "; loss " << result.loss.total;
        throw NumericError(msg.str());
      }
    }
  }
  baseline.update(mean_reward);
  return result;
}

}  // namespace stunet
