#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "stunet/autograd.hpp"
#include "stunet/features.hpp"

namespace stunet {

// Binary selection a_t per frame; S = {t : a_t = 1} is computed on demand.
class ActionTrace {
 public:
  ActionTrace() = default;
  explicit ActionTrace(std::vector<std::uint8_t> actions);

  const std::vector<std::uint8_t>& actions() const { return a_; }
  std::size_t size() const { return a_.size(); }
  std::uint8_t operator[](std::size_t t) const { return a_[t]; }
  std::vector<std::size_t> summary_set() const;

 private:
  std::vector<std::uint8_t> a_;
};

struct RewardBreakdown {
  double r_rep = 0.0;
  double r_div = 0.0;
  double total = 0.0;
  bool empty_summary = false;   // S empty: both terms forced to 0
  bool single_frame = false;    // |S| == 1: diversity forced to 0
};

struct RewardSwitches {
  bool rep = true;
  bool div = true;
};

// exp(-(1/L) sum_t min_{i in S} ||x_t - x_i||). Empty S gives 0.
double reward_rep(const FrameMatrix& x, std::span<const std::size_t> s);
// Mean pairwise cosine dissimilarity over S. |S| <= 1 gives 0; a zero vector
// in S throws DegenerateInputError.
double reward_div(const FrameMatrix& x, std::span<const std::size_t> s);
RewardBreakdown episode_reward(const FrameMatrix& x, const ActionTrace& trace,
                               const RewardSwitches& switches = {});

// Probabilities are clamped to this interval wherever log pi is taken.
inline constexpr double kProbabilityFloor = 1e-6;

ActionTrace sample_actions(std::span<const double> p, std::mt19937_64& rng);
ActionTrace sample_actions(std::span<const double> p, std::uint64_t seed);

// (mean p - eps)^2
double loss_reg_proportion(std::span<const double> p, double eps);
// (mean |p - 0.5|)^-1. Throws NumericError when every p_t is exactly 0.5.
double loss_reg_binary(std::span<const double> p);
inline constexpr double kBinarySaturationPenalty = 1e6;
// Mean squared error between p and p*.
double loss_pred(std::span<const double> p, std::span<const double> p_star);

struct ObjectiveWeights {
  double lambda = 0.01;   // weight of the binary regulariser
  double epsilon = 0.5;   // target selection proportion
};

// L_reg - R, with L_reg = L_p + lambda L_b.
double loss_unsupervised(std::span<const double> p, double reward, const ObjectiveWeights& w);
// L_pred + L_reg - R.
double loss_supervised(std::span<const double> p, std::span<const double> p_star, double reward,
                       const ObjectiveWeights& w);

// Same regularisers on the tape. The binary term falls back to a constant
// kBinarySaturationPenalty when p sits exactly at 0.5.
Var loss_reg_graph(Var p, const ObjectiveWeights& w);
Var loss_pred_graph(Var p, std::span<const double> p_star);

class Baseline {
 public:
  Baseline() = default;
  explicit Baseline(double decay) : decay_(decay) {}

  double value() const { return c_; }
  std::size_t count() const { return count_; }
  double decay() const { return decay_; }
  // c <- beta c + (1 - beta) r. The first update seeds c = r.
  void update(double reward);
  void reset(double c, std::size_t count) { c_ = c; count_ = count; }

 private:
  double decay_ = 0.9;
  double c_ = 0.0;
  std::size_t count_ = 0;
};

// Score-function surrogate whose gradient w.r.t. p is
//   -(1/k) sum_ep (R_ep - c) sum_t d/dp log pi(a_t).
Var reinforce_surrogate(Var p, std::span<const ActionTrace> traces,
                        std::span<const double> rewards, double c);

struct PolicyGradientConfig {
  ObjectiveWeights weights;
  std::size_t episodes = 5;
  RewardSwitches rewards;
};

struct LossParts {
  double reg = 0.0;
  double pred = 0.0;
  double mean_reward = 0.0;
  double total = 0.0;  // L_uns or L_sup evaluated with the mean episode reward
};

struct PolicyGradientResult {
  GradientMap gradients;
  std::vector<RewardBreakdown> episodes;
  std::vector<ActionTrace> traces;
  LossParts loss;
  double baseline_used = 0.0;
};

// Builds p_t (length L) on the given tape with its parameters registered.
using PolicyFn = std::function<Var(Tape&)>;

// One video: forward once, draw k episodes, form the paradigm loss plus the
// REINFORCE surrogate, backpropagate, then update the baseline with the mean
// episode reward. p_star empty selects the unsupervised objective.
PolicyGradientResult policy_gradient_step(const PolicyFn& policy, const FrameMatrix& x,
                                          std::span<const double> p_star,
                                          const PolicyGradientConfig& cfg, Baseline& baseline,
                                          std::mt19937_64& rng);

}  // namespace stunet
