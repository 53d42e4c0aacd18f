#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "stunet/error.hpp"
#include "stunet/pipeline.hpp"
#include "stunet/rewards.hpp"
#include "stunet/synth.hpp"
#include "stunet/train.hpp"
#include "test_util.hpp"

namespace stunet {
namespace {

using test::random_matrix;

FrameMatrix rows(std::vector<std::vector<double>> r) {
  std::vector<double> d;
  for (const auto& row : r) d.insert(d.end(), row.begin(), row.end());
  return FrameMatrix(r.size(), r[0].size(), std::move(d));
}

double oracle_rep(const FrameMatrix& x, const std::vector<std::size_t>& s) {
  double total = 0.0;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : s) {
      double d = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) d += std::pow(x.row(t)[k] - x.row(i)[k], 2);
      best = std::min(best, std::sqrt(d));
    }
    total += best;
  }
  return std::exp(-total / static_cast<double>(x.rows()));
}

TEST(RewardRep, AllFramesSelectedIsOne) {
  std::mt19937_64 rng(1);
  const FrameMatrix x = random_matrix(5, 3, rng);
  const std::vector<std::size_t> s{0, 1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(reward_rep(x, s), 1.0);
}

TEST(RewardRep, IdenticalFramesIsOne) {
  const FrameMatrix x = rows({{1, 2}, {1, 2}});
  const std::vector<std::size_t> s{0};
  EXPECT_DOUBLE_EQ(reward_rep(x, s), 1.0);
}

TEST(RewardRep, MatchesNearestMedoidOracle) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const FrameMatrix x = random_matrix(4, 5, rng);
    const std::vector<std::size_t> s{static_cast<std::size_t>(i % 4), static_cast<std::size_t>((i + 1) % 4)};
    EXPECT_NEAR(reward_rep(x, s), oracle_rep(x, s), 1e-12);
  }
}

TEST(RewardRep, EmptySummaryIsZero) {
  const FrameMatrix x = rows({{1, 0}, {0, 1}});
  EXPECT_EQ(reward_rep(x, std::vector<std::size_t>{}), 0.0);
}

TEST(RewardDiv, IdenticalOrthogonalAndOracle) {
  const FrameMatrix same = rows({{1, 2}, {1, 2}});
  const std::vector<std::size_t> both{0, 1};
  EXPECT_NEAR(reward_div(same, both), 0.0, 1e-15);
  const FrameMatrix orth = rows({{1, 0}, {0, 3}});
  EXPECT_DOUBLE_EQ(reward_div(orth, both), 1.0);

  std::mt19937_64 rng(3);
  const FrameMatrix x = random_matrix(6, 4, rng);
  const std::vector<std::size_t> s{0, 2, 5};
  double total = 0.0;
  for (std::size_t a : s)
    for (std::size_t b : s) {
      if (a == b) continue;
      double d = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        d += x.row(a)[k] * x.row(b)[k];
        na += x.row(a)[k] * x.row(a)[k];
        nb += x.row(b)[k] * x.row(b)[k];
      }
      total += 1.0 - d / std::sqrt(na * nb);
    }
  EXPECT_NEAR(reward_div(x, s), total / 6.0, 1e-12);
}

TEST(RewardDiv, SingleFrameIsZeroAndZeroVectorRejected) {
  const FrameMatrix x = rows({{1, 0}, {0, 0}});
  EXPECT_EQ(reward_div(x, std::vector<std::size_t>{0}), 0.0);
  EXPECT_THROW(reward_div(x, std::vector<std::size_t>{0, 1}), DegenerateInputError);
}

TEST(EpisodeReward, TotalIsSumAndFlagsSet) {
  std::mt19937_64 rng(4);
  const FrameMatrix x = random_matrix(5, 3, rng);
  const RewardBreakdown r = episode_reward(x, ActionTrace({1, 0, 1, 1, 0}), {});
  EXPECT_DOUBLE_EQ(r.total, r.r_rep + r.r_div);
  EXPECT_TRUE(episode_reward(x, ActionTrace({0, 0, 0, 0, 0}), {}).empty_summary);
  EXPECT_TRUE(episode_reward(x, ActionTrace({0, 1, 0, 0, 0}), {}).single_frame);
  const RewardBreakdown rep_only = episode_reward(x, ActionTrace({1, 0, 1, 1, 0}), {true, false});
  EXPECT_EQ(rep_only.r_div, 0.0);
  EXPECT_THROW(ActionTrace({0, 2}), DataError);
}

TEST(Regularizers, ProportionExamples) {
  const std::vector<double> at_eps(6, 0.3);
  EXPECT_NEAR(loss_reg_proportion(at_eps, 0.3), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(loss_reg_proportion(std::vector<double>(4, 1.0), 0.5), 0.25);
  const std::vector<double> p{0.1, 0.7, 0.4};
  EXPECT_NEAR(loss_reg_proportion(p, 0.2), std::pow(0.4 - 0.2, 2), 1e-15);
}

TEST(Regularizers, BinaryExamples) {
  EXPECT_DOUBLE_EQ(loss_reg_binary(std::vector<double>{0, 1, 1, 0}), 2.0);
  EXPECT_DOUBLE_EQ(loss_reg_binary(std::vector<double>(3, 0.75)), 4.0);
  const std::vector<double> p{0.1, 0.7, 0.45};
  EXPECT_NEAR(loss_reg_binary(p), 3.0 / (0.4 + 0.2 + 0.05), 1e-12);
  EXPECT_THROW(loss_reg_binary(std::vector<double>(3, 0.5)), NumericError);
}

TEST(Losses, UnsupervisedAndSupervised) {
  const std::vector<double> p(4, 0.3);
  EXPECT_DOUBLE_EQ(loss_unsupervised(p, 1.0, {0.0, 0.3}), -1.0);
  const std::vector<double> q{0.2, 0.9, 0.6, 0.1};
  const double lp = std::pow(0.45 - 0.5, 2);
  const double lb = 4.0 / (0.3 + 0.4 + 0.1 + 0.4);
  EXPECT_NEAR(loss_unsupervised(q, 1.3, {0.01, 0.5}), lp + 0.01 * lb - 1.3, 1e-12);
  EXPECT_NEAR(loss_unsupervised(q, 0.0, {0.01, 0.5}), lp + 0.01 * lb, 1e-12);
  EXPECT_EQ(loss_pred(q, q), 0.0);
  EXPECT_DOUBLE_EQ(loss_pred(std::vector<double>(3, 1.0), std::vector<double>(3, 0.0)), 1.0);
  const std::vector<double> star{0.0, 1.0, 0.5, 0.5};
  const double pred = (0.04 + 0.01 + 0.01 + 0.16) / 4.0;
  EXPECT_NEAR(loss_pred(q, star), pred, 1e-12);
  EXPECT_NEAR(loss_supervised(q, star, 1.3, {0.01, 0.5}), pred + lp + 0.01 * lb - 1.3, 1e-12);
}

TEST(RegGraph, MatchesScalarVersion) {
  const std::vector<double> q{0.2, 0.9, 0.6, 0.1};
  Tape t;
  Var p = t.constant(Tensor(Shape{4}, q));
  EXPECT_NEAR(loss_reg_graph(p, {0.01, 0.3}).value().item(), loss_unsupervised(q, 0.0, {0.01, 0.3}), 1e-12);
  Var half = t.constant(Tensor::full(Shape{4}, 0.5));
  EXPECT_NEAR(loss_reg_graph(half, {0.01, 0.5}).value().item(), 0.01 * kBinarySaturationPenalty, 1e-6);
}

TEST(SampleActions, ExtremesAndFrequency) {
  EXPECT_EQ(sample_actions(std::vector<double>(50, 1.0 - 1e-6), 1).summary_set().size(), 50u);
  EXPECT_TRUE(sample_actions(std::vector<double>(50, 1e-6), 1).summary_set().empty());
  const ActionTrace a = sample_actions(std::vector<double>(10000, 0.3), 7);
  EXPECT_NEAR(static_cast<double>(a.summary_set().size()) / 10000.0, 0.3, 0.02);
  EXPECT_EQ(sample_actions(std::vector<double>(20, 0.5), 3).actions(),
            sample_actions(std::vector<double>(20, 0.5), 3).actions());
}

TEST(Baseline, FirstUpdateSeedsThenMovingAverage) {
  Baseline b(0.9);
  b.update(2.0);
  EXPECT_DOUBLE_EQ(b.value(), 2.0);
  b.update(1.0);
  EXPECT_DOUBLE_EQ(b.value(), 0.9 * 2.0 + 0.1 * 1.0);
  EXPECT_EQ(b.count(), 2u);
}

TEST(Surrogate, BaselineEqualToConstantRewardCancels) {
  Tape t;
  Var th = t.parameter("theta", Tensor(Shape{3}, {0.2, -0.4, 1.0}));
  std::vector<ActionTrace> traces{ActionTrace({1, 0, 1}), ActionTrace({0, 0, 1})};
  std::vector<double> rewards{0.8, 0.8};
  const Tensor g = t.backward(reinforce_surrogate(ops::sigmoid(th), traces, rewards, 0.8)).at("theta").value;
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

// Estimator mean over many policy-gradient steps against the gradient
// enumerated over every action trace. lambda = 0 and eps = mean p make the
// regulariser's gradient vanish, and the baseline is pinned so it does not
// depend on the sampled rewards.
void check_policy_gradient(std::size_t L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const FrameMatrix x = random_matrix(L, 3, rng);
  std::vector<double> theta(L);
  for (double& v : theta) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  std::vector<double> p(L);
  double mean_p = 0.0;
  for (std::size_t t = 0; t < L; ++t) mean_p += (p[t] = 1.0 / (1.0 + std::exp(-theta[t]))) / L;
  const double c = 0.3;

  std::vector<double> exact(L, 0.0);
  for (std::size_t bits = 0; bits < (std::size_t{1} << L); ++bits) {
    std::vector<std::uint8_t> a(L);
    double prob = 1.0;
    for (std::size_t t = 0; t < L; ++t) prob *= (a[t] = (bits >> t) & 1) ? p[t] : 1.0 - p[t];
    const double r = episode_reward(x, ActionTrace(a), {}).total;
    for (std::size_t t = 0; t < L; ++t) exact[t] -= prob * (r - c) * (a[t] - p[t]);
  }

  PolicyGradientConfig cfg;
  cfg.weights = {0.0, mean_p};
  cfg.episodes = 1;
  const PolicyFn policy = [&](Tape& t) { return ops::sigmoid(t.parameter("theta", Tensor(Shape{L}, theta))); };
  const std::size_t n = 100000;
  std::vector<double> sum(L, 0.0), sq(L, 0.0);
  Baseline b(0.9);
  for (std::size_t i = 0; i < n; ++i) {
    b.reset(c, 1);
    const Tensor g = policy_gradient_step(policy, x, {}, cfg, b, rng).gradients.at("theta").value;
    for (std::size_t t = 0; t < L; ++t) {
      sum[t] += g[t];
      sq[t] += g[t] * g[t];
    }
  }
  for (std::size_t t = 0; t < L; ++t) {
    const double mean = sum[t] / n;
    const double se = std::sqrt((sq[t] / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - exact[t]), 3.0 * se) << "L=" << L << " t=" << t;
  }
}

TEST(PolicyGradient, SingleFrameMatchesEnumeration) { check_policy_gradient(1, 11); }
TEST(PolicyGradient, ThreeFramesMatchEnumeration) { check_policy_gradient(3, 12); }

TEST(PolicyGradient, BaselineUpdatedWithMeanReward) {
  std::mt19937_64 rng(13);
  const FrameMatrix x = random_matrix(4, 3, rng);
  const PolicyFn policy = [](Tape& t) { return ops::sigmoid(t.parameter("theta", Tensor(Shape{4}))); };
  Baseline b(0.9);
  PolicyGradientConfig cfg;
  const auto r1 = policy_gradient_step(policy, x, {}, cfg, b, rng);
  EXPECT_DOUBLE_EQ(r1.baseline_used, r1.loss.mean_reward);
  EXPECT_DOUBLE_EQ(b.value(), r1.loss.mean_reward);
  const auto r2 = policy_gradient_step(policy, x, {}, cfg, b, rng);
  EXPECT_DOUBLE_EQ(r2.baseline_used, r1.loss.mean_reward);
  EXPECT_NEAR(b.value(), 0.9 * r1.loss.mean_reward + 0.1 * r2.loss.mean_reward, 1e-15);
  EXPECT_EQ(r2.episodes.size(), cfg.episodes);
}

TEST(PolicyGradient, ShapeMismatchRejected) {
  std::mt19937_64 rng(14);
  const FrameMatrix x = random_matrix(4, 3, rng);
  const PolicyFn policy = [](Tape& t) { return ops::sigmoid(t.parameter("theta", Tensor(Shape{5}))); };
  Baseline b;
  EXPECT_THROW(policy_gradient_step(policy, x, {}, {}, b, rng), ShapeError);
}

TEST(TrainConfig, DefaultsAndValidation) {
  TrainConfig c;
  EXPECT_EQ(c.momentum, 0.9);
  EXPECT_EQ(c.weight_decay, 1e-6);
  EXPECT_EQ(c.learning_rate, 1e-5);
  EXPECT_EQ(c.lambda, 0.01);
  EXPECT_DOUBLE_EQ(c.learning_rate_at(29), 1e-5);
  EXPECT_DOUBLE_EQ(c.learning_rate_at(30), 5e-6);
  c.epsilon = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.baseline_decay = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.episodes = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

struct Fixture {
  SynthDataset data;
  ModelConfig model;
};

Fixture small_fixture(std::uint64_t seed, std::size_t videos = 4) {
  SynthSpec spec;
  spec.seed = seed;
  spec.videos = videos;
  spec.frames = 64;
  Fixture f{synth_dataset(spec), {}};
  f.model.in_channels = spec.dim;
  f.model.squeezed_channels = 4;
  f.model.base_channels = 4;
  f.model.expansion = 1;
  return f;
}

std::vector<TrainingVideo> videos_of(const Fixture& f, Paradigm paradigm = Paradigm::kUnsupervised) {
  return training_set(f.data.dataset, f.data.dataset.ids(), f.model, paradigm, 0.2);
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  const Fixture f = small_fixture(1);
  const ModelParams init = init_params(f.model, 0);
  TrainConfig c;
  c.learning_rate = 0.0;
  c.epochs = 1;
  const TrainResult r = train(videos_of(f), init, c);
  ASSERT_FALSE(r.diverged);
  for (std::size_t i = 0; i < init.tensors().size(); ++i) {
    EXPECT_EQ(max_abs_diff(r.params.tensors()[i].value, init.tensors()[i].value), 0.0);
  }
  EXPECT_EQ(r.epochs.size(), 1u);
}

TEST(Train, DeterministicPerSeed) {
  const Fixture f = small_fixture(2);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 2;
  const TrainResult a = train(videos_of(f), init_params(f.model, 0), c);
  const TrainResult b = train(videos_of(f), init_params(f.model, 0), c);
  for (std::size_t i = 0; i < a.params.tensors().size(); ++i) {
    EXPECT_EQ(max_abs_diff(a.params.tensors()[i].value, b.params.tensors()[i].value), 0.0);
  }
}

TEST(Train, SupervisedNeedsTargets) {
  const Fixture f = small_fixture(3);
  TrainConfig c;
  c.paradigm = Paradigm::kSupervised;
  EXPECT_THROW(train(videos_of(f), init_params(f.model, 0), c), ConfigError);
  Dataset no_ann = f.data.dataset;
  no_ann.videos[0].annotations.reset();
  EXPECT_THROW(training_set(no_ann, no_ann.ids(), f.model, Paradigm::kSupervised, 0.2), ConfigError);
  const auto sup = videos_of(f, Paradigm::kSupervised);
  EXPECT_EQ(sup[0].target.size(), sup[0].frames);
  c.epochs = 1;
  EXPECT_FALSE(train(sup, init_params(f.model, 0), c).diverged);
}

TEST(Train, NonFiniteInputStopsWithLastGoodParams) {
  const Fixture f = small_fixture(4);
  std::vector<TrainingVideo> v = videos_of(f);
  std::vector<double> bad(v[1].features.data().begin(), v[1].features.data().end());
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  v[1].features = Tensor(v[1].features.shape(), bad);
  const ModelParams init = init_params(f.model, 0);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 3;
  const TrainResult r = train(v, init, c);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.diagnostic.empty());
  EXPECT_TRUE(r.epochs.empty());
  for (std::size_t i = 0; i < init.tensors().size(); ++i) {
    EXPECT_EQ(max_abs_diff(r.params.tensors()[i].value, init.tensors()[i].value), 0.0);
  }
}

// Mean episode reward in epoch 10 exceeds epoch 1 on the synthetic clustered
// data in at least 4 of 5 seeds (default epsilon 0.5).
TEST(Property, RewardRisesOverFirstTenEpochs) {
  std::size_t rising = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    const SynthDataset d = synth_dataset(spec);
    ModelConfig mc;
    mc.expansion = 1;
    const Split split = split_dataset(d.dataset.ids(), 5, 0.8, seed)[0];
    TrainConfig c;
    c.seed = seed;
    c.learning_rate = 0.01;
    c.episodes = 20;
    c.max_grad_norm = 1.0;
    c.epochs = 10;
    const TrainResult r = train(training_set(d.dataset, split.train, mc, Paradigm::kUnsupervised, 0.2),
                                init_params(mc, seed), c);
    ASSERT_EQ(r.epochs.size(), 10u);
    rising += r.epochs[9].reward > r.epochs[0].reward;
  }
  EXPECT_GE(rising, 4u);
}

}  // namespace
}  // namespace stunet
