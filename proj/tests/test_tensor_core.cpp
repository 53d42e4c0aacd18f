#include <gtest/gtest.h>

#include <cmath>

#include "stunet/autograd.hpp"
#include "stunet/error.hpp"
#include "stunet/gradcheck.hpp"
#include "test_util.hpp"

namespace stunet {
namespace {

using test::random_tensor;

Tensor value_of(const std::function<Var(Tape&)>& f) {
  Tape tape;
  return f(tape).value();
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), Error);
  EXPECT_EQ(Tensor(Shape{2, 3}).size(), 6u);
  EXPECT_THROW(Shape({1, 1, 1, 1, 1, 1}), Error);
}

TEST(Conv3d, ScalarProduct) {
  const Tensor y = value_of([](Tape& t) {
    return ops::conv3d(t.constant(Tensor(Shape{1, 1, 1, 1}, {2.0})),
                       t.constant(Tensor(Shape{1, 1, 1, 1, 1}, {3.0})));
  });
  ASSERT_EQ(y.size(), 1u);
  EXPECT_DOUBLE_EQ(y[0], 6.0);
}

TEST(Conv3d, CentredIdentityKernelWithSamePadding) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({5, 2, 3, 4}, rng);
  std::vector<double> k(2 * 2 * 27, 0.0);
  for (std::size_t c = 0; c < 2; ++c) k[(c * 2 + c) * 27 + 13] = 1.0;
  const Tensor y = value_of([&](Tape& t) {
    Conv3dOptions o;
    o.padding = {1, 1, 1};
    return ops::conv3d(t.constant(x), t.constant(Tensor(Shape{2, 2, 3, 3, 3}, k)), o);
  });
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(max_abs_diff(x, y), 0.0);
}

TEST(Conv3d, MatchesDirectSummation) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({4, 3, 2, 2}, rng);
  const Tensor k = random_tensor({2, 3, 3, 1, 1}, rng);
  const Tensor y = value_of([&](Tape& t) { return ops::conv3d(t.constant(x), t.constant(k)); });
  ASSERT_EQ(y.shape(), (Shape{2, 2, 2, 2}));
  auto xi = [&](std::size_t t, std::size_t c, std::size_t w, std::size_t h) { return x[((t * 3 + c) * 2 + w) * 2 + h]; };
  for (std::size_t to = 0; to < 2; ++to)
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t w = 0; w < 2; ++w)
        for (std::size_t h = 0; h < 2; ++h) {
          double s = 0.0;
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t dt = 0; dt < 3; ++dt) s += xi(to + dt, c, w, h) * k[(o * 3 + c) * 3 + dt];
          EXPECT_NEAR(y[((to * 2 + o) * 2 + w) * 2 + h], s, 1e-12);
        }
  const auto report = grad_check(
      [](Tape&, const std::vector<Var>& v) { return ops::sum(ops::square(ops::conv3d(v[0], v[1]))); },
      {{"x", x}, {"k", k}}, 1e-5);
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(ConvTranspose, SingleTapUpsample) {
  const Tensor y = value_of([](Tape& t) {
    return ops::conv_transpose(t.constant(Tensor(Shape{1, 1, 1, 1}, {5.0})),
                               t.constant(Tensor(Shape{1, 1, 2, 1, 1}, {1.0, 1.0})), 2);
  });
  ASSERT_EQ(y.size(), 2u);
  EXPECT_EQ(y[0], 5.0);
  EXPECT_EQ(y[1], 5.0);
}

TEST(ConvTranspose, IsAdjointOfStridedConv) {
  std::mt19937_64 rng(3);
  const std::size_t stride = 2;
  const Tensor k = random_tensor({2, 3, 2, 1, 1}, rng);   // [Cin, Cout, kt, 1, 1]
  const Tensor u = random_tensor({3, 2, 1, 1}, rng);      // transpose input
  const Tensor v = random_tensor({6, 3, 1, 1}, rng);      // transpose output space
  const Tensor tu = value_of([&](Tape& t) { return ops::conv_transpose(t.constant(u), t.constant(k), stride); });
  // Strided conv with the same kernels maps [6, 3] back to [3, 2]: kernels
  // viewed as [Cout=2, Cin=3, kt].
  const Tensor cv = value_of([&](Tape& t) {
    Conv3dOptions o;
    o.stride = {stride, 1, 1};
    return ops::conv3d(t.constant(v), t.constant(k), o);
  });
  ASSERT_EQ(cv.shape(), u.shape());
  EXPECT_NEAR(test::dot(tu, v), test::dot(u, cv), 1e-10);
}

TEST(ConvTranspose, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const auto report = grad_check(
      [](Tape&, const std::vector<Var>& v) { return ops::sum(ops::square(ops::conv_transpose(v[0], v[1], 3))); },
      {{"x", random_tensor({3, 2, 1, 1}, rng)}, {"k", random_tensor({2, 2, 3, 1, 1}, rng)}}, 1e-5);
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(MaxPool, MonotoneSequence) {
  const Tensor y = value_of([](Tape& t) {
    return ops::maxpool_temporal(t.constant(Tensor(Shape{4, 1, 1, 1}, {1, 2, 3, 4})), 2, 2);
  });
  ASSERT_EQ(y.size(), 2u);
  EXPECT_EQ(y[0], 2.0);
  EXPECT_EQ(y[1], 4.0);
}

TEST(MaxPool, TiesRouteGradientToFirstElement) {
  Tape t;
  Var x = t.parameter("x", Tensor::full(Shape{4, 1, 1, 1}, 7.0));
  Var y = ops::maxpool_temporal(x, 2, 2);
  EXPECT_EQ(y.value()[0], 7.0);
  const Tensor g = t.backward(ops::sum(y)).at("x").value;
  EXPECT_EQ(std::vector<double>(g.data().begin(), g.data().end()), (std::vector<double>{1, 0, 1, 0}));
}

TEST(MaxPool, GradientOnUntiedInput) {
  std::mt19937_64 rng(5);
  const auto err = grad_check([](Tape&, Var x) { return ops::sum(ops::square(ops::maxpool_temporal(x, 2, 2))); },
                              random_tensor({6, 2, 1, 2}, rng), 1e-6);
  EXPECT_LT(err, 1e-4);
}

TEST(Activation, KnownValues) {
  const Tensor r = value_of([](Tape& t) { return ops::relu(t.constant(Tensor(Shape{2}, {-1.0, 2.0}))); });
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 2.0);
  Tape t;
  Var x = t.parameter("x", Tensor(Shape{1}, {0.0}));
  Var s = ops::sigmoid(x);
  EXPECT_EQ(s.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(t.backward(ops::sum(s)).at("x").value[0], 0.25);
  std::mt19937_64 rng(6);
  EXPECT_LT(grad_check([](Tape&, Var v) { return ops::sum(ops::sigmoid(v)); }, random_tensor({8}, rng, -3, 3), 1e-5),
            1e-6);
}

TEST(GlobalAvgPool, IdentityConstantAndGradient) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({3, 2, 1, 1}, rng);
  const Tensor y = value_of([&](Tape& t) { return ops::global_avg_pool_spatial(t.constant(x)); });
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
  const Tensor c = value_of([](Tape& t) { return ops::global_avg_pool_spatial(t.constant(Tensor::full(Shape{2, 3, 4, 5}, 1.5))); });
  for (double v : c.data()) EXPECT_DOUBLE_EQ(v, 1.5);
  EXPECT_LT(grad_check([](Tape&, Var v) { return ops::sum(ops::square(ops::global_avg_pool_spatial(v))); },
                       random_tensor({2, 3, 2, 3}, rng), 1e-5),
            1e-4);
}

TEST(Backward, SumGivesOnes) {
  Tape t;
  Var a = t.parameter("a", Tensor(Shape{3}, {1, 2, 3}));
  const Tensor g = t.backward(ops::sum(a)).at("a").value;
  for (double v : g.data()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, DetachedParameterGetsZeros) {
  Tape t;
  Var a = t.parameter("a", Tensor(Shape{3}, {1, 2, 3}));
  t.parameter("b", Tensor(Shape{2}, {4, 5}));
  const GradientMap g = t.backward(ops::sum(a));
  ASSERT_TRUE(g.count("b"));
  EXPECT_EQ(g.at("b").value.shape(), (Shape{2}));
  for (double v : g.at("b").value.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tape t;
  Var a = t.parameter("a", Tensor(Shape{3}));
  EXPECT_THROW(t.backward(a), Error);
}

TEST(Backward, CompositeNetworkMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const auto report = grad_check(
      [](Tape&, const std::vector<Var>& v) {
        Conv3dOptions o;
        o.padding = {1, 0, 0};
        Var h = ops::conv3d(v[0], v[1], o);
        return ops::mean(ops::sigmoid(ops::maxpool_temporal(h, 2, 2)));
      },
      {{"x", random_tensor({6, 2, 2, 1}, rng)}, {"k", random_tensor({3, 2, 3, 1, 1}, rng)}}, 1e-6);
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(Backward, SharedNodeAccumulates) {
  Tape t;
  Var a = t.parameter("a", Tensor(Shape{2}, {1.0, -2.0}));
  const Tensor g = t.backward(ops::sum(ops::add(ops::mul(a, a), a))).at("a").value;
  EXPECT_DOUBLE_EQ(g[0], 3.0);
  EXPECT_DOUBLE_EQ(g[1], -3.0);
}

TEST(GradCheck, SquareHasTinyError) {
  EXPECT_LT(grad_check([](Tape&, Var x) { return ops::sum(ops::square(x)); }, Tensor(Shape{1}, {3.0}), 1e-5), 1e-8);
}

TEST(GradCheck, EpsOutOfRangeIsConfigError) {
  EXPECT_THROW(grad_check([](Tape&, Var x) { return ops::sum(x); }, Tensor(Shape{1}, {1.0}), 0.1), ConfigError);
  EXPECT_THROW(grad_check([](Tape&, Var x) { return ops::sum(x); }, Tensor(Shape{1}, {1.0}), 1e-9), ConfigError);
}

TEST(GradCheck, DetectsInjectedConvFault) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({4, 2, 1, 1}, rng);
  const Tensor k = random_tensor({2, 2, 2, 1, 1}, rng);
  auto f = [](Tape&, const std::vector<Var>& v) { return ops::sum(ops::square(ops::conv3d(v[0], v[1]))); };
  testing::set_conv_backward_fault(true);
  const double broken = grad_check(f, {{"x", x}, {"k", k}}, 1e-5).max_rel_error;
  testing::set_conv_backward_fault(false);
  EXPECT_GT(broken, 1e-2);
  EXPECT_LT(grad_check(f, {{"x", x}, {"k", k}}, 1e-5).max_rel_error, 1e-6);
}

// Property: every op on finite input yields finite values and gradients.
TEST(Property, FiniteInFiniteOut) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 50; ++i) {
    Tape t;
    Var x = t.parameter("x", random_tensor({4, 2, 2, 1}, rng, -50, 50));
    Var k = t.parameter("k", random_tensor({2, 2, 2, 1, 1}, rng, -5, 5));
    Var h = ops::sigmoid(ops::conv3d(ops::relu(x), k));
    Var loss = ops::mean(ops::log(ops::clamp(h, 1e-6, 1.0)));
    const GradientMap g = t.backward(loss);
    EXPECT_TRUE(loss.value().all_finite());
    EXPECT_TRUE(g.at("x").value.all_finite());
    EXPECT_TRUE(g.at("k").value.all_finite());
  }
}

// Property: gradient accumulation does not depend on the order in which
// per-episode terms are summed (up to rounding).
TEST(Property, AccumulationOrderIndependent) {
  std::mt19937_64 rng(11);
  const Tensor init = random_tensor({5}, rng);
  std::vector<Tensor> weights;
  for (int e = 0; e < 6; ++e) weights.push_back(random_tensor({5}, rng));
  auto grad = [&](std::vector<int> order) {
    Tape t;
    Var x = t.parameter("x", init);
    Var s = ops::sum(ops::mul(ops::square(x), t.constant(weights[order[0]])));
    for (std::size_t i = 1; i < order.size(); ++i) {
      s = ops::add(s, ops::sum(ops::mul(ops::square(x), t.constant(weights[order[i]]))));
    }
    return t.backward(s).at("x").value;
  };
  EXPECT_LT(max_abs_diff(grad({0, 1, 2, 3, 4, 5}), grad({5, 3, 1, 0, 4, 2})), 1e-12);
}

}  // namespace
}  // namespace stunet
