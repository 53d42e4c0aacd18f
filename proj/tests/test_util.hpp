#pragma once

#include <random>
#include <vector>

#include "stunet/features.hpp"
#include "stunet/tensor.hpp"

namespace stunet::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(shape.numel());
  for (double& v : d) v = u(rng);
  return Tensor(shape, std::move(d));
}

inline FrameMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> d(rows * cols);
  for (double& v : d) v = g(rng);
  return FrameMatrix(rows, cols, std::move(d));
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace stunet::test
