#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stunet/autograd.hpp"

namespace stunet {

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct GradCheckReport {
  // max over coordinates of |analytic - central| / max(1, |analytic|)
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Builds a scalar on `tape` from the given leaves (registered as parameters in
// the order of `point`).
using ScalarFn = std::function<Var(Tape& tape, const std::vector<Var>& leaves)>;

// Compares tape gradients against central differences at every coordinate.
// eps must lie in [1e-7, 1e-3].
GradCheckReport grad_check(const ScalarFn& f, const std::vector<NamedTensor>& point, double eps);

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point, double eps);

}  // namespace stunet
