#include "stunet/gradcheck.hpp"

#include <cmath>

#include "stunet/error.hpp"

namespace stunet {

namespace {

double evaluate(const ScalarFn& f, const std::vector<NamedTensor>& point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const NamedTensor& nt : point) leaves.push_back(tape.parameter(nt.name, nt.value));
  return f(tape, leaves).value().item();
}

Tensor with_coordinate(const Tensor& t, std::size_t index, double value) {
  std::vector<double> data(t.data().begin(), t.data().end());
  data[index] = value;
  return Tensor(t.shape(), std::move(data));
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const std::vector<NamedTensor>& point, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ConfigError("grad_check: eps " + std::to_string(eps) + " outside [1e-7, 1e-3]");
  }

  GradientMap analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const NamedTensor& nt : point) leaves.push_back(tape.parameter(nt.name, nt.value));
    Var loss = f(tape, leaves);
    if (!loss.value().all_finite()) throw NumericError("grad_check: non-finite loss at base point");
    analytic = tape.backward(loss);
  }

  GradCheckReport report;
  std::vector<NamedTensor> probe = point;
  for (std::size_t p = 0; p < point.size(); ++p) {
    const Tensor& base = point[p].value;
    const Tensor& grad = analytic.at(point[p].name).value;
    for (std::size_t i = 0; i < base.size(); ++i) {
      probe[p].value = with_coordinate(base, i, base[i] + eps);
      const double up = evaluate(f, probe);
      probe[p].value = with_coordinate(base, i, base[i] - eps);
      const double down = evaluate(f, probe);
      probe[p].value = base;
      if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(grad[i])) {
        throw NumericError("grad_check: non-finite value at " + point[p].name + "[" +
                           std::to_string(i) + "]");
      }
      const double central = (up - down) / (2.0 * eps);
      const double err = std::abs(grad[i] - central) / std::max(1.0, std::abs(grad[i]));
      if (err > report.max_rel_error || report.coordinates == 0) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        if (err >= report.max_rel_error) {
          report.worst_tensor = point[p].name;
          report.worst_index = i;
        }
      }
      ++report.coordinates;
    }
  }
  return report;
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point, double eps) {
  ScalarFn wrapped = [&f](Tape& tape, const std::vector<Var>& leaves) { return f(tape, leaves[0]); };
  return grad_check(wrapped, {NamedTensor{"x", point}}, eps).max_rel_error;
}

}  // namespace stunet
