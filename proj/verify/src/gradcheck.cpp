#include "mner/verify/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mner/errors.hpp"

namespace mner::verify {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double h,
                          double floor) {
  for (const auto& t : inputs) {
    if (!t.requires_grad()) throw ContractError("gradcheck: every input must require grad");
    Tensor copy = t;
    copy.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    GradientTape tape;
    TapeScope scope(tape);
    const Tensor y = f();
    if (y.numel() != 1) throw ShapeError("gradcheck: function must return a scalar");
    tape.backward(y);
  }
  for (const auto& t : inputs) {
    analytic.emplace_back(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.back().begin());
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k];
    auto data = t.mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + h;
      const double up = f().item();
      data[j] = saved - h;
      const double down = f().item();
      data[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double abs_err = std::abs(analytic[k][j] - numeric);
      const double rel = relative_error(analytic[k][j], numeric, floor);
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      if (rel > result.max_relative_error || result.checked == 0) {
        result.max_relative_error = std::max(result.max_relative_error, rel);
        result.worst = "input[" + std::to_string(k) + "] element " + std::to_string(j);
      }
      ++result.checked;
    }
  }
  for (const auto& t : inputs) {
    Tensor copy = t;
    copy.zero_grad();
  }
  return result;
}

}  // namespace mner::verify
