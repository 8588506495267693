#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mner/tensor.hpp"

namespace mner::verify {

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;  // number of scalar coordinates
  std::string worst;        // "input[i] element j"
};

// Error of one coordinate: |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor);

// Compares the tape gradient of the scalar `f()` with central differences
// (step h) for every element of every input. `f` must be deterministic and
// read the inputs' current values.
GradCheckResult gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double h = 1e-4,
                          double floor = 1.0);

}  // namespace mner::verify
