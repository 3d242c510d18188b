#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "emocause/params.hpp"

namespace emocause {

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates sampled across all parameters; every coordinate is checked
  // when this exceeds the total count.
  std::size_t samples = 200;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
};

// |analytic − fd| / (|analytic| + |fd| + 1e-12) for one coordinate.
double relative_error(double analytic, double numeric);

// Compares supplied analytic gradients (one buffer per ParamStore entry)
// against central differences of `loss_value`.
GradCheckResult compare_with_finite_differences(const std::function<double()>& loss_value, ParamStore& params,
                                                const std::vector<std::vector<double>>& analytic,
                                                const GradCheckOptions& options = {});

// Runs one backward pass of `loss_fn` for the analytic gradients, then
// compares against central differences on sampled coordinates.
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, ParamStore& params,
                                  const GradCheckOptions& options = {});

}  // namespace emocause
