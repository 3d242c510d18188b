#include "emocause/gradcheck.hpp"

#include <cmath>

#include "emocause/error.hpp"
#include "emocause/rng.hpp"

namespace emocause {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
}

GradCheckResult compare_with_finite_differences(const std::function<double()>& loss_value, ParamStore& params,
                                                const std::vector<std::vector<double>>& analytic,
                                                const GradCheckOptions& options) {
  if (analytic.size() != params.size()) throw DimensionError("one analytic gradient per parameter required");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  const std::size_t total = params.total_values();
  if (options.samples >= total) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params.entries()[p].tensor.size(); ++i) coords.emplace_back(p, i);
    }
  } else {
    Rng rng(options.seed);
    for (std::size_t s = 0; s < options.samples; ++s) {
      std::size_t flat = rng.below(total);
      std::size_t p = 0;
      while (flat >= params.entries()[p].tensor.size()) flat -= params.entries()[p++].tensor.size();
      coords.emplace_back(p, flat);
    }
  }

  GradCheckResult result;
  for (const auto& [p, i] : coords) {
    auto values = params.entries()[p].tensor.mutable_data();
    const double original = values[i];
    values[i] = original + options.step;
    const double plus = loss_value();
    values[i] = original - options.step;
    const double minus = loss_value();
    values[i] = original;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double err = relative_error(analytic[p][i], numeric);
    ++result.coordinates_checked;
    if (result.worst_parameter.empty() || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = params.entries()[p].name;
      result.worst_index = i;
    }
  }
  return result;
}

GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, ParamStore& params,
                                  const GradCheckOptions& options) {
  params.zero_grad();
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& e : params.entries()) {
    if (e.tensor.has_grad()) {
      analytic.emplace_back(e.tensor.grad().begin(), e.tensor.grad().end());
    } else {
      analytic.emplace_back(e.tensor.size(), 0.0);
    }
  }
  return compare_with_finite_differences([&] { return loss_fn().item(); }, params, analytic, options);
}

}  // namespace emocause
