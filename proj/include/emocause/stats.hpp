#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace emocause {

double mean(std::span<const double> xs);
// Population standard deviation (divides by n).
double population_std(std::span<const double> xs);

// Renders fractions as percentages: "xx.xx ± y.yy".
std::string format_mean_std(std::span<const double> xs);

struct TTestResult {
  double t = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;  // two-sided
};

// Paired two-sided t-test on a - b. Needs at least two pairs of equal length.
// With zero variance of the differences the statistic is undefined; we report
// t = +-inf and p = 0 when the mean difference is nonzero, t = 0 and p = 1
// otherwise.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Pearson chi-squared goodness-of-fit p-value of `counts` against a uniform
// distribution over its cells.
double chi_squared_uniform_p(std::span<const std::size_t> counts);

}  // namespace emocause
