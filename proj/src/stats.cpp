#include "emocause/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "emocause/error.hpp"

namespace emocause {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw DataError("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  const double mu = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

std::string format_mean_std(std::span<const double> xs) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * mean(xs), 100.0 * population_std(xs));
  return buf;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired t-test needs samples of equal length");
  if (a.size() < 2) throw DataError("paired t-test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double md = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - md) * (x - md);
  const double sd = std::sqrt(ss / (n - 1.0));

  TTestResult r;
  r.df = d.size() - 1;
  if (sd == 0.0) {
    if (md == 0.0) {
      r.t = 0.0;
      r.p_value = 1.0;
    } else {
      r.t = md > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.t = md / (sd / std::sqrt(n));
  boost::math::students_t dist(static_cast<double>(r.df));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  return r;
}

double chi_squared_uniform_p(std::span<const std::size_t> counts) {
  if (counts.size() < 2) throw DataError("chi-squared test needs at least two cells");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total == 0.0) throw DataError("chi-squared test on zero counts");
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace emocause
