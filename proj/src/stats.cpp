#include "nathist/stats.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nathist::stats {

double logsumexp(std::span<const double> log_terms) {
  double m = -INFINITY;
  for (double v : log_terms) m = std::max(m, v);
  if (!std::isfinite(m)) return m;  // all -inf (or a +inf/nan dominates)
  double s = 0.0;
  for (double v : log_terms) s += std::exp(v - m);
  return m + std::log(s);
}

double gamma_logpdf(double x, double shape, double rate) {
  if (x < 0.0) return -INFINITY;
  double t = 0.0;
  if (shape != 1.0) {
    if (x == 0.0) return shape > 1.0 ? -INFINITY : INFINITY;
    t = (shape - 1.0) * std::log(x);
  }
  return shape * std::log(rate) - std::lgamma(shape) + t - rate * x;
}

double beta_logpdf(double x, double a, double b) {
  if (x < 0.0 || x > 1.0) return -INFINITY;
  const double lbeta =
      std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double t = 0.0;
  if (a != 1.0) {
    if (x == 0.0) return a > 1.0 ? -INFINITY : INFINITY;
    t += (a - 1.0) * std::log(x);
  }
  if (b != 1.0) {
    if (x == 1.0) return b > 1.0 ? -INFINITY : INFINITY;
    t += (b - 1.0) * std::log1p(-x);
  }
  return t - lbeta;
}

double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw std::invalid_argument("quantile of empty vector");
  std::sort(x.begin(), x.end());
  const double h = p * (static_cast<double>(x.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - std::floor(h)) * (x[lo + 1] - x[lo]);
}

double beta_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::cdf(boost::math::beta_distribution<double>(a, b), x);
}

double student_t_two_sided_p(double t, double dof) {
  boost::math::students_t_distribution<double> dist(dof);
  return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

double chi_squared_upper_p(double stat, int dof) {
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double normal_cdf(double x) {
  return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

namespace {
// Asymptotic Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{k-1}
// exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}
}  // namespace

KsResult ks_test(std::vector<double> sample, double (*cdf)(double, void*),
                 void* ctx) {
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i], ctx);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  return {d, kolmogorov_q(lambda)};
}

ChiSquareResult chi_square_gof(std::span<const double> observed,
                               std::span<const double> expected_probs,
                               int dof_override) {
  if (observed.size() != expected_probs.size())
    throw std::invalid_argument("chi_square_gof: size mismatch");
  double total = 0.0;
  for (double o : observed) total += o;
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = total * expected_probs[i];
    if (e <= 0.0) {
      if (observed[i] > 0.0)
        return {INFINITY, static_cast<int>(observed.size()) - 1, 0.0};
      continue;
    }
    stat += (observed[i] - e) * (observed[i] - e) / e;
  }
  const int dof = dof_override > 0 ? dof_override
                                   : static_cast<int>(observed.size()) - 1;
  return {stat, dof, chi_squared_upper_p(stat, dof)};
}

}  // namespace nathist::stats
