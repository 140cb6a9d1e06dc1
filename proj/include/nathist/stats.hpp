#pragma once

#include <span>
#include <vector>

namespace nathist::stats {

double logsumexp(std::span<const double> log_terms);

// log densities tolerating boundary arguments (x = 0, x = 1)
double gamma_logpdf(double x, double shape, double rate);
double beta_logpdf(double x, double a, double b);

double mean(std::span<const double> x);
double sample_variance(std::span<const double> x);
double sd(std::span<const double> x);

// Linear-interpolation quantile (R type 7); p in [0,1].
double quantile(std::vector<double> x, double p);

double beta_cdf(double x, double a, double b);
double student_t_two_sided_p(double t, double dof);
double chi_squared_upper_p(double stat, int dof);
double normal_cdf(double x);

// One-sample Kolmogorov-Smirnov test against a continuous CDF given as
// already-evaluated values at the sorted sample; returns asymptotic p.
struct KsResult {
  double statistic;
  double p_value;
};
KsResult ks_test(std::vector<double> sample, double (*cdf)(double, void*),
                 void* ctx);

// Chi-squared goodness-of-fit for observed counts against expected
// probabilities (dof = bins - 1 unless overridden).
struct ChiSquareResult {
  double statistic;
  int dof;
  double p_value;
};
ChiSquareResult chi_square_gof(std::span<const double> observed,
                               std::span<const double> expected_probs,
                               int dof_override = -1);

}  // namespace nathist::stats
