#pragma once

#include <span>
#include <vector>

#include "nathist/sampler.hpp"

namespace nathist::loo {

struct MarginalEstimate {
  double log_f = -INFINITY;  // log f_hat(y_i | theta, psi, beta)
  bool degenerate = false;   // every importance term underflowed
};

// Importance-sampling estimate of the per-individual observed-data likelihood
// using the latent-variable proposal distributions; log_trunc_normalizer is
// log N_i (pass 0 to estimate the untruncated likelihood).
MarginalEstimate marginal_obs_loglik(const IndividualRecord& rec,
                                     const Params& p, double t0, int J,
                                     Rng& rng, double log_trunc_normalizer);

// Convenience overload computing log N_i by quadrature.
MarginalEstimate marginal_obs_loglik(const IndividualRecord& rec,
                                     const Params& p, double t0, int J,
                                     Rng& rng);

struct LooConfig {
  int j_inner = 256;
  std::uint64_t seed = 1;
  bool include_truncation = true;
  bool pareto_smooth = false;  // smooth the harmonic-mean weights
};

struct PredictiveFit {
  double pf_hat = 0.0;
  std::vector<double> contributions;  // log f_hat(y_i | Y_-i), length n
  int j_inner = 0;
  std::vector<double> max_weight;     // max normalized outer weight per i
  std::vector<int> unstable;          // indices with non-finite contributions
};

// Approximate leave-one-out predictive fit from posterior draws:
// pf_hat = -sum_i log( (1/M) sum_m 1 / f_hat(y_i | draw m) ).
PredictiveFit aloocv(std::span<const mcmc::DrawStore> stores,
                     const Cohort& cohort, const LooConfig& cfg);

struct PairedTTest {
  double delta = 0.0;  // pf_A - pf_B
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool zero_variance = false;
};

PairedTTest paired_t_test(const PredictiveFit& fit_a,
                          const PredictiveFit& fit_b);

struct PredictiveSojourn {
  std::vector<double> grid;
  std::vector<double> density;  // draw-averaged Weibull density on the grid
  double p_short = 0.0;         // P(sojourn < short_threshold)
  double p_long = 0.0;          // P(sojourn > long_threshold)
};

// Rao-Blackwell predictive sojourn distribution: the posterior-draw average
// of Weibull(lambda_prog^(m), shape_prog) densities.
PredictiveSojourn predictive_sojourn(std::span<const mcmc::DrawStore> stores,
                                     std::span<const double> grid,
                                     double short_threshold = 0.5,
                                     double long_threshold = 15.0);

// Generalized-Pareto tail fit (method of Zhang & Stephens) used by the
// optional weight smoothing; exposed for tests.
struct GpdFit {
  double k = 0.0;     // shape
  double sigma = 1.0; // scale
};
GpdFit fit_gpd(std::vector<double> exceedances);

}  // namespace nathist::loo
