#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nathist/sampler.hpp"

namespace nathist::diag {

// Gelman-Rubin potential scale reduction factor over >= 2 equal-length
// chains: sqrt([(1 - 1/L) W + B/L] / W).
struct PsrfResult {
  double value = 1.0;
  bool degenerate = false;  // zero within-chain variance
};
PsrfResult psrf(const std::vector<std::vector<double>>& chains);

// Split-chain variant (each chain halved first).
PsrfResult psrf_split(const std::vector<std::vector<double>>& chains);

// Effective sample size via the initial monotone sequence estimator.
struct EssResult {
  double value = 0.0;
  bool degenerate = false;  // zero-variance chain
};
EssResult ess(std::span<const double> draws);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;   // central 95% credible interval
  double ci_high = 0.0;
  double psrf = 1.0;     // NaN when only one chain
  double ess = 0.0;      // summed over chains
};

struct ChainSummary {
  std::vector<ParameterSummary> parameters;
  // per-chain acceptance rates by update type
  std::vector<double> accept_h, accept_prog, accept_psi, accept_zhp;
};

// A named posterior functional evaluated per draw.
struct Functional {
  std::string name;
  std::function<double(double lambda_h, double lambda_prog, double psi,
                       double beta)>
      eval;
};

// Summaries of the raw parameters plus any requested functionals, computed
// across all chains (which must agree in length).
ChainSummary summarize(const std::vector<mcmc::DrawStore>& stores,
                       const std::vector<Functional>& functionals = {});

// Built-in functionals: mean sojourn time, pre-clinical hazard at an age,
// cumulative onset risk by an age (all for the fixed shapes of the fit).
Functional functional_mean_sojourn(double shape_prog);
Functional functional_hazard_at(double age, double t0, double shape_h);
Functional functional_onset_risk_by(double age, double t0, double shape_h);

}  // namespace nathist::diag
