#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nathist/weibull.hpp"

namespace nathist {

// Schema or record-level problem in user-supplied data; message names the
// offending record ids / rows.
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Group : std::uint8_t { Censored, ScreenDetected, IntervalDetected };

inline const char* group_name(Group g) {
  switch (g) {
    case Group::Censored: return "censored";
    case Group::ScreenDetected: return "screen_detected";
    case Group::IntervalDetected: return "interval_detected";
  }
  return "?";
}

// Full parameter vector: onset law F_H, progressive sojourn law F_prog,
// indolent fraction psi, screen sensitivity beta.
struct Params {
  WeibullRS onset;
  WeibullRS progression;
  double psi;
  double beta;

  Params(WeibullRS onset_, WeibullRS progression_, double psi_, double beta_)
      : onset(onset_), progression(progression_), psi(psi_), beta(beta_) {
    if (!(psi >= 0.0 && psi <= 1.0))
      throw std::domain_error("Params: psi must lie in [0,1]");
    if (!(beta >= 0.0 && beta <= 1.0))
      throw std::domain_error("Params: beta must lie in [0,1]");
  }
};

// Gamma priors on the two Weibull rates, beta priors on psi and beta,
// fixed shapes, and the start age of non-zero onset hazard.
struct PriorSpec {
  double t0 = 30.0;
  double a_h = 1.0, b_h = 0.01;
  double a_prog = 1.0, b_prog = 0.01;
  double a_psi = 1.0, b_psi = 1.0;
  double a_beta = 38.5, b_beta = 5.8;
  double shape_h = 2.0;
  double shape_prog = 2.0;

  void validate() const {
    if (!(t0 >= 0.0)) throw std::domain_error("PriorSpec: t0 must be >= 0");
    for (double v : {a_h, b_h, a_prog, b_prog, a_psi, b_psi, a_beta, b_beta,
                     shape_h, shape_prog})
      if (!(v > 0.0))
        throw std::domain_error("PriorSpec: hyperparameters must be > 0");
  }
};

// One person's observed screening history. screen_ages are strictly
// increasing with the first equal to the study entry age; for interval
// cases censor_age equals the observed clinical onset age t_pc.
struct IndividualRecord {
  std::string id;
  std::vector<double> screen_ages;
  std::vector<std::uint8_t> screen_results;
  double t_pc = 0.0;
  double censor_age = 0.0;
  Group group = Group::Censored;

  double entry_age() const { return screen_ages.front(); }
  int n_screens() const { return static_cast<int>(screen_ages.size()); }
};

// Latent pair (Z^HP, Z^I). onset_age == +inf encodes "no pre-clinical onset
// by the censoring age" (the empty symbol).
struct LatentState {
  double onset_age = INFINITY;
  bool indolent = false;

  bool has_onset() const { return std::isfinite(onset_age); }
};

// Endpoint fields as they come out of the data files; censor_age absent
// means t_pc records an observed clinical diagnosis.
struct RawEndpoint {
  double t_pc = 0.0;
  std::optional<double> censor_age;
};

// Assign the censored / screen-detected / interval-detected group and
// validate the record invariants.
IndividualRecord classify(std::string id, std::vector<double> screen_ages,
                          std::vector<std::uint8_t> screen_results,
                          const RawEndpoint& endpoint);

// A validated cohort plus the distinct-entry-age table used to share
// left-truncation quadratures across individuals.
struct Cohort {
  double t0 = 30.0;
  std::vector<IndividualRecord> records;
  std::vector<double> entry_ages;       // distinct, sorted
  std::vector<int> entry_index;         // per record
  std::vector<int> entry_count;         // records per distinct entry age

  static Cohort build(double t0, std::vector<IndividualRecord> records);
  int size() const { return static_cast<int>(records.size()); }
};

}  // namespace nathist
