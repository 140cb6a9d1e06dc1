#pragma once

#include <vector>

#include "nathist/types.hpp"

namespace nathist {

struct ScreenCounts {
  int m_plus = 0;   // true positives
  int m_minus = 0;  // false negatives (negative screens at ages >= onset)
};

ScreenCounts screen_counts(const IndividualRecord& rec, const LatentState& z);

// log f(Z_i | theta, psi): survival of the onset law when no onset occurred
// by the censoring age, otherwise onset density times the indolence mass.
double latent_logdensity(const IndividualRecord& rec, const LatentState& z,
                         const Params& p, double t0);

// log f(Y_i | Z_i, theta, beta): right-censored clinical onset age plus
// screen outcomes. Impossible (z, record) combinations yield -inf.
double obs_logdensity(const IndividualRecord& rec, const LatentState& z,
                      const Params& p);

// P(tau_PC > e | progressive) = S_H(e - t0) + int f_H(t - t0) S_prog(e - t) dt,
// the parameter-only part of the left-truncation normalizer.
double truncation_survival_progressive(double entry_age,
                                       const WeibullRS& onset,
                                       const WeibullRS& progression,
                                       double t0);

inline double truncation_log_normalizer_from_K(double K, double psi) {
  return std::log(psi + (1.0 - psi) * K);
}

// log N_i = log[psi + (1-psi) (S_H(e-t0) + int f_H S_prog)]
double truncation_log_normalizer(double entry_age, const Params& p, double t0);

// K evaluated at each distinct entry age (shared across a sweep).
std::vector<double> truncation_K_table(const std::vector<double>& entry_ages,
                                       const WeibullRS& onset,
                                       const WeibullRS& progression,
                                       double t0);

// latent + observation - truncation normalizer; one individual's factor of
// the joint posterior.
double individual_log_target(const IndividualRecord& rec, const LatentState& z,
                             const Params& p, double t0);

double log_prior(const Params& p, const PriorSpec& prior);

}  // namespace nathist
