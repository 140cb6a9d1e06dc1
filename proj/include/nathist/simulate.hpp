#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nathist/rng.hpp"
#include "nathist/types.hpp"

namespace nathist::sim {

// Screening-schedule protocol: first screen age categorical on integer ages
// first_age_min..first_age_max with weights proportional to exp(-k/5),
// inter-screen gaps of 1 + Poisson(0.5) years, follow-up ending at
// min(age_cap, first + W) with W ~ Exp(rate 1/5).
struct ScheduleSpec {
  int first_age_min = 40;
  int first_age_max = 80;
  double first_age_decay = 5.0;   // weights exp(-k / decay)
  double gap_base = 1.0;
  double gap_poisson_mean = 0.5;
  double followup_mean = 5.0;
  double age_cap = 100.0;
};

struct SimConfig {
  double t0 = 30.0;
  int n = 1000;
  std::uint64_t seed = 1;
  ScheduleSpec schedule;
};

struct History {
  double tau_hp = 0.0;   // pre-clinical onset age
  bool indolent = false;
  double tau_pc = 0.0;   // clinical onset age; +inf when indolent
};

struct Schedule {
  std::vector<double> screen_ages;
  double censor_age = 0.0;
};

History simulate_history(Rng& rng, const Params& truth, double t0);

// one draw of the inter-screen gap law (base + Poisson years)
double sample_inter_screen_gap(Rng& rng, const ScheduleSpec& spec);

Schedule simulate_schedule(Rng& rng, const ScheduleSpec& spec);

// Observation process: negative screens in H, positive with probability beta
// in P; a positive screen or clinical onset ends the record. Individuals with
// clinical onset before study entry are excluded (left truncation).
std::optional<IndividualRecord> simulate_observed(Rng& rng,
                                                  const History& history,
                                                  const Schedule& schedule,
                                                  double beta,
                                                  const std::string& id);

struct SimulatedCohort {
  Cohort cohort;
  std::vector<History> truth;  // aligned with cohort.records
  long excluded = 0;           // left-truncated attempts discarded
};

// Resamples until n retained records exist.
SimulatedCohort simulate_cohort(const Params& truth, const SimConfig& cfg);

}  // namespace nathist::sim
