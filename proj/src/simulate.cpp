#include "nathist/simulate.hpp"

#include <cmath>
#include <string>

namespace nathist::sim {

History simulate_history(Rng& rng, const Params& truth, double t0) {
  History h;
  h.tau_hp = t0 + sample_weibull(rng, truth.onset);
  h.indolent = rng.bernoulli(truth.psi);
  h.tau_pc =
      h.indolent ? INFINITY : h.tau_hp + sample_weibull(rng, truth.progression);
  return h;
}

double sample_inter_screen_gap(Rng& rng, const ScheduleSpec& spec) {
  return spec.gap_base + rng.poisson(spec.gap_poisson_mean);
}

Schedule simulate_schedule(Rng& rng, const ScheduleSpec& spec) {
  Schedule s;
  // categorical first-screen age with geometric-like decay over integer ages
  const int span = spec.first_age_max - spec.first_age_min + 1;
  const double q = std::exp(-1.0 / spec.first_age_decay);
  const double total = (1.0 - std::pow(q, span)) / (1.0 - q);
  double u = rng.uniform() * total;
  int first = spec.first_age_max;
  double w = 1.0;
  for (int k = 0; k < span; ++k, w *= q) {
    u -= w;
    if (u < 0.0) {
      first = spec.first_age_min + k;
      break;
    }
  }
  s.censor_age = std::min(spec.age_cap,
                          first + rng.exponential(1.0 / spec.followup_mean));
  double age = first;
  while (age <= s.censor_age) {
    s.screen_ages.push_back(age);
    age += sample_inter_screen_gap(rng, spec);
  }
  return s;
}

std::optional<IndividualRecord> simulate_observed(Rng& rng,
                                                  const History& history,
                                                  const Schedule& schedule,
                                                  double beta,
                                                  const std::string& id) {
  const double entry = schedule.screen_ages.front();
  if (history.tau_pc <= entry) return std::nullopt;  // left truncation

  std::vector<double> ages;
  std::vector<std::uint8_t> results;
  bool screen_positive = false;
  for (double t : schedule.screen_ages) {
    if (t >= history.tau_pc) break;  // diagnosis removed them from screening
    ages.push_back(t);
    if (t >= history.tau_hp && rng.bernoulli(beta)) {
      results.push_back(1);
      screen_positive = true;
      break;
    }
    results.push_back(0);
  }

  RawEndpoint ep;
  if (screen_positive) {
    ep.t_pc = ages.back();
    ep.censor_age = ages.back();
  } else if (history.tau_pc <= schedule.censor_age) {
    ep.t_pc = history.tau_pc;  // interval-detected clinical diagnosis
  } else {
    ep.t_pc = schedule.censor_age;
    ep.censor_age = schedule.censor_age;
  }
  return classify(id, std::move(ages), std::move(results), ep);
}

SimulatedCohort simulate_cohort(const Params& truth, const SimConfig& cfg) {
  SimulatedCohort out;
  std::vector<IndividualRecord> records;
  records.reserve(cfg.n);
  out.truth.reserve(cfg.n);
  std::uint32_t attempt = 0;
  while (static_cast<int>(records.size()) < cfg.n) {
    Rng rng(cfg.seed, Stream::Sim, 0, attempt);
    ++attempt;
    const History h = simulate_history(rng, truth, cfg.t0);
    const Schedule s = simulate_schedule(rng, cfg.schedule);
    auto rec = simulate_observed(rng, h, s, truth.beta,
                                 std::to_string(records.size() + 1));
    if (!rec) {
      ++out.excluded;
      continue;
    }
    records.push_back(std::move(*rec));
    out.truth.push_back(h);
  }
  out.cohort = Cohort::build(cfg.t0, std::move(records));
  return out;
}

}  // namespace nathist::sim
