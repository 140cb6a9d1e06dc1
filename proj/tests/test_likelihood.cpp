#include <doctest.h>

#include <cmath>

#include "nathist/likelihood.hpp"
#include "nathist/rng.hpp"
#include "nathist/simulate.hpp"
#include "nathist/stats.hpp"
#include "support.hpp"

using namespace nathist;

namespace {

const double kT0 = 30.0;

Params paper_truth() {
  return {WeibullRS(6.5e-5, 2.0), WeibullRS(3.14e-2, 2.0), 0.1, 0.85};
}

// Straight transcription of the model densities, kept independent of the
// library's code paths (std::pow everywhere, Simpson quadrature for N_i).
double oracle_surv(double x, const WeibullRS& w) {
  return std::exp(-w.rate * std::pow(x, w.shape));
}
double oracle_pdf(double x, const WeibullRS& w) {
  return w.rate * w.shape * std::pow(x, w.shape - 1.0) *
         oracle_surv(x, w);
}
double oracle_normalizer(double entry, const Params& p, double t0) {
  const double integral = testsup::integrate(
      [&](double t) {
        return oracle_pdf(t - t0, p.onset) *
               oracle_surv(entry - t, p.progression);
      },
      t0, entry, 1e-13);
  return p.psi +
         (1.0 - p.psi) * (oracle_surv(entry - t0, p.onset) + integral);
}
double oracle_target(const IndividualRecord& rec, const LatentState& z,
                     const Params& p, double t0) {
  double density;
  int m_minus = 0;
  if (!z.has_onset()) {
    density = oracle_surv(rec.censor_age - t0, p.onset);
    if (rec.group != Group::Censored) density = 0.0;
  } else {
    density = oracle_pdf(z.onset_age - t0, p.onset) *
              (z.indolent ? p.psi : 1.0 - p.psi);
    for (int j = 0; j < rec.n_screens(); ++j)
      if (rec.screen_results[j] == 0 && rec.screen_ages[j] >= z.onset_age)
        ++m_minus;
    switch (rec.group) {
      case Group::Censored:
        if (!z.indolent)
          density *= oracle_surv(rec.censor_age - z.onset_age, p.progression);
        break;
      case Group::ScreenDetected:
        if (!z.indolent)
          density *= oracle_surv(rec.censor_age - z.onset_age, p.progression);
        density *= p.beta;
        break;
      case Group::IntervalDetected:
        density *= z.indolent
                       ? 0.0
                       : oracle_pdf(rec.t_pc - z.onset_age, p.progression);
        break;
    }
    density *= std::pow(1.0 - p.beta, m_minus);
  }
  return std::log(density) -
         std::log(oracle_normalizer(rec.entry_age(), p, t0));
}

}  // namespace

TEST_CASE("screen counts") {
  const auto rec = classify("2", {40, 45}, {0, 1}, {45.0, 45.0});
  CHECK(screen_counts(rec, {INFINITY, false}).m_plus == 1);
  CHECK(screen_counts(rec, {INFINITY, false}).m_minus == 0);
  auto c = screen_counts(rec, {42.0, false});
  CHECK(c.m_plus == 1);
  CHECK(c.m_minus == 0);  // only the positive screen lies after onset
  c = screen_counts(rec, {39.0, false});
  CHECK(c.m_plus == 1);
  CHECK(c.m_minus == 1);  // the age-40 screen becomes a false negative

  const auto cens = classify("1", {40, 45}, {0, 0}, {46.5, 46.5});
  CHECK(screen_counts(cens, {INFINITY, false}).m_minus == 0);
  CHECK(screen_counts(cens, {45.0 + 1e-9, false}).m_minus == 0);
  CHECK(screen_counts(cens, {45.0, false}).m_minus == 1);
  CHECK(screen_counts(cens, {39.0, true}).m_minus == 2);
}

TEST_CASE("latent log density") {
  const auto rec = classify("1", {60}, {0}, {80.0, 80.0});
  const Params p = paper_truth();
  // S_H over 50 years at the synthetic-truth onset law
  CHECK(latent_logdensity(rec, {INFINITY, false}, p, kT0) ==
        doctest::Approx(-0.1625).epsilon(1e-12));
  // indolence factor vanishes at psi = 1
  Params p1(p.onset, p.progression, 1.0, p.beta);
  CHECK(latent_logdensity(rec, {50.0, true}, p1, kT0) ==
        doctest::Approx(weibull_logpdf(20.0, p.onset)));
  CHECK_THROWS_AS(latent_logdensity(rec, {29.0, false}, p, kT0),
                  std::domain_error);
  CHECK_THROWS_AS(latent_logdensity(rec, {81.0, false}, p, kT0),
                  std::domain_error);
}

TEST_CASE("observation log density per group") {
  const Params p = paper_truth();
  const auto cens = classify("1", {40, 45}, {0, 0}, {46.5, 46.5});
  CHECK(obs_logdensity(cens, {INFINITY, false}, p) == 0.0);

  // screen-detected with one false negative: log beta + log(1-beta) + survival
  const auto sd = classify("2", {40, 45}, {0, 1}, {45.0, 45.0});
  const double got = obs_logdensity(sd, {39.5, false}, p);
  const double want = std::log(0.85) + std::log(0.15) +
                      weibull_logsurv(45.0 - 39.5, p.progression);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(obs_logdensity(sd, {INFINITY, false}, p) == -INFINITY);

  const auto iv = classify("3", {40, 45}, {0, 0}, {46.0, std::nullopt});
  CHECK(obs_logdensity(iv, {44.0, true}, p) == -INFINITY);
  CHECK(obs_logdensity(iv, {INFINITY, false}, p) == -INFINITY);
  CHECK(obs_logdensity(iv, {44.0, false}, p) ==
        doctest::Approx(std::log(0.15) +
                        weibull_logpdf(2.0, p.progression)));
}

TEST_CASE("reachability of finite observation densities (2-screen toys)") {
  const Params p = paper_truth();
  const auto recs = {classify("c", {40, 45}, {0, 0}, {46.5, 46.5}),
                     classify("s", {40, 45}, {0, 1}, {45.0, 45.0}),
                     classify("i", {40, 45}, {0, 0}, {46.0, std::nullopt})};
  for (const auto& rec : recs) {
    for (double z : {std::numeric_limits<double>::infinity(), 39.0, 42.0, 44.9}) {
      for (bool ind : {false, true}) {
        if (std::isfinite(z) && !(z <= rec.censor_age)) continue;
        const double v = obs_logdensity(rec, {z, ind}, p);
        // generative reachability: onset must precede a positive screen or a
        // clinical diagnosis, and a clinical diagnosis forces progressive
        bool reachable = true;
        if (rec.group != Group::Censored && !std::isfinite(z))
          reachable = false;
        if (rec.group == Group::IntervalDetected && ind) reachable = false;
        CHECK(std::isfinite(v) == reachable);
      }
    }
  }
}

TEST_CASE("truncation normalizer basics") {
  const Params p = paper_truth();
  // entry at t0+ carries no information
  CHECK(truncation_log_normalizer(kT0 + 1e-9, p, kT0) ==
        doctest::Approx(0.0).epsilon(1e-9));
  // indolent-only population never reaches the clinical state
  Params p1(p.onset, p.progression, 1.0, p.beta);
  CHECK(truncation_log_normalizer(50.0, p1, kT0) == 0.0);
  // bounded above by 0 and non-increasing in the entry age
  double prev = 0.0;
  for (double e : {35.0, 45.0, 50.0, 60.0, 80.0}) {
    const double v = truncation_log_normalizer(e, p, kT0);
    CHECK(v <= 0.0);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("truncation normalizer against the Simpson oracle") {
  const Params p = paper_truth();
  for (double e : {40.0, 50.0, 70.0}) {
    CHECK(truncation_log_normalizer(e, p, kT0) ==
          doctest::Approx(std::log(oracle_normalizer(e, p, kT0)))
              .epsilon(1e-9));
  }
  // sharply peaked onset density: the u-substituted quadrature must not
  // miss the spike
  const Params sharp(WeibullRS(50.0, 2.0), WeibullRS(0.1, 2.0), 0.3, 0.85);
  const double got = truncation_log_normalizer(50.0, sharp, kT0);
  const double want = std::log(oracle_normalizer(50.0, sharp, kT0));
  CHECK(got == doctest::Approx(want).epsilon(1e-7));
}

TEST_CASE("individual log target matches an independent transcription") {
  const Params p = paper_truth();
  sim::SimConfig cfg;
  cfg.n = 60;
  cfg.seed = 99;
  const auto simulated = sim::simulate_cohort(p, cfg);
  Rng rng(7, Stream::Generic);
  double sum_lib = 0.0, sum_oracle = 0.0;
  for (const auto& rec : simulated.cohort.records) {
    LatentState z;
    if (rec.group == Group::Censored && rng.uniform() < 0.3) {
      z.onset_age = INFINITY;
    } else {
      const double hi =
          rec.group == Group::IntervalDetected ? rec.t_pc : rec.censor_age;
      z.onset_age = rng.uniform(kT0 + 0.1, hi);
      z.indolent =
          rec.group != Group::IntervalDetected && rng.uniform() < 0.5;
    }
    const double lib = individual_log_target(rec, z, p, kT0);
    const double ora = oracle_target(rec, z, p, kT0);
    CHECK(lib == doctest::Approx(ora).epsilon(1e-10));
    sum_lib += lib;
    sum_oracle += ora;
  }
  CHECK(sum_lib == doctest::Approx(sum_oracle).epsilon(1e-9));
}

TEST_CASE("one-screen censored record at psi = 1") {
  const auto rec = classify("1", {40}, {0}, {46.0, 46.0});
  const Params p(WeibullRS(6.5e-5, 2.0), WeibullRS(3.14e-2, 2.0), 1.0, 0.85);
  // N_i = 1 at psi = 1, so the no-onset target is just log S_H(c - t0)
  CHECK(individual_log_target(rec, {INFINITY, false}, p, kT0) ==
        doctest::Approx(weibull_logsurv(16.0, p.onset)));
}

TEST_CASE("log prior") {
  PriorSpec prior;
  prior.a_psi = 1.0;
  prior.b_psi = 1.0;
  Params p(WeibullRS(1.0, 2.0), WeibullRS(1.0, 2.0), 0.37, 0.5);
  PriorSpec flat_beta = prior;
  flat_beta.a_beta = 1.0;
  flat_beta.b_beta = 1.0;
  // uniform components contribute 0
  const double v = log_prior(p, flat_beta);
  CHECK(v == doctest::Approx(stats::gamma_logpdf(1.0, 1.0, 0.01) * 2));
}

TEST_CASE("beta prior interval") {
  // central 95% interval of Be(38.5, 5.8)
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (stats::beta_cdf(mid, 38.5, 5.8) < 0.025 ? lo : hi) = mid;
  }
  CHECK(lo == doctest::Approx(0.76).epsilon(0.0066));
  double lo2 = 0.0, hi2 = 1.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo2 + hi2);
    (stats::beta_cdf(mid, 38.5, 5.8) < 0.975 ? lo2 : hi2) = mid;
  }
  CHECK(lo2 == doctest::Approx(0.95).epsilon(0.0053));
}

TEST_CASE("gamma log density boundary") {
  CHECK(stats::gamma_logpdf(0.0, 1.0, 0.01) ==
        doctest::Approx(std::log(0.01)));
  CHECK(stats::gamma_logpdf(-1.0, 1.0, 0.01) == -INFINITY);
}
