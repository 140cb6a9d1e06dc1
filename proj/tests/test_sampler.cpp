#include <doctest.h>

#include <cmath>

#include "nathist/sampler.hpp"
#include "nathist/simulate.hpp"
#include "nathist/stats.hpp"
#include "support.hpp"

using namespace nathist;
using namespace nathist::mcmc;

namespace nathist::mcmc {
struct SamplerTestAccess {
  static double rate_log_ratio(const Sampler& s, bool progression,
                               double cand) {
    std::vector<double> scratch;
    return s.rate_update_log_ratio(progression, cand, scratch);
  }
};
}  // namespace nathist::mcmc

namespace {

const double kT0 = 30.0;

Params paper_truth() {
  return {WeibullRS(6.5e-5, 2.0), WeibullRS(3.14e-2, 2.0), 0.1, 0.85};
}

PriorSpec default_prior() {
  PriorSpec p;
  p.t0 = kT0;
  return p;
}

Cohort toy_cohort(int n, std::uint64_t seed) {
  sim::SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  return sim::simulate_cohort(paper_truth(), cfg).cohort;
}

// brute-force complete-data posterior factor (with truncation) at given psi
double joint_at_psi(const Sampler& s, const PriorSpec& prior, double psi,
                    const std::vector<std::uint8_t>& zi) {
  const Cohort& cohort = s.cohort();
  const Params base = s.params();
  const Params p(base.onset, base.progression, psi, base.beta);
  double v = stats::beta_logpdf(psi, prior.a_psi, prior.b_psi);
  for (int i = 0; i < cohort.size(); ++i) {
    LatentState z = s.latent(i);
    z.indolent = zi[i] != 0;
    v += complete_logdensity(cohort.records[i], z, p, kT0);
    v -= truncation_log_normalizer(cohort.records[i].entry_age(), p, kT0);
  }
  return v;
}

// log proposal mass of a z_i vector under the exact conditional at psi
double zi_proposal_logmass(const Sampler& s, double psi,
                           const std::vector<std::uint8_t>& zi) {
  const Cohort& cohort = s.cohort();
  const Params base = s.params();
  const Params p(base.onset, base.progression, psi, base.beta);
  double v = 0.0;
  for (int i = 0; i < cohort.size(); ++i) {
    if (cohort.records[i].group == Group::IntervalDetected) continue;
    const double q =
        indolence_conditional(cohort.records[i], s.latent(i), psi, p);
    v += zi[i] ? std::log(q) : std::log1p(-q);
  }
  return v;
}

}  // namespace

TEST_CASE("adaptive step size behavior") {
  SUBCASE("acceptance at target leaves epsilon drifting to one") {
    AdaptState s{std::log(0.25), 0.0};
    double eps = 0.0;
    for (int m = 1; m <= 4000; ++m) eps = adapt_step_size(s, 0.44, m, 0.44);
    CHECK(s.h_sum == doctest::Approx(0.0));
    CHECK(eps == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("all rejections shrink epsilon monotonically") {
    AdaptState s{0.0, 0.0};  // eps = 1
    double prev = 1.0;
    for (int m = 1; m <= 200; ++m) {
      const double eps = adapt_step_size(s, 0.0, m, 0.44);
      if (m >= 2) CHECK(eps < prev);
      prev = eps;
    }
    CHECK(prev < 1e-3);
  }
}

TEST_CASE("reflected proposals stay in range and are symmetric") {
  Rng rng(5, Stream::Generic);
  for (int i = 0; i < 1000; ++i) {
    const double p = propose_psi(rng, 0.99, 0.25);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  // eps -> 0 keeps the value
  CHECK(propose_psi(rng, 0.4, 1e-20) == doctest::Approx(0.4).epsilon(1e-8));

  // folded-normal transition density is symmetric: q(a|b) = q(b|a)
  auto folded = [](double from, double to, double sd) {
    double q = 0.0;
    for (int k = -30; k <= 30; ++k) {
      auto phi = [&](double x) {
        return std::exp(-0.5 * x * x / (sd * sd)) /
               (sd * std::sqrt(2.0 * M_PI));
      };
      q += phi(to + 2.0 * k - from) + phi(-to + 2.0 * k - from);
    }
    return q;
  };
  for (auto [a, b] : std::vector<std::pair<double, double>>{
           {0.1, 0.7}, {0.02, 0.95}, {0.5, 0.55}})
    CHECK(folded(a, b, 0.3) == doctest::Approx(folded(b, a, 0.3)));

  // reflected-at-zero rate proposal: q(a|b) = phi(a-b) + phi(a+b)
  auto rate_q = [](double from, double to, double sd) {
    auto phi = [&](double x) {
      return std::exp(-0.5 * x * x / (sd * sd)) /
             (sd * std::sqrt(2.0 * M_PI));
    };
    return phi(to - from) + phi(to + from);
  };
  CHECK(rate_q(0.3, 1.1, 0.5) == doctest::Approx(rate_q(1.1, 0.3, 0.5)));
}

TEST_CASE("indolence conditional") {
  const auto rec = classify("1", {40, 45}, {0, 0}, {46.5, 46.5});
  const Params p = paper_truth();
  CHECK(indolence_conditional(rec, {42.0, false}, 0.0, p) == 0.0);
  CHECK(indolence_conditional(rec, {INFINITY, false}, 0.3, p) == 0.3);
  const auto iv = classify("3", {40, 45}, {0, 0}, {46.0, std::nullopt});
  CHECK(indolence_conditional(iv, {42.0, false}, 0.3, p) == 0.0);
  // psi = 0.1, S_prog = 0.5 -> 0.1818...
  const double soj = rec.censor_age - 42.0;
  const double rate = -std::log(0.5) / (soj * soj);
  const Params phalf(p.onset, WeibullRS(rate, 2.0), 0.1, p.beta);
  CHECK(indolence_conditional(rec, {42.0, false}, 0.1, phalf) ==
        doctest::Approx(0.1 / (0.1 + 0.9 * 0.5)).epsilon(1e-12));
}

TEST_CASE("gibbs beta draws follow the conjugate posterior") {
  PriorSpec prior = default_prior();

  SUBCASE("no information reproduces the prior") {
    prior.a_beta = 2.0;
    prior.b_beta = 3.0;
    std::vector<IndividualRecord> recs{
        classify("1", {40, 45}, {0, 0}, {46.5, 46.5})};
    const auto cohort = Cohort::build(kT0, std::move(recs));
    std::vector<LatentState> latents{{INFINITY, false}};
    Rng rng(6, Stream::Generic);
    std::vector<double> draws(30000);
    for (auto& d : draws)
      d = gibbs_beta_draw(rng, cohort, latents, prior);
    struct Ctx {
      double a, b;
    } ctx{2.0, 3.0};
    const auto ks = stats::ks_test(
        draws,
        [](double x, void* c) {
          auto* q = static_cast<Ctx*>(c);
          return stats::beta_cdf(x, q->a, q->b);
        },
        &ctx);
    CHECK(ks.p_value > 0.01);
  }

  SUBCASE("m+ = 10, m- = 3 against Be(11, 4)") {
    prior.a_beta = 1.0;
    prior.b_beta = 1.0;
    std::vector<IndividualRecord> recs;
    std::vector<LatentState> latents;
    for (int i = 0; i < 10; ++i) {
      recs.push_back(classify(std::to_string(i), {40, 45}, {0, 1},
                              {45.0, 45.0}));
      latents.push_back({i < 3 ? 39.5 : 42.0, false});
    }
    const auto cohort = Cohort::build(kT0, std::move(recs));
    Rng rng(7, Stream::Generic);
    std::vector<double> draws(100000);
    for (auto& d : draws)
      d = gibbs_beta_draw(rng, cohort, latents, prior);
    struct Ctx {
      double a, b;
    } ctx{11.0, 4.0};
    const auto ks = stats::ks_test(
        draws,
        [](double x, void* c) {
          auto* q = static_cast<Ctx*>(c);
          return stats::beta_cdf(x, q->a, q->b);
        },
        &ctx);
    CHECK(ks.p_value > 0.01);
  }

  SUBCASE("no onset means no false negatives regardless of screens") {
    std::vector<IndividualRecord> recs{
        classify("1", {40, 41, 42, 43, 44}, {0, 0, 0, 0, 0}, {45.0, 45.0})};
    const auto cohort = Cohort::build(kT0, std::move(recs));
    const auto c = screen_counts(cohort.records[0], {INFINITY, false});
    CHECK(c.m_plus == 0);
    CHECK(c.m_minus == 0);
  }
}

TEST_CASE("onset update: indolent cases accept with log-ratio exactly zero") {
  const auto cohort = toy_cohort(120, 21);
  Sampler s(cohort, default_prior(), 77);
  s.init_latents(paper_truth());
  int checked = 0;
  for (std::uint32_t sweep = 1; sweep <= 30; ++sweep) {
    for (int i = 0; i < cohort.size(); ++i) {
      const bool indolent = s.latent(i).indolent;
      const auto res = s.mh_update_zhp(i, sweep);
      if (indolent && cohort.records[i].group != Group::IntervalDetected) {
        CHECK(res.log_ratio == 0.0);
        CHECK(res.accepted);
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("onset update ratio equals the public-operation route") {
  const auto cohort = toy_cohort(60, 22);
  const PriorSpec prior = default_prior();
  Sampler s(cohort, prior, 91);
  s.init_latents(paper_truth());
  const Params p = s.params();
  int compared = 0;
  for (std::uint32_t sweep = 1; sweep <= 10; ++sweep) {
    for (int i = 0; i < cohort.size(); ++i) {
      const LatentState before = s.latent(i);
      const auto prop = build_zhp_proposal(cohort.records[i], p, kT0,
                                           p.onset.shape);
      const auto res = s.mh_update_zhp(i, sweep);
      // reconstruct the same candidate draw from the same stream
      Rng rng(91, Stream::Zhp, sweep, static_cast<std::uint32_t>(i));
      const double cand = sample_zhp_proposal(rng, prop);
      REQUIRE(cand == res.candidate);
      LatentState zc = before;
      zc.onset_age = cand;
      const double lhs =
          complete_logdensity(cohort.records[i], zc, p, kT0) -
          zhp_proposal_logdensity(cand, prop);
      const double rhs =
          complete_logdensity(cohort.records[i], before, p, kT0) -
          zhp_proposal_logdensity(before.onset_age, prop);
      const double want = lhs - rhs;
      if (std::isfinite(want)) {
        CHECK(res.log_ratio == doctest::Approx(want).epsilon(1e-10));
        ++compared;
      }
      // restore for a clean comparison next sweep
      auto st = s.state();
      st.latents[i] = before;
      s.set_state(st);
    }
  }
  CHECK(compared > 300);
}

TEST_CASE("rate update ratio equals full-target recomputation") {
  const auto cohort = toy_cohort(40, 23);
  const PriorSpec prior = default_prior();
  Sampler s(cohort, prior, 17);
  s.init_latents(paper_truth());
  const Params p = s.params();

  auto full_target = [&](const Params& q) {
    double v = log_prior(q, prior);
    for (int i = 0; i < cohort.size(); ++i) {
      v += complete_logdensity(cohort.records[i], s.latent(i), q, kT0);
      v -= truncation_log_normalizer(cohort.records[i].entry_age(), q, kT0);
    }
    return v;
  };

  for (double factor : {0.7, 1.3}) {
    const double cand_h = p.onset.rate * factor;
    const Params qh(WeibullRS(cand_h, p.onset.shape), p.progression, p.psi,
                    p.beta);
    CHECK(SamplerTestAccess::rate_log_ratio(s, false, cand_h) ==
          doctest::Approx(full_target(qh) - full_target(p)).epsilon(1e-10));

    const double cand_p = p.progression.rate * factor;
    const Params qp(p.onset, WeibullRS(cand_p, p.progression.shape), p.psi,
                    p.beta);
    CHECK(SamplerTestAccess::rate_log_ratio(s, true, cand_p) ==
          doctest::Approx(full_target(qp) - full_target(p)).epsilon(1e-10));
  }
}

TEST_CASE("block update ratio equals the brute-force joint ratio") {
  const auto cohort = toy_cohort(10, 24);
  PriorSpec prior = default_prior();
  prior.a_psi = 2.0;
  prior.b_psi = 5.0;
  Sampler s(cohort, prior, 33);
  s.init_latents(paper_truth());

  std::vector<std::uint8_t> zi_cur(cohort.size());
  for (int i = 0; i < cohort.size(); ++i)
    zi_cur[i] = s.latent(i).indolent ? 1 : 0;

  for (std::uint32_t sweep = 1; sweep <= 25; ++sweep) {
    const auto prop = s.propose_block(sweep);
    const double psi = s.params().psi;
    const double brute =
        joint_at_psi(s, prior, prop.psi_star, prop.zi_star) -
        joint_at_psi(s, prior, psi, zi_cur) +
        zi_proposal_logmass(s, psi, zi_cur) -
        zi_proposal_logmass(s, prop.psi_star, prop.zi_star);
    CHECK(prop.log_ratio == doctest::Approx(brute).epsilon(1e-9));
  }
}

TEST_CASE("psi step of size zero is always accepted") {
  const auto cohort = toy_cohort(20, 25);
  Sampler s(cohort, default_prior(), 41);
  s.init_latents(paper_truth());
  ChainConfig cfg;
  cfg.iterations = 2;
  cfg.warmup = 1;
  cfg.eps_psi = 1e-30;  // psi* == psi to machine precision
  auto st = s.state();
  st.adapt_psi.log_eps = std::log(1e-30);
  s.set_state(st);
  const double aprob = s.block_update_psi_zi(1);
  CHECK(aprob == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("interval-only cohort: block ratio reduces analytically") {
  std::vector<IndividualRecord> recs;
  for (int i = 0; i < 6; ++i)
    recs.push_back(classify(std::to_string(i), {40.0 + i}, {0},
                            {44.0 + i, std::nullopt}));
  const auto cohort = Cohort::build(kT0, std::move(recs));
  PriorSpec prior = default_prior();
  Sampler s(cohort, prior, 55);
  s.init_latents(paper_truth());
  const Params p = s.params();
  for (std::uint32_t sweep = 1; sweep <= 10; ++sweep) {
    const auto prop = s.propose_block(sweep);
    double want = stats::beta_logpdf(prop.psi_star, prior.a_psi,
                                     prior.b_psi) -
                  stats::beta_logpdf(p.psi, prior.a_psi, prior.b_psi) +
                  6.0 * (std::log1p(-prop.psi_star) - std::log1p(-p.psi));
    for (int i = 0; i < cohort.size(); ++i) {
      const Params pc(p.onset, p.progression, p.psi, p.beta);
      const Params pn(p.onset, p.progression, prop.psi_star, p.beta);
      want += truncation_log_normalizer(cohort.records[i].entry_age(), pc,
                                        kT0) -
              truncation_log_normalizer(cohort.records[i].entry_age(), pn,
                                        kT0);
    }
    CHECK(prop.log_ratio == doctest::Approx(want).epsilon(1e-9));
    for (auto z : prop.zi_star) CHECK(z == 0);
  }
}

TEST_CASE("initial latents are admissible") {
  const auto cohort = toy_cohort(300, 26);
  Sampler s(cohort, default_prior(), 3);
  s.init_latents(paper_truth());
  for (int i = 0; i < cohort.size(); ++i) {
    const auto z = s.latent(i);
    const auto& rec = cohort.records[i];
    if (rec.group == Group::IntervalDetected) {
      CHECK(!z.indolent);
      CHECK(z.has_onset());
    }
    if (rec.group == Group::ScreenDetected) CHECK(z.has_onset());
    CHECK(std::isfinite(individual_log_target(rec, z, s.params(), kT0)));
  }
}

TEST_CASE("perfect sensitivity confines initial onsets past the last "
          "negative screen") {
  std::vector<IndividualRecord> recs;
  for (int i = 0; i < 50; ++i)
    recs.push_back(classify(std::to_string(i), {40, 43, 46}, {0, 0, 0},
                            {48.0, 48.0}));
  const auto cohort = Cohort::build(kT0, std::move(recs));
  Sampler s(cohort, default_prior(), 5);
  s.init_latents(
      Params(WeibullRS(6.5e-5, 2.0), WeibullRS(3.14e-2, 2.0), 0.1, 1.0));
  for (int i = 0; i < cohort.size(); ++i) {
    const auto z = s.latent(i);
    if (z.has_onset()) CHECK(z.onset_age > 46.0);
  }
}

TEST_CASE("single stored draw when iterations = warmup + 1") {
  const auto cohort = toy_cohort(15, 27);
  ChainConfig cfg;
  cfg.iterations = 6;
  cfg.warmup = 5;
  cfg.thin = 1;
  const auto store =
      run_chain(11, cohort, default_prior(), paper_truth(), cfg);
  CHECK(store.size() == 1);
}

TEST_CASE("same seed gives bit-identical draws; resume matches straight run") {
  const auto cohort = toy_cohort(40, 28);
  const PriorSpec prior = default_prior();
  ChainConfig cfg;
  cfg.iterations = 120;
  cfg.warmup = 40;
  cfg.thin = 2;
  cfg.refresh_every = 16;

  const auto a = run_chain(123, cohort, prior, paper_truth(), cfg);
  const auto b = run_chain(123, cohort, prior, paper_truth(), cfg);
  CHECK(a.lambda_h == b.lambda_h);
  CHECK(a.lambda_prog == b.lambda_prog);
  CHECK(a.psi == b.psi);
  CHECK(a.beta == b.beta);

  // split run with a state handoff
  Sampler s1(cohort, prior, 123);
  s1.init_latents(paper_truth());
  ChainConfig half = cfg;
  half.iterations = 60;
  const auto first = s1.run(half);
  const auto snapshot = s1.state();

  Sampler s2(cohort, prior, 123);
  s2.set_state(snapshot);
  const auto second = s2.run(cfg);  // continues sweeps 61..120

  std::vector<double> glued = first.beta;
  glued.insert(glued.end(), second.beta.begin(), second.beta.end());
  CHECK(glued == a.beta);
}

TEST_CASE("frozen-parameter latent chain matches the analytic onset law") {
  // light version of the long-run conditional check: censored fixture
  const auto rec = classify("1", {40, 45}, {0, 0}, {46.5, 46.5});
  std::vector<IndividualRecord> recs{rec};
  const auto cohort = Cohort::build(kT0, std::move(recs));
  const Params p = paper_truth();
  Sampler s(cohort, default_prior(), 71);
  s.init_latents(p);

  const int sweeps = 20000;
  // bins: atom, (t0,40], (40,45], (45,46.5] each split in 3
  const std::vector<double> edges{kT0, 40.0, 45.0, 46.5};
  std::vector<double> observed(10, 0.0);
  for (int m = 1; m <= sweeps; ++m) {
    s.frozen_latent_sweep(static_cast<std::uint32_t>(m));
    const auto z = s.latent(0);
    if (!z.has_onset()) {
      observed[0] += 1;
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      const double lo = edges[k], hi = edges[k + 1];
      if (z.onset_age <= hi) {
        const int sub = std::min(
            2, static_cast<int>((z.onset_age - lo) / ((hi - lo) / 3.0)));
        observed[1 + 3 * k + sub] += 1;
        break;
      }
    }
  }
  // analytic z_hp marginal: atom S_H(c-t0); density
  // f_H(z-t0) (1-b)^{m(z)} [psi + (1-psi) S_prog(c-z)]
  std::vector<double> expected(10, 0.0);
  expected[0] = weibull_surv(16.5, p.onset);
  double total = expected[0];
  for (int k = 0; k < 3; ++k) {
    for (int sub = 0; sub < 3; ++sub) {
      const double lo = edges[k] + (edges[k + 1] - edges[k]) * sub / 3.0;
      const double hi = edges[k] + (edges[k + 1] - edges[k]) * (sub + 1) / 3.0;
      const int miss = 2 - k;
      expected[1 + 3 * k + sub] = testsup::integrate(
          [&](double z) {
            return std::exp(weibull_logpdf(z - kT0, p.onset)) *
                   std::pow(1.0 - p.beta, miss) *
                   (p.psi + (1.0 - p.psi) *
                                weibull_surv(rec.censor_age - z,
                                             p.progression));
          },
          lo + 1e-12, hi, 1e-12);
      total += expected[1 + 3 * k + sub];
    }
  }
  for (auto& e : expected) e /= total;
  const auto gof = stats::chi_square_gof(observed, expected);
  CHECK(gof.p_value > 0.001);
}
