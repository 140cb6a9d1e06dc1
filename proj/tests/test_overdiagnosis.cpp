#include <doctest.h>

#include <cmath>

#include "nathist/overdiagnosis.hpp"

using namespace nathist;
using namespace nathist::odx;

namespace {
const double kT0 = 30.0;

mcmc::DrawStore store_of(double lh, double ah, double lp, double ap,
                         double psi, double beta, int m) {
  mcmc::DrawStore st;
  st.t0 = kT0;
  st.shape_h = ah;
  st.shape_prog = ap;
  for (int i = 0; i < m; ++i) {
    st.lambda_h.push_back(lh);
    st.lambda_prog.push_back(lp);
    st.psi.push_back(psi);
    st.beta.push_back(beta);
  }
  return st;
}

LifeTable flat_survival_until(double cliff) {
  // everyone survives to `cliff`, then dies within half a year
  return LifeTable::from_survival({0.0, cliff, cliff + 0.5, 110.0},
                                  {1.0, 1.0, 0.0, 0.0});
}
}  // namespace

TEST_CASE("life table construction and validation") {
  CHECK_THROWS_AS(LifeTable::from_survival({0, 50}, {0.9, 0.5}),
                  validation_error);
  CHECK_THROWS_AS(LifeTable::from_survival({0, 50, 40}, {1.0, 0.9, 0.5}),
                  validation_error);
  CHECK_THROWS_AS(LifeTable::from_survival({0, 50}, {1.0, 1.1}),
                  validation_error);

  const auto lt = LifeTable::from_survival({0, 50, 100}, {1.0, 0.8, 0.0});
  CHECK(lt.survival_at(25.0) == doctest::Approx(0.9));
  CHECK(lt.survival_at(100.0) == 0.0);
  CHECK(lt.inverse_survival(0.9) == doctest::Approx(25.0));
  CHECK(lt.inverse_survival(0.4) == doctest::Approx(75.0));

  // piecewise-constant hazard integrates to the same survival when matched
  const double h = 0.02;
  const auto from_h = LifeTable::from_hazard({0, 50, 100}, {h, h, h});
  CHECK(from_h.survival_at(50.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(from_h.survival_at(100.0) == doctest::Approx(std::exp(-2.0)));

  const auto short_table = LifeTable::from_survival({0, 80}, {1.0, 0.5});
  CHECK_THROWS_AS(short_table.validate_covers(50.0), validation_error);
}

TEST_CASE("program spec") {
  const auto p = ProgramSpec::regular(50, 74, 2);
  CHECK(p.screen_ages.size() == 13);
  CHECK(p.screen_ages.front() == 50.0);
  CHECK(p.screen_ages.back() == 74.0);
}

TEST_CASE("all-indolent posterior: rate exactly one, all from indolence") {
  const auto st = store_of(6.5e-5, 2.0, 3.14e-2, 2.0, 1.0, 0.85, 10);
  const auto life = LifeTable::from_survival({0, 60, 100}, {1.0, 0.9, 0.0});
  const auto res = odx::overdiagnosis_rate({&st, 1},
                                           ProgramSpec::regular(50, 74, 2),
                                           life, 4000, 1, kT0);
  for (const auto& d : res.draws) {
    CHECK(d.detected > 0);
    CHECK(d.total == 1.0);
    CHECK(d.indolent == 1.0);
    CHECK(d.mortality == 0.0);
  }
}

TEST_CASE("no mortality and no indolence: rate exactly zero") {
  const auto st = store_of(6.5e-5, 2.0, 3.14e-2, 2.0, 0.0, 0.85, 5);
  const auto life =
      LifeTable::from_survival({0.0, 100.0, 101.0}, {1.0, 1.0, 1.0});
  const auto res = odx::overdiagnosis_rate({&st, 1},
                                           ProgramSpec::regular(50, 74, 2),
                                           life, 4000, 1, kT0);
  for (const auto& d : res.draws) {
    CHECK(d.total == 0.0);
  }
}

TEST_CASE("death at the detection age makes every detection overdiagnosed") {
  // single screen at 50; deaths just after 50; sojourns ~ 1e4 years
  const auto st = store_of(5e-3, 2.0, 1e-8, 2.0, 0.0, 1.0, 8);
  const auto life = flat_survival_until(50.0);
  ProgramSpec program;
  program.screen_ages = {50.0};
  const auto res =
      odx::overdiagnosis_rate({&st, 1}, program, life, 3000, 2, kT0);
  for (const auto& d : res.draws) {
    CHECK(d.detected > 0);
    CHECK(d.total == 1.0);
    CHECK(d.mortality == 1.0);
  }
}

TEST_CASE("per-draw identity total = indolence + mortality") {
  const auto st = store_of(6.5e-5, 2.0, 3.14e-2, 2.0, 0.1, 0.85, 50);
  const auto life = LifeTable::from_survival(
      {0.0, 40.0, 60.0, 80.0, 100.0}, {1.0, 0.98, 0.9, 0.6, 0.0});
  const auto res = odx::overdiagnosis_rate({&st, 1},
                                           ProgramSpec::regular(50, 74, 2),
                                           life, 2000, 3, kT0);
  for (const auto& d : res.draws)
    CHECK(d.total == d.indolent + d.mortality);
}

TEST_CASE("memoryless sojourn toy matches the analytic overdiagnosis rate") {
  // exponential sojourn: P(overdx | detected at s) = exp(-lambda (A - s))
  const double lambda = 0.2, s = 50.0, cliff = 60.0;
  const auto st = store_of(5e-3, 2.0, lambda, 1.0, 0.0, 1.0, 1);
  const auto life = flat_survival_until(cliff);
  ProgramSpec program;
  program.screen_ages = {s};
  const int sims = 200000;
  const auto res =
      odx::overdiagnosis_rate({&st, 1}, program, life, sims, 4, kT0);
  const auto& d = res.draws[0];
  // deaths land in (60, 60.5): compare against the midpoint value
  const double want = (std::exp(-lambda * (cliff - s)) +
                       std::exp(-lambda * (cliff + 0.5 - s))) /
                      2.0;
  const double se =
      std::sqrt(want * (1.0 - want) / static_cast<double>(d.detected));
  CHECK(d.indolent == 0.0);
  CHECK(std::abs(d.mortality - want) < 3.5 * se);
}

TEST_CASE("rate is monotone in psi under common random numbers") {
  const auto life = LifeTable::from_survival(
      {0.0, 40.0, 60.0, 80.0, 100.0}, {1.0, 0.98, 0.9, 0.6, 0.0});
  const auto program = ProgramSpec::regular(50, 74, 2);
  double prev = -1.0;
  for (double psi : {0.0, 0.1, 0.3, 0.6, 0.9}) {
    const auto st = store_of(6.5e-5, 2.0, 3.14e-2, 2.0, psi, 0.85, 1);
    const auto res =
        odx::overdiagnosis_rate({&st, 1}, program, life, 4000, 5, kT0);
    CHECK(res.draws[0].total >= prev);
    prev = res.draws[0].total;
  }
}

