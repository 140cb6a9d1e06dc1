#include <doctest.h>

#include "nathist/types.hpp"

using namespace nathist;

namespace {
IndividualRecord fig3(int who) {
  // the three-person illustration: censored, screen-detected, interval
  switch (who) {
    case 1:
      return classify("1", {40, 45}, {0, 0}, {46.5, 46.5});
    case 2:
      return classify("2", {40, 45}, {0, 1}, {45.0, 45.0});
    default:
      return classify("3", {40, 45}, {0, 0}, {46.0, std::nullopt});
  }
}
}  // namespace

TEST_CASE("three-group classification") {
  CHECK(fig3(1).group == Group::Censored);
  CHECK(fig3(1).censor_age == 46.5);
  CHECK(fig3(2).group == Group::ScreenDetected);
  CHECK(fig3(2).censor_age == 45.0);
  CHECK(fig3(3).group == Group::IntervalDetected);
  CHECK(fig3(3).censor_age == 46.0);  // observation ends at diagnosis
}

TEST_CASE("interval detection with explicit later censoring age") {
  const auto r = classify("x", {40, 45}, {0, 0}, {46.0, 50.0});
  CHECK(r.group == Group::IntervalDetected);
  CHECK(r.censor_age == 46.0);
}

TEST_CASE("classification validation errors name the record") {
  // positive screen not last
  CHECK_THROWS_WITH_AS(classify("p7", {40, 45}, {1, 0}, {45.0, 45.0}),
                       doctest::Contains("p7"), validation_error);
  // non-increasing ages
  CHECK_THROWS_AS(classify("x", {45, 40}, {0, 0}, {46.0, 46.0}),
                  validation_error);
  CHECK_THROWS_AS(classify("x", {40, 40}, {0, 0}, {46.0, 46.0}),
                  validation_error);
  // t_pc before last screen without a positive screen
  CHECK_THROWS_AS(classify("x", {40, 45}, {0, 0}, {44.0, 44.0}),
                  validation_error);
  // screen-detected must end observation at the positive screen
  CHECK_THROWS_AS(classify("x", {40, 45}, {0, 1}, {46.0, 46.0}),
                  validation_error);
  // no screens: entry age undefined
  CHECK_THROWS_AS(classify("x", {}, {}, {46.0, 46.0}), validation_error);
  // two positive screens
  CHECK_THROWS_AS(classify("x", {40, 45}, {1, 1}, {45.0, 45.0}),
                  validation_error);
  // t_pc beyond censoring
  CHECK_THROWS_AS(classify("x", {40}, {0}, {47.0, 46.0}), validation_error);
}

TEST_CASE("censored at the last screen is allowed") {
  const auto r = classify("x", {40, 45}, {0, 0}, {45.0, 45.0});
  CHECK(r.group == Group::Censored);
}

TEST_CASE("cohort entry-age table") {
  std::vector<IndividualRecord> recs;
  recs.push_back(classify("a", {40, 42}, {0, 0}, {43.0, 43.0}));
  recs.push_back(classify("b", {45}, {0}, {46.0, 46.0}));
  recs.push_back(classify("c", {40}, {0}, {41.0, 41.0}));
  const auto cohort = Cohort::build(30.0, std::move(recs));
  CHECK(cohort.entry_ages == std::vector<double>{40.0, 45.0});
  CHECK(cohort.entry_count == std::vector<int>{2, 1});
  CHECK(cohort.entry_index == std::vector<int>{0, 1, 0});

  std::vector<IndividualRecord> bad;
  bad.push_back(classify("d", {40}, {0}, {41.0, 41.0}));
  CHECK_THROWS_AS(Cohort::build(40.0, std::move(bad)), validation_error);
}

TEST_CASE("params and prior validation") {
  CHECK_THROWS_AS(Params(WeibullRS(1, 1), WeibullRS(1, 1), -0.1, 0.5),
                  std::domain_error);
  CHECK_THROWS_AS(Params(WeibullRS(1, 1), WeibullRS(1, 1), 0.5, 1.1),
                  std::domain_error);
  CHECK_THROWS_AS(WeibullRS(0.0, 1.0), std::domain_error);
  PriorSpec p;
  p.b_h = 0.0;
  CHECK_THROWS_AS(p.validate(), std::domain_error);
}
