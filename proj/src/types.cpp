#include "nathist/types.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace nathist {

IndividualRecord classify(std::string id, std::vector<double> screen_ages,
                          std::vector<std::uint8_t> screen_results,
                          const RawEndpoint& endpoint) {
  auto fail = [&](const std::string& what) {
    throw validation_error("record '" + id + "': " + what);
  };

  if (screen_ages.empty()) fail("no screens; entry age undefined");
  if (screen_ages.size() != screen_results.size())
    fail("screen age/result length mismatch");

  for (std::size_t j = 0; j + 1 < screen_ages.size(); ++j)
    if (!(screen_ages[j] < screen_ages[j + 1]))
      fail("screen ages not strictly increasing");

  int n_positive = 0;
  for (std::size_t j = 0; j < screen_results.size(); ++j) {
    if (screen_results[j] > 1) fail("screen result must be 0 or 1");
    if (screen_results[j] == 1) {
      ++n_positive;
      if (j + 1 != screen_results.size()) fail("positive screen is not last");
    }
  }
  if (n_positive > 1) fail("more than one positive screen");

  const double last_screen = screen_ages.back();
  const double t_pc = endpoint.t_pc;

  IndividualRecord rec;
  rec.id = std::move(id);
  rec.screen_ages = std::move(screen_ages);
  rec.screen_results = std::move(screen_results);
  rec.t_pc = t_pc;

  if (n_positive == 1) {
    // Screen-detected: diagnosis at the positive screen ends observation.
    if (t_pc != last_screen)
      fail("screen-detected record must have t_pc equal to the positive "
           "screen age");
    if (endpoint.censor_age && *endpoint.censor_age != t_pc)
      fail("screen-detected record must have censor age equal to t_pc");
    rec.censor_age = t_pc;
    rec.group = Group::ScreenDetected;
    return rec;
  }

  if (!endpoint.censor_age) {
    // Observed clinical diagnosis.
    if (!(t_pc > last_screen))
      fail("clinical diagnosis age at or before last screen without a "
           "positive screen");
    rec.censor_age = t_pc;
    rec.group = Group::IntervalDetected;
    return rec;
  }

  const double censor = *endpoint.censor_age;
  if (t_pc > censor) fail("t_pc exceeds censoring age");
  if (t_pc < censor) {
    // Clinical event strictly before administrative censoring.
    if (!(t_pc > last_screen))
      fail("clinical diagnosis age at or before last screen without a "
           "positive screen");
    rec.censor_age = t_pc;
    rec.group = Group::IntervalDetected;
    return rec;
  }
  if (t_pc < last_screen)
    fail("t_pc before last screen age without a positive screen");
  rec.censor_age = censor;
  rec.group = Group::Censored;
  return rec;
}

Cohort Cohort::build(double t0, std::vector<IndividualRecord> records) {
  Cohort c;
  c.t0 = t0;
  c.records = std::move(records);

  std::map<double, int> distinct;
  for (const auto& r : c.records) {
    if (!(r.entry_age() > t0))
      throw validation_error("record '" + r.id +
                             "': entry age must exceed t0");
    distinct[r.entry_age()] += 1;
  }
  c.entry_ages.reserve(distinct.size());
  c.entry_count.reserve(distinct.size());
  for (const auto& [age, count] : distinct) {
    c.entry_ages.push_back(age);
    c.entry_count.push_back(count);
  }
  c.entry_index.resize(c.records.size());
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto it = std::lower_bound(c.entry_ages.begin(), c.entry_ages.end(),
                                     c.records[i].entry_age());
    c.entry_index[i] = static_cast<int>(it - c.entry_ages.begin());
  }
  return c;
}

}  // namespace nathist
