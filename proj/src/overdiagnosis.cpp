#include "nathist/overdiagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nathist::odx {

namespace {
void check_grid(const std::vector<double>& age,
                const std::vector<double>& col, const char* what) {
  if (age.size() != col.size() || age.size() < 2)
    throw validation_error(std::string("life table: ") + what +
                           " column must match the age grid (>= 2 rows)");
  for (std::size_t i = 0; i + 1 < age.size(); ++i)
    if (!(age[i] < age[i + 1]))
      throw validation_error("life table: ages must be strictly increasing");
}
}  // namespace

LifeTable LifeTable::from_survival(std::vector<double> age,
                                   std::vector<double> survival) {
  check_grid(age, survival, "survival");
  if (std::abs(survival.front() - 1.0) > 1e-9)
    throw validation_error("life table: survival must start at 1");
  for (std::size_t i = 0; i < survival.size(); ++i) {
    if (!(survival[i] >= 0.0 && survival[i] <= 1.0))
      throw validation_error("life table: survival must lie in [0,1]");
    if (i > 0 && survival[i] > survival[i - 1] + 1e-12)
      throw validation_error("life table: survival must be non-increasing");
  }
  return {std::move(age), std::move(survival)};
}

LifeTable LifeTable::from_hazard(std::vector<double> age,
                                 std::vector<double> hazard) {
  check_grid(age, hazard, "hazard");
  std::vector<double> surv(age.size());
  surv[0] = 1.0;
  for (std::size_t i = 0; i + 1 < age.size(); ++i) {
    if (!(hazard[i] >= 0.0))
      throw validation_error("life table: hazard must be >= 0");
    surv[i + 1] = surv[i] * std::exp(-hazard[i] * (age[i + 1] - age[i]));
  }
  return {std::move(age), std::move(surv)};
}

double LifeTable::survival_at(double a) const {
  if (a <= age.front()) return survival.front();
  if (a >= age.back()) return survival.back();
  const auto it = std::upper_bound(age.begin(), age.end(), a);
  const std::size_t k = static_cast<std::size_t>(it - age.begin()) - 1;
  const double w = (a - age[k]) / (age[k + 1] - age[k]);
  return survival[k] + w * (survival[k + 1] - survival[k]);
}

double LifeTable::inverse_survival(double u) const {
  if (u >= survival.front()) return age.front();
  if (u <= survival.back()) return age.back();
  // find the segment with survival[k] >= u >= survival[k+1]
  std::size_t lo = 0, hi = survival.size() - 1;
  while (lo + 1 < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (survival[mid] >= u)
      lo = mid;
    else
      hi = mid;
  }
  const double s0 = survival[lo], s1 = survival[hi];
  if (s0 <= s1) return age[hi];  // flat segment
  const double w = (s0 - u) / (s0 - s1);
  return age[lo] + w * (age[hi] - age[lo]);
}

void LifeTable::validate_covers(double first_program_age) const {
  if (age.front() > first_program_age || age.back() < 100.0)
    throw validation_error(
        "life table must cover the program ages through age 100");
}

ProgramSpec ProgramSpec::regular(double first, double last, double step) {
  if (!(step > 0.0) || !(first <= last))
    throw std::invalid_argument("program spec requires first <= last, step > 0");
  ProgramSpec p;
  for (double a = first; a <= last + 1e-9; a += step) p.screen_ages.push_back(a);
  return p;
}

OverdxResult overdiagnosis_rate(std::span<const mcmc::DrawStore> stores,
                                const ProgramSpec& program,
                                const LifeTable& life, int sims_per_draw,
                                std::uint64_t seed, double t0) {
  if (stores.empty() || stores.front().size() == 0)
    throw std::invalid_argument("overdiagnosis_rate: empty draw store");
  if (program.screen_ages.empty())
    throw std::invalid_argument("overdiagnosis_rate: empty screening program");
  for (std::size_t k = 0; k + 1 < program.screen_ages.size(); ++k)
    if (!(program.screen_ages[k] < program.screen_ages[k + 1]))
      throw std::invalid_argument("program ages must be strictly increasing");
  life.validate_covers(program.screen_ages.front());

  const double shape_h = stores.front().shape_h;
  const double shape_prog = stores.front().shape_prog;

  OverdxResult out;
  out.sims_per_draw = sims_per_draw;
  for (const auto& st : stores) {
    for (std::size_t m = 0; m < st.size(); ++m) {
      const WeibullRS onset(st.lambda_h[m], shape_h);
      const WeibullRS prog(st.lambda_prog[m], shape_prog);
      const double psi = st.psi[m];
      const double beta = st.beta[m];

      long detected = 0, over_indolent = 0, over_mortality = 0;
      for (int j = 0; j < sims_per_draw; ++j) {
        // common random numbers: woman j's stream is independent of the draw
        Rng rng(seed, Stream::Overdx, 0, static_cast<std::uint32_t>(j));
        const double tau_hp = t0 + weibull_inv_cdf(rng.uniform(), onset);
        const bool indolent = rng.uniform() < psi;
        const double sojourn = weibull_inv_cdf(rng.uniform(), prog);
        const double tau_pc = indolent ? INFINITY : tau_hp + sojourn;
        const double death = life.sample_death_age(rng);

        for (double t : program.screen_ages) {
          if (t >= death || t >= tau_pc) break;
          if (t >= tau_hp && rng.uniform() < beta) {
            ++detected;
            if (indolent)
              ++over_indolent;
            else if (death < tau_pc)
              ++over_mortality;
            break;
          }
        }
      }
      OverdxDraw d;
      d.detected = detected;
      if (detected > 0) {
        d.indolent = static_cast<double>(over_indolent) / detected;
        d.mortality = static_cast<double>(over_mortality) / detected;
        d.total = d.indolent + d.mortality;
      }
      out.draws.push_back(d);
    }
  }
  return out;
}

}  // namespace nathist::odx
