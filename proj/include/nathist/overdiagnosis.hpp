#pragma once

#include <span>
#include <string>
#include <vector>

#include "nathist/sampler.hpp"

namespace nathist::odx {

// Other-cause mortality as survival on an age grid with linear
// interpolation; death ages beyond the grid top are assigned the top age.
struct LifeTable {
  std::vector<double> age;
  std::vector<double> survival;

  static LifeTable from_survival(std::vector<double> age,
                                 std::vector<double> survival);
  // hazard treated as piecewise constant on [age_k, age_{k+1})
  static LifeTable from_hazard(std::vector<double> age,
                               std::vector<double> hazard);

  double survival_at(double a) const;
  double inverse_survival(double u) const;  // age at which S(age) = u
  double sample_death_age(Rng& rng) const {
    return inverse_survival(rng.uniform());
  }
  // program age range must be covered and the table must reach age 100
  void validate_covers(double first_program_age) const;
};

struct ProgramSpec {
  std::vector<double> screen_ages;
  static ProgramSpec regular(double first, double last, double step);
};

struct OverdxDraw {
  double total = 0.0;      // P(overdiagnosed | screen-detected)
  double indolent = 0.0;   // share from indolence
  double mortality = 0.0;  // share from other-cause death before tau_PC
  long detected = 0;
};

struct OverdxResult {
  std::vector<OverdxDraw> draws;  // one per posterior draw
  int sims_per_draw = 0;
};

// Posterior functional: per posterior draw, microsimulate women with perfect
// program attendance and common random numbers; among screen-detected
// cancers, overdiagnosed = indolent or (progressive and other-cause death
// before clinical onset; ties count as not overdiagnosed).
OverdxResult overdiagnosis_rate(std::span<const mcmc::DrawStore> stores,
                                const ProgramSpec& program,
                                const LifeTable& life, int sims_per_draw,
                                std::uint64_t seed, double t0);

}  // namespace nathist::odx
