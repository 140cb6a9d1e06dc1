#pragma once

#include <memory>
#include <vector>

#include "nathist/rng.hpp"
#include "nathist/types.hpp"

namespace nathist {

// Fixed-per-fit schedule quantities for one record: mixture component edges
// for the onset-age proposal and the matching false-negative exponents.
// Edges run t0, t_1, ..., t_last where t_last is the censoring age (censored),
// the positive screen age (screen-detected) or the clinical onset age
// (interval-detected).
struct RecordCache {
  std::vector<double> edge_ages;    // size n_components + 1, edge_ages[0] = t0
  std::vector<double> edge_pow;     // (edge - t0)^shape_h
  std::vector<int> miss_exponent;   // per component
  bool point_mass = false;          // censored group has a no-onset atom

  int n_components() const { return static_cast<int>(miss_exponent.size()); }
};

RecordCache make_record_cache(const IndividualRecord& rec, double t0,
                              double shape_h);

// Mixed proposal for the pre-clinical onset age: optional atom at "no onset"
// plus truncated onset-law components over inter-screen intervals, weighted
// by (1-beta)^{#screens missed} times the onset-law mass of the interval.
struct ZhpProposal {
  const RecordCache* cache = nullptr;
  double t0 = 0.0;
  double onset_rate = 0.0;
  double onset_shape = 1.0;
  double log1m_beta = 0.0;
  double log_norm = 0.0;               // log of the unnormalized total mass
  double log_point_weight = -INFINITY; // unnormalized
  std::vector<double> edge_hazard;     // rate * edge_pow
  std::vector<double> weight;          // normalized component probabilities
  double point_prob = 0.0;
  std::shared_ptr<const RecordCache> owned_cache;  // set by the one-shot builder
};

// Throws if every component weight underflows to zero mass.
void build_zhp_proposal(const IndividualRecord& rec, const RecordCache& cache,
                        const Params& p, double t0, ZhpProposal& out);

ZhpProposal build_zhp_proposal(const IndividualRecord& rec, const Params& p,
                               double t0, double shape_h);

// Returns the proposed onset age, +inf for the no-onset atom. Two uniforms:
// component index, then an inverse-CDF draw within the component.
// component receives the drawn index (-1 for the atom) when non-null.
double sample_zhp_proposal(Rng& rng, const ZhpProposal& prop,
                           int* component = nullptr);

// Normalized log density (log mass for the atom) of the mixed proposal.
double zhp_proposal_logdensity(double onset_age, const ZhpProposal& prop);

}  // namespace nathist
