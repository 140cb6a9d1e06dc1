#include "nathist/proposal.hpp"

#include <algorithm>
#include <cmath>

#include "nathist/weibull.hpp"

namespace nathist {

RecordCache make_record_cache(const IndividualRecord& rec, double t0,
                              double shape_h) {
  RecordCache c;
  const int n = rec.n_screens();
  // Component edges: screens strictly above t0, then the endpoint. For the
  // screen-detected group the last (positive) screen is the endpoint itself.
  c.edge_ages.push_back(t0);
  const bool screen_detected = rec.group == Group::ScreenDetected;
  const int last_edge_screen = screen_detected ? n - 1 : n;
  for (int j = 0; j < last_edge_screen; ++j)
    c.edge_ages.push_back(rec.screen_ages[j]);
  c.edge_ages.push_back(rec.censor_age);

  const int n_comp = static_cast<int>(c.edge_ages.size()) - 1;
  c.edge_pow.resize(n_comp + 1);
  for (int j = 0; j <= n_comp; ++j)
    c.edge_pow[j] = pow_shape(c.edge_ages[j] - t0, shape_h);

  // (1-beta) exponent = negative screens at ages >= any point of component k:
  // n+1-k for censored/interval (n_comp = n+1), n-k for screen-detected
  c.miss_exponent.resize(n_comp);
  for (int k = 1; k <= n_comp; ++k)
    c.miss_exponent[k - 1] = screen_detected ? n - k : n_comp - k;

  c.point_mass = rec.group == Group::Censored;
  return c;
}

void build_zhp_proposal(const IndividualRecord& rec, const RecordCache& cache,
                        const Params& p, double t0, ZhpProposal& out) {
  const int n_comp = cache.n_components();
  out.cache = &cache;
  out.t0 = t0;
  out.onset_rate = p.onset.rate;
  out.onset_shape = p.onset.shape;
  out.log1m_beta = std::log1p(-p.beta);
  out.edge_hazard.resize(n_comp + 1);
  out.weight.resize(n_comp);

  for (int j = 0; j <= n_comp; ++j)
    out.edge_hazard[j] = p.onset.rate * cache.edge_pow[j];

  // log unnormalized weights; survivals via expm1 keep precision in both the
  // rare-onset and the near-certain-onset regimes
  double prev = 0.0;  // expm1(-hazard) at the previous edge
  double max_lw = -INFINITY;
  thread_local std::vector<double> lw;
  lw.resize(n_comp);
  for (int k = 1; k <= n_comp; ++k) {
    const double cur = std::expm1(-out.edge_hazard[k]);
    const double mass = prev - cur;  // F(edge_k) - F(edge_{k-1})
    prev = cur;
    double v = mass > 0.0 ? std::log(mass) : -INFINITY;
    const int e = cache.miss_exponent[k - 1];
    if (e > 0) v += e * out.log1m_beta;
    lw[k - 1] = v;
    max_lw = std::max(max_lw, v);
  }
  out.log_point_weight =
      cache.point_mass ? -out.edge_hazard[n_comp] : -INFINITY;
  max_lw = std::max(max_lw, out.log_point_weight);
  if (!std::isfinite(max_lw))
    throw std::runtime_error(
        "build_zhp_proposal: all proposal weights underflow (record '" +
        rec.id + "')");

  double total = 0.0;
  for (int k = 0; k < n_comp; ++k) {
    out.weight[k] = std::exp(lw[k] - max_lw);
    total += out.weight[k];
  }
  double point = 0.0;
  if (cache.point_mass) {
    point = std::exp(out.log_point_weight - max_lw);
    total += point;
  }
  for (int k = 0; k < n_comp; ++k) out.weight[k] /= total;
  out.point_prob = point / total;
  out.log_norm = max_lw + std::log(total);
}

ZhpProposal build_zhp_proposal(const IndividualRecord& rec, const Params& p,
                               double t0, double shape_h) {
  ZhpProposal prop;
  prop.owned_cache =
      std::make_shared<RecordCache>(make_record_cache(rec, t0, shape_h));
  build_zhp_proposal(rec, *prop.owned_cache, p, t0, prop);
  return prop;
}

double sample_zhp_proposal(Rng& rng, const ZhpProposal& prop,
                           int* component) {
  const auto& cache = *prop.cache;
  const int n_comp = cache.n_components();
  double u = rng.uniform();
  int k = -1;  // -1 encodes the atom
  u -= prop.point_prob;
  if (u >= 0.0) {
    for (k = 0; k < n_comp - 1; ++k) {
      u -= prop.weight[k];
      if (u < 0.0) break;
    }
  }
  if (component) *component = k;
  if (k < 0) return INFINITY;

  // inverse-CDF draw on the cumulative-hazard scale within component k
  const double hl = prop.edge_hazard[k];
  const double hu = prop.edge_hazard[k + 1];
  const double h = hl - std::log1p(rng.uniform() * std::expm1(-(hu - hl)));
  double x = prop.t0 +
             std::pow(h / prop.onset_rate, 1.0 / prop.onset_shape);
  const double lo = cache.edge_ages[k];
  const double hi = cache.edge_ages[k + 1];
  if (x <= lo) x = std::nextafter(lo, hi);
  if (x > hi) x = hi;
  return x;
}

double zhp_proposal_logdensity(double onset_age, const ZhpProposal& prop) {
  const auto& cache = *prop.cache;
  if (!std::isfinite(onset_age))
    return cache.point_mass ? prop.log_point_weight - prop.log_norm
                            : -INFINITY;
  const auto& edges = cache.edge_ages;
  if (!(onset_age > edges.front() && onset_age <= edges.back()))
    return -INFINITY;
  const auto it =
      std::lower_bound(edges.begin() + 1, edges.end(), onset_age);
  const int k = static_cast<int>(it - edges.begin()) - 1;
  // within component k the truncation mass cancels against the weight:
  // density = (1-beta)^{e_k} f_H(z - t0) / total
  const WeibullRS onset(prop.onset_rate, prop.onset_shape);
  const int e = cache.miss_exponent[k];
  return (e > 0 ? e * prop.log1m_beta : 0.0) +
         weibull_logpdf(onset_age - prop.t0, onset) - prop.log_norm;
}

}  // namespace nathist
