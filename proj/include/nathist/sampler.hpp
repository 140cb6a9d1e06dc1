#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nathist/likelihood.hpp"
#include "nathist/proposal.hpp"
#include "nathist/rng.hpp"
#include "nathist/types.hpp"

namespace nathist::mcmc {

// Dual-averaging step-size tuning accumulators. log_eps is the primal
// iterate used while adapting, log_eps_avg the m^-kappa weighted average the
// chain freezes to after warmup, mu the anchor log(10 * eps0), and h_sum the
// accumulated (target - realized) acceptance probabilities.
struct AdaptState {
  double log_eps = 0.0;
  double log_eps_avg = 0.0;
  double mu = 0.0;
  double h_sum = 0.0;

  static AdaptState init(double eps0) {
    return {std::log(eps0), std::log(eps0), std::log(10.0 * eps0), 0.0};
  }
  double eps() const { return std::exp(log_eps); }
  void freeze() { log_eps = log_eps_avg; }
};

// One tuning step at (1-based) warmup iteration m toward acceptance target
// delta; returns the epsilon to use next. The correction term is
// xi_{m+1} = -(sqrt(m)/gamma) * (sum_i H_i) / (m + m0) with H_i = delta -
// alpha_i; the primal iterate is mu + xi and the returned average is
// (1 - m^-kappa) old + m^-kappa primal.
double adapt_step_size(AdaptState& s, double accept_prob, int m, double delta,
                       double gamma = 0.05, double m0 = 10.0,
                       double kappa = 0.75);

// Fold into [0,1] (reflections at both ends); the resulting random walk is
// symmetric.
double reflect_unit(double x);

// Reflected-at-zero Gaussian random-walk candidate for a rate.
double propose_rate(Rng& rng, double rate, double eps);

// Reflected Gaussian random-walk candidate for psi; eps is a variance.
double propose_psi(Rng& rng, double psi, double eps);

// P(Z_I = 1 | z, psi, .): 0 for interval cases, psi when no onset, else
// psi / (psi + (1-psi) S_prog(c - z)).
double indolence_conditional(const IndividualRecord& rec, const LatentState& z,
                             double psi, const Params& p);

// Conjugate draw beta ~ Be(a + m+, b + m-) given the current latents.
double gibbs_beta_draw(Rng& rng, const Cohort& cohort,
                       std::span<const LatentState> latents,
                       const PriorSpec& prior);

struct ChainConfig {
  int iterations = 15000;  // total sweeps including warmup
  int warmup = 5000;
  int thin = 10;           // post-warmup thinning
  bool store_latents = false;
  double eps_h = 0.0;      // initial proposal variances; 0 = scale from init
  double eps_prog = 0.0;
  double eps_psi = 0.01;
  int refresh_every = 1000;
  double accept_target_rate = 0.44;   // univariate rate updates
  double accept_target_block = 0.24;  // (psi, Z_I) block
};

// Thinned post-warmup draws of one chain, with seed provenance and
// per-update-type acceptance rates.
struct DrawStore {
  std::uint64_t seed = 0;
  int chain_id = 0;
  double t0 = 0.0, shape_h = 0.0, shape_prog = 0.0;
  int iterations = 0, warmup = 0, thin = 1;
  std::vector<double> lambda_h, lambda_prog, psi, beta;
  std::vector<std::vector<double>> latent_onset;
  std::vector<std::vector<std::uint8_t>> latent_indolent;
  double eps_h = 0.0, eps_prog = 0.0, eps_psi = 0.0;
  double accept_h = 0.0, accept_prog = 0.0, accept_psi = 0.0,
         accept_zhp = 0.0;
  std::size_t size() const { return beta.size(); }
};

// Everything needed to resume a chain bit-exactly.
struct ChainState {
  Params params;
  std::vector<LatentState> latents;
  std::uint32_t sweep = 0;  // completed sweeps
  AdaptState adapt_h, adapt_prog, adapt_psi;
};

struct ZhpUpdateResult {
  bool accepted = false;
  double log_ratio = 0.0;
  double candidate = 0.0;
};

// Complete-data log density f(Y_i | Z_i, .) f(Z_i | .) of one individual with
// the indolence mass Ber(z_i; psi) attached in every configuration (the
// chain's working target); excludes the truncation normalizer.
double complete_logdensity(const IndividualRecord& rec, const LatentState& z,
                           const Params& p, double t0);

// One MCMC chain bound to a cohort. Update order per sweep: beta Gibbs,
// lambda_H, lambda_prog, every Z^HP, then the (psi, Z^I) block.
class Sampler {
 public:
  Sampler(const Cohort& cohort, const PriorSpec& prior, std::uint64_t seed);

  // Draw initial latents from the proposal distributions.
  void init_latents(const Params& p0);
  void set_state(const ChainState& s);
  ChainState state() const;

  double gibbs_beta(std::uint32_t sweep);
  double mh_update_rate(bool progression, std::uint32_t sweep);
  ZhpUpdateResult mh_update_zhp(int i, std::uint32_t sweep);
  double block_update_psi_zi(std::uint32_t sweep);

  // Joint (psi, Z^I) candidate with its acceptance log-ratio.
  struct BlockProposal {
    double psi_star = 0.0;
    std::vector<std::uint8_t> zi_star;
    double log_ratio = 0.0;
    double sum_surv_pow_star = 0.0;
  };
  BlockProposal propose_block(std::uint32_t sweep) const;

  // z_hp MH sweep plus exact conditional redraw of every Z^I at frozen
  // parameters (latent Gibbs; used by diagnostics and tests).
  void frozen_latent_sweep(std::uint32_t sweep);

  DrawStore run(const ChainConfig& cfg);

  const Params& params() const { return params_; }
  LatentState latent(int i) const {
    return {onset_[i], indolent_[i] != 0};
  }
  const Cohort& cohort() const { return cohort_; }
  double log_joint_target() const;  // full recomputation (diagnostic)

 private:
  friend struct SamplerTestAccess;
  void rebuild_stats();
  void set_onset(int i, double z, int m_minus, double soj_pow);
  double rate_update_log_ratio(bool progression, double cand,
                               std::vector<double>& K_cand) const;

  const Cohort& cohort_;
  PriorSpec prior_;
  std::uint64_t seed_;
  double t0_;
  Params params_;

  std::vector<RecordCache> caches_;
  std::vector<double> censor_pow_h_;  // (c - t0)^shape_h per record
  std::vector<std::uint8_t> is_interval_;

  // latent state (structure-of-arrays)
  std::vector<double> onset_;
  std::vector<std::uint8_t> indolent_;
  std::vector<int> m_minus_;
  std::vector<double> onset_pow_;  // (z - t0)^shape_h, 0 when no onset
  std::vector<double> soj_pow_;    // (c - z)^shape_prog, 0 when no onset

  // sufficient statistics for the O(1) rate updates
  long n_onset_ = 0;
  long n_interval_ = 0;
  long m_plus_total_ = 0;
  long m_minus_total_ = 0;
  double sum_onset_pow_ = 0.0;
  double sum_cens_pow_h_ = 0.0;
  double sum_surv_pow_ = 0.0;
  double sum_prog_pow_ = 0.0;

  std::vector<double> trunc_K_;  // per distinct entry age, current params

  AdaptState adapt_h_, adapt_prog_, adapt_psi_;
  std::uint32_t sweep_ = 0;

  ZhpProposal scratch_prop_;
};

DrawStore run_chain(std::uint64_t seed, const Cohort& cohort,
                    const PriorSpec& prior, const Params& init,
                    const ChainConfig& cfg);

}  // namespace nathist::mcmc
