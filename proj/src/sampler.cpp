#include "nathist/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nathist/stats.hpp"

namespace nathist::mcmc {

double adapt_step_size(AdaptState& s, double accept_prob, int m, double delta,
                       double gamma, double m0, double kappa) {
  s.h_sum += delta - std::min(accept_prob, 1.0);
  const double xi =
      -(std::sqrt(static_cast<double>(m)) / gamma) * s.h_sum / (m + m0);
  s.log_eps = s.mu + xi;
  const double omega = std::pow(static_cast<double>(m), -kappa);
  s.log_eps_avg = (1.0 - omega) * s.log_eps_avg + omega * s.log_eps;
  return std::exp(s.log_eps);
}

double reflect_unit(double x) {
  x = std::fmod(std::abs(x), 2.0);
  return x > 1.0 ? 2.0 - x : x;
}

double propose_rate(Rng& rng, double rate, double eps) {
  double cand = std::abs(rate + std::sqrt(eps) * rng.normal());
  if (cand == 0.0) cand = std::numeric_limits<double>::min();
  return cand;
}

double propose_psi(Rng& rng, double psi, double eps) {
  return reflect_unit(psi + std::sqrt(eps) * rng.normal());
}

double indolence_conditional(const IndividualRecord& rec, const LatentState& z,
                             double psi, const Params& p) {
  if (rec.group == Group::IntervalDetected) return 0.0;
  if (!z.has_onset()) return psi;
  const double s =
      std::exp(-p.progression.cum_hazard(rec.censor_age - z.onset_age));
  return psi / (psi + (1.0 - psi) * s);
}

double gibbs_beta_draw(Rng& rng, const Cohort& cohort,
                       std::span<const LatentState> latents,
                       const PriorSpec& prior) {
  long m_plus = 0, m_minus = 0;
  for (int i = 0; i < cohort.size(); ++i) {
    const auto c = screen_counts(cohort.records[i], latents[i]);
    m_plus += c.m_plus;
    m_minus += c.m_minus;
  }
  return rng.beta(prior.a_beta + static_cast<double>(m_plus),
                  prior.b_beta + static_cast<double>(m_minus));
}

double complete_logdensity(const IndividualRecord& rec, const LatentState& z,
                           const Params& p, double t0) {
  double v = latent_logdensity(rec, z, p, t0) + obs_logdensity(rec, z, p);
  // indolence mass is attached in every configuration; with no onset it is
  // the prior Ber(psi), which keeps the z_hp kernel invariant and cancels
  // from every ratio that holds z_i fixed
  if (!z.has_onset())
    v += z.indolent ? std::log(p.psi) : std::log1p(-p.psi);
  return v;
}

Sampler::Sampler(const Cohort& cohort, const PriorSpec& prior,
                 std::uint64_t seed)
    : cohort_(cohort),
      prior_(prior),
      seed_(seed),
      t0_(prior.t0),
      params_(WeibullRS(1.0, prior.shape_h), WeibullRS(1.0, prior.shape_prog),
              0.5, 0.5) {
  prior_.validate();
  const int n = cohort_.size();
  caches_.reserve(n);
  censor_pow_h_.resize(n);
  is_interval_.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& rec = cohort_.records[i];
    caches_.push_back(make_record_cache(rec, t0_, prior_.shape_h));
    censor_pow_h_[i] = caches_.back().edge_pow.back();
    is_interval_[i] = rec.group == Group::IntervalDetected;
    m_plus_total_ += rec.screen_results.back() == 1;
  }
  onset_.assign(n, INFINITY);
  indolent_.assign(n, 0);
  m_minus_.assign(n, 0);
  onset_pow_.assign(n, 0.0);
  soj_pow_.assign(n, 0.0);
}

void Sampler::init_latents(const Params& p0) {
  if (p0.onset.shape != prior_.shape_h ||
      p0.progression.shape != prior_.shape_prog)
    throw std::invalid_argument(
        "init params must carry the prior's fixed shapes");
  params_ = p0;
  trunc_K_ =
      truncation_K_table(cohort_.entry_ages, params_.onset,
                         params_.progression, t0_);
  const int n = cohort_.size();
  for (int i = 0; i < n; ++i) {
    const auto& rec = cohort_.records[i];
    build_zhp_proposal(rec, caches_[i], params_, t0_, scratch_prop_);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      Rng rng(seed_, Stream::Init, attempt, i);
      int comp = -1;
      const double z = sample_zhp_proposal(rng, scratch_prop_, &comp);
      if (is_interval_[i] && !(rec.t_pc - z > 0.0)) continue;  // boundary clamp
      onset_[i] = z;
      m_minus_[i] = comp >= 0 ? caches_[i].miss_exponent[comp] : 0;
      const bool has = std::isfinite(z);
      onset_pow_[i] = has ? pow_shape(z - t0_, params_.onset.shape) : 0.0;
      soj_pow_[i] =
          has ? pow_shape(rec.censor_age - z, params_.progression.shape) : 0.0;
      const double q =
          indolence_conditional(rec, {z, false}, params_.psi, params_);
      indolent_[i] = rng.bernoulli(q) ? 1 : 0;
      ok = true;
    }
    if (!ok)
      throw std::runtime_error("init_latents: no admissible draw for record '" +
                               rec.id + "'");
  }
  rebuild_stats();
}

void Sampler::rebuild_stats() {
  n_onset_ = 0;
  n_interval_ = 0;
  m_minus_total_ = 0;
  sum_onset_pow_ = 0.0;
  sum_cens_pow_h_ = 0.0;
  sum_surv_pow_ = 0.0;
  sum_prog_pow_ = 0.0;
  for (int i = 0; i < cohort_.size(); ++i) {
    m_minus_total_ += m_minus_[i];
    if (is_interval_[i]) ++n_interval_;
    if (std::isfinite(onset_[i])) {
      ++n_onset_;
      sum_onset_pow_ += onset_pow_[i];
      if (is_interval_[i])
        sum_prog_pow_ += soj_pow_[i];
      else if (!indolent_[i])
        sum_surv_pow_ += soj_pow_[i];
    } else {
      sum_cens_pow_h_ += censor_pow_h_[i];
    }
  }
  for (double v : {sum_onset_pow_, sum_cens_pow_h_, sum_surv_pow_,
                   sum_prog_pow_}) {
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "sampler state became non-finite (lambda_h="
          << params_.onset.rate << ", lambda_prog=" << params_.progression.rate
          << ", psi=" << params_.psi << ", beta=" << params_.beta << ")";
      throw std::runtime_error(msg.str());
    }
  }
}

void Sampler::set_onset(int i, double z, int mm, double sojp) {
  const bool interval = is_interval_[i] != 0;
  if (std::isfinite(onset_[i])) {
    --n_onset_;
    sum_onset_pow_ -= onset_pow_[i];
    if (interval)
      sum_prog_pow_ -= soj_pow_[i];
    else if (!indolent_[i])
      sum_surv_pow_ -= soj_pow_[i];
  } else {
    sum_cens_pow_h_ -= censor_pow_h_[i];
  }
  m_minus_total_ += mm - m_minus_[i];
  onset_[i] = z;
  m_minus_[i] = mm;
  if (std::isfinite(z)) {
    onset_pow_[i] = pow_shape(z - t0_, params_.onset.shape);
    soj_pow_[i] = sojp;
    ++n_onset_;
    sum_onset_pow_ += onset_pow_[i];
    if (interval)
      sum_prog_pow_ += sojp;
    else if (!indolent_[i])
      sum_surv_pow_ += sojp;
  } else {
    onset_pow_[i] = 0.0;
    soj_pow_[i] = 0.0;
    sum_cens_pow_h_ += censor_pow_h_[i];
  }
}

double Sampler::gibbs_beta(std::uint32_t sweep) {
  Rng rng(seed_, Stream::GibbsBeta, sweep);
  params_.beta = rng.beta(prior_.a_beta + static_cast<double>(m_plus_total_),
                          prior_.b_beta + static_cast<double>(m_minus_total_));
  return params_.beta;
}

double Sampler::rate_update_log_ratio(bool progression, double cand,
                                      std::vector<double>& K_cand) const {
  double lr;
  if (progression) {
    const double cur = params_.progression.rate;
    lr = n_interval_ * (std::log(cand) - std::log(cur)) -
         (cand - cur) * (sum_prog_pow_ + sum_surv_pow_) +
         stats::gamma_logpdf(cand, prior_.a_prog, prior_.b_prog) -
         stats::gamma_logpdf(cur, prior_.a_prog, prior_.b_prog);
    K_cand = truncation_K_table(cohort_.entry_ages, params_.onset,
                                WeibullRS(cand, params_.progression.shape),
                                t0_);
  } else {
    const double cur = params_.onset.rate;
    lr = n_onset_ * (std::log(cand) - std::log(cur)) -
         (cand - cur) * (sum_onset_pow_ + sum_cens_pow_h_) +
         stats::gamma_logpdf(cand, prior_.a_h, prior_.b_h) -
         stats::gamma_logpdf(cur, prior_.a_h, prior_.b_h);
    K_cand = truncation_K_table(cohort_.entry_ages,
                                WeibullRS(cand, params_.onset.shape),
                                params_.progression, t0_);
  }
  const double psi = params_.psi;
  for (std::size_t e = 0; e < trunc_K_.size(); ++e)
    lr += cohort_.entry_count[e] *
          (truncation_log_normalizer_from_K(trunc_K_[e], psi) -
           truncation_log_normalizer_from_K(K_cand[e], psi));
  return lr;
}

double Sampler::mh_update_rate(bool progression, std::uint32_t sweep) {
  AdaptState& adapt = progression ? adapt_prog_ : adapt_h_;
  Rng rng(seed_, progression ? Stream::RateProg : Stream::RateH, sweep);
  const double cur =
      progression ? params_.progression.rate : params_.onset.rate;
  const double cand = propose_rate(rng, cur, std::exp(adapt.log_eps));
  thread_local std::vector<double> K_cand;
  const double lr = rate_update_log_ratio(progression, cand, K_cand);
  const bool accept =
      lr >= 0.0 || std::log(rng.uniform()) < lr;
  if (accept) {
    if (progression)
      params_.progression.rate = cand;
    else
      params_.onset.rate = cand;
    trunc_K_.swap(K_cand);
  }
  return std::isnan(lr) ? 0.0 : std::min(1.0, std::exp(lr));
}

ZhpUpdateResult Sampler::mh_update_zhp(int i, std::uint32_t sweep) {
  const auto& rec = cohort_.records[i];
  build_zhp_proposal(rec, caches_[i], params_, t0_, scratch_prop_);
  Rng rng(seed_, Stream::Zhp, sweep, static_cast<std::uint32_t>(i));
  int comp = -1;
  const double cand = sample_zhp_proposal(rng, scratch_prop_, &comp);

  const double lp = params_.progression.rate;
  const double ap = params_.progression.shape;
  const bool interval = is_interval_[i] != 0;
  const bool indolent = indolent_[i] != 0;

  // Target over proposal collapses to the sojourn factor the proposal
  // ignores: S_prog^(1 - z_i) for censored / screen-detected cases,
  // f_prog for interval cases. For indolent cases the ratio is exactly 0.
  double soj_pow_cand = 0.0;
  double w_cand = 0.0;
  if (std::isfinite(cand)) {
    const double soj = rec.censor_age - cand;
    soj_pow_cand = pow_shape(soj, ap);
    if (interval) {
      w_cand = soj > 0.0 ? (ap != 1.0 ? (ap - 1.0) * std::log(soj) : 0.0) -
                               lp * soj_pow_cand
                         : -INFINITY;
    } else if (!indolent) {
      w_cand = -lp * soj_pow_cand;
    }
  }
  double w_cur = 0.0;
  if (std::isfinite(onset_[i])) {
    if (interval) {
      const double soj = rec.censor_age - onset_[i];
      w_cur = soj > 0.0 ? (ap != 1.0 ? (ap - 1.0) * std::log(soj) : 0.0) -
                              lp * soj_pow_[i]
                        : -INFINITY;
    } else if (!indolent) {
      w_cur = -lp * soj_pow_[i];
    }
  }

  const double lr = w_cand - w_cur;
  const bool accept = lr >= 0.0 || std::log(rng.uniform()) < lr;
  if (accept)
    set_onset(i, cand, comp >= 0 ? caches_[i].miss_exponent[comp] : 0,
              soj_pow_cand);
  return {accept, lr, cand};
}

Sampler::BlockProposal Sampler::propose_block(std::uint32_t sweep) const {
  Rng rng(seed_, Stream::PsiBlock, sweep);
  const double psi = params_.psi;
  BlockProposal out;
  out.psi_star = propose_psi(rng, psi, std::exp(adapt_psi_.log_eps));
  const double cand = out.psi_star;

  double lr = stats::beta_logpdf(cand, prior_.a_psi, prior_.b_psi) -
              stats::beta_logpdf(psi, prior_.a_psi, prior_.b_psi);
  for (std::size_t e = 0; e < trunc_K_.size(); ++e)
    lr += cohort_.entry_count[e] *
          (truncation_log_normalizer_from_K(trunc_K_[e], psi) -
           truncation_log_normalizer_from_K(trunc_K_[e], cand));
  if (n_interval_ > 0)
    lr += n_interval_ * (std::log1p(-cand) - std::log1p(-psi));

  // Z^I proposed from its exact full conditional given the candidate psi;
  // the freshly drawn values cancel, leaving the ratio of the z_i-summed
  // conditionals D_i = psi + (1 - psi) S_prog(c - z).
  const double lp = params_.progression.rate;
  const int n = cohort_.size();
  out.zi_star.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    if (is_interval_[i]) continue;
    const double s = std::exp(-lp * soj_pow_[i]);  // 1 when no onset
    const double d_cand = cand + (1.0 - cand) * s;
    const double d_cur = psi + (1.0 - psi) * s;
    lr += std::log(d_cand) - std::log(d_cur);
    Rng ri(seed_, Stream::ZiProposal, sweep, static_cast<std::uint32_t>(i));
    const bool zi = ri.uniform() < cand / d_cand;
    out.zi_star[i] = zi ? 1 : 0;
    if (!zi) out.sum_surv_pow_star += soj_pow_[i];
  }
  out.log_ratio = lr;
  return out;
}

double Sampler::block_update_psi_zi(std::uint32_t sweep) {
  BlockProposal prop = propose_block(sweep);
  const double lr = prop.log_ratio;
  Rng rng(seed_, Stream::PsiBlockAccept, sweep);
  const bool accept = lr >= 0.0 || std::log(rng.uniform()) < lr;
  if (accept) {
    params_.psi = prop.psi_star;
    indolent_.swap(prop.zi_star);
    sum_surv_pow_ = prop.sum_surv_pow_star;
  }
  return std::isnan(lr) ? 0.0 : std::min(1.0, std::exp(lr));
}

void Sampler::frozen_latent_sweep(std::uint32_t sweep) {
  const int n = cohort_.size();
  for (int i = 0; i < n; ++i) mh_update_zhp(i, sweep);
  const double lp = params_.progression.rate;
  const double psi = params_.psi;
  for (int i = 0; i < n; ++i) {
    if (is_interval_[i]) continue;
    const double s = std::exp(-lp * soj_pow_[i]);
    const double q = psi / (psi + (1.0 - psi) * s);
    Rng ri(seed_, Stream::ZiProposal, sweep, static_cast<std::uint32_t>(i));
    const bool zi = ri.uniform() < q;
    if (zi != (indolent_[i] != 0) && std::isfinite(onset_[i])) {
      sum_surv_pow_ += zi ? -soj_pow_[i] : soj_pow_[i];
    }
    indolent_[i] = zi ? 1 : 0;
  }
}

double Sampler::log_joint_target() const {
  double v = log_prior(params_, prior_);
  for (int i = 0; i < cohort_.size(); ++i)
    v += complete_logdensity(cohort_.records[i], latent(i), params_, t0_);
  for (std::size_t e = 0; e < trunc_K_.size(); ++e)
    v -= cohort_.entry_count[e] *
         truncation_log_normalizer_from_K(trunc_K_[e], params_.psi);
  return v;
}

ChainState Sampler::state() const {
  ChainState s{params_, {}, sweep_, adapt_h_, adapt_prog_, adapt_psi_};
  s.latents.resize(cohort_.size());
  for (int i = 0; i < cohort_.size(); ++i) s.latents[i] = latent(i);
  return s;
}

void Sampler::set_state(const ChainState& s) {
  if (static_cast<int>(s.latents.size()) != cohort_.size())
    throw std::invalid_argument("checkpoint latent count mismatch");
  params_ = s.params;
  sweep_ = s.sweep;
  adapt_h_ = s.adapt_h;
  adapt_prog_ = s.adapt_prog;
  adapt_psi_ = s.adapt_psi;
  for (int i = 0; i < cohort_.size(); ++i) {
    const auto& rec = cohort_.records[i];
    const auto& z = s.latents[i];
    onset_[i] = z.onset_age;
    indolent_[i] = z.indolent ? 1 : 0;
    const auto c = screen_counts(rec, z);
    m_minus_[i] = c.m_minus;
    const bool has = z.has_onset();
    onset_pow_[i] =
        has ? pow_shape(z.onset_age - t0_, params_.onset.shape) : 0.0;
    soj_pow_[i] = has ? pow_shape(rec.censor_age - z.onset_age,
                                  params_.progression.shape)
                      : 0.0;
  }
  rebuild_stats();
  trunc_K_ = truncation_K_table(cohort_.entry_ages, params_.onset,
                                params_.progression, t0_);
}

DrawStore Sampler::run(const ChainConfig& cfg) {
  if (!(cfg.warmup >= 0 && cfg.warmup < cfg.iterations && cfg.thin >= 1))
    throw std::invalid_argument(
        "chain config requires 0 <= warmup < iterations and thin >= 1");

  if (sweep_ == 0) {
    auto eps0 = [](double configured, double fallback) {
      return configured > 0.0 ? configured : fallback;
    };
    adapt_h_ =
        AdaptState::init(eps0(cfg.eps_h, std::pow(0.05 * params_.onset.rate, 2)));
    adapt_prog_ = AdaptState::init(
        eps0(cfg.eps_prog, std::pow(0.05 * params_.progression.rate, 2)));
    adapt_psi_ = AdaptState::init(eps0(cfg.eps_psi, 0.01));
  }

  DrawStore store;
  store.seed = seed_;
  store.t0 = t0_;
  store.shape_h = prior_.shape_h;
  store.shape_prog = prior_.shape_prog;
  store.iterations = cfg.iterations;
  store.warmup = cfg.warmup;
  store.thin = cfg.thin;
  const int kept = (cfg.iterations - cfg.warmup) / cfg.thin;
  store.lambda_h.reserve(kept);
  store.lambda_prog.reserve(kept);
  store.psi.reserve(kept);
  store.beta.reserve(kept);

  long acc_h = 0, acc_prog = 0, acc_psi = 0, acc_zhp = 0;
  const int n = cohort_.size();

  for (std::uint32_t m = sweep_ + 1;
       m <= static_cast<std::uint32_t>(cfg.iterations); ++m) {
    gibbs_beta(m);
    const double lh_cur = params_.onset.rate;
    const double ah = mh_update_rate(false, m);
    const double lp_cur = params_.progression.rate;
    const double ap = mh_update_rate(true, m);
    long zacc = 0;
    for (int i = 0; i < n; ++i) zacc += mh_update_zhp(i, m).accepted;
    const double psi_cur = params_.psi;
    const double apsi = block_update_psi_zi(m);

    if (static_cast<int>(m) <= cfg.warmup) {
      adapt_step_size(adapt_h_, ah, static_cast<int>(m),
                      cfg.accept_target_rate);
      adapt_step_size(adapt_prog_, ap, static_cast<int>(m),
                      cfg.accept_target_rate);
      adapt_step_size(adapt_psi_, apsi, static_cast<int>(m),
                      cfg.accept_target_block);
      if (static_cast<int>(m) == cfg.warmup) {
        adapt_h_.freeze();
        adapt_prog_.freeze();
        adapt_psi_.freeze();
      }
    } else {
      acc_h += params_.onset.rate != lh_cur;
      acc_prog += params_.progression.rate != lp_cur;
      acc_psi += params_.psi != psi_cur;
      acc_zhp += zacc;
      const int post = static_cast<int>(m) - cfg.warmup;
      if (post % cfg.thin == 0) {
        store.lambda_h.push_back(params_.onset.rate);
        store.lambda_prog.push_back(params_.progression.rate);
        store.psi.push_back(params_.psi);
        store.beta.push_back(params_.beta);
        if (cfg.store_latents) {
          store.latent_onset.push_back(onset_);
          store.latent_indolent.push_back(indolent_);
        }
      }
    }
    if (cfg.refresh_every > 0 && m % cfg.refresh_every == 0) rebuild_stats();
    sweep_ = m;
  }

  const double post_n = cfg.iterations - cfg.warmup;
  store.accept_h = acc_h / post_n;
  store.accept_prog = acc_prog / post_n;
  store.accept_psi = acc_psi / post_n;
  store.accept_zhp = acc_zhp / (post_n * n);
  store.eps_h = std::exp(adapt_h_.log_eps);
  store.eps_prog = std::exp(adapt_prog_.log_eps);
  store.eps_psi = std::exp(adapt_psi_.log_eps);
  return store;
}

DrawStore run_chain(std::uint64_t seed, const Cohort& cohort,
                    const PriorSpec& prior, const Params& init,
                    const ChainConfig& cfg) {
  Sampler s(cohort, prior, seed);
  s.init_latents(init);
  return s.run(cfg);
}

}  // namespace nathist::mcmc
