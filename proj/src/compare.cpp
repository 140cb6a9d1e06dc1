#include "nathist/compare.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nathist/stats.hpp"

namespace nathist::loo {

namespace {

// Importance-sampling streams are keyed by the record id, not its position,
// so contributions are invariant under record reordering and identical for
// duplicated records.
std::uint32_t id_stream(const std::string& id) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : id) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

// streaming log-sum-exp
struct LogSumExp {
  double max = -INFINITY;
  double sum = 0.0;  // sum of exp(v - max)

  void add(double v) {
    if (v == -INFINITY) return;
    if (v <= max) {
      sum += std::exp(v - max);
    } else {
      sum = sum * std::exp(max - v) + 1.0;
      max = v;
    }
  }
  double value() const {
    return sum > 0.0 ? max + std::log(sum) : -INFINITY;
  }
};

MarginalEstimate marginal_impl(const IndividualRecord& rec,
                               const RecordCache& cache, const Params& p,
                               double t0, int J, Rng& rng,
                               double log_trunc_normalizer) {
  if (J < 1) throw std::invalid_argument("marginal_obs_loglik requires J >= 1");
  ZhpProposal prop;
  build_zhp_proposal(rec, cache, p, t0, prop);

  LogSumExp lse;
  for (int j = 0; j < J; ++j) {
    const double z = sample_zhp_proposal(rng, prop);
    LatentState s{z, false};
    const double q_ind = mcmc::indolence_conditional(rec, s, p.psi, p);
    s.indolent = rng.bernoulli(q_ind);
    // log [ f(y | Z) f(Z) / q(Z) ]
    double term = mcmc::complete_logdensity(rec, s, p, t0) - log_trunc_normalizer -
                  zhp_proposal_logdensity(z, prop);
    const double q_zi = s.indolent ? q_ind : 1.0 - q_ind;
    if (q_zi > 0.0) term -= std::log(q_zi);
    lse.add(term);
  }
  const double log_f = lse.value() - std::log(static_cast<double>(J));
  return {log_f, !std::isfinite(log_f)};
}

}  // namespace

MarginalEstimate marginal_obs_loglik(const IndividualRecord& rec,
                                     const Params& p, double t0, int J,
                                     Rng& rng, double log_trunc_normalizer) {
  const RecordCache cache = make_record_cache(rec, t0, p.onset.shape);
  return marginal_impl(rec, cache, p, t0, J, rng, log_trunc_normalizer);
}

MarginalEstimate marginal_obs_loglik(const IndividualRecord& rec,
                                     const Params& p, double t0, int J,
                                     Rng& rng) {
  return marginal_obs_loglik(rec, p, t0, J, rng,
                             truncation_log_normalizer(rec.entry_age(), p, t0));
}

GpdFit fit_gpd(std::vector<double> x) {
  // Zhang & Stephens (2009) profile-posterior point estimate; returned shape
  // uses the xi convention (xi > 0 = heavy tail).
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  if (x.size() < 5 || x.back() <= 0.0) return {0.0, 1.0};
  const int m = 30 + static_cast<int>(std::sqrt(n));
  std::size_t q_idx = static_cast<std::size_t>(n / 4.0 + 0.5);
  q_idx = std::min(std::max<std::size_t>(q_idx, 1), x.size()) - 1;
  const double x_star = x[q_idx];

  auto k_of = [&](double theta) {
    double k = 0.0;
    for (double v : x) k += std::log1p(-theta * v);
    return -k / n;
  };

  std::vector<double> theta(m), log_w(m);
  for (int j = 1; j <= m; ++j) {
    theta[j - 1] = 1.0 / x.back() +
                   (1.0 - std::sqrt(m / (j - 0.5))) / (3.0 * x_star);
    const double k = k_of(theta[j - 1]);
    log_w[j - 1] = n * (std::log(theta[j - 1] / k) + k - 1.0);
  }
  const double lse = stats::logsumexp(log_w);
  double theta_hat = 0.0;
  for (int j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(log_w[j] - lse);
  const double k_hat = k_of(theta_hat);
  return {-k_hat, k_hat / theta_hat};
}

namespace {

// Smooth the largest weights with generalized-Pareto quantiles (PSIS-style).
void smooth_tail(std::vector<double>& log_w) {
  const auto n = static_cast<double>(log_w.size());
  const int tail =
      std::min(static_cast<int>(0.2 * n), static_cast<int>(3.0 * std::sqrt(n)));
  if (tail < 5) return;
  std::vector<std::size_t> order(log_w.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return log_w[a] < log_w[b]; });
  const double cutoff = log_w[order[log_w.size() - tail - 1]];
  std::vector<double> exceed(tail);
  for (int j = 0; j < tail; ++j)
    exceed[j] =
        std::exp(log_w[order[log_w.size() - tail + j]]) - std::exp(cutoff);
  const GpdFit fit = fit_gpd(exceed);
  if (!(fit.sigma > 0.0) || !std::isfinite(fit.k)) return;
  for (int j = 0; j < tail; ++j) {
    const double q = (j + 0.5) / tail;
    double quant;
    if (std::abs(fit.k) < 1e-12)
      quant = -fit.sigma * std::log1p(-q);
    else
      quant = fit.sigma / fit.k * (std::pow(1.0 - q, -fit.k) - 1.0);
    log_w[order[log_w.size() - tail + j]] =
        std::log(std::exp(cutoff) + quant);
  }
}

}  // namespace

PredictiveFit aloocv(std::span<const mcmc::DrawStore> stores,
                     const Cohort& cohort, const LooConfig& cfg) {
  if (stores.empty() || stores.front().size() == 0)
    throw std::invalid_argument("aloocv: empty draw store");
  const double t0 = cohort.t0;
  const double shape_h = stores.front().shape_h;
  const double shape_prog = stores.front().shape_prog;
  const int n = cohort.size();

  std::vector<RecordCache> caches;
  caches.reserve(n);
  for (const auto& rec : cohort.records)
    caches.push_back(make_record_cache(rec, t0, shape_h));

  long total_draws = 0;
  for (const auto& st : stores) total_draws += static_cast<long>(st.size());

  // streaming accumulators for log sum_m (1/f_im); the full matrix is kept
  // only when tail smoothing needs it
  std::vector<LogSumExp> acc(n);
  std::vector<std::vector<double>> neg_log_f;
  if (cfg.pareto_smooth)
    neg_log_f.assign(n, std::vector<double>(total_draws, 0.0));

  long m_global = 0;
  for (const auto& st : stores) {
    for (std::size_t m = 0; m < st.size(); ++m, ++m_global) {
      const Params p(WeibullRS(st.lambda_h[m], shape_h),
                     WeibullRS(st.lambda_prog[m], shape_prog), st.psi[m],
                     st.beta[m]);
      std::vector<double> log_n(cohort.entry_ages.size(), 0.0);
      if (cfg.include_truncation) {
        const auto K = truncation_K_table(cohort.entry_ages, p.onset,
                                          p.progression, t0);
        for (std::size_t e = 0; e < K.size(); ++e)
          log_n[e] = truncation_log_normalizer_from_K(K[e], p.psi);
      }
      for (int i = 0; i < n; ++i) {
        Rng rng(cfg.seed, Stream::Loo, static_cast<std::uint32_t>(m_global),
                id_stream(cohort.records[i].id));
        const auto est =
            marginal_impl(cohort.records[i], caches[i], p, t0, cfg.j_inner,
                          rng, log_n[cohort.entry_index[i]]);
        if (cfg.pareto_smooth)
          neg_log_f[i][m_global] = -est.log_f;
        else
          acc[i].add(-est.log_f);
      }
    }
  }

  PredictiveFit fit;
  fit.j_inner = cfg.j_inner;
  fit.contributions.resize(n);
  fit.max_weight.resize(n);
  for (int i = 0; i < n; ++i) {
    double lse, mx;
    if (cfg.pareto_smooth) {
      auto& w = neg_log_f[i];
      smooth_tail(w);
      lse = stats::logsumexp(w);
      mx = *std::max_element(w.begin(), w.end());
    } else {
      lse = acc[i].value();
      mx = acc[i].max;
    }
    fit.max_weight[i] = std::exp(mx - lse);
    // log f_hat(y_i | Y_-i) = log M - logsumexp(-log f_im)
    fit.contributions[i] =
        std::log(static_cast<double>(total_draws)) - lse;
    if (!std::isfinite(fit.contributions[i])) fit.unstable.push_back(i);
    fit.pf_hat += fit.contributions[i];
  }
  return fit;
}

PairedTTest paired_t_test(const PredictiveFit& fit_a,
                          const PredictiveFit& fit_b) {
  if (fit_a.contributions.size() != fit_b.contributions.size())
    throw std::invalid_argument("paired_t_test: size mismatch");
  const auto n = fit_a.contributions.size();
  std::vector<double> delta(n);
  for (std::size_t i = 0; i < n; ++i)
    delta[i] = fit_a.contributions[i] - fit_b.contributions[i];
  PairedTTest r;
  r.delta = std::accumulate(delta.begin(), delta.end(), 0.0);
  r.dof = static_cast<double>(n) - 1.0;
  const double var = stats::sample_variance(delta);
  const double mean_d = r.delta / static_cast<double>(n);
  if (var <= 1e-20 * std::max(1e-300, mean_d * mean_d)) {
    r.zero_variance = true;
    r.t = r.delta == 0.0 ? 0.0 : (r.delta > 0.0 ? INFINITY : -INFINITY);
    r.p_value = r.delta == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = r.delta / std::sqrt(static_cast<double>(n) * var);
  r.p_value = stats::student_t_two_sided_p(r.t, r.dof);
  return r;
}

PredictiveSojourn predictive_sojourn(std::span<const mcmc::DrawStore> stores,
                                     std::span<const double> grid,
                                     double short_threshold,
                                     double long_threshold) {
  if (stores.empty() || stores.front().size() == 0)
    throw std::invalid_argument("predictive_sojourn: empty draw store");
  const double shape = stores.front().shape_prog;
  PredictiveSojourn out;
  out.grid.assign(grid.begin(), grid.end());
  out.density.assign(grid.size(), 0.0);
  long m_total = 0;
  for (const auto& st : stores) {
    for (double lp : st.lambda_prog) {
      const WeibullRS w(lp, shape);
      for (std::size_t g = 0; g < grid.size(); ++g)
        out.density[g] +=
            grid[g] > 0.0 ? std::exp(weibull_logpdf(grid[g], w)) : 0.0;
      out.p_short += weibull_cdf(short_threshold, w);
      out.p_long += weibull_surv(long_threshold, w);
      ++m_total;
    }
  }
  const double m = static_cast<double>(m_total);
  for (auto& d : out.density) d /= m;
  out.p_short /= m;
  out.p_long /= m;
  return out;
}

}  // namespace nathist::loo
