#include "nathist/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nathist/stats.hpp"
#include "nathist/weibull.hpp"

namespace nathist::diag {

PsrfResult psrf(const std::vector<std::vector<double>>& chains) {
  const std::size_t j = chains.size();
  if (j < 2) throw std::invalid_argument("psrf requires >= 2 chains");
  const std::size_t len = chains.front().size();
  if (len < 10) throw std::invalid_argument("psrf requires chains of >= 10");
  for (const auto& c : chains)
    if (c.size() != len)
      throw std::invalid_argument("psrf requires equal-length chains");

  std::vector<double> means(j);
  double w = 0.0;
  for (std::size_t k = 0; k < j; ++k) {
    means[k] = stats::mean(chains[k]);
    w += stats::sample_variance(chains[k]);
  }
  w /= static_cast<double>(j);
  const double b =
      static_cast<double>(len) * stats::sample_variance(means);
  if (w <= 0.0) return {1.0, true};
  const double l = static_cast<double>(len);
  const double v = (1.0 - 1.0 / l) * w + b / l;
  return {std::sqrt(v / w), false};
}

PsrfResult psrf_split(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> split;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    split.emplace_back(c.begin(), c.begin() + h);
    split.emplace_back(c.begin() + h, c.begin() + 2 * h);
  }
  return psrf(split);
}

EssResult ess(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 10) throw std::invalid_argument("ess requires >= 10 draws");
  const double m = stats::mean(draws);
  double c0 = 0.0;
  for (double v : draws) c0 += (v - m) * (v - m);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return {0.0, true};

  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t)
      s += (draws[t] - m) * (draws[t + lag] - m);
    return s / static_cast<double>(n);
  };

  // Geyer initial monotone sequence: sum even-odd autocovariance pairs
  // Gamma_m = acov(2m) + acov(2m+1) while positive and non-increasing;
  // 1 + 2 sum rho_k = -1 + 2 sum Gamma_m / c0.
  double gamma_sum = 0.0;
  double prev_pair = INFINITY;
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    double pair = acov(k) + acov(k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    gamma_sum += pair;
    prev_pair = pair;
  }
  const double denom = -1.0 + 2.0 * gamma_sum / c0;
  const double nd = static_cast<double>(n);
  const double value = denom > 0.0 ? std::clamp(nd / denom, 0.0, nd) : nd;
  return {value, false};
}

namespace {

ParameterSummary summarize_one(const std::string& name,
                               const std::vector<std::vector<double>>& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  ParameterSummary s;
  s.name = name;
  s.mean = stats::mean(all);
  s.sd = all.size() > 1 ? stats::sd(all) : 0.0;
  s.median = stats::quantile(all, 0.5);
  s.ci_low = stats::quantile(all, 0.025);
  s.ci_high = stats::quantile(all, 0.975);
  s.psrf = chains.size() >= 2 ? psrf(chains).value
                              : std::numeric_limits<double>::quiet_NaN();
  double e = 0.0;
  for (const auto& c : chains) e += ess(c).value;
  s.ess = e;
  return s;
}

}  // namespace

ChainSummary summarize(const std::vector<mcmc::DrawStore>& stores,
                       const std::vector<Functional>& functionals) {
  if (stores.empty()) throw std::invalid_argument("summarize: empty store");
  ChainSummary out;
  for (const auto& st : stores) {
    out.accept_h.push_back(st.accept_h);
    out.accept_prog.push_back(st.accept_prog);
    out.accept_psi.push_back(st.accept_psi);
    out.accept_zhp.push_back(st.accept_zhp);
  }

  auto gather = [&](auto&& get, const std::string& name) {
    std::vector<std::vector<double>> chains;
    for (const auto& st : stores) {
      std::vector<double> c(st.size());
      for (std::size_t t = 0; t < st.size(); ++t) c[t] = get(st, t);
      chains.push_back(std::move(c));
    }
    out.parameters.push_back(summarize_one(name, chains));
  };

  gather([](const mcmc::DrawStore& s, std::size_t t) { return s.lambda_h[t]; },
         "lambda_h");
  gather(
      [](const mcmc::DrawStore& s, std::size_t t) { return s.lambda_prog[t]; },
      "lambda_prog");
  gather([](const mcmc::DrawStore& s, std::size_t t) { return s.psi[t]; },
         "psi");
  gather([](const mcmc::DrawStore& s, std::size_t t) { return s.beta[t]; },
         "beta");
  for (const auto& f : functionals)
    gather(
        [&f](const mcmc::DrawStore& s, std::size_t t) {
          return f.eval(s.lambda_h[t], s.lambda_prog[t], s.psi[t], s.beta[t]);
        },
        f.name);
  return out;
}

Functional functional_mean_sojourn(double shape_prog) {
  return {"mean_sojourn", [shape_prog](double, double lp, double, double) {
            return mean_sojourn(WeibullRS(lp, shape_prog));
          }};
}

Functional functional_hazard_at(double age, double t0, double shape_h) {
  return {"hazard_age_" + std::to_string(age),
          [age, t0, shape_h](double lh, double, double, double) {
            const double x = age - t0;
            return lh * shape_h * pow_shape(x, shape_h - 1.0);
          }};
}

Functional functional_onset_risk_by(double age, double t0, double shape_h) {
  return {"onset_risk_by_" + std::to_string(age),
          [age, t0, shape_h](double lh, double, double, double) {
            return weibull_cdf(age - t0, WeibullRS(lh, shape_h));
          }};
}

}  // namespace nathist::diag
