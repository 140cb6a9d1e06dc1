#pragma once

#include <cmath>
#include <stdexcept>

#include "nathist/rng.hpp"

namespace nathist {

// x^a with fast paths for the shape values used in practice. Shapes are fixed
// per fit, so these branches predict perfectly in hot loops.
inline double pow_shape(double x, double a) {
  if (a == 2.0) return x * x;
  if (a == 1.0) return x;
  if (a == 1.5) return x * std::sqrt(x);
  if (a == 3.0) return x * x * x;
  if (a == 2.5) return x * x * std::sqrt(x);
  if (a == 4.0) {
    const double x2 = x * x;
    return x2 * x2;
  }
  if (a == 5.0) {
    const double x2 = x * x;
    return x2 * x2 * x;
  }
  return std::pow(x, a);
}

// Weibull in rate-shape form: density f(x) = rate * shape * x^(shape-1) *
// exp(-rate * x^shape), survival S(x) = exp(-rate * x^shape).
struct WeibullRS {
  double rate;
  double shape;

  WeibullRS(double rate_, double shape_) : rate(rate_), shape(shape_) {
    if (!(rate > 0.0) || !(shape > 0.0))
      throw std::domain_error("WeibullRS requires rate > 0 and shape > 0");
  }

  // Cumulative hazard rate * x^shape; the natural working scale.
  double cum_hazard(double x) const { return rate * pow_shape(x, shape); }
};

inline double weibull_logpdf(double x, const WeibullRS& w) {
  if (!(x > 0.0)) throw std::domain_error("weibull_logpdf requires x > 0");
  return std::log(w.rate) + std::log(w.shape) +
         (w.shape - 1.0) * std::log(x) - w.cum_hazard(x);
}

inline double weibull_logsurv(double x, const WeibullRS& w) {
  if (!(x >= 0.0)) throw std::domain_error("weibull_logsurv requires x >= 0");
  return -w.cum_hazard(x);
}

inline double weibull_surv(double x, const WeibullRS& w) {
  return std::exp(-w.cum_hazard(x));
}

inline double weibull_cdf(double x, const WeibullRS& w) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-w.cum_hazard(x));
}

inline double weibull_inv_cdf(double u, const WeibullRS& w) {
  if (!(u >= 0.0 && u < 1.0))
    throw std::domain_error("weibull_inv_cdf requires u in [0,1)");
  return std::pow(-std::log1p(-u) / w.rate, 1.0 / w.shape);
}

// Gamma(1 + 1/shape) * rate^(-1/shape)
inline double mean_sojourn(const WeibullRS& w) {
  return std::tgamma(1.0 + 1.0 / w.shape) *
         std::pow(w.rate, -1.0 / w.shape);
}

inline double sample_weibull(Rng& rng, const WeibullRS& w) {
  return std::pow(rng.exponential(1.0) / w.rate, 1.0 / w.shape);
}

// Draw from F truncated to (l, u]. Equivalent to v ~ U(F(l), F(u)),
// F^{-1}(v), but carried out on the cumulative-hazard scale so it stays
// stable when both endpoints are deep in a tail.
inline double sample_trunc_weibull(Rng& rng, const WeibullRS& w, double l,
                                   double u) {
  if (!(l >= 0.0 && l < u))
    throw std::domain_error("sample_trunc_weibull requires 0 <= l < u");
  const double hl = w.cum_hazard(l);
  const double hu = std::isinf(u) ? INFINITY : w.cum_hazard(u);
  // interval mass = exp(-hl) - exp(-hu) = exp(-hl) * (1 - exp(-(hu-hl)))
  const double log_mass = -hl + std::log(-std::expm1(-(hu - hl)));
  if (!(log_mass >= -690.77552789821368)) {  // log(1e-300)
    throw std::runtime_error(
        "sample_trunc_weibull: truncation interval mass underflows");
  }
  // h ~ Exp(1) restricted to (hl, hu]
  const double h = hl - std::log1p(rng.uniform() * std::expm1(-(hu - hl)));
  double x = std::pow(h / w.rate, 1.0 / w.shape);
  if (x <= l) x = std::nextafter(l, u);  // guard half-open interval
  if (x > u) x = u;
  return x;
}

}  // namespace nathist
