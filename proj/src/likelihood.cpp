#include "nathist/likelihood.hpp"

#include <cmath>
#include <sstream>

#include "nathist/stats.hpp"

namespace nathist {

namespace {

// Gauss-Kronrod 7-15 pair (QUADPACK abscissae) with adaptive bisection.
// Per-interval error taken as |K15 - G7|, which is conservative for the
// smooth bounded integrands used here.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkCell {
  double integral;
  double error;
};

template <typename F>
GkCell gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double k = kWgk[7] * fc;
  double g = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double x = h * kXgk[j];
    const double s = f(c - x) + f(c + x);
    k += kWgk[j] * s;
    if (j % 2 == 1) g += kWg[j / 2] * s;
  }
  return {k * h, std::abs(k - g) * h};
}

template <typename F>
void gk_adapt(const F& f, double a, double b, GkCell cell, double tol,
              int depth, double& integral, double& error) {
  if (cell.error <= tol || depth <= 0) {
    integral += cell.integral;
    error += cell.error;
    return;
  }
  const double c = 0.5 * (a + b);
  gk_adapt(f, a, c, gk15(f, a, c), 0.5 * tol, depth - 1, integral, error);
  gk_adapt(f, c, b, gk15(f, c, b), 0.5 * tol, depth - 1, integral, error);
}

// abs_tol-driven adaptive integration; `error` returns the accumulated
// |K - G| bound
template <typename F>
double gk_integrate(const F& f, double a, double b, double abs_tol,
                    double& error) {
  double integral = 0.0;
  error = 0.0;
  gk_adapt(f, a, b, gk15(f, a, b), abs_tol, 24, integral, error);
  return integral;
}

// negative screens at ages >= z
int false_negatives(const IndividualRecord& rec, double z) {
  int m = 0;
  for (int j = 0; j < rec.n_screens(); ++j)
    if (rec.screen_results[j] == 0 && rec.screen_ages[j] >= z) ++m;
  return m;
}

double screen_log_terms(int m_plus, int m_minus, double beta) {
  double t = 0.0;
  if (m_plus > 0) t += m_plus * std::log(beta);
  if (m_minus > 0) t += m_minus * std::log1p(-beta);
  return t;
}

}  // namespace

ScreenCounts screen_counts(const IndividualRecord& rec, const LatentState& z) {
  ScreenCounts c;
  for (auto r : rec.screen_results) c.m_plus += r;
  if (z.has_onset()) c.m_minus = false_negatives(rec, z.onset_age);
  return c;
}

double latent_logdensity(const IndividualRecord& rec, const LatentState& z,
                         const Params& p, double t0) {
  if (!z.has_onset()) return -p.onset.cum_hazard(rec.censor_age - t0);
  if (!(z.onset_age > t0 && z.onset_age <= rec.censor_age))
    throw std::domain_error("latent_logdensity: onset age outside (t0, c]");
  return weibull_logpdf(z.onset_age - t0, p.onset) +
         (z.indolent ? std::log(p.psi) : std::log1p(-p.psi));
}

double obs_logdensity(const IndividualRecord& rec, const LatentState& z,
                      const Params& p) {
  switch (rec.group) {
    case Group::Censored: {
      if (!z.has_onset()) return 0.0;  // point mass at the censoring age
      double t = screen_log_terms(0, false_negatives(rec, z.onset_age),
                                  p.beta);
      if (!z.indolent)
        t += -p.progression.cum_hazard(rec.censor_age - z.onset_age);
      return t;
    }
    case Group::ScreenDetected: {
      if (!z.has_onset()) return -INFINITY;  // positive screen from state H
      if (p.beta == 0.0) return -INFINITY;
      double t = screen_log_terms(1, false_negatives(rec, z.onset_age),
                                  p.beta);
      if (!z.indolent)
        t += -p.progression.cum_hazard(rec.censor_age - z.onset_age);
      return t;
    }
    case Group::IntervalDetected: {
      // observed clinical onset: requires a progressive pre-clinical phase
      if (!z.has_onset() || z.indolent) return -INFINITY;
      const double sojourn = rec.t_pc - z.onset_age;
      if (!(sojourn > 0.0)) return -INFINITY;
      return screen_log_terms(0, false_negatives(rec, z.onset_age), p.beta) +
             weibull_logpdf(sojourn, p.progression);
    }
  }
  return -INFINITY;
}

double truncation_survival_progressive(double entry_age,
                                       const WeibullRS& onset,
                                       const WeibullRS& progression,
                                       double t0) {
  const double E = entry_age - t0;
  if (!(E > 0.0))
    throw std::domain_error("truncation normalizer requires entry age > t0");

  const double upper = weibull_cdf(E, onset);
  double integral = 0.0;
  if (upper > 0.0) {
    // substituting u = F_H(s) turns int f_H(s) S_prog(E - s) ds into a
    // bounded monotone integrand on (0, F_H(E)), robust even when the
    // onset density is sharply peaked
    auto integrand = [&](double u) {
      const double s = weibull_inv_cdf(u, onset);
      return weibull_surv(std::max(E - s, 0.0), progression);
    };
    double err = 0.0;
    integral = gk_integrate(integrand, 0.0, upper, 1e-12, err);
    if (!(err <= std::max(1e-10, 1e-8 * std::abs(integral)))) {
      std::ostringstream msg;
      msg << "truncation normalizer quadrature did not converge: entry age "
          << entry_age << ", onset rate " << onset.rate << ", progression rate "
          << progression.rate << ", error estimate " << err;
      throw std::runtime_error(msg.str());
    }
  }
  const double K = weibull_surv(E, onset) + integral;
  return std::min(K, 1.0);
}

double truncation_log_normalizer(double entry_age, const Params& p,
                                 double t0) {
  const double K =
      truncation_survival_progressive(entry_age, p.onset, p.progression, t0);
  return truncation_log_normalizer_from_K(K, p.psi);
}

std::vector<double> truncation_K_table(const std::vector<double>& entry_ages,
                                       const WeibullRS& onset,
                                       const WeibullRS& progression,
                                       double t0) {
  std::vector<double> K(entry_ages.size());
  for (std::size_t i = 0; i < entry_ages.size(); ++i)
    K[i] = truncation_survival_progressive(entry_ages[i], onset, progression,
                                           t0);
  return K;
}

double individual_log_target(const IndividualRecord& rec, const LatentState& z,
                             const Params& p, double t0) {
  return latent_logdensity(rec, z, p, t0) + obs_logdensity(rec, z, p) -
         truncation_log_normalizer(rec.entry_age(), p, t0);
}

double log_prior(const Params& p, const PriorSpec& prior) {
  return stats::gamma_logpdf(p.onset.rate, prior.a_h, prior.b_h) +
         stats::gamma_logpdf(p.progression.rate, prior.a_prog, prior.b_prog) +
         stats::beta_logpdf(p.psi, prior.a_psi, prior.b_psi) +
         stats::beta_logpdf(p.beta, prior.a_beta, prior.b_beta);
}

}  // namespace nathist
