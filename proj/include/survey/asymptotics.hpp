#pragma once

#include "designs.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "population.hpp"

#include <algorithm>
#include <cmath>

namespace survey {

enum class CovarianceForm
{
  HT_vs_FN, // mu1 F(s^t) + mu2 F(s)F(t)
  HT_vs_F,  // (mu1 + lambda) F(s^t) + (mu2 - lambda) F(s)F(t)
  HJ_vs_FN, // mu1 (F(s^t) - F(s)F(t))
  HJ_vs_F,  // (mu1 + lambda) (F(s^t) - F(s)F(t))
};

//! Covariance of the limiting Gaussian process at (s, t) given F(s), F(t).
inline double limit_covariance(const DesignConstants& c,
                               CovarianceForm form,
                               double Fs,
                               double Ft)
{
  const double Fmin = std::min(Fs, Ft);
  switch (form) {
    case CovarianceForm::HT_vs_FN:
      return c.mu_pi1 * Fmin + c.mu_pi2 * (Fs * Ft);
    case CovarianceForm::HT_vs_F:
      return c.gamma_pi1 * Fmin + c.gamma_pi2 * (Fs * Ft);
    case CovarianceForm::HJ_vs_FN:
      return c.mu_pi1 * (Fmin - (Fs * Ft));
    case CovarianceForm::HJ_vs_F:
      return c.gamma_pi1 * (Fmin - (Fs * Ft));
  }
  return 0.0;
}

inline double limit_covariance(const DesignConstants& c,
                               const SuperPopulationLaw& law,
                               CovarianceForm form,
                               double s,
                               double t)
{
  return limit_covariance(c, form, law.cdf(s), law.cdf(t));
}

//! Ingredients of the poverty-rate variances: alpha, phi = F(beta q) and
//! slope = beta f(beta q) / f(q), q = F^{-1}(alpha).
struct PovertyInputs
{
  double alpha;
  double phi;
  double slope;
};

inline PovertyInputs poverty_inputs(const SuperPopulationLaw& law,
                                    double alpha,
                                    double beta)
{
  const double q = law.quantile(alpha);
  const double f_q = law.density(q);
  if (!(f_q > 0.0))
    throw UndefinedDerivativeError("density at the alpha-quantile is zero");
  return { alpha, law.poverty_rate(alpha, beta),
           beta * law.density(beta * q) / f_q };
}

//! Asymptotic variance of sqrt(n)(phi(F^HT) - phi(F)).
inline double poverty_variance_ht(double gamma1,
                                  double gamma2,
                                  const PovertyInputs& in)
{
  const double a = in.alpha, phi = in.phi, r = in.slope;
  return r * r * (gamma1 * a + gamma2 * a * a) + gamma1 * phi +
         gamma2 * phi * phi - 2.0 * r * phi * (gamma1 + gamma2 * a);
}

//! Asymptotic variance of sqrt(n)(phi(F^HJ) - phi(F)).
inline double poverty_variance_hj(double gamma1, const PovertyInputs& in)
{
  const double a = in.alpha, phi = in.phi, r = in.slope;
  return r * r * gamma1 * a * (1.0 - a) + gamma1 * phi * (1.0 - phi) -
         2.0 * r * phi * gamma1 * (1.0 - a);
}

inline double poverty_variance_ht(const DesignConstants& c,
                                  const SuperPopulationLaw& law,
                                  double alpha,
                                  double beta)
{
  return poverty_variance_ht(c.gamma_pi1, c.gamma_pi2,
                             poverty_inputs(law, alpha, beta));
}

inline double poverty_variance_hj(const DesignConstants& c,
                                  const SuperPopulationLaw& law,
                                  double alpha,
                                  double beta)
{
  return poverty_variance_hj(c.gamma_pi1, poverty_inputs(law, alpha, beta));
}

//! Plug-in estimate of phi and of its asymptotic variance from one sample.
struct PluginEstimate
{
  double phi = 0.0;
  double quantile = 0.0;
  double f_quantile = 0.0;
  double f_beta_quantile = 0.0;
  double variance = 0.0;
};

//! Weighted ecdf, phi-hat, kernel densities and the gamma constants go into
//! the HT or HJ variance formula. The weighting of the ecdf and of the
//! density estimate follow `mode`.
inline PluginEstimate plugin_poverty_estimate(const SampleDraw& draw,
                                              std::span<const double> y,
                                              std::size_t N,
                                              const DesignConstants& c,
                                              double alpha,
                                              double beta,
                                              Weighting mode,
                                              QuantileRule rule = QuantileRule::Infimum)
{
  const auto F = mode == Weighting::HT ? ht_ecdf(draw, y, N)
                                       : hajek_ecdf(draw, y);
  PluginEstimate est;
  est.quantile = weighted_quantile(F, alpha, rule);
  est.phi = F(beta * est.quantile);
  const WeightedKde kde(draw, y, N, mode, std::nullopt, rule);
  est.f_quantile = kde(est.quantile);
  est.f_beta_quantile = kde(beta * est.quantile);
  if (!(est.f_quantile > 0.0))
    throw UndefinedDerivativeError("estimated density at the quantile is zero");
  const PovertyInputs in{ alpha, est.phi,
                          beta * est.f_beta_quantile / est.f_quantile };
  est.variance = mode == Weighting::HT
                   ? poverty_variance_ht(c.gamma_pi1, c.gamma_pi2, in)
                   : poverty_variance_hj(c.gamma_pi1, in);
  return est;
}

inline double plugin_poverty_variance(const SampleDraw& draw,
                                      std::span<const double> y,
                                      std::size_t N,
                                      const DesignConstants& c,
                                      double alpha,
                                      double beta,
                                      Weighting mode,
                                      QuantileRule rule = QuantileRule::Infimum)
{
  return plugin_poverty_estimate(draw, y, N, c, alpha, beta, mode, rule).variance;
}

//! Two-sided 95% normal quantile used for Wald intervals.
inline constexpr double wald_z95 = 1.959963984540054;

} // namespace survey
