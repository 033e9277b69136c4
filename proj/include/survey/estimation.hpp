#pragma once

#include "designs.hpp"
#include "errors.hpp"
#include "population.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace survey {

//! Right-continuous step function with positive jumps, F(t) = mass of all
//! jumps at locations <= t. Tied locations are merged into one jump.
class WeightedStepFunction
{
public:
  WeightedStepFunction() = default;

  //! Jumps of size weights[i] / divisor at values[i].
  WeightedStepFunction(std::span<const double> values,
                       std::span<const double> weights,
                       double divisor)
    : divisor_(divisor)
  {
    if (values.size() != weights.size())
      throw ParameterError("values and weights differ in length");
    if (!(divisor > 0.0))
      throw WeightError("step function divisor must be positive");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b];
    });
    double raw = 0.0;
    for (std::size_t idx : order) {
      raw += weights[idx];
      if (!locations_.empty() && locations_.back() == values[idx]) {
        cumulative_.back() = raw;
      } else {
        locations_.push_back(values[idx]);
        cumulative_.push_back(raw);
      }
    }
    for (double& c : cumulative_)
      c /= divisor;
    total_ = cumulative_.empty() ? 0.0 : cumulative_.back();
  }

  //! Same, divided by the sum of the weights so that the total mass is
  //! exactly one.
  static WeightedStepFunction normalized(std::span<const double> values,
                                         std::span<const double> weights)
  {
    const double raw = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(raw > 0.0))
      throw WeightError("cannot normalize a step function with no mass");
    WeightedStepFunction f(values, weights, raw);
    f.total_ = 1.0;
    f.cumulative_.back() = 1.0;
    return f;
  }

  double operator()(double t) const
  {
    const auto it = std::upper_bound(locations_.begin(), locations_.end(), t);
    if (it == locations_.begin())
      return 0.0;
    return cumulative_[static_cast<std::size_t>(it - locations_.begin()) - 1];
  }

  //! inf{t : F(t) >= alpha}
  double quantile(double alpha) const
  {
    if (locations_.empty() || total_ < alpha)
      throw QuantileUndefinedError("total mass below the requested level");
    const auto it =
      std::lower_bound(cumulative_.begin(), cumulative_.end(), alpha);
    return locations_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  //! Weighted analogue of the interpolating sample quantile: with total
  //! weight T = divisor, the order 1 + (T - 1) alpha is split into its
  //! integer part and fraction, and the values whose cumulative weight
  //! first reaches floor(order) and floor(order) + 1 are interpolated.
  //! With unit weights this is the usual linear-interpolation quantile.
  double interpolated_quantile(double alpha) const
  {
    if (locations_.empty())
      throw QuantileUndefinedError("quantile of an empty step function");
    const double T = divisor_;
    const double order = 1.0 + (T - 1.0) * alpha;
    const double low = std::max(std::floor(order), 1.0);
    const double high = std::min(low + 1.0, T);
    const double frac = order - std::floor(order);
    auto at_weight = [&](double w) {
      const double level = w / T;
      const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), level);
      if (it == cumulative_.end())
        return locations_.back();
      return locations_[static_cast<std::size_t>(it - cumulative_.begin())];
    };
    const double a = at_weight(low), b = at_weight(high);
    if (a == b)
      return a;
    return std::clamp(a + frac * (b - a), a, b);
  }

  const std::vector<double>& jump_locations() const noexcept
  {
    return locations_;
  }
  const std::vector<double>& cumulative_mass() const noexcept
  {
    return cumulative_;
  }
  double total_mass() const noexcept { return total_; }
  double divisor() const noexcept { return divisor_; }

private:
  std::vector<double> locations_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
  double divisor_ = 1.0;
};

//! Which generalized inverse estimators use.
enum class QuantileRule
{
  Infimum,      // inf{t : F(t) >= alpha}
  Interpolated, // WeightedStepFunction::interpolated_quantile
};

namespace detail {

inline std::vector<double> sampled_values(const SampleDraw& draw,
                                          std::span<const double> y)
{
  std::vector<double> v(draw.included.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    v[k] = y[draw.included[k]];
  return v;
}

inline std::vector<double> inverse_pi(const SampleDraw& draw)
{
  std::vector<double> w(draw.pi_of_included.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double p = draw.pi_of_included[k];
    if (!(p > 0.0))
      throw WeightError("inclusion probability must be positive");
    w[k] = 1.0 / p;
  }
  return w;
}

} // namespace detail

//! N-hat = sum over the sample of 1 / pi_i.
inline double estimated_population_size(const SampleDraw& draw)
{
  const auto w = detail::inverse_pi(draw);
  return std::accumulate(w.begin(), w.end(), 0.0);
}

//! Unweighted empirical cdf of the whole population.
inline WeightedStepFunction population_ecdf(std::span<const double> y)
{
  const std::vector<double> ones(y.size(), 1.0);
  return WeightedStepFunction::normalized(y, ones);
}

//! Horvitz-Thompson cdf: mass 1 / (N pi_i) at each sampled y_i.
inline WeightedStepFunction ht_ecdf(const SampleDraw& draw,
                                    std::span<const double> y,
                                    std::size_t N)
{
  const auto v = detail::sampled_values(draw, y);
  const auto w = detail::inverse_pi(draw);
  return WeightedStepFunction(v, w, static_cast<double>(N));
}

//! Hajek cdf: mass (1 / pi_i) / N-hat at each sampled y_i.
inline WeightedStepFunction hajek_ecdf(const SampleDraw& draw,
                                       std::span<const double> y)
{
  if (draw.included.empty())
    throw WeightError("empty sample: N-hat is zero");
  const auto v = detail::sampled_values(draw, y);
  const auto w = detail::inverse_pi(draw);
  return WeightedStepFunction::normalized(v, w);
}

inline double weighted_quantile(const WeightedStepFunction& F,
                                double alpha,
                                QuantileRule rule = QuantileRule::Infimum)
{
  return rule == QuantileRule::Infimum ? F.quantile(alpha)
                                       : F.interpolated_quantile(alpha);
}

//! phi(F) = F(beta * F^{-1}(alpha)).
inline double poverty_rate(const WeightedStepFunction& F,
                           double alpha,
                           double beta,
                           QuantileRule rule = QuantileRule::Infimum)
{
  return F(beta * weighted_quantile(F, alpha, rule));
}

//! inf{t : F(t) >= alpha} for a nondecreasing callable F, found by
//! bisection on [lo, hi]; F(hi) must reach alpha.
template<class Cdf>
double generalized_inverse(const Cdf& F, double alpha, double lo, double hi)
{
  if (F(hi) < alpha)
    throw QuantileUndefinedError("cdf does not reach alpha on the bracket");
  if (F(lo) >= alpha)
    return lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi)
      break;
    (F(mid) >= alpha ? hi : lo) = mid;
  }
  return hi;
}

//! phi for any nondecreasing callable; the quantile is bracketed in [lo, hi].
template<class Cdf>
double poverty_rate(const Cdf& F, double alpha, double beta, double lo,
                    double hi)
{
  return F(beta * generalized_inverse(F, alpha, lo, hi));
}

//! phi'_F(h) = -beta f(beta q) / f(q) h(q) + h(beta q), q = F^{-1}(alpha).
inline double hadamard_direction_value(double f_q,
                                       double f_beta_q,
                                       double h_q,
                                       double h_beta_q,
                                       double beta)
{
  if (!(f_q > 0.0))
    throw UndefinedDerivativeError("density at the quantile is zero");
  return -beta * (f_beta_q / f_q) * h_q + h_beta_q;
}

enum class Weighting
{
  HT,
  HJ
};

//! 0.79 R n_s^{-1/5}, R the interquartile range of F.
inline double kde_bandwidth(const WeightedStepFunction& F,
                           std::size_t n_s,
                           QuantileRule rule = QuantileRule::Infimum)
{
  const double iqr =
    weighted_quantile(F, 0.75, rule) - weighted_quantile(F, 0.25, rule);
  if (!(iqr > 0.0))
    throw ParameterError("interquartile range is zero: degenerate bandwidth");
  return 0.79 * iqr * std::pow(static_cast<double>(n_s), -0.2);
}

//! Gaussian-kernel density estimate from a weighted sample, divided by
//! N-hat (HJ) or N (HT). Precomputes the weights and the bandwidth so that
//! evaluating at several points is cheap.
class WeightedKde
{
public:
  WeightedKde(const SampleDraw& draw,
              std::span<const double> y,
              std::size_t N,
              Weighting mode,
              std::optional<double> bandwidth = std::nullopt,
              QuantileRule rule = QuantileRule::Infimum)
    : values_(detail::sampled_values(draw, y))
    , weights_(detail::inverse_pi(draw))
  {
    if (values_.empty())
      throw WeightError("kernel density needs a nonempty sample");
    const double n_hat = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    divisor_ = mode == Weighting::HJ ? n_hat : static_cast<double>(N);
    if (bandwidth) {
      bandwidth_ = *bandwidth;
    } else {
      if (values_.size() < 2)
        throw ParameterError("kernel density needs at least two points");
      const auto F = mode == Weighting::HJ
                       ? WeightedStepFunction::normalized(values_, weights_)
                       : WeightedStepFunction(
                           values_, weights_, static_cast<double>(N));
      bandwidth_ = kde_bandwidth(F, values_.size(), rule);
    }
    if (!(bandwidth_ > 0.0))
      throw ParameterError("bandwidth must be positive");
  }

  double operator()(double t) const
  {
    constexpr double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi *
                                    std::numbers::sqrt2;
    double acc = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const double u = (t - values_[k]) / bandwidth_;
      acc += weights_[k] * std::exp(-0.5 * u * u);
    }
    return acc * inv_sqrt_2pi / (divisor_ * bandwidth_);
  }

  double bandwidth() const noexcept { return bandwidth_; }

private:
  std::vector<double> values_;
  std::vector<double> weights_;
  double divisor_ = 1.0;
  double bandwidth_ = 0.0;
};

inline double kde_density(const SampleDraw& draw,
                          std::span<const double> y,
                          std::size_t N,
                          double t,
                          Weighting mode,
                          std::optional<double> bandwidth = std::nullopt)
{
  return WeightedKde(draw, y, N, mode, bandwidth)(t);
}

//! A process evaluated on a grid.
struct ProcessPath
{
  std::vector<double> grid;
  std::vector<double> values;
};

enum class ProcessKind
{
  HT_vs_FN,
  HT_vs_F,
  HJ_vs_FN,
  HJ_vs_F,
  G_pi, // (sqrt(n)/N) sum xi_i/pi_i (1{Y_i <= t} - F(t))
  Y_N,  // (sqrt(n)/N) sum (xi_i/pi_i - 1)(1{Y_i <= t} - F(t))
};

//! sqrt(n) (estimator - center) on the grid, n the design-expected size.
//! `law` is required for every kind centred by F.
inline ProcessPath process_path(const SampleDraw& draw,
                                const Population& population,
                                double expected_n,
                                std::span<const double> grid,
                                ProcessKind which,
                                const SuperPopulationLaw* law = nullptr)
{
  const std::size_t N = population.size();
  const double Nd = static_cast<double>(N);
  const double root_n = std::sqrt(expected_n);
  const bool needs_law = which != ProcessKind::HT_vs_FN &&
                         which != ProcessKind::HJ_vs_FN;
  if (needs_law && law == nullptr)
    throw ParameterError("process centred by F needs a super-population law");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw ParameterError("grid must be sorted");

  ProcessPath path{ { grid.begin(), grid.end() }, std::vector<double>(grid.size()) };
  switch (which) {
    case ProcessKind::HT_vs_FN:
    case ProcessKind::HT_vs_F: {
      const auto F_ht = ht_ecdf(draw, population.y, N);
      const auto F_N = population_ecdf(population.y);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double c = which == ProcessKind::HT_vs_FN ? F_N(grid[k])
                                                        : law->cdf(grid[k]);
        path.values[k] = root_n * (F_ht(grid[k]) - c);
      }
      break;
    }
    case ProcessKind::HJ_vs_FN:
    case ProcessKind::HJ_vs_F: {
      const auto F_hj = hajek_ecdf(draw, population.y);
      const auto F_N = population_ecdf(population.y);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double c = which == ProcessKind::HJ_vs_FN ? F_N(grid[k])
                                                        : law->cdf(grid[k]);
        path.values[k] = root_n * (F_hj(grid[k]) - c);
      }
      break;
    }
    case ProcessKind::G_pi:
    case ProcessKind::Y_N: {
      const auto w = detail::inverse_pi(draw);
      std::vector<double> marked(N, 0.0);
      for (std::size_t k = 0; k < draw.included.size(); ++k)
        marked[draw.included[k]] = w[k];
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double Ft = law->cdf(grid[g]);
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
          const double weight =
            which == ProcessKind::G_pi ? marked[i] : marked[i] - 1.0;
          if (weight != 0.0)
            acc += weight * ((population.y[i] <= grid[g] ? 1.0 : 0.0) - Ft);
        }
        path.values[g] = root_n / Nd * acc;
      }
      break;
    }
  }
  return path;
}

} // namespace survey
