#pragma once

#include "errors.hpp"
#include "poisson_binomial.hpp"
#include "random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <variant>
#include <vector>

namespace survey {

namespace design {

//! Simple random sampling without replacement of fixed size n.
struct Srswor
{
  std::size_t n;
};

//! Independent inclusion with common probability p.
struct Bernoulli
{
  double p;
};

//! Independent inclusion with unit-specific probabilities pi.
struct Poisson
{
  std::vector<double> pi;
};

//! Poisson sampling with working probabilities p conditioned on size n.
struct Rejective
{
  std::vector<double> p;
  std::size_t n;
};

} // namespace design

//! One realized sample.
struct SampleDraw
{
  std::size_t N = 0;
  std::vector<std::uint8_t> indicators;
  std::vector<std::size_t> included;
  std::vector<double> pi_of_included;

  std::size_t size() const noexcept { return included.size(); }
};

//! Constants entering the limit covariances and the poverty-rate variances.
struct DesignConstants
{
  double lambda = 0.0;
  double mu_pi1 = 0.0;
  double mu_pi2 = 0.0;
  double gamma_pi1 = 0.0;
  double gamma_pi2 = 0.0;
  double d_N = 0.0;

  static DesignConstants from_mu(double lambda, double mu1, double mu2,
                                 double d_N = 0.0)
  {
    return { lambda, mu1, mu2, mu1 + lambda, mu2 - lambda, d_N };
  }
};

namespace detail {

//! Rejective working probabilities rescaled in odds so that they sum to n.
//! The conditional law only depends on the odds up to a common factor, and
//! this scale keeps P(S = n) away from underflow.
inline std::vector<double> normalize_rejective(std::span<const double> p,
                                               std::size_t n)
{
  const std::size_t N = p.size();
  std::vector<double> log_odds(N);
  double spread = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    log_odds[i] = std::log(p[i]) - std::log1p(-p[i]);
    spread = std::max(spread, std::abs(log_odds[i]));
  }
  auto total = [&](double shift) {
    double s = 0.0;
    for (double lo : log_odds)
      s += 1.0 / (1.0 + std::exp(-(lo + shift)));
    return s;
  };
  const double target = static_cast<double>(n);
  double lo = -spread - 60.0, hi = spread + 60.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < target ? lo : hi) = mid;
  }
  const double shift = 0.5 * (lo + hi);
  std::vector<double> out(N);
  for (std::size_t i = 0; i < N; ++i)
    out[i] = 1.0 / (1.0 + std::exp(-(log_odds[i] + shift)));
  return out;
}

struct RejectiveState
{
  std::vector<double> p; // normalized working probabilities
  std::size_t n = 0;
  SplitPoissonBinomial dp;
  double p_size_n = 0.0; // P(S = n)
  std::vector<double> pi;
};

inline std::shared_ptr<const RejectiveState>
build_rejective(std::span<const double> p_in, std::size_t n)
{
  auto st = std::make_shared<RejectiveState>();
  st->n = n;
  st->p = normalize_rejective(p_in, n);
  st->dp = SplitPoissonBinomial(st->p, n);
  st->p_size_n = st->dp.total(n);
  if (!(st->p_size_n > 0.0) || !std::isfinite(st->p_size_n))
    throw DegenerateDesignError("rejective design has P(S = n) == 0");
  const std::size_t N = st->p.size();
  st->pi.resize(N);
  for (std::size_t i = 0; i < N; ++i)
    st->pi[i] =
      st->p[i] * st->dp.total_without(i, n - 1) / st->p_size_n;
  return st;
}

} // namespace detail

class Design
{
public:
  using Kind = std::variant<design::Srswor,
                            design::Bernoulli,
                            design::Poisson,
                            design::Rejective>;

  Design(std::size_t N, Kind kind)
    : N_(N)
    , kind_(std::move(kind))
  {
    validate();
    if (const auto* r = std::get_if<design::Rejective>(&kind_))
      rejective_ = detail::build_rejective(r->p, r->n);
  }

  static Design srswor(std::size_t N, std::size_t n)
  {
    return Design(N, design::Srswor{ n });
  }
  static Design bernoulli(std::size_t N, double p)
  {
    return Design(N, design::Bernoulli{ p });
  }
  static Design poisson(std::vector<double> pi)
  {
    const std::size_t N = pi.size();
    return Design(N, design::Poisson{ std::move(pi) });
  }
  static Design rejective(std::vector<double> p, std::size_t n)
  {
    const std::size_t N = p.size();
    return Design(N, design::Rejective{ std::move(p), n });
  }

  std::size_t N() const noexcept { return N_; }
  const Kind& kind() const noexcept { return kind_; }

  bool is_fixed_size() const noexcept
  {
    return std::holds_alternative<design::Srswor>(kind_) ||
           std::holds_alternative<design::Rejective>(kind_);
  }
  bool is_rejective() const noexcept { return rejective_ != nullptr; }

  //! Fixed sample size, or the design-expected size sum(pi).
  double expected_size() const
  {
    if (const auto* s = std::get_if<design::Srswor>(&kind_))
      return static_cast<double>(s->n);
    if (const auto* r = std::get_if<design::Rejective>(&kind_))
      return static_cast<double>(r->n);
    if (const auto* b = std::get_if<design::Bernoulli>(&kind_))
      return b->p * static_cast<double>(N_);
    const auto& pi = std::get<design::Poisson>(kind_).pi;
    return std::accumulate(pi.begin(), pi.end(), 0.0);
  }

  //! Working probabilities of a rejective design rescaled to sum to n.
  const std::vector<double>& normalized_working_p() const
  {
    require_rejective();
    return rejective_->p;
  }

  double pi(std::size_t i) const
  {
    return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, design::Srswor>)
          return static_cast<double>(k.n) / static_cast<double>(N_);
        else if constexpr (std::is_same_v<K, design::Bernoulli>)
          return k.p;
        else if constexpr (std::is_same_v<K, design::Poisson>)
          return k.pi[i];
        else
          return rejective_->pi[i];
      },
      kind_);
  }

  std::vector<double> first_order_pi() const
  {
    if (rejective_)
      return rejective_->pi;
    if (const auto* po = std::get_if<design::Poisson>(&kind_))
      return po->pi;
    return std::vector<double>(N_, pi(0));
  }

  //! Matrix of pi_ij with pi_ii = pi_i.
  Eigen::MatrixXd second_order_pi() const
  {
    const auto pi1 = first_order_pi();
    Eigen::MatrixXd m(N_, N_);
    if (const auto* s = std::get_if<design::Srswor>(&kind_)) {
      const double n = static_cast<double>(s->n);
      const double Nd = static_cast<double>(N_);
      const double off = N_ > 1 ? n * (n - 1.0) / (Nd * (Nd - 1.0)) : 0.0;
      m.setConstant(off);
    } else if (rejective_) {
      fill_rejective_pairs(m);
    } else {
      for (std::size_t i = 0; i < N_; ++i)
        for (std::size_t j = 0; j < N_; ++j)
          m(i, j) = pi1[i] * pi1[j];
    }
    for (std::size_t i = 0; i < N_; ++i)
      m(i, i) = pi1[i];
    return m;
  }

  SampleDraw draw(RandomStream& rng) const
  {
    SampleDraw d;
    d.N = N_;
    d.indicators.assign(N_, 0);
    std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, design::Srswor>) {
          // selection sampling: unit i taken w.p. (slots left)/(units left)
          std::size_t need = k.n;
          for (std::size_t i = 0; i < N_ && need > 0; ++i) {
            if (rng.below(N_ - i) < need) {
              d.indicators[i] = 1;
              --need;
            }
          }
        } else if constexpr (std::is_same_v<K, design::Bernoulli>) {
          for (std::size_t i = 0; i < N_; ++i)
            d.indicators[i] = rng.uniform() < k.p;
        } else if constexpr (std::is_same_v<K, design::Poisson>) {
          for (std::size_t i = 0; i < N_; ++i)
            d.indicators[i] = rng.uniform() < k.pi[i];
        } else {
          draw_rejective_sequential(rng, d.indicators);
        }
      },
      kind_);
    finish(d);
    return d;
  }

  //! Rejective only: repeat Poisson(p) draws until the size equals n.
  SampleDraw draw_by_rejection(RandomStream& rng,
                               std::size_t max_attempts = 10'000'000) const
  {
    require_rejective();
    const auto& p = rejective_->p;
    SampleDraw d;
    d.N = N_;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
      d.indicators.assign(N_, 0);
      std::size_t size = 0;
      for (std::size_t i = 0; i < N_; ++i) {
        d.indicators[i] = rng.uniform() < p[i];
        size += d.indicators[i];
      }
      if (size == rejective_->n) {
        finish(d);
        return d;
      }
    }
    throw DegenerateDesignError("rejection sampler exhausted its attempts");
  }

private:
  void validate() const
  {
    if (N_ < 1)
      throw ParameterError("population size must be at least 1");
    std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, design::Srswor>) {
          if (k.n < 1 || k.n > N_)
            throw ParameterError("srswor requires 1 <= n <= N");
        } else if constexpr (std::is_same_v<K, design::Bernoulli>) {
          if (!(k.p > 0.0 && k.p < 1.0))
            throw ParameterError("bernoulli requires 0 < p < 1");
        } else if constexpr (std::is_same_v<K, design::Poisson>) {
          if (k.pi.size() != N_)
            throw ParameterError("poisson pi length must equal N");
          for (double v : k.pi)
            if (!(v > 0.0 && v <= 1.0))
              throw ParameterError("poisson requires 0 < pi_i <= 1");
        } else {
          if (k.p.size() != N_)
            throw ParameterError("rejective p length must equal N");
          if (k.n < 1 || k.n + 1 > N_)
            throw ParameterError("rejective requires 1 <= n <= N - 1");
          for (double v : k.p)
            if (!(v > 0.0 && v < 1.0))
              throw ParameterError("rejective requires 0 < p_i < 1");
        }
      },
      kind_);
  }

  void require_rejective() const
  {
    if (!rejective_)
      throw ParameterError("operation requires a rejective design");
  }

  void finish(SampleDraw& d) const
  {
    for (std::size_t i = 0; i < N_; ++i) {
      if (d.indicators[i]) {
        d.included.push_back(i);
        d.pi_of_included.push_back(pi(i));
      }
    }
  }

  void draw_rejective_sequential(RandomStream& rng,
                                 std::vector<std::uint8_t>& ind) const
  {
    const auto& st = *rejective_;
    std::size_t need = st.n;
    for (std::size_t i = 0; i < N_ && need > 0; ++i) {
      const double denom = st.dp.suffix(i, need);
      const double take = st.p[i] * st.dp.suffix(i + 1, need - 1) / denom;
      if (rng.uniform() < take) {
        ind[i] = 1;
        --need;
      }
    }
  }

  void fill_rejective_pairs(Eigen::MatrixXd& m) const
  {
    const auto& st = *rejective_;
    m.setZero();
    if (st.n < 2)
      return;
    std::vector<double> reduced(N_ - 1);
    for (std::size_t i = 0; i < N_; ++i) {
      for (std::size_t j = 0, r = 0; j < N_; ++j)
        if (j != i)
          reduced[r++] = st.p[j];
      const SplitPoissonBinomial without_i(reduced, st.n - 2);
      for (std::size_t j = i + 1; j < N_; ++j) {
        const std::size_t jr = j - 1; // index of j in the reduced list
        const double q = without_i.total_without(jr, st.n - 2);
        const double v = st.p[i] * st.p[j] * q / st.p_size_n;
        m(i, j) = v;
        m(j, i) = v;
      }
    }
  }

  std::size_t N_;
  Kind kind_;
  std::shared_ptr<const detail::RejectiveState> rejective_;
};

inline std::vector<double> first_order_pi(const Design& d)
{
  return d.first_order_pi();
}
inline Eigen::MatrixXd second_order_pi(const Design& d)
{
  return d.second_order_pi();
}
inline SampleDraw draw(const Design& d, RandomStream& rng)
{
  return d.draw(rng);
}

struct CalibrationResult
{
  std::vector<double> p; // scaled so that sum(p) == n
  double residual = 0.0; // max |pi(p) - target|
  int iterations = 0;
};

//! Working probabilities of the rejective design whose first-order
//! inclusion probabilities equal `target_pi`.
//!
//! Multiplicative fixed point on the odds, alpha_i <- alpha_i *
//! (target_i / pi_i)^w, with w halved whenever the residual grows.
inline CalibrationResult calibrate_rejective_p(std::span<const double> target_pi,
                                               std::size_t n,
                                               double tol = 1e-10,
                                               int max_iter = 1000)
{
  const std::size_t N = target_pi.size();
  if (N < 2 || n < 1 || n + 1 > N)
    throw ParameterError("calibration requires 1 <= n <= N - 1");
  double total = 0.0;
  for (double t : target_pi) {
    if (!(t > 0.0 && t < 1.0))
      throw ParameterError("calibration targets must lie in (0, 1)");
    total += t;
  }
  if (std::abs(total - static_cast<double>(n)) > 1e-9)
    throw ParameterError("calibration targets must sum to n");

  std::vector<double> p(target_pi.begin(), target_pi.end());
  if (std::adjacent_find(p.begin(), p.end(), std::not_equal_to<>()) ==
      p.end()) {
    std::fill(p.begin(), p.end(),
              static_cast<double>(n) / static_cast<double>(N));
    return { std::move(p), 0.0, 0 };
  }

  std::vector<double> log_odds(N);
  for (std::size_t i = 0; i < N; ++i)
    log_odds[i] = std::log(p[i]) - std::log1p(-p[i]);

  auto to_p = [&](const std::vector<double>& lo) {
    std::vector<double> q(N);
    for (std::size_t i = 0; i < N; ++i)
      q[i] = 1.0 / (1.0 + std::exp(-lo[i]));
    return q;
  };

  double step = 1.0;
  double prev_residual = std::numeric_limits<double>::infinity();
  double residual = prev_residual;
  for (int it = 0; it <= max_iter; ++it) {
    const Design d = Design::rejective(to_p(log_odds), n);
    const auto& pi = d.first_order_pi();
    residual = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      residual = std::max(residual, std::abs(pi[i] - target_pi[i]));
    if (residual <= tol)
      return { d.normalized_working_p(), residual, it };
    if (residual > prev_residual)
      step *= 0.5;
    prev_residual = residual;
    for (std::size_t i = 0; i < N; ++i)
      log_odds[i] += step * (std::log(target_pi[i]) - std::log(pi[i]));
  }
  throw CalibrationError("rejective calibration did not converge", residual);
}

//! lambda, mu_pi1, mu_pi2, gamma constants and d_N of a design with
//! deterministic inclusion probabilities. For rejective designs mu_pi2 keeps
//! only the leading -(1 - pi_i)(1 - pi_j) / d_N term of the pairwise
//! correlation expansion.
inline DesignConstants design_constants(const Design& d)
{
  const auto pi = d.first_order_pi();
  const double Nd = static_cast<double>(d.N());
  const double n = d.expected_size();
  const double lambda = n / Nd;
  double inv_sum = 0.0, d_N = 0.0, q_sum = 0.0, q_sq = 0.0;
  for (double v : pi) {
    inv_sum += 1.0 / v - 1.0;
    d_N += v * (1.0 - v);
    q_sum += 1.0 - v;
    q_sq += (1.0 - v) * (1.0 - v);
  }
  const double mu1 = n / (Nd * Nd) * inv_sum;
  double mu2 = 0.0;
  if (std::holds_alternative<design::Srswor>(d.kind()))
    mu2 = lambda - 1.0;
  else if (d.is_rejective())
    mu2 = d_N > 0.0 ? -n / (Nd * Nd) * (q_sum * q_sum - q_sq) / d_N : 0.0;
  return DesignConstants::from_mu(lambda, mu1, mu2, d_N);
}

//! Poisson design with pi = low for a random half of the units and high
//! for the rest (odd N: the extra unit gets high).
inline Design make_two_level_poisson(std::size_t N,
                                     double low,
                                     double high,
                                     RandomStream& rng)
{
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  for (std::size_t i = N; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<double> pi(N, high);
  for (std::size_t r = 0; r < N / 2; ++r)
    pi[order[r]] = low;
  return Design::poisson(std::move(pi));
}

} // namespace survey
