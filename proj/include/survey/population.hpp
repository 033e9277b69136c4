#pragma once

#include "errors.hpp"
#include "random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <variant>
#include <vector>

namespace survey {

//! Super-population laws used for generating finite populations.
namespace law {

struct Exponential
{
  double rate = 1.0;
};

struct Uniform01
{};

//! Finite-support law; points sorted ascending, masses summing to one.
struct Discrete
{
  std::vector<double> points;
  std::vector<double> masses;
};

} // namespace law

class SuperPopulationLaw
{
public:
  using Kind = std::variant<law::Exponential, law::Uniform01, law::Discrete>;

  SuperPopulationLaw(Kind kind)
    : kind_(std::move(kind))
  {
    validate();
  }

  static SuperPopulationLaw exponential(double rate = 1.0)
  {
    return SuperPopulationLaw(law::Exponential{ rate });
  }
  static SuperPopulationLaw uniform01()
  {
    return SuperPopulationLaw(law::Uniform01{});
  }
  static SuperPopulationLaw discrete(std::vector<double> points,
                                     std::vector<double> masses)
  {
    return SuperPopulationLaw(
      law::Discrete{ std::move(points), std::move(masses) });
  }
  static SuperPopulationLaw point_mass(double at)
  {
    return discrete({ at }, { 1.0 });
  }

  const Kind& kind() const noexcept { return kind_; }
  bool is_continuous() const noexcept
  {
    return !std::holds_alternative<law::Discrete>(kind_);
  }

  //! F(t), right-continuous.
  double cdf(double t) const
  {
    return std::visit(
      [t](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, law::Exponential>) {
          return t <= 0.0 ? 0.0 : -std::expm1(-k.rate * t);
        } else if constexpr (std::is_same_v<K, law::Uniform01>) {
          return std::clamp(t, 0.0, 1.0);
        } else {
          const auto end =
            std::upper_bound(k.points.begin(), k.points.end(), t);
          const auto m = static_cast<std::size_t>(end - k.points.begin());
          if (m == k.points.size())
            return 1.0;
          return std::min(
            1.0, std::accumulate(k.masses.begin(), k.masses.begin() + m, 0.0));
        }
      },
      kind_);
  }

  //! Lebesgue density f(t); zero everywhere for discrete laws.
  double density(double t) const
  {
    return std::visit(
      [t](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, law::Exponential>) {
          return t < 0.0 ? 0.0 : k.rate * std::exp(-k.rate * t);
        } else if constexpr (std::is_same_v<K, law::Uniform01>) {
          return (t >= 0.0 && t <= 1.0) ? 1.0 : 0.0;
        } else {
          return 0.0;
        }
      },
      kind_);
  }

  //! Generalized inverse inf{t : F(t) >= alpha}, 0 < alpha < 1.
  double quantile(double alpha) const
  {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw ParameterError("quantile level must lie in (0, 1)");
    return std::visit(
      [alpha](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, law::Exponential>) {
          return -std::log1p(-alpha) / k.rate;
        } else if constexpr (std::is_same_v<K, law::Uniform01>) {
          return alpha;
        } else {
          double cum = 0.0;
          for (std::size_t i = 0; i < k.points.size(); ++i) {
            cum += k.masses[i];
            if (cum >= alpha)
              return k.points[i];
          }
          return k.points.back();
        }
      },
      kind_);
  }

  //! phi(F) = F(beta * F^{-1}(alpha)).
  double poverty_rate(double alpha, double beta) const
  {
    if (const auto* e = std::get_if<law::Exponential>(&kind_)) {
      (void)e;
      // closed form, free of the rate
      return -std::expm1(beta * std::log1p(-alpha));
    }
    return cdf(beta * quantile(alpha));
  }

  double draw(RandomStream& rng) const
  {
    return std::visit(
      [&rng](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, law::Exponential>) {
          return -std::log1p(-rng.uniform()) / k.rate;
        } else if constexpr (std::is_same_v<K, law::Uniform01>) {
          return rng.uniform();
        } else {
          if (k.points.size() == 1)
            return k.points.front();
          const double u = rng.uniform();
          double cum = 0.0;
          for (std::size_t i = 0; i < k.points.size(); ++i) {
            cum += k.masses[i];
            if (u < cum)
              return k.points[i];
          }
          return k.points.back();
        }
      },
      kind_);
  }

private:
  void validate() const
  {
    std::visit(
      [](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, law::Exponential>) {
          if (!(k.rate > 0.0) || !std::isfinite(k.rate))
            throw ParameterError("exponential rate must be positive");
        } else if constexpr (std::is_same_v<K, law::Discrete>) {
          if (k.points.empty() || k.points.size() != k.masses.size())
            throw ParameterError("discrete law needs matching points/masses");
          if (!std::is_sorted(k.points.begin(), k.points.end()) ||
              std::adjacent_find(k.points.begin(), k.points.end()) !=
                k.points.end())
            throw ParameterError("discrete points must be strictly increasing");
          double total = 0.0;
          for (double m : k.masses) {
            if (!(m >= 0.0))
              throw ParameterError("discrete masses must be nonnegative");
            total += m;
          }
          if (std::abs(total - 1.0) > 1e-12)
            throw ParameterError("discrete masses must sum to one");
        }
      },
      kind_);
  }

  Kind kind_;
};

inline double true_cdf(const SuperPopulationLaw& law, double t)
{
  return law.cdf(t);
}
inline double true_quantile(const SuperPopulationLaw& law, double alpha)
{
  return law.quantile(alpha);
}
inline double true_poverty_rate(const SuperPopulationLaw& law,
                                double alpha,
                                double beta)
{
  return law.poverty_rate(alpha, beta);
}

//! Finite population: responses y and positive design variables z.
struct Population
{
  std::vector<double> y;
  std::vector<double> z;

  std::size_t size() const noexcept { return y.size(); }
};

//! Draws N i.i.d. responses from the law. The stream is keyed by
//! (seed, index) so the i-th population of a replication study is the same
//! whichever worker builds it. Design variables are all ones.
inline Population generate_population(const SuperPopulationLaw& law,
                                      std::size_t N,
                                      std::uint64_t seed,
                                      std::uint64_t index = 0)
{
  if (N < 1)
    throw ParameterError("population size must be at least 1");
  RandomStream rng(seed, index, 0x9091);
  Population pop;
  pop.y.resize(N);
  for (auto& v : pop.y)
    v = law.draw(rng);
  pop.z.assign(N, 1.0);
  return pop;
}

} // namespace survey
