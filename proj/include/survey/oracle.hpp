#pragma once

#include "designs.hpp"
#include "errors.hpp"
#include "population.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace survey::oracle {

//! Hard limits on exact enumeration.
inline constexpr double max_fixed_size_support = 2e6;
inline constexpr std::size_t max_random_size_units = 20;
inline constexpr std::size_t max_units = 63;
inline constexpr double max_moment_work = 4e8;

struct SupportPoint
{
  std::uint64_t sample; // bit i set iff unit i is in the sample
  double probability;
};

//! A design written out as its full support.
struct EnumeratedDesign
{
  std::size_t N = 0;
  std::vector<SupportPoint> support;

  bool contains(std::uint64_t s, std::size_t i) const noexcept
  {
    return (s >> i) & 1U;
  }
};

inline double binomial_coefficient(std::size_t N, std::size_t k)
{
  if (k > N)
    return 0.0;
  k = std::min(k, N - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    c = c * static_cast<double>(N - k + i) / static_cast<double>(i);
  return std::round(c);
}

namespace detail {

// Calls f(mask) for every N-bit mask with exactly k bits set (Gosper).
template<class F>
void for_each_subset(std::size_t N, std::size_t k, F&& f)
{
  if (k == 0) {
    f(std::uint64_t{ 0 });
    return;
  }
  std::uint64_t s = (std::uint64_t{ 1 } << k) - 1;
  const std::uint64_t limit = std::uint64_t{ 1 } << N;
  while (s < limit) {
    f(s);
    const std::uint64_t c = s & (~s + 1);
    const std::uint64_t r = s + c;
    s = (((r ^ s) >> 2) / c) | r;
  }
}

} // namespace detail

inline EnumeratedDesign enumerate_design(const Design& d)
{
  const std::size_t N = d.N();
  if (N > max_units)
    throw CapacityError("enumeration supports at most 63 units",
                        static_cast<double>(N), static_cast<double>(max_units));
  EnumeratedDesign e;
  e.N = N;
  if (d.is_fixed_size()) {
    const auto n = static_cast<std::size_t>(d.expected_size());
    const double count = binomial_coefficient(N, n);
    if (count > max_fixed_size_support)
      throw CapacityError("fixed-size support too large", count,
                          max_fixed_size_support);
    e.support.reserve(static_cast<std::size_t>(count));
    if (d.is_rejective()) {
      const auto& kind = std::get<design::Rejective>(d.kind());
      std::vector<double> odds(N);
      for (std::size_t i = 0; i < N; ++i)
        odds[i] = kind.p[i] / (1.0 - kind.p[i]);
      double total = 0.0;
      detail::for_each_subset(N, n, [&](std::uint64_t s) {
        double w = 1.0;
        for (std::size_t i = 0; i < N; ++i)
          if ((s >> i) & 1U)
            w *= odds[i];
        e.support.push_back({ s, w });
        total += w;
      });
      for (auto& sp : e.support)
        sp.probability /= total;
    } else {
      const double mass = 1.0 / count;
      detail::for_each_subset(
        N, n, [&](std::uint64_t s) { e.support.push_back({ s, mass }); });
    }
  } else {
    if (N > max_random_size_units)
      throw CapacityError("random-size enumeration supports at most 20 units",
                          static_cast<double>(N),
                          static_cast<double>(max_random_size_units));
    const auto pi = d.first_order_pi();
    const std::uint64_t count = std::uint64_t{ 1 } << N;
    e.support.reserve(count);
    for (std::uint64_t s = 0; s < count; ++s) {
      double w = 1.0;
      for (std::size_t i = 0; i < N; ++i)
        w *= ((s >> i) & 1U) ? pi[i] : 1.0 - pi[i];
      e.support.push_back({ s, w });
    }
  }
  return e;
}

//! E_d prod_{i in units} xi_i.
inline double inclusion_probability(const EnumeratedDesign& e,
                                    std::span<const std::size_t> units)
{
  std::uint64_t mask = 0;
  for (std::size_t i : units)
    mask |= std::uint64_t{ 1 } << i;
  double acc = 0.0;
  for (const auto& sp : e.support)
    if ((sp.sample & mask) == mask)
      acc += sp.probability;
  return acc;
}

inline std::vector<double> first_order_pi(const EnumeratedDesign& e)
{
  std::vector<double> pi(e.N, 0.0);
  for (const auto& sp : e.support)
    for (std::size_t i = 0; i < e.N; ++i)
      if ((sp.sample >> i) & 1U)
        pi[i] += sp.probability;
  return pi;
}

inline Eigen::MatrixXd second_order_pi(const EnumeratedDesign& e)
{
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(e.N, e.N);
  std::vector<std::size_t> in;
  for (const auto& sp : e.support) {
    in.clear();
    for (std::size_t i = 0; i < e.N; ++i)
      if ((sp.sample >> i) & 1U)
        in.push_back(i);
    for (std::size_t a : in)
      for (std::size_t b : in)
        m(a, b) += sp.probability;
  }
  return m;
}

namespace detail {

inline void require_distinct(std::span<const std::size_t> idx, std::size_t N)
{
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] >= N)
      throw ParameterError("unit index out of range");
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      if (idx[a] == idx[b])
        throw ParameterError("moment indices must be distinct");
  }
}

} // namespace detail

//! E_d prod (xi_i - pi_i) over 2 to 4 distinct units.
inline double exact_moment(const EnumeratedDesign& e,
                           std::span<const std::size_t> units)
{
  if (units.size() < 2 || units.size() > 4)
    throw ParameterError("moments are defined for 2 to 4 units");
  detail::require_distinct(units, e.N);
  std::vector<double> pi(units.size());
  for (std::size_t k = 0; k < units.size(); ++k)
    pi[k] = inclusion_probability(e, units.subspan(k, 1));
  double acc = 0.0;
  for (const auto& sp : e.support) {
    double prod = sp.probability;
    for (std::size_t k = 0; k < units.size(); ++k)
      prod *= (((sp.sample >> units[k]) & 1U) ? 1.0 : 0.0) - pi[k];
    acc += prod;
  }
  return acc;
}

inline double exact_moment(const EnumeratedDesign& e,
                           std::initializer_list<std::size_t> units)
{
  return exact_moment(e, std::span<const std::size_t>(units.begin(), units.size()));
}

//! Variance over the support of the HT mean (1/N) sum xi_i v_i / pi_i.
inline double enumerated_ht_mean_variance(const EnumeratedDesign& e,
                                          std::span<const double> v)
{
  const auto pi = first_order_pi(e);
  const double Nd = static_cast<double>(e.N);
  double mean = 0.0;
  for (std::size_t i = 0; i < e.N; ++i)
    mean += v[i] / Nd;
  double var = 0.0;
  for (const auto& sp : e.support) {
    double est = 0.0;
    for (std::size_t i = 0; i < e.N; ++i)
      if ((sp.sample >> i) & 1U)
        est += v[i] / pi[i];
    est /= Nd;
    var += sp.probability * (est - mean) * (est - mean);
  }
  return var;
}

//! S_N^2 = (1/N^2) sum_ij (pi_ij - pi_i pi_j) / (pi_i pi_j) v_i v_j.
//! O(N) for the independent and srswor designs, O(N^2) otherwise.
inline double exact_sn2(const Design& d, std::span<const double> v)
{
  const std::size_t N = d.N();
  if (v.size() != N)
    throw ParameterError("value vector length must equal N");
  const double Nd = static_cast<double>(N);
  const auto pi = d.first_order_pi();
  double diag = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    diag += (1.0 - pi[i]) / pi[i] * v[i] * v[i];
  if (std::holds_alternative<design::Bernoulli>(d.kind()) ||
      std::holds_alternative<design::Poisson>(d.kind()))
    return diag / (Nd * Nd);
  if (const auto* s = std::get_if<design::Srswor>(&d.kind())) {
    if (N == 1)
      return diag / (Nd * Nd);
    const double n = static_cast<double>(s->n);
    const double p = n / Nd;
    const double pij = n * (n - 1.0) / (Nd * (Nd - 1.0));
    const double c = (pij - p * p) / (p * p);
    double sum = 0.0, sq = 0.0;
    for (double x : v) {
      sum += x;
      sq += x * x;
    }
    return (diag + c * (sum * sum - sq)) / (Nd * Nd);
  }
  const Eigen::MatrixXd pij = d.second_order_pi();
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      acc += (pij(i, j) - pi[i] * pi[j]) / (pi[i] * pi[j]) * v[i] * v[j];
  return acc / (Nd * Nd);
}

enum class SigmaForm
{
  HT2, // indicators 1{Y_i <= t}
  HJ2, // indicators centred by F(t)
};

//! (n/N^2) sum_ij (pi_ij - pi_i pi_j) / (pi_i pi_j) Y_i Y_j^T on the grid.
inline Eigen::MatrixXd sigma_matrix(const Design& d,
                                    std::span<const double> y,
                                    std::span<const double> grid,
                                    SigmaForm form,
                                    const SuperPopulationLaw* law = nullptr)
{
  const std::size_t N = d.N();
  if (y.size() != N)
    throw ParameterError("population length must equal N");
  if (form == SigmaForm::HJ2 && law == nullptr)
    throw ParameterError("HJ2 form needs the law for centring");
  const auto pi = d.first_order_pi();
  const Eigen::MatrixXd pij = d.second_order_pi();
  const std::size_t k = grid.size();
  Eigen::MatrixXd Y(N, k);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t g = 0; g < k; ++g) {
      const double ind = y[i] <= grid[g] ? 1.0 : 0.0;
      Y(i, g) = form == SigmaForm::HT2 ? ind : ind - law->cdf(grid[g]);
    }
  Eigen::MatrixXd W(N, N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      W(i, j) = (pij(i, j) - pi[i] * pi[j]) / (pi[i] * pi[j]);
  const double Nd = static_cast<double>(N);
  Eigen::MatrixXd S = (d.expected_size() / (Nd * Nd)) * (Y.transpose() * W * Y);
  return 0.5 * (S + S.transpose());
}

//! Kullback-Leibler divergence D(P || R); +infinity when P charges a
//! sample that R does not.
inline double divergence_from_rejective(const EnumeratedDesign& P,
                                        const EnumeratedDesign& R)
{
  std::unordered_map<std::uint64_t, double> ref;
  ref.reserve(R.support.size());
  for (const auto& sp : R.support)
    ref[sp.sample] += sp.probability;
  double acc = 0.0;
  for (const auto& sp : P.support) {
    if (sp.probability <= 0.0)
      continue;
    const auto it = ref.find(sp.sample);
    if (it == ref.end() || it->second <= 0.0)
      return std::numeric_limits<double>::infinity();
    acc += sp.probability * std::log(sp.probability / it->second);
  }
  return std::max(acc, 0.0);
}

//! One row of a condition report: the finite-N statistic, the shape of the
//! bound it enters, and the constant that the bound would need at this N.
struct ConditionEntry
{
  std::string condition;
  std::string statistic;
  double observed = 0.0;
  std::string bound;
  double implied_constant = 0.0;
};

struct ConditionReport
{
  std::vector<ConditionEntry> entries;

  const ConditionEntry* find(const std::string& condition,
                             const std::string& statistic = {}) const
  {
    for (const auto& e : entries)
      if (e.condition == condition &&
          (statistic.empty() || e.statistic == statistic))
        return &e;
    return nullptr;
  }
};

//! Exact finite-N statistics for the correlation, high-entropy and
//! fixed-size condition families. `n` is the (expected) sample size.
inline ConditionReport check_conditions(const EnumeratedDesign& e, double n)
{
  const std::size_t N = e.N;
  const double Nd = static_cast<double>(N);
  const double work = static_cast<double>(e.support.size()) *
                      std::max(1.0, binomial_coefficient(N, 4));
  if (work > max_moment_work)
    throw CapacityError("moment tensor work too large", work, max_moment_work);

  const auto pi = first_order_pi(e);
  const Eigen::MatrixXd pij = second_order_pi(e);

  // Centred moments and third-order inclusion probabilities over unordered
  // tuples, accumulated directly from the support.
  double max2 = 0.0, max3 = 0.0, max4 = 0.0;
  double c3star = 0.0, c4_signed = 0.0, c4_abs = 0.0;
  {
    const std::size_t n3 = static_cast<std::size_t>(binomial_coefficient(N, 3));
    const std::size_t n4 = static_cast<std::size_t>(binomial_coefficient(N, 4));
    std::vector<double> m2(N * N, 0.0), m3(n3, 0.0), m4(n4, 0.0), p3(n3, 0.0);
    std::vector<double> c(N);
    std::vector<double> x(N);
    for (const auto& sp : e.support) {
      const double P = sp.probability;
      for (std::size_t i = 0; i < N; ++i) {
        x[i] = ((sp.sample >> i) & 1U) ? 1.0 : 0.0;
        c[i] = x[i] - pi[i];
      }
      std::size_t t3 = 0, t4 = 0;
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
          const double cij = P * c[i] * c[j];
          m2[i * N + j] += cij;
          const double xij = P * x[i] * x[j];
          for (std::size_t k = j + 1; k < N; ++k, ++t3) {
            const double cijk = cij * c[k];
            m3[t3] += cijk;
            p3[t3] += xij * x[k];
            for (std::size_t l = k + 1; l < N; ++l, ++t4)
              m4[t4] += cijk * c[l];
          }
        }
    }
    std::size_t t3 = 0, t4 = 0;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j) {
        max2 = std::max(max2, std::abs(m2[i * N + j]));
        for (std::size_t k = j + 1; k < N; ++k, ++t3) {
          max3 = std::max(max3, std::abs(m3[t3]));
          const double prod3 = pi[i] * pi[j] * pi[k];
          c3star += std::abs((p3[t3] - prod3) / prod3);
          for (std::size_t l = k + 1; l < N; ++l, ++t4) {
            max4 = std::max(max4, std::abs(m4[t4]));
            const double r = m4[t4] / (prod3 * pi[l]);
            c4_signed += r;
            c4_abs += std::abs(r);
          }
        }
      }
  }

  ConditionReport rep;
  auto add = [&](std::string cond, std::string stat, double obs,
                 std::string bound, double k) {
    rep.entries.push_back(
      { std::move(cond), std::move(stat), obs, std::move(bound), k });
  };

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double p : pi) {
    lo = std::min(lo, Nd * p / n);
    hi = std::max(hi, Nd * p / n);
  }
  add("C1", "min N pi_i / n", lo, "K1 <= N pi_i / n", lo);
  add("C1", "max N pi_i / n", hi, "N pi_i / n <= K2", hi);
  add("C2", "max |E(xi_i-pi_i)(xi_j-pi_j)|", max2, "< K3 n / N^2",
      max2 * Nd * Nd / n);
  add("C3", "max |E prod_3 (xi-pi)|", max3, "< K3 n^2 / N^3",
      max3 * Nd * Nd * Nd / (n * n));
  add("C4", "max |E prod_4 (xi-pi)|", max4, "< K3 n^2 / N^4",
      max4 * Nd * Nd * Nd * Nd / (n * n));

  double c2star = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      if (i != j)
        s += std::abs((pij(i, j) - pi[i] * pi[j]) / (pi[i] * pi[j]));
    c2star = std::max(c2star, n / Nd * s);
  }
  add("C2*", "max_j (n/N) sum_i |pi_ij/(pi_i pi_j) - 1|", c2star, "<= K",
      c2star);
  const double c3 = n / (Nd * Nd * Nd) * 6.0 * c3star;
  add("C3*", "(n/N^3) sum_D3 |pi_ijk/(pi_i pi_j pi_k) - 1|", c3, "<= K", c3);
  const double scale4 = n * n / (Nd * Nd * Nd * Nd) * 24.0;
  add("C4*", "(n^2/N^4) |sum_D4 E prod (xi-pi) / prod pi| (signed)",
      scale4 * std::abs(c4_signed), "<= K", scale4 * std::abs(c4_signed));
  add("C4*", "(n^2/N^4) sum_D4 |E prod (xi-pi) / prod pi| (absolute)",
      scale4 * c4_abs, "<= K", scale4 * c4_abs);

  double d_N = 0.0, inv = 0.0, pair = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    d_N += pi[i] * (1.0 - pi[i]);
    inv += 1.0 / pi[i] - 1.0;
    for (std::size_t j = 0; j < N; ++j)
      if (i != j)
        pair += (pij(i, j) - pi[i] * pi[j]) / (pi[i] * pi[j]);
  }
  add("mu_pi1", "(n/N^2) sum (1/pi_i - 1)", n / (Nd * Nd) * inv, "limit",
      n / (Nd * Nd) * inv);
  add("mu_pi2", "(n/N^2) sum_{i!=j} (pi_ij - pi_i pi_j)/(pi_i pi_j)",
      n / (Nd * Nd) * pair, "limit", n / (Nd * Nd) * pair);
  add("A2", "d_N", d_N, "-> infinity", d_N);
  add("A3/B1", "n / d_N", n / d_N, "O(1)", n / d_N);
  add("B2", "N / d_N^2", Nd / (d_N * d_N), "-> 0", Nd / (d_N * d_N));
  add("A4", "N^2 / (n d_N)", Nd * Nd / (n * d_N), "O(1)", Nd * Nd / (n * d_N));
  const double a5 = n * (Nd - n) * (Nd - n) / (Nd * Nd * d_N);
  add("A5", "n (N-n)^2 / (N^2 d_N)", a5, "-> limit", a5);

  bool fixed_size = !e.support.empty();
  for (const auto& sp : e.support)
    if (sp.probability > 0.0 &&
        static_cast<double>(std::popcount(sp.sample)) != std::round(n)) {
      fixed_size = false;
      break;
    }
  if (fixed_size && d_N > 0.0) {
    double resid = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        if (i != j) {
          const double lead =
            -pi[i] * pi[j] * (1.0 - pi[i]) * (1.0 - pi[j]) / d_N;
          resid = std::max(resid, std::abs(pij(i, j) - pi[i] * pi[j] - lead));
        }
    add("expansion", "max |pi_ij - pi_i pi_j + pi_i pi_j (1-pi_i)(1-pi_j)/d_N|",
        resid, "<= C / d_N^2", resid * d_N * d_N);
  }
  return rep;
}

} // namespace survey::oracle
