#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace survey {

//! Distribution of partial sums of independent Bernoulli trials.
//!
//! at(i, k) = P(X_1 + ... + X_i = k) for 0 <= i <= N and 0 <= k <= n_max,
//! where X_j ~ Bernoulli(p_j). Rows are truncated at n_max, so a row sums to
//! at most one.
class PoissonBinomialTable
{
public:
  PoissonBinomialTable() = default;

  PoissonBinomialTable(std::span<const double> probs, std::size_t n_max)
    : units_(probs.size())
    , n_max_(n_max)
    , table_((probs.size() + 1) * (n_max + 1), 0.0)
  {
    const std::size_t w = n_max_ + 1;
    table_[0] = 1.0;
    for (std::size_t i = 1; i <= units_; ++i) {
      const double p = probs[i - 1];
      if (!(p >= 0.0 && p <= 1.0))
        throw ParameterError("Bernoulli probabilities must lie in [0, 1]");
      const double* prev = &table_[(i - 1) * w];
      double* cur = &table_[i * w];
      cur[0] = prev[0] * (1.0 - p);
      const std::size_t top = std::min(i, n_max_);
      for (std::size_t k = 1; k <= top; ++k)
        cur[k] = prev[k] * (1.0 - p) + prev[k - 1] * p;
    }
  }

  std::size_t units() const noexcept { return units_; }
  std::size_t n_max() const noexcept { return n_max_; }

  double at(std::size_t i, std::size_t k) const noexcept
  {
    return k > n_max_ ? 0.0 : table_[i * (n_max_ + 1) + k];
  }

  std::span<const double> row(std::size_t i) const noexcept
  {
    return { table_.data() + i * (n_max_ + 1), n_max_ + 1 };
  }

private:
  std::size_t units_ = 0;
  std::size_t n_max_ = 0;
  std::vector<double> table_;
};

//! Forward and suffix tables over the same trials. suffix(i, k) is the
//! probability that trials i..N-1 (zero-based) sum to k.
class SplitPoissonBinomial
{
public:
  SplitPoissonBinomial() = default;

  SplitPoissonBinomial(std::span<const double> probs, std::size_t n_max)
    : forward_(probs, n_max)
  {
    std::vector<double> reversed(probs.rbegin(), probs.rend());
    backward_ = PoissonBinomialTable(reversed, n_max);
  }

  std::size_t units() const noexcept { return forward_.units(); }

  //! P(trials 0..i-1 sum to k)
  double prefix(std::size_t i, std::size_t k) const noexcept
  {
    return forward_.at(i, k);
  }
  //! P(trials i..N-1 sum to k)
  double suffix(std::size_t i, std::size_t k) const noexcept
  {
    return backward_.at(units() - i, k);
  }
  double total(std::size_t k) const noexcept
  {
    return forward_.at(units(), k);
  }

  //! P(sum of all trials except `skip` equals k), by convolving the prefix
  //! before `skip` with the suffix after it.
  double total_without(std::size_t skip, std::size_t k) const noexcept
  {
    double acc = 0.0;
    for (std::size_t a = 0; a <= k; ++a)
      acc += prefix(skip, a) * suffix(skip + 1, k - a);
    return acc;
  }

  const PoissonBinomialTable& forward() const noexcept { return forward_; }

private:
  PoissonBinomialTable forward_;
  PoissonBinomialTable backward_;
};

} // namespace survey
