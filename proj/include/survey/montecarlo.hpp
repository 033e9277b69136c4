#pragma once

#include "asymptotics.hpp"
#include "designs.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "oracle.hpp"
#include "population.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace survey::mc {

enum class DesignKind
{
  SI,  // srswor of size n
  BE,  // Bernoulli with p = n/N
  PO,  // Poisson, pi = 0.4 n/N on a random half and 1.6 n/N on the other
  REJ, // rejective of size n with the PO probabilities as working p
};

inline std::string to_string(DesignKind k)
{
  switch (k) {
    case DesignKind::SI: return "SI";
    case DesignKind::BE: return "BE";
    case DesignKind::PO: return "PO";
    case DesignKind::REJ: return "REJ";
  }
  return "?";
}

inline DesignKind design_kind_from_string(const std::string& s)
{
  if (s == "SI") return DesignKind::SI;
  if (s == "BE") return DesignKind::BE;
  if (s == "PO") return DesignKind::PO;
  if (s == "REJ") return DesignKind::REJ;
  throw ParameterError("unknown design kind '" + s + "'");
}

struct Scenario
{
  std::size_t N = 1000;
  std::size_t n = 100;
  DesignKind design = DesignKind::SI;
  SuperPopulationLaw law = SuperPopulationLaw::exponential(1.0);
  double alpha = 0.5;
  double beta = 0.6;
  std::size_t populations = 200; // N_R
  std::size_t samples = 200;     // n_R per population
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double max_failure_fraction = 0.01;
  //! Quantile rule of the estimators, of phi(F_N) and of the bandwidth IQR.
  QuantileRule quantile_rule = QuantileRule::Interpolated;

  void validate() const
  {
    if (n < 1 || n > N)
      throw ParameterError("scenario requires 1 <= n <= N");
    if (populations < 1 || samples < 1)
      throw ParameterError("replication counts must be positive");
    if (workers < 1)
      throw ParameterError("workers must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
      throw ParameterError("alpha and beta must lie in (0, 1)");
    const double f = static_cast<double>(n) / static_cast<double>(N);
    if ((design == DesignKind::PO || design == DesignKind::REJ) && 1.6 * f > 1.0)
      throw ParameterError("PO requires 1.6 n / N <= 1");
    if (design == DesignKind::REJ && 1.6 * f >= 1.0)
      throw ParameterError("REJ requires 1.6 n / N < 1");
    if (design == DesignKind::BE && !(f < 1.0))
      throw ParameterError("BE requires n < N");
    if (design == DesignKind::REJ && n + 1 > N)
      throw ParameterError("REJ requires n <= N - 1");
  }
};

//! Design used for population `index` of a scenario.
inline Design scenario_design(const Scenario& sc, std::size_t index)
{
  const double f = static_cast<double>(sc.n) / static_cast<double>(sc.N);
  switch (sc.design) {
    case DesignKind::SI:
      return Design::srswor(sc.N, sc.n);
    case DesignKind::BE:
      return Design::bernoulli(sc.N, f);
    case DesignKind::PO: {
      RandomStream rng(sc.seed, index, 0xd00d);
      return make_two_level_poisson(sc.N, 0.4 * f, 1.6 * f, rng);
    }
    case DesignKind::REJ: {
      RandomStream rng(sc.seed, index, 0xd00d);
      const auto po = make_two_level_poisson(sc.N, 0.4 * f, 1.6 * f, rng);
      return Design::rejective(po.first_order_pi(), sc.n);
    }
  }
  throw ParameterError("unknown design");
}

namespace detail {

//! Runs body(index) for index in [0, count) on `workers` threads. Each
//! index writes only its own output slot, so the result does not depend on
//! the schedule.
inline void parallel_for(std::size_t count,
                         unsigned workers,
                         const std::function<void(std::size_t)>& body)
{
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i)
      body(i);
    return;
  }
  std::atomic<std::size_t> next{ 0 };
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++)
          body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = count;
      }
    });
  for (auto& t : pool)
    t.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

// (est - target) / target; zero when the two agree exactly (covers the
// degenerate zero-target case).
inline double relative_error(double est, double target)
{
  if (est == target)
    return 0.0;
  return (est - target) / target;
}

//! Mean and standard error of a two-level replication study, treating the
//! per-population means as the independent units.
struct BlockStats
{
  std::vector<double> sums;
  std::vector<std::size_t> counts;

  explicit BlockStats(std::size_t blocks = 0)
    : sums(blocks, 0.0)
    , counts(blocks, 0)
  {}

  void add(std::size_t block, double v)
  {
    sums[block] += v;
    ++counts[block];
  }

  double mean() const
  {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
      s += sums[b];
      c += counts[b];
    }
    return c ? s / static_cast<double>(c) : 0.0;
  }

  double standard_error() const
  {
    std::vector<double> means;
    for (std::size_t b = 0; b < sums.size(); ++b)
      if (counts[b])
        means.push_back(sums[b] / static_cast<double>(counts[b]));
    if (means.size() < 2)
      return 0.0;
    double m = 0.0;
    for (double v : means)
      m += v;
    m /= static_cast<double>(means.size());
    double ss = 0.0;
    for (double v : means)
      ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(means.size() - 1) /
                     static_cast<double>(means.size()));
  }
};

//! Poverty-rate variance reference for the law: closed form for
//! continuous laws, zero for a point mass.
inline PovertyInputs reference_inputs(const Scenario& sc)
{
  if (const auto* d = std::get_if<law::Discrete>(&sc.law.kind())) {
    if (d->points.size() == 1)
      return { sc.alpha, sc.law.poverty_rate(sc.alpha, sc.beta), 0.0 };
    throw ParameterError(
      "variance reference needs a continuous law or a point mass");
  }
  return poverty_inputs(sc.law, sc.alpha, sc.beta);
}

inline bool all_equal(const SampleDraw& d, const Population& pop)
{
  for (std::size_t k = 1; k < d.included.size(); ++k)
    if (pop.y[d.included[k]] != pop.y[d.included[0]])
      return false;
  return true;
}

} // namespace detail

//! Plug-in estimate for one replication. A sample whose values are all
//! equal has a degenerate empirical law; phi-hat is then locally constant
//! and the plug-in variance is zero.
inline PluginEstimate replicate_estimate(const SampleDraw& draw,
                                         const Population& pop,
                                         const DesignConstants& c,
                                         double alpha,
                                         double beta,
                                         Weighting mode,
                                         QuantileRule rule)
{
  if (!draw.included.empty() && detail::all_equal(draw, pop)) {
    const auto F = mode == Weighting::HT ? ht_ecdf(draw, pop.y, pop.size())
                                         : hajek_ecdf(draw, pop.y);
    PluginEstimate est;
    est.quantile = weighted_quantile(F, alpha, rule);
    est.phi = F(beta * est.quantile);
    return est;
  }
  return plugin_poverty_estimate(draw, pop.y, pop.size(), c, alpha, beta, mode, rule);
}

enum class Estimator
{
  HT,
  HJ
};
enum class Center
{
  FN,
  F
};

struct CellKey
{
  Estimator estimator;
  Center center;
  auto operator<=>(const CellKey&) const = default;
};

struct Estimate
{
  double value = 0.0;
  double standard_error = 0.0;
};

struct MonteCarloReport
{
  Scenario scenario;
  std::map<CellKey, Estimate> rb_phi;        // percent
  std::map<Estimator, Estimate> rb_av;       // percent
  std::map<CellKey, Estimate> coverage;      // percent
  std::map<Estimator, double> av_reference;  // asymptotic variance
  double phi_F = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  std::size_t si_mismatches = 0; // SI replications where HT != HJ
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

inline MonteCarloReport run_scenario(const Scenario& sc)
{
  sc.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t R = sc.populations;

  const PovertyInputs ref = detail::reference_inputs(sc);
  const double phi_F = ref.phi;
  const double root_n = std::sqrt(static_cast<double>(sc.n));

  struct PopulationResult
  {
    // index = estimator * 2 + center
    double rb[4] = {};
    double cover[4] = {};
    double rb_av[2] = {};
    std::size_t ok = 0;
    std::size_t failed = 0;
    std::size_t mismatches = 0;
    double av_ref[2] = {};
  };
  std::vector<PopulationResult> results(R);

  detail::parallel_for(R, sc.workers, [&](std::size_t p) {
    const Population pop = generate_population(sc.law, sc.N, sc.seed, p);
    const Design design = scenario_design(sc, p);
    const DesignConstants c = design_constants(design);
    const double phi_FN =
      poverty_rate(population_ecdf(pop.y), sc.alpha, sc.beta, sc.quantile_rule);
    const double av_ref[2] = {
      poverty_variance_ht(c.gamma_pi1, c.gamma_pi2, ref),
      poverty_variance_hj(c.gamma_pi1, ref),
    };
    PopulationResult& out = results[p];
    out.av_ref[0] = av_ref[0];
    out.av_ref[1] = av_ref[1];
    for (std::size_t j = 0; j < sc.samples; ++j) {
      RandomStream rng(sc.seed, p, j + 1);
      const SampleDraw d = design.draw(rng);
      PluginEstimate est[2];
      try {
        if (d.included.empty())
          throw WeightError("empty sample");
        est[0] = replicate_estimate(d, pop, c, sc.alpha, sc.beta, Weighting::HT,
                                    sc.quantile_rule);
        est[1] = replicate_estimate(d, pop, c, sc.alpha, sc.beta, Weighting::HJ,
                                    sc.quantile_rule);
      } catch (const Error&) {
        ++out.failed;
        continue;
      }
      if (sc.design == DesignKind::SI && est[0].phi != est[1].phi)
        ++out.mismatches;
      for (int e = 0; e < 2; ++e) {
        const double half = wald_z95 * std::sqrt(std::max(est[e].variance, 0.0)) / root_n;
        const double targets[2] = { phi_FN, phi_F };
        for (int t = 0; t < 2; ++t) {
          out.rb[e * 2 + t] += detail::relative_error(est[e].phi, targets[t]);
          out.cover[e * 2 + t] +=
            std::abs(est[e].phi - targets[t]) <= half ? 1.0 : 0.0;
        }
        out.rb_av[e] += detail::relative_error(est[e].variance, av_ref[e]);
      }
      ++out.ok;
    }
  });

  MonteCarloReport rep;
  rep.scenario = sc;
  rep.phi_F = phi_F;
  rep.av_reference[Estimator::HT] = results.front().av_ref[0];
  rep.av_reference[Estimator::HJ] = results.front().av_ref[1];
  std::size_t ok = 0;
  for (const auto& r : results) {
    ok += r.ok;
    rep.failures += r.failed;
    rep.si_mismatches += r.mismatches;
  }
  rep.replications = ok + rep.failures;
  if (static_cast<double>(rep.failures) >
      sc.max_failure_fraction * static_cast<double>(rep.replications))
    throw ScenarioError("failed replications exceed the tolerated fraction (" +
                        std::to_string(rep.failures) + " of " +
                        std::to_string(rep.replications) + ")");

  // Per-population means are the independent units for the standard errors.
  auto collect = [&](auto field) {
    detail::BlockStats bs(R);
    for (std::size_t p = 0; p < R; ++p)
      if (results[p].ok) {
        bs.sums[p] = field(results[p]);
        bs.counts[p] = results[p].ok;
      }
    return Estimate{ 100.0 * bs.mean(), 100.0 * bs.standard_error() };
  };
  for (int e = 0; e < 2; ++e) {
    const Estimator est = e == 0 ? Estimator::HT : Estimator::HJ;
    for (int t = 0; t < 2; ++t) {
      const CellKey key{ est, t == 0 ? Center::FN : Center::F };
      rep.rb_phi[key] =
        collect([&](const PopulationResult& r) { return r.rb[e * 2 + t]; });
      rep.coverage[key] =
        collect([&](const PopulationResult& r) { return r.cover[e * 2 + t]; });
    }
    rep.rb_av[est] = collect([&](const PopulationResult& r) { return r.rb_av[e]; });
  }
  for (const auto& [key, v] : rep.rb_phi)
    if (v.value > 0.0)
      rep.warnings.push_back("positive relative bias of phi-hat (" +
                             std::string(key.estimator == Estimator::HT ? "HT" : "HJ") +
                             ", " + (key.center == Center::FN ? "F_N" : "F") + ")");
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

//! Empirical covariance of a process on a grid against its limit.
struct CovarianceCheck
{
  Eigen::MatrixXd empirical;
  Eigen::MatrixXd limit;
  Eigen::MatrixXd standard_error;
  double max_abs_error = 0.0;
  double max_standardized_error = 0.0; // max |emp - limit| / se
};

inline CovarianceCheck process_covariance_check(const Scenario& sc,
                                                std::span<const double> grid,
                                                CovarianceForm form)
{
  sc.validate();
  const std::size_t R = sc.populations, S = sc.samples, k = grid.size();
  const ProcessKind kind = [&] {
    switch (form) {
      case CovarianceForm::HT_vs_FN: return ProcessKind::HT_vs_FN;
      case CovarianceForm::HT_vs_F: return ProcessKind::HT_vs_F;
      case CovarianceForm::HJ_vs_FN: return ProcessKind::HJ_vs_FN;
      case CovarianceForm::HJ_vs_F: return ProcessKind::HJ_vs_F;
    }
    return ProcessKind::HT_vs_FN;
  }();

  std::vector<double> values(R * S * k, 0.0);
  std::vector<DesignConstants> constants(R);
  detail::parallel_for(R, sc.workers, [&](std::size_t p) {
    const Population pop = generate_population(sc.law, sc.N, sc.seed, p);
    const Design design = scenario_design(sc, p);
    constants[p] = design_constants(design);
    for (std::size_t j = 0; j < S; ++j) {
      RandomStream rng(sc.seed, p, j + 1);
      const SampleDraw d = design.draw(rng);
      const auto path =
        process_path(d, pop, design.expected_size(), grid, kind, &sc.law);
      std::copy(path.values.begin(), path.values.end(),
                values.begin() + static_cast<std::ptrdiff_t>((p * S + j) * k));
    }
  });

  const double total = static_cast<double>(R * S);
  std::vector<double> mean(k, 0.0);
  for (std::size_t r = 0; r < R * S; ++r)
    for (std::size_t a = 0; a < k; ++a)
      mean[a] += values[r * k + a] / total;

  CovarianceCheck out;
  out.empirical.resize(k, k);
  out.limit.resize(k, k);
  out.standard_error.resize(k, k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      detail::BlockStats bs(R);
      for (std::size_t p = 0; p < R; ++p)
        for (std::size_t j = 0; j < S; ++j) {
          const double* x = &values[(p * S + j) * k];
          bs.add(p, (x[a] - mean[a]) * (x[b] - mean[b]));
        }
      out.empirical(a, b) = bs.mean() * total / std::max(1.0, total - 1.0);
      out.standard_error(a, b) = bs.standard_error();
      out.limit(a, b) = limit_covariance(constants.front(), sc.law, form,
                                         grid[a], grid[b]);
      const double err = std::abs(out.empirical(a, b) - out.limit(a, b));
      out.max_abs_error = std::max(out.max_abs_error, err);
      if (out.standard_error(a, b) > 0.0)
        out.max_standardized_error =
          std::max(out.max_standardized_error, err / out.standard_error(a, b));
      else if (err > 0.0)
        out.max_standardized_error = std::numeric_limits<double>::infinity();
    }
  return out;
}

enum class Statistic
{
  phi_ht,  // sqrt(n)(phi(F^HT) - phi(F))
  phi_hj,  // sqrt(n)(phi(F^HJ) - phi(F))
  ht_mean, // HT mean of y minus the population mean
};

//! Replicated centred statistic together with the variance it should have:
//! the asymptotic poverty-rate variance, or the exact design variance S_N^2
//! of the HT mean (one value per population, averaged).
struct ReplicatedStatistic
{
  std::vector<double> values;
  std::vector<double> scales; // per-replication standard deviation
  double reference_variance = 0.0;
};

inline ReplicatedStatistic replicate_statistic(const Scenario& sc, Statistic stat)
{
  sc.validate();
  const std::size_t R = sc.populations, S = sc.samples;
  ReplicatedStatistic out;
  out.values.assign(R * S, 0.0);
  out.scales.assign(R * S, 0.0);
  std::vector<double> ref_var(R, 0.0);
  std::vector<std::uint8_t> failed(R * S, 0);
  const PovertyInputs ref =
    stat == Statistic::ht_mean ? PovertyInputs{} : detail::reference_inputs(sc);
  const double root_n = std::sqrt(static_cast<double>(sc.n));

  detail::parallel_for(R, sc.workers, [&](std::size_t p) {
    const Population pop = generate_population(sc.law, sc.N, sc.seed, p);
    const Design design = scenario_design(sc, p);
    const DesignConstants c = design_constants(design);
    double scale = 0.0;
    double y_bar = 0.0;
    if (stat == Statistic::ht_mean) {
      ref_var[p] = oracle::exact_sn2(design, pop.y);
      scale = std::sqrt(ref_var[p]);
      for (double v : pop.y)
        y_bar += v / static_cast<double>(pop.size());
    } else {
      ref_var[p] = stat == Statistic::phi_ht
                     ? poverty_variance_ht(c.gamma_pi1, c.gamma_pi2, ref)
                     : poverty_variance_hj(c.gamma_pi1, ref);
      scale = std::sqrt(std::max(ref_var[p], 0.0));
    }
    for (std::size_t j = 0; j < S; ++j) {
      RandomStream rng(sc.seed, p, j + 1);
      const SampleDraw d = design.draw(rng);
      const std::size_t r = p * S + j;
      out.scales[r] = scale;
      try {
        if (stat == Statistic::ht_mean) {
          double est = 0.0;
          for (std::size_t k = 0; k < d.included.size(); ++k)
            est += pop.y[d.included[k]] / d.pi_of_included[k];
          out.values[r] = est / static_cast<double>(pop.size()) - y_bar;
        } else {
          const auto F = stat == Statistic::phi_ht ? ht_ecdf(d, pop.y, pop.size())
                                                   : hajek_ecdf(d, pop.y);
          out.values[r] =
            root_n * (poverty_rate(F, sc.alpha, sc.beta, sc.quantile_rule) - ref.phi);
        }
      } catch (const Error&) {
        failed[r] = 1;
      }
    }
  });

  std::size_t bad = 0;
  for (auto f : failed)
    bad += f;
  if (static_cast<double>(bad) > sc.max_failure_fraction * static_cast<double>(R * S))
    throw ScenarioError("failed replications exceed the tolerated fraction");
  if (bad) {
    std::vector<double> v, s;
    for (std::size_t r = 0; r < R * S; ++r)
      if (!failed[r]) {
        v.push_back(out.values[r]);
        s.push_back(out.scales[r]);
      }
    out.values = std::move(v);
    out.scales = std::move(s);
  }
  for (double v : ref_var)
    out.reference_variance += v / static_cast<double>(R);
  return out;
}

struct NormalityDiagnostic
{
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_distance = 0.0;
  std::size_t replications = 0;
};

//! Moments and Kolmogorov distance of standardized values against N(0, 1).
//! Tied values are compared at the midpoint of the empirical jump, which
//! keeps lattice-valued statistics from inflating the distance.
inline NormalityDiagnostic normality_of(std::vector<double> z)
{
  NormalityDiagnostic out;
  const double n = static_cast<double>(z.size());
  out.replications = z.size();
  double m = 0.0;
  for (double v : z)
    m += v / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : z) {
    const double d = v - m;
    m2 += d * d / n;
    m3 += d * d * d / n;
    m4 += d * d * d * d / n;
  }
  if (!(m2 > 0.0))
    throw ScenarioError("statistic has zero variance");
  out.skewness = m3 / std::pow(m2, 1.5);
  out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  std::sort(z.begin(), z.end());
  for (std::size_t i = 0; i < z.size();) {
    std::size_t j = i;
    while (j < z.size() && z[j] == z[i])
      ++j;
    const double phi = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) / n;
    out.ks_distance = std::max(out.ks_distance, std::abs(mid - phi));
    i = j;
  }
  return out;
}

inline NormalityDiagnostic normality_diagnostic(const Scenario& sc, Statistic stat)
{
  if (sc.populations * sc.samples < 1000)
    throw ParameterError("normality diagnostic needs at least 1000 replications");
  const auto rs = replicate_statistic(sc, stat);
  std::vector<double> z(rs.values.size());
  for (std::size_t r = 0; r < z.size(); ++r) {
    if (!(rs.scales[r] > 0.0))
      throw ScenarioError("statistic has zero asymptotic variance");
    z[r] = rs.values[r] / rs.scales[r];
  }
  return normality_of(std::move(z));
}

} // namespace survey::mc
