#pragma once

// Command-line layer: configuration parsing, design specs and table output.

#include <survey/survey.hpp>

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace survey::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;
inline constexpr int exit_runtime = 3;

inline constexpr const char* version = "0.1.0";

//! Thrown for malformed configuration or arguments (exit code 2).
class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

using nlohmann::json;

//! Fixed 6-significant-digit numeric format.
inline std::string fmt(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline SuperPopulationLaw parse_law(const json& j)
{
  const std::string kind = j.value("kind", "exponential");
  if (kind == "exponential")
    return SuperPopulationLaw::exponential(j.value("rate", 1.0));
  if (kind == "uniform01")
    return SuperPopulationLaw::uniform01();
  if (kind == "discrete")
    return SuperPopulationLaw::discrete(j.at("points").get<std::vector<double>>(),
                                        j.at("masses").get<std::vector<double>>());
  throw UsageError("unknown law kind '" + kind + "'");
}

struct SizePair
{
  std::size_t N;
  std::size_t n;
};

//! Parsed `simulate` configuration.
struct SimulationConfig
{
  SuperPopulationLaw law = SuperPopulationLaw::exponential(1.0);
  double alpha = 0.5;
  double beta = 0.6;
  std::vector<mc::DesignKind> designs;
  std::vector<SizePair> sizes;
  std::size_t populations = 200;
  std::size_t samples = 200;
  std::uint64_t seed = 1;
  QuantileRule quantile_rule = QuantileRule::Interpolated;
};

inline QuantileRule parse_quantile_rule(const std::string& name)
{
  if (name == "interpolated")
    return QuantileRule::Interpolated;
  if (name == "infimum")
    return QuantileRule::Infimum;
  throw UsageError("unknown quantile rule '" + name + "'");
}

inline const char* to_string(QuantileRule rule)
{
  return rule == QuantileRule::Interpolated ? "interpolated" : "infimum";
}

inline SimulationConfig parse_simulation_config(const json& j)
{
  try {
    SimulationConfig c;
    if (j.contains("law"))
      c.law = parse_law(j.at("law"));
    c.alpha = j.value("alpha", 0.5);
    c.beta = j.value("beta", 0.6);
    for (const auto& d : j.at("designs"))
      c.designs.push_back(mc::design_kind_from_string(d.get<std::string>()));
    for (const auto& s : j.at("sizes"))
      c.sizes.push_back({ s.at("N").get<std::size_t>(), s.at("n").get<std::size_t>() });
    c.populations = j.value("populations", c.populations);
    c.samples = j.value("samples", c.samples);
    c.seed = j.value("seed", c.seed);
    if (j.contains("quantile_rule"))
      c.quantile_rule = parse_quantile_rule(j.at("quantile_rule").get<std::string>());
    if (c.designs.empty() || c.sizes.empty())
      throw UsageError("configuration needs at least one design and one size");
    return c;
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  } catch (const ParameterError& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
}

inline std::string column_name(const SizePair& s)
{
  return "N=" + std::to_string(s.N) + " n=" + std::to_string(s.n);
}

//! The three tables for a grid of reports indexed [design][size].
struct Tables
{
  std::string rb_estimators;
  std::string rb_variance;
  std::string coverage;
};

inline Tables render_tables(const SimulationConfig& c,
                            const std::vector<std::vector<mc::MonteCarloReport>>& grid)
{
  using mc::Center;
  using mc::Estimator;
  std::ostringstream rb, av, cov;
  std::string cols;
  for (const auto& s : c.sizes)
    cols += "," + column_name(s);
  rb << "design,estimator,center" << cols << "\n";
  cov << "design,estimator,center" << cols << "\n";
  av << "design,estimator" << cols << "\n";

  for (std::size_t d = 0; d < c.designs.size(); ++d) {
    const std::string name = mc::to_string(c.designs[d]);
    const bool si = c.designs[d] == mc::DesignKind::SI;
    const std::vector<std::pair<Estimator, std::string>> ests =
      si ? std::vector<std::pair<Estimator, std::string>>{ { Estimator::HJ, "HT-HJ" } }
         : std::vector<std::pair<Estimator, std::string>>{ { Estimator::HT, "HT" },
                                                           { Estimator::HJ, "HJ" } };
    for (const auto& [est, label] : ests) {
      for (Center center : { Center::FN, Center::F }) {
        const std::string head = name + "," + label + "," +
                                 (center == Center::FN ? "phi(F_N)" : "phi(F)");
        rb << head;
        cov << head;
        for (const auto& r : grid[d]) {
          rb << "," << fmt(r.rb_phi.at({ est, center }).value);
          cov << "," << fmt(r.coverage.at({ est, center }).value);
        }
        rb << "\n";
        cov << "\n";
      }
      av << name << "," << label;
      for (const auto& r : grid[d])
        av << "," << fmt(r.rb_av.at(est).value);
      av << "\n";
    }
  }
  return { rb.str(), av.str(), cov.str() };
}

inline void write_file(const std::filesystem::path& p, const std::string& body)
{
  std::ofstream out(p, std::ios::binary);
  if (!out)
    throw Error("cannot write " + p.string());
  out << body;
}

inline std::string read_file(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw UsageError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

//! Design from JSON, e.g. {"kind":"srswor","N":6,"n":3},
//! {"kind":"bernoulli","N":3,"p":0.5}, {"kind":"poisson","pi":[...]},
//! {"kind":"rejective","n":2,"p":[...]}.
inline Design parse_design(const json& j)
{
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "srswor")
      return Design::srswor(j.at("N").get<std::size_t>(), j.at("n").get<std::size_t>());
    if (kind == "bernoulli")
      return Design::bernoulli(j.at("N").get<std::size_t>(), j.at("p").get<double>());
    if (kind == "poisson")
      return Design::poisson(j.at("pi").get<std::vector<double>>());
    if (kind == "rejective")
      return Design::rejective(j.at("p").get<std::vector<double>>(),
                               j.at("n").get<std::size_t>());
    throw UsageError("unknown design kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid design: ") + e.what());
  } catch (const ParameterError& e) {
    throw UsageError(std::string("invalid design: ") + e.what());
  }
}

//! Inline JSON when the argument starts with '{', a file path otherwise.
inline json load_json_argument(const std::string& arg)
{
  const std::string text =
    (!arg.empty() && arg.front() == '{') ? arg : read_file(arg);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed JSON: ") + e.what());
  }
}

//! Condition report as CSV, with the divergence from the rejective design
//! having the same first-order inclusion probabilities when requested.
inline std::string render_conditions(const Design& d, bool with_reference)
{
  const auto e = oracle::enumerate_design(d);
  const double n = d.expected_size();
  const auto rep = oracle::check_conditions(e, n);
  std::ostringstream out;
  out << "condition,statistic,observed,bound,implied_constant\n";
  for (const auto& row : rep.entries)
    out << row.condition << ",\"" << row.statistic << "\"," << fmt(row.observed)
        << ",\"" << row.bound << "\"," << fmt(row.implied_constant) << "\n";
  if (with_reference) {
    const auto pi = oracle::first_order_pi(e);
    const double rounded = std::round(n);
    double divergence = std::numeric_limits<double>::infinity();
    if (std::abs(n - rounded) <= 1e-9 && rounded >= 1.0 && rounded + 1.0 <= static_cast<double>(d.N())) {
      // rescale so the targets sum to n exactly
      std::vector<double> target(pi);
      for (double& t : target)
        t *= rounded / n;
      const auto cal = calibrate_rejective_p(target, static_cast<std::size_t>(rounded));
      const auto R = oracle::enumerate_design(
        Design::rejective(cal.p, static_cast<std::size_t>(rounded)));
      divergence = oracle::divergence_from_rejective(e, R);
    }
    out << "A1,\"D(P||R) with R rejective of equal pi\"," << fmt(divergence)
        << ",\"-> 0\"," << fmt(divergence) << "\n";
  }
  return out.str();
}

inline std::vector<double> parse_numbers(const std::string& text)
{
  std::vector<double> v;
  std::string token;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t')
        ch = ' ';
    std::istringstream ls(line);
    while (ls >> token) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(token, &used));
        if (used != token.size())
          throw UsageError("bad number '" + token + "'");
      } catch (const std::logic_error&) {
        throw UsageError("bad number '" + token + "'");
      }
    }
  }
  return v;
}

inline std::string render_calibration(const std::vector<double>& target,
                                      const CalibrationResult& r)
{
  std::ostringstream out;
  out << "# max_abs_residual," << fmt(r.residual) << "\n";
  out << "# iterations," << r.iterations << "\n";
  out << "unit,p,target_pi\n";
  char buf[64];
  for (std::size_t i = 0; i < target.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", r.p[i]);
    out << i << "," << buf << "," << fmt(target[i]) << "\n";
  }
  return out.str();
}

} // namespace survey::cli
