#include "cli.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <iostream>

namespace fs = std::filesystem;
using namespace survey;
using namespace survey::cli;

namespace {

int run_simulate(const std::string& config_path,
                 const fs::path& out_dir,
                 bool paper_scale,
                 unsigned workers,
                 std::optional<std::uint64_t> seed)
{
  if (!fs::exists(config_path))
    throw UsageError("config file not found: " + config_path);
  SimulationConfig cfg = parse_simulation_config(load_json_argument(config_path));
  if (paper_scale) {
    cfg.populations = 1000;
    cfg.samples = 1000;
  }
  if (seed)
    cfg.seed = *seed;
  if (workers < 1)
    throw UsageError("--workers must be at least 1");

  const fs::path files[] = { out_dir / "rb_estimators.csv",
                             out_dir / "rb_variance.csv",
                             out_dir / "coverage.csv",
                             out_dir / "manifest.json" };
  try {
    fs::create_directories(out_dir);
    json manifest;
    manifest["tool"] = "survey";
    manifest["version"] = version;
    manifest["compiler"] = __VERSION__;
    manifest["seed"] = cfg.seed;
    manifest["populations"] = cfg.populations;
    manifest["samples"] = cfg.samples;
    manifest["alpha"] = cfg.alpha;
    manifest["beta"] = cfg.beta;
    manifest["quantile_rule"] = to_string(cfg.quantile_rule);
    manifest["workers"] = workers;

    std::vector<std::vector<mc::MonteCarloReport>> grid(cfg.designs.size());
    for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
      for (const auto& s : cfg.sizes) {
        mc::Scenario sc;
        sc.N = s.N;
        sc.n = s.n;
        sc.design = cfg.designs[d];
        sc.law = cfg.law;
        sc.alpha = cfg.alpha;
        sc.beta = cfg.beta;
        sc.populations = cfg.populations;
        sc.samples = cfg.samples;
        sc.seed = cfg.seed;
        sc.quantile_rule = cfg.quantile_rule;
        sc.workers = workers;
        std::cerr << "running " << mc::to_string(sc.design) << " " << column_name(s)
                  << " ..." << std::flush;
        grid[d].push_back(mc::run_scenario(sc));
        const auto& r = grid[d].back();
        std::cerr << " " << fmt(r.seconds) << " s\n";
        json cell;
        cell["design"] = mc::to_string(sc.design);
        cell["N"] = s.N;
        cell["n"] = s.n;
        cell["replications"] = r.replications;
        cell["failures"] = r.failures;
        cell["seconds"] = r.seconds;
        cell["warnings"] = r.warnings;
        manifest["cells"].push_back(cell);
      }
    }
    const Tables t = render_tables(cfg, grid);
    write_file(files[0], t.rb_estimators);
    write_file(files[1], t.rb_variance);
    write_file(files[2], t.coverage);
    write_file(files[3], manifest.dump(2) + "\n");
  } catch (...) {
    for (const auto& f : files) {
      std::error_code ec;
      fs::remove(f, ec);
    }
    throw;
  }
  return exit_ok;
}

int run_oracle(const std::string& design_arg, const fs::path& out_dir, bool reference)
{
  const Design d = parse_design(load_json_argument(design_arg));
  const std::string table = render_conditions(d, reference);
  fs::create_directories(out_dir);
  write_file(out_dir / "conditions.csv", table);
  std::cout << table;
  return exit_ok;
}

int run_calibrate(const std::string& pi_path,
                  std::size_t n,
                  const fs::path& out_path,
                  double tol,
                  int max_iter)
{
  const auto target = parse_numbers(read_file(pi_path));
  CalibrationResult r;
  try {
    r = calibrate_rejective_p(target, n, tol, max_iter);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  if (out_path.has_parent_path())
    fs::create_directories(out_path.parent_path());
  write_file(out_path, render_calibration(target, r));
  std::cout << "max_abs_residual " << fmt(r.residual) << " after " << r.iterations
            << " iterations\n";
  return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Horvitz-Thompson and Hajek empirical cdf toolkit" };
  app.require_subcommand(1);

  std::string config, out_dir = "out";
  bool paper_scale = false;
  unsigned workers = 1;
  std::optional<std::uint64_t> seed;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study of poverty-rate estimators");
  sim->add_option("--config", config, "JSON scenario grid")->required();
  sim->add_option("--out", out_dir, "output directory");
  sim->add_flag("--paper-scale", paper_scale, "1000 populations x 1000 samples");
  sim->add_option("--workers", workers, "worker threads");
  sim->add_option("--seed", seed, "override the configured seed");

  std::string design, oracle_out = "out";
  bool reference = false;
  auto* orc = app.add_subcommand("oracle", "exact condition report for a small design");
  orc->alias("conditions");
  orc->add_option("--design", design, "design as JSON text or a JSON file")->required();
  orc->add_option("--out", oracle_out, "output directory");
  orc->add_flag("--reference", reference, "add D(P||R) against the rejective design");

  std::string pi_path, cal_out = "p.csv";
  std::size_t n = 0;
  double tol = 1e-10;
  int max_iter = 1000;
  auto* cal = app.add_subcommand("calibrate", "rejective working probabilities from target pi");
  cal->add_option("--pi", pi_path, "file of target inclusion probabilities")->required();
  cal->add_option("--n", n, "sample size")->required();
  cal->add_option("--out", cal_out, "output file");
  cal->add_option("--tol", tol, "max-norm tolerance");
  cal->add_option("--max-iter", max_iter, "iteration limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*sim)
      return run_simulate(config, out_dir, paper_scale, workers, seed);
    if (*orc)
      return run_oracle(design, oracle_out, reference);
    if (*cal)
      return run_calibrate(pi_path, n, cal_out, tol, max_iter);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_runtime;
  }
  return exit_usage;
}
