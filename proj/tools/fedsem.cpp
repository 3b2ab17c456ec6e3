// Command-line front end: run | partition | gradcheck | solve.
//
// Exit codes: 0 success, 2 configuration error, 3 infeasible selection,
// 4 I/O or format error, 1 anything else.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fedsem/gradcheck_suite.hpp"
#include "fedsem/harness.hpp"

namespace {

using namespace fedsem;

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path, 0);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, const std::string& strategies, const std::string& seeds,
            const std::string& out, int threads) {
  ExperimentConfig cfg = parse_config(config_path);
  apply_seed_override(cfg);
  if (!strategies.empty()) set_config_value(cfg, "strategies", strategies);
  if (!seeds.empty()) set_config_value(cfg, "seeds", seeds);
  if (!out.empty()) set_config_value(cfg, "output_dir", out);
  if (threads > 0) set_config_value(cfg, "threads", std::to_string(threads));
  const auto result = run_experiment(cfg);
  write_outputs(cfg, result);
  std::cout << emit_summary(result.rows);
  std::cout << "\nwrote " << (std::filesystem::path(cfg.output_dir) / "rounds.csv").string() << '\n';
  return 0;
}

int cmd_partition(const std::string& config_path, std::uint64_t seed) {
  ExperimentConfig cfg = parse_config(config_path);
  apply_seed_override(cfg);
  if (seed != 0) cfg.seeds = {seed};
  const SemComModel model(cfg.semcom);
  const auto setup = prepare_seed(cfg, model, cfg.seeds.front());
  std::cout << "seed " << cfg.seeds.front() << ", alpha_dir " << cfg.alpha_dir << ", validation "
            << setup.validation.size() << " images\n";
  for (std::size_t k = 0; k < setup.client_data.size(); ++k) {
    std::cout << "client " << k << ": " << setup.client_data[k].size() << " images\n";
  }
  return 0;
}

int cmd_gradcheck(double tolerance) {
  bool ok = true;
  for (const auto& [name, r] : run_gradcheck_suite(tolerance)) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << name << ": max relative error " << r.max_relative_error
              << " (" << r.checked << " entries, " << r.excluded << " kink-excluded)\n";
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

int cmd_solve(const std::string& path) {
  const auto prob = parse_selection_problem(read_file(path));
  std::cout << format_plan(solve_allocation(prob));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated semantic communication simulator"};
  app.require_subcommand(1);

  std::string config, strategies, seeds, out, solve_path;
  int threads = 0;
  std::uint64_t partition_seed = 0;
  double tolerance = 1e-6;

  auto* run = app.add_subcommand("run", "Run strategies over seeds and write rounds.csv and summary.txt");
  run->add_option("config", config, "Config file (key = value)")->required();
  run->add_option("--strategy", strategies, "Comma-separated: baseline, utilitarian, prop_fair");
  run->add_option("--seed", seeds, "Comma-separated seeds");
  run->add_option("--out", out, "Output directory");
  run->add_option("--threads", threads, "Concurrent client trainers per round");

  auto* part = app.add_subcommand("partition", "Print the client partition for one seed");
  part->add_option("config", config, "Config file")->required();
  part->add_option("--seed", partition_seed, "Seed");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad->add_option("--tolerance", tolerance, "Maximum relative error");

  auto* solve = app.add_subcommand("solve", "Solve one epoch-allocation instance");
  solve->add_option("file", solve_path, "Instance file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, strategies, seeds, out, threads);
    if (*part) return cmd_partition(config, partition_seed);
    if (*grad) return cmd_gradcheck(tolerance);
    if (*solve) return cmd_solve(solve_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
