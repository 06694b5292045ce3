// corrflow: config-driven experiment runner for spin-chain correlation
// functions and equilibration bounds.
//
// Exit codes: 0 ok, 2 invariant violation (including cache corruption),
// 3 config error.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "corrflow/experiments.hpp"
#include "corrflow/version.hpp"

namespace {

struct Overrides {
  std::optional<std::string> experiment;
  std::optional<int> length;
  std::optional<double> gamma, lambda, j1, j2;
  std::optional<std::string> boundary;
  std::optional<double> beta, dt, t_max, weight_cutoff;
  std::optional<double> eps_min, eps_max;
  std::optional<int> eps_points, bins;
  std::optional<std::uint64_t> samples, seed;
  std::optional<bool> use_cache;
  std::optional<std::string> output_dir;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--experiment", ov.experiment, "Experiment name");
  cmd->add_option("--beta", ov.beta, "Inverse temperature");
  cmd->add_option("--spec.length", ov.length, "Chain length L");
  cmd->add_option("--spec.gamma", ov.gamma, "Transverse field");
  cmd->add_option("--spec.lambda", ov.lambda, "Longitudinal field");
  cmd->add_option("--spec.j1", ov.j1, "Nearest-neighbour ZZ coupling");
  cmd->add_option("--spec.j2", ov.j2, "Next-nearest ZZ coupling");
  cmd->add_option("--spec.boundary", ov.boundary, "open or periodic");
  cmd->add_option("--grid.dt", ov.dt, "Time step");
  cmd->add_option("--grid.t_max", ov.t_max, "Grid horizon");
  cmd->add_option("--epsilon_grid.min_factor", ov.eps_min,
                  "Smallest epsilon in units of sigma_G");
  cmd->add_option("--epsilon_grid.max_factor", ov.eps_max,
                  "Largest epsilon in units of sigma_G");
  cmd->add_option("--epsilon_grid.points", ov.eps_points, "Sweep points");
  cmd->add_option("--mc.samples", ov.samples, "Monte Carlo samples");
  cmd->add_option("--mc.seed", ov.seed, "Master seed");
  cmd->add_option("--bins", ov.bins, "Histogram bins");
  cmd->add_option("--weight_cutoff", ov.weight_cutoff,
                  "Drop distribution entries below this weight");
  cmd->add_option("--use_cache", ov.use_cache, "Spectrum cache on/off");
  cmd->add_option("--output_dir", ov.output_dir, "Artifact directory");
}

nlohmann::json apply_overrides(nlohmann::json j, const Overrides& ov) {
  auto set = [&](const char* key, const auto& opt) {
    if (opt) j[key] = *opt;
  };
  auto set_nested = [&](const char* block, const char* key, const auto& opt) {
    if (opt) j[block][key] = *opt;
  };
  set("experiment", ov.experiment);
  set("beta", ov.beta);
  set("bins", ov.bins);
  set("weight_cutoff", ov.weight_cutoff);
  set("use_cache", ov.use_cache);
  set("output_dir", ov.output_dir);
  set_nested("spec", "length", ov.length);
  set_nested("spec", "gamma", ov.gamma);
  set_nested("spec", "lambda", ov.lambda);
  set_nested("spec", "j1", ov.j1);
  set_nested("spec", "j2", ov.j2);
  set_nested("spec", "boundary", ov.boundary);
  set_nested("grid", "dt", ov.dt);
  set_nested("grid", "t_max", ov.t_max);
  set_nested("epsilon_grid", "min_factor", ov.eps_min);
  set_nested("epsilon_grid", "max_factor", ov.eps_max);
  set_nested("epsilon_grid", "points", ov.eps_points);
  set_nested("mc", "samples", ov.samples);
  set_nested("mc", "seed", ov.seed);
  return j;
}

corrflow::RunConfig load_with_overrides(const std::string& path,
                                        const Overrides& ov) {
  std::ifstream in(path);
  if (!in) throw corrflow::ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw corrflow::ConfigError("config parse error: " + std::string(e.what()));
  }
  return corrflow::parse_config(apply_overrides(std::move(j), ov));
}

int run_command(const std::string& config_path, const Overrides& ov) {
  auto cfg = load_with_overrides(config_path, ov);
  auto bundle = corrflow::run_experiment(cfg);
  std::printf("wrote %zu files to %s\n", bundle.files.size(),
              bundle.output_dir.string().c_str());
  return 0;
}

int verify_command(const std::string& config_path, const Overrides& ov) {
  auto cfg = load_with_overrides(config_path, ov);
  auto result = corrflow::verify_invariants(cfg);
  for (const auto& name : result.passed)
    std::printf("PASS  %s\n", name.c_str());
  for (const auto& name : result.failed)
    std::printf("FAIL  %s\n", name.c_str());
  std::printf("%zu passed, %zu failed\n", result.passed.size(),
              result.failed.size());
  return result.ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"correlation functions of finite spin chains from exact "
               "spectral data"};
  app.set_version_flag("--version", corrflow::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* run = app.add_subcommand("run", "Run an experiment from a config");
  run->add_option("config", config_path, "JSON run config")->required();
  add_override_flags(run, ov);

  auto* verify = app.add_subcommand("verify", "Run the invariant suites only");
  verify->add_option("config", config_path, "JSON run config")->required();
  add_override_flags(verify, ov);

  auto* cache = app.add_subcommand("cache", "Inspect the spectrum cache");
  auto* cache_ls = cache->add_subcommand("ls", "List cached spectra");
  auto* cache_rm = cache->add_subcommand("rm", "Remove cached spectra");
  bool rm_all = false;
  std::vector<std::string> rm_files;
  cache_rm->add_flag("--all", rm_all, "Remove every cached spectrum");
  cache_rm->add_option("files", rm_files, "Cache file names to remove");
  cache->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    if (run->parsed()) return run_command(config_path, ov);
    if (verify->parsed()) return verify_command(config_path, ov);
    if (cache_ls->parsed()) {
      for (const auto& entry : corrflow::cache_list())
        std::printf("%s  %ju bytes\n", entry.file.c_str(),
                    static_cast<uintmax_t>(entry.bytes));
      return 0;
    }
    if (cache_rm->parsed()) {
      std::size_t removed = 0;
      if (rm_all) {
        removed = corrflow::cache_remove_all();
      } else {
        if (rm_files.empty())
          throw corrflow::ConfigError("cache rm: pass file names or --all");
        for (const auto& f : rm_files)
          removed += corrflow::cache_remove(f) ? 1 : 0;
      }
      std::printf("removed %zu file(s)\n", removed);
      return 0;
    }
  } catch (const corrflow::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const corrflow::InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 2;
  } catch (const corrflow::CacheCorruption& e) {
    std::fprintf(stderr, "cache corruption: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
