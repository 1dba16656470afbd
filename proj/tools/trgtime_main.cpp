#include <cstdio>
#include <exception>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "trgtime/runner.hpp"

// Exit codes: 0 success, 1 usage or configuration errors, 2 runtime
// failures after a valid configuration.
int main(int argc, char** argv) {
  CLI::App app{"coarse-grained real-time evolution of the transverse Ising chain"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> raw_sets;

  const std::vector<std::pair<std::string, std::string>> kinds = {
      {"spectrum", "energies of the coarse step operator (oracle: ed-exact)"},
      {"lambda-scan", "vacuum occupation density over a coupling grid"},
      {"evolve-one", "single wave packet time series"},
      {"evolve-two", "two-packet collision time series"},
      {"longitudinal", "vacuum driven by a longitudinal field"},
      {"q-sweep", "isometry matrix eigenvalues from Euclidean to real time"},
      {"tebd-compare", "MPS walker against a dense reference"},
  };

  for (const auto& [name, desc] : kinds) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_file, "flat key = value config file");
    auto push = [&overrides](std::string key) {
      return [&overrides, key = std::move(key)](const std::string& v) {
        overrides.emplace_back(key, v);
      };
    };
    sub->add_option_function<std::string>("--out", push("out"),
                                          "output directory");
    sub->add_option_function<std::string>(
        "--cache-dir", push("cache_dir"),
        "step-operator cache (default $TRGTIME_CACHE_DIR, else --out)");
    sub->add_option_function<std::string>("--sites", push("sites"),
                                          "chain length, a power of two");
    sub->add_option_function<std::string>("--lambda", push("lambda"),
                                          "nearest-neighbour coupling");
    sub->add_option_function<std::string>("--dt", push("dt"), "time step");
    sub->add_option_function<std::string>("--dcut", push("dcut"),
                                          "kept bond dimension");
    sub->add_option_function<std::string>("--steps", push("steps"),
                                          "number of evolution steps");
    sub->add_option_function<std::string>("--epsilon", push("epsilon"),
                                          "longitudinal drive strength");
    sub->add_option_function<std::string>(
        "--oracle", push("oracle"),
        "reference series: ed-exact | ed-trotter | tebd | none");
    sub->add_flag_callback(
        "--override-dt-guard",
        [&overrides] { overrides.emplace_back("allow_large_dt", "true"); },
        "accept dt > 0.05 (expect large discarded weight)");
    sub->add_flag_callback(
        "--pointwise-pct",
        [&overrides] { overrides.emplace_back("pointwise_pct", "true"); },
        "percent metric as the pointwise mean of |a-b|/|b|");
    sub->add_option("--set", raw_sets,
                    "any config key as key=value, repeatable");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    trgtime::ExperimentConfig cfg;
    if (!config_file.empty()) cfg = trgtime::parse_config(config_file);
    cfg.kind =
        trgtime::experiment_kind_from(app.get_subcommands().front()->get_name());
    for (const auto& [key, value] : overrides)
      trgtime::apply_setting(cfg, key, value);
    for (const auto& kv : raw_sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("--set: expected key=value, got '" + kv +
                                    "'");
      trgtime::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }

    const trgtime::RunArtifacts art = trgtime::run_experiment(cfg);
    for (const auto& path : art.csv_files)
      std::printf("wrote %s\n", path.string().c_str());
    std::printf("wrote %s\n", art.manifest.string().c_str());
    if (art.diff)
      std::printf("diff: mean_abs=%.6g mean_pct=%.6g max_abs=%.6g\n",
                  art.diff->mean_abs_diff, art.diff->mean_pct_diff,
                  art.diff->max_abs_diff);
    std::printf("done in %.2fs%s\n", art.wall_seconds,
                art.cache_hit ? " (cached step operator)" : "");
    return 0;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
