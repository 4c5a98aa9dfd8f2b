// Command-line front end for the reproduction runs.

#include <CLI11.hpp>
#include <toml.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lockstack/experiments.hpp"

namespace {

using lockstack::CommonOptions;
using lockstack::RunOutput;

// Options settable from the [run] table of the config file. Values given on the
// command line win.
class RunTable {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& target, const std::string& help) {
    CLI::Option* opt = app->add_option(flag, target, help)->capture_default_str();
    std::string key = flag.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    setters_[key] = {opt, [&target, key](const toml::node& node) { assign(node, target, key); }};
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& target, const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, target, help);
    std::string key = flag.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    setters_[key] = {opt, [&target, key](const toml::node& node) { assign(node, target, key); }};
    return opt;
  }

  void apply(const toml::table* run) const {
    if (run == nullptr) {
      return;
    }
    for (const auto& [key, node] : *run) {
      const auto it = setters_.find(std::string(key.str()));
      if (it == setters_.end()) {
        throw std::invalid_argument("config [run]: unknown key '" + std::string(key.str()) + "'");
      }
      if (it->second.first->count() == 0) {
        it->second.second(node);
      }
    }
  }

 private:
  template <typename T>
  static void assign(const toml::node& node, T& target, const std::string& key) {
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node.value_exact<bool>()) {
        target = *v;
        return;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (auto v = node.value_exact<std::int64_t>()) {
        target = static_cast<T>(*v);
        return;
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto v = node.value<double>()) {
        target = *v;
        return;
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node.value<std::string>()) {
        target = *v;
        return;
      }
    } else {
      // Vectors: a TOML array of scalars.
      if (const toml::array* arr = node.as_array()) {
        target.clear();
        for (const toml::node& item : *arr) {
          typename T::value_type value{};
          assign(item, value, key);
          target.push_back(value);
        }
        return;
      }
    }
    throw std::invalid_argument("config [run]: '" + key + "' has the wrong type");
  }

  std::map<std::string, std::pair<CLI::Option*, std::function<void(const toml::node&)>>> setters_;
};

struct Global {
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string config;
  int threads = 1;
  bool insample = false;
  bool dry_run = false;
  CLI::Option* seed_opt = nullptr;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int finish(RunOutput& run, const Global& g) {
  if (g.dry_run) {
    nlohmann::json j = run.manifest.to_json();
    j["hash"] = run.manifest.hash();
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  lockstack::write_run(g.out, run);
  for (const std::string& w : run.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::cout << "wrote " << run.files.size() + 1 << " files to " << g.out << " (manifest "
            << run.manifest.hash() << ")\n";
  if (run.failures > 0) {
    std::cerr << run.failures << " failure(s)\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combine Bayesian predictive distributions by Hyvarinen-score locking"};
  app.require_subcommand(1);
  Global g;
  g.seed_opt = app.add_option("--seed", g.seed, "Root seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "TOML config: scenario keys plus a [run] table")
      ->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  auto* loo_flag = app.add_flag("--loo", "Leave-one-out score estimates (default)");
  auto* insample_flag = app.add_flag("--insample", g.insample, "In-sample score estimates");
  loo_flag->excludes(insample_flag);
  app.add_flag("--dry-run", g.dry_run, "Validate the configuration and print the manifest");

  // nonnested
  RunTable nn_table;
  CLI::App* nn = app.add_subcommand("nonnested", "Non-nested normal models, all methods");
  std::vector<std::string> nn_scenarios{"1"};
  lockstack::NonnestedOptions nn_opts;
  long long nn_reps = 0;
  long long nn_train = 0;
  long long nn_test = 0;
  bool nn_no_quack = false;
  nn_table.add(nn, "--scenario", nn_scenarios, "Scenario ids 1-4, or 'all'")->delimiter(',');
  auto* nn_reps_opt = nn_table.add(nn, "--replications", nn_reps, "Replications per scenario");
  auto* nn_train_opt = nn_table.add(nn, "--n-train", nn_train, "Training points");
  auto* nn_test_opt = nn_table.add(nn, "--n-test", nn_test, "Test points");
  nn_table.add(nn, "--draws", nn_opts.draws, "Posterior draws per model");
  nn_table.add(nn, "--alpha", nn_opts.alpha, "Dirichlet concentration");
  nn_table.add(nn, "--restarts", nn_opts.restarts, "Quacking restarts");
  nn_table.add(nn, "--grid-size", nn_opts.grid_size, "Grid points for test normalization");
  nn_table.add_flag(nn, "--no-quacking", nn_no_quack, "Skip the quacking fit");
  nn_table.add_flag(nn, "--emit-eval-table", nn_opts.emit_eval_table,
                    "Write the evaluation table of replication 0");

  // overfit
  RunTable of_table;
  CLI::App* of = app.add_subcommand("overfit", "Regression overfitting study");
  lockstack::OverfitOptions of_opts;
  of_table.add(of, "--p-list", of_opts.p_list, "Regression dimensions")->delimiter(',');
  of_table.add(of, "--iterations", of_opts.iterations, "Iterations per dimension");
  of_table.add(of, "--n", of_opts.n, "Data points");
  of_table.add(of, "--draws", of_opts.draws, "Gibbs draws kept");
  of_table.add(of, "--warmup", of_opts.warmup, "Gibbs warmup iterations");
  of_table.add(of, "--active", of_opts.active, "Non-zero coefficients");
  of_table.add(of, "--signal", of_opts.signal, "Value of the non-zero coefficients");
  of_table.add(of, "--noise-sd", of_opts.noise_sd, "Noise standard deviation");
  of_table.add(of, "--coef-sd", of_opts.coef_sd, "Prior sd of the coefficients");

  // demo-operators
  RunTable demo_table;
  CLI::App* demo = app.add_subcommand("demo-operators", "Mixture, locking and superposition on a grid");
  lockstack::DemoOptions demo_opts;
  std::vector<std::string> demo_components{"normal:-2:1", "normal:2:1"};
  demo_table.add(demo, "--component", demo_components, "normal:<mean>:<sd> or t:<loc>:<scale>:<dof>");
  demo_table.add(demo, "--weights", demo_opts.weights, "Component weights")->delimiter(',');
  demo_table.add(demo, "--phases", demo_opts.phase_differences, "Phase differences")->delimiter(',');
  demo_table.add(demo, "--grid-size", demo_opts.grid_size, "Grid points");

  // sample-locked
  RunTable sl_table;
  CLI::App* sl = app.add_subcommand("sample-locked", "Importance sampling from the locked predictive");
  lockstack::SampleLockedOptions sl_opts;
  std::vector<double> sl_weights;
  long long sl_train = 0;
  bool sl_no_smooth = false;
  sl_table.add(sl, "--scenario", sl_opts.scenario, "Scenario id 1-4")->check(CLI::Range(1, 4));
  auto* sl_train_opt = sl_table.add(sl, "--n-train", sl_train, "Training points");
  sl_table.add(sl, "--draws", sl_opts.draws, "Posterior draws per model");
  sl_table.add(sl, "--n-samples", sl_opts.n_samples, "Proposal draws");
  sl_table.add(sl, "--models", sl_opts.models, "m1, m2 or both");
  auto* sl_weights_opt = sl_table.add(sl, "--weights", sl_weights, "Fixed locking weights")->delimiter(',');
  sl_table.add(sl, "--alpha", sl_opts.alpha, "Dirichlet concentration");
  sl_table.add(sl, "--grid-size", sl_opts.grid_size, "Grid points for the figure");
  sl_table.add_flag(sl, "--no-smooth", sl_no_smooth, "Skip Pareto smoothing of the weights");

  // score
  RunTable sc_table;
  CLI::App* sc = app.add_subcommand("score", "Fit weights for an external evaluation table");
  std::string sc_path;
  lockstack::ScoreCommandOptions sc_opts;
  sc_table.add(sc, "--table", sc_path, "Evaluation table CSV");
  sc_table.add(sc, "--alpha", sc_opts.alpha, "Dirichlet concentration");
  sc_table.add_flag(sc, "--quacking", sc_opts.quacking, "Also fit the quacking pool");
  sc_table.add(sc, "--restarts", sc_opts.restarts, "Quacking restarts");

  CLI11_PARSE(app, argc, argv);

  try {
    std::string config_text;
    toml::table config;
    if (!g.config.empty()) {
      config_text = read_file(g.config);
      config = toml::parse(config_text);
    }
    const toml::table* run_table = config["run"].as_table();
    std::optional<std::uint64_t> config_seed;
    if (auto s = config["seed"].value_exact<std::int64_t>()) {
      config_seed = static_cast<std::uint64_t>(*s);
    }
    CommonOptions common;
    common.seed = g.seed_opt->count() == 0 && config_seed ? *config_seed : g.seed;
    common.threads = g.threads;
    common.loo = !g.insample;
    common.dry_run = g.dry_run;

    auto scenario_config = [&](int id) {
      lockstack::ScenarioConfig base = lockstack::scenario_preset(id);
      return config_text.empty() ? base : lockstack::parse_scenario_toml(config_text, base);
    };

    if (nn->parsed()) {
      nn_table.apply(run_table);
      std::vector<int> ids;
      for (const std::string& s : nn_scenarios) {
        if (s == "all") {
          ids.insert(ids.end(), {1, 2, 3, 4});
        } else {
          ids.push_back(static_cast<int>(lockstack::parse_int(s)));
        }
      }
      nn_opts.scenarios.clear();
      for (int id : ids) {
        lockstack::ScenarioConfig cfg = scenario_config(id);
        if (nn_reps_opt->count() || (run_table && run_table->contains("replications"))) {
          cfg.replications = nn_reps;
        }
        if (nn_train_opt->count() || (run_table && run_table->contains("n_train"))) {
          cfg.n_train = nn_train;
        }
        if (nn_test_opt->count() || (run_table && run_table->contains("n_test"))) {
          cfg.n_test = nn_test;
        }
        cfg.seed = common.seed;
        cfg.validate();
        nn_opts.scenarios.emplace_back(id, cfg);
      }
      nn_opts.quacking = !nn_no_quack;
      auto run = lockstack::run_nonnested(nn_opts, common);
      return finish(run.output, g);
    }
    if (of->parsed()) {
      of_table.apply(run_table);
      auto run = lockstack::run_overfit(of_opts, common);
      return finish(run.output, g);
    }
    if (demo->parsed()) {
      demo_table.apply(run_table);
      demo_opts.components.clear();
      for (const std::string& c : demo_components) {
        demo_opts.components.push_back(lockstack::ComponentSpec::parse(c));
      }
      auto run = lockstack::run_demo_operators(demo_opts, common);
      return finish(run.output, g);
    }
    if (sl->parsed()) {
      sl_table.apply(run_table);
      sl_opts.config = scenario_config(sl_opts.scenario);
      if (sl_train_opt->count() || (run_table && run_table->contains("n_train"))) {
        sl_opts.config.n_train = sl_train;
      }
      if (sl_weights_opt->count() || (run_table && run_table->contains("weights"))) {
        sl_opts.weights = sl_weights;
      }
      sl_opts.smooth = !sl_no_smooth;
      auto run = lockstack::run_sample_locked(sl_opts, common);
      if (!g.dry_run && run.sample.flagged) {
        std::cerr << "warning: Pareto k above 0.7 in the importance weights\n";
      }
      return finish(run.output, g);
    }
    if (sc->parsed()) {
      sc_table.apply(run_table);
      if (sc_path.empty()) {
        throw std::invalid_argument("score: --table is required");
      }
      std::ifstream in(sc_path);
      if (!in) {
        throw std::runtime_error("cannot read '" + sc_path + "'");
      }
      const lockstack::EvalTensor tensor = lockstack::read_eval_table_csv(in);
      RunOutput run = lockstack::run_score(tensor, sc_opts, common, {{"table", sc_path}});
      return finish(run, g);
    }
  } catch (const toml::parse_error& e) {
    std::cerr << "error: config: " << e.description() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
