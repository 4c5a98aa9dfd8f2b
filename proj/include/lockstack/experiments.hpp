#pragma once

// Reproduction runs behind the command-line tool. Every run returns its output
// files as strings so callers (and tests) can compare them before anything is
// written to disk.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lockstack/baselines.hpp"
#include "lockstack/eval_tensor.hpp"
#include "lockstack/grid_density.hpp"
#include "lockstack/io.hpp"
#include "lockstack/locked_sampler.hpp"
#include "lockstack/models.hpp"
#include "lockstack/optimizer.hpp"

namespace lockstack {

struct CommonOptions {
  std::uint64_t seed = 1;
  int threads = 1;
  /// Leave-one-out score estimates in the Hyvarinen objectives (otherwise in-sample).
  bool loo = true;
  /// Validate options and build the manifest, then return without computing.
  bool dry_run = false;
};

struct RunOutput {
  RunManifest manifest;
  std::map<std::string, std::string> files;  // file name -> contents
  std::vector<std::string> warnings;
  int failures = 0;
};

/// Writes every file plus manifest.json (with timestamps) into `dir`.
void write_run(const std::filesystem::path& dir, RunOutput& run);

// ---------------------------------------------------------------------------
// Non-nested normal models.

struct NonnestedOptions {
  /// (scenario id, configuration) pairs; ids select RNG streams and label rows.
  std::vector<std::pair<int, ScenarioConfig>> scenarios{{1, scenario_preset(1)}};
  Eigen::Index draws = 4000;
  double alpha = kDirichletConcentration;
  int restarts = 10;
  bool quacking = true;
  Eigen::Index grid_size = kDefaultGridSize;
  /// Also emit the evaluation table of replication 0 of each scenario.
  bool emit_eval_table = false;
};

struct ReplicationResult {
  int scenario = 0;
  Eigen::Index replication = 0;
  std::vector<MethodReport> reports;  // in kAllMethods order (quacking last, optional)
  std::optional<FitResult> locking_fit;
  std::optional<FitResult> quacking_fit;
  Eigen::Index high_pareto_k = 0;
  std::string eval_table;
  std::string error;
};

/// One replication: simulate, draw from both posteriors, fit every method and
/// score it on the test split. Streams: root(seed).split(scenario).split(r), then
/// data 0, M1 1, M2 2, quacking restarts 4.
ReplicationResult run_replication(int scenario, const ScenarioConfig& config, Eigen::Index r,
                                  const NonnestedOptions& options, const CommonOptions& common);

struct NonnestedRun {
  RunOutput output;
  std::vector<ReplicationResult> replications;
};

/// Writes results.csv, weights_summary.csv, quacking.csv, weights.svg and
/// log_scores.svg.
NonnestedRun run_nonnested(const NonnestedOptions& options, const CommonOptions& common);

/// `scenario,replication,method,w1..wK,test_log_score,test_hyva_score`.
std::string results_csv(std::span<const ReplicationResult> reps, std::string_view comment);

// ---------------------------------------------------------------------------
// Regression overfitting study.

struct OverfitOptions {
  std::vector<Eigen::Index> p_list{1, 25, 50, 75, 100};
  int iterations = 10;
  Eigen::Index n = 100;
  Eigen::Index draws = 1000;
  Eigen::Index warmup = 200;
  Eigen::Index active = 3;
  double signal = 0.3;
  double noise_sd = 1.0;
  double coef_sd = 10.0;
};

/// Per-point means over the n training points.
struct OverfitRow {
  Eigen::Index p = 0;
  int iter = 0;
  double insample_lpd = 0.0;
  double loo_lpd = 0.0;
  double insample_hyva = 0.0;
  double loo_hyva = 0.0;
  Eigen::Index high_pareto_k = 0;
};

/// One fit: design with standard-normal columns, the first `active` coefficients
/// equal to `signal`, noise sd `noise_sd`. Streams: root(seed).split(p).split(iter),
/// then data 0, sampler 1.
OverfitRow overfit_iteration(Eigen::Index p, int iter, const OverfitOptions& options,
                             const CommonOptions& common);

struct OverfitRun {
  RunOutput output;
  std::vector<OverfitRow> rows;
};

/// Writes overfit.csv and overfit.svg.
OverfitRun run_overfit(const OverfitOptions& options, const CommonOptions& common);

// ---------------------------------------------------------------------------
// Operator demo on known densities.

struct ComponentSpec {
  enum class Kind { normal, student_t };
  Kind kind = Kind::normal;
  double location = 0.0;
  double scale = 1.0;
  double dof = 0.0;  // student_t only

  [[nodiscard]] double log_density(double y) const;
  [[nodiscard]] std::string to_string() const;

  /// "normal:<mean>:<sd>" or "t:<location>:<scale>:<dof>".
  static ComponentSpec parse(std::string_view text);
};

struct DemoOptions {
  std::vector<ComponentSpec> components{{ComponentSpec::Kind::normal, -2.0, 1.0, 0.0},
                                        {ComponentSpec::Kind::normal, 2.0, 1.0, 0.0}};
  /// Empty means uniform.
  std::vector<double> weights;
  /// Component k gets phase k * delta for each listed delta.
  std::vector<double> phase_differences{1.5707963267948966, 3.141592653589793};
  Eigen::Index grid_size = kDefaultGridSize;
};

struct DemoRun {
  RunOutput output;
  std::vector<GridDensity> components;
  GridDensity mixture;
  GridDensity locking;
  std::vector<GridDensity> superpositions;
  ModeBoundReport mode_bound;
};

/// Writes component_<k>.csv, mixture.csv, locking.csv, superposition_<j>.csv,
/// mode_bound.json and operators.svg.
DemoRun run_demo_operators(const DemoOptions& options, const CommonOptions& common);

// ---------------------------------------------------------------------------
// Locked-predictive sampler.

struct SampleLockedOptions {
  int scenario = 3;
  ScenarioConfig config = scenario_preset(3);
  Eigen::Index draws = 4000;
  Eigen::Index n_samples = 20000;
  /// "m1", "m2" or "both".
  std::string models = "both";
  /// Fitted by Hyvarinen locking when absent.
  std::optional<std::vector<double>> weights;
  double alpha = kDirichletConcentration;
  bool smooth = true;
  Eigen::Index grid_size = 801;
};

struct SampleLockedRun {
  RunOutput output;
  WeightedSample sample;
  std::optional<SimplexWeights> weights;
  WeightedMoments moments{};
};

/// Streams: root(seed).split(scenario), then data 0, M1 1, M2 2, sampler 3.
/// Writes samples.csv, train.csv, diagnostics.json, summary.json and locked.svg.
SampleLockedRun run_sample_locked(const SampleLockedOptions& options, const CommonOptions& common);

// ---------------------------------------------------------------------------
// Weights for an external evaluation table.

struct ScoreCommandOptions {
  double alpha = kDirichletConcentration;
  bool quacking = false;
  int restarts = 10;
};

/// Writes scores.csv (`model_id,loo_elpd,high_pareto_k,total_hyva`) and
/// weights.json (locking, stacking, selections and optionally quacking).
RunOutput run_score(const EvalTensor& tensor, const ScoreCommandOptions& options,
                    const CommonOptions& common, std::map<std::string, std::string> config = {});

}  // namespace lockstack
