#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "lockstack/draws.hpp"
#include "lockstack/grid_density.hpp"
#include "lockstack/pooling.hpp"
#include "lockstack/rng.hpp"

namespace lockstack {

/// Importance sample; log_weights are self-normalized (they log-sum-exp to 0).
struct WeightedSample {
  Eigen::VectorXd values;
  Eigen::VectorXd log_weights;
  std::optional<double> pareto_k;
  double ess = 0.0;
  /// Pareto k above kParetoKThreshold.
  bool flagged = false;

  [[nodiscard]] Eigen::VectorXd weights() const { return log_weights.array().exp(); }
};

/// Proposal draws per RNG stream; stream c produces draws [c * kSamplerChunk, ...).
inline constexpr Eigen::Index kSamplerChunk = 1024;

/// Importance sampling from the locked predictive prod_k pi_k^wk / Z.
///
/// Proposal: the equal-weight mixture of the model predictives (pick a model,
/// pick one of its draws, sample y). Log weight:
///   sum_k w_k log pi_k(y) - log((1/K) sum_k pi_k(y))
/// with pi_k the Monte Carlo predictive density over the same draws. Weights are
/// Pareto-smoothed when `smooth` is set. The result does not depend on `threads`.
WeightedSample sample_locked(std::span<const Draws> models, const SimplexWeights& w,
                             Eigen::Index n_samples, const Rng& rng, bool smooth = true,
                             int threads = 1);

struct WeightedMoments {
  double mean;
  double variance;
  double mean_se;
  double variance_se;
};

/// Self-normalized mean and variance with delta-method standard errors.
WeightedMoments weighted_moments(const WeightedSample& sample);

/// {pareto_k, ess, flagged}; pareto_k is null when not estimable.
nlohmann::json diagnostics_json(const WeightedSample& sample);

/// Gaussian kernel density estimate of the weighted sample on a grid.
GridDensity weighted_kde(const WeightedSample& sample, double lo, double hi, Eigen::Index m,
                         double bandwidth = 0.0);

struct ModeBoundReport {
  enum class Status { ok, violated, skipped };
  Status status = Status::skipped;
  std::string reason;
  double locked_mode = 0.0;
  double lower = 0.0;  // smallest component mode minus one cell
  double upper = 0.0;  // largest component mode plus one cell
  bool locked_unimodal = false;
};

/// Checks that the locked pool of unimodal components is unimodal with its mode
/// between the extreme component modes (up to one grid cell). Skipped with a
/// reason when some component is not unimodal on the grid.
ModeBoundReport mode_bound_check(std::span<const GridDensity> components, const SimplexWeights& w);

nlohmann::json to_json(const ModeBoundReport& report);

}  // namespace lockstack
