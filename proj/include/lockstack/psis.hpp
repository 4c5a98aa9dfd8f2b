#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <span>

namespace lockstack {

/// Above this shape estimate the importance weights have (near) infinite variance.
inline constexpr double kParetoKThreshold = 0.7;

/// Smoothing needs at least this many draws; shorter inputs are returned as-is.
inline constexpr Eigen::Index kPsisMinDraws = 25;

/// Reported when the weight tail is flat (bounded weights).
inline constexpr double kDegenerateParetoK = std::numeric_limits<double>::lowest();

struct GpdFit {
  double k;
  double sigma;
};

/// Generalized Pareto fit by the Zhang & Stephens profile-likelihood scheme.
/// `exceedances` must be sorted ascending and non-negative. With
/// `weakly_informative_prior`, k is shrunk towards 0.5 by ten pseudo-observations.
/// Returns k = +inf when the fit is undefined.
GpdFit fit_generalized_pareto(std::span<const double> exceedances,
                              bool weakly_informative_prior = true,
                              int min_grid_points = 30);

/// Quantile function of the generalized Pareto distribution with location 0.
double gpd_quantile(double p, double k, double sigma);

struct PsisResult {
  Eigen::VectorXd log_weights;
  /// nullopt when there are fewer than kPsisMinDraws weights.
  std::optional<double> pareto_k;
};

/// Number of largest weights replaced by the smoothed tail.
Eigen::Index psis_tail_length(Eigen::Index draws);

/// Pareto-smoothed importance sampling.
///
/// The largest psis_tail_length(S) weights are replaced by expected order
/// statistics of a generalized Pareto fitted to them, then every weight is
/// truncated at the largest raw weight. The ordering of weights is preserved.
PsisResult psis_smooth(const Eigen::Ref<const Eigen::VectorXd>& log_weights);

}  // namespace lockstack
