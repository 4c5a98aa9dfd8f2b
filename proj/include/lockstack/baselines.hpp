#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lockstack/draws.hpp"
#include "lockstack/eval_tensor.hpp"
#include "lockstack/grid_density.hpp"
#include "lockstack/optimizer.hpp"
#include "lockstack/pooling.hpp"

namespace lockstack {

enum class Method { ml_select, bma, loo_select, stacking, hyva_select, locking, quacking };

inline constexpr Method kAllMethods[] = {Method::ml_select,   Method::bma,     Method::loo_select,
                                         Method::stacking,    Method::hyva_select, Method::locking,
                                         Method::quacking};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

/// True for methods that combine linearly (mixtures) rather than geometrically.
bool is_linear(Method m);

/// Softmax of the log marginal likelihoods (equal prior model probabilities).
SimplexWeights bma_weights(const Eigen::VectorXd& log_marginals);

/// One-hot on the largest entry; lowest index on ties.
SimplexWeights select_max(const Eigen::VectorXd& scores);

/// One-hot on the smallest entry; lowest index on ties.
SimplexWeights select_min(const Eigen::VectorXd& scores);

struct LooElpd {
  double elpd = 0.0;
  Eigen::VectorXd pointwise;
  /// Points with Pareto k above kParetoKThreshold.
  Eigen::Index high_pareto_k = 0;
};

/// Sum over points of the PSIS leave-one-out log predictive density.
LooElpd loo_elpd(const EvalTensor& tensor, Eigen::Index model);
LooElpd loo_elpd(std::span<const PointEvaluations> points);

/// Maximizes sum_i log sum_k w_k exp(loo_lpd(i, k)) over the simplex.
/// Identical columns share their weight equally.
SimplexWeights stacking_weights(const Eigen::MatrixXd& loo_lpd);

/// sum_i log sum_k w_k exp(lpd(i, k)).
double stacking_objective(const Eigen::MatrixXd& lpd, const Eigen::VectorXd& w);

/// Index of the smallest total Hyvarinen score; lowest index on ties.
Eigen::Index hyva_select(const Eigen::VectorXd& totals);

/// Column sums of 2 lap + grad^2.
Eigen::VectorXd total_hyvarinen(const ObjectiveCoefficients& c);

struct MethodReport {
  Method method;
  /// Mixture or geometric weights; for quacking the mixture weights beta.
  SimplexWeights weights;
  std::optional<QuackParams> quack;
  double test_log_score = 0.0;
  double test_hyva_score = 0.0;
};

/// Scores fitted combinations on held-out points.
///
/// Linear methods use the mixture density directly. Geometric pools are
/// normalized by trapezoid quadrature of the pooled density on a grid over the
/// data range +- 5 pooled predictive standard deviations; when the pooled
/// density has not decayed at the grid edges the grid is widened once.
/// The pooled sd is the largest predictive sd among the models, estimated from
/// predictive draws with a fixed stream.
class TestEvaluator {
 public:
  TestEvaluator(std::vector<Draws> models, const Eigen::VectorXd& train,
                const Eigen::VectorXd& test, int threads = 1,
                Eigen::Index grid_size = kDefaultGridSize);

  [[nodiscard]] MethodReport evaluate(Method method, const SimplexWeights& w) const;
  [[nodiscard]] MethodReport evaluate(const QuackParams& p) const;

  /// Log predictive density of every model at the test points (n_test x K).
  [[nodiscard]] const Eigen::MatrixXd& test_log_density() const { return test_.log_density; }
  [[nodiscard]] const ObjectiveCoefficients& test_coefficients() const { return test_; }
  [[nodiscard]] std::span<const GridDensity> component_grids() const { return grids_; }

  /// Log normalizing constant of the pool, and whether its grid integrand
  /// decayed at both edges.
  struct Normalizer {
    double log_z;
    bool decayed;
  };
  [[nodiscard]] Normalizer log_normalizer(const QuackParams& p) const;

 private:
  [[nodiscard]] std::vector<GridDensity> tabulate(double lo, double hi) const;

  std::vector<Draws> models_;
  int threads_;
  Eigen::Index grid_size_;
  ObjectiveCoefficients test_;
  std::vector<GridDensity> grids_;
};

/// Unnormalized log density of the hybrid pool given log pi_k at one point.
double log_pool_unnormalized(const QuackParams& p, const Eigen::Ref<const Eigen::VectorXd>& log_pi);

/// Geometric pool parameters with the mixture power switched off.
QuackParams locking_as_quack(const SimplexWeights& w);

}  // namespace lockstack
