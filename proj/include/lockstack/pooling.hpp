#pragma once

#include <Eigen/Dense>

#include "lockstack/eval_tensor.hpp"
#include "lockstack/predictive_scores.hpp"

namespace lockstack {

/// Weight vector on the probability simplex.
class SimplexWeights {
 public:
  /// Throws unless entries are finite, non-negative and sum to 1 within 1e-12.
  explicit SimplexWeights(Eigen::VectorXd w);

  /// Divides by the sum; entries must be non-negative with a positive sum.
  static SimplexWeights normalized(Eigen::VectorXd w);
  static SimplexWeights uniform(Eigen::Index k);
  static SimplexWeights vertex(Eigen::Index k, Eigen::Index at);

  [[nodiscard]] const Eigen::VectorXd& vector() const { return w_; }
  [[nodiscard]] Eigen::Index size() const { return w_.size(); }
  double operator[](Eigen::Index k) const { return w_(k); }

 private:
  Eigen::VectorXd w_;
};

/// Parameters of the hybrid pool (sum_k beta_k pi_k)^w0 * prod_k pi_k^wk.
struct QuackParams {
  SimplexWeights beta;
  Eigen::VectorXd w;  // length K + 1, w(0) is the mixture power

  void validate() const;
};

/// Per-point, per-model score estimates that the pooled objectives are built from.
struct ObjectiveCoefficients {
  Eigen::MatrixXd grad;         // n x K, d/dy log pi_k(y_i)
  Eigen::MatrixXd lap;          // n x K, d2/dy2 log pi_k(y_i)
  Eigen::MatrixXd log_density;  // n x K, log pi_k(y_i)
  Eigen::MatrixXd pareto_k;     // n x K, NaN where not estimated
  Eigen::MatrixXd ess;          // n x K
  bool loo = false;

  [[nodiscard]] Eigen::Index points() const { return grad.rows(); }
  [[nodiscard]] Eigen::Index models() const { return grad.cols(); }

  /// Number of cells with Pareto k above kParetoKThreshold.
  [[nodiscard]] Eigen::Index high_pareto_k() const;

  /// Coefficients from plain matrices; the diagnostics are filled with defaults.
  static ObjectiveCoefficients from_scores(Eigen::MatrixXd grad, Eigen::MatrixXd lap);

  /// Columns in the given order.
  [[nodiscard]] ObjectiveCoefficients select(std::span<const Eigen::Index> models) const;
};

/// Score estimates for every (point, model) cell of the tensor, leave-one-out
/// reweighted when `options.loo`.
ObjectiveCoefficients objective_coefficients(const EvalTensor& tensor,
                                             const ScoreOptions& options = {}, int threads = 1);

struct PooledScores {
  Eigen::VectorXd grad;  // d/dy log q at each point
  Eigen::VectorXd lap;   // d2/dy2 log q at each point

  /// Pointwise Hyvarinen score 2 lap + grad^2.
  [[nodiscard]] Eigen::VectorXd hyvarinen() const {
    return 2.0 * lap.array() + grad.array().square();
  }
};

/// Scores of the log-linear pool prod_k pi_k^wk; linear in w.
PooledScores locking_scores(const ObjectiveCoefficients& c, const SimplexWeights& w);

/// Same as locking_scores for an arbitrary real weight vector.
template <typename Derived>
PooledScores locking_scores(const ObjectiveCoefficients& c, const Eigen::MatrixBase<Derived>& w) {
  return {c.grad * w, c.lap * w};
}

inline constexpr double kDirichletConcentration = 1.01;

/// sum_i (2 q2_i + q1_i^2) - (alpha - 1) sum_k log w_k. Returns +inf when alpha > 1
/// and some w_k is zero.
double hyva_objective(const ObjectiveCoefficients& c, const SimplexWeights& w,
                      double alpha = kDirichletConcentration);

/// d/dw_k of hyva_objective: sum_i (2 b_ik + 2 q1_i a_ik) - (alpha - 1) / w_k.
Eigen::VectorXd hyva_objective_gradient(const ObjectiveCoefficients& c, const Eigen::VectorXd& w,
                                        double alpha = kDirichletConcentration);

/// Scores of the hybrid pool. The mixture factor contributes
/// w0 * sum_k g_k grad_k to the gradient and
/// w0 * (sum_k g_k (lap_k + grad_k^2) - (sum_k g_k grad_k)^2) to the Laplacian,
/// where g = softmax(log beta_k + log pi_k) are the mixture responsibilities.
PooledScores quacking_scores(const ObjectiveCoefficients& c, const QuackParams& p);
PooledScores quacking_scores(const EvalTensor& tensor, const QuackParams& p,
                             const ScoreOptions& options = {});

/// Hyvarinen objective of the hybrid pool with a Dirichlet(alpha) penalty on beta.
double quacking_objective(const ObjectiveCoefficients& c, const QuackParams& p,
                          double alpha = kDirichletConcentration);

}  // namespace lockstack
