#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>

#include "lockstack/rng.hpp"

namespace lockstack {

/// Sampling density f(y | theta) of one model, with its first two y-derivatives
/// in log form. Parameter vectors are the rows of a draws matrix.
class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;

  /// Number of parameters per draw.
  [[nodiscard]] virtual Eigen::Index parameters() const = 0;

  /// log f(y | theta_s), d/dy log f and d2/dy2 log f for every row theta_s of
  /// `params`. `point` selects per-observation covariates for models that have
  /// them and is ignored otherwise.
  virtual void evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index point,
                        Eigen::Ref<Eigen::VectorXd> loglik, Eigen::Ref<Eigen::VectorXd> dloglik,
                        Eigen::Ref<Eigen::VectorXd> d2loglik) const = 0;

  /// One draw of y from f(. | theta).
  virtual double sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index point,
                        Rng& rng) const = 0;
};

/// S posterior draws for one model plus the handle that evaluates them.
struct Draws {
  std::string model_id;
  Eigen::MatrixXd params;  // S x parameters
  std::shared_ptr<const PredictiveModel> model;

  [[nodiscard]] Eigen::Index size() const { return params.rows(); }

  /// log f, d log f, d2 log f at y for all draws.
  void evaluate(double y, Eigen::Index point, Eigen::Ref<Eigen::VectorXd> loglik,
                Eigen::Ref<Eigen::VectorXd> dloglik, Eigen::Ref<Eigen::VectorXd> d2loglik) const {
    model->evaluate(params, y, point, loglik, dloglik, d2loglik);
  }

  /// log of the Monte Carlo predictive density (1/S) sum_s f(y | theta_s).
  [[nodiscard]] double log_predictive(double y, Eigen::Index point = 0) const;
};

}  // namespace lockstack
