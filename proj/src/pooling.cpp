#include "lockstack/pooling.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lockstack/parallel.hpp"

namespace lockstack {

SimplexWeights::SimplexWeights(Eigen::VectorXd w) : w_{std::move(w)} {
  if (w_.size() == 0 || !w_.allFinite() || (w_.array() < 0.0).any()) {
    throw std::invalid_argument("simplex weights must be finite and non-negative");
  }
  if (std::abs(w_.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("simplex weights must sum to one");
  }
}

SimplexWeights SimplexWeights::normalized(Eigen::VectorXd w) {
  if (w.size() == 0 || !w.allFinite() || (w.array() < 0.0).any() || !(w.sum() > 0.0)) {
    throw std::invalid_argument("cannot normalize weights onto the simplex");
  }
  w /= w.sum();
  return SimplexWeights(std::move(w));
}

SimplexWeights SimplexWeights::uniform(Eigen::Index k) {
  return SimplexWeights(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
}

SimplexWeights SimplexWeights::vertex(Eigen::Index k, Eigen::Index at) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  w(at) = 1.0;
  return SimplexWeights(std::move(w));
}

void QuackParams::validate() const {
  if (w.size() != beta.size() + 1 || !w.allFinite()) {
    throw std::invalid_argument("quacking parameters: w needs K + 1 finite entries");
  }
}

Eigen::Index ObjectiveCoefficients::high_pareto_k() const {
  return (pareto_k.array() > kParetoKThreshold).count();
}

ObjectiveCoefficients ObjectiveCoefficients::from_scores(Eigen::MatrixXd grad, Eigen::MatrixXd lap) {
  if (grad.rows() != lap.rows() || grad.cols() != lap.cols()) {
    throw std::invalid_argument("objective coefficients: shape mismatch");
  }
  const Eigen::Index n = grad.rows();
  const Eigen::Index k = grad.cols();
  return {std::move(grad),
          std::move(lap),
          Eigen::MatrixXd::Zero(n, k),
          Eigen::MatrixXd::Constant(n, k, std::numeric_limits<double>::quiet_NaN()),
          Eigen::MatrixXd::Ones(n, k),
          false};
}

ObjectiveCoefficients ObjectiveCoefficients::select(std::span<const Eigen::Index> models) const {
  ObjectiveCoefficients out;
  const auto k = static_cast<Eigen::Index>(models.size());
  out.grad.resize(points(), k);
  out.lap.resize(points(), k);
  out.log_density.resize(points(), k);
  out.pareto_k.resize(points(), k);
  out.ess.resize(points(), k);
  out.loo = loo;
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index src = models[static_cast<std::size_t>(j)];
    out.grad.col(j) = grad.col(src);
    out.lap.col(j) = lap.col(src);
    out.log_density.col(j) = log_density.col(src);
    out.pareto_k.col(j) = pareto_k.col(src);
    out.ess.col(j) = ess.col(src);
  }
  return out;
}

ObjectiveCoefficients objective_coefficients(const EvalTensor& tensor, const ScoreOptions& options,
                                             int threads) {
  const Eigen::Index n = tensor.points();
  const Eigen::Index k_count = tensor.models();
  ObjectiveCoefficients c;
  c.grad.resize(n, k_count);
  c.lap.resize(n, k_count);
  c.log_density.resize(n, k_count);
  c.pareto_k.setConstant(n, k_count, std::numeric_limits<double>::quiet_NaN());
  c.ess.resize(n, k_count);
  c.loo = options.loo;

  const auto cells = static_cast<std::size_t>(n * k_count);
  parallel_for(cells, threads, [&](std::size_t cell) {
    const auto k = static_cast<Eigen::Index>(cell) / n;
    const auto i = static_cast<Eigen::Index>(cell) % n;
    const auto loglik = tensor.loglik(k).col(i);
    const auto dloglik = tensor.dloglik(k).col(i);
    const auto d2loglik = tensor.d2loglik(k).col(i);
    if (options.loo) {
      const LooWeights loo = loo_reweight(loglik, options.psis);
      const Eigen::VectorXd combined = loglik + loo.log_weights;
      const ScoreEstimate est = detail::score_from_weights(combined, dloglik, d2loglik,
                                                           &loo.log_weights, options.laplacian);
      c.grad(i, k) = est.grad;
      c.lap(i, k) = est.lap;
      c.ess(i, k) = est.ess;
      c.log_density(i, k) = loo_log_predictive_density(loglik, loo.log_weights);
      if (loo.pareto_k) {
        c.pareto_k(i, k) = *loo.pareto_k;
      }
    } else {
      const ScoreEstimate est =
          detail::score_from_weights(loglik, dloglik, d2loglik, nullptr, options.laplacian);
      c.grad(i, k) = est.grad;
      c.lap(i, k) = est.lap;
      c.ess(i, k) = est.ess;
      c.log_density(i, k) = log_predictive_density(loglik);
    }
  });
  return c;
}

PooledScores locking_scores(const ObjectiveCoefficients& c, const SimplexWeights& w) {
  if (w.size() != c.models()) {
    throw std::invalid_argument("locking_scores: weight count differs from model count");
  }
  return locking_scores(c, w.vector());
}

double hyva_objective(const ObjectiveCoefficients& c, const SimplexWeights& w, double alpha) {
  const PooledScores q = locking_scores(c, w);
  double value = q.hyvarinen().sum();
  if (alpha != 1.0) {
    if ((w.vector().array() <= 0.0).any()) {
      return alpha > 1.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
    }
    value -= (alpha - 1.0) * w.vector().array().log().sum();
  }
  return value;
}

Eigen::VectorXd hyva_objective_gradient(const ObjectiveCoefficients& c, const Eigen::VectorXd& w,
                                        double alpha) {
  const Eigen::VectorXd q1 = c.grad * w;
  Eigen::VectorXd g = 2.0 * c.lap.colwise().sum().transpose() + 2.0 * c.grad.transpose() * q1;
  if (alpha != 1.0) {
    g.array() -= (alpha - 1.0) / w.array();
  }
  return g;
}

PooledScores quacking_scores(const ObjectiveCoefficients& c, const QuackParams& p) {
  p.validate();
  if (p.beta.size() != c.models()) {
    throw std::invalid_argument("quacking_scores: beta length differs from model count");
  }
  const Eigen::Index n = c.points();
  const Eigen::VectorXd geometric = p.w.tail(c.models());
  PooledScores out = locking_scores(c, geometric);
  const double w0 = p.w(0);
  if (w0 == 0.0) {
    return out;
  }
  const Eigen::RowVectorXd log_beta = p.beta.vector().array().log().matrix().transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd logits = c.log_density.row(i) + log_beta;
    const double top = logits.maxCoeff();
    Eigen::ArrayXd resp = (logits.array() - top).exp().transpose();
    resp /= resp.sum();
    const Eigen::ArrayXd a = c.grad.row(i).transpose().array();
    const Eigen::ArrayXd b = c.lap.row(i).transpose().array();
    const double mix_grad = (resp * a).sum();
    const double mix_lap = (resp * (b + (a - mix_grad).square())).sum();
    out.grad(i) += w0 * mix_grad;
    out.lap(i) += w0 * mix_lap;
  }
  return out;
}

PooledScores quacking_scores(const EvalTensor& tensor, const QuackParams& p,
                             const ScoreOptions& options) {
  return quacking_scores(objective_coefficients(tensor, options), p);
}

double quacking_objective(const ObjectiveCoefficients& c, const QuackParams& p, double alpha) {
  const PooledScores q = quacking_scores(c, p);
  double value = q.hyvarinen().sum();
  if (alpha != 1.0) {
    if ((p.beta.vector().array() <= 0.0).any()) {
      return alpha > 1.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
    }
    value -= (alpha - 1.0) * p.beta.vector().array().log().sum();
  }
  return value;
}

}  // namespace lockstack
