#pragma once

// Importance-weighted estimates of the score functions of a Monte Carlo
// posterior predictive pi(y) = E_theta[f(y | theta)].
//
// Draw s carries l_s = log f(y | theta_s), d_s = d/dy log f and e_s = d2/dy2 log f.
// Since f' = f d and f'' = f (e + d^2), every ratio of sums over draws becomes a
// weighted mean under the self-normalized weights softmax(l):
//
//   d/dy log pi   ~ sum_s w_s d_s
//   d2/dy2 log pi ~ sum_s w_s (e_s + d_s^2) - (sum_s w_s d_s)^2
//
// Leave-one-out versions multiply extra ratio weights into the softmax.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "lockstack/psis.hpp"

namespace lockstack {

template <typename Scalar>
struct BasicPointEvaluations {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::string model_id;
  Eigen::Index point_id = 0;
  Vector loglik;
  Vector dloglik;
  Vector d2loglik;

  [[nodiscard]] Eigen::Index draws() const { return loglik.size(); }

  void validate() const {
    if (loglik.size() < 1 || dloglik.size() != loglik.size() || d2loglik.size() != loglik.size()) {
      throw std::invalid_argument("point evaluations: vectors must share a length >= 1");
    }
    if (!loglik.allFinite() || !dloglik.allFinite() || !d2loglik.allFinite()) {
      throw std::invalid_argument("point evaluations: non-finite entry for model '" + model_id +
                                  "', point " + std::to_string(point_id));
    }
  }
};

using PointEvaluations = BasicPointEvaluations<double>;

struct ScoreEstimate {
  double grad = 0.0;
  double lap = 0.0;
  double hyva = 0.0;  // 2 * lap + grad^2
  double ess = 0.0;
  std::optional<double> pareto_k;
};

/// How d2/dy2 log pi is estimated. `plugin_average` is the proposal-weighted mean
/// of e_s alone, which drops the between-draw variance of d_s.
enum class LaplacianEstimator { importance_weighted, plugin_average };

/// Leave-one-out ratio weights for one held-out point.
struct LooWeights {
  Eigen::VectorXd log_weights;  // log of 1 / f(y_i | theta_s), possibly smoothed
  std::optional<double> pareto_k;
  double ess = 0.0;       // effective sample size of the ratio weights
  bool flagged = false;   // ess collapsed onto a single draw

  [[nodiscard]] bool high_pareto_k() const { return pareto_k && *pareto_k > kParetoKThreshold; }
};

namespace detail {

template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> normalized_weights(
    const Eigen::MatrixBase<Derived>& log_weights) {
  using Array = Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1>;
  const auto top = log_weights.maxCoeff();
  Array w = (log_weights.array() - top).exp();
  return w / w.sum();
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const auto top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace detail

/// Effective sample size (sum w)^2 / sum w^2 of weights given in log form.
template <typename Derived>
typename Derived::Scalar effective_sample_size(const Eigen::MatrixBase<Derived>& log_weights) {
  const auto w = detail::normalized_weights(log_weights);
  return typename Derived::Scalar(1) / w.square().sum();
}

/// sum_s w_s d_s with w = softmax(log_weights). Pass loglik for the in-sample
/// estimate, loglik + ratio log-weights for leave-one-out.
template <typename DW, typename DD>
typename DW::Scalar grad_log_predictive(const Eigen::MatrixBase<DW>& log_weights,
                                        const Eigen::MatrixBase<DD>& dloglik) {
  const auto w = detail::normalized_weights(log_weights);
  return (w * dloglik.array()).sum();
}

/// Importance-weighted d2/dy2 log pi, written as the weighted mean of e_s plus the
/// weighted variance of d_s (identical to sum w (e + d^2) - g^2, without the
/// cancellation).
template <typename DW, typename DD, typename DE>
typename DW::Scalar lap_log_predictive(const Eigen::MatrixBase<DW>& log_weights,
                                       const Eigen::MatrixBase<DD>& dloglik,
                                       const Eigen::MatrixBase<DE>& d2loglik) {
  const auto w = detail::normalized_weights(log_weights);
  const auto g = (w * dloglik.array()).sum();
  return (w * (d2loglik.array() + (dloglik.array() - g).square())).sum();
}

/// log (1/S) sum_s f(y | theta_s).
template <typename Derived>
typename Derived::Scalar log_predictive_density(const Eigen::MatrixBase<Derived>& loglik) {
  using Scalar = typename Derived::Scalar;
  return detail::log_sum_exp(loglik) - std::log(static_cast<Scalar>(loglik.size()));
}

/// Leave-one-out log predictive density log(sum_s r_s f_s / sum_s r_s) with ratio
/// weights r. With r = 1/f this is the harmonic-mean estimator.
///
/// Ratio weights that do not increase with f (raw or Pareto-smoothed 1/f) make
/// this a weighted mean that cannot exceed the plain mean, so the result is
/// capped at the in-sample value when rounding alone puts it above.
template <typename DL, typename DR>
typename DL::Scalar loo_log_predictive_density(const Eigen::MatrixBase<DL>& loglik,
                                               const Eigen::MatrixBase<DR>& ratio_log_weights) {
  using Scalar = typename DL::Scalar;
  const Scalar loo = detail::log_sum_exp((loglik + ratio_log_weights).eval()) -
                     detail::log_sum_exp(ratio_log_weights);
  const Scalar in_sample = log_predictive_density(loglik);
  const Scalar rounding = Scalar(1e-12) * (Scalar(1) + std::abs(in_sample));
  if (loo > in_sample && loo - in_sample <= rounding) {
    return in_sample;
  }
  return loo;
}

/// Leave-one-out ratio weights 1/f(y_i | theta_s), Pareto-smoothed when `smooth`.
template <typename Derived>
LooWeights loo_reweight(const Eigen::MatrixBase<Derived>& loglik, bool smooth = true) {
  LooWeights out;
  const Eigen::VectorXd raw = (-loglik.template cast<double>()).eval();
  if (smooth) {
    PsisResult psis = psis_smooth(raw);
    out.log_weights = std::move(psis.log_weights);
    out.pareto_k = psis.pareto_k;
  } else {
    out.log_weights = raw;
  }
  out.ess = effective_sample_size(out.log_weights);
  out.flagged = out.ess < 1.0 + 1e-6 && loglik.size() > 1;
  return out;
}

struct ScoreOptions {
  bool loo = true;
  bool psis = true;
  LaplacianEstimator laplacian = LaplacianEstimator::importance_weighted;
};

namespace detail {

template <typename DW, typename DD, typename DE>
ScoreEstimate score_from_weights(const Eigen::MatrixBase<DW>& log_weights,
                                 const Eigen::MatrixBase<DD>& dloglik,
                                 const Eigen::MatrixBase<DE>& d2loglik,
                                 const Eigen::VectorXd* proposal_log_weights,
                                 LaplacianEstimator laplacian) {
  ScoreEstimate est;
  const Eigen::ArrayXd w = normalized_weights(log_weights.template cast<double>());
  const Eigen::ArrayXd d = dloglik.template cast<double>().array();
  const Eigen::ArrayXd e = d2loglik.template cast<double>().array();
  est.grad = (w * d).sum();
  if (laplacian == LaplacianEstimator::importance_weighted) {
    est.lap = (w * (e + (d - est.grad).square())).sum();
  } else if (proposal_log_weights != nullptr) {
    est.lap = (normalized_weights(*proposal_log_weights) * e).sum();
  } else {
    est.lap = e.mean();
  }
  est.hyva = 2.0 * est.lap + est.grad * est.grad;
  est.ess = 1.0 / w.square().sum();
  return est;
}

}  // namespace detail

/// In-sample score estimate at one point.
inline ScoreEstimate hyvarinen_point(const PointEvaluations& pe,
                                     LaplacianEstimator laplacian =
                                         LaplacianEstimator::importance_weighted) {
  return detail::score_from_weights(pe.loglik, pe.dloglik, pe.d2loglik, nullptr, laplacian);
}

/// Leave-one-out score estimate at one point with precomputed ratio weights.
inline ScoreEstimate hyvarinen_point(const PointEvaluations& pe, const LooWeights& loo,
                                     LaplacianEstimator laplacian =
                                         LaplacianEstimator::importance_weighted) {
  ScoreEstimate est = detail::score_from_weights((pe.loglik + loo.log_weights).eval(), pe.dloglik,
                                                 pe.d2loglik, &loo.log_weights, laplacian);
  est.pareto_k = loo.pareto_k;
  return est;
}

inline double grad_log_predictive(const PointEvaluations& pe) {
  return grad_log_predictive(pe.loglik, pe.dloglik);
}
inline double lap_log_predictive(const PointEvaluations& pe) {
  return lap_log_predictive(pe.loglik, pe.dloglik, pe.d2loglik);
}
inline double log_predictive_density(const PointEvaluations& pe) {
  return log_predictive_density(pe.loglik);
}
inline LooWeights loo_reweight(const PointEvaluations& pe, bool smooth = true) {
  return loo_reweight(pe.loglik, smooth);
}

/// Score estimate under `options` (in-sample or leave-one-out).
inline ScoreEstimate score_point(const PointEvaluations& pe, const ScoreOptions& options) {
  if (!options.loo) {
    return hyvarinen_point(pe, options.laplacian);
  }
  return hyvarinen_point(pe, loo_reweight(pe, options.psis), options.laplacian);
}

}  // namespace lockstack
