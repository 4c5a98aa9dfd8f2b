#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lockstack/draws.hpp"
#include "lockstack/predictive_scores.hpp"

namespace lockstack {

/// Raised when a model evaluator returns NaN or +-inf.
class NonFiniteEvaluation : public std::runtime_error {
 public:
  NonFiniteEvaluation(Eigen::Index model, Eigen::Index point, Eigen::Index draw);

  Eigen::Index model;
  Eigen::Index point;
  Eigen::Index draw;
};

/// Cache of log f, d/dy log f and d2/dy2 log f for every (model, point, draw).
///
/// Each model owns three draws x points column-major matrices, so the S values of
/// one (model, point) cell are contiguous. Models may have different draw counts.
class EvalTensor {
 public:
  EvalTensor() = default;
  EvalTensor(std::vector<std::string> model_ids, const std::vector<Eigen::Index>& draws,
             Eigen::Index points);

  [[nodiscard]] Eigen::Index models() const { return static_cast<Eigen::Index>(blocks_.size()); }
  [[nodiscard]] Eigen::Index points() const { return points_; }
  [[nodiscard]] Eigen::Index draws(Eigen::Index k) const { return block(k).loglik.rows(); }
  [[nodiscard]] const std::string& model_id(Eigen::Index k) const { return block(k).id; }

  [[nodiscard]] const Eigen::MatrixXd& loglik(Eigen::Index k) const { return block(k).loglik; }
  [[nodiscard]] const Eigen::MatrixXd& dloglik(Eigen::Index k) const { return block(k).dloglik; }
  [[nodiscard]] const Eigen::MatrixXd& d2loglik(Eigen::Index k) const { return block(k).d2loglik; }
  Eigen::MatrixXd& loglik(Eigen::Index k) { return block(k).loglik; }
  Eigen::MatrixXd& dloglik(Eigen::Index k) { return block(k).dloglik; }
  Eigen::MatrixXd& d2loglik(Eigen::Index k) { return block(k).d2loglik; }

  /// Copy of one cell.
  [[nodiscard]] PointEvaluations point(Eigen::Index k, Eigen::Index i) const;

  /// Throws NonFiniteEvaluation at the first non-finite entry.
  void validate() const;

  /// Tensor restricted to a subset of models, in the given order.
  [[nodiscard]] EvalTensor select(std::span<const Eigen::Index> models) const;

 private:
  struct Block {
    std::string id;
    Eigen::MatrixXd loglik;
    Eigen::MatrixXd dloglik;
    Eigen::MatrixXd d2loglik;
  };

  [[nodiscard]] const Block& block(Eigen::Index k) const { return blocks_.at(static_cast<std::size_t>(k)); }
  Block& block(Eigen::Index k) { return blocks_.at(static_cast<std::size_t>(k)); }

  std::vector<Block> blocks_;
  Eigen::Index points_ = 0;
};

/// Evaluates every model at every data point. Cells are independent, so the
/// work is split over `threads` workers without changing the result.
EvalTensor build_eval_tensor(std::span<const Draws> models, const Eigen::VectorXd& data,
                             int threads = 1);

/// Long-format table, one row per (model, draw, point):
/// `model_id,draw_id,point_id,log_lik,dlog_lik,d2log_lik`.
/// Lines starting with '#' are comments.
void write_eval_table_csv(std::ostream& out, const EvalTensor& tensor,
                          std::string_view comment = {});
EvalTensor read_eval_table_csv(std::istream& in);

}  // namespace lockstack
