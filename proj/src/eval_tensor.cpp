#include "lockstack/eval_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "lockstack/io.hpp"
#include "lockstack/parallel.hpp"

namespace lockstack {

NonFiniteEvaluation::NonFiniteEvaluation(Eigen::Index model_, Eigen::Index point_,
                                         Eigen::Index draw_)
    : std::runtime_error("non-finite evaluation at model " + std::to_string(model_) + ", point " +
                         std::to_string(point_) + ", draw " + std::to_string(draw_)),
      model{model_},
      point{point_},
      draw{draw_} {}

double Draws::log_predictive(double y, Eigen::Index point) const {
  Eigen::VectorXd l(size());
  Eigen::VectorXd d(size());
  Eigen::VectorXd e(size());
  evaluate(y, point, l, d, e);
  return log_predictive_density(l);
}

EvalTensor::EvalTensor(std::vector<std::string> model_ids, const std::vector<Eigen::Index>& draws,
                       Eigen::Index points)
    : points_{points} {
  if (model_ids.size() != draws.size()) {
    throw std::invalid_argument("EvalTensor: one draw count per model required");
  }
  if (points < 0) {
    throw std::invalid_argument("EvalTensor: negative point count");
  }
  blocks_.reserve(model_ids.size());
  for (std::size_t k = 0; k < model_ids.size(); ++k) {
    if (draws[k] < 1) {
      throw std::invalid_argument("EvalTensor: model '" + model_ids[k] + "' has no draws");
    }
    blocks_.push_back({std::move(model_ids[k]), Eigen::MatrixXd::Zero(draws[k], points),
                       Eigen::MatrixXd::Zero(draws[k], points),
                       Eigen::MatrixXd::Zero(draws[k], points)});
  }
}

PointEvaluations EvalTensor::point(Eigen::Index k, Eigen::Index i) const {
  const Block& b = block(k);
  return {b.id, i, b.loglik.col(i), b.dloglik.col(i), b.d2loglik.col(i)};
}

void EvalTensor::validate() const {
  for (Eigen::Index k = 0; k < models(); ++k) {
    const Block& b = block(k);
    for (Eigen::Index i = 0; i < points_; ++i) {
      for (Eigen::Index s = 0; s < b.loglik.rows(); ++s) {
        if (!std::isfinite(b.loglik(s, i)) || !std::isfinite(b.dloglik(s, i)) ||
            !std::isfinite(b.d2loglik(s, i))) {
          throw NonFiniteEvaluation(k, i, s);
        }
      }
    }
  }
}

EvalTensor EvalTensor::select(std::span<const Eigen::Index> models) const {
  EvalTensor out;
  out.points_ = points_;
  for (Eigen::Index k : models) {
    out.blocks_.push_back(block(k));
  }
  return out;
}

EvalTensor build_eval_tensor(std::span<const Draws> models, const Eigen::VectorXd& data,
                             int threads) {
  std::vector<std::string> ids;
  std::vector<Eigen::Index> draws;
  for (const Draws& m : models) {
    if (!m.model) {
      throw std::invalid_argument("build_eval_tensor: model '" + m.model_id + "' has no evaluator");
    }
    ids.push_back(m.model_id);
    draws.push_back(m.size());
  }
  EvalTensor tensor(std::move(ids), draws, data.size());
  const auto k_count = static_cast<std::size_t>(models.size());
  const auto n = static_cast<std::size_t>(data.size());
  parallel_for(k_count * n, threads, [&](std::size_t cell) {
    const auto k = static_cast<Eigen::Index>(cell / n);
    const auto i = static_cast<Eigen::Index>(cell % n);
    models[static_cast<std::size_t>(k)].evaluate(data(i), i, tensor.loglik(k).col(i),
                                                 tensor.dloglik(k).col(i),
                                                 tensor.d2loglik(k).col(i));
  });
  tensor.validate();
  return tensor;
}

void write_eval_table_csv(std::ostream& out, const EvalTensor& tensor, std::string_view comment) {
  if (!comment.empty()) {
    out << comment;
  }
  out << "model_id,draw_id,point_id,log_lik,dlog_lik,d2log_lik\n";
  for (Eigen::Index k = 0; k < tensor.models(); ++k) {
    for (Eigen::Index s = 0; s < tensor.draws(k); ++s) {
      for (Eigen::Index i = 0; i < tensor.points(); ++i) {
        out << tensor.model_id(k) << ',' << s << ',' << i << ','
            << format_double(tensor.loglik(k)(s, i)) << ','
            << format_double(tensor.dloglik(k)(s, i)) << ','
            << format_double(tensor.d2loglik(k)(s, i)) << '\n';
      }
    }
  }
}

EvalTensor read_eval_table_csv(std::istream& in) {
  struct Row {
    long long draw;
    long long point;
    double l, d, e;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> rows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') {
      continue;
    }
    const auto fields = split_csv(view);
    if (!header_seen) {
      const std::vector<std::string_view> expected{"model_id", "draw_id",  "point_id",
                                                   "log_lik",  "dlog_lik", "d2log_lik"};
      if (fields != expected) {
        throw std::invalid_argument("eval table: unexpected header at line " +
                                    std::to_string(line_no));
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 6) {
      throw std::invalid_argument("eval table: expected 6 fields at line " +
                                  std::to_string(line_no));
    }
    std::string id(fields[0]);
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) {
      order.push_back(id);
    }
    it->second.push_back({parse_int(fields[1]), parse_int(fields[2]), parse_double(fields[3]),
                          parse_double(fields[4]), parse_double(fields[5])});
  }
  if (!header_seen || order.empty()) {
    throw std::invalid_argument("eval table: no data");
  }

  // Point ids must be the same set for every model; map them to 0..n-1 in sorted order.
  std::map<long long, Eigen::Index> point_index;
  for (const Row& r : rows[order.front()]) {
    point_index.emplace(r.point, 0);
  }
  Eigen::Index next = 0;
  for (auto& [id, idx] : point_index) {
    idx = next++;
  }
  const auto n = static_cast<Eigen::Index>(point_index.size());

  std::vector<Eigen::Index> draw_counts;
  std::vector<std::map<long long, Eigen::Index>> draw_index(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (const Row& r : rows[order[k]]) {
      draw_index[k].emplace(r.draw, 0);
    }
    Eigen::Index s = 0;
    for (auto& [id, idx] : draw_index[k]) {
      idx = s++;
    }
    draw_counts.push_back(s);
  }

  EvalTensor tensor(order, draw_counts, n);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const auto& model_rows = rows[order[k]];
    if (static_cast<Eigen::Index>(model_rows.size()) != draw_counts[k] * n) {
      throw std::invalid_argument("eval table: model '" + order[k] +
                                  "' does not cover every (draw, point) pair exactly once");
    }
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(draw_counts[k], n, false);
    for (const Row& r : model_rows) {
      const auto p = point_index.find(r.point);
      if (p == point_index.end()) {
        throw std::invalid_argument("eval table: model '" + order[k] + "' has unknown point id " +
                                    std::to_string(r.point));
      }
      const Eigen::Index s = draw_index[k].at(r.draw);
      if (seen(s, p->second)) {
        throw std::invalid_argument("eval table: duplicate row for model '" + order[k] + "'");
      }
      seen(s, p->second) = true;
      tensor.loglik(kk)(s, p->second) = r.l;
      tensor.dloglik(kk)(s, p->second) = r.d;
      tensor.d2loglik(kk)(s, p->second) = r.e;
    }
  }
  tensor.validate();
  return tensor;
}

}  // namespace lockstack
