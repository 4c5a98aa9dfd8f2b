#include "lockstack/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "lockstack/parallel.hpp"

namespace lockstack {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Pooled integrand at the grid edges must sit this far below its peak.
const double kEdgeDecay = std::log(1e-8);

double row_log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) {
    return top;
  }
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::ml_select: return "ml_select";
    case Method::bma: return "bma";
    case Method::loo_select: return "loo_select";
    case Method::stacking: return "stacking";
    case Method::hyva_select: return "hyva_select";
    case Method::locking: return "locking";
    case Method::quacking: return "quacking";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) {
      return m;
    }
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

bool is_linear(Method m) { return m != Method::locking && m != Method::quacking; }

SimplexWeights bma_weights(const Eigen::VectorXd& log_marginals) {
  if (log_marginals.size() == 0 || !log_marginals.allFinite()) {
    throw std::invalid_argument("bma_weights: log marginals must be finite");
  }
  Eigen::VectorXd w = (log_marginals.array() - log_marginals.maxCoeff()).exp();
  return SimplexWeights::normalized(std::move(w));
}

SimplexWeights select_max(const Eigen::VectorXd& scores) {
  if (scores.size() == 0) {
    throw std::invalid_argument("select_max: empty scores");
  }
  Eigen::Index at = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores(k) > scores(at)) {
      at = k;
    }
  }
  return SimplexWeights::vertex(scores.size(), at);
}

SimplexWeights select_min(const Eigen::VectorXd& scores) { return select_max(-scores); }

LooElpd loo_elpd(const EvalTensor& tensor, Eigen::Index model) {
  std::vector<PointEvaluations> points;
  points.reserve(static_cast<std::size_t>(tensor.points()));
  for (Eigen::Index i = 0; i < tensor.points(); ++i) {
    points.push_back(tensor.point(model, i));
  }
  return loo_elpd(points);
}

LooElpd loo_elpd(std::span<const PointEvaluations> points) {
  LooElpd out;
  out.pointwise.resize(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i].validate();
    const LooWeights loo = loo_reweight(points[i]);
    out.pointwise(static_cast<Eigen::Index>(i)) =
        loo_log_predictive_density(points[i].loglik, loo.log_weights);
    if (loo.high_pareto_k()) {
      ++out.high_pareto_k;
    }
  }
  out.elpd = out.pointwise.sum();
  return out;
}

double stacking_objective(const Eigen::MatrixXd& lpd, const Eigen::VectorXd& w) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < lpd.rows(); ++i) {
    const double top = lpd.row(i).maxCoeff();
    total += top + std::log((lpd.row(i).array() - top).exp().matrix().dot(w));
  }
  return total;
}

SimplexWeights stacking_weights(const Eigen::MatrixXd& loo_lpd) {
  const Eigen::Index k = loo_lpd.cols();
  if (k == 0 || loo_lpd.rows() == 0 || !loo_lpd.allFinite()) {
    throw std::invalid_argument("stacking_weights: need a finite non-empty matrix");
  }
  if (k == 1) {
    return SimplexWeights::uniform(1);
  }
  // Row-stabilized likelihoods; the objective only changes by a constant.
  Eigen::MatrixXd p(loo_lpd.rows(), k);
  for (Eigen::Index i = 0; i < loo_lpd.rows(); ++i) {
    p.row(i) = (loo_lpd.row(i).array() - loo_lpd.row(i).maxCoeff()).exp();
  }
  auto objective = [&](const Eigen::VectorXd& w) { return -(p * w).array().log().sum(); };
  auto gradient = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    const Eigen::ArrayXd mix = (p * w).array();
    return -(p.array().colwise() / mix).colwise().sum().transpose();
  };
  // f(v) - f(u) = -sum_i log(1 + p_i'(v - u) / p_i'u).
  auto difference = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const Eigen::VectorXd d = simplex_step(u, v);
    return -((p * d).array() / (p * u).array()).log1p().sum();
  };
  SimplexSolverOptions opts;
  opts.stationarity = Stationarity::frank_wolfe_gap;
  opts.tol = 1e-10;
  const FitResult fit = minimize_on_simplex(objective, gradient,
                                            Eigen::VectorXd::Constant(k, 1.0 / k), opts, difference);
  Eigen::VectorXd w = fit.simplex().vector();

  // A vertex the solver only approaches asymptotically.
  double best = objective(w);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(k, j);
    const double value = objective(e);
    if (value <= best) {
      best = value;
      w = e;
    }
  }

  // Identical columns split their total weight evenly.
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (seen[static_cast<std::size_t>(a)]) {
      continue;
    }
    std::vector<Eigen::Index> group{a};
    for (Eigen::Index b = a + 1; b < k; ++b) {
      if (!seen[static_cast<std::size_t>(b)] && loo_lpd.col(a) == loo_lpd.col(b)) {
        group.push_back(b);
        seen[static_cast<std::size_t>(b)] = true;
      }
    }
    double total = 0.0;
    for (Eigen::Index j : group) {
      total += w(j);
    }
    for (Eigen::Index j : group) {
      w(j) = total / static_cast<double>(group.size());
    }
  }
  return SimplexWeights::normalized(std::move(w));
}

Eigen::Index hyva_select(const Eigen::VectorXd& totals) {
  Eigen::Index at = 0;
  select_min(totals).vector().maxCoeff(&at);
  return at;
}

Eigen::VectorXd total_hyvarinen(const ObjectiveCoefficients& c) {
  return (2.0 * c.lap.array() + c.grad.array().square()).colwise().sum().transpose();
}

QuackParams locking_as_quack(const SimplexWeights& w) {
  Eigen::VectorXd powers(w.size() + 1);
  powers(0) = 0.0;
  powers.tail(w.size()) = w.vector();
  return {SimplexWeights::uniform(w.size()), std::move(powers)};
}

double log_pool_unnormalized(const QuackParams& p, const Eigen::Ref<const Eigen::VectorXd>& log_pi) {
  const Eigen::Index k = p.beta.size();
  double value = 0.0;
  if (p.w(0) != 0.0) {
    Eigen::VectorXd terms(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      terms(j) = p.beta[j] > 0.0 ? std::log(p.beta[j]) + log_pi(j) : kNegInf;
    }
    value += p.w(0) * row_log_sum_exp(terms);
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    if (p.w(j + 1) != 0.0) {
      value += p.w(j + 1) * log_pi(j);
    }
  }
  return value;
}

TestEvaluator::TestEvaluator(std::vector<Draws> models, const Eigen::VectorXd& train,
                             const Eigen::VectorXd& test, int threads, Eigen::Index grid_size)
    : models_{std::move(models)}, threads_{threads}, grid_size_{grid_size} {
  if (models_.empty() || train.size() == 0 || test.size() == 0) {
    throw std::invalid_argument("TestEvaluator: need models, training and test data");
  }
  if (grid_size_ < 3) {
    throw std::invalid_argument("TestEvaluator: grid needs at least 3 points");
  }
  test_ = objective_coefficients(build_eval_tensor(models_, test, threads_),
                                 ScoreOptions{.loo = false}, threads_);

  // Largest predictive variance, from a fixed number of predictive draws.
  double spread = 0.0;
  for (const Draws& d : models_) {
    Rng rng(0x5eed);
    std::uniform_int_distribution<Eigen::Index> pick(0, d.size() - 1);
    constexpr int kSamples = 2000;
    Eigen::VectorXd ys(kSamples);
    for (int j = 0; j < kSamples; ++j) {
      ys(j) = d.model->sample(d.params.row(pick(rng)), 0, rng);
    }
    const double var = (ys.array() - ys.mean()).square().sum() / (kSamples - 1);
    spread = std::max(spread, std::sqrt(var));
  }
  const double lo = std::min(train.minCoeff(), test.minCoeff()) - 5.0 * spread;
  const double hi = std::max(train.maxCoeff(), test.maxCoeff()) + 5.0 * spread;
  grids_ = tabulate(lo, hi);
}

std::vector<GridDensity> TestEvaluator::tabulate(double lo, double hi) const {
  std::vector<GridDensity> grids;
  grids.reserve(models_.size());
  for (std::size_t k = 0; k < models_.size(); ++k) {
    grids.push_back({lo, hi, Eigen::VectorXd(grid_size_), false});
  }
  const auto k_count = models_.size();
  parallel_for(static_cast<std::size_t>(grid_size_) * k_count, threads_, [&](std::size_t cell) {
    const std::size_t k = cell % k_count;
    const auto j = static_cast<Eigen::Index>(cell / k_count);
    GridDensity& g = grids[k];
    g.logvals(j) = models_[k].log_predictive(g.x(j));
  });
  return grids;
}

TestEvaluator::Normalizer TestEvaluator::log_normalizer(const QuackParams& p) const {
  auto attempt = [&](const std::vector<GridDensity>& grids) {
    const GridDensity& g0 = grids.front();
    GridDensity pooled{g0.lo, g0.hi, Eigen::VectorXd(g0.size()), false};
    Eigen::VectorXd log_pi(static_cast<Eigen::Index>(grids.size()));
    for (Eigen::Index j = 0; j < g0.size(); ++j) {
      for (std::size_t k = 0; k < grids.size(); ++k) {
        log_pi(static_cast<Eigen::Index>(k)) = grids[k].logvals(j);
      }
      pooled.logvals(j) = log_pool_unnormalized(p, log_pi);
    }
    const double top = pooled.logvals.maxCoeff();
    const double edge = std::max(pooled.logvals(0), pooled.logvals(pooled.size() - 1));
    return Normalizer{log_trapezoid(pooled), edge - top < kEdgeDecay};
  };
  const Normalizer first = attempt(grids_);
  if (first.decayed) {
    return first;
  }
  const GridDensity& g = grids_.front();
  const double half = g.hi - g.lo;
  return attempt(tabulate(g.lo - half, g.hi + half));
}

MethodReport TestEvaluator::evaluate(Method method, const SimplexWeights& w) const {
  if (w.size() != test_.models()) {
    throw std::invalid_argument("TestEvaluator: weight count differs from model count");
  }
  if (!is_linear(method)) {
    MethodReport report = evaluate(locking_as_quack(w));
    report.method = method;
    report.weights = w;
    report.quack.reset();
    return report;
  }
  MethodReport report{method, w, std::nullopt, 0.0, 0.0};
  const Eigen::Index k = w.size();
  Eigen::VectorXd log_w(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    log_w(j) = w[j] > 0.0 ? std::log(w[j]) : kNegInf;
  }
  for (Eigen::Index i = 0; i < test_.points(); ++i) {
    const Eigen::VectorXd logits = test_.log_density.row(i).transpose() + log_w;
    const double lse = row_log_sum_exp(logits);
    report.test_log_score += lse;
    const Eigen::ArrayXd resp = (logits.array() - lse).exp();
    const Eigen::ArrayXd a = test_.grad.row(i).transpose().array();
    const Eigen::ArrayXd b = test_.lap.row(i).transpose().array();
    const double grad = (resp * a).sum();
    const double lap = (resp * (b + (a - grad).square())).sum();
    report.test_hyva_score += 2.0 * lap + grad * grad;
  }
  return report;
}

MethodReport TestEvaluator::evaluate(const QuackParams& p) const {
  p.validate();
  if (p.beta.size() != test_.models()) {
    throw std::invalid_argument("TestEvaluator: beta length differs from model count");
  }
  MethodReport report{Method::quacking, p.beta, p, 0.0, 0.0};
  report.test_hyva_score = quacking_scores(test_, p).hyvarinen().sum();
  const Normalizer z = log_normalizer(p);
  if (!z.decayed) {
    // Mass at the edges of the widened grid: treat the pool as improper.
    report.test_log_score = kNegInf;
    return report;
  }
  for (Eigen::Index i = 0; i < test_.points(); ++i) {
    report.test_log_score += log_pool_unnormalized(p, test_.log_density.row(i).transpose());
  }
  report.test_log_score -= static_cast<double>(test_.points()) * z.log_z;
  return report;
}

}  // namespace lockstack
