#include "lockstack/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lockstack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double stationarity(const Eigen::VectorXd& g, const Eigen::VectorXd& w, Stationarity kind) {
  if (kind == Stationarity::projected_gradient) {
    return (g.array() - g.mean()).matrix().norm();
  }
  return std::max(0.0, w.dot(g) - g.minCoeff());
}

// Locking objective on a raw vector (the solver's iterates are normalized but
// may miss the 1e-12 simplex check by an ulp).
double locking_value(const ObjectiveCoefficients& c, const Eigen::VectorXd& w, double alpha) {
  const Eigen::VectorXd q1 = c.grad * w;
  const Eigen::VectorXd q2 = c.lap * w;
  double value = 2.0 * q2.sum() + q1.squaredNorm();
  if (alpha != 1.0) {
    if ((w.array() <= 0.0).any()) {
      return alpha > 1.0 ? kInf : -kInf;
    }
    value -= (alpha - 1.0) * w.array().log().sum();
  }
  return value;
}

// Sufficient-decrease fraction of the linear prediction. On a quadratic this
// caps accepted steps at 1.4 times the exact line minimum, so iterates cannot
// zig-zag across it.
constexpr double kArmijo = 0.3;

}  // namespace

nlohmann::json to_json(const FitResult& fit) {
  nlohmann::json j;
  if (const auto* w = std::get_if<SimplexWeights>(&fit.weights)) {
    j["weights"] = std::vector<double>(w->vector().data(), w->vector().data() + w->size());
  } else {
    const QuackParams& q = fit.quack();
    j["weights"] = {
        {"beta", std::vector<double>(q.beta.vector().data(), q.beta.vector().data() + q.beta.size())},
        {"w", std::vector<double>(q.w.data(), q.w.data() + q.w.size())}};
  }
  j["objective"] = fit.objective;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  return j;
}

Eigen::VectorXd simplex_step(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  Eigen::VectorXd d = v - u;
  Eigen::Index top = 0;
  u.maxCoeff(&top);
  d(top) = 0.0;
  d(top) = -d.sum();
  return d;
}

FitResult minimize_on_simplex(const std::function<double(const Eigen::VectorXd&)>& objective,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                              Eigen::VectorXd start, const SimplexSolverOptions& options,
                              const ObjectiveDifference& difference) {
  if (start.size() == 0 || (start.array() <= 0.0).any()) {
    throw std::invalid_argument("minimize_on_simplex: start must be strictly positive");
  }
  Eigen::VectorXd w = start / start.sum();
  Eigen::VectorXd log_w = w.array().log();
  double f = objective(w);
  if (!std::isfinite(f)) {
    throw std::invalid_argument("minimize_on_simplex: objective is not finite at the start");
  }
  Eigen::VectorXd g = gradient(w);
  double eta = options.initial_step;

  FitResult result{SimplexWeights::uniform(w.size())};
  int it = 0;
  for (; it < options.max_iter; ++it) {
    const double measure = stationarity(g, w, options.stationarity);
    const double scale = options.relative_tol ? std::max(1.0, std::abs(f)) : 1.0;
    result.gradient_norm = measure;
    if (measure <= options.tol * scale) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    Eigen::VectorXd next_log_w;
    Eigen::VectorXd next_w;
    double next_f = f;
    while (eta > 1e-30) {
      next_log_w = log_w.array() - eta * (g.array() - g.minCoeff());
      // Keep every coordinate representable so no weight is lost to underflow.
      next_log_w = next_log_w.array().max(next_log_w.maxCoeff() - 700.0);
      const double top = next_log_w.maxCoeff();
      next_w = (next_log_w.array() - top).exp();
      next_w /= next_w.sum();
      const double delta = difference ? difference(w, next_w) : objective(next_w) - f;
      const double slope = g.dot(simplex_step(w, next_w));
      next_f = f + delta;
      if (delta <= kArmijo * std::min(slope, 0.0) && std::isfinite(next_f)) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      break;  // stalled at floating-point resolution
    }
    const bool moved = (next_w.array() != w.array()).any();
    w = next_w;
    log_w = w.array().log();
    f = next_f;
    g = gradient(w);
    result.trace.push_back(f);
    eta = std::min(eta * 2.0, 1e12);
    if (!moved) {
      result.gradient_norm = stationarity(g, w, options.stationarity);
      ++it;
      break;
    }
  }
  result.weights = SimplexWeights::normalized(w);
  result.objective = objective(w);
  result.iterations = it;
  return result;
}

FitResult fit_locking(const ObjectiveCoefficients& c, const LockingOptions& options) {
  if (c.models() < 1 || !c.grad.allFinite() || !c.lap.allFinite()) {
    throw std::invalid_argument("fit_locking: coefficients must be finite with K >= 1");
  }
  const double alpha = options.alpha;
  SimplexSolverOptions solver;
  solver.tol = options.tol;
  solver.max_iter = options.max_iter;
  solver.stationarity = Stationarity::projected_gradient;
  const Eigen::VectorXd lap_total = c.lap.colwise().sum().transpose();
  // f(v) - f(u) = 2 sum(b)'d + (A d)'(A (u + v)) - (alpha - 1) sum log(v / u), d = v - u.
  auto difference = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const Eigen::VectorXd d = simplex_step(u, v);
    double delta = 2.0 * lap_total.dot(d) + (c.grad * d).dot(c.grad * (2.0 * u + d));
    if (alpha != 1.0) {
      if ((v.array() <= 0.0).any()) {
        return alpha > 1.0 ? kInf : -kInf;
      }
      delta -= (alpha - 1.0) * (d.array() / u.array()).log1p().sum();
    }
    return delta;
  };
  return minimize_on_simplex(
      [&](const Eigen::VectorXd& w) { return locking_value(c, w, alpha); },
      [&](const Eigen::VectorXd& w) { return hyva_objective_gradient(c, w, alpha); },
      Eigen::VectorXd::Constant(c.models(), 1.0 / static_cast<double>(c.models())), solver,
      difference);
}

FitResult grid_oracle(const ObjectiveCoefficients& c, double alpha, double resolution) {
  const Eigen::Index k = c.models();
  if (k != 2 && k != 3) {
    throw std::invalid_argument("grid_oracle: only K = 2 or K = 3 is supported");
  }
  if (!(resolution > 0.0) || resolution > 0.5) {
    throw std::invalid_argument("grid_oracle: resolution must be in (0, 0.5]");
  }
  const auto steps = static_cast<int>(std::llround(1.0 / resolution));
  const double h = 1.0 / steps;
  Eigen::VectorXd best_w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  double best = kInf;
  int evaluations = 0;
  Eigen::VectorXd w(k);
  auto consider = [&](const Eigen::VectorXd& candidate) {
    ++evaluations;
    const double value = locking_value(c, candidate, alpha);
    if (value < best) {
      best = value;
      best_w = candidate;
    }
  };
  for (int i = 0; i <= steps; ++i) {
    if (k == 2) {
      w << i * h, 1.0 - i * h;
      consider(w);
      continue;
    }
    for (int j = 0; i + j <= steps; ++j) {
      w << i * h, j * h, 1.0 - (i + j) * h;
      consider(w.cwiseMax(0.0));
    }
  }
  FitResult result{SimplexWeights::normalized(best_w)};
  result.objective = best;
  result.iterations = evaluations;
  result.converged = std::isfinite(best);
  result.gradient_norm = h;
  return result;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, double initial_step,
                             const NelderMeadOptions& options) {
  const Eigen::Index d = start.size();
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(d + 1), start);
  std::vector<double> values(static_cast<std::size_t>(d + 1));
  for (Eigen::Index j = 0; j < d; ++j) {
    simplex[static_cast<std::size_t>(j + 1)](j) += initial_step;
  }
  NelderMeadResult out;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++out.evaluations;
    const double v = f(x);
    return std::isnan(v) ? kInf : v;
  };
  for (std::size_t j = 0; j < simplex.size(); ++j) {
    values[j] = eval(simplex[j]);
  }
  std::vector<std::size_t> order(simplex.size());

  while (out.evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double diameter = 0.0;
    for (std::size_t j = 0; j < simplex.size(); ++j) {
      diameter = std::max(diameter, (simplex[j] - simplex[best]).lpNorm<Eigen::Infinity>());
    }
    const double spread = values[worst] - values[best];
    if (std::isfinite(spread) &&
        spread <= options.ftol * std::max(1.0, std::abs(values[best])) &&
        diameter <= options.xtol * std::max(1.0, simplex[best].lpNorm<Eigen::Infinity>())) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < simplex.size(); ++j) {
      if (j != worst) {
        centroid += simplex[j];
      }
    }
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double f_reflected = eval(reflected);
    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    const Eigen::VectorXd contracted = outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                                               : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_contracted = eval(contracted);
    if (f_contracted < std::min(f_reflected, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }
    for (std::size_t j = 0; j < simplex.size(); ++j) {
      if (j != best) {
        simplex[j] = simplex[best] + 0.5 * (simplex[j] - simplex[best]);
        values[j] = eval(simplex[j]);
      }
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin());
  out.x = simplex[best];
  out.value = values[best];
  return out;
}

namespace {

struct QuackCoordinates {
  Eigen::Index models;
  double box;

  // x = (beta logits 1..K-1, w_0..w_K); logit 0 is pinned at zero.
  [[nodiscard]] QuackParams decode(const Eigen::VectorXd& x) const {
    Eigen::VectorXd logits(models);
    logits(0) = 0.0;
    logits.tail(models - 1) = x.head(models - 1);
    const double top = logits.maxCoeff();
    Eigen::VectorXd beta = (logits.array() - top).exp();
    beta /= beta.sum();
    Eigen::VectorXd w = x.tail(models + 1).cwiseMax(-box).cwiseMin(box);
    return {SimplexWeights::normalized(std::move(beta)), std::move(w)};
  }

  [[nodiscard]] Eigen::VectorXd encode(const SimplexWeights& beta, const Eigen::VectorXd& w) const {
    Eigen::VectorXd x(2 * models);
    const double floor = 1e-300;
    for (Eigen::Index k = 1; k < models; ++k) {
      x(k - 1) = std::log(std::max(beta[k], floor)) - std::log(std::max(beta[0], floor));
    }
    x.tail(models + 1) = w.cwiseMax(-box).cwiseMin(box);
    return x;
  }
};

}  // namespace

FitResult fit_quacking(const ObjectiveCoefficients& c, const QuackingOptions& options) {
  const Eigen::Index k = c.models();
  if (k < 1 || !c.grad.allFinite() || !c.lap.allFinite() || !c.log_density.allFinite()) {
    throw std::invalid_argument("fit_quacking: coefficients must be finite with K >= 1");
  }
  if (options.restarts < 1) {
    throw std::invalid_argument("fit_quacking: need at least one restart");
  }
  const QuackCoordinates coords{k, options.box};
  const double alpha = options.alpha;
  auto objective = [&](const Eigen::VectorXd& x) {
    return quacking_objective(c, coords.decode(x), alpha);
  };

  const SimplexWeights lock = options.locking_start
                                  ? *options.locking_start
                                  : fit_locking(c, {alpha, 1e-8, 10000}).simplex();
  Eigen::VectorXd nested_w(k + 1);
  nested_w(0) = 0.0;
  nested_w.tail(k) = lock.vector();

  const Eigen::VectorXd nested_start = coords.encode(lock, nested_w);
  const double nested_value = objective(nested_start);

  Rng root(options.seed);
  std::normal_distribution<double> normal;
  NelderMeadOptions nm;
  nm.max_evaluations = options.max_evaluations;
  nm.ftol = options.ftol;

  Eigen::VectorXd best_x = nested_start;
  double best_value = nested_value;
  bool best_nm_converged = false;
  int evaluations = 0;
  for (int r = 0; r < options.restarts; ++r) {
    Eigen::VectorXd x0;
    if (r == 0) {
      x0 = nested_start;
    } else if (r == 1) {
      x0 = coords.encode(SimplexWeights::uniform(k), nested_w);
    } else {
      Rng rng = root.split(static_cast<std::uint64_t>(r));
      x0 = nested_start;
      for (Eigen::Index j = 0; j < x0.size(); ++j) {
        x0(j) += (j < k - 1 ? 1.0 : 0.5) * normal(rng);
      }
    }
    NelderMeadResult run = nelder_mead(objective, x0, 0.5, nm);
    NelderMeadResult polish = nelder_mead(objective, run.x, 0.05, nm);
    evaluations += run.evaluations + polish.evaluations;
    if (polish.value < best_value) {
      best_value = polish.value;
      best_x = polish.x;
      best_nm_converged = polish.converged;
    }
  }

  FitResult result{coords.decode(best_x)};
  result.objective = best_value;
  result.iterations = evaluations;
  if (!(best_value < nested_value)) {
    result.converged = false;
    result.gradient_norm = kInf;
    return result;
  }

  // Projected central-difference gradient at the optimum.
  const double h = 1e-6;
  Eigen::VectorXd grad(best_x.size());
  Eigen::VectorXd clamped = coords.encode(result.quack().beta, result.quack().w);
  for (Eigen::Index j = 0; j < clamped.size(); ++j) {
    Eigen::VectorXd up = clamped;
    Eigen::VectorXd down = clamped;
    up(j) += h;
    down(j) -= h;
    grad(j) = (objective(up) - objective(down)) / (2.0 * h);
    if (j >= k - 1) {
      const double v = clamped(j);
      if ((v >= options.box && grad(j) < 0.0) || (v <= -options.box && grad(j) > 0.0)) {
        grad(j) = 0.0;
      }
    }
  }
  result.gradient_norm = grad.norm();
  result.converged = best_nm_converged &&
                     result.gradient_norm <= options.grad_tol * std::max(1.0, std::abs(best_value));
  return result;
}

}  // namespace lockstack
