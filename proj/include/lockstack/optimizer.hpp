#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lockstack/pooling.hpp"

namespace lockstack {

struct FitResult {
  explicit FitResult(std::variant<SimplexWeights, QuackParams> w) : weights{std::move(w)} {}

  std::variant<SimplexWeights, QuackParams> weights;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  /// Objective after every accepted iteration (simplex solvers only).
  std::vector<double> trace;

  [[nodiscard]] const SimplexWeights& simplex() const { return std::get<SimplexWeights>(weights); }
  [[nodiscard]] const QuackParams& quack() const { return std::get<QuackParams>(weights); }
};

/// {weights, objective, iterations, converged}; quacking weights serialize as
/// {beta: [...], w: [...]}.
nlohmann::json to_json(const FitResult& fit);

enum class Stationarity {
  /// Norm of the gradient projected onto the simplex tangent space.
  projected_gradient,
  /// Frank-Wolfe gap <g, w> - min_k g_k; also valid when the optimum is on a face.
  frank_wolfe_gap,
};

struct SimplexSolverOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  double initial_step = 0.1;
  Stationarity stationarity = Stationarity::projected_gradient;
  /// Tolerance is scaled by max(1, |objective|).
  bool relative_tol = true;
};

/// f(to) - f(from), computed without the cancellation of subtracting two
/// objective values.
using ObjectiveDifference =
    std::function<double(const Eigen::VectorXd& from, const Eigen::VectorXd& to)>;

/// v - u for two points of the simplex, with the change of the largest
/// coordinate of u set to minus the sum of the others. The small coordinates
/// carry the resolution near a vertex; the large one is only known to 1e-16.
Eigen::VectorXd simplex_step(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Exponentiated-gradient mirror descent on the simplex with backtracking:
/// w <- normalize(w * exp(-eta g)); eta is halved until the decrease is at least
/// 0.3 times the linear prediction g'(w_new - w) and doubled after each accepted
/// step. The decrease comes from `difference` when given, and the trace
/// accumulates those differences.
FitResult minimize_on_simplex(const std::function<double(const Eigen::VectorXd&)>& objective,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                              Eigen::VectorXd start, const SimplexSolverOptions& options = {},
                              const ObjectiveDifference& difference = {});

struct LockingOptions {
  double alpha = kDirichletConcentration;
  double tol = 1e-8;
  int max_iter = 10000;
};

/// Minimizes hyva_objective over the simplex from the uniform start.
FitResult fit_locking(const ObjectiveCoefficients& c, const LockingOptions& options = {});

struct QuackingOptions {
  double alpha = kDirichletConcentration;
  int restarts = 10;
  std::uint64_t seed = 0;
  double box = 5.0;  // |w_j| <= box
  int max_evaluations = 20000;
  double ftol = 1e-12;
  /// Converged requires the projected finite-difference gradient norm at the
  /// optimum to be at most grad_tol * max(1, |objective|).
  double grad_tol = 1e-5;
  /// Starting point for the geometric weights; defaults to the locking fit.
  std::optional<SimplexWeights> locking_start;
};

/// Minimizes quacking_objective over beta (softmax logits) and w in [-box, box]^(K+1)
/// with Nelder-Mead from several starts; the best restart wins, lowest index on ties.
FitResult fit_quacking(const ObjectiveCoefficients& c, const QuackingOptions& options = {});

/// Exhaustive search over the simplex lattice with spacing `resolution`; K must be 2 or 3.
/// `gradient_norm` holds the lattice spacing.
FitResult grid_oracle(const ObjectiveCoefficients& c, double alpha, double resolution);

struct NelderMeadOptions {
  int max_evaluations = 20000;
  double ftol = 1e-12;  // relative spread of simplex values
  double xtol = 1e-10;  // simplex diameter
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, double initial_step,
                             const NelderMeadOptions& options = {});

}  // namespace lockstack
