#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lockstack/eval_tensor.hpp"
#include "lockstack/models.hpp"
#include "lockstack/optimizer.hpp"
#include "support.hpp"

using namespace lockstack;

namespace {

ObjectiveCoefficients random_coefficients(Eigen::Index n, Eigen::Index k, Rng& rng) {
  Eigen::MatrixXd g(n, k);
  Eigen::MatrixXd l(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double centre = oracle::normal_vector(1, 0.0, 1.0, rng)(0);
    g.col(j) = oracle::normal_vector(n, centre, 1.0, rng);
    l.col(j) = -oracle::normal_vector(n, 0.0, 0.5, rng).array().abs() - 0.2 - rng.uniform();
  }
  return ObjectiveCoefficients::from_scores(g, l);
}

ObjectiveCoefficients normal_models_coefficients(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::VectorXd y = oracle::normal_vector(60, 2.0, std::sqrt(3.0), rng);
  const std::vector<Draws> d{m1_posterior(y, 10.0, 1000, rng.split(1)),
                             m2_posterior(y, 0.1, 1.0, 1000, rng.split(2))};
  return objective_coefficients(build_eval_tensor(d, y));
}

}  // namespace

TEST(Optimizer, SimplexSolverFindsKnownMinimum) {
  const Eigen::Vector3d target(0.2, 0.5, 0.3);
  const FitResult fit = minimize_on_simplex(
      [&](const Eigen::VectorXd& w) { return (w - target).squaredNorm(); },
      [&](const Eigen::VectorXd& w) { return Eigen::VectorXd(2.0 * (w - target)); },
      Eigen::Vector3d::Constant(1.0 / 3.0), {.tol = 1e-10});
  EXPECT_TRUE(fit.converged);
  EXPECT_LT((fit.simplex().vector() - target).norm(), 1e-8);
}

TEST(Optimizer, LockingAgreesWithGridOracle) {
  Rng rng(71);
  int worst_case = -1;
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const ObjectiveCoefficients coef = random_coefficients(20 + c % 30, 2, rng);
    const FitResult fit = fit_locking(coef);
    const FitResult grid = grid_oracle(coef, kDirichletConcentration, 1e-3);
    const double gap = std::abs(fit.simplex()[0] - grid.simplex()[0]);
    if (gap > worst) {
      worst = gap;
      worst_case = c;
    }
    EXPECT_TRUE(fit.converged) << c;
    EXPECT_LE(fit.objective, grid.objective + 1e-9 * std::max(1.0, std::abs(grid.objective))) << c;
  }
  EXPECT_LE(worst, 2e-3) << "case " << worst_case;
}

TEST(Optimizer, LockingAgreesWithGridOracleInThreeDimensions) {
  Rng rng(72);
  for (int c = 0; c < 10; ++c) {
    const ObjectiveCoefficients coef = random_coefficients(25, 3, rng);
    const FitResult fit = fit_locking(coef);
    const FitResult grid = grid_oracle(coef, kDirichletConcentration, 1e-2);
    EXPECT_EQ(grid.gradient_norm, 1e-2);
    EXPECT_LE((fit.simplex().vector() - grid.simplex().vector()).cwiseAbs().maxCoeff(), 1e-2) << c;
    EXPECT_LE(fit.objective, grid.objective + 1e-9 * std::abs(grid.objective)) << c;
  }
}

TEST(Optimizer, TraceIsMonotone) {
  Rng rng(73);
  for (int c = 0; c < 30; ++c) {
    const FitResult fit = fit_locking(random_coefficients(40, 2 + c % 3, rng));
    ASSERT_FALSE(fit.trace.empty());
    for (std::size_t j = 1; j < fit.trace.size(); ++j) {
      EXPECT_LE(fit.trace[j], fit.trace[j - 1]) << c << " at " << j;
    }
  }
}

TEST(Optimizer, LockingOnPosteriorScores) {
  const ObjectiveCoefficients c = normal_models_coefficients(74);
  const FitResult fit = fit_locking(c);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.gradient_norm, 1e-8 * std::max(1.0, std::abs(fit.objective)));
  EXPECT_NEAR(fit.objective, hyva_objective(c, fit.simplex()), 1e-9 * std::abs(fit.objective));
  // Gradient at the optimum is constant across the support.
  const Eigen::VectorXd g = hyva_objective_gradient(c, fit.simplex().vector());
  EXPECT_NEAR(g(0), g(1), 1e-6 * std::max(1.0, std::abs(g(0))));
}

TEST(Optimizer, PermutingModelsPermutesFit) {
  Rng rng(75);
  const ObjectiveCoefficients c = random_coefficients(30, 3, rng);
  const Eigen::Index perm[] = {1, 2, 0};
  const FitResult a = fit_locking(c);
  const FitResult b = fit_locking(c.select(perm));
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(b.simplex()[j], a.simplex()[perm[j]], 1e-6);
  }
}

TEST(Optimizer, GridOracleRejectsLargeK) {
  Rng rng(76);
  EXPECT_ANY_THROW(grid_oracle(random_coefficients(5, 4, rng), 1.01, 0.1));
}

TEST(Optimizer, NelderMeadRosenbrock) {
  const auto f = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
  };
  const NelderMeadResult r = nelder_mead(f, Eigen::Vector2d(-1.2, 1.0), 0.5, {.max_evaluations = 5000});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_NEAR(r.x(1), 1.0, 1e-5);
}

TEST(Optimizer, QuackingNeverWorseThanNestedLocking) {
  for (std::uint64_t seed : {80u, 81u, 82u}) {
    const ObjectiveCoefficients c = normal_models_coefficients(seed);
    const FitResult lock = fit_locking(c);
    const FitResult quack = fit_quacking(c, {.restarts = 4, .seed = seed, .locking_start = {}});
    const QuackParams& p = quack.quack();
    EXPECT_NO_THROW(p.validate());
    EXPECT_LE(p.w.cwiseAbs().maxCoeff(), 5.0 + 1e-12);
    EXPECT_NEAR(quack.objective, quacking_objective(c, p), 1e-9 * std::abs(quack.objective));

    // The nested start: mixture weights at the lock, no mixture power.
    Eigen::Vector3d nested_w;
    nested_w << 0.0, lock.simplex().vector();
    const double nested = quacking_objective(c, {lock.simplex(), nested_w});
    EXPECT_LE(quack.objective, nested + 1e-9 * std::abs(nested)) << seed;

    const FitResult again = fit_quacking(c, {.restarts = 4, .seed = seed, .locking_start = {}});
    EXPECT_EQ(again.quack().w, p.w);
    EXPECT_EQ(again.quack().beta.vector(), p.beta.vector());
  }
}

TEST(Optimizer, FitJson) {
  Rng rng(77);
  const FitResult fit = fit_locking(random_coefficients(10, 2, rng));
  const nlohmann::json j = to_json(fit);
  EXPECT_EQ(j["weights"].size(), 2u);
  EXPECT_TRUE(j.contains("objective"));
  EXPECT_TRUE(j.contains("iterations"));
  EXPECT_TRUE(j["converged"].get<bool>());
}
