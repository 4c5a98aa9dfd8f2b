#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lockstack/baselines.hpp"
#include "lockstack/models.hpp"
#include "support.hpp"

using namespace lockstack;
using oracle::normal_logpdf;

namespace {

// Golden-section maximum of a concave function on [0, 1].
double golden_max(const std::function<double(double)>& f) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0;
  double b = 1.0;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  while (b - a > 1e-10) {
    if (f(c) > f(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return 0.5 * (a + b);
}

double direct_stacking(const Eigen::MatrixXd& lpd, double w1) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lpd.rows(); ++i) {
    s += std::log(w1 * std::exp(lpd(i, 0)) + (1.0 - w1) * std::exp(lpd(i, 1)));
  }
  return s;
}

Eigen::MatrixXd two_normal_lpd(Eigen::Index n, double a, double b, Rng& rng) {
  const Eigen::VectorXd y = oracle::normal_vector(n, 0.0, 1.5, rng);
  Eigen::MatrixXd lpd(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    lpd(i, 0) = normal_logpdf(y(i), a, 1.0);
    lpd(i, 1) = normal_logpdf(y(i), b, 2.0);
  }
  return lpd;
}

std::vector<Draws> fixed_pair() {
  return {fixed_normal("a", -1.0, 1.0, 1), fixed_normal("b", 2.0, 2.0, 1)};
}

}  // namespace

TEST(Baselines, MethodNames) {
  for (Method m : kAllMethods) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("averaging"), std::invalid_argument);
  EXPECT_TRUE(is_linear(Method::stacking));
  EXPECT_FALSE(is_linear(Method::locking));
  EXPECT_FALSE(is_linear(Method::quacking));
}

TEST(Baselines, BmaIsSoftmax) {
  const Eigen::Vector3d lm(-100.0, -101.0, -103.5);
  const SimplexWeights w = bma_weights(lm);
  const double z = 1.0 + std::exp(-1.0) + std::exp(-3.5);
  EXPECT_NEAR(w[0], 1.0 / z, 1e-15);
  EXPECT_NEAR(w[2], std::exp(-3.5) / z, 1e-15);
  EXPECT_NEAR(bma_weights(Eigen::Vector2d(-2000.0, -1000.0))[1], 1.0, 1e-15);
  EXPECT_THROW(bma_weights(Eigen::Vector2d(0.0, std::nan(""))), std::invalid_argument);
}

TEST(Baselines, SelectionTiesGoToLowestIndex) {
  EXPECT_EQ(select_max(Eigen::Vector3d(1.0, 3.0, 3.0))[1], 1.0);
  EXPECT_EQ(select_min(Eigen::Vector3d(2.0, 0.5, 0.5))[1], 1.0);
  EXPECT_EQ(hyva_select(Eigen::Vector3d(4.0, -1.0, -1.0)), 1);
}

TEST(Baselines, StackingMatchesGoldenSection) {
  Rng rng(91);
  for (int c = 0; c < 20; ++c) {
    const Eigen::MatrixXd lpd = two_normal_lpd(80, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, rng);
    const double expected = golden_max([&](double w) { return direct_stacking(lpd, w); });
    const SimplexWeights w = stacking_weights(lpd);
    EXPECT_NEAR(w[0], expected, 1e-4) << c;
    EXPECT_NEAR(stacking_objective(lpd, w.vector()), direct_stacking(lpd, w[0]), 1e-9);
    EXPECT_GE(stacking_objective(lpd, w.vector()), direct_stacking(lpd, expected) - 1e-9);
  }
}

TEST(Baselines, StackingRowShiftInvariant) {
  Rng rng(92);
  const Eigen::MatrixXd lpd = two_normal_lpd(50, -0.5, 0.5, rng);
  Eigen::MatrixXd shifted = lpd;
  for (Eigen::Index i = 0; i < lpd.rows(); ++i) {
    shifted.row(i).array() += 300.0 * rng.uniform() - 150.0;
  }
  EXPECT_NEAR(stacking_weights(lpd)[0], stacking_weights(shifted)[0], 1e-7);
}

TEST(Baselines, StackingDominantModelAndTies) {
  Rng rng(93);
  Eigen::MatrixXd lpd = two_normal_lpd(40, 0.0, 0.0, rng);
  lpd.col(1).array() -= 10.0;
  EXPECT_EQ(stacking_weights(lpd)[0], 1.0);

  Eigen::MatrixXd same(40, 3);
  same.col(0) = lpd.col(0);
  same.col(1) = lpd.col(0);
  same.col(2) = lpd.col(1);
  const SimplexWeights w = stacking_weights(same);
  EXPECT_NEAR(w[0], 0.5, 1e-12);
  EXPECT_NEAR(w[1], 0.5, 1e-12);
}

TEST(Baselines, LooElpdSumsPointwise) {
  Rng rng(94);
  const Eigen::VectorXd y = oracle::normal_vector(30, 0.5, 1.0, rng);
  const std::vector<Draws> d{m1_posterior(y, 10.0, 2000, rng.split(1))};
  const EvalTensor t = build_eval_tensor(d, y);
  const LooElpd loo = loo_elpd(t, 0);
  ASSERT_EQ(loo.pointwise.size(), 30);
  EXPECT_NEAR(loo.elpd, loo.pointwise.sum(), 1e-9);
  const ObjectiveCoefficients c = objective_coefficients(t);
  EXPECT_LT((loo.pointwise - c.log_density.col(0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(loo.high_pareto_k, 0);

  // Exact leave-one-out predictive of the conjugate model.
  double exact = 0.0;
  for (Eigen::Index i = 0; i < 30; ++i) {
    Eigen::VectorXd rest(29);
    rest << y.head(i), y.tail(29 - i);
    const NormalPosterior p = m1_posterior_params(rest, 10.0);
    exact += normal_logpdf(y(i), p.mean, 1.0 + p.variance);
  }
  EXPECT_NEAR(loo.elpd, exact, 0.05);
}

TEST(Baselines, TotalHyvarinenIsColumnSum) {
  const ObjectiveCoefficients c = ObjectiveCoefficients::from_scores(
      (Eigen::MatrixXd(2, 2) << 1.0, 2.0, -1.0, 0.0).finished(),
      (Eigen::MatrixXd(2, 2) << -1.0, -0.5, -2.0, -0.25).finished());
  const Eigen::VectorXd t = total_hyvarinen(c);
  EXPECT_NEAR(t(0), (2 * -1.0 + 1.0) + (2 * -2.0 + 1.0), 1e-15);
  EXPECT_NEAR(t(1), (2 * -0.5 + 4.0) + (2 * -0.25 + 0.0), 1e-15);
}

TEST(Baselines, LinearTestScoresAreMixtureDensities) {
  Rng rng(95);
  const Eigen::VectorXd train = oracle::normal_vector(20, 0.0, 1.0, rng);
  const Eigen::VectorXd test = oracle::normal_vector(15, 0.5, 1.5, rng);
  const TestEvaluator ev(fixed_pair(), train, test, 1, 2001);
  const SimplexWeights w(Eigen::Vector2d(0.3, 0.7));
  const MethodReport r = ev.evaluate(Method::stacking, w);
  double log_score = 0.0;
  double hyva = 0.0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const auto f = [&](double y) {
      return std::log(0.3 * std::exp(normal_logpdf(y, -1.0, 1.0)) + 0.7 * std::exp(normal_logpdf(y, 2.0, 2.0)));
    };
    log_score += f(test(i));
    const double g = oracle::central_difference(f, test(i), 1e-5);
    hyva += 2.0 * oracle::second_difference(f, test(i), 1e-4) + g * g;
  }
  EXPECT_NEAR(r.test_log_score, log_score, 1e-10);
  EXPECT_NEAR(r.test_hyva_score, hyva, 1e-4 * std::abs(hyva));
  EXPECT_EQ(r.method, Method::stacking);
}

TEST(Baselines, LockingTestScoresUseNormalizedPool) {
  Rng rng(96);
  const Eigen::VectorXd train = oracle::normal_vector(20, 0.0, 1.0, rng);
  const Eigen::VectorXd test = oracle::normal_vector(15, 0.5, 1.5, rng);
  const TestEvaluator ev(fixed_pair(), train, test, 1, 4001);
  const SimplexWeights w(Eigen::Vector2d(0.3, 0.7));
  const MethodReport r = ev.evaluate(Method::locking, w);
  const double precision = 0.3 + 0.35;
  const double mean = (-0.3 + 0.7) / precision;
  double log_score = 0.0;
  double hyva = 0.0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    log_score += normal_logpdf(test(i), mean, 1.0 / precision);
    hyva += -2.0 * precision + std::pow(precision * (test(i) - mean), 2);
  }
  EXPECT_NEAR(r.test_log_score, log_score, 1e-8);
  EXPECT_NEAR(r.test_hyva_score, hyva, 1e-9);

  const MethodReport q = ev.evaluate(locking_as_quack(w));
  EXPECT_NEAR(q.test_log_score, r.test_log_score, 1e-12);
  EXPECT_TRUE(ev.log_normalizer(locking_as_quack(w)).decayed);
}

TEST(Baselines, NonIntegrablePoolScoresMinusInfinity) {
  const std::vector<Draws> d{fixed_normal("narrow", 0.0, 0.5, 1), fixed_normal("wide", 0.0, 1.0, 1)};
  const TestEvaluator ev(d, Eigen::Vector2d(-1.0, 1.0), Eigen::Vector2d(0.0, 0.5), 1, 1001);
  const QuackParams p{SimplexWeights::uniform(2), Eigen::Vector3d(0.0, -1.0, 1.0)};
  EXPECT_FALSE(ev.log_normalizer(p).decayed);
  const MethodReport r = ev.evaluate(p);
  EXPECT_TRUE(std::isinf(r.test_log_score) && r.test_log_score < 0);
}

TEST(Baselines, PoolUnnormalizedLogDensity) {
  const QuackParams p{SimplexWeights(Eigen::Vector2d(0.25, 0.75)), Eigen::Vector3d(0.5, 1.0, -0.5)};
  const Eigen::Vector2d lp(-1.0, -2.0);
  const double expected = 0.5 * std::log(0.25 * std::exp(-1.0) + 0.75 * std::exp(-2.0)) - 1.0 + 1.0;
  EXPECT_NEAR(log_pool_unnormalized(p, lp), expected, 1e-14);
}
