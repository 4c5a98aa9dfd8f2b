#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include "lockstack/models.hpp"
#include "support.hpp"

using namespace lockstack;
using oracle::normal_logpdf;

namespace {

double log_scaled_inv_chi2(double x, double dof, double scale) {
  const double h = 0.5 * dof;
  return h * std::log(h * scale) - std::lgamma(h) - (h + 1.0) * std::log(x) - h * scale / x;
}

double log_chi2(double z, double dof) {
  const double h = 0.5 * dof;
  return (h - 1.0) * std::log(z) - 0.5 * z - h * std::log(2.0) - std::lgamma(h);
}

// P(X <= x) for scaled-inv-chi2: dof * scale / X is chi-squared(dof).
double scaled_inv_chi2_cdf(double x, double dof, double scale) {
  const double z = dof * scale / x;
  const double upper = dof + 40.0 * std::sqrt(2.0 * dof) + 40.0;
  if (z >= upper) {
    return 0.0;
  }
  return std::exp(oracle::log_simpson([&](double t) { return log_chi2(t, dof); }, z, upper, 2000));
}

void check_derivatives(const PredictiveModel& model, const Eigen::MatrixXd& params, Eigen::Index point) {
  const Eigen::Index s = params.rows();
  Eigen::VectorXd l(s), d(s), e(s), lp(s), dp(s), ep(s), lm(s), dm(s), em(s);
  const double h = 1e-5;
  for (double y : {-1.3, 0.2, 2.1}) {
    model.evaluate(params, y, point, l, d, e);
    model.evaluate(params, y + h, point, lp, dp, ep);
    model.evaluate(params, y - h, point, lm, dm, em);
    for (Eigen::Index j = 0; j < s; ++j) {
      EXPECT_NEAR(d(j), (lp(j) - lm(j)) / (2 * h), 1e-6 * (1.0 + std::abs(d(j))));
      EXPECT_NEAR(e(j), (dp(j) - dm(j)) / (2 * h), 1e-6 * (1.0 + std::abs(e(j))));
    }
  }
}

}  // namespace

TEST(Models, EvaluatorsMatchFiniteDifferences) {
  Eigen::MatrixXd one(3, 1);
  one << 0.5, -1.0, 2.0;
  check_derivatives(UnitVarianceNormal{}, one, 0);
  one << 0.5, 1.0, 3.0;
  check_derivatives(ZeroMeanNormal{}, one, 0);
  Eigen::MatrixXd two(2, 2);
  two << 0.3, 0.7, -1.0, 2.5;
  check_derivatives(LocationScaleNormal{}, two, 0);
  Eigen::MatrixXd x(2, 3);
  x << 1.0, -0.5, 2.0, 0.3, 0.3, -1.0;
  Eigen::MatrixXd beta(2, 4);
  beta << 0.5, 0.1, -0.2, 1.5, -1.0, 0.0, 0.3, 0.4;
  check_derivatives(LinearRegression{x}, beta, 1);
}

TEST(Models, RegressionDensityUsesDesignRow) {
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 2.0, -1.0, 0.5;
  Eigen::MatrixXd theta(1, 3);
  theta << 0.4, -0.2, 2.0;
  Eigen::VectorXd l(1), d(1), e(1);
  LinearRegression{x}.evaluate(theta, 0.7, 1, l, d, e);
  const double mean = -0.4 - 0.1;
  EXPECT_NEAR(l(0), normal_logpdf(0.7, mean, 2.0), 1e-12);
  EXPECT_NEAR(e(0), -0.5, 1e-12);
}

TEST(Models, ConjugateParameters) {
  const Eigen::Vector3d y(0.5, 1.5, -1.0);
  const NormalPosterior p = m1_posterior_params(y, 10.0);
  EXPECT_NEAR(p.variance, 1.0 / (0.1 + 3.0), 1e-14);
  EXPECT_NEAR(p.mean, 1.0 / (0.1 + 3.0), 1e-14);
  const ScaledInvChi2 q = m2_posterior_params(y, 0.1, 1.0);
  EXPECT_NEAR(q.dof, 3.1, 1e-14);
  EXPECT_NEAR(q.scale, (0.1 + 0.25 + 2.25 + 1.0) / 3.1, 1e-14);
}

TEST(Models, M1DrawsFollowPosterior) {
  Rng rng(41);
  const Eigen::VectorXd y = oracle::normal_vector(25, 1.0, 1.0, rng);
  const NormalPosterior p = m1_posterior_params(y, 10.0);
  const Draws d = m1_posterior(y, 10.0, 4000, Rng(42));
  ASSERT_EQ(d.size(), 4000);
  std::vector<double> x(d.params.data(), d.params.data() + 4000);
  const double ks = oracle::ks_statistic(x, [&](double t) { return oracle::normal_cdf(t, p.mean, p.variance); });
  EXPECT_LT(ks, oracle::ks_critical_1pct(x.size()));
}

TEST(Models, M2DrawsFollowPosterior) {
  Rng rng(43);
  const Eigen::VectorXd y = oracle::normal_vector(20, 0.0, 2.0, rng);
  const ScaledInvChi2 q = m2_posterior_params(y, 0.1, 1.0);
  const Draws d = m2_posterior(y, 0.1, 1.0, 4000, Rng(44));
  std::vector<double> x(d.params.data(), d.params.data() + 4000);
  for (double v : x) {
    ASSERT_GT(v, 0.0);
  }
  const double ks = oracle::ks_statistic(x, [&](double t) { return scaled_inv_chi2_cdf(t, q.dof, q.scale); });
  EXPECT_LT(ks, oracle::ks_critical_1pct(x.size()));
}

TEST(Models, DrawsAreReproducible) {
  const Eigen::Vector3d y(0.1, 0.2, 0.3);
  EXPECT_EQ(m1_posterior(y, 10.0, 100, Rng(5)).params, m1_posterior(y, 10.0, 100, Rng(5)).params);
  EXPECT_NE(m1_posterior(y, 10.0, 100, Rng(5)).params, m1_posterior(y, 10.0, 100, Rng(6)).params);
}

TEST(Models, M1MarginalMatchesQuadratureAndDenseGaussian) {
  Rng rng(45);
  const Eigen::VectorXd y = oracle::normal_vector(15, 0.8, 1.2, rng);
  const double v0 = 10.0;
  const auto integrand = [&](double theta) {
    double s = normal_logpdf(theta, 0.0, v0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      s += normal_logpdf(y(i), theta, 1.0);
    }
    return s;
  };
  const double quad = oracle::log_simpson(integrand, y.mean() - 6.0, y.mean() + 6.0, 4000);
  EXPECT_NEAR(log_marginal_m1(y, v0), quad, 1e-8);

  const Eigen::Index n = y.size();
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n) + v0 * Eigen::MatrixXd::Ones(n, n);
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double dense = -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + y.dot(llt.solve(y)));
  EXPECT_NEAR(log_marginal_m1(y, v0), dense, 1e-9);
}

TEST(Models, M2MarginalMatchesQuadrature) {
  Rng rng(46);
  const Eigen::VectorXd y = oracle::normal_vector(30, 0.0, 1.5, rng);
  const double nu0 = 0.1;
  const double tau0 = 1.0;
  const auto integrand = [&](double t) {
    const double v = std::exp(t);
    double s = log_scaled_inv_chi2(v, nu0, tau0) + t;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      s += normal_logpdf(y(i), 0.0, v);
    }
    return s;
  };
  const double centre = std::log(y.squaredNorm() / 30.0);
  const double quad = oracle::log_simpson(integrand, centre - 4.0, centre + 4.0, 4000);
  EXPECT_NEAR(log_marginal_m2(y, nu0, tau0), quad, 1e-8);
}

TEST(Models, GibbsMatchesLeastSquaresWithWidePrior) {
  Rng rng(47);
  const Eigen::Index n = 400;
  Eigen::MatrixXd x(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = oracle::normal_vector(3, 0.0, 1.0, rng).transpose();
  }
  const Eigen::Vector3d beta(1.0, -0.5, 0.2);
  const Eigen::VectorXd y = x * beta + oracle::normal_vector(n, 0.0, 1.0, rng);
  const Draws d = regression_gibbs(x, y, RegressionPrior::wide(3), 2000, 200, Rng(48));
  ASSERT_EQ(d.size(), 2000);
  ASSERT_EQ(d.params.cols(), 4);

  const Eigen::VectorXd ols = x.colPivHouseholderQr().solve(y);
  const double rss = (y - x * ols).squaredNorm();
  const Eigen::RowVectorXd m = d.params.colwise().mean();
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(m(j), ols(j), 0.02) << j;
  }
  EXPECT_NEAR(m(3) / (rss / n), 1.0, 0.05);
  EXPECT_EQ(d.params, regression_gibbs(x, y, RegressionPrior::wide(3), 2000, 200, Rng(48)).params);
}

TEST(Models, ScenarioPresetsAndSimulation) {
  EXPECT_EQ(scenario_preset(2).v_star, 5.0);
  EXPECT_EQ(scenario_preset(3).mu_star, 4.0);
  EXPECT_THROW(scenario_preset(5), std::invalid_argument);

  ScenarioConfig c = scenario_preset(3);
  c.n_train = 20000;
  const ScenarioData a = simulate_scenario(c, Rng(49));
  EXPECT_EQ(a.test.size(), 50);
  EXPECT_NEAR(a.train.mean(), 4.0, 4.0 * std::sqrt(3.0 / 20000.0));
  EXPECT_NEAR((a.train.array() - a.train.mean()).square().mean(), 3.0, 0.12);
  EXPECT_EQ(simulate_scenario(c, Rng(49)).test, a.test);
}

TEST(Models, ScenarioToml) {
  const ScenarioConfig c = parse_scenario_toml("mu_star = 2.5\nn_train = 30\nseed = 9\n", scenario_preset(2));
  EXPECT_EQ(c.mu_star, 2.5);
  EXPECT_EQ(c.v_star, 5.0);
  EXPECT_EQ(c.n_train, 30);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(parse_scenario_toml("v_star = 2\n").v_star, 2.0);
  EXPECT_THROW(parse_scenario_toml("mu = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse_scenario_toml("n_train = 1.5\n"), std::invalid_argument);
  EXPECT_THROW(parse_scenario_toml("v_star = -1\n"), std::invalid_argument);
  EXPECT_THROW(parse_scenario_toml("v_star = \n"), std::invalid_argument);
}

TEST(Models, SamplersMatchMoments) {
  Rng rng(50);
  const Eigen::RowVector2d theta(1.5, 0.25);
  std::vector<double> x(20000);
  for (double& v : x) {
    v = LocationScaleNormal{}.sample(theta, 0, rng);
  }
  EXPECT_NEAR(oracle::mean_of(x), 1.5, 4.0 * 0.5 / std::sqrt(20000.0));
  EXPECT_NEAR(oracle::sd_of(x), 0.5, 0.01);
}

TEST(Models, DatasetCsv) {
  std::ostringstream out;
  write_dataset_csv(out, Eigen::Vector2d(0.5, -1.25), "# c\n");
  EXPECT_EQ(out.str(), "# c\npoint_id,y\n0,0.5\n1,-1.25\n");
}
