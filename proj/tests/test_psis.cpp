#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lockstack/psis.hpp"
#include "support.hpp"

using namespace lockstack;

namespace {

// Inverse-CDF draws from GPD(k, sigma) at location 0, written out by hand.
std::vector<double> gpd_sample(std::size_t n, double k, double sigma, Rng rng) {
  std::vector<double> x(n);
  for (double& v : x) {
    const double u = rng.uniform();
    v = sigma / k * (std::pow(1.0 - u, -k) - 1.0);
  }
  return x;
}

}  // namespace

TEST(Psis, TailLength) {
  EXPECT_EQ(psis_tail_length(4000), 190);
  EXPECT_EQ(psis_tail_length(100), 20);
  EXPECT_EQ(psis_tail_length(1000), 95);
}

TEST(Psis, QuantileClosedForm) {
  for (double k : {-0.3, 0.2, 0.9}) {
    for (double p : {0.1, 0.5, 0.99}) {
      const double expected = 2.0 / k * (std::pow(1.0 - p, -k) - 1.0);
      EXPECT_NEAR(gpd_quantile(p, k, 2.0), expected, 1e-12 * (1.0 + std::abs(expected)));
    }
  }
  // Exponential limit.
  EXPECT_NEAR(gpd_quantile(0.5, 0.0, 1.0), std::log(2.0), 1e-12);
}

TEST(Psis, GpdFitRecoversParameters) {
  for (double k : {0.2, 0.5, 0.9}) {
    std::vector<double> x = gpd_sample(5000, k, 2.0, Rng(11).split(static_cast<std::uint64_t>(k * 10)));
    std::sort(x.begin(), x.end());
    const GpdFit fit = fit_generalized_pareto(x, false);
    EXPECT_NEAR(fit.k, k, 0.08) << "k = " << k;
    EXPECT_NEAR(fit.sigma / 2.0, 1.0, 0.1) << "k = " << k;
  }
}

TEST(Psis, ShapeCalibratedAtHeavyTail) {
  // Raw importance ratios with a GPD(0.9) tail at S = 4000.
  std::vector<double> hits;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const std::vector<double> x = gpd_sample(4000, 0.9, 1.0, Rng(5).split(rep));
    Eigen::VectorXd lw(4000);
    for (Eigen::Index s = 0; s < 4000; ++s) {
      lw(s) = std::log1p(x[static_cast<std::size_t>(s)]);
    }
    const PsisResult r = psis_smooth(lw);
    ASSERT_TRUE(r.pareto_k.has_value());
    hits.push_back(*r.pareto_k);
  }
  const double m = oracle::mean_of(hits);
  EXPECT_NEAR(m, 0.9, 0.1);
  int flagged = 0;
  for (double k : hits) {
    flagged += k > kParetoKThreshold;
  }
  EXPECT_GE(flagged, 15) << "mean k " << m;
}

TEST(Psis, LightTailGivesSmallShape) {
  Rng rng(3);
  const Eigen::VectorXd lw = oracle::normal_vector(4000, 0.0, 0.5, rng);
  const PsisResult r = psis_smooth(lw);
  ASSERT_TRUE(r.pareto_k.has_value());
  EXPECT_LT(*r.pareto_k, 0.5);
}

TEST(Psis, ShortInputUnchanged) {
  Rng rng(4);
  const Eigen::VectorXd lw = oracle::normal_vector(kPsisMinDraws - 1, 0.0, 2.0, rng);
  const PsisResult r = psis_smooth(lw);
  EXPECT_FALSE(r.pareto_k.has_value());
  EXPECT_EQ(r.log_weights, lw);
}

TEST(Psis, ConstantWeightsAreDegenerate) {
  const PsisResult r = psis_smooth(Eigen::VectorXd::Constant(100, -3.0));
  ASSERT_TRUE(r.pareto_k.has_value());
  EXPECT_EQ(*r.pareto_k, kDegenerateParetoK);
}

TEST(Psis, SmoothingPreservesOrderAndBody) {
  Rng rng(8);
  const Eigen::VectorXd lw = oracle::normal_vector(1000, 0.0, 2.0, rng);
  const PsisResult r = psis_smooth(lw);
  const Eigen::Index tail = psis_tail_length(1000);

  std::vector<Eigen::Index> order(1000);
  for (Eigen::Index s = 0; s < 1000; ++s) {
    order[static_cast<std::size_t>(s)] = s;
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lw(a) < lw(b); });

  // Body untouched, tail non-decreasing and capped at the raw maximum.
  for (std::size_t j = 0; j + static_cast<std::size_t>(tail) < order.size(); ++j) {
    EXPECT_NEAR(r.log_weights(order[j]), lw(order[j]), 1e-12 * (1.0 + std::abs(lw(order[j]))));
  }
  for (std::size_t j = 1; j < order.size(); ++j) {
    EXPECT_LE(r.log_weights(order[j - 1]), r.log_weights(order[j]) + 1e-12);
  }
  EXPECT_LE(r.log_weights.maxCoeff(), lw.maxCoeff() + 1e-12);
}

TEST(Psis, ShiftEquivariant) {
  Rng rng(9);
  const Eigen::VectorXd lw = oracle::normal_vector(500, 0.0, 1.5, rng);
  const PsisResult a = psis_smooth(lw);
  const PsisResult b = psis_smooth((lw.array() + 40.0).matrix());
  ASSERT_TRUE(a.pareto_k && b.pareto_k);
  EXPECT_NEAR(*a.pareto_k, *b.pareto_k, 1e-9);
  EXPECT_LT((b.log_weights.array() - 40.0 - a.log_weights.array()).abs().maxCoeff(), 1e-9);
}
