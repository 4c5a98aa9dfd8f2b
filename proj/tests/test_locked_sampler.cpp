#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lockstack/locked_sampler.hpp"
#include "lockstack/models.hpp"
#include "support.hpp"

using namespace lockstack;

namespace {

struct Pool {
  std::vector<Draws> models;
  SimplexWeights w;
  double mean;
  double variance;
};

Pool two_gaussians() {
  Pool p{{fixed_normal("a", -1.0, 1.0), fixed_normal("b", 2.0, 2.0)},
         SimplexWeights(Eigen::Vector2d(0.3, 0.7)), 0.0, 0.0};
  const double precision = 0.3 / 1.0 + 0.7 / 2.0;
  p.variance = 1.0 / precision;
  p.mean = (0.3 * -1.0 + 0.7 * 2.0 / 2.0) / precision;
  return p;
}

GridDensity t_grid(double loc, double scale, double dof, double lo, double hi) {
  return tabulate(lo, hi, 4001, [&](double y) { return oracle::student_t_logpdf(y, loc, scale, dof); });
}

}  // namespace

TEST(LockedSampler, GaussianPoolMoments) {
  const Pool p = two_gaussians();
  const WeightedSample s = sample_locked(p.models, p.w, 20000, Rng(101));
  ASSERT_EQ(s.values.size(), 20000);
  ASSERT_TRUE(s.pareto_k.has_value());
  EXPECT_LT(*s.pareto_k, kParetoKThreshold);
  EXPECT_FALSE(s.flagged);
  EXPECT_NEAR(oracle::log_sum_exp(s.log_weights.array()), 0.0, 1e-12);

  const WeightedMoments m = weighted_moments(s);
  EXPECT_NEAR(m.mean, p.mean, 4.0 * m.mean_se);
  EXPECT_NEAR(m.variance, p.variance, 4.0 * m.variance_se);
  EXPECT_GT(m.mean_se, 0.0);
  EXPECT_LT(m.mean_se, 0.05);
}

TEST(LockedSampler, ReproducibleAndThreadInvariant) {
  const Pool p = two_gaussians();
  const WeightedSample a = sample_locked(p.models, p.w, 5000, Rng(102), true, 1);
  const WeightedSample b = sample_locked(p.models, p.w, 5000, Rng(102), true, 3);
  const WeightedSample c = sample_locked(p.models, p.w, 5000, Rng(103), true, 1);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.log_weights, b.log_weights);
  EXPECT_NE(a.values, c.values);
}

TEST(LockedSampler, ChunksArePrefixStable) {
  // The first chunk does not depend on how many draws follow it.
  const Pool p = two_gaussians();
  const WeightedSample a = sample_locked(p.models, p.w, kSamplerChunk, Rng(104), false);
  const WeightedSample b = sample_locked(p.models, p.w, 3 * kSamplerChunk, Rng(104), false);
  EXPECT_EQ(a.values, b.values.head(kSamplerChunk));
}

TEST(LockedSampler, VertexWeightsRecoverComponent) {
  const Pool p = two_gaussians();
  const WeightedSample s = sample_locked(p.models, SimplexWeights::vertex(2, 1), 20000, Rng(105));
  const WeightedMoments m = weighted_moments(s);
  EXPECT_NEAR(m.mean, 2.0, 4.0 * m.mean_se);
  EXPECT_NEAR(m.variance, 2.0, 4.0 * m.variance_se);
}

TEST(LockedSampler, PosteriorDrawsSample) {
  Rng rng(106);
  const Eigen::VectorXd y = oracle::normal_vector(50, 4.0, std::sqrt(3.0), rng);
  const std::vector<Draws> d{m1_posterior(y, 10.0, 1000, rng.split(1)),
                             m2_posterior(y, 0.1, 1.0, 1000, rng.split(2))};
  const WeightedSample s = sample_locked(d, SimplexWeights::uniform(2), 4000, rng.split(3));
  EXPECT_TRUE(s.values.allFinite());
  EXPECT_TRUE(s.log_weights.allFinite());
  EXPECT_GT(s.ess, 100.0);
  const nlohmann::json j = diagnostics_json(s);
  EXPECT_TRUE(j.contains("pareto_k"));
  EXPECT_TRUE(j.contains("ess"));
  EXPECT_EQ(j["flagged"].get<bool>(), s.flagged);
}

TEST(LockedSampler, KdeIsNormalized) {
  const Pool p = two_gaussians();
  const WeightedSample s = sample_locked(p.models, p.w, 10000, Rng(107));
  const GridDensity g = weighted_kde(s, -8.0, 8.0, 801);
  EXPECT_NEAR(log_trapezoid(g), 0.0, 1e-9);
  EXPECT_NEAR(g.x(grid_mode(g)), p.mean, 0.2);
}

TEST(LockedSampler, ModeBoundNormals) {
  Rng rng(108);
  for (int c = 0; c < 100; ++c) {
    const double m1 = 6.0 * rng.uniform() - 3.0;
    const double m2 = 6.0 * rng.uniform() - 3.0;
    const double v1 = 0.2 + 2.0 * rng.uniform();
    const double v2 = 0.2 + 2.0 * rng.uniform();
    const std::vector<GridDensity> ds{
        tabulate(-15.0, 15.0, 2001, [&](double y) { return oracle::normal_logpdf(y, m1, v1); }),
        tabulate(-15.0, 15.0, 2001, [&](double y) { return oracle::normal_logpdf(y, m2, v2); })};
    const ModeBoundReport r = mode_bound_check(ds, SimplexWeights(oracle::random_simplex(2, rng)));
    EXPECT_EQ(r.status, ModeBoundReport::Status::ok) << c;
    EXPECT_TRUE(r.locked_unimodal);
    EXPECT_GE(r.locked_mode, r.lower);
    EXPECT_LE(r.locked_mode, r.upper);
  }
}

TEST(LockedSampler, ModeBoundCloseStudentT) {
  // Two t components stay unimodal under pooling when their locations are no
  // further apart than min(scale * sqrt(dof)).
  Rng rng(109);
  for (int c = 0; c < 100; ++c) {
    const double s1 = 0.5 + rng.uniform();
    const double s2 = 0.5 + rng.uniform();
    const double n1 = 1.0 + 9.0 * rng.uniform();
    const double n2 = 1.0 + 9.0 * rng.uniform();
    const double sep = rng.uniform() * std::min(s1 * std::sqrt(n1), s2 * std::sqrt(n2));
    const double a = 2.0 * rng.uniform() - 1.0;
    const std::vector<GridDensity> ds{t_grid(a, s1, n1, -40.0, 40.0), t_grid(a + sep, s2, n2, -40.0, 40.0)};
    const ModeBoundReport r = mode_bound_check(ds, SimplexWeights(oracle::random_simplex(2, rng)));
    EXPECT_EQ(r.status, ModeBoundReport::Status::ok) << c << " " << r.reason;
  }
}

TEST(LockedSampler, ModeBoundSkipsMultimodalComponents) {
  const GridDensity bimodal = tabulate(-10.0, 10.0, 1001, [](double y) {
    return std::log(std::exp(oracle::normal_logpdf(y, -3.0, 0.5)) + std::exp(oracle::normal_logpdf(y, 3.0, 0.5)));
  });
  const GridDensity single = tabulate(-10.0, 10.0, 1001, [](double y) { return oracle::normal_logpdf(y, 0.0, 1.0); });
  const std::vector<GridDensity> ds{bimodal, single};
  const ModeBoundReport r = mode_bound_check(ds, SimplexWeights::uniform(2));
  EXPECT_EQ(r.status, ModeBoundReport::Status::skipped);
  EXPECT_FALSE(r.reason.empty());
  EXPECT_EQ(to_json(r)["status"], "skipped");
}

TEST(LockedSampler, DistantStudentTCanBreakUnimodality) {
  // Far-apart heavy tails give a bimodal pool, which the check reports.
  const std::vector<GridDensity> ds{t_grid(-10.0, 0.5, 1.0, -40.0, 40.0), t_grid(10.0, 0.5, 1.0, -40.0, 40.0)};
  const ModeBoundReport r = mode_bound_check(ds, SimplexWeights::uniform(2));
  EXPECT_EQ(r.status, ModeBoundReport::Status::violated);
  EXPECT_FALSE(r.locked_unimodal);
}
