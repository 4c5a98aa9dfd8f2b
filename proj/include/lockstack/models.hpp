#pragma once

// Exactly-sampled conjugate models and the data-generating processes of the
// non-nested comparison and the regression overfitting study.
//
//   M1: y ~ normal(theta, 1),   theta ~ normal(0, v0)
//   M2: y ~ normal(0, theta),   theta ~ scaled-inv-chi2(nu0, tau0)

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>

#include "lockstack/draws.hpp"
#include "lockstack/rng.hpp"

namespace lockstack {

/// y ~ normal(theta, 1); one parameter.
class UnitVarianceNormal final : public PredictiveModel {
 public:
  [[nodiscard]] Eigen::Index parameters() const override { return 1; }
  void evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index point,
                Eigen::Ref<Eigen::VectorXd> loglik, Eigen::Ref<Eigen::VectorXd> dloglik,
                Eigen::Ref<Eigen::VectorXd> d2loglik) const override;
  double sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index point,
                Rng& rng) const override;
};

/// y ~ normal(0, theta); one parameter (the variance).
class ZeroMeanNormal final : public PredictiveModel {
 public:
  [[nodiscard]] Eigen::Index parameters() const override { return 1; }
  void evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index point,
                Eigen::Ref<Eigen::VectorXd> loglik, Eigen::Ref<Eigen::VectorXd> dloglik,
                Eigen::Ref<Eigen::VectorXd> d2loglik) const override;
  double sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index point,
                Rng& rng) const override;
};

/// y ~ normal(mean, variance); parameters (mean, variance).
class LocationScaleNormal final : public PredictiveModel {
 public:
  [[nodiscard]] Eigen::Index parameters() const override { return 2; }
  void evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index point,
                Eigen::Ref<Eigen::VectorXd> loglik, Eigen::Ref<Eigen::VectorXd> dloglik,
                Eigen::Ref<Eigen::VectorXd> d2loglik) const override;
  double sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index point,
                Rng& rng) const override;
};

/// y_i ~ normal(x_i' beta, sigma2) for the rows x_i of a fixed design;
/// parameters (beta_1..beta_p, sigma2).
class LinearRegression final : public PredictiveModel {
 public:
  explicit LinearRegression(Eigen::MatrixXd design) : design_{std::move(design)} {}

  [[nodiscard]] Eigen::Index parameters() const override { return design_.cols() + 1; }
  void evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index point,
                Eigen::Ref<Eigen::VectorXd> loglik, Eigen::Ref<Eigen::VectorXd> dloglik,
                Eigen::Ref<Eigen::VectorXd> d2loglik) const override;
  double sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index point,
                Rng& rng) const override;

  [[nodiscard]] const Eigen::MatrixXd& design() const { return design_; }

 private:
  Eigen::MatrixXd design_;
};

struct NormalPosterior {
  double mean;
  double variance;
};

/// Scaled-inverse-chi-squared(dof, scale): density proportional to
/// x^-(dof/2 + 1) exp(-dof * scale / (2x)).
struct ScaledInvChi2 {
  double dof;
  double scale;
};

inline constexpr double kDefaultV0 = 10.0;
inline constexpr double kDefaultNu0 = 0.1;
inline constexpr double kDefaultTau0 = 1.0;

/// Conjugate posterior of M1: variance (1/v0 + n)^-1, mean variance * sum(y).
NormalPosterior m1_posterior_params(const Eigen::VectorXd& data, double v0);

/// Conjugate posterior of M2: scaled-inv-chi2(nu0 + n, (nu0 tau0 + sum y^2) / (nu0 + n)).
ScaledInvChi2 m2_posterior_params(const Eigen::VectorXd& data, double nu0, double tau0);

Draws m1_posterior(const Eigen::VectorXd& data, double v0, Eigen::Index draws, Rng rng);
Draws m2_posterior(const Eigen::VectorXd& data, double nu0, double tau0, Eigen::Index draws,
                   Rng rng);

/// Draws of a point-mass posterior at (mean, variance); used for known-density
/// components in tests and demos.
Draws fixed_normal(std::string model_id, double mean, double variance, Eigen::Index draws = 1);

/// log p(y_1..n | M1): y ~ normal(0, I + v0 * 11') via the rank-one identities.
double log_marginal_m1(const Eigen::VectorXd& data, double v0);

/// log p(y_1..n | M2) in closed form from the scaled-inverse-chi-squared conjugacy.
double log_marginal_m2(const Eigen::VectorXd& data, double nu0, double tau0);

struct RegressionPrior {
  Eigen::VectorXd coef_sd;  // independent normal(0, sd^2) per coefficient
  double variance_shape = 1.0;  // sigma2 ~ inverse-gamma(shape, scale)
  double variance_scale = 1.0;

  static RegressionPrior wide(Eigen::Index p, double sd = 10.0);
};

/// Gibbs sampler alternating beta | sigma2, y (multivariate normal) and
/// sigma2 | beta, y (inverse gamma). Keeps `draws` iterations after `warmup`.
Draws regression_gibbs(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const RegressionPrior& prior, Eigen::Index draws, Eigen::Index warmup,
                       Rng rng);

struct ScenarioConfig {
  double mu_star = 1.0;
  double v_star = 1.0;
  Eigen::Index n_train = 200;
  Eigen::Index n_test = 50;
  Eigen::Index replications = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

/// The four true data-generating processes: (1, 1), (0, 5), (4, 3), (0, 1).
ScenarioConfig scenario_preset(int scenario);

struct ScenarioData {
  Eigen::VectorXd train;
  Eigen::VectorXd test;
};

/// i.i.d. normal(mu_star, v_star): n_train training points, then n_test test points.
ScenarioData simulate_scenario(const ScenarioConfig& config, Rng rng);
inline ScenarioData simulate_scenario(const ScenarioConfig& config) {
  return simulate_scenario(config, Rng(config.seed));
}

/// Parses keys mu_star, v_star, n_train, n_test, replications, seed; absent keys
/// keep the values of `base`, unknown keys are rejected.
ScenarioConfig parse_scenario_toml(std::string_view text, ScenarioConfig base = {});
ScenarioConfig load_scenario_toml(const std::filesystem::path& path, ScenarioConfig base = {});

/// `point_id,y` rows.
void write_dataset_csv(std::ostream& out, const Eigen::VectorXd& y, std::string_view comment = {});

}  // namespace lockstack
