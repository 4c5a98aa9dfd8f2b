#include "lockstack/models.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <toml.hpp>

#include "lockstack/io.hpp"

namespace lockstack {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_data(const Eigen::VectorXd& data, const char* who) {
  if (data.size() == 0) {
    throw std::invalid_argument(std::string(who) + ": data must be non-empty");
  }
}

// Normal log density and its y-derivatives for every (mean, variance) pair.
template <typename DM, typename DV>
void normal_log_derivatives(const Eigen::ArrayBase<DM>& mean, const Eigen::ArrayBase<DV>& variance,
                            double y, Eigen::Ref<Eigen::VectorXd> loglik,
                            Eigen::Ref<Eigen::VectorXd> dloglik,
                            Eigen::Ref<Eigen::VectorXd> d2loglik) {
  const Eigen::ArrayXd resid = y - mean;
  loglik = (-0.5 * (kLog2Pi + variance.log()) - 0.5 * resid.square() / variance).matrix();
  dloglik = (-resid / variance).matrix();
  d2loglik = (-variance.inverse()).matrix();
}

}  // namespace

void UnitVarianceNormal::evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index,
                                  Eigen::Ref<Eigen::VectorXd> loglik,
                                  Eigen::Ref<Eigen::VectorXd> dloglik,
                                  Eigen::Ref<Eigen::VectorXd> d2loglik) const {
  const auto theta = params.col(0).array();
  const Eigen::ArrayXd resid = y - theta;
  loglik = (-0.5 * kLog2Pi - 0.5 * resid.square()).matrix();
  dloglik = (-resid).matrix();
  d2loglik.setConstant(-1.0);
}

double UnitVarianceNormal::sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index,
                                  Rng& rng) const {
  return std::normal_distribution<double>(theta(0), 1.0)(rng);
}

void ZeroMeanNormal::evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index,
                              Eigen::Ref<Eigen::VectorXd> loglik,
                              Eigen::Ref<Eigen::VectorXd> dloglik,
                              Eigen::Ref<Eigen::VectorXd> d2loglik) const {
  normal_log_derivatives(Eigen::ArrayXd::Zero(params.rows()), params.col(0).array(), y, loglik,
                         dloglik, d2loglik);
}

double ZeroMeanNormal::sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index,
                              Rng& rng) const {
  return std::normal_distribution<double>(0.0, std::sqrt(theta(0)))(rng);
}

void LocationScaleNormal::evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index,
                                   Eigen::Ref<Eigen::VectorXd> loglik,
                                   Eigen::Ref<Eigen::VectorXd> dloglik,
                                   Eigen::Ref<Eigen::VectorXd> d2loglik) const {
  normal_log_derivatives(params.col(0).array(), params.col(1).array(), y, loglik, dloglik,
                         d2loglik);
}

double LocationScaleNormal::sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::Index,
                                   Rng& rng) const {
  return std::normal_distribution<double>(theta(0), std::sqrt(theta(1)))(rng);
}

void LinearRegression::evaluate(const Eigen::MatrixXd& params, double y, Eigen::Index point,
                                Eigen::Ref<Eigen::VectorXd> loglik,
                                Eigen::Ref<Eigen::VectorXd> dloglik,
                                Eigen::Ref<Eigen::VectorXd> d2loglik) const {
  if (point < 0 || point >= design_.rows()) {
    throw std::out_of_range("LinearRegression: point outside the design");
  }
  const Eigen::Index p = design_.cols();
  const Eigen::VectorXd mean = params.leftCols(p) * design_.row(point).transpose();
  normal_log_derivatives(mean.array(), params.col(p).array(), y, loglik, dloglik, d2loglik);
}

double LinearRegression::sample(const Eigen::Ref<const Eigen::RowVectorXd>& theta,
                                Eigen::Index point, Rng& rng) const {
  const Eigen::Index p = design_.cols();
  const double mean = theta.head(p).dot(design_.row(point));
  return std::normal_distribution<double>(mean, std::sqrt(theta(p)))(rng);
}

NormalPosterior m1_posterior_params(const Eigen::VectorXd& data, double v0) {
  check_data(data, "m1_posterior");
  if (!(v0 > 0.0)) {
    throw std::invalid_argument("m1_posterior: v0 must be positive");
  }
  const double variance = 1.0 / (1.0 / v0 + static_cast<double>(data.size()));
  return {variance * data.sum(), variance};
}

ScaledInvChi2 m2_posterior_params(const Eigen::VectorXd& data, double nu0, double tau0) {
  check_data(data, "m2_posterior");
  if (!(nu0 > 0.0) || !(tau0 > 0.0)) {
    throw std::invalid_argument("m2_posterior: nu0 and tau0 must be positive");
  }
  const double dof = nu0 + static_cast<double>(data.size());
  return {dof, (nu0 * tau0 + data.squaredNorm()) / dof};
}

Draws m1_posterior(const Eigen::VectorXd& data, double v0, Eigen::Index draws, Rng rng) {
  const NormalPosterior post = m1_posterior_params(data, v0);
  if (draws < 1) {
    throw std::invalid_argument("m1_posterior: need at least one draw");
  }
  std::normal_distribution<double> normal(post.mean, std::sqrt(post.variance));
  Eigen::MatrixXd params(draws, 1);
  for (Eigen::Index s = 0; s < draws; ++s) {
    params(s, 0) = normal(rng);
  }
  return {"M1", std::move(params), std::make_shared<UnitVarianceNormal>()};
}

Draws m2_posterior(const Eigen::VectorXd& data, double nu0, double tau0, Eigen::Index draws,
                   Rng rng) {
  const ScaledInvChi2 post = m2_posterior_params(data, nu0, tau0);
  if (draws < 1) {
    throw std::invalid_argument("m2_posterior: need at least one draw");
  }
  std::chi_squared_distribution<double> chi2(post.dof);
  Eigen::MatrixXd params(draws, 1);
  for (Eigen::Index s = 0; s < draws; ++s) {
    params(s, 0) = post.dof * post.scale / chi2(rng);
  }
  return {"M2", std::move(params), std::make_shared<ZeroMeanNormal>()};
}

Draws fixed_normal(std::string model_id, double mean, double variance, Eigen::Index draws) {
  Eigen::MatrixXd params(draws, 2);
  params.col(0).setConstant(mean);
  params.col(1).setConstant(variance);
  return {std::move(model_id), std::move(params), std::make_shared<LocationScaleNormal>()};
}

double log_marginal_m1(const Eigen::VectorXd& data, double v0) {
  check_data(data, "log_marginal_m1");
  const auto n = static_cast<double>(data.size());
  // det(I + v0 11') = 1 + n v0;  (I + v0 11')^-1 = I - v0 / (1 + n v0) 11'.
  const double sum = data.sum();
  const double quad = data.squaredNorm() - v0 * sum * sum / (1.0 + n * v0);
  return -0.5 * n * kLog2Pi - 0.5 * std::log1p(n * v0) - 0.5 * quad;
}

double log_marginal_m2(const Eigen::VectorXd& data, double nu0, double tau0) {
  check_data(data, "log_marginal_m2");
  if (!(nu0 > 0.0) || !(tau0 > 0.0)) {
    throw std::invalid_argument("log_marginal_m2: nu0 and tau0 must be positive");
  }
  const auto n = static_cast<double>(data.size());
  const double nu_n = nu0 + n;
  return -0.5 * n * kLog2Pi + 0.5 * nu0 * std::log(0.5 * nu0 * tau0) - std::lgamma(0.5 * nu0) +
         std::lgamma(0.5 * nu_n) - 0.5 * nu_n * std::log(0.5 * (nu0 * tau0 + data.squaredNorm()));
}

RegressionPrior RegressionPrior::wide(Eigen::Index p, double sd) {
  RegressionPrior prior;
  prior.coef_sd = Eigen::VectorXd::Constant(p, sd);
  return prior;
}

Draws regression_gibbs(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const RegressionPrior& prior, Eigen::Index draws, Eigen::Index warmup,
                       Rng rng) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (n == 0 || p == 0 || y.size() != n) {
    throw std::invalid_argument("regression_gibbs: need n > 0, p >= 1 and one response per row");
  }
  if (prior.coef_sd.size() != p || (prior.coef_sd.array() <= 0.0).any()) {
    throw std::invalid_argument("regression_gibbs: one positive prior scale per coefficient");
  }
  if (draws < 1 || warmup < 0) {
    throw std::invalid_argument("regression_gibbs: need draws >= 1 and warmup >= 0");
  }

  const Eigen::MatrixXd xtx = design.transpose() * design;
  const Eigen::VectorXd xty = design.transpose() * y;
  const Eigen::VectorXd prior_precision = prior.coef_sd.array().square().inverse();
  const double shape = prior.variance_shape + 0.5 * static_cast<double>(n);

  std::normal_distribution<double> std_normal;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double sigma2 = std::max(1e-8, (y.array() - y.mean()).square().mean());
  Eigen::VectorXd z(p);
  Eigen::MatrixXd params(draws, p + 1);

  for (Eigen::Index it = 0; it < warmup + draws; ++it) {
    Eigen::MatrixXd precision = xtx / sigma2;
    precision.diagonal() += prior_precision;
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    const Eigen::VectorXd mean = llt.solve(xty / sigma2);
    for (Eigen::Index j = 0; j < p; ++j) {
      z(j) = std_normal(rng);
    }
    beta = mean + llt.matrixU().solve(z);

    const double rss = (y - design * beta).squaredNorm();
    const double rate = prior.variance_scale + 0.5 * rss;
    sigma2 = rate / std::gamma_distribution<double>(shape, 1.0)(rng);

    if (it >= warmup) {
      params.row(it - warmup).head(p) = beta.transpose();
      params(it - warmup, p) = sigma2;
    }
  }
  return {"regression", std::move(params), std::make_shared<LinearRegression>(design)};
}

void ScenarioConfig::validate() const {
  if (!(v_star > 0.0) || !std::isfinite(mu_star)) {
    throw std::invalid_argument("scenario: need finite mu_star and v_star > 0");
  }
  if (n_train < 1 || n_test < 1 || replications < 1) {
    throw std::invalid_argument("scenario: n_train, n_test and replications must be >= 1");
  }
}

ScenarioConfig scenario_preset(int scenario) {
  ScenarioConfig cfg;
  switch (scenario) {
    case 1: cfg.mu_star = 1.0; cfg.v_star = 1.0; break;
    case 2: cfg.mu_star = 0.0; cfg.v_star = 5.0; break;
    case 3: cfg.mu_star = 4.0; cfg.v_star = 3.0; break;
    case 4: cfg.mu_star = 0.0; cfg.v_star = 1.0; break;
    default: throw std::invalid_argument("scenario must be 1, 2, 3 or 4");
  }
  return cfg;
}

ScenarioData simulate_scenario(const ScenarioConfig& config, Rng rng) {
  config.validate();
  std::normal_distribution<double> normal(config.mu_star, std::sqrt(config.v_star));
  ScenarioData out{Eigen::VectorXd(config.n_train), Eigen::VectorXd(config.n_test)};
  for (Eigen::Index i = 0; i < config.n_train; ++i) {
    out.train(i) = normal(rng);
  }
  for (Eigen::Index i = 0; i < config.n_test; ++i) {
    out.test(i) = normal(rng);
  }
  return out;
}

ScenarioConfig parse_scenario_toml(std::string_view text, ScenarioConfig base) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw std::invalid_argument(std::string("scenario config: ") + std::string(e.description()));
  }
  for (const auto& [key, node] : table) {
    if (node.is_table()) {
      continue;
    }
    const std::string_view k = key.str();
    auto number = [&]() -> double {
      if (auto v = node.value<double>()) {
        return *v;
      }
      throw std::invalid_argument("scenario config: '" + std::string(k) + "' must be a number");
    };
    auto integer = [&]() -> std::int64_t {
      if (auto v = node.value_exact<std::int64_t>()) {
        return *v;
      }
      throw std::invalid_argument("scenario config: '" + std::string(k) + "' must be an integer");
    };
    if (k == "mu_star") {
      base.mu_star = number();
    } else if (k == "v_star") {
      base.v_star = number();
    } else if (k == "n_train") {
      base.n_train = integer();
    } else if (k == "n_test") {
      base.n_test = integer();
    } else if (k == "replications") {
      base.replications = integer();
    } else if (k == "seed") {
      base.seed = static_cast<std::uint64_t>(integer());
    } else {
      throw std::invalid_argument("scenario config: unknown key '" + std::string(k) + "'");
    }
  }
  base.validate();
  return base;
}

ScenarioConfig load_scenario_toml(const std::filesystem::path& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot read " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_toml(buf.str(), base);
}

void write_dataset_csv(std::ostream& out, const Eigen::VectorXd& y, std::string_view comment) {
  if (!comment.empty()) {
    out << comment;
  }
  out << "point_id,y\n";
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out << i << ',' << format_double(y(i)) << '\n';
  }
}

}  // namespace lockstack
