#include "lockstack/psis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace lockstack {

namespace {

// Profile log-likelihood (per observation) of the reparametrized GPD at -theta.
double profile_loglik(double theta, std::span<const double> x) {
  double k = 0.0;
  for (double xi : x) {
    k += std::log1p(-theta * xi);
  }
  k /= static_cast<double>(x.size());
  return std::log(-theta / k) - k - 1.0;
}

}  // namespace

GpdFit fit_generalized_pareto(std::span<const double> x, bool weakly_informative_prior,
                              int min_grid_points) {
  const auto n = static_cast<Eigen::Index>(x.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (n == 0 || x.back() <= 0.0) {
    return {kInf, std::numeric_limits<double>::quiet_NaN()};
  }
  constexpr double prior = 3.0;
  const auto grid = min_grid_points + static_cast<Eigen::Index>(std::floor(std::sqrt(n)));

  // First quartile; ties at zero would blow up the grid, so fall back to the
  // smallest positive exceedance.
  double xstar = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
  if (xstar <= 0.0) {
    xstar = *std::find_if(x.begin(), x.end(), [](double v) { return v > 0.0; });
  }

  Eigen::VectorXd theta(grid);
  Eigen::VectorXd loglik(grid);
  for (Eigen::Index j = 0; j < grid; ++j) {
    theta(j) = 1.0 / x.back() +
               (1.0 - std::sqrt(static_cast<double>(grid) / (static_cast<double>(j + 1) - 0.5))) /
                   prior / xstar;
    loglik(j) = static_cast<double>(n) * profile_loglik(theta(j), x);
  }
  // Posterior-mean theta under a flat prior on the grid.
  const double top = loglik.maxCoeff();
  const Eigen::ArrayXd w = (loglik.array() - top).exp();
  const double theta_hat = (theta.array() * w).sum() / w.sum();

  double k = 0.0;
  for (double xi : x) {
    k += std::log1p(-theta_hat * xi);
  }
  k /= static_cast<double>(n);
  const double sigma = -k / theta_hat;

  if (weakly_informative_prior) {
    constexpr double a = 10.0;
    const double n_plus_a = static_cast<double>(n) + a;
    k = k * static_cast<double>(n) / n_plus_a + a * 0.5 / n_plus_a;
  }
  if (std::isnan(k)) {
    k = kInf;
  }
  return {k, sigma};
}

double gpd_quantile(double p, double k, double sigma) {
  if (std::isnan(sigma) || sigma <= 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (k == 0.0) {
    return -sigma * std::log1p(-p);
  }
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

Eigen::Index psis_tail_length(Eigen::Index draws) {
  const double s = static_cast<double>(draws);
  return static_cast<Eigen::Index>(std::ceil(std::min(0.2 * s, 3.0 * std::sqrt(s))));
}

PsisResult psis_smooth(const Eigen::Ref<const Eigen::VectorXd>& log_weights) {
  const Eigen::Index s = log_weights.size();
  PsisResult out{log_weights, std::nullopt};
  if (s < kPsisMinDraws) {
    return out;
  }

  const double raw_max = log_weights.maxCoeff();
  Eigen::VectorXd lw = log_weights.array() - raw_max;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&lw](Eigen::Index a, Eigen::Index b) { return lw(a) < lw(b); });

  const Eigen::Index tail = psis_tail_length(s);
  const auto first_tail = static_cast<std::size_t>(s - tail);
  const double tail_min = lw(order[first_tail]);
  const double tail_max = lw(order.back());
  if (std::abs(tail_max - tail_min) < std::numeric_limits<double>::epsilon() / 100.0) {
    out.pareto_k = kDegenerateParetoK;
    return out;
  }

  const double cutoff = lw(order[first_tail - 1]);
  const double exp_cutoff = std::exp(cutoff);
  std::vector<double> exceedances(static_cast<std::size_t>(tail));
  for (Eigen::Index j = 0; j < tail; ++j) {
    exceedances[static_cast<std::size_t>(j)] =
        std::exp(lw(order[first_tail + static_cast<std::size_t>(j)])) - exp_cutoff;
  }
  const GpdFit fit = fit_generalized_pareto(exceedances);
  out.pareto_k = fit.k;

  if (std::isfinite(fit.k)) {
    for (Eigen::Index j = 0; j < tail; ++j) {
      const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail);
      const double q = gpd_quantile(p, fit.k, fit.sigma) + exp_cutoff;
      lw(order[first_tail + static_cast<std::size_t>(j)]) = std::log(q);
    }
  }
  // Truncate at the largest raw weight (0 after the shift), then undo the shift.
  lw = lw.cwiseMin(0.0);
  out.log_weights = lw.array() + raw_max;
  return out;
}

}  // namespace lockstack
