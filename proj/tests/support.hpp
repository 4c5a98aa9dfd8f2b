#pragma once

// Test-side oracles. Nothing here calls into the library's estimators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "lockstack/rng.hpp"

namespace lockstack::oracle {

inline double normal_logpdf(double y, double mean, double variance) {
  const double z = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - 0.5 * z * z / variance;
}

inline double student_t_logpdf(double y, double loc, double scale, double dof) {
  const double z = (y - loc) / scale;
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi) - std::log(scale) -
         0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

inline double normal_cdf(double y, double mean, double variance) {
  return 0.5 * std::erfc(-(y - mean) / std::sqrt(2.0 * variance));
}

inline double log_sum_exp(const Eigen::ArrayXd& v) {
  const double top = v.maxCoeff();
  return top + std::log((v - top).exp().sum());
}

/// Central difference of f at x.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double second_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

/// Composite Simpson rule of exp(log_f) on [a, b] with an even number of panels,
/// returned on the log scale.
inline double log_simpson(const std::function<double(double)>& log_f, double a, double b, int panels) {
  panels += panels % 2;
  const double h = (b - a) / panels;
  Eigen::ArrayXd terms(panels + 1);
  for (int j = 0; j <= panels; ++j) {
    const double weight = (j == 0 || j == panels) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    terms(j) = log_f(a + j * h) + std::log(weight);
  }
  return log_sum_exp(terms) + std::log(h / 3.0);
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// 1% critical value of the KS statistic for large n.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

inline Eigen::VectorXd normal_vector(Eigen::Index n, double mean, double sd, Rng& rng) {
  std::normal_distribution<double> dist(mean, sd);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = dist(rng);
  }
  return v;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Random point in the interior of the simplex.
inline Eigen::VectorXd random_simplex(Eigen::Index k, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd w(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    w(j) = e(rng) + 1e-3;
  }
  return w / w.sum();
}

}  // namespace lockstack::oracle
