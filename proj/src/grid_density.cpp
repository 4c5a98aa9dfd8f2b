#include "lockstack/grid_density.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "lockstack/io.hpp"

namespace lockstack {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_components(std::span<const GridDensity> ds, Eigen::Index weights) {
  if (ds.empty() || static_cast<Eigen::Index>(ds.size()) != weights) {
    throw std::invalid_argument("grid combination: one weight per component required");
  }
  for (const GridDensity& d : ds) {
    if (!d.same_grid(ds.front())) {
      throw std::invalid_argument("grid combination: components live on different grids");
    }
    if (d.size() < 2 || !(d.hi > d.lo)) {
      throw std::invalid_argument("grid combination: degenerate grid");
    }
  }
}

GridDensity like(const GridDensity& g) {
  return {g.lo, g.hi, Eigen::VectorXd::Constant(g.size(), kNegInf), false};
}

}  // namespace

double log_trapezoid(const GridDensity& g) {
  const double top = g.logvals.maxCoeff();
  if (!std::isfinite(top)) {
    return top;
  }
  Eigen::ArrayXd v = (g.logvals.array() - top).exp();
  v(0) *= 0.5;
  v(v.size() - 1) *= 0.5;
  return top + std::log(v.sum() * g.step());
}

GridDensity normalize(GridDensity g) {
  const double log_z = log_trapezoid(g);
  if (!std::isfinite(log_z)) {
    throw std::domain_error("grid density has no finite mass to normalize");
  }
  g.logvals.array() -= log_z;
  g.normalized = true;
  return g;
}

GridDensity mixture_grid(std::span<const GridDensity> ds, const SimplexWeights& w) {
  check_components(ds, w.size());
  GridDensity out = like(ds.front());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    double top = kNegInf;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      if (w[static_cast<Eigen::Index>(k)] > 0.0) {
        top = std::max(top, std::log(w[static_cast<Eigen::Index>(k)]) + ds[k].logvals(j));
      }
    }
    if (!std::isfinite(top)) {
      continue;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      if (w[static_cast<Eigen::Index>(k)] > 0.0) {
        sum += std::exp(std::log(w[static_cast<Eigen::Index>(k)]) + ds[k].logvals(j) - top);
      }
    }
    out.logvals(j) = top + std::log(sum);
  }
  return normalize(std::move(out));
}

GridDensity locking_grid(std::span<const GridDensity> ds, const SimplexWeights& w) {
  check_components(ds, w.size());
  GridDensity out = like(ds.front());
  out.logvals.setZero();
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const double wk = w[static_cast<Eigen::Index>(k)];
    if (wk > 0.0) {
      out.logvals += wk * ds[k].logvals;
    }
  }
  return normalize(std::move(out));
}

GridDensity superposition_grid(std::span<const GridDensity> ds, const SimplexWeights& w,
                               const Eigen::VectorXd& phases) {
  check_components(ds, w.size());
  if (phases.size() != w.size()) {
    throw std::invalid_argument("superposition_grid: one phase per component required");
  }
  GridDensity out = like(ds.front());
  const auto k_count = static_cast<Eigen::Index>(ds.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    double top = kNegInf;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (w[k] > 0.0) {
        top = std::max(top, std::log(w[k]) + ds[static_cast<std::size_t>(k)].logvals(j));
      }
    }
    if (!std::isfinite(top)) {
      continue;
    }
    double value = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (w[k] <= 0.0) {
        continue;
      }
      const double lk = std::log(w[k]) + ds[static_cast<std::size_t>(k)].logvals(j);
      value += std::exp(lk - top);
      for (Eigen::Index m = k + 1; m < k_count; ++m) {
        if (w[m] <= 0.0) {
          continue;
        }
        const double lm = std::log(w[m]) + ds[static_cast<std::size_t>(m)].logvals(j);
        value += 2.0 * std::exp(0.5 * (lk + lm) - top) * std::cos(phases(k) - phases(m));
      }
    }
    // |.|^2 is non-negative; anything below is cancellation noise.
    out.logvals(j) = value > 0.0 ? top + std::log(value) : kNegInf;
  }
  return normalize(std::move(out));
}

HybridGrid hybrid_grid(std::span<const GridDensity> ds, const QuackParams& p) {
  p.validate();
  check_components(ds, p.beta.size());
  GridDensity out = like(ds.front());
  out.logvals.setZero();
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    double top = kNegInf;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const double bk = p.beta[static_cast<Eigen::Index>(k)];
      if (bk > 0.0) {
        top = std::max(top, std::log(bk) + ds[k].logvals(j));
      }
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const double bk = p.beta[static_cast<Eigen::Index>(k)];
      if (bk > 0.0) {
        sum += std::exp(std::log(bk) + ds[k].logvals(j) - top);
      }
    }
    double value = p.w(0) == 0.0 ? 0.0 : p.w(0) * (top + std::log(sum));
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const double wk = p.w(static_cast<Eigen::Index>(k) + 1);
      if (wk != 0.0) {
        value += wk * ds[k].logvals(j);
      }
    }
    out.logvals(j) = value;
  }
  HybridGrid result;
  const double top = out.logvals.maxCoeff();
  const double edge = std::max(out.logvals(0), out.logvals(out.size() - 1));
  result.suspect_non_integrable = !(edge - top < std::log(1e-6));
  result.density = normalize(std::move(out));
  return result;
}

Eigen::Index grid_mode(const GridDensity& g) {
  Eigen::Index at = 0;
  g.logvals.maxCoeff(&at);
  return at;
}

bool is_unimodal(const GridDensity& g) {
  bool falling = false;
  for (Eigen::Index j = 1; j < g.size(); ++j) {
    const double diff = g.logvals(j) - g.logvals(j - 1);
    if (std::isnan(diff) || diff == 0.0) {
      continue;
    }
    if (diff < 0.0) {
      falling = true;
    } else if (falling) {
      return false;
    }
  }
  return true;
}

void write_grid_csv(std::ostream& out, const GridDensity& g, std::string_view comment) {
  if (!comment.empty()) {
    out << comment;
  }
  out << "y,log_density\n";
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    out << format_double(g.x(j)) << ',' << format_double(g.logvals(j)) << '\n';
  }
}

}  // namespace lockstack
