#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string_view>

#include "lockstack/pooling.hpp"

namespace lockstack {

/// Log-density tabulated on m equally spaced points spanning [lo, hi].
struct GridDensity {
  double lo = 0.0;
  double hi = 1.0;
  Eigen::VectorXd logvals;
  bool normalized = false;

  [[nodiscard]] Eigen::Index size() const { return logvals.size(); }
  [[nodiscard]] double step() const { return (hi - lo) / static_cast<double>(size() - 1); }
  [[nodiscard]] double x(Eigen::Index j) const { return lo + static_cast<double>(j) * step(); }
  [[nodiscard]] Eigen::VectorXd points() const {
    return Eigen::VectorXd::LinSpaced(size(), lo, hi);
  }
  [[nodiscard]] bool same_grid(const GridDensity& other) const {
    return lo == other.lo && hi == other.hi && size() == other.size();
  }
};

inline constexpr Eigen::Index kDefaultGridSize = 4001;

/// Tabulates `log_density(x)` on the grid.
template <typename Fn>
GridDensity tabulate(double lo, double hi, Eigen::Index m, Fn&& log_density) {
  GridDensity g{lo, hi, Eigen::VectorXd(m), false};
  for (Eigen::Index j = 0; j < m; ++j) {
    g.logvals(j) = log_density(g.x(j));
  }
  return g;
}

/// log of the trapezoid-rule integral of exp(logvals).
double log_trapezoid(const GridDensity& g);

/// Shifts logvals so the trapezoid integral is one.
GridDensity normalize(GridDensity g);

/// log sum_k w_k pi_k, normalized.
GridDensity mixture_grid(std::span<const GridDensity> ds, const SimplexWeights& w);

/// sum_k w_k log pi_k, normalized.
GridDensity locking_grid(std::span<const GridDensity> ds, const SimplexWeights& w);

/// |sum_k sqrt(w_k pi_k) exp(i alpha_k)|^2, normalized. Cross terms are formed
/// from (log pi_k + log pi_j) / 2 before exponentiating.
GridDensity superposition_grid(std::span<const GridDensity> ds, const SimplexWeights& w,
                               const Eigen::VectorXd& phases);

struct HybridGrid {
  GridDensity density;
  /// Mass does not decay towards the grid edges, so the pool is probably not
  /// integrable (negative mixture powers can do this).
  bool suspect_non_integrable = false;
};

/// (sum_k beta_k pi_k)^w0 prod_k pi_k^wk, normalized.
HybridGrid hybrid_grid(std::span<const GridDensity> ds, const QuackParams& p);

/// Index of the largest value (first on ties).
Eigen::Index grid_mode(const GridDensity& g);

/// True when the discrete slope changes sign at most once, from rising to falling.
/// Flat steps are ignored.
bool is_unimodal(const GridDensity& g);

/// `y,log_density` rows.
void write_grid_csv(std::ostream& out, const GridDensity& g, std::string_view comment = {});

}  // namespace lockstack
