#include "lockstack/locked_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "lockstack/parallel.hpp"
#include "lockstack/predictive_scores.hpp"
#include "lockstack/psis.hpp"

namespace lockstack {

WeightedSample sample_locked(std::span<const Draws> models, const SimplexWeights& w,
                             Eigen::Index n_samples, const Rng& rng, bool smooth, int threads) {
  if (n_samples < 1) {
    throw std::invalid_argument("sample_locked: need at least one sample");
  }
  if (models.empty() || static_cast<Eigen::Index>(models.size()) != w.size()) {
    throw std::invalid_argument("sample_locked: one weight per model required");
  }
  const auto k_count = static_cast<Eigen::Index>(models.size());
  Eigen::VectorXd values(n_samples);
  Eigen::VectorXd raw(n_samples);
  const auto chunks = static_cast<std::size_t>((n_samples + kSamplerChunk - 1) / kSamplerChunk);

  parallel_for(chunks, threads, [&](std::size_t c) {
    Rng stream = rng.split(c);
    std::uniform_int_distribution<Eigen::Index> pick_model(0, k_count - 1);
    Eigen::VectorXd log_pi(k_count);
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kSamplerChunk;
    const Eigen::Index end = std::min(n_samples, begin + kSamplerChunk);
    for (Eigen::Index j = begin; j < end; ++j) {
      const Draws& d = models[static_cast<std::size_t>(pick_model(stream))];
      std::uniform_int_distribution<Eigen::Index> pick_draw(0, d.size() - 1);
      const double y = d.model->sample(d.params.row(pick_draw(stream)), 0, stream);
      for (Eigen::Index k = 0; k < k_count; ++k) {
        log_pi(k) = models[static_cast<std::size_t>(k)].log_predictive(y);
      }
      double target = 0.0;
      for (Eigen::Index k = 0; k < k_count; ++k) {
        if (w[k] > 0.0) {
          target += w[k] * log_pi(k);
        }
      }
      values(j) = y;
      raw(j) = target - (detail::log_sum_exp(log_pi) - std::log(static_cast<double>(k_count)));
    }
  });

  WeightedSample out;
  out.values = std::move(values);
  if (smooth) {
    PsisResult smoothed = psis_smooth(raw);
    out.log_weights = std::move(smoothed.log_weights);
    out.pareto_k = smoothed.pareto_k;
  } else {
    out.log_weights = std::move(raw);
  }
  out.log_weights.array() -= detail::log_sum_exp(out.log_weights);
  out.ess = effective_sample_size(out.log_weights);
  out.flagged = out.pareto_k && *out.pareto_k > kParetoKThreshold;
  return out;
}

WeightedMoments weighted_moments(const WeightedSample& sample) {
  const Eigen::ArrayXd w = sample.weights();
  const Eigen::ArrayXd y = sample.values.array();
  const double mean = (w * y).sum();
  const Eigen::ArrayXd centered = (y - mean).square();
  const double variance = (w * centered).sum();
  const Eigen::ArrayXd w2 = w.square();
  return {mean, variance, std::sqrt((w2 * centered).sum()),
          std::sqrt((w2 * (centered - variance).square()).sum())};
}

nlohmann::json diagnostics_json(const WeightedSample& sample) {
  nlohmann::json j;
  if (sample.pareto_k) {
    j["pareto_k"] = *sample.pareto_k;
  } else {
    j["pareto_k"] = nullptr;
  }
  j["ess"] = sample.ess;
  j["flagged"] = sample.flagged;
  return j;
}

GridDensity weighted_kde(const WeightedSample& sample, double lo, double hi, Eigen::Index m,
                         double bandwidth) {
  const Eigen::ArrayXd w = sample.weights();
  const Eigen::ArrayXd y = sample.values.array();
  if (!(bandwidth > 0.0)) {
    // Silverman's rule with the effective sample size.
    const WeightedMoments mom = weighted_moments(sample);
    bandwidth = 1.06 * std::sqrt(mom.variance) * std::pow(std::max(sample.ess, 1.0), -0.2);
    if (!(bandwidth > 0.0)) {
      bandwidth = (hi - lo) / static_cast<double>(m);
    }
  }
  const double log_norm = -std::log(bandwidth) - 0.5 * std::log(2.0 * std::numbers::pi);
  return normalize(tabulate(lo, hi, m, [&](double x) {
    const Eigen::ArrayXd terms =
        sample.log_weights.array() - 0.5 * ((x - y) / bandwidth).square() + log_norm;
    return detail::log_sum_exp(terms.matrix());
  }));
}

ModeBoundReport mode_bound_check(std::span<const GridDensity> components, const SimplexWeights& w) {
  ModeBoundReport report;
  if (components.empty()) {
    report.reason = "no components";
    return report;
  }
  const double cell = components.front().step();
  double lowest = std::numeric_limits<double>::infinity();
  double highest = -lowest;
  for (std::size_t k = 0; k < components.size(); ++k) {
    if (!is_unimodal(components[k])) {
      report.reason = "component " + std::to_string(k) + " is not unimodal";
      return report;
    }
    const double mode = components[k].x(grid_mode(components[k]));
    lowest = std::min(lowest, mode);
    highest = std::max(highest, mode);
  }
  const GridDensity locked = locking_grid(components, w);
  report.locked_mode = locked.x(grid_mode(locked));
  report.lower = lowest - cell;
  report.upper = highest + cell;
  report.locked_unimodal = is_unimodal(locked);
  const bool inside = report.locked_mode >= report.lower && report.locked_mode <= report.upper;
  report.status = inside && report.locked_unimodal ? ModeBoundReport::Status::ok
                                                   : ModeBoundReport::Status::violated;
  if (!inside) {
    report.reason = "locked mode outside the component mode range";
  } else if (!report.locked_unimodal) {
    report.reason = "locked density is not unimodal";
  }
  return report;
}

nlohmann::json to_json(const ModeBoundReport& report) {
  static constexpr const char* kNames[] = {"ok", "violated", "skipped"};
  return {{"status", kNames[static_cast<int>(report.status)]},
          {"reason", report.reason},
          {"locked_mode", report.locked_mode},
          {"lower", report.lower},
          {"upper", report.upper},
          {"locked_unimodal", report.locked_unimodal}};
}

}  // namespace lockstack
