#include "lockstack/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lockstack/parallel.hpp"
#include "lockstack/svg.hpp"

namespace lockstack {

namespace {

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t j = 0; j < v.size(); ++j) {
    out += (j ? ";" : "") + format_double(v[j]);
  }
  return out;
}

template <typename T>
std::string join_int(const std::vector<T>& v) {
  std::string out;
  for (std::size_t j = 0; j < v.size(); ++j) {
    out += (j ? ";" : "") + std::to_string(v[j]);
  }
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

RunManifest make_manifest(std::string command, std::map<std::string, std::string> config,
                          const CommonOptions& common) {
  config["loo"] = common.loo ? "true" : "false";
  RunManifest m;
  m.command = std::move(command);
  m.config = std::move(config);
  m.root_seed = common.seed;
  m.version = std::string(kVersion);
  m.started = utc_timestamp();
  return m;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) {
    return 0.0;
  }
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<Draws> scenario_models(const Eigen::VectorXd& train, Eigen::Index draws, const Rng& stream,
                                   std::string_view which = "both") {
  std::vector<Draws> models;
  if (which == "both" || which == "m1") {
    models.push_back(m1_posterior(train, kDefaultV0, draws, stream.split(1)));
  }
  if (which == "both" || which == "m2") {
    models.push_back(m2_posterior(train, kDefaultNu0, kDefaultTau0, draws, stream.split(2)));
  }
  if (models.empty()) {
    throw std::invalid_argument("models must be one of m1, m2, both");
  }
  return models;
}

nlohmann::json weights_json(const SimplexWeights& w) { return to_std(w.vector()); }

}  // namespace

void write_run(const std::filesystem::path& dir, RunOutput& run) {
  for (const auto& [name, content] : run.files) {
    write_text_file(dir / name, content);
  }
  run.manifest.finished = utc_timestamp();
  nlohmann::json j = run.manifest.to_json();
  j["failures"] = run.failures;
  j["warnings"] = run.warnings;
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

ReplicationResult run_replication(int scenario, const ScenarioConfig& config, Eigen::Index r,
                                  const NonnestedOptions& options, const CommonOptions& common) {
  ReplicationResult out;
  out.scenario = scenario;
  out.replication = r;
  const Rng stream =
      Rng(common.seed).split(static_cast<std::uint64_t>(scenario)).split(static_cast<std::uint64_t>(r));
  const ScenarioData data = simulate_scenario(config, stream.split(0));
  const std::vector<Draws> models = scenario_models(data.train, options.draws, stream);
  const int threads = common.threads;

  const EvalTensor tensor = build_eval_tensor(models, data.train, threads);
  if (options.emit_eval_table && r == 0) {
    std::ostringstream table;
    write_eval_table_csv(table, tensor);
    out.eval_table = table.str();
  }
  const ObjectiveCoefficients c = objective_coefficients(tensor, {.loo = common.loo}, threads);
  const ObjectiveCoefficients c_loo =
      common.loo ? c : objective_coefficients(tensor, {.loo = true}, threads);
  out.high_pareto_k = c_loo.high_pareto_k();

  Eigen::VectorXd log_ml(2);
  log_ml << log_marginal_m1(data.train, kDefaultV0),
      log_marginal_m2(data.train, kDefaultNu0, kDefaultTau0);

  const TestEvaluator evaluator(models, data.train, data.test, threads, options.grid_size);
  out.reports.push_back(evaluator.evaluate(Method::ml_select, select_max(log_ml)));
  out.reports.push_back(evaluator.evaluate(Method::bma, bma_weights(log_ml)));
  const Eigen::VectorXd elpd = c_loo.log_density.colwise().sum().transpose();
  out.reports.push_back(evaluator.evaluate(Method::loo_select, select_max(elpd)));
  out.reports.push_back(evaluator.evaluate(Method::stacking, stacking_weights(c_loo.log_density)));
  out.reports.push_back(evaluator.evaluate(Method::hyva_select, select_min(total_hyvarinen(c))));

  LockingOptions lock_opts;
  lock_opts.alpha = options.alpha;
  out.locking_fit = fit_locking(c, lock_opts);
  out.reports.push_back(evaluator.evaluate(Method::locking, out.locking_fit->simplex()));

  if (options.quacking) {
    QuackingOptions q;
    q.alpha = options.alpha;
    q.restarts = options.restarts;
    q.seed = stream.split(4).key();
    q.locking_start = out.locking_fit->simplex();
    out.quacking_fit = fit_quacking(c, q);
    out.reports.push_back(evaluator.evaluate(out.quacking_fit->quack()));
  }
  return out;
}

std::string results_csv(std::span<const ReplicationResult> reps, std::string_view comment) {
  std::ostringstream out;
  out << comment;
  Eigen::Index k = 0;
  for (const auto& rep : reps) {
    if (!rep.reports.empty()) {
      k = rep.reports.front().weights.size();
      break;
    }
  }
  out << "scenario,replication,method";
  for (Eigen::Index j = 1; j <= k; ++j) {
    out << ",w" << j;
  }
  out << ",test_log_score,test_hyva_score\n";
  for (const auto& rep : reps) {
    for (const MethodReport& m : rep.reports) {
      out << rep.scenario << ',' << rep.replication << ',' << method_name(m.method);
      for (Eigen::Index j = 0; j < m.weights.size(); ++j) {
        out << ',' << format_double(m.weights[j]);
      }
      out << ',' << format_double(m.test_log_score) << ',' << format_double(m.test_hyva_score)
          << '\n';
    }
  }
  return out.str();
}

NonnestedRun run_nonnested(const NonnestedOptions& options, const CommonOptions& common) {
  std::map<std::string, std::string> config{
      {"draws", std::to_string(options.draws)},
      {"alpha", format_double(options.alpha)},
      {"restarts", std::to_string(options.restarts)},
      {"quacking", options.quacking ? "true" : "false"},
      {"grid_size", std::to_string(options.grid_size)}};
  std::vector<std::pair<int, Eigen::Index>> jobs;
  std::vector<int> ids;
  for (const auto& [id, cfg] : options.scenarios) {
    cfg.validate();
    const std::string prefix = "scenario" + std::to_string(id) + ".";
    config[prefix + "mu_star"] = format_double(cfg.mu_star);
    config[prefix + "v_star"] = format_double(cfg.v_star);
    config[prefix + "n_train"] = std::to_string(cfg.n_train);
    config[prefix + "n_test"] = std::to_string(cfg.n_test);
    config[prefix + "replications"] = std::to_string(cfg.replications);
    ids.push_back(id);
    for (Eigen::Index r = 0; r < cfg.replications; ++r) {
      jobs.emplace_back(static_cast<int>(ids.size() - 1), r);
    }
  }
  NonnestedRun run;
  run.output.manifest = make_manifest("nonnested", std::move(config), common);
  if (common.dry_run) {
    return run;
  }
  const std::string hash = run.output.manifest.hash();
  const std::string comment = csv_manifest_comment(run.output.manifest);

  std::vector<ReplicationResult> results(jobs.size());
  // Replications run in parallel, each single-threaded inside.
  const bool outer = jobs.size() >= static_cast<std::size_t>(std::max(common.threads, 1));
  CommonOptions inner = common;
  inner.threads = outer ? 1 : common.threads;
  parallel_for(jobs.size(), outer ? common.threads : 1, [&](std::size_t j) {
    const auto& [slot, r] = jobs[j];
    const auto& [id, cfg] = options.scenarios[static_cast<std::size_t>(slot)];
    try {
      results[j] = run_replication(id, cfg, r, options, inner);
    } catch (const std::exception& e) {
      results[j].scenario = id;
      results[j].replication = r;
      results[j].error = e.what();
    }
  });

  for (auto& rep : results) {
    if (!rep.error.empty()) {
      ++run.output.failures;
      run.output.warnings.push_back("scenario " + std::to_string(rep.scenario) + " replication " +
                                    std::to_string(rep.replication) + " failed: " + rep.error);
    } else if (rep.high_pareto_k > 0) {
      run.output.warnings.push_back("scenario " + std::to_string(rep.scenario) + " replication " +
                                    std::to_string(rep.replication) + ": " +
                                    std::to_string(rep.high_pareto_k) +
                                    " leave-one-out cells with Pareto k > 0.7");
    }
    if (!rep.eval_table.empty()) {
      run.output.files["eval_table_scenario" + std::to_string(rep.scenario) + ".csv"] =
          comment + rep.eval_table;
      rep.eval_table.clear();
    }
  }
  std::vector<ReplicationResult> ok;
  for (auto& rep : results) {
    if (rep.error.empty()) {
      ok.push_back(rep);
    }
  }
  run.output.files["results.csv"] = results_csv(ok, comment);

  // Summary per (scenario, method).
  std::ostringstream summary;
  summary << comment
          << "scenario,method,replications,mean_w1,sd_w1,mean_test_log_score,sd_test_log_score,"
             "mean_test_hyva_score\n";
  std::vector<svg::Panel> weight_panels;
  std::vector<svg::Panel> score_panels;
  for (int id : ids) {
    svg::BoxPanel wp{"scenario " + std::to_string(id) + ": weight on M1", "w1", {}, {}};
    svg::BoxPanel sp{"scenario " + std::to_string(id) + ": test log score", "log score", {}, {}};
    for (Method m : kAllMethods) {
      std::vector<double> w1;
      std::vector<double> ls;
      std::vector<double> hs;
      for (const auto& rep : ok) {
        if (rep.scenario != id) {
          continue;
        }
        for (const MethodReport& mr : rep.reports) {
          if (mr.method == m) {
            w1.push_back(mr.weights[0]);
            ls.push_back(mr.test_log_score);
            hs.push_back(mr.test_hyva_score);
          }
        }
      }
      if (w1.empty()) {
        continue;
      }
      summary << id << ',' << method_name(m) << ',' << w1.size() << ',' << format_double(mean_of(w1))
              << ',' << format_double(sd_of(w1)) << ',' << format_double(mean_of(ls)) << ','
              << format_double(sd_of(ls)) << ',' << format_double(mean_of(hs)) << '\n';
      wp.labels.emplace_back(method_name(m));
      wp.groups.push_back(w1);
      sp.labels.emplace_back(method_name(m));
      sp.groups.push_back(ls);
    }
    weight_panels.emplace_back(std::move(wp));
    score_panels.emplace_back(std::move(sp));
  }
  run.output.files["weights_summary.csv"] = summary.str();

  std::ostringstream quack;
  quack << comment << "scenario,replication,beta1,beta2,w0,w1,w2,objective,converged\n";
  for (const auto& rep : ok) {
    if (!rep.quacking_fit) {
      continue;
    }
    const QuackParams& q = rep.quacking_fit->quack();
    quack << rep.scenario << ',' << rep.replication;
    for (Eigen::Index j = 0; j < q.beta.size(); ++j) {
      quack << ',' << format_double(q.beta[j]);
    }
    for (Eigen::Index j = 0; j < q.w.size(); ++j) {
      quack << ',' << format_double(q.w(j));
    }
    quack << ',' << format_double(rep.quacking_fit->objective) << ','
          << (rep.quacking_fit->converged ? 1 : 0) << '\n';
  }
  if (options.quacking) {
    run.output.files["quacking.csv"] = quack.str();
  }
  run.output.files["weights.svg"] = svg::render(weight_panels, hash);
  run.output.files["log_scores.svg"] = svg::render(score_panels, hash);
  run.replications = std::move(results);
  return run;
}

// ---------------------------------------------------------------------------

OverfitRow overfit_iteration(Eigen::Index p, int iter, const OverfitOptions& options,
                             const CommonOptions& common) {
  if (p < 1 || options.n < 1) {
    throw std::invalid_argument("overfit: p and n must be positive");
  }
  const Rng stream = Rng(common.seed).split(static_cast<std::uint64_t>(p)).split(
      static_cast<std::uint64_t>(iter));
  Rng data_rng = stream.split(0);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(options.n, p);
  for (Eigen::Index i = 0; i < options.n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      x(i, j) = normal(data_rng);
    }
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta.head(std::min(p, options.active)).setConstant(options.signal);
  Eigen::VectorXd y = x * beta;
  for (Eigen::Index i = 0; i < options.n; ++i) {
    y(i) += options.noise_sd * normal(data_rng);
  }
  const Draws fit = regression_gibbs(x, y, RegressionPrior::wide(p, options.coef_sd), options.draws,
                                     options.warmup, stream.split(1));
  const EvalTensor tensor = build_eval_tensor(std::span<const Draws>(&fit, 1), y, common.threads);
  const ObjectiveCoefficients in = objective_coefficients(tensor, {.loo = false}, common.threads);
  const ObjectiveCoefficients loo = objective_coefficients(tensor, {.loo = true}, common.threads);

  OverfitRow row;
  row.p = p;
  row.iter = iter;
  const auto n = static_cast<double>(options.n);
  row.insample_lpd = in.log_density.sum() / n;
  row.loo_lpd = loo.log_density.sum() / n;
  row.insample_hyva = total_hyvarinen(in)(0) / n;
  row.loo_hyva = total_hyvarinen(loo)(0) / n;
  row.high_pareto_k = loo.high_pareto_k();
  return row;
}

OverfitRun run_overfit(const OverfitOptions& options, const CommonOptions& common) {
  if (options.p_list.empty() || options.iterations < 1) {
    throw std::invalid_argument("overfit: need at least one p and one iteration");
  }
  for (Eigen::Index p : options.p_list) {
    if (p < 1 || p > options.n) {
      throw std::invalid_argument("overfit: every p must lie in [1, n]");
    }
  }
  std::map<std::string, std::string> config{
      {"p_list", join_int(options.p_list)},
      {"iterations", std::to_string(options.iterations)},
      {"n", std::to_string(options.n)},
      {"draws", std::to_string(options.draws)},
      {"warmup", std::to_string(options.warmup)},
      {"active", std::to_string(options.active)},
      {"signal", format_double(options.signal)},
      {"noise_sd", format_double(options.noise_sd)},
      {"coef_sd", format_double(options.coef_sd)}};
  OverfitRun run;
  run.output.manifest = make_manifest("overfit", std::move(config), common);
  if (common.dry_run) {
    return run;
  }
  const std::string comment = csv_manifest_comment(run.output.manifest);

  std::vector<std::pair<Eigen::Index, int>> jobs;
  for (Eigen::Index p : options.p_list) {
    for (int it = 0; it < options.iterations; ++it) {
      jobs.emplace_back(p, it);
    }
  }
  std::vector<OverfitRow> rows(jobs.size());
  std::vector<std::string> errors(jobs.size());
  CommonOptions inner = common;
  inner.threads = 1;
  parallel_for(jobs.size(), common.threads, [&](std::size_t j) {
    try {
      rows[j] = overfit_iteration(jobs[j].first, jobs[j].second, options, inner);
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });

  std::ostringstream csv;
  csv << comment << "p,iter,insample_lpd,loo_lpd,insample_hyva,loo_hyva\n";
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!errors[j].empty()) {
      ++run.output.failures;
      run.output.warnings.push_back("p " + std::to_string(jobs[j].first) + " iteration " +
                                    std::to_string(jobs[j].second) + " failed: " + errors[j]);
      continue;
    }
    const OverfitRow& r = rows[j];
    csv << r.p << ',' << r.iter << ',' << format_double(r.insample_lpd) << ','
        << format_double(r.loo_lpd) << ',' << format_double(r.insample_hyva) << ','
        << format_double(r.loo_hyva) << '\n';
    if (r.insample_lpd < r.loo_lpd) {
      ++run.output.failures;
      run.output.warnings.push_back("in-sample log score below leave-one-out at p " +
                                    std::to_string(r.p));
    }
    if (r.high_pareto_k > 0) {
      run.output.warnings.push_back("p " + std::to_string(r.p) + " iteration " +
                                    std::to_string(r.iter) + ": " + std::to_string(r.high_pareto_k) +
                                    " points with Pareto k > 0.7");
    }
    run.rows.push_back(r);
  }
  run.output.files["overfit.csv"] = csv.str();

  svg::LinePanel lpd{"log score", "p", "mean per point", {}};
  svg::LinePanel hyva{"Hyvarinen score", "p", "mean per point", {}};
  svg::Series series[4] = {{"in-sample", {}, {}, false},
                           {"leave-one-out", {}, {}, true},
                           {"in-sample", {}, {}, false},
                           {"leave-one-out", {}, {}, true}};
  for (Eigen::Index p : options.p_list) {
    std::vector<double> cols[4];
    for (const OverfitRow& r : run.rows) {
      if (r.p == p) {
        cols[0].push_back(r.insample_lpd);
        cols[1].push_back(r.loo_lpd);
        cols[2].push_back(r.insample_hyva);
        cols[3].push_back(r.loo_hyva);
      }
    }
    for (int s = 0; s < 4; ++s) {
      series[s].x.push_back(static_cast<double>(p));
      series[s].y.push_back(mean_of(cols[s]));
    }
  }
  lpd.series = {series[0], series[1]};
  hyva.series = {series[2], series[3]};
  const std::vector<svg::Panel> panels{lpd, hyva};
  run.output.files["overfit.svg"] = svg::render(panels, run.output.manifest.hash());
  return run;
}

// ---------------------------------------------------------------------------

double ComponentSpec::log_density(double y) const {
  const double z = (y - location) / scale;
  if (kind == Kind::normal) {
    return -0.5 * z * z - std::log(scale) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi) - std::log(scale) -
         0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

std::string ComponentSpec::to_string() const {
  if (kind == Kind::normal) {
    return "normal:" + format_double(location) + ":" + format_double(scale);
  }
  return "t:" + format_double(location) + ":" + format_double(scale) + ":" + format_double(dof);
}

ComponentSpec ComponentSpec::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) {
      break;
    }
    start = colon + 1;
  }
  ComponentSpec c;
  if (parts[0] == "normal" && parts.size() == 3) {
    c.kind = Kind::normal;
  } else if (parts[0] == "t" && parts.size() == 4) {
    c.kind = Kind::student_t;
    c.dof = parse_double(parts[3]);
  } else {
    throw std::invalid_argument("component '" + std::string(text) +
                                "': expected normal:<mean>:<sd> or t:<location>:<scale>:<dof>");
  }
  c.location = parse_double(parts[1]);
  c.scale = parse_double(parts[2]);
  if (!(c.scale > 0.0) || (c.kind == Kind::student_t && !(c.dof > 0.0))) {
    throw std::invalid_argument("component '" + std::string(text) + "': scale and dof must be positive");
  }
  return c;
}

DemoRun run_demo_operators(const DemoOptions& options, const CommonOptions& common) {
  const auto k = static_cast<Eigen::Index>(options.components.size());
  if (k < 1) {
    throw std::invalid_argument("demo-operators: need at least one component");
  }
  const SimplexWeights w =
      options.weights.empty()
          ? SimplexWeights::uniform(k)
          : SimplexWeights::normalized(Eigen::Map<const Eigen::VectorXd>(
                options.weights.data(), static_cast<Eigen::Index>(options.weights.size())));
  if (w.size() != k) {
    throw std::invalid_argument("demo-operators: one weight per component required");
  }
  std::map<std::string, std::string> config{{"weights", join(to_std(w.vector()))},
                                            {"phase_differences", join(options.phase_differences)},
                                            {"grid_size", std::to_string(options.grid_size)}};
  for (Eigen::Index j = 0; j < k; ++j) {
    config["component" + std::to_string(j + 1)] = options.components[static_cast<std::size_t>(j)].to_string();
  }
  DemoRun run;
  run.output.manifest = make_manifest("demo-operators", std::move(config), common);
  if (common.dry_run) {
    return run;
  }
  const std::string comment = csv_manifest_comment(run.output.manifest);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const ComponentSpec& c : options.components) {
    const double reach = (c.kind == ComponentSpec::Kind::normal ? 8.0 : 20.0) * c.scale;
    lo = std::min(lo, c.location - reach);
    hi = std::max(hi, c.location + reach);
  }
  for (const ComponentSpec& c : options.components) {
    run.components.push_back(
        normalize(tabulate(lo, hi, options.grid_size, [&](double y) { return c.log_density(y); })));
  }
  run.mixture = mixture_grid(run.components, w);
  run.locking = locking_grid(run.components, w);
  for (double delta : options.phase_differences) {
    const Eigen::VectorXd phases = Eigen::VectorXd::LinSpaced(k, 0.0, delta * static_cast<double>(k - 1));
    run.superpositions.push_back(superposition_grid(run.components, w, k == 1 ? Eigen::VectorXd::Zero(1) : phases));
  }
  run.mode_bound = mode_bound_check(run.components, w);
  if (run.mode_bound.status == ModeBoundReport::Status::violated) {
    ++run.output.failures;
    run.output.warnings.push_back("mode bound violated: " + run.mode_bound.reason);
  }

  auto grid_csv = [&](const GridDensity& g) {
    std::ostringstream s;
    write_grid_csv(s, g, comment);
    return s.str();
  };
  svg::LinePanel panel{"combination operators", "y", "density", {}};
  auto series = [&](std::string label, const GridDensity& g, bool dashed) {
    svg::Series s{std::move(label), to_std(g.points()), to_std(g.logvals.array().exp()), dashed};
    panel.series.push_back(std::move(s));
  };
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& g = run.components[static_cast<std::size_t>(j)];
    run.output.files["component_" + std::to_string(j + 1) + ".csv"] = grid_csv(g);
    series("component " + std::to_string(j + 1), g, true);
  }
  run.output.files["mixture.csv"] = grid_csv(run.mixture);
  run.output.files["locking.csv"] = grid_csv(run.locking);
  series("mixture", run.mixture, false);
  series("locking", run.locking, false);
  for (std::size_t j = 0; j < run.superpositions.size(); ++j) {
    run.output.files["superposition_" + std::to_string(j + 1) + ".csv"] = grid_csv(run.superpositions[j]);
    series("superposition, phase " + format_double(options.phase_differences[j]), run.superpositions[j], false);
  }
  nlohmann::json mb = to_json(run.mode_bound);
  mb["manifest"] = run.output.manifest.hash();
  run.output.files["mode_bound.json"] = mb.dump(2) + "\n";
  const std::vector<svg::Panel> panels{panel};
  run.output.files["operators.svg"] = svg::render(panels, run.output.manifest.hash());
  return run;
}

// ---------------------------------------------------------------------------

SampleLockedRun run_sample_locked(const SampleLockedOptions& options, const CommonOptions& common) {
  options.config.validate();
  if (options.n_samples < 1 || options.draws < 1) {
    throw std::invalid_argument("sample-locked: draws and n_samples must be positive");
  }
  std::map<std::string, std::string> config{
      {"scenario", std::to_string(options.scenario)},
      {"mu_star", format_double(options.config.mu_star)},
      {"v_star", format_double(options.config.v_star)},
      {"n_train", std::to_string(options.config.n_train)},
      {"draws", std::to_string(options.draws)},
      {"n_samples", std::to_string(options.n_samples)},
      {"models", options.models},
      {"weights", options.weights ? join(*options.weights) : "fitted"},
      {"alpha", format_double(options.alpha)},
      {"smooth", options.smooth ? "true" : "false"},
      {"grid_size", std::to_string(options.grid_size)}};
  SampleLockedRun run;
  if (options.models != "m1" && options.models != "m2" && options.models != "both") {
    throw std::invalid_argument("sample-locked: models must be one of m1, m2, both");
  }
  run.output.manifest = make_manifest("sample-locked", std::move(config), common);
  if (common.dry_run) {
    return run;
  }
  const std::string hash = run.output.manifest.hash();
  const std::string comment = csv_manifest_comment(run.output.manifest);

  const Rng stream = Rng(common.seed).split(static_cast<std::uint64_t>(options.scenario));
  ScenarioConfig cfg = options.config;
  cfg.n_test = 1;
  const ScenarioData data = simulate_scenario(cfg, stream.split(0));
  const std::vector<Draws> models = scenario_models(data.train, options.draws, stream, options.models);
  const auto k = static_cast<Eigen::Index>(models.size());

  std::optional<FitResult> fit;
  if (options.weights) {
    if (static_cast<Eigen::Index>(options.weights->size()) != k) {
      throw std::invalid_argument("sample-locked: one weight per model required");
    }
    run.weights = SimplexWeights::normalized(
        Eigen::Map<const Eigen::VectorXd>(options.weights->data(), k));
  } else {
    const EvalTensor tensor = build_eval_tensor(models, data.train, common.threads);
    const ObjectiveCoefficients c = objective_coefficients(tensor, {.loo = common.loo}, common.threads);
    LockingOptions lock;
    lock.alpha = options.alpha;
    fit = fit_locking(c, lock);
    run.weights = fit->simplex();
  }
  run.sample = sample_locked(models, *run.weights, options.n_samples, stream.split(3), options.smooth,
                             common.threads);
  run.moments = weighted_moments(run.sample);
  if (run.sample.flagged) {
    run.output.warnings.push_back("importance weights have Pareto k above 0.7; estimates are unreliable");
  }

  std::ostringstream samples;
  samples << comment << "value,log_weight\n";
  for (Eigen::Index j = 0; j < run.sample.values.size(); ++j) {
    samples << format_double(run.sample.values(j)) << ',' << format_double(run.sample.log_weights(j))
            << '\n';
  }
  run.output.files["samples.csv"] = samples.str();
  std::ostringstream train;
  write_dataset_csv(train, data.train, comment);
  run.output.files["train.csv"] = train.str();

  nlohmann::json diag = diagnostics_json(run.sample);
  diag["manifest"] = hash;
  run.output.files["diagnostics.json"] = diag.dump(2) + "\n";
  nlohmann::json summary{{"manifest", hash},
                         {"weights", weights_json(*run.weights)},
                         {"mean", run.moments.mean},
                         {"variance", run.moments.variance},
                         {"mean_se", run.moments.mean_se},
                         {"variance_se", run.moments.variance_se}};
  if (fit) {
    summary["fit"] = to_json(*fit);
  }
  run.output.files["summary.json"] = summary.dump(2) + "\n";

  // Figure: weighted KDE of the sample against the grid-normalized locked
  // density, the model predictives and the data-generating density.
  const double sd = std::sqrt(std::max(run.moments.variance, 1e-12));
  const double lo = std::min(run.moments.mean - 5.0 * sd, data.train.minCoeff());
  const double hi = std::max(run.moments.mean + 5.0 * sd, data.train.maxCoeff());
  const Eigen::Index m = std::max<Eigen::Index>(options.grid_size, 3);
  std::vector<GridDensity> comps;
  for (const Draws& d : models) {
    comps.push_back(normalize(tabulate(lo, hi, m, [&](double y) { return d.log_predictive(y); })));
  }
  const GridDensity locked = locking_grid(comps, *run.weights);
  const GridDensity kde = weighted_kde(run.sample, lo, hi, m);
  const double mu = options.config.mu_star;
  const double v = options.config.v_star;
  const GridDensity truth = tabulate(lo, hi, m, [&](double y) {
    return -0.5 * (y - mu) * (y - mu) / v - 0.5 * std::log(2.0 * std::numbers::pi * v);
  });
  svg::LinePanel panel{"locked predictive", "y", "density", {}};
  auto add = [&](std::string label, const GridDensity& g, bool dashed) {
    panel.series.push_back({std::move(label), to_std(g.points()), to_std(g.logvals.array().exp()), dashed});
  };
  add("importance-sampled (KDE)", kde, false);
  add("locked (grid)", locked, true);
  for (std::size_t j = 0; j < comps.size(); ++j) {
    add(models[j].model_id, comps[j], true);
  }
  add("data-generating", truth, true);
  const std::vector<svg::Panel> panels{panel};
  run.output.files["locked.svg"] = svg::render(panels, hash);
  return run;
}

// ---------------------------------------------------------------------------

RunOutput run_score(const EvalTensor& tensor, const ScoreCommandOptions& options,
                    const CommonOptions& common, std::map<std::string, std::string> config) {
  tensor.validate();
  config["alpha"] = format_double(options.alpha);
  config["quacking"] = options.quacking ? "true" : "false";
  config["restarts"] = std::to_string(options.restarts);
  RunOutput out;
  out.manifest = make_manifest("score", std::move(config), common);
  if (common.dry_run) {
    return out;
  }
  const std::string comment = csv_manifest_comment(out.manifest);

  const ObjectiveCoefficients c = objective_coefficients(tensor, {.loo = common.loo}, common.threads);
  const ObjectiveCoefficients c_loo =
      common.loo ? c : objective_coefficients(tensor, {.loo = true}, common.threads);
  const Eigen::VectorXd elpd = c_loo.log_density.colwise().sum().transpose();
  const Eigen::VectorXd hyva = total_hyvarinen(c);

  std::ostringstream scores;
  scores << comment << "model_id,loo_elpd,high_pareto_k,total_hyva\n";
  nlohmann::json ids = nlohmann::json::array();
  for (Eigen::Index k = 0; k < tensor.models(); ++k) {
    const Eigen::Index high = (c_loo.pareto_k.col(k).array() > kParetoKThreshold).count();
    scores << tensor.model_id(k) << ',' << format_double(elpd(k)) << ',' << high << ','
           << format_double(hyva(k)) << '\n';
    ids.push_back(tensor.model_id(k));
    if (high > 0) {
      out.warnings.push_back("model " + tensor.model_id(k) + ": " + std::to_string(high) +
                             " points with Pareto k > 0.7");
    }
  }
  out.files["scores.csv"] = scores.str();

  LockingOptions lock;
  lock.alpha = options.alpha;
  const FitResult locking = fit_locking(c, lock);
  nlohmann::json j{{"manifest", out.manifest.hash()},
                   {"models", ids},
                   {"locking", to_json(locking)},
                   {"stacking", weights_json(stacking_weights(c_loo.log_density))},
                   {"loo_select", hyva_select(-elpd)},
                   {"hyva_select", hyva_select(hyva)}};
  if (options.quacking) {
    QuackingOptions q;
    q.alpha = options.alpha;
    q.restarts = options.restarts;
    q.seed = Rng(common.seed).split(4).key();
    q.locking_start = locking.simplex();
    j["quacking"] = to_json(fit_quacking(c, q));
  }
  out.files["weights.json"] = j.dump(2) + "\n";
  return out;
}

}  // namespace lockstack
