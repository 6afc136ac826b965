#include "gradphi/io.hpp"
#include "gradphi/numeric.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <future>
#include <iostream>

using namespace gradphi;

namespace {

struct RunContext {
  Config cfg;
  std::string out_dir;
  int threads = 1;
  double cap_minutes = 0;  // 0: no cap
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  Manifest manifest;

  void check_budget() const {
    if (cap_minutes <= 0) return;
    const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    if (elapsed > cap_minutes * 60)
      throw std::runtime_error("--cap-minutes budget exceeded");
  }

  std::string path(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
  }

  void note_output(const std::string& file) {
    manifest.outputs.emplace_back(file, file_content_hash(file));
  }
};

int finish(RunContext& ctx, const std::vector<CheckReport>& reports) {
  ctx.manifest.finished_at = iso_timestamp();
  write_manifest(ctx.manifest, ctx.path("manifest.json"));
  int failed = 0, inconclusive = 0;
  for (const auto& r : reports) {
    if (r.inconclusive) {
      ++inconclusive;
      std::cout << "[inconclusive] " << r.id << " " << r.notes << "\n";
    } else if (r.pass) {
      std::cout << "[pass] " << r.id << " margin=" << r.margin << "\n";
    } else {
      ++failed;
      std::cout << "[FAIL] " << r.id << " " << r.notes << "\n";
    }
  }
  if (inconclusive)
    std::cout << inconclusive << " inconclusive check(s) (warning)\n";
  return failed ? 1 : 0;
}

double quadratic_beta(const Config& cfg) {
  if (cfg.potential.kind() != PotentialKind::quadratic)
    throw std::runtime_error(
        "this experiment needs a quadratic potential (exact oracle)");
  return cfg.potential.beta();
}

// ---- experiment drivers ----

int run_gff_exact(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  const double beta = quadratic_beta(cfg);
  std::vector<std::pair<int, Eigen::VectorXd>> keys;
  std::vector<double> values;
  for (int n = std::max(cfg.n_lo, 1); n <= cfg.n_hi; ++n) {
    GaussianExact g(make_cube(cfg.d, n), beta,
                    cfg.tilt_is_q ? GaussianExact::Bc::neumann
                                  : GaussianExact::Bc::dirichlet);
    keys.push_back({n, cfg.tilt});
    values.push_back(cfg.tilt_is_q ? g.nustar(cfg.tilt) : g.nu(cfg.tilt));
    ctx.check_budget();
  }
  const std::string file = ctx.path("gff_exact.csv");
  write_exact_csv(cfg.tilt_is_q ? "nustar" : "nu", cfg.d, beta, keys, values,
                  file);
  ctx.note_output(file);
  std::cout << "wrote " << file << " (" << values.size() << " rows)\n";
  return finish(ctx, {});
}

int run_sample(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  auto cube = make_cube(cfg.d, cfg.n_hi);
  Trace trace;
  ChainStats stats;
  if (cfg.tilt_is_q) {
    NeumannEnsemble ens(cube, cfg.tilt, cfg.potential);
    std::tie(trace, stats) =
        mala_chain(ens, cfg.chain, standard_observables(ens));
  } else {
    DirichletEnsemble ens(cube, cfg.tilt, cfg.potential);
    std::tie(trace, stats) =
        mala_chain(ens, cfg.chain, standard_observables(ens));
  }
  const std::string file = ctx.path("trace.csv");
  write_trace_csv(trace, 0, file);
  ctx.note_output(file);
  std::cout << "acceptance " << stats.acceptance << "\n";
  for (size_t o = 0; o < trace.names.size(); ++o)
    std::cout << trace.names[o] << ": mean=" << stats.mean[o]
              << " stderr=" << stats.stderrs[o] << " iact=" << stats.iact[o]
              << " ess=" << stats.ess[o] << "\n";
  CheckReport rep;
  rep.id = "chain_health";
  rep.pass = stats.ok;
  rep.notes = stats.flag;
  rep.provenance = "mc";
  const std::string rfile = ctx.path("sample.report.json");
  write_check_reports_json({rep}, rfile);
  ctx.note_output(rfile);
  return finish(ctx, {rep});
}

int run_estimates(RunContext& ctx, bool dual) {
  const Config& cfg = ctx.cfg;
  std::vector<SurfaceTensionEstimate> rows;
  for (int n = std::max(cfg.n_lo, 1); n <= cfg.n_hi; ++n) {
    rows.push_back(dual ? nustar_estimate(cfg.d, n, cfg.tilt, cfg.potential,
                                          cfg.chain)
                        : nu_estimate(cfg.d, n, cfg.tilt, cfg.potential,
                                      cfg.chain));
    ctx.check_budget();
  }
  const std::string file =
      ctx.path(std::string(dual ? "nustar" : "nu") + "_estimates.csv");
  write_tension_csv(rows, file);
  ctx.note_output(file);
  for (const auto& r : rows)
    std::cout << r.quantity << " n=" << r.n << " value=" << r.value
              << " stderr=" << r.stderr_total << " (" << r.method << ")\n";
  return finish(ctx, {});
}

int run_defects(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  std::vector<SurfaceTensionEstimate> rows;
  const bool dual = cfg.tilt_is_q;
  for (int n = std::max(cfg.n_lo, 1); n <= cfg.n_hi; ++n) {
    if (cfg.potential.kind() == PotentialKind::quadratic) {
      SurfaceTensionEstimate e;
      e.quantity = dual ? "nustar" : "nu";
      e.d = cfg.d;
      e.n = n;
      e.tilt = cfg.tilt;
      GaussianExact g(make_cube(cfg.d, n), cfg.potential.beta(),
                      dual ? GaussianExact::Bc::neumann
                           : GaussianExact::Bc::dirichlet);
      e.value = dual ? g.nustar(cfg.tilt) : g.nu(cfg.tilt);
      e.method = "exact-oracle";
      rows.push_back(std::move(e));
    } else {
      rows.push_back(dual ? nustar_estimate(cfg.d, n, cfg.tilt, cfg.potential,
                                            cfg.chain)
                          : nu_estimate(cfg.d, n, cfg.tilt, cfg.potential,
                                        cfg.chain));
    }
    ctx.check_budget();
  }
  const auto ds = defects(rows);
  const std::string file = ctx.path("defects.csv");
  write_defects_csv(ds, file);
  ctx.note_output(file);
  for (const auto& t : ds)
    std::cout << "tau_" << t.n << " = " << t.tau << " +- " << t.stderr_total
              << "\n";
  return finish(ctx, {});
}

int run_duality(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  const double beta = quadratic_beta(cfg);
  const int n_lo = std::max(cfg.n_lo, 1), n_hi = cfg.n_hi;
  if (n_hi - n_lo + 1 < 3)
    throw std::runtime_error("duality needs >= 3 levels for extrapolation");

  std::vector<GaussianExact> dir, neu;
  for (int n = n_lo; n <= n_hi; ++n) {
    dir.emplace_back(make_cube(cfg.d, n), beta, GaussianExact::Bc::dirichlet);
    neu.emplace_back(make_cube(cfg.d, n), beta, GaussianExact::Bc::neumann);
  }
  auto nubar = [&](const Eigen::VectorXd& p) {
    std::vector<std::pair<int, double>> vals;
    for (int n = n_lo; n <= n_hi; ++n)
      vals.push_back({n, dir[n - n_lo].nu(p)});
    return extrapolate_limit(vals).limit;
  };
  auto nubarstar = [&](const Eigen::VectorXd& q) {
    std::vector<std::pair<int, double>> vals;
    for (int n = n_lo; n <= n_hi; ++n)
      vals.push_back({n, neu[n - n_lo].nustar(q)});
    return extrapolate_limit(vals).limit;
  };
  std::vector<Eigen::VectorXd> qs = {Eigen::Vector2d(0, 0),
                                     Eigen::Vector2d(1, 0),
                                     Eigen::Vector2d(1, 1)};
  const auto result = check_duality(nubar, nubarstar, qs, 3.0, 1e-3);
  const std::string rfile = ctx.path("duality.report.json");
  write_check_reports_json({result.report}, rfile);
  ctx.note_output(rfile);
  const std::string efile = ctx.path("duality.evidence.csv");
  write_check_evidence_csv({result.report}, efile);
  ctx.note_output(efile);
  for (size_t i = 0; i < qs.size(); ++i)
    std::cout << "q=(" << qs[i][0] << "," << qs[i][1]
              << ") gap=" << result.gaps[i] << "\n";
  return finish(ctx, {result.report});
}

int run_rate(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  std::vector<std::pair<int, double>> vals;
  LevelSeries series;
  for (int n = std::max(cfg.n_lo, 1); n <= cfg.n_hi; ++n) {
    double v;
    if (cfg.potential.kind() == PotentialKind::quadratic) {
      GaussianExact g(make_cube(cfg.d, n), cfg.potential.beta(),
                      cfg.tilt_is_q ? GaussianExact::Bc::neumann
                                    : GaussianExact::Bc::dirichlet);
      v = cfg.tilt_is_q ? g.nustar(cfg.tilt) : g.nu(cfg.tilt);
    } else {
      v = (cfg.tilt_is_q
               ? nustar_estimate(cfg.d, n, cfg.tilt, cfg.potential, cfg.chain)
               : nu_estimate(cfg.d, n, cfg.tilt, cfg.potential, cfg.chain))
              .value;
    }
    vals.push_back({n, v});
    series.levels.push_back(n);
    series.values.push_back(v);
    series.stderrs.push_back(0.0);
    ctx.check_budget();
  }
  const bool gff = cfg.potential.kind() == PotentialKind::quadratic;
  const auto rep = gff ? check_convergence_rate(vals, 0.8, 1.2)
                       : check_convergence_rate(vals, 0.0, 2.5);
  const std::string sfile = ctx.path("rate_series.csv");
  write_series_csv(series, sfile);
  ctx.note_output(sfile);
  const std::string rfile = ctx.path("rate.report.json");
  write_check_reports_json({rep}, rfile);
  ctx.note_output(rfile);
  const std::string efile = ctx.path("rate.evidence.csv");
  write_check_evidence_csv({rep}, efile);
  ctx.note_output(efile);
  std::cout << "alpha=" << rep.constants.at("alpha")
            << " limit=" << rep.constants.at("limit") << "\n";
  return finish(ctx, {rep});
}

int run_contraction(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  Eigen::VectorXd q = cfg.tilt_is_q ? cfg.tilt : Eigen::VectorXd::Zero(cfg.d);
  std::vector<CheckReport> reps;
  LevelSeries var_series, flat_series;
  if (cfg.potential.kind() == PotentialKind::quadratic) {
    var_series =
        gff_slope_variance_series(cfg.d, cfg.n_hi, cfg.potential.beta());
    flat_series =
        gff_flatness_series_neumann(cfg.d, cfg.n_hi, cfg.potential.beta(), q);
    reps.push_back(
        check_flatness(gff_flatness_series_dirichlet(cfg.d, cfg.n_hi,
                                                     cfg.potential.beta())));
    reps.back().id = "l2_flatness_dirichlet";
  } else {
    var_series = mc_slope_variance_series(cfg.d, cfg.n_hi, q, cfg.potential,
                                          cfg.chain);
    flat_series = mc_flatness_series_neumann(cfg.d, cfg.n_hi, q, cfg.potential,
                                             cfg.chain);
  }
  reps.insert(reps.begin(), check_slope_variance_contraction(var_series, q));
  reps.push_back(check_flatness(flat_series));

  const std::string vfile = ctx.path("slope_variance_series.csv");
  write_series_csv(var_series, vfile);
  ctx.note_output(vfile);
  const std::string ffile = ctx.path("flatness_series.csv");
  write_series_csv(flat_series, ffile);
  ctx.note_output(ffile);
  const std::string rfile = ctx.path("contraction.report.json");
  write_check_reports_json(reps, rfile);
  ctx.note_output(rfile);
  const std::string efile = ctx.path("contraction.evidence.csv");
  write_check_evidence_csv(reps, efile);
  ctx.note_output(efile);
  return finish(ctx, reps);
}

int run_slope_variance(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  Eigen::VectorXd q = cfg.tilt_is_q ? cfg.tilt : Eigen::VectorXd::Zero(cfg.d);
  LevelSeries series;
  if (cfg.potential.kind() == PotentialKind::quadratic)
    series = gff_slope_variance_series(cfg.d, cfg.n_hi, cfg.potential.beta());
  else
    series =
        mc_slope_variance_series(cfg.d, cfg.n_hi, q, cfg.potential, cfg.chain);
  const std::string file = ctx.path("slope_variance.csv");
  write_series_csv(series, file);
  ctx.note_output(file);
  for (size_t i = 0; i < series.levels.size(); ++i)
    std::cout << "n=" << series.levels[i] << " var=" << series.values[i]
              << " +- " << series.stderrs[i] << "\n";
  return finish(ctx, {});
}

int run_inequalities(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  const int n = cfg.n_hi;
  std::vector<std::future<CheckReport>> jobs;
  auto launch = [&](std::function<CheckReport()> fn) {
    jobs.push_back(std::async(ctx.threads > 1 ? std::launch::async
                                              : std::launch::deferred,
                              std::move(fn)));
  };

  launch([] {
    ScalarFunctionSpec spec;
    spec.dim = 1;
    spec.f = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
    return check_variational_formula_lowdim(spec);
  });
  launch([=] { return check_poincare_suite(cfg.d, n, 1000, 2024); });
  launch([=] { return check_multiscale_poincare_suite(cfg.d, n, 1000, 2025); });
  launch([=] { return check_sobolev_suite(cfg.d, n, 3.0, 1000, 2026); });

  const std::vector<BallSpec> balls = {
      {{0, 0, 0}, 2},  {{3, 2, 0}, 2},  {{-4, 1, 0}, 2}, {{2, -5, 0}, 2},
      {{-3, -3, 0}, 2}, {{5, 5, 0}, 2}, {{0, 4, 0}, 3},  {{-2, 3, 0}, 3},
      {{4, -2, 0}, 3}, {{-5, -1, 0}, 3}};
  const double beta = cfg.potential.kind() == PotentialKind::quadratic
                          ? cfg.potential.beta()
                          : 1.0;
  const Eigen::VectorXd q =
      cfg.tilt_is_q ? cfg.tilt : Eigen::VectorXd::Zero(cfg.d);
  launch([=] { return check_caccioppoli_quadratic(cfg.d, 3, beta, q, balls); });
  launch(
      [=] { return check_reverse_holder_quadratic(cfg.d, 3, beta, q, balls); });
  launch([=] {
    return check_meyers_quadratic(cfg.d, 3, beta, q, 0.75, 0.1);
  });

  std::vector<CheckReport> reps;
  for (auto& j : jobs) reps.push_back(j.get());

  if (cfg.potential.kind() != PotentialKind::quadratic) {
    const auto est =
        mc_edge_second_moments(cfg.d, 3, q, cfg.potential, cfg.chain, balls);
    reps.push_back(check_caccioppoli_mc(est, cfg.d, 3, balls));
    reps.push_back(check_reverse_holder_mc(est, cfg.d, 3, balls));
    reps.push_back(check_meyers_mc(est, cfg.d, 3, 0.75, 0.1));
  }

  const std::string rfile = ctx.path("inequalities.report.json");
  write_check_reports_json(reps, rfile);
  ctx.note_output(rfile);
  const std::string efile = ctx.path("inequalities.evidence.csv");
  write_check_evidence_csv(reps, efile);
  ctx.note_output(efile);
  return finish(ctx, reps);
}

int run_patching(RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  std::vector<CheckReport> reps;
  reps.push_back(check_patching_logdet(cfg.d, 1));
  if (cfg.n_hi >= 2) reps.push_back(check_patching_multiplicity(cfg.d, 2, 1e-8));
  reps.push_back(
      check_patching_norms(cfg.d, 1, std::min(cfg.n_hi, 2), 200));
  reps.push_back(check_block_integral_bound(
      cfg.d, cfg.potential.lambda(), {{1, 2}, {1, 3}, {2, 3}}));
  if (cfg.potential.kind() == PotentialKind::quadratic)
    reps.push_back(check_patching_entropy_quadratic(
        cfg.d, 1, cfg.potential.beta(),
        cfg.tilt_is_q ? cfg.tilt : Eigen::VectorXd::Zero(cfg.d)));
  const Eigen::VectorXd q =
      cfg.tilt_is_q ? cfg.tilt : Eigen::VectorXd::Zero(cfg.d);
  const auto energy = patching_energy_experiment(
      q, std::min(cfg.n_hi, 2), cfg.potential, cfg.chain.seed, 32);
  reps.push_back(energy.report);
  std::cout << "patching energy: lhs=" << energy.lhs << " rhs=" << energy.rhs
            << "\n";

  const std::string rfile = ctx.path("patching.report.json");
  write_check_reports_json(reps, rfile);
  ctx.note_output(rfile);
  const std::string efile = ctx.path("patching.evidence.csv");
  write_check_evidence_csv(reps, efile);
  ctx.note_output(efile);
  return finish(ctx, reps);
}

int run_report(RunContext& ctx) {
  const std::string summary = ctx.path("summary.csv");
  const auto agg = aggregate_reports(ctx.out_dir, summary);
  ctx.note_output(summary);
  const std::string plots = ctx.path("plot_series.csv");
  const int nseries = aggregate_plot_series(ctx.out_dir, plots);
  ctx.note_output(plots);
  std::cout << nseries << " plot series collected\n";
  std::cout << "checks: " << agg.passed << " passed, " << agg.failed
            << " failed, " << agg.inconclusive << " inconclusive\n";
  for (const auto& r : agg.reports)
    std::cout << (r.inconclusive ? "  [inconclusive] "
                                 : (r.pass ? "  [pass] " : "  [FAIL] "))
              << r.id << "\n";
  ctx.manifest.finished_at = iso_timestamp();
  write_manifest(ctx.manifest, ctx.path("report_manifest.json"));
  return agg.failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for the gradient interface model"};
  app.require_subcommand(1);
  app.fallthrough(true);  // global options may follow the subcommand

  std::string config_path, out_dir = "out";
  int threads = 1;
  long seed_override = -1;
  double cap_minutes = 0;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--seed-override", seed_override, "override the chain seed");
  app.add_option("--cap-minutes", cap_minutes, "soft runtime budget");

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"gff-exact", "exact Gaussian surface tensions over the level range"},
      {"sample", "run one MALA chain and export the trace"},
      {"nu", "estimate nu by thermodynamic integration"},
      {"nustar", "estimate nu* by thermodynamic integration"},
      {"defects", "subadditivity defects across levels"},
      {"duality", "extrapolated convex-duality identity (quadratic)"},
      {"rate", "rate-of-convergence fit across levels"},
      {"contraction", "slope-variance contraction and L2 flatness checks"},
      {"slope-variance", "slope variance tables across levels"},
      {"inequalities", "functional and elliptic-regularity inequality suite"},
      {"patching", "patching-operator determinant, eigenspace, norms, energy"},
      {"report", "aggregate check reports in the output directory"},
  };
  for (const auto& [name, desc] : subs) app.add_subcommand(name, desc);

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    RunContext ctx;
    if (sub == "report") {
      if (!config_path.empty()) ctx.cfg = config_load(config_path);
    } else {
      if (config_path.empty()) {
        std::cerr << "usage error: --config is required for '" << sub
                  << "'\n";
        return 2;
      }
      ctx.cfg = config_load(config_path);
    }
    if (seed_override >= 0)
      ctx.cfg.chain.seed = static_cast<std::uint64_t>(seed_override);
    ctx.out_dir = out_dir;
    ctx.threads = std::max(1, threads);
    ctx.cap_minutes = cap_minutes;
    std::filesystem::create_directories(out_dir);
    ctx.manifest.experiment = sub;
    ctx.manifest.config_text = ctx.cfg.raw_text;
    ctx.manifest.config_hash = fnv1a64_str(ctx.cfg.raw_text);
    ctx.manifest.seed = ctx.cfg.chain.seed;
    ctx.manifest.started_at = iso_timestamp();

    if (sub == "gff-exact") return run_gff_exact(ctx);
    if (sub == "sample") return run_sample(ctx);
    if (sub == "nu") return run_estimates(ctx, false);
    if (sub == "nustar") return run_estimates(ctx, true);
    if (sub == "defects") return run_defects(ctx);
    if (sub == "duality") return run_duality(ctx);
    if (sub == "rate") return run_rate(ctx);
    if (sub == "contraction") return run_contraction(ctx);
    if (sub == "slope-variance") return run_slope_variance(ctx);
    if (sub == "inequalities") return run_inequalities(ctx);
    if (sub == "patching") return run_patching(ctx);
    if (sub == "report") return run_report(ctx);
    std::cerr << "unknown subcommand " << sub << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
