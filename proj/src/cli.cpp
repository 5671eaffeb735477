#include "ppflow/cli.hpp"

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ppflow/bootstrap.hpp"
#include "ppflow/estimate.hpp"
#include "ppflow/evalkit.hpp"
#include "ppflow/experiment.hpp"
#include "ppflow/io.hpp"
#include "ppflow/simulate.hpp"

namespace ppflow {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Shared fit options for subcommands that train a model.
struct FitFlags {
  int layers = 4;
  int naf_width = 64;
  int cond_hidden = 64;
  int iters = 5000;
  double lr = 1e-4;
  double padding = 0.01;
  int batch = 0;
  std::string kind = "naf";

  void attach(CLI::App* cmd) {
    cmd->add_option("--layers", layers, "Number of triangular maps in composition");
    cmd->add_option("--M", naf_width, "Sublayer width M");
    cmd->add_option("--cond-width", cond_hidden, "Conditional-net hidden width");
    cmd->add_option("--iters", iters, "Optimizer iterations");
    cmd->add_option("--lr", lr, "Learning rate");
    cmd->add_option("--padding", padding, "Domain padding fraction");
    cmd->add_option("--batch", batch, "Minibatch size (0 = full batch)");
    cmd->add_option("--kind", kind, "Sublayer family: naf | affine | iaf");
  }

  FitConfig config(std::uint64_t seed) const {
    FitConfig fc;
    fc.n_layers = layers;
    if (kind == "naf")
      fc.kind = SublayerKind::naf(naf_width);
    else if (kind == "affine")
      fc.kind = SublayerKind::affine();
    else if (kind == "iaf")
      fc.kind = SublayerKind::iaf();
    else
      throw CLI::ValidationError("--kind", "must be naf, affine or iaf");
    fc.cond_hidden = cond_hidden;
    fc.iterations = iters;
    fc.learning_rate = lr;
    fc.padding = padding;
    fc.batch = batch;
    fc.seed = seed;
    return fc;
  }
};

PointPattern load_pattern(const std::string& path, const std::vector<std::string>& columns,
                          const std::vector<double>& domain) {
  PointPattern pattern = parse_points(path, columns);
  if (!domain.empty()) {
    if (static_cast<int>(domain.size()) != 2 * pattern.dim())
      throw DataError("--domain needs lo,hi per dimension");
    for (int k = 0; k < pattern.dim(); ++k) {
      pattern.bounds.lo[k] = domain[static_cast<std::size_t>(2 * k)];
      pattern.bounds.hi[k] = domain[static_cast<std::size_t>(2 * k + 1)];
    }
  }
  return pattern;
}

std::string with_threshold_suffix(const std::string& path, double threshold) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", threshold);
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos)
    return path + "_t" + buf;
  return path.substr(0, dot) + "_t" + buf + path.substr(dot);
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Point-process intensity estimation with triangular transport maps"};
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit an intensity model to event data");
  std::string fit_input, fit_out;
  std::vector<std::string> fit_columns;
  std::vector<double> fit_domain;
  std::uint64_t fit_seed = 0;
  FitFlags fit_flags;
  fit_cmd->add_option("--input", fit_input, "Event CSV")->required();
  fit_cmd->add_option("--out", fit_out, "Model archive path")->required();
  fit_cmd->add_option("--seed", fit_seed, "RNG seed");
  fit_cmd->add_option("--columns", fit_columns, "Coordinate columns")->delimiter(',');
  fit_cmd->add_option("--domain", fit_domain, "Known domain lo,hi per dimension")
      ->delimiter(',');
  fit_flags.attach(fit_cmd);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Sample points from a fitted model");
  std::string sim_model, sim_out;
  std::uint64_t sim_seed = 0;
  int sim_n = -1;
  bool sim_poisson = false;
  sim_cmd->add_option("--model", sim_model)->required();
  sim_cmd->add_option("--out", sim_out)->required();
  sim_cmd->add_option("--seed", sim_seed);
  auto* sim_n_opt = sim_cmd->add_option("--n", sim_n, "Fixed number of points");
  auto* sim_p_opt = sim_cmd->add_flag("--poisson", sim_poisson, "Poisson(mu_hat) count");
  sim_n_opt->excludes(sim_p_opt);

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Simulate a benchmark intensity by thinning");
  std::string gen_intensity, gen_out;
  std::uint64_t gen_seed = 0;
  gen_cmd->add_option("--intensity", gen_intensity, "lambda1 | lambda2 | lambda3 | lambda4")
      ->required();
  gen_cmd->add_option("--out", gen_out)->required();
  gen_cmd->add_option("--seed", gen_seed);

  // density
  auto* den_cmd = app.add_subcommand("density", "Evaluate the fitted intensity on a grid");
  std::string den_model, den_out;
  int den_grid = 100;
  den_cmd->add_option("--model", den_model)->required();
  den_cmd->add_option("--out", den_out)->required();
  den_cmd->add_option("--grid", den_grid, "Nodes per dimension");

  // bootstrap
  auto* boot_cmd = app.add_subcommand("bootstrap", "Bootstrap SE and exceedance surfaces");
  std::string boot_input, boot_se, boot_exceed;
  std::vector<std::string> boot_columns;
  std::vector<double> boot_domain, boot_thresholds;
  std::uint64_t boot_seed = 0;
  int boot_B = 100, boot_grid = 100;
  FitFlags boot_flags;
  boot_cmd->add_option("--input", boot_input)->required();
  boot_cmd->add_option("--B", boot_B, "Bootstrap replicates");
  boot_cmd->add_option("--grid", boot_grid, "Nodes per dimension");
  boot_cmd->add_option("--thresholds", boot_thresholds, "Exceedance thresholds")
      ->delimiter(',');
  boot_cmd->add_option("--seed", boot_seed);
  boot_cmd->add_option("--out-se", boot_se, "SE surface CSV")->required();
  boot_cmd->add_option("--out-exceed", boot_exceed, "Exceedance surface CSV");
  boot_cmd->add_option("--columns", boot_columns)->delimiter(',');
  boot_cmd->add_option("--domain", boot_domain)->delimiter(',');
  boot_flags.attach(boot_cmd);

  // kde
  auto* kde_cmd = app.add_subcommand("kde", "Kernel intensity estimate on a grid");
  std::string kde_input, kde_out;
  std::vector<std::string> kde_columns;
  std::vector<double> kde_domain;
  int kde_grid = 100;
  kde_cmd->add_option("--input", kde_input)->required();
  kde_cmd->add_option("--out", kde_out)->required();
  kde_cmd->add_option("--grid", kde_grid);
  kde_cmd->add_option("--columns", kde_columns)->delimiter(',');
  kde_cmd->add_option("--domain", kde_domain)->delimiter(',');

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "L2 distance to a benchmark intensity");
  std::string eval_model, eval_truth;
  int eval_grid = 0;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--truth", eval_truth, "lambda1 | lambda2 | lambda3 | lambda4")
      ->required();
  eval_cmd->add_option("--grid", eval_grid, "Nodes per dimension");

  // qq
  auto* qq_cmd = app.add_subcommand("qq", "PIT QQ pairs and the KS statistic");
  std::string qq_model, qq_input, qq_out;
  std::vector<std::string> qq_columns;
  qq_cmd->add_option("--model", qq_model)->required();
  qq_cmd->add_option("--input", qq_input)->required();
  qq_cmd->add_option("--out", qq_out, "QQ pairs CSV")->required();
  qq_cmd->add_option("--columns", qq_columns)->delimiter(',');

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Benchmark study: generate, fit, report L2");
  ExperimentConfig exp_config;
  exp_cmd->add_option("--name", exp_config.name, "table1 | table2 | table3 | table4")
      ->required();
  exp_cmd->add_option("--reps", exp_config.reps);
  exp_cmd->add_option("--seed", exp_config.seed);
  exp_cmd->add_option("--iters", exp_config.iterations);
  exp_cmd->add_option("--layers", exp_config.layer_counts, "Layer counts to fit")
      ->delimiter(',');
  exp_cmd->add_option("--M", exp_config.naf_width);
  exp_cmd->add_option("--cond-width", exp_config.cond_hidden);
  exp_cmd->add_option("--lr", exp_config.learning_rate);

  std::vector<const char*> argv;
  argv.push_back("ppflow");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (fit_cmd->parsed()) {
    const PointPattern pattern = load_pattern(fit_input, fit_columns, fit_domain);
    std::fprintf(stderr, "read %d events (%d-d) from %s\n", pattern.n(), pattern.dim(),
                 fit_input.c_str());
    const FittedIntensity model = fit(pattern, fit_flags.config(fit_seed));
    save_model(fit_out, model);
    std::printf("final_objective %s\n", format_double(model.meta.final_objective).c_str());
  } else if (sim_cmd->parsed()) {
    const FittedIntensity model = load_model(sim_model);
    if (sim_n < 0 && !sim_poisson)
      throw CLI::ValidationError("simulate", "need --n or --poisson");
    const PointPattern pattern = sim_poisson ? sample_pattern(model, sim_seed)
                                             : sample_fixed(model, sim_n, sim_seed);
    write_pattern_csv(sim_out, pattern);
    std::printf("simulated %d points\n", pattern.n());
  } else if (gen_cmd->parsed()) {
    const PointPattern pattern = thinning_generate(builtin_intensity(gen_intensity), gen_seed);
    write_pattern_csv(gen_out, pattern);
    std::printf("generated %d points\n", pattern.n());
  } else if (den_cmd->parsed()) {
    const FittedIntensity model = load_model(den_model);
    const GridDef grid = GridDef::over(model.bounds, den_grid);
    GridSurface surf{grid, Eigen::VectorXd(grid.size())};
    for (long i = 0; i < grid.size(); ++i) surf.values[i] = intensity_at(model, grid.node(i));
    write_surface_csv(den_out, surf);
  } else if (boot_cmd->parsed()) {
    const PointPattern pattern = load_pattern(boot_input, boot_columns, boot_domain);
    const BootstrapEnsemble ensemble =
        bootstrap_fit(pattern, boot_B, boot_flags.config(boot_seed), boot_seed);
    if (!ensemble.failed.empty())
      std::fprintf(stderr, "%zu of %d replicates diverged\n", ensemble.failed.size(), boot_B);
    write_surface_csv(boot_se, se_surface(ensemble, boot_grid));
    if (!boot_exceed.empty()) {
      for (const double t : boot_thresholds.empty() ? std::vector<double>{1.0}
                                                    : boot_thresholds) {
        const std::string path = boot_thresholds.size() > 1
                                     ? with_threshold_suffix(boot_exceed, t)
                                     : boot_exceed;
        write_surface_csv(path, exceedance_surface(ensemble, t, boot_grid));
      }
    }
  } else if (kde_cmd->parsed()) {
    const PointPattern pattern = load_pattern(kde_input, kde_columns, kde_domain);
    const KdeModel model = kde_fit(pattern);
    const GridDef grid = GridDef::over(pattern.bounds, kde_grid);
    GridSurface surf{grid, Eigen::VectorXd(grid.size())};
    for (long i = 0; i < grid.size(); ++i) surf.values[i] = kde_intensity(model, grid.node(i));
    write_surface_csv(kde_out, surf);
  } else if (eval_cmd->parsed()) {
    const FittedIntensity model = load_model(eval_model);
    const BuiltinIntensity& truth = builtin_intensity(eval_truth);
    const int grid = eval_grid > 0 ? eval_grid : (truth.dim == 1 ? 1000 : 256);
    const double l2 = l2_distance(
        [&](Eigen::Ref<const Eigen::VectorXd> x) { return intensity_at(model, x); },
        truth.eval, DomainBounds::unit(truth.dim), grid);
    std::printf("L2 %s\n", format_double(l2).c_str());
  } else if (qq_cmd->parsed()) {
    const FittedIntensity model = load_model(qq_model);
    const PointPattern pattern = parse_points(qq_input, qq_columns);
    const PitResult result = pit_ks(model, pattern);
    std::string text = "fitted,empirical\n";
    for (const auto& [fitted, empirical] : result.qq)
      text += format_double(fitted) + "," + format_double(empirical) + "\n";
    atomic_write_text(qq_out, text);
    std::printf("KS %s\n", format_double(result.ks).c_str());
  } else if (exp_cmd->parsed()) {
    const ExperimentResult result = run_experiment(exp_config);
    std::fputs(format_experiment_table(result).c_str(), stdout);
  }
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace ppflow
