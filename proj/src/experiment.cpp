#include "ppflow/experiment.hpp"

#include <cstdio>

#include "ppflow/bootstrap.hpp"
#include "ppflow/estimate.hpp"
#include "ppflow/evalkit.hpp"
#include "ppflow/rng.hpp"
#include "ppflow/simulate.hpp"

namespace ppflow {

namespace {

std::string truth_of(const std::string& name) {
  if (name == "table1") return "lambda1";
  if (name == "table2") return "lambda2";
  if (name == "table3") return "lambda3";
  if (name == "table4") return "lambda4";
  throw DataError("unknown experiment name: " + name);
}

double sd_of(Eigen::Ref<const Eigen::VectorXd> v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / (v.size() - 1));
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

Eigen::VectorXd ExperimentResult::flow_mean() const { return flow_l2.colwise().mean(); }

Eigen::VectorXd ExperimentResult::flow_sd() const {
  Eigen::VectorXd out(flow_l2.cols());
  for (int c = 0; c < flow_l2.cols(); ++c) out[c] = sd_of(flow_l2.col(c));
  return out;
}

double ExperimentResult::kde_mean() const { return kde_l2.mean(); }
double ExperimentResult::kde_sd() const { return sd_of(kde_l2); }

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.reps < 2) throw std::invalid_argument("experiment: need at least 2 repetitions");
  if (config.layer_counts.empty())
    throw std::invalid_argument("experiment: need at least one layer count");

  const BuiltinIntensity& truth = builtin_intensity(truth_of(config.name));
  const int grid = truth.dim == 1 ? 1000 : 256;
  const DomainBounds domain = DomainBounds::unit(truth.dim);

  ExperimentResult result;
  result.name = config.name;
  result.truth = truth.name;
  result.layer_counts = config.layer_counts;
  result.flow_l2.resize(config.reps, static_cast<long>(config.layer_counts.size()));
  result.kde_l2.resize(config.reps);

  parallel_for_index(config.reps, worker_count(), [&](int rep) {
    const std::uint64_t rep_seed = rng::derive_stream(config.seed, static_cast<std::uint64_t>(rep));
    const PointPattern pattern = thinning_generate(truth, rng::derive_stream(rep_seed, 0));

    const KdeModel kde = kde_fit(pattern);
    result.kde_l2[rep] = l2_distance(
        [&](Eigen::Ref<const Eigen::VectorXd> x) { return kde_intensity(kde, x); },
        truth.eval, domain, grid);

    for (std::size_t c = 0; c < config.layer_counts.size(); ++c) {
      FitConfig fc;
      fc.n_layers = config.layer_counts[c];
      fc.kind = SublayerKind::naf(config.naf_width);
      fc.cond_hidden = config.cond_hidden;
      fc.learning_rate = config.learning_rate;
      fc.iterations = config.iterations;
      fc.padding = config.padding;
      fc.seed = rng::derive_stream(rep_seed, 1 + c);
      const FittedIntensity model = fit(pattern, fc);
      result.flow_l2(rep, static_cast<long>(c)) = l2_distance(
          [&](Eigen::Ref<const Eigen::VectorXd> x) { return intensity_at(model, x); },
          truth.eval, domain, grid);
    }
  });
  return result;
}

std::string format_experiment_table(const ExperimentResult& result) {
  std::string out = "Experiment " + result.name + " (" + result.truth + "), " +
                    std::to_string(result.flow_l2.rows()) + " repetitions\n";
  out += "No. of compositions of triangular maps";
  for (const int n : result.layer_counts) out += "," + std::to_string(n);
  out += ",KDE\n";
  out += "Average L2 distance";
  const Eigen::VectorXd mean = result.flow_mean();
  for (int c = 0; c < mean.size(); ++c) out += "," + short_number(mean[c]);
  out += "," + short_number(result.kde_mean()) + "\n";
  out += "Standard deviation of L2 distance";
  const Eigen::VectorXd sd = result.flow_sd();
  for (int c = 0; c < sd.size(); ++c) out += "," + short_number(sd[c]);
  out += "," + short_number(result.kde_sd()) + "\n";
  return out;
}

}  // namespace ppflow
