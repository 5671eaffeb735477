#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ppflow {

// One simulation study: repeatedly generate events from a benchmark
// intensity, fit stacks of each requested depth plus the kernel baseline,
// and collect L2 distances to the truth.
struct ExperimentConfig {
  std::string name;  // table1 | table2 | table3 | table4
  int reps = 10;
  std::uint64_t seed = 1;
  std::vector<int> layer_counts = {1, 2, 3, 4, 5};
  int iterations = 2000;
  int naf_width = 64;
  int cond_hidden = 64;
  double learning_rate = 1e-4;
  double padding = 0.01;
};

struct ExperimentResult {
  std::string name;
  std::string truth;
  std::vector<int> layer_counts;
  Eigen::MatrixXd flow_l2;  // reps x layer_counts
  Eigen::VectorXd kde_l2;   // reps

  Eigen::VectorXd flow_mean() const;
  Eigen::VectorXd flow_sd() const;
  double kde_mean() const;
  double kde_sd() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Rows in the layout of the paper's tables: average and standard deviation
// per composition count, with the KDE column last.
std::string format_experiment_table(const ExperimentResult& result);

}  // namespace ppflow
