#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ppflow/estimate.hpp"
#include "ppflow/grid.hpp"

namespace ppflow {

// Regular lattice over the original-coordinate domain with one scalar per
// cell (intensity, standard error, exceedance probability).
struct GridSurface {
  GridDef grid;
  Eigen::VectorXd values;  // row-major over grid cells
};

struct BootstrapEnsemble {
  std::vector<FittedIntensity> replicates;  // successful refits
  std::vector<int> counts;                  // n_b per successful replicate
  std::vector<int> failed;                  // indices of diverged replicates
  PointPattern base;
  std::uint64_t master_seed = 0;
  int requested = 0;
};

// Algorithm: for b = 1..B draw n_b ~ Poisson(n), resample n_b points with
// replacement, refit; replicate b's intensity is n_b times its process
// density. Replicates run in parallel on derived RNG streams, so the
// ensemble does not depend on scheduling. Draws of n_b <= 1 are redrawn;
// diverged fits are recorded in `failed`.
BootstrapEnsemble bootstrap_fit(const PointPattern& pattern, int B,
                                const FitConfig& config, std::uint64_t seed);

// Per-node sample standard deviation (divisor B-1) of the replicate
// intensities. Requires at least 90% successful replicates.
GridSurface se_surface(const BootstrapEnsemble& ensemble, int resolution);

// Per-node fraction of replicates whose intensity exceeds the threshold.
GridSurface exceedance_surface(const BootstrapEnsemble& ensemble, double threshold,
                               int resolution);

// Reductions over arbitrary intensity functions on an explicit grid; the
// ensemble overloads above evaluate the replicates and forward here.
GridSurface se_surface(const std::vector<IntensityFn>& intensities, const GridDef& grid);
GridSurface exceedance_surface(const std::vector<IntensityFn>& intensities,
                               double threshold, const GridDef& grid);

// Worker count for parallel sections: PPFLOW_THREADS when set, otherwise
// the hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) on `threads` workers. Exceptions propagate
// after all workers finish.
void parallel_for_index(int n, int threads, const std::function<void(int)>& fn);

}  // namespace ppflow
