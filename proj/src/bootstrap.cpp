#include "ppflow/bootstrap.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "ppflow/rng.hpp"

namespace ppflow {

int worker_count() {
  if (const char* env = std::getenv("PPFLOW_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for_index(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

BootstrapEnsemble bootstrap_fit(const PointPattern& pattern, int B,
                                const FitConfig& config, std::uint64_t seed) {
  if (B < 2) throw std::invalid_argument("bootstrap: B must be >= 2");
  if (pattern.n() < 2) throw DataError("bootstrap: need at least 2 points");
  if (pattern.unit_scale)
    throw std::invalid_argument("bootstrap: pass the pattern in original coordinates");

  const int n = pattern.n();
  std::vector<std::optional<FittedIntensity>> fits(static_cast<std::size_t>(B));
  std::vector<int> counts(static_cast<std::size_t>(B), 0);
  std::vector<char> diverged(static_cast<std::size_t>(B), 0);

  parallel_for_index(B, worker_count(), [&](int b) {
    rng::Engine eng = rng::make_engine(rng::derive_stream(seed, static_cast<std::uint64_t>(b)));
    std::poisson_distribution<int> count_dist(static_cast<double>(n));
    int nb = count_dist(eng);
    while (nb <= 1) nb = count_dist(eng);  // redrawn, a 1-point pattern cannot be fit
    std::uniform_int_distribution<int> pick(0, n - 1);
    PointPattern resample;
    resample.points.resize(nb, pattern.dim());
    for (int i = 0; i < nb; ++i) resample.points.row(i) = pattern.points.row(pick(eng));
    resample.bounds = pattern.bounds;  // keep the base rectangle

    FitConfig rep_config = config;
    rep_config.seed = rng::derive_stream(seed, static_cast<std::uint64_t>(B) + b);
    counts[static_cast<std::size_t>(b)] = nb;
    try {
      fits[static_cast<std::size_t>(b)] = fit(resample, rep_config);
    } catch (const NumericError&) {
      diverged[static_cast<std::size_t>(b)] = 1;
    }
  });

  BootstrapEnsemble out;
  out.base = pattern;
  out.master_seed = seed;
  out.requested = B;
  for (int b = 0; b < B; ++b) {
    if (diverged[static_cast<std::size_t>(b)]) {
      out.failed.push_back(b);
    } else {
      out.replicates.push_back(std::move(*fits[static_cast<std::size_t>(b)]));
      out.counts.push_back(counts[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

namespace {

GridDef ensemble_grid(const BootstrapEnsemble& ensemble, int resolution) {
  return GridDef::over(ensemble.base.bounds, resolution);
}

std::vector<IntensityFn> replicate_functions(const BootstrapEnsemble& ensemble) {
  const double kept = static_cast<double>(ensemble.replicates.size());
  if (ensemble.requested > 0 && kept < 0.9 * ensemble.requested)
    throw NumericError("bootstrap: fewer than 90% of replicates succeeded");
  if (ensemble.replicates.size() < 2)
    throw std::invalid_argument("bootstrap: need at least 2 replicates");
  std::vector<IntensityFn> fns;
  fns.reserve(ensemble.replicates.size());
  for (const FittedIntensity& rep : ensemble.replicates)
    fns.emplace_back([&rep](Eigen::Ref<const Eigen::VectorXd> x) {
      return intensity_at(rep, x);
    });
  return fns;
}

Eigen::MatrixXd evaluate_all(const std::vector<IntensityFn>& intensities,
                             const GridDef& grid) {
  const long nodes = grid.size();
  const auto B = static_cast<int>(intensities.size());
  Eigen::MatrixXd values(nodes, B);
  parallel_for_index(B, worker_count(), [&](int b) {
    for (long i = 0; i < nodes; ++i)
      values(i, b) = intensities[static_cast<std::size_t>(b)](grid.node(i));
  });
  return values;
}

}  // namespace

GridSurface se_surface(const std::vector<IntensityFn>& intensities, const GridDef& grid) {
  if (intensities.size() < 2)
    throw std::invalid_argument("se_surface: need at least 2 intensities");
  const Eigen::MatrixXd values = evaluate_all(intensities, grid);
  const auto B = static_cast<double>(intensities.size());
  GridSurface surf{grid, Eigen::VectorXd(grid.size())};
  for (long i = 0; i < grid.size(); ++i) {
    const double mean = values.row(i).mean();
    const double ss = (values.row(i).array() - mean).square().sum();
    surf.values[i] = std::sqrt(ss / (B - 1.0));
  }
  return surf;
}

GridSurface exceedance_surface(const std::vector<IntensityFn>& intensities,
                               double threshold, const GridDef& grid) {
  if (intensities.empty())
    throw std::invalid_argument("exceedance_surface: no intensities");
  if (threshold < 0.0)
    throw std::invalid_argument("exceedance_surface: threshold must be >= 0");
  const Eigen::MatrixXd values = evaluate_all(intensities, grid);
  GridSurface surf{grid, Eigen::VectorXd(grid.size())};
  for (long i = 0; i < grid.size(); ++i)
    surf.values[i] =
        (values.row(i).array() > threshold).cast<double>().mean();
  return surf;
}

GridSurface se_surface(const BootstrapEnsemble& ensemble, int resolution) {
  return se_surface(replicate_functions(ensemble), ensemble_grid(ensemble, resolution));
}

GridSurface exceedance_surface(const BootstrapEnsemble& ensemble, double threshold,
                               int resolution) {
  return exceedance_surface(replicate_functions(ensemble), threshold,
                            ensemble_grid(ensemble, resolution));
}

}  // namespace ppflow
