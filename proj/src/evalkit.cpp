#include "ppflow/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "ppflow/grid.hpp"

namespace ppflow {

KdeModel kde_fit(const PointPattern& pattern) {
  const int n = pattern.n();
  const int d = pattern.dim();
  if (n < 2) throw DataError("kde: need at least 2 points");

  const Eigen::VectorXd mean = pattern.points.colwise().mean();
  Eigen::VectorXd sd(d);
  for (int k = 0; k < d; ++k) {
    const double ss = (pattern.points.col(k).array() - mean[k]).square().sum();
    sd[k] = std::sqrt(ss / (n - 1));
    if (!(sd[k] > 0.0))
      throw DataError("kde: zero variance in dimension " + std::to_string(k));
  }
  const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));

  KdeModel model;
  model.points = pattern.points;
  model.bandwidth = sd * factor;
  model.n = n;
  return model;
}

double kde_intensity(const KdeModel& model, Eigen::Ref<const Eigen::VectorXd> x) {
  if (x.size() != model.bandwidth.size())
    throw std::invalid_argument("kde: dimension mismatch");
  const int d = static_cast<int>(x.size());
  double total = 0.0;
  for (int i = 0; i < model.n; ++i) {
    double k = 1.0;
    for (int c = 0; c < d; ++c) {
      const double t = (x[c] - model.points(i, c)) / model.bandwidth[c];
      k *= std::exp(-0.5 * t * t) / (model.bandwidth[c] * 2.5066282746310002);
    }
    total += k;
  }
  return total;
}

double l2_distance(const IntensityFn& fa, const IntensityFn& fb,
                   const DomainBounds& domain, int resolution) {
  const GridDef grid = GridDef::over(domain, resolution);
  double acc = 0.0;
  for (long i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd x = grid.node(i);
    const double diff = fa(x) - fb(x);
    acc += diff * diff;
  }
  return std::sqrt(acc * grid.cell_volume());
}

PitResult pit_ks(const FittedIntensity& model, const PointPattern& pattern) {
  const int n = pattern.n();
  if (n < 10) throw DataError("pit_ks: insufficient data (need at least 10 points)");
  if (pattern.dim() != model.bounds.dim())
    throw std::invalid_argument("pit_ks: dimension mismatch");

  const int d = pattern.dim();
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd u = pattern.unit_scale
                                  ? Eigen::VectorXd(pattern.points.row(i).transpose())
                                  : model.bounds.to_unit(pattern.points.row(i).transpose());
    const EmbedResult emb = logit_embed(u);
    const MapResult map = stack_forward(emb.y, model.stack);
    for (int k = 0; k < d; ++k) pooled.push_back(std_normal_cdf(map.z[k]));
  }
  std::sort(pooled.begin(), pooled.end());

  const auto N = static_cast<double>(pooled.size());
  PitResult result;
  result.qq.reserve(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double below = pooled[i] - static_cast<double>(i) / N;
    const double above = (static_cast<double>(i) + 1.0) / N - pooled[i];
    result.ks = std::max({result.ks, below, above});
    result.qq.emplace_back(pooled[i], (static_cast<double>(i) + 0.5) / N);
  }
  return result;
}

}  // namespace ppflow
