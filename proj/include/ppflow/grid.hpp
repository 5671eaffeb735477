#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ppflow/flow.hpp"

namespace ppflow {

// Regular midpoint grid over an axis-aligned rectangle. Nodes are cell
// centers in row-major order (last dimension fastest).
struct GridDef {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  std::vector<int> shape;

  int dim() const { return static_cast<int>(shape.size()); }

  long size() const {
    long n = 1;
    for (int s : shape) n *= s;
    return n;
  }

  double cell_volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= (hi[k] - lo[k]) / shape[k];
    return v;
  }

  Eigen::VectorXd node(long idx) const {
    Eigen::VectorXd x(dim());
    for (int k = dim() - 1; k >= 0; --k) {
      const long i = idx % shape[k];
      idx /= shape[k];
      x[k] = lo[k] + (i + 0.5) * (hi[k] - lo[k]) / shape[k];
    }
    return x;
  }

  static GridDef regular(Eigen::Ref<const Eigen::VectorXd> lo,
                         Eigen::Ref<const Eigen::VectorXd> hi, std::vector<int> shape) {
    if (lo.size() != hi.size() || static_cast<std::size_t>(lo.size()) != shape.size())
      throw std::invalid_argument("grid: dimension mismatch");
    for (int k = 0; k < lo.size(); ++k)
      if (!(lo[k] < hi[k])) throw std::invalid_argument("grid: lo must be < hi");
    return {lo, hi, std::move(shape)};
  }

  static GridDef over(const DomainBounds& bounds, int per_dim) {
    return regular(bounds.lo, bounds.hi, std::vector<int>(bounds.dim(), per_dim));
  }
};

}  // namespace ppflow
