#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scbf/geometry.hpp"
#include "scbf/system.hpp"

namespace scbf {

/// Standard normal density.
double normal_pdf(double t);

/// P(lo <= y + w <= hi) for w ~ N(0, 1):
///   0.5 * [erf((y - lo)/sqrt(2)) - erf((y - hi)/sqrt(2))].
/// Tails are evaluated through erfc to keep relative accuracy.
double erf_window(double y, double lo, double hi);

/// d/dy of erf_window.
double erf_window_slope(double y, double lo, double hi);

/// Whitened mean y = T f(x, u).
Eigen::VectorXd whitened_mean(const SystemSpec& spec, const Whitening& w,
                              std::span<const double> x, std::span<const double> u);

/// T(X_j | x, u) for one region: product of per-dimension windows at y = T f(x, u).
double transition_prob(const SystemSpec& spec, const Whitening& w, const Region& region,
                       std::span<const double> x, std::span<const double> u);

struct KernelRow {
  std::vector<double> probs;  // one entry per region
  double unsafe = 0.0;        // complement: exterior plus excluded cells
};

KernelRow kernel_row(const SystemSpec& spec, const Partition& partition,
                     std::span<const double> x, std::span<const double> u);

/// Same row for a given whitened mean.
KernelRow kernel_row_at(const Partition& partition, const Eigen::VectorXd& y);

}  // namespace scbf
