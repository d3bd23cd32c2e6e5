#include "scbf/kernel.hpp"

#include <cmath>
#include <numbers>

#include "scbf/error.hpp"

namespace scbf {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double erf_window(double y, double lo, double hi) {
  if (lo > hi) throw_invalid("erf_window: lo > hi");
  if (lo == hi) return 0.0;
  const double a = (y - lo) * kInvSqrt2;  // a >= b
  const double b = (y - hi) * kInvSqrt2;
  double v;
  if (b >= 0.0) {
    v = 0.5 * (std::erfc(b) - std::erfc(a));
  } else if (a <= 0.0) {
    v = 0.5 * (std::erfc(-a) - std::erfc(-b));
  } else {
    v = 0.5 * (std::erf(a) - std::erf(b));
  }
  return std::clamp(v, 0.0, 1.0);
}

double erf_window_slope(double y, double lo, double hi) {
  return normal_pdf(y - lo) - normal_pdf(y - hi);
}

Eigen::VectorXd whitened_mean(const SystemSpec& spec, const Whitening& w,
                              std::span<const double> x, std::span<const double> u) {
  const std::vector<double> fx = spec.f.evaluate(x, u);
  return w.apply(fx);
}

double transition_prob(const SystemSpec& spec, const Whitening& w, const Region& region,
                       std::span<const double> x, std::span<const double> u) {
  const Eigen::VectorXd y = whitened_mean(spec, w, x, u);
  double p = 1.0;
  for (int d = 0; d < y.size(); ++d) p *= erf_window(y[d], region.lo[d], region.hi[d]);
  return p;
}

KernelRow kernel_row_at(const Partition& partition, const Eigen::VectorXd& y) {
  const int n = partition.dim();
  std::vector<std::vector<double>> window(n);
  for (int d = 0; d < n; ++d) {
    window[d].resize(partition.grid_counts[d]);
    for (int c = 0; c < partition.grid_counts[d]; ++c) {
      const Interval iv = partition.cell_interval(d, c);
      window[d][c] = erf_window(y[d], iv.lo, iv.hi);
    }
  }
  KernelRow row;
  row.probs.resize(partition.regions.size());
  double total = 0.0;
  for (const auto& r : partition.regions) {
    const std::vector<int> c = partition.cell_coords(r.cell);
    double p = 1.0;
    for (int d = 0; d < n; ++d) p *= window[d][c[d]];
    row.probs[r.index] = p;
    total += p;
  }
  row.unsafe = 1.0 - total;
  if (row.unsafe < 0.0 && row.unsafe > -1e-12) row.unsafe = 0.0;
  return row;
}

KernelRow kernel_row(const SystemSpec& spec, const Partition& partition,
                     std::span<const double> x, std::span<const double> u) {
  return kernel_row_at(partition, whitened_mean(spec, partition.whitening, x, u));
}

}  // namespace scbf
