#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// None of these call into the kernel, relaxation, controller or LP code under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "scbf/geometry.hpp"
#include "scbf/system.hpp"

namespace oracle {

inline double quad(const std::function<double(double)>& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13);
}

/// Region box in original coordinates (diagonal whitening only).
inline scbf::Box original_box(const scbf::Partition& p, const scbf::Region& r) {
  scbf::Box box(r.lo.size());
  for (std::size_t d = 0; d < box.size(); ++d) {
    const double s = p.whitening.t(d, d);
    box[d] = {r.lo[d] / s, r.hi[d] / s};
  }
  return box;
}

/// Gaussian mass N(mean, sigma) over an axis box, by quadrature of the
/// density. 2D uses a nested integral of the joint density (full sigma);
/// otherwise sigma must be diagonal and the marginals are integrated.
inline double gaussian_box_mass(const std::vector<double>& mean, const Eigen::MatrixXd& sigma,
                                const scbf::Box& box) {
  const int n = static_cast<int>(mean.size());
  auto clip = [&](int d) {
    const double s = std::sqrt(sigma(d, d));
    return std::pair{std::max(box[d].lo, mean[d] - 14.0 * s),
                     std::min(box[d].hi, mean[d] + 14.0 * s)};
  };
  if (n == 2) {
    const Eigen::Matrix2d inv = sigma.inverse();
    const double norm = 1.0 / (2.0 * M_PI * std::sqrt(sigma.determinant()));
    auto [a0, b0] = clip(0);
    auto [a1, b1] = clip(1);
    return quad(
        [&](double x0) {
          return quad(
              [&](double x1) {
                const double d0 = x0 - mean[0], d1 = x1 - mean[1];
                const double q = inv(0, 0) * d0 * d0 + 2.0 * inv(0, 1) * d0 * d1 + inv(1, 1) * d1 * d1;
                return norm * std::exp(-0.5 * q);
              },
              a1, b1);
        },
        a0, b0);
  }
  double mass = 1.0;
  for (int d = 0; d < n; ++d) {
    const double s = std::sqrt(sigma(d, d));
    auto [a, b] = clip(d);
    mass *= quad([&](double t) {
      const double z = (t - mean[d]) / s;
      return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
    }, a, b);
  }
  return mass;
}

/// P(X >= k) for X ~ Bin(n, p), summed in log space.
inline double binomial_upper_tail(int k, int n, double p) {
  if (k <= 0) return 1.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double s = 0.0;
  for (int i = k; i <= n; ++i) {
    const double lg = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                      i * std::log(p) + (n - i) * std::log1p(-p);
    s += std::exp(lg);
  }
  return std::min(1.0, s);
}

/// One-sided Clopper-Pearson lower bound by bisection on p.
inline double clopper_pearson_lower(int successes, int trials, double confidence) {
  if (successes <= 0) return 0.0;
  const double alpha = 1.0 - confidence;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (binomial_upper_tail(successes, trials, mid) < alpha) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// max w^T T over lo <= T <= hi, sum T = 1 through its Lagrangian dual
///   min_mu  mu + sum_j max(lo_j (w_j - mu), hi_j (w_j - mu)),
/// whose minimum sits at a breakpoint mu = w_j.
inline double box_simplex_max(std::span<const double> w, std::span<const double> lo,
                              std::span<const double> hi) {
  double best = std::numeric_limits<double>::infinity();
  for (double mu : w) {
    double v = mu;
    for (std::size_t j = 0; j < w.size(); ++j) v += std::max(lo[j] * (w[j] - mu), hi[j] * (w[j] - mu));
    best = std::min(best, v);
  }
  return best;
}

/// Same maximum by enumerating the vertices of the polytope: every entry at a
/// bound except at most one, which absorbs the remaining mass. Small sizes only.
inline double box_simplex_max_vertices(std::span<const double> w, std::span<const double> lo,
                                       std::span<const double> hi) {
  const int k = static_cast<int>(w.size());
  double best = -std::numeric_limits<double>::infinity();
  for (int free = 0; free < k; ++free) {
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      if (mask & (1u << free)) continue;
      double sum = 0.0, val = 0.0;
      for (int j = 0; j < k; ++j) {
        if (j == free) continue;
        const double t = (mask & (1u << j)) ? hi[j] : lo[j];
        sum += t;
        val += w[j] * t;
      }
      const double t = 1.0 - sum;
      if (t < lo[free] - 1e-12 || t > hi[free] + 1e-12) continue;
      best = std::max(best, val + w[free] * t);
    }
  }
  return best;
}

}  // namespace oracle
