#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace scbf {

/// Closed interval [lo, hi]. Arithmetic uses round-to-nearest; callers that
/// need a rigorous enclosure add their own slack.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  constexpr Interval() = default;
  constexpr Interval(double v) : lo(v), hi(v) {}  // NOLINT: implicit point
  constexpr Interval(double l, double h) : lo(l), hi(h) {}

  constexpr double width() const { return hi - lo; }
  constexpr double mid() const { return 0.5 * (lo + hi); }
  constexpr bool contains(double v) const { return lo <= v && v <= hi; }
  constexpr bool contains(const Interval& o) const {
    return lo <= o.lo && o.hi <= hi;
  }
  constexpr bool empty() const { return lo > hi; }
};

inline Interval operator+(const Interval& a, const Interval& b) {
  return {a.lo + b.lo, a.hi + b.hi};
}

inline Interval operator-(const Interval& a, const Interval& b) {
  return {a.lo - b.hi, a.hi - b.lo};
}

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

inline Interval operator*(double s, const Interval& a) {
  return s >= 0.0 ? Interval{s * a.lo, s * a.hi} : Interval{s * a.hi, s * a.lo};
}

inline Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

/// Exact range of sin over [a.lo, a.hi]: endpoint values plus any interior
/// extremum at pi/2 + k*pi.
inline Interval sin(const Interval& a) {
  if (a.width() >= 2.0 * std::numbers::pi) return {-1.0, 1.0};
  double lo = std::min(std::sin(a.lo), std::sin(a.hi));
  double hi = std::max(std::sin(a.lo), std::sin(a.hi));
  const double half_pi = 0.5 * std::numbers::pi;
  // Critical points t = pi/2 + k*pi: sin = +1 for even k, -1 for odd k.
  const double k0 = std::ceil((a.lo - half_pi) / std::numbers::pi);
  for (double k = k0; half_pi + k * std::numbers::pi <= a.hi; k += 1.0) {
    const long parity = static_cast<long>(std::fabs(std::fmod(k, 2.0)));
    if (parity == 0) hi = 1.0;
    else lo = -1.0;
  }
  return {lo, hi};
}

inline Interval cos(const Interval& a) {
  return sin(Interval{a.lo + 0.5 * std::numbers::pi, a.hi + 0.5 * std::numbers::pi});
}

/// Axis-aligned box, one interval per coordinate.
using Box = std::vector<Interval>;

inline bool box_contains(const Box& box, std::span<const double> p) {
  if (box.size() != p.size()) return false;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!box[i].contains(p[i])) return false;
  }
  return true;
}

inline double box_volume(const Box& box) {
  double v = 1.0;
  for (const auto& iv : box) v *= iv.width();
  return v;
}

inline std::vector<double> box_center(const Box& box) {
  std::vector<double> c(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) c[i] = box[i].mid();
  return c;
}

}  // namespace scbf
