#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "scbf/expr.hpp"
#include "scbf/geometry.hpp"
#include "scbf/interval.hpp"
#include "scbf/system.hpp"

namespace scbf {

/// offset + sum_k coeffs[k] * z[k] over the joint variable z = (x_w, u),
/// where x_w is the whitened state. Fixed capacity avoids heap traffic in
/// the K^2 loops.
class AffineForm {
 public:
  static constexpr int kMaxVars = 12;

  AffineForm() = default;
  explicit AffineForm(int dim, double offset = 0.0);

  static AffineForm variable(int dim, int k);

  int dim() const { return dim_; }
  double offset() const { return offset_; }
  double& offset() { return offset_; }
  double coeff(int k) const { return c_[k]; }
  double& coeff(int k) { return c_[k]; }
  bool is_constant() const;

  double eval(std::span<const double> z) const;
  double min_over(const Box& box) const;
  double max_over(const Box& box) const;

  AffineForm& operator+=(const AffineForm& o);
  AffineForm& operator-=(const AffineForm& o);
  AffineForm& operator*=(double s);
  AffineForm& operator+=(double s) {
    offset_ += s;
    return *this;
  }

  friend AffineForm operator+(AffineForm a, const AffineForm& b) { return a += b; }
  friend AffineForm operator-(AffineForm a, const AffineForm& b) { return a -= b; }
  friend AffineForm operator*(double s, AffineForm a) { return a *= s; }

 private:
  int dim_ = 0;
  double offset_ = 0.0;
  std::array<double, kMaxVars> c_{};
};

/// Sound envelope lower(z) <= g(z) <= upper(z) on a box, with an enclosure
/// of g over the same box.
struct AffineBound {
  AffineForm lower;
  AffineForm upper;
  Interval range;

  static AffineBound constant(int dim, double lo, double hi);
};

/// Affine envelope of a scalar function of one variable t on an interval:
///   lo_slope * t + lo_offset <= g(t) <= hi_slope * t + hi_offset.
struct ScalarRelaxation {
  double lo_slope = 0.0;
  double lo_offset = 0.0;
  double hi_slope = 0.0;
  double hi_offset = 0.0;
  Interval range;  // exact range of g on the interval

  double lower_at(double t) const { return lo_slope * t + lo_offset; }
  double upper_at(double t) const { return hi_slope * t + hi_offset; }
};

/// Substitutes an affine bound of t into a scalar relaxation, choosing the
/// lower or upper form by the sign of each slope.
AffineBound compose(const ScalarRelaxation& g, const AffineBound& t);

/// McCormick envelope of p * q using the input ranges. A factor's affine
/// bound replaces it only through a coefficient of known sign.
AffineBound relax_product(const AffineBound& p, const AffineBound& q, const Box& box);

/// Relaxation of sin on [t.lo, t.hi]: secant/tangent where the curvature
/// sign is certified, otherwise the secant slope with exact offsets.
ScalarRelaxation relax_sin(Interval t);
ScalarRelaxation relax_cos(Interval t);

/// Relaxation of phi(y) = erf_window(y, lo, hi) over y in [y.lo, y.hi].
ScalarRelaxation relax_window(Interval y, double lo, double hi);

/// Enclosure of phi'' over y in [y.lo, y.hi].
Interval window_curvature(Interval y, double lo, double hi);

/// Relaxation of one graph node from the bounds of its children.
AffineBound relax_primitive(const ExprNode& node, std::span<const AffineBound> children,
                            const Box& box);

/// Forward pass over the graph on the joint box z = (x_w, u), with the state
/// given by x = T^{-1} x_w. Returns one bound per output.
std::vector<AffineBound> relax_graph(const ExprGraph& f, const Eigen::MatrixXd& t_inverse,
                                     const Box& box);

enum class BoundMode { kAffine, kConstant };

std::string to_string(BoundMode mode);
BoundMode parse_bound_mode(std::string_view text);

/// Entries whose certified upper range falls below this value are dropped.
inline constexpr double kTailThreshold = 1e-12;

struct BoundEntry {
  int dest = 0;  // region index
  AffineBound bound;
};

/// Bounds for one source region. Destinations whose certified upper range
/// falls below kTailThreshold are truncated: lower 0 and a constant upper
/// bound, with only their total kept in tail_mass. As affine identities,
///   unsafe.lower = 1 - sum(entries.upper) - tail_mass
///   unsafe.upper = 1 - sum(entries.lower).
struct BoundsRow {
  int source = 0;
  Box box;                                 // whitened region box x control box
  std::vector<BoundEntry> entries;         // ascending dest
  AffineBound unsafe;
  double tail_mass = 0.0;
  std::vector<std::vector<double>> factor_hi;  // per dimension, per grid coordinate

  /// Bound for destination region j; truncated ones report [0, tail bound].
  AffineBound entry(const Partition& partition, int j) const;
};

struct BoundsMatrix {
  BoundMode mode = BoundMode::kAffine;
  int n = 0;
  int m = 0;
  std::vector<BoundsRow> rows;

  int size() const { return static_cast<int>(rows.size()); }
  std::size_t active_entries() const;
};

/// Bound for one (source, destination) pair; j = -1 selects the unsafe set.
AffineBound bound_transition(const SystemSpec& spec, const Partition& partition, int i, int j,
                             BoundMode mode = BoundMode::kAffine);

/// `control`, when given, replaces the control box (e.g. a single pinned control).
BoundsRow bound_row(const SystemSpec& spec, const Partition& partition, int i, BoundMode mode,
                    const Box* control = nullptr);

/// All rows, computed in parallel and merged by source index.
BoundsMatrix bound_all(const SystemSpec& spec, const Partition& partition,
                       BoundMode mode = BoundMode::kAffine);

/// Joint box of region i: whitened region box times the control box.
Box joint_box(const SystemSpec& spec, const Region& region, const Box* control = nullptr);

/// Maps z = (x_w, u) for an original-coordinates state.
std::vector<double> joint_point(const Partition& partition, std::span<const double> x,
                                std::span<const double> u);

}  // namespace scbf
