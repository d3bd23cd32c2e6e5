#include "scbf/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scbf/error.hpp"
#include "scbf/kernel.hpp"
#include "scbf/parallel.hpp"

namespace scbf {

// ---------------------------------------------------------------------------
// AffineForm

AffineForm::AffineForm(int dim, double offset) : dim_(dim), offset_(offset) {
  if (dim < 0 || dim > kMaxVars) {
    throw_invalid("affine form: dimension " + std::to_string(dim) + " exceeds capacity " +
                  std::to_string(kMaxVars));
  }
}

AffineForm AffineForm::variable(int dim, int k) {
  AffineForm f(dim);
  f.c_[k] = 1.0;
  return f;
}

bool AffineForm::is_constant() const {
  for (int k = 0; k < dim_; ++k) {
    if (c_[k] != 0.0) return false;
  }
  return true;
}

double AffineForm::eval(std::span<const double> z) const {
  double v = offset_;
  for (int k = 0; k < dim_; ++k) v += c_[k] * z[k];
  return v;
}

double AffineForm::min_over(const Box& box) const {
  double v = offset_;
  for (int k = 0; k < dim_; ++k) v += c_[k] * (c_[k] >= 0.0 ? box[k].lo : box[k].hi);
  return v;
}

double AffineForm::max_over(const Box& box) const {
  double v = offset_;
  for (int k = 0; k < dim_; ++k) v += c_[k] * (c_[k] >= 0.0 ? box[k].hi : box[k].lo);
  return v;
}

AffineForm& AffineForm::operator+=(const AffineForm& o) {
  for (int k = 0; k < dim_; ++k) c_[k] += o.c_[k];
  offset_ += o.offset_;
  return *this;
}

AffineForm& AffineForm::operator-=(const AffineForm& o) {
  for (int k = 0; k < dim_; ++k) c_[k] -= o.c_[k];
  offset_ -= o.offset_;
  return *this;
}

AffineForm& AffineForm::operator*=(double s) {
  for (int k = 0; k < dim_; ++k) c_[k] *= s;
  offset_ *= s;
  return *this;
}

AffineBound AffineBound::constant(int dim, double lo, double hi) {
  return {AffineForm(dim, lo), AffineForm(dim, hi), {lo, hi}};
}

namespace {

// Rounding allowance for a form evaluated on a box.
double form_slack(const AffineForm& f, const Box& box) {
  double mag = std::fabs(f.offset());
  for (int k = 0; k < f.dim(); ++k) {
    mag += std::fabs(f.coeff(k)) * std::max(std::fabs(box[k].lo), std::fabs(box[k].hi));
  }
  return 8.0 * std::numeric_limits<double>::epsilon() * mag + 1e-300;
}

void widen(AffineBound& b, const Box& box) {
  b.lower.offset() -= form_slack(b.lower, box);
  b.upper.offset() += form_slack(b.upper, box);
}

// Natural range intersected with what the forms imply.
void settle_range(AffineBound& b, Interval natural, const Box& box) {
  const double lo = std::max(natural.lo, b.lower.min_over(box));
  const double hi = std::min(natural.hi, b.upper.max_over(box));
  b.range = lo <= hi ? Interval{lo, hi} : natural;
}

// Line slack for a scalar relaxation evaluated at |t| <= tmax.
double line_slack(double slope, double offset, double tmax) {
  return 8.0 * std::numeric_limits<double>::epsilon() *
             (std::fabs(offset) + std::fabs(slope) * tmax + 1.0);
}

void pad(ScalarRelaxation& r, Interval t) {
  const double tmax = std::max(std::fabs(t.lo), std::fabs(t.hi));
  r.lo_offset -= line_slack(r.lo_slope, r.lo_offset, tmax);
  r.hi_offset += line_slack(r.hi_slope, r.hi_offset, tmax);
}

ScalarRelaxation constant_relaxation(Interval range) {
  ScalarRelaxation r;
  r.lo_offset = range.lo;
  r.hi_offset = range.hi;
  r.range = range;
  return r;
}

constexpr double kMinWidth = 1e-9;

}  // namespace

AffineBound compose(const ScalarRelaxation& g, const AffineBound& t) {
  AffineBound out;
  out.lower = g.lo_slope * (g.lo_slope >= 0.0 ? t.lower : t.upper);
  out.lower += g.lo_offset;
  out.upper = g.hi_slope * (g.hi_slope >= 0.0 ? t.upper : t.lower);
  out.upper += g.hi_offset;
  out.range = g.range;
  return out;
}

AffineBound relax_product(const AffineBound& p, const AffineBound& q, const Box& box) {
  const Interval P = p.range;
  const Interval Q = q.range;
  const std::vector<double> center = box_center(box);

  // a * p replaced by an affine bound of p, the side chosen by sign(a).
  auto lower_term = [](double a, const AffineBound& v) {
    return a * (a >= 0.0 ? v.lower : v.upper);
  };
  auto upper_term = [](double a, const AffineBound& v) {
    return a * (a >= 0.0 ? v.upper : v.lower);
  };

  AffineForm l1 = lower_term(Q.lo, p) + lower_term(P.lo, q);
  l1 += -P.lo * Q.lo;
  AffineForm l2 = lower_term(Q.hi, p) + lower_term(P.hi, q);
  l2 += -P.hi * Q.hi;
  AffineForm u1 = upper_term(Q.hi, p) + upper_term(P.lo, q);
  u1 += -P.lo * Q.hi;
  AffineForm u2 = upper_term(Q.lo, p) + upper_term(P.hi, q);
  u2 += -P.hi * Q.lo;

  AffineBound out;
  out.lower = l1.eval(center) >= l2.eval(center) ? l1 : l2;
  out.upper = u1.eval(center) <= u2.eval(center) ? u1 : u2;
  widen(out, box);
  settle_range(out, P * Q, box);
  return out;
}

// ---------------------------------------------------------------------------
// Trigonometric relaxations

ScalarRelaxation relax_sin(Interval t) {
  const Interval range = sin(t);
  if (t.width() < kMinWidth || t.width() >= 2.0 * std::numbers::pi) {
    return constant_relaxation(range);
  }
  const double a = t.lo, b = t.hi, m = t.mid();
  const double secant = (std::sin(b) - std::sin(a)) / (b - a);
  const double secant_off = std::sin(a) - secant * a;
  const double tangent = std::cos(m);
  const double tangent_off = std::sin(m) - tangent * m;

  ScalarRelaxation r;
  r.range = range;
  // sin'' = -sin, so the sign of sin over t decides the curvature.
  if (range.lo >= 0.0) {
    r.lo_slope = secant;
    r.lo_offset = secant_off;
    r.hi_slope = tangent;
    r.hi_offset = tangent_off;
  } else if (range.hi <= 0.0) {
    r.lo_slope = tangent;
    r.lo_offset = tangent_off;
    r.hi_slope = secant;
    r.hi_offset = secant_off;
  } else {
    // h(t) = sin t - s t has critical points where cos t = s.
    const double s = std::clamp(secant, -1.0, 1.0);
    double lo = std::min(std::sin(a) - s * a, std::sin(b) - s * b);
    double hi = std::max(std::sin(a) - s * a, std::sin(b) - s * b);
    const double base = std::acos(s);
    const double two_pi = 2.0 * std::numbers::pi;
    for (double root : {base, -base}) {
      const double k0 = std::ceil((a - root) / two_pi);
      for (double k = k0; root + k * two_pi <= b; k += 1.0) {
        const double c = root + k * two_pi;
        const double h = std::sin(c) - s * c;
        lo = std::min(lo, h);
        hi = std::max(hi, h);
      }
    }
    r.lo_slope = s;
    r.lo_offset = lo;
    r.hi_slope = s;
    r.hi_offset = hi;
  }
  pad(r, t);
  return r;
}

ScalarRelaxation relax_cos(Interval t) {
  const double shift = 0.5 * std::numbers::pi;
  ScalarRelaxation r = relax_sin({t.lo + shift, t.hi + shift});
  r.lo_offset += r.lo_slope * shift;
  r.hi_offset += r.hi_slope * shift;
  r.range = cos(t);
  pad(r, t);
  return r;
}

// ---------------------------------------------------------------------------
// Gaussian window relaxation

namespace {

// Exact range of G(t) = t * pdf(t): odd, increasing on [-1, 1], decreasing
// towards 0 outside.
Interval g_range(Interval t) {
  const double ga = t.lo * normal_pdf(t.lo);
  const double gb = t.hi * normal_pdf(t.hi);
  double lo = std::min(ga, gb), hi = std::max(ga, gb);
  const double peak = normal_pdf(1.0);
  if (t.contains(1.0)) hi = peak;
  if (t.contains(-1.0)) lo = -peak;
  return {lo, hi};
}

}  // namespace

Interval window_curvature(Interval y, double lo, double hi) {
  // phi'' = -G(y - lo) + G(y - hi)
  const Interval g1 = g_range({y.lo - lo, y.hi - lo});
  const Interval g2 = g_range({y.lo - hi, y.hi - hi});
  const double pad = 1e-15;
  return {-g1.hi + g2.lo - pad, -g1.lo + g2.hi + pad};
}

ScalarRelaxation relax_window(Interval y, double lo, double hi) {
  if (!(lo < hi)) return constant_relaxation({0.0, 0.0});
  const double a = y.lo, b = y.hi;
  const double fa = erf_window(a, lo, hi);
  const double fb = erf_window(b, lo, hi);
  const double mode = 0.5 * (lo + hi);
  Interval range{std::min(fa, fb), std::max(fa, fb)};
  if (y.contains(mode)) range.hi = erf_window(mode, lo, hi);
  // erf_window is accurate to a few ulps; keep the enclosure honest.
  range.lo = std::max(0.0, range.lo * (1.0 - 1e-14) - 1e-300);
  range.hi = std::min(1.0, range.hi * (1.0 + 1e-14) + 1e-300);
  if (y.width() < kMinWidth) return constant_relaxation(range);

  const double w = b - a;
  const double m = y.mid();
  const double secant = (fb - fa) / w;
  const double secant_off = fa - secant * a;
  const double tangent = erf_window_slope(m, lo, hi);
  const double tangent_off = erf_window(m, lo, hi) - tangent * m;

  ScalarRelaxation r;
  r.range = range;
  const Interval curv = window_curvature(y, lo, hi);
  if (curv.hi <= 0.0) {
    r.lo_slope = secant;
    r.lo_offset = secant_off;
    r.hi_slope = tangent;
    r.hi_offset = tangent_off;
  } else if (curv.lo >= 0.0) {
    r.lo_slope = tangent;
    r.lo_offset = tangent_off;
    r.hi_slope = secant;
    r.hi_offset = secant_off;
  } else {
    // Mixed curvature: for each candidate slope s, bound phi(y) - s y on a
    // grid; between nodes the linear interpolant is off by at most
    // M * h^2 / 8 with M >= |phi''|.
    const int nodes = std::clamp(static_cast<int>(std::ceil(w * 64.0)) + 1, 33, 2049);
    const double step = w / (nodes - 1);
    const double bound2 = std::max(std::fabs(curv.lo), std::fabs(curv.hi));
    const double margin = bound2 * step * step / 8.0;
    std::vector<double> ys(nodes), fs(nodes);
    for (int k = 0; k < nodes; ++k) {
      ys[k] = k + 1 == nodes ? b : a + k * step;
      fs[k] = erf_window(ys[k], lo, hi);
    }
    // Flat candidate with exact offsets.
    double best_lo_score = range.lo, best_hi_score = range.hi;
    r.lo_slope = 0.0;
    r.lo_offset = range.lo;
    r.hi_slope = 0.0;
    r.hi_offset = range.hi;
    for (double s : {secant, tangent}) {
      double hmin = fs[0] - s * ys[0], hmax = hmin;
      for (int k = 1; k < nodes; ++k) {
        const double h = fs[k] - s * ys[k];
        hmin = std::min(hmin, h);
        hmax = std::max(hmax, h);
      }
      const double err = 1e-15 * (1.0 + std::fabs(s) * std::max(std::fabs(a), std::fabs(b)));
      const double off_lo = hmin - margin - err;
      const double off_hi = hmax + margin + err;
      if (s * m + off_lo > best_lo_score) {
        best_lo_score = s * m + off_lo;
        r.lo_slope = s;
        r.lo_offset = off_lo;
      }
      if (s * m + off_hi < best_hi_score) {
        best_hi_score = s * m + off_hi;
        r.hi_slope = s;
        r.hi_offset = off_hi;
      }
    }
  }
  pad(r, y);
  // Relative error of erf_window itself.
  r.lo_offset -= 1e-14 * range.hi;
  r.hi_offset += 1e-14 * range.hi;
  return r;
}

// ---------------------------------------------------------------------------
// Graph relaxation

AffineBound relax_primitive(const ExprNode& node, std::span<const AffineBound> children,
                            const Box& box) {
  const int dim = static_cast<int>(box.size());
  AffineBound out;
  switch (node.kind) {
    case NodeKind::kConstant:
      return AffineBound::constant(dim, node.value, node.value);
    case NodeKind::kState:
    case NodeKind::kControl:
      throw_internal("relax_primitive: input nodes are seeded by relax_graph");
    case NodeKind::kAdd:
    case NodeKind::kSub: {
      const auto& p = children[0];
      const auto& q = children[1];
      if (node.kind == NodeKind::kAdd) {
        out.lower = p.lower + q.lower;
        out.upper = p.upper + q.upper;
        out.range = p.range + q.range;
      } else {
        out.lower = p.lower - q.upper;
        out.upper = p.upper - q.lower;
        out.range = p.range - q.range;
      }
      const Interval natural = out.range;
      widen(out, box);
      settle_range(out, natural, box);
      return out;
    }
    case NodeKind::kAffine: {
      out.lower = AffineForm(dim, node.value);
      out.upper = AffineForm(dim, node.value);
      Interval natural{node.value};
      for (std::size_t k = 0; k < children.size(); ++k) {
        const double wk = node.weights[k];
        const auto& c = children[k];
        out.lower += wk * (wk >= 0.0 ? c.lower : c.upper);
        out.upper += wk * (wk >= 0.0 ? c.upper : c.lower);
        natural = natural + wk * c.range;
      }
      widen(out, box);
      settle_range(out, natural, box);
      return out;
    }
    case NodeKind::kMul:
      return relax_product(children[0], children[1], box);
    case NodeKind::kSin:
    case NodeKind::kCos: {
      const auto& c = children[0];
      const ScalarRelaxation g =
          node.kind == NodeKind::kSin ? relax_sin(c.range) : relax_cos(c.range);
      out = compose(g, c);
      widen(out, box);
      settle_range(out, g.range, box);
      return out;
    }
  }
  throw_internal("relax_primitive: unknown node kind");
}

std::vector<AffineBound> relax_graph(const ExprGraph& f, const Eigen::MatrixXd& t_inverse,
                                     const Box& box) {
  const int n = f.state_dim();
  const int dim = static_cast<int>(box.size());
  if (dim != n + f.control_dim()) throw_invalid("relax_graph: box dimension mismatch");
  const auto& nodes = f.nodes();
  std::vector<AffineBound> bounds(nodes.size());
  std::vector<AffineBound> kids;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const ExprNode& node = nodes[id];
    if (node.kind == NodeKind::kState) {
      // x_k = sum_c Tinv(k, c) * x_w,c
      AffineForm form(dim);
      Interval natural{0.0};
      for (int c = 0; c < n; ++c) {
        form.coeff(c) = t_inverse(node.index, c);
        natural = natural + t_inverse(node.index, c) * box[c];
      }
      bounds[id] = {form, form, natural};
      continue;
    }
    if (node.kind == NodeKind::kControl) {
      const AffineForm form = AffineForm::variable(dim, n + node.index);
      bounds[id] = {form, form, box[n + node.index]};
      continue;
    }
    kids.clear();
    for (int c : node.children) kids.push_back(bounds[c]);
    bounds[id] = relax_primitive(node, kids, box);
  }
  std::vector<AffineBound> out;
  for (int id : f.outputs()) out.push_back(bounds[id]);
  return out;
}

// ---------------------------------------------------------------------------
// Transition bounds

std::string to_string(BoundMode mode) {
  return mode == BoundMode::kAffine ? "affine" : "constant";
}

BoundMode parse_bound_mode(std::string_view text) {
  if (text == "affine") return BoundMode::kAffine;
  if (text == "constant") return BoundMode::kConstant;
  throw_invalid("mode: expected 'affine' or 'constant', got '" + std::string(text) + "'");
}

Box joint_box(const SystemSpec& spec, const Region& region, const Box* control) {
  Box box = region.box();
  const Box& u = control ? *control : spec.control_box;
  if (u.size() != spec.control_box.size()) throw_invalid("joint_box: control dimension mismatch");
  box.insert(box.end(), u.begin(), u.end());
  return box;
}

std::vector<double> joint_point(const Partition& partition, std::span<const double> x,
                                std::span<const double> u) {
  const Eigen::VectorXd xw = partition.whitening.apply(x);
  std::vector<double> z(xw.data(), xw.data() + xw.size());
  z.insert(z.end(), u.begin(), u.end());
  return z;
}

std::size_t BoundsMatrix::active_entries() const {
  std::size_t total = 0;
  for (const auto& r : rows) total += r.entries.size();
  return total;
}

AffineBound BoundsRow::entry(const Partition& partition, int j) const {
  const int dim = static_cast<int>(box.size());
  auto it = std::lower_bound(entries.begin(), entries.end(), j,
                             [](const BoundEntry& e, int d) { return e.dest < d; });
  if (it != entries.end() && it->dest == j) return it->bound;
  const std::vector<int> c = partition.cell_coords(partition.regions[j].cell);
  double tau = 1.0;
  for (std::size_t d = 0; d < c.size(); ++d) tau *= factor_hi[d][c[d]];
  return AffineBound::constant(dim, 0.0, tau);
}

namespace {

struct Factor {
  AffineBound bound;
  double hi = 0.0;
};

}  // namespace

namespace {

// Product of per-dimension window factors, clipped to [0, 1].
AffineBound product_bound(const std::vector<const AffineBound*>& fs, const Box& box, BoundMode mode) {
  const int dim = static_cast<int>(box.size());
  AffineBound acc = *fs[0];
  for (std::size_t d = 1; d < fs.size(); ++d) {
    if (mode == BoundMode::kAffine) {
      acc = relax_product(acc, *fs[d], box);
    } else {
      const Interval r = acc.range * fs[d]->range;
      acc = AffineBound::constant(dim, r.lo, r.hi);
    }
  }
  acc.range = intersect(acc.range, {0.0, 1.0});
  if (acc.range.empty()) acc.range = {0.0, 1.0};
  return acc;
}

}  // namespace

BoundsRow bound_row(const SystemSpec& spec, const Partition& partition, int i, BoundMode mode,
                    const Box* control) {
  const Region& region = partition.regions.at(i);
  const int n = spec.n;
  const Box box = joint_box(spec, region, control);
  const int dim = static_cast<int>(box.size());

  BoundsRow row;
  row.source = i;
  row.box = box;

  // y = T f(z), bounded per dimension.
  const std::vector<AffineBound> fb = relax_graph(spec.f, partition.whitening.t_inverse, box);
  std::vector<AffineBound> yb(n);
  for (int d = 0; d < n; ++d) {
    AffineBound y{AffineForm(dim), AffineForm(dim), Interval{0.0}};
    for (int k = 0; k < n; ++k) {
      const double t = partition.whitening.t(d, k);
      if (t == 0.0) continue;
      y.lower += t * (t >= 0.0 ? fb[k].lower : fb[k].upper);
      y.upper += t * (t >= 0.0 ? fb[k].upper : fb[k].lower);
      y.range = y.range + t * fb[k].range;
    }
    const Interval natural = y.range;
    widen(y, box);
    settle_range(y, natural, box);
    yb[d] = y;
  }

  // Per-dimension window factors, one per grid coordinate.
  std::vector<std::vector<Factor>> factors(n);
  std::vector<std::vector<int>> active(n);
  row.factor_hi.resize(n);
  for (int d = 0; d < n; ++d) {
    const int count = partition.grid_counts[d];
    factors[d].resize(count);
    row.factor_hi[d].resize(count);
    for (int c = 0; c < count; ++c) {
      const Interval win = partition.cell_interval(d, c);
      const ScalarRelaxation g = relax_window(yb[d].range, win.lo, win.hi);
      Factor& fac = factors[d][c];
      fac.hi = g.range.hi;
      row.factor_hi[d][c] = g.range.hi;
      if (fac.hi < kTailThreshold) continue;
      active[d].push_back(c);
      if (mode == BoundMode::kAffine) {
        fac.bound = compose(g, yb[d]);
        widen(fac.bound, box);
        settle_range(fac.bound, g.range, box);
      } else {
        fac.bound = AffineBound::constant(dim, g.range.lo, g.range.hi);
      }
    }
  }

  // Mass of cells outside the active product, telescoped per dimension:
  // prod(S) - prod(A) = sum_d I_d * prod_{e<d} A_e * prod_{e>d} S_e.
  std::vector<double> sum_active(n, 0.0), sum_inactive(n, 0.0);
  for (int d = 0; d < n; ++d) {
    std::vector<char> is_active(partition.grid_counts[d], 0);
    for (int c : active[d]) is_active[c] = 1;
    for (int c = 0; c < partition.grid_counts[d]; ++c) {
      (is_active[c] ? sum_active[d] : sum_inactive[d]) += row.factor_hi[d][c];
    }
  }
  double tail = 0.0;
  for (int d = 0; d < n; ++d) {
    double term = sum_inactive[d];
    for (int e = 0; e < d; ++e) term *= sum_active[e];
    for (int e = d + 1; e < n; ++e) term *= sum_active[e] + sum_inactive[e];
    tail += term;
  }
  // Excluded cells belong to the unsafe set, not to the tail.
  for (int cell : partition.obstacle_cells) {
    const std::vector<int> c = partition.cell_coords(cell);
    bool inside = true;
    double tau = 1.0;
    for (int d = 0; d < n; ++d) {
      tau *= row.factor_hi[d][c[d]];
      inside = inside && row.factor_hi[d][c[d]] >= kTailThreshold;
    }
    if (!inside) tail -= tau;
  }
  tail = std::max(0.0, tail);

  // Destinations in the active product.
  struct Excluded {
    std::vector<int> coords;
    double tau;
  };
  std::vector<Excluded> excluded_active;
  bool empty = false;
  for (int d = 0; d < n; ++d) empty = empty || active[d].empty();
  std::vector<int> pick(n, 0), coords(n);
  while (!empty) {
    for (int d = 0; d < n; ++d) coords[d] = active[d][pick[d]];
    const int j = partition.cell_region[partition.cell_id(coords)];
    double tau = 1.0;
    for (int d = 0; d < n; ++d) tau *= factors[d][coords[d]].hi;
    if (j < 0 || tau < kTailThreshold) {
      if (j < 0) excluded_active.push_back({coords, tau});
      else tail += tau;
    } else {
      std::vector<const AffineBound*> fs(n);
      for (int d = 0; d < n; ++d) fs[d] = &factors[d][coords[d]].bound;
      row.entries.push_back({j, product_bound(fs, box, mode)});
    }
    int d = n - 1;
    while (d >= 0 && pick[d] + 1 >= static_cast<int>(active[d].size())) pick[d--] = 0;
    if (d < 0) break;
    ++pick[d];
  }
  row.tail_mass = tail;

  // Unsafe entry, first by complement of the regions.
  AffineBound& u = row.unsafe;
  u.lower = AffineForm(dim, 1.0 - tail);
  u.upper = AffineForm(dim, 1.0);
  double hi_sum = tail, lo_sum = 0.0;
  for (const auto& e : row.entries) {
    u.lower -= e.bound.upper;
    u.upper -= e.bound.lower;
    hi_sum += e.bound.range.hi;
    lo_sum += e.bound.range.lo;
  }

  // Then directly: mass outside the grid box plus mass in excluded cells.
  std::vector<AffineBound> hull(n);
  std::vector<const AffineBound*> hull_ptr(n);
  for (int d = 0; d < n; ++d) {
    const Interval g_box = partition.grid_box[d];
    const ScalarRelaxation g = relax_window(yb[d].range, g_box.lo, g_box.hi);
    if (mode == BoundMode::kAffine) {
      hull[d] = compose(g, yb[d]);
      widen(hull[d], box);
      settle_range(hull[d], g.range, box);
    } else {
      hull[d] = AffineBound::constant(dim, g.range.lo, g.range.hi);
    }
    hull_ptr[d] = &hull[d];
  }
  const AffineBound inside = product_bound(hull_ptr, box, mode);
  AffineBound direct{AffineForm(dim, 1.0), AffineForm(dim, 1.0), Interval{0.0}};
  direct.lower -= inside.upper;
  direct.upper -= inside.lower;
  double direct_lo = 1.0 - inside.range.hi, direct_hi = 1.0 - inside.range.lo;
  std::vector<char> seen(partition.cell_count(), 0);
  for (const auto& ex : excluded_active) {
    const int cell = partition.cell_id(ex.coords);
    seen[cell] = 1;
    if (ex.tau < kTailThreshold) {
      direct.upper += AffineForm(dim, ex.tau);
      direct_hi += ex.tau;
      continue;
    }
    std::vector<const AffineBound*> fs(n);
    for (int d = 0; d < n; ++d) fs[d] = &factors[d][ex.coords[d]].bound;
    const AffineBound cb = product_bound(fs, box, mode);
    direct.lower += cb.lower;
    direct.upper += cb.upper;
    direct_lo += cb.range.lo;
    direct_hi += cb.range.hi;
  }
  for (int cell : partition.obstacle_cells) {
    if (seen[cell]) continue;
    const std::vector<int> c = partition.cell_coords(cell);
    double tau = 1.0;
    for (int d = 0; d < n; ++d) tau *= row.factor_hi[d][c[d]];
    direct.upper += AffineForm(dim, tau);
    direct_hi += tau;
  }
  if (direct.upper.max_over(box) < u.upper.max_over(box)) u.upper = direct.upper;
  if (direct.lower.min_over(box) > u.lower.min_over(box)) u.lower = direct.lower;

  const double lo = std::max({0.0, u.lower.min_over(box), 1.0 - hi_sum, direct_lo});
  const double hi = std::min({1.0, u.upper.max_over(box), 1.0 - lo_sum, direct_hi});
  u.range = lo <= hi ? Interval{lo, hi} : Interval{std::max(0.0, hi), std::max(0.0, hi)};
  return row;
}

BoundsMatrix bound_all(const SystemSpec& spec, const Partition& partition, BoundMode mode) {
  BoundsMatrix bm;
  bm.mode = mode;
  bm.n = spec.n;
  bm.m = spec.m;
  bm.rows.resize(partition.regions.size());
  parallel_for(partition.regions.size(), [&](std::size_t i) {
    bm.rows[i] = bound_row(spec, partition, static_cast<int>(i), mode);
  });
  return bm;
}

AffineBound bound_transition(const SystemSpec& spec, const Partition& partition, int i, int j,
                             BoundMode mode) {
  const BoundsRow row = bound_row(spec, partition, i, mode);
  if (j < 0) return row.unsafe;
  if (j >= partition.size()) throw_invalid("bound_transition: destination out of range");
  return row.entry(partition, j);
}

}  // namespace scbf
