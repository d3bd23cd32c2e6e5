#include "scbf/geometry.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "scbf/error.hpp"

namespace scbf {

Eigen::VectorXd Whitening::apply(std::span<const double> x) const {
  Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  return t * v;
}

Eigen::VectorXd Whitening::unapply(std::span<const double> xw) const {
  Eigen::Map<const Eigen::VectorXd> v(xw.data(), static_cast<Eigen::Index>(xw.size()));
  return t_inverse * v;
}

namespace {

Box map_box(const Eigen::MatrixXd& a, const Box& box) {
  const auto n = static_cast<int>(box.size());
  Box out(n);
  for (int r = 0; r < n; ++r) {
    Interval acc{0.0};
    for (int c = 0; c < n; ++c) acc = acc + a(r, c) * box[c];
    out[r] = acc;
  }
  return out;
}

}  // namespace

Box Whitening::image(const Box& box) const { return map_box(t, box); }
Box Whitening::preimage(const Box& box) const { return map_box(t_inverse, box); }

Whitening whiten(const Eigen::MatrixXd& sigma) {
  const auto n = sigma.rows();
  if (n == 0 || sigma.cols() != n) throw_invalid("whiten: covariance must be square");
  Whitening w;
  const Eigen::MatrixXd off = sigma - Eigen::MatrixXd(sigma.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() == 0.0) {
    if (sigma.diagonal().minCoeff() <= 0.0) throw_invalid("covariance not positive-definite");
    w.t = sigma.diagonal().cwiseSqrt().cwiseInverse().asDiagonal();
    w.t_inverse = sigma.diagonal().cwiseSqrt().asDiagonal();
    w.diagonal = true;
    return w;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw_invalid("covariance not positive-definite");
  }
  const Eigen::VectorXd g = eig.eigenvalues();
  const Eigen::MatrixXd& v = eig.eigenvectors();
  w.t = g.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  w.t_inverse = v * g.cwiseSqrt().asDiagonal();
  return w;
}

Box Region::box() const {
  Box b(lo.size());
  for (std::size_t d = 0; d < lo.size(); ++d) b[d] = {lo[d], hi[d]};
  return b;
}

std::vector<int> Partition::cell_coords(int cell) const {
  std::vector<int> c(grid_counts.size());
  for (int d = dim() - 1; d >= 0; --d) {
    c[d] = cell % grid_counts[d];
    cell /= grid_counts[d];
  }
  return c;
}

int Partition::cell_id(std::span<const int> coords) const {
  int id = 0;
  for (int d = 0; d < dim(); ++d) id = id * grid_counts[d] + coords[d];
  return id;
}

Interval Partition::cell_interval(int d, int c) const {
  const double lo = grid_box[d].lo + c * cell_width[d];
  const double hi = (c + 1 == grid_counts[d]) ? grid_box[d].hi : grid_box[d].lo + (c + 1) * cell_width[d];
  return {lo, hi};
}

std::optional<int> Partition::locate(std::span<const double> x) const {
  const Eigen::VectorXd xw = whitening.apply(x);
  const int n = dim();
  // Candidate coordinates per dimension: one, or two on a shared face.
  std::vector<std::array<int, 2>> cand(n);
  std::vector<int> count(n);
  for (int d = 0; d < n; ++d) {
    const double v = xw[d];
    if (!(grid_box[d].lo <= v && v <= grid_box[d].hi)) return std::nullopt;
    int c = static_cast<int>(std::floor((v - grid_box[d].lo) / cell_width[d]));
    c = std::clamp(c, 0, grid_counts[d] - 1);
    // Settle rounding against the stored cell bounds.
    while (c > 0 && v < cell_interval(d, c).lo) --c;
    while (c + 1 < grid_counts[d] && v > cell_interval(d, c).hi) ++c;
    if (c > 0 && v == cell_interval(d, c).lo) {
      cand[d] = {c - 1, c};
      count[d] = 2;
    } else if (c + 1 < grid_counts[d] && v == cell_interval(d, c).hi) {
      cand[d] = {c, c + 1};
      count[d] = 2;
    } else {
      cand[d] = {c, c};
      count[d] = 1;
    }
  }
  // Enumerate combinations in ascending flat order (last dimension fastest).
  std::vector<int> pick(n, 0), coords(n);
  while (true) {
    for (int d = 0; d < n; ++d) coords[d] = cand[d][pick[d]];
    const int r = cell_region[cell_id(coords)];
    if (r >= 0) return r;
    int d = n - 1;
    while (d >= 0 && pick[d] + 1 >= count[d]) pick[d--] = 0;
    if (d < 0) break;
    ++pick[d];
  }
  return std::nullopt;
}

std::string Partition::grid_label() const {
  std::string s;
  for (std::size_t d = 0; d < grid_counts.size(); ++d) {
    if (d) s += 'x';
    s += std::to_string(grid_counts[d]);
  }
  return s;
}

std::vector<int> Partition::initial_regions() const {
  std::vector<int> out;
  for (const auto& r : regions) {
    if (r.touches_initial) out.push_back(r.index);
  }
  return out;
}

namespace {

bool open_overlap(const Box& a, const Box& b) {
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (!(std::max(a[d].lo, b[d].lo) < std::min(a[d].hi, b[d].hi))) return false;
  }
  return true;
}

bool closed_overlap(const Box& a, const Box& b) {
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (std::max(a[d].lo, b[d].lo) > std::min(a[d].hi, b[d].hi)) return false;
  }
  return true;
}

// Preimage of a whitened cell lies inside the domain: check every corner
// (the domain is convex and the map is linear).
bool corners_inside(const Whitening& w, const Box& cell, const Box& domain) {
  const int n = static_cast<int>(cell.size());
  std::vector<double> corner(n);
  for (int mask = 0; mask < (1 << n); ++mask) {
    for (int d = 0; d < n; ++d) corner[d] = (mask >> d) & 1 ? cell[d].hi : cell[d].lo;
    const Eigen::VectorXd x = w.unapply(corner);
    for (int d = 0; d < n; ++d) {
      const double slack = 1e-12 * std::max(1.0, std::fabs(x[d]));
      if (x[d] < domain[d].lo - slack || x[d] > domain[d].hi + slack) return false;
    }
  }
  return true;
}

}  // namespace

Partition build_partition(const SystemSpec& spec, std::span<const int> grid_counts) {
  const int n = spec.n;
  if (static_cast<int>(grid_counts.size()) != n) {
    throw_invalid("grid: expected " + std::to_string(n) + " counts, got " +
                  std::to_string(grid_counts.size()));
  }
  long total = 1;
  for (int c : grid_counts) {
    if (c < 1) throw_invalid("grid: counts must be >= 1");
    total *= c;
    if (total > 50'000'000) throw_invalid("grid: too many cells");
  }

  Partition p;
  p.grid_counts.assign(grid_counts.begin(), grid_counts.end());
  p.whitening = whiten(spec.sigma);
  p.grid_box = p.whitening.image(spec.domain_box);
  p.cell_width.resize(n);
  for (int d = 0; d < n; ++d) p.cell_width[d] = p.grid_box[d].width() / grid_counts[d];

  std::vector<Box> white_obstacles;
  for (const auto& ob : spec.obstacles) white_obstacles.push_back(p.whitening.image(ob));

  p.cell_region.assign(static_cast<std::size_t>(total), -1);
  std::vector<int> coords(n);
  for (int cell = 0; cell < total; ++cell) {
    coords = p.cell_coords(cell);
    Box cb(n);
    for (int d = 0; d < n; ++d) cb[d] = p.cell_interval(d, coords[d]);

    bool excluded = !p.whitening.diagonal && !corners_inside(p.whitening, cb, spec.domain_box);
    const Box pre = p.whitening.diagonal ? Box{} : p.whitening.preimage(cb);
    for (std::size_t k = 0; k < spec.obstacles.size() && !excluded; ++k) {
      excluded = p.whitening.diagonal ? open_overlap(cb, white_obstacles[k])
                                      : open_overlap(pre, spec.obstacles[k]);
    }
    if (excluded) {
      p.obstacle_cells.push_back(cell);
      continue;
    }
    Region r;
    r.index = static_cast<int>(p.regions.size());
    r.cell = cell;
    r.lo.resize(n);
    r.hi.resize(n);
    for (int d = 0; d < n; ++d) {
      r.lo[d] = cb[d].lo;
      r.hi[d] = cb[d].hi;
    }
    const Box xbox = p.whitening.diagonal ? p.whitening.preimage(cb) : pre;
    r.touches_initial = closed_overlap(xbox, spec.initial_box);
    p.cell_region[cell] = r.index;
    p.regions.push_back(std::move(r));
  }

  // Snapped obstacles must leave the initial set inside safe regions.
  for (int cell : p.obstacle_cells) {
    coords = p.cell_coords(cell);
    Box cb(n);
    for (int d = 0; d < n; ++d) cb[d] = p.cell_interval(d, coords[d]);
    if (open_overlap(p.whitening.preimage(cb), spec.initial_box)) {
      std::ostringstream msg;
      msg << "grid " << p.grid_label()
          << ": excluded cells overlap the initial set; obstacles are not representable as "
             "whole cells at this resolution (try a finer grid, e.g. ";
      for (int d = 0; d < n; ++d) msg << (d ? "," : "") << 2 * grid_counts[d];
      msg << ")";
      throw_invalid(msg.str());
    }
  }
  if (p.regions.empty()) throw_invalid("grid " + p.grid_label() + ": no safe regions");
  return p;
}

std::vector<int> parse_grid_counts(std::string_view text) {
  std::vector<int> out;
  int cur = -1;
  for (char c : text) {
    if (c >= '0' && c <= '9') {
      cur = (cur < 0 ? 0 : cur) * 10 + (c - '0');
    } else if (c == ',' || c == 'x' || c == 'X') {
      if (cur < 1) throw_invalid("grid: malformed counts '" + std::string(text) + "'");
      out.push_back(cur);
      cur = -1;
    } else if (c != ' ') {
      throw_invalid("grid: malformed counts '" + std::string(text) + "'");
    }
  }
  if (cur < 1) throw_invalid("grid: malformed counts '" + std::string(text) + "'");
  out.push_back(cur);
  return out;
}

}  // namespace scbf
