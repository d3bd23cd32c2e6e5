#include "scbf/controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "scbf/error.hpp"
#include "scbf/parallel.hpp"

namespace scbf {

namespace {

// x-part of a form over z = (x_w, u) optimized over the region box; the
// u-part is kept.
AffineForm fold_form(const AffineForm& f, const Box& box, int n, int m, bool lower) {
  AffineForm out(m, f.offset());
  double mag = std::fabs(f.offset());
  for (int k = 0; k < n; ++k) {
    const double a = f.coeff(k) * box[k].lo;
    const double b = f.coeff(k) * box[k].hi;
    out.offset() += lower ? std::min(a, b) : std::max(a, b);
    mag += std::max(std::fabs(a), std::fabs(b));
  }
  for (int d = 0; d < m; ++d) out.coeff(d) = f.coeff(n + d);
  const double slack = 4.0 * std::numeric_limits<double>::epsilon() * mag;
  out.offset() += lower ? -slack : slack;
  return out;
}

FoldedEntry fold_entry(int dest, const AffineBound& b, const Box& box, int n, int m) {
  return {dest, fold_form(b.lower, box, n, m, true), fold_form(b.upper, box, n, m, false), b.range};
}

constexpr double kTinyMass = 1e-12;

void entry_interval(const FoldedEntry& e, std::span<const double> u, double& lo, double& hi) {
  lo = std::max({e.lower.eval(u), e.range.lo, 0.0});
  hi = std::min({e.upper.eval(u), e.range.hi, 1.0});
  if (lo > hi) lo = hi;
  if (lo < kTinyMass) lo = 0.0;  // keeps the LP coefficients well scaled
}

FoldedRow fold_row(const BoundsRow& row, int n, int m) {
  FoldedRow fr;
  fr.tail_mass = row.tail_mass;
  double lo_sum = 0.0, hi_sum = 0.0;
  for (const auto& e : row.entries) {
    fr.entries.push_back(fold_entry(e.dest, e.bound, row.box, n, m));
    lo_sum += e.bound.range.lo;
    hi_sum += e.bound.range.hi;
  }
  fr.unsafe = fold_entry(-1, row.unsafe, row.box, n, m);
  fr.merged = fr.unsafe;
  fr.merged.upper += row.tail_mass;  // the direct unsafe form leaves out truncated regions
  fr.merged.range = {std::max({0.0, row.unsafe.range.lo, 1.0 - hi_sum}),
                     std::min(1.0, 1.0 - lo_sum)};
  if (fr.merged.range.empty()) fr.merged.range = {fr.merged.range.hi, fr.merged.range.hi};
  return fr;
}

}  // namespace

FoldedBounds fold_x(const BoundsMatrix& bounds, const Partition& partition) {
  FoldedBounds out;
  out.m = bounds.m;
  const int n = bounds.n;
  const int m = bounds.m;
  out.rows.resize(bounds.rows.size());
  for (std::size_t i = 0; i < bounds.rows.size(); ++i) {
    const BoundsRow& row = bounds.rows[i];
    if (row.box.size() != static_cast<std::size_t>(n + m) ||
        row.source != partition.regions.at(i).index) {
      throw_mismatch("fold_x: bounds do not belong to this partition");
    }
    out.rows[i] = fold_row(row, n, m);
  }
  return out;
}

RowBox row_box(const FoldedRow& row, std::span<const double> u) {
  RowBox box;
  const std::size_t k = row.entries.size() + 1;
  box.dest.reserve(k);
  box.lo.reserve(k);
  box.hi.reserve(k);
  double lo, hi;
  for (const auto& e : row.entries) {
    entry_interval(e, u, lo, hi);
    box.dest.push_back(e.dest);
    box.lo.push_back(lo);
    box.hi.push_back(hi);
  }
  entry_interval(row.merged, u, lo, hi);
  box.dest.push_back(-1);
  box.lo.push_back(lo);
  box.hi.push_back(hi);
  return box;
}

RowBox row_box_dense(const FoldedRow& row, const BoundsRow& bounds, const Partition& partition,
                     std::span<const double> u) {
  RowBox box;
  std::size_t next = 0;
  double lo, hi;
  for (int j = 0; j < partition.size(); ++j) {
    if (next < row.entries.size() && row.entries[next].dest == j) {
      entry_interval(row.entries[next++], u, lo, hi);
    } else {
      lo = 0.0;
      hi = std::min(1.0, bounds.entry(partition, j).range.hi);
    }
    box.dest.push_back(j);
    box.lo.push_back(lo);
    box.hi.push_back(hi);
  }
  entry_interval(row.unsafe, u, lo, hi);
  box.dest.push_back(-1);
  box.lo.push_back(lo);
  box.hi.push_back(hi);
  return box;
}

GreedyResult greedy_inner(std::span<const double> bbar, std::span<const double> lo,
                          std::span<const double> hi) {
  const std::size_t k = bbar.size();
  if (lo.size() != k || hi.size() != k) throw_invalid("greedy_inner: size mismatch");
  double lo_sum = 0.0, hi_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (lo[i] > hi[i] + 1e-12) throw_internal("bounds inconsistent: lo > hi at entry " + std::to_string(i));
    lo_sum += lo[i];
    hi_sum += hi[i];
  }
  if (lo_sum > 1.0 + 1e-9 || hi_sum < 1.0 - 1e-9) {
    std::ostringstream msg;
    msg << "bounds inconsistent: sum(lo) = " << lo_sum << ", sum(hi) = " << hi_sum;
    throw_internal(msg.str());
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return bbar[a] > bbar[b]; });
  GreedyResult res;
  res.t.assign(lo.begin(), lo.end());
  double remaining = 1.0 - lo_sum;
  for (int idx : order) {
    if (remaining <= 0.0) break;
    const double add = std::min(std::max(0.0, hi[idx] - lo[idx]), remaining);
    res.t[idx] += add;
    remaining -= add;
    res.split = idx;
  }
  double v = 0.0;
  for (std::size_t i = 0; i < k; ++i) v += bbar[i] * res.t[i];
  res.value = v;
  return res;
}

std::vector<double> row_weights(const RowBox& box, std::span<const double> b) {
  std::vector<double> w(box.size());
  for (std::size_t k = 0; k < box.size(); ++k) w[k] = box.dest[k] < 0 ? 1.0 : b[box.dest[k]];
  return w;
}

double worst_case_value(const FoldedRow& row, std::span<const double> b,
                        std::span<const double> u) {
  const RowBox box = row_box(row, u);
  const std::vector<double> w = row_weights(box, b);
  try {
    return greedy_inner(w, box.lo, box.hi).value;
  } catch (const Error&) {
    return 1.0 + std::accumulate(w.begin(), w.end(), 0.0);
  }
}

std::vector<std::vector<double>> control_candidates(const Box& control_box) {
  const int m = static_cast<int>(control_box.size());
  std::vector<std::vector<double>> out;
  out.push_back(box_center(control_box));
  if (m > 16) throw_invalid("control dimension too large for corner enumeration");
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<double> u(m);
    for (int d = 0; d < m; ++d) u[d] = (mask >> d) & 1 ? control_box[d].hi : control_box[d].lo;
    if (u != out.front()) out.push_back(std::move(u));
  }
  return out;
}

ControlChoice choose_control(const FoldedRow& row, std::span<const double> b,
                             const std::vector<std::vector<double>>& candidates,
                             std::optional<int> preferred) {
  if (candidates.empty()) throw_invalid("choose_control: no candidates");
  ControlChoice best;
  best.candidate = preferred.value_or(0);
  best.u = candidates.at(best.candidate);
  best.value = worst_case_value(row, b, best.u);
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    if (c == best.candidate) continue;
    const double v = worst_case_value(row, b, candidates[c]);
    if (v < best.value - 1e-12) {
      best.value = v;
      best.u = candidates[c];
      best.candidate = c;
    }
  }
  return best;
}

ControlChoice choose_control(const std::vector<RowBox>& boxes, std::span<const double> b,
                             const std::vector<std::vector<double>>& candidates,
                             std::optional<int> preferred) {
  if (candidates.empty() || boxes.size() != candidates.size()) {
    throw_invalid("choose_control: one box per candidate expected");
  }
  auto value = [&](int c) {
    const RowBox& box = boxes[c];
    return greedy_inner(row_weights(box, b), box.lo, box.hi).value;
  };
  ControlChoice best;
  best.candidate = preferred.value_or(0);
  best.value = value(best.candidate);
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    if (c == best.candidate) continue;
    const double v = value(c);
    if (v < best.value - 1e-12) {
      best.value = v;
      best.candidate = c;
    }
  }
  best.u = candidates[best.candidate];
  return best;
}

PinnedRows pin_candidates(const SystemSpec& spec, const Partition& partition,
                          const BoundsMatrix& bounds, const FoldedBounds& folded,
                          const std::vector<std::vector<double>>& candidates, bool dense) {
  const int k = partition.size();
  if (bounds.size() != k || static_cast<int>(folded.rows.size()) != k) {
    throw_mismatch("pin_candidates: bounds do not match the partition");
  }
  PinnedRows out;
  out.rows.assign(k, std::vector<RowBox>(candidates.size()));
  const std::size_t work = static_cast<std::size_t>(k) * candidates.size();
  parallel_for(work, [&](std::size_t w) {
    const int i = static_cast<int>(w / candidates.size());
    const std::size_t c = w % candidates.size();
    const std::vector<double>& u = candidates[c];
    Box pin(u.size());
    for (std::size_t d = 0; d < u.size(); ++d) pin[d] = {u[d], u[d]};

    BoundsMatrix one;
    one.mode = bounds.mode;
    one.n = bounds.n;
    one.m = bounds.m;
    one.rows.push_back(bound_row(spec, partition, i, bounds.mode, &pin));
    one.rows[0].source = i;
    const FoldedRow prow = fold_row(one.rows[0], bounds.n, bounds.m);

    RowBox tight = dense ? row_box_dense(prow, one.rows[0], partition, u) : row_box(prow, u);
    const RowBox loose = dense ? row_box_dense(folded.rows[i], bounds.rows[i], partition, u)
                               : row_box(folded.rows[i], u);
    // Intersect entries naming the same region (the merged entries cover
    // different sets in the sparse form and are kept as they are).
    std::size_t q = 0;
    for (std::size_t e = 0; e < tight.size(); ++e) {
      const int dest = tight.dest[e];
      if (dest < 0) {
        if (dense && loose.dest.back() < 0) {
          const double lo = std::max(tight.lo[e], loose.lo.back());
          const double hi = std::min(tight.hi[e], loose.hi.back());
          if (lo <= hi) {
            tight.lo[e] = lo;
            tight.hi[e] = hi;
          }
        }
        continue;
      }
      while (q + 1 < loose.size() && loose.dest[q] < dest) ++q;  // the unsafe entry is last
      if (q < loose.size() && loose.dest[q] == dest) {
        const double lo = std::max(tight.lo[e], loose.lo[q]);
        const double hi = std::min(tight.hi[e], loose.hi[q]);
        if (lo <= hi) {
          tight.lo[e] = lo;
          tight.hi[e] = hi;
        }
      }
    }
    out.rows[i][c] = std::move(tight);
  });
  return out;
}

std::vector<double> extract_control(int i, std::span<const double> b, const FoldedBounds& folded,
                                    const Box& control_box) {
  return choose_control(folded.rows.at(i), b, control_candidates(control_box)).u;
}

std::vector<double> default_fallback(const Box& control_box) {
  std::vector<double> u(control_box.size());
  for (std::size_t d = 0; d < u.size(); ++d) u[d] = std::clamp(0.0, control_box[d].lo, control_box[d].hi);
  return u;
}

std::vector<double> lookup(const Controller& controller, const Partition& partition,
                           std::span<const double> x) {
  const auto r = partition.locate(x);
  if (!r) return controller.fallback;
  return controller.controls.at(*r);
}

// ---------------------------------------------------------------------------
// CSV

std::string PartitionTag::to_string() const {
  std::string g;
  for (std::size_t d = 0; d < grid.size(); ++d) g += (d ? "x" : "") + std::to_string(grid[d]);
  return "#grid=" + g + ";regions=" + std::to_string(regions) +
         ";state_dim=" + std::to_string(state_dim) + ";control_dim=" + std::to_string(control_dim);
}

PartitionTag PartitionTag::parse(std::string_view line) {
  if (line.empty() || line.front() != '#') throw_mismatch("missing partition metadata line");
  PartitionTag tag;
  bool seen_grid = false, seen_regions = false, seen_n = false, seen_m = false;
  std::string body(line.substr(1));
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    try {
      if (key == "grid") {
        tag.grid = parse_grid_counts(val);
        seen_grid = true;
      } else if (key == "regions") {
        tag.regions = std::stoi(val);
        seen_regions = true;
      } else if (key == "state_dim") {
        tag.state_dim = std::stoi(val);
        seen_n = true;
      } else if (key == "control_dim") {
        tag.control_dim = std::stoi(val);
        seen_m = true;
      }
    } catch (const std::logic_error&) {
      throw_mismatch("malformed partition metadata '" + std::string(line) + "'");
    }
  }
  if (!(seen_grid && seen_regions && seen_n && seen_m)) {
    throw_mismatch("incomplete partition metadata '" + std::string(line) + "'");
  }
  return tag;
}

PartitionTag PartitionTag::of(const Partition& partition, int control_dim) {
  return {partition.grid_counts, partition.size(), partition.dim(), control_dim};
}

void check_tag(const PartitionTag& tag, const Partition& partition, int control_dim) {
  const PartitionTag want = PartitionTag::of(partition, control_dim);
  if (tag.grid != want.grid || tag.regions != want.regions || tag.state_dim != want.state_dim ||
      tag.control_dim != want.control_dim) {
    throw_mismatch("partition mismatch: file has '" + tag.to_string().substr(1) +
                   "', config gives '" + want.to_string().substr(1) + "'");
  }
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_num(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() && s.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw_invalid("controller csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace

void write_controller_csv(std::ostream& out, const Controller& controller,
                          const Partition& partition) {
  const int m = controller.controls.empty() ? static_cast<int>(controller.fallback.size())
                                            : static_cast<int>(controller.controls.front().size());
  out << PartitionTag::of(partition, m).to_string() << '\n';
  out << "region_index";
  for (int d = 1; d <= m; ++d) out << ",u_" << d;
  out << '\n';
  for (int i = 0; i < controller.size(); ++i) {
    out << i + 1;
    for (double v : controller.controls[i]) out << ',' << num(v);
    out << '\n';
  }
}

ControllerFile read_controller_csv(std::istream& in) {
  ControllerFile file;
  std::string line;
  if (!std::getline(in, line)) throw_mismatch("controller csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  file.tag = PartitionTag::parse(line);
  if (!std::getline(in, line)) throw_invalid("controller csv: missing header");
  const int m = file.tag.control_dim;
  int line_no = 2;
  file.controller.controls.assign(file.tag.regions, {});
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != m + 1) {
      throw_mismatch("controller csv line " + std::to_string(line_no) + ": expected " +
                     std::to_string(m + 1) + " fields");
    }
    const int idx = static_cast<int>(parse_num(cells[0], line_no));
    if (idx < 1 || idx > file.tag.regions) {
      throw_mismatch("controller csv line " + std::to_string(line_no) + ": region index out of range");
    }
    std::vector<double> u(m);
    for (int d = 0; d < m; ++d) u[d] = parse_num(cells[d + 1], line_no);
    file.controller.controls[idx - 1] = std::move(u);
    ++rows;
  }
  if (rows != file.tag.regions) {
    throw_mismatch("controller csv: " + std::to_string(rows) + " rows for " +
                   std::to_string(file.tag.regions) + " regions");
  }
  for (const auto& u : file.controller.controls) {
    if (u.empty()) throw_mismatch("controller csv: duplicate or missing region rows");
  }
  return file;
}

}  // namespace scbf
