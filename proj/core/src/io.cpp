#include "scbf/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scbf/error.hpp"

namespace scbf {

using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::vector<std::string>& run_summary_fields() {
  static const std::vector<std::string> fields = {
      "benchmark",     "K",           "grid_counts",    "eta",          "beta",
      "p_safe",        "synth_seconds", "bound_seconds", "lp_variables", "lp_constraints",
      "mc_empirical",  "mc_lower_bound"};
  return fields;
}

std::string summary_json(const RunSummary& s) {
  ordered_json j;
  j["benchmark"] = s.benchmark;
  j["K"] = s.K;
  j["grid_counts"] = s.grid_counts;
  j["eta"] = s.eta;
  j["beta"] = s.beta;
  j["p_safe"] = s.p_safe;
  j["synth_seconds"] = opt(s.synth_seconds);
  j["bound_seconds"] = opt(s.bound_seconds);
  j["lp_variables"] = s.lp_variables;
  j["lp_constraints"] = s.lp_constraints;
  j["mc_empirical"] = opt(s.mc_empirical);
  j["mc_lower_bound"] = opt(s.mc_lower_bound);
  return j.dump(2) + "\n";
}

std::string lp_solution_json(const Barrier& barrier, const std::string& status,
                             std::optional<double> solve_seconds, int variables, int constraints) {
  ordered_json j;
  j["eta"] = barrier.eta;
  j["beta"] = barrier.beta;
  j["beta_i"] = barrier.beta_i;
  j["objective"] = barrier.objective();
  j["status"] = status;
  j["solve_seconds"] = opt(solve_seconds);
  j["variables"] = variables;
  j["constraints"] = constraints;
  j["horizon"] = barrier.horizon.to_string();
  j["p_safe"] = barrier.p_safe;
  if (barrier.horizon.infinite) j["infinite_residual"] = barrier.infinite_residual;
  return j.dump(2) + "\n";
}

std::string mc_report_json(const McReport& r, double confidence, double lower_bound) {
  ordered_json j;
  j["trials"] = r.trials;
  j["horizon"] = r.horizon;
  j["violations"] = r.violations;
  j["empirical_safety"] = r.empirical_safety;
  j["seed"] = r.seed;
  j["confidence"] = confidence;
  j["lower_bound"] = lower_bound;
  j["first_exit"] = r.first_exit;
  return j.dump(2) + "\n";
}

std::string cert_report_json(const CertReport& r) {
  ordered_json j;
  j["passed"] = r.passed;
  j["nonnegative"] = r.nonnegative;
  j["initial_ok"] = r.initial_ok;
  j["martingale_ok"] = r.martingale_ok;
  j["max_slack"] = r.max_slack;
  j["worst_region"] = r.worst_region + 1;
  j["worst_x"] = r.worst_x;
  j["samples_per_region"] = r.samples_per_region;
  j["samples"] = r.samples;
  std::vector<int> neg, init;
  for (int i : r.negative_regions) neg.push_back(i + 1);
  for (int i : r.initial_regions) init.push_back(i + 1);
  j["negative_regions"] = neg;
  j["initial_violations"] = init;
  j["region_slack"] = r.region_slack;
  return j.dump(2) + "\n";
}

void write_partition_csv(std::ostream& out, const Partition& partition, int control_dim) {
  const int n = partition.dim();
  out << PartitionTag::of(partition, control_dim).to_string() << '\n';
  out << "region_index";
  for (int d = 1; d <= n; ++d) out << ",lo_" << d;
  for (int d = 1; d <= n; ++d) out << ",hi_" << d;
  out << ",touches_initial\n";
  for (const auto& r : partition.regions) {
    out << r.index + 1;
    for (double v : r.lo) out << ',' << format_double(v);
    for (double v : r.hi) out << ',' << format_double(v);
    out << ',' << (r.touches_initial ? 1 : 0) << '\n';
  }
}

void write_barrier_csv(std::ostream& out, const Barrier& barrier, const Partition& partition,
                       int control_dim) {
  out << PartitionTag::of(partition, control_dim).to_string() << '\n';
  out << "region_index,b,beta_i,touches_initial\n";
  for (const auto& r : partition.regions) {
    out << r.index + 1 << ',' << format_double(barrier.b[r.index]) << ','
        << format_double(barrier.beta_i[r.index]) << ',' << (r.touches_initial ? 1 : 0) << '\n';
  }
}

BarrierFile read_barrier_csv(std::istream& in) {
  BarrierFile f;
  std::string line;
  if (!std::getline(in, line)) throw_mismatch("barrier csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  f.tag = PartitionTag::parse(line);
  std::getline(in, line);
  f.b.assign(f.tag.regions, -1.0);
  f.beta_i.assign(f.tag.regions, 0.0);
  std::vector<char> seen(f.tag.regions, 0);
  int count = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() < 3) throw_mismatch("barrier csv: short row '" + line + "'");
    int idx;
    try {
      idx = std::stoi(cells[0]);
      if (idx < 1 || idx > f.tag.regions || seen[idx - 1]) throw std::out_of_range("index");
      f.b[idx - 1] = std::stod(cells[1]);
      f.beta_i[idx - 1] = std::stod(cells[2]);
    } catch (const std::logic_error&) {
      throw_mismatch("barrier csv: bad row '" + line + "'");
    }
    seen[idx - 1] = 1;
    ++count;
  }
  if (count != f.tag.regions) throw_mismatch("barrier csv: row count does not match metadata");
  return f;
}

void write_bounds_csv(std::ostream& out, const BoundsMatrix& bounds) {
  const int dim = bounds.n + bounds.m;
  out << "source,dest";
  for (int d = 1; d <= dim; ++d) out << ",lo_a_" << d;
  out << ",lo_c";
  for (int d = 1; d <= dim; ++d) out << ",hi_a_" << d;
  out << ",hi_c,range_lo,range_hi\n";
  auto line = [&](int src, const std::string& dst, const AffineBound& b) {
    out << src + 1 << ',' << dst;
    for (int d = 0; d < dim; ++d) out << ',' << format_double(b.lower.coeff(d));
    out << ',' << format_double(b.lower.offset());
    for (int d = 0; d < dim; ++d) out << ',' << format_double(b.upper.coeff(d));
    out << ',' << format_double(b.upper.offset()) << ',' << format_double(b.range.lo) << ','
        << format_double(b.range.hi) << '\n';
  };
  for (const auto& row : bounds.rows) {
    for (const auto& e : row.entries) line(row.source, std::to_string(e.dest + 1), e.bound);
    line(row.source, "u", row.unsafe);
  }
}

void write_trajectory_csv(std::ostream& out, const McReport& report, int state_dim) {
  out << "trial,step";
  for (int d = 1; d <= state_dim; ++d) out << ",x_" << d;
  out << ",region_index,violated\n";
  for (const auto& p : report.trajectory) {
    out << p.trial << ',' << p.step;
    for (double v : p.x) out << ',' << format_double(v);
    out << ',' << p.region + 1 << ',' << (p.violated ? 1 : 0) << '\n';
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_invalid("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_invalid("cannot write '" + path + "'");
  out << content;
  if (!out) throw_invalid("write failed for '" + path + "'");
}

}  // namespace scbf
