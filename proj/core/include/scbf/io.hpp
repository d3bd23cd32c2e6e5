#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scbf/controller.hpp"
#include "scbf/geometry.hpp"
#include "scbf/lp.hpp"
#include "scbf/relaxation.hpp"
#include "scbf/synthesis.hpp"
#include "scbf/validation.hpp"

namespace scbf {

/// One results-table row. Optional fields serialize as null.
struct RunSummary {
  std::string benchmark;
  int K = 0;
  std::vector<int> grid_counts;
  double eta = 0.0;
  double beta = 0.0;
  double p_safe = 0.0;
  std::optional<double> synth_seconds;
  std::optional<double> bound_seconds;
  int lp_variables = 0;
  int lp_constraints = 0;
  std::optional<double> mc_empirical;
  std::optional<double> mc_lower_bound;
};

/// Field names in serialization order.
const std::vector<std::string>& run_summary_fields();

std::string summary_json(const RunSummary& summary);

/// {eta, beta, beta_i[], objective, status, solve_seconds, variables, constraints}
std::string lp_solution_json(const Barrier& barrier, const std::string& status,
                             std::optional<double> solve_seconds, int variables, int constraints);

std::string mc_report_json(const McReport& report, double confidence, double lower_bound);
std::string cert_report_json(const CertReport& report);

/// Partition tag line, then region_index,lo_1..lo_n,hi_1..hi_n,touches_initial.
void write_partition_csv(std::ostream& out, const Partition& partition, int control_dim);

/// Partition tag line, then region_index,b,beta_i,touches_initial.
void write_barrier_csv(std::ostream& out, const Barrier& barrier, const Partition& partition,
                       int control_dim);

struct BarrierFile {
  PartitionTag tag;
  std::vector<double> b;
  std::vector<double> beta_i;
};

BarrierFile read_barrier_csv(std::istream& in);

/// source,dest,lo_a_1..lo_a_d,lo_c,hi_a_1..hi_a_d,hi_c,range_lo,range_hi with
/// 1-based regions and "u" for the unsafe set; truncated entries are omitted.
void write_bounds_csv(std::ostream& out, const BoundsMatrix& bounds);

/// trial,step,x_1..x_n,region_index,violated (region_index 0 outside the regions).
void write_trajectory_csv(std::ostream& out, const McReport& report, int state_dim);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// %.17g
std::string format_double(double v);

}  // namespace scbf
