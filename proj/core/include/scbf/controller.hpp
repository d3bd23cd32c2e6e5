#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scbf/geometry.hpp"
#include "scbf/relaxation.hpp"
#include "scbf/system.hpp"

namespace scbf {

/// Bounds of one kernel entry with x eliminated: affine in u alone.
struct FoldedEntry {
  int dest = 0;       // region index, or -1 for the unsafe set
  AffineForm lower;   // over u (dimension m)
  AffineForm upper;
  Interval range;     // enclosure of the entry over the whole region x U
};

struct FoldedRow {
  std::vector<FoldedEntry> entries;  // active destinations, ascending
  FoldedEntry unsafe;                // unsafe set alone
  FoldedEntry merged;                // unsafe set plus truncated destinations
  double tail_mass = 0.0;
};

struct FoldedBounds {
  int m = 0;
  std::vector<FoldedRow> rows;
};

/// Lower forms take the minimum of their x-part over the region box, upper
/// forms the maximum, so for all x in X_i: lower(u) <= T(X_j | x, u) <= upper(u).
FoldedBounds fold_x(const BoundsMatrix& bounds, const Partition& partition);

/// Box-and-simplex description of a kernel row at one control value.
struct RowBox {
  std::vector<int> dest;  // region index per entry, -1 for the unsafe entry (last)
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t size() const { return dest.size(); }
};

/// Row at control u. The sparse form lists the active destinations and the
/// merged unsafe entry; the dense form lists every region plus the unsafe
/// set (truncated destinations get [0, tail bound]; needs the bounds row).
RowBox row_box(const FoldedRow& row, std::span<const double> u);
RowBox row_box_dense(const FoldedRow& row, const BoundsRow& bounds, const Partition& partition,
                     std::span<const double> u);

struct GreedyResult {
  double value = 0.0;
  std::vector<double> t;  // maximizing vertex
  int split = -1;         // entry that received the last partial fill
};

/// max bbar^T T subject to lo <= T <= hi, sum T = 1. Fills from lo in
/// descending bbar order, ties to the lowest index.
GreedyResult greedy_inner(std::span<const double> bbar, std::span<const double> lo,
                          std::span<const double> hi);

/// bbar for a row: b[dest] for regions, 1 for the unsafe entry.
std::vector<double> row_weights(const RowBox& box, std::span<const double> b);

/// Worst-case expected barrier value V_i(u) = greedy_inner(bbar, lo(u), hi(u)).
/// Infeasible boxes score 1 + sum(bbar).
double worst_case_value(const FoldedRow& row, std::span<const double> b,
                        std::span<const double> u);

/// Box center first, then the 2^m corners (bit d of the corner index selects
/// the upper end of coordinate d).
std::vector<std::vector<double>> control_candidates(const Box& control_box);

struct ControlChoice {
  std::vector<double> u;
  double value = 0.0;
  int candidate = 0;
};

/// Minimizes V_i over the candidates. A candidate replaces the incumbent only
/// when it is better by more than 1e-12; the incumbent starts as `preferred`
/// when given, else the first candidate.
ControlChoice choose_control(const FoldedRow& row, std::span<const double> b,
                             const std::vector<std::vector<double>>& candidates,
                             std::optional<int> preferred = std::nullopt);

/// Same choice over precomputed boxes, one per candidate.
ControlChoice choose_control(const std::vector<RowBox>& boxes, std::span<const double> b,
                             const std::vector<std::vector<double>>& candidates,
                             std::optional<int> preferred = std::nullopt);

/// Kernel rows re-bounded with the control pinned to each candidate and
/// intersected with the unpinned fold at that control: rows[i][c].
struct PinnedRows {
  std::vector<std::vector<RowBox>> rows;
};

PinnedRows pin_candidates(const SystemSpec& spec, const Partition& partition,
                          const BoundsMatrix& bounds, const FoldedBounds& folded,
                          const std::vector<std::vector<double>>& candidates, bool dense);

/// Control for region i given the barrier values b.
std::vector<double> extract_control(int i, std::span<const double> b, const FoldedBounds& folded,
                                    const Box& control_box);

struct Controller {
  std::vector<std::vector<double>> controls;  // one row per region
  std::vector<double> fallback;

  int size() const { return static_cast<int>(controls.size()); }
};

/// Zero clipped into the control box.
std::vector<double> default_fallback(const Box& control_box);

/// Control of the region containing x, or the fallback outside the safe regions.
std::vector<double> lookup(const Controller& controller, const Partition& partition,
                           std::span<const double> x);

/// Metadata line naming the partition a controller or barrier belongs to.
struct PartitionTag {
  std::vector<int> grid;
  int regions = 0;
  int state_dim = 0;
  int control_dim = 0;

  std::string to_string() const;
  static PartitionTag parse(std::string_view line);
  static PartitionTag of(const Partition& partition, int control_dim);
};

/// "#grid=10x10;regions=100;state_dim=2;control_dim=2", then
/// region_index,u_1..u_m with 1-based region indices.
void write_controller_csv(std::ostream& out, const Controller& controller,
                          const Partition& partition);

struct ControllerFile {
  PartitionTag tag;
  Controller controller;
};

ControllerFile read_controller_csv(std::istream& in);

/// Throws a data-mismatch error when the tag does not describe the partition.
void check_tag(const PartitionTag& tag, const Partition& partition, int control_dim);

}  // namespace scbf
