#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scbf/interval.hpp"
#include "scbf/system.hpp"

namespace scbf {

/// Linear map T with T * sigma * T^T = I, and its inverse.
struct Whitening {
  Eigen::MatrixXd t;
  Eigen::MatrixXd t_inverse;
  bool diagonal = false;  // T is diagonal with positive entries

  Eigen::VectorXd apply(std::span<const double> x) const;
  Eigen::VectorXd unapply(std::span<const double> xw) const;

  /// Smallest box containing T(box) (exact when T is diagonal).
  Box image(const Box& box) const;
  /// Smallest box containing T^{-1}(box).
  Box preimage(const Box& box) const;
};

/// T = Gamma^{-1/2} V^T from the eigendecomposition sigma = V Gamma V^T.
/// A diagonal sigma keeps V = I so T stays diagonal.
Whitening whiten(const Eigen::MatrixXd& sigma);

/// One grid cell of the safe set, in whitened coordinates.
struct Region {
  int index = 0;           // 0-based position in Partition::regions
  int cell = 0;            // flat grid cell id
  std::vector<double> lo;  // whitened lower corner
  std::vector<double> hi;  // whitened upper corner
  bool touches_initial = false;

  Box box() const;
};

struct Partition {
  std::vector<Region> regions;
  std::vector<int> grid_counts;
  Whitening whitening;
  std::vector<int> obstacle_cells;  // flat ids of excluded cells, ascending
  Box grid_box;                     // whitened box tiled by the grid
  std::vector<double> cell_width;
  std::vector<int> cell_region;     // flat cell id -> region index or -1

  int size() const { return static_cast<int>(regions.size()); }
  int dim() const { return static_cast<int>(grid_counts.size()); }
  int cell_count() const { return static_cast<int>(cell_region.size()); }

  std::vector<int> cell_coords(int cell) const;
  int cell_id(std::span<const int> coords) const;

  /// Interval of grid coordinate c along dimension d (whitened).
  Interval cell_interval(int d, int c) const;

  /// Region whose closed box contains T x; the lowest index wins on shared
  /// faces. Empty when T x is outside the grid or only in excluded cells.
  std::optional<int> locate(std::span<const double> x) const;

  /// "10x10" style label.
  std::string grid_label() const;

  /// Regions with touches_initial set.
  std::vector<int> initial_regions() const;
};

Partition build_partition(const SystemSpec& spec, std::span<const int> grid_counts);

/// Parses "10,10" or "10x10".
std::vector<int> parse_grid_counts(std::string_view text);

}  // namespace scbf
