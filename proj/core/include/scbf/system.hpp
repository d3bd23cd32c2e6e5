#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "scbf/expr.hpp"
#include "scbf/interval.hpp"

namespace scbf {

/// Number of time steps, or the infinite horizon.
struct Horizon {
  bool infinite = false;
  int steps = 50;

  static Horizon finite(int n) { return {false, n}; }
  static Horizon unbounded() { return {true, 0}; }

  std::string to_string() const { return infinite ? "infinite" : std::to_string(steps); }
};

/// Parses "50" or "infinite".
Horizon parse_horizon(std::string_view text);

/// x_{k+1} = f(x_k, u_k) + w_k with w_k ~ N(0, sigma), safe set
/// X_s = domain \ (union of obstacle interiors), initial set X0 and control box U.
struct SystemSpec {
  std::string name;
  int n = 0;
  int m = 0;
  ExprGraph f;
  Eigen::MatrixXd sigma;
  Box control_box;
  Box domain_box;
  std::vector<Box> obstacles;
  Box initial_box;
  Horizon horizon;

  // Optional run defaults carried by shipped configurations.
  std::vector<int> default_grid;
  std::vector<std::vector<int>> table_grids;
  std::string notes;

  /// Membership in X_s: inside the domain and not in any obstacle interior.
  bool in_safe_set(std::span<const double> x) const;

  /// Checks every invariant; throws Error(kInvalidInput) naming the field.
  void validate() const;
};

/// Parses and validates a configuration document (JSON syntax).
SystemSpec load_spec(std::string_view text);
SystemSpec load_spec_file(const std::string& path);

/// Names of the shipped benchmark configurations.
const std::vector<std::string>& benchmark_names();

/// Configuration text of a shipped benchmark; throws for unknown names.
std::string_view benchmark_config(std::string_view name);

SystemSpec load_benchmark(std::string_view name);

}  // namespace scbf
