#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace scbf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { kLe, kGe, kEq };

struct LpVariable {
  std::string name;
  double lo = 0.0;
  double hi = kInf;
  double cost = 0.0;
};

struct LpRow {
  std::string name;
  Sense sense = Sense::kLe;
  double rhs = 0.0;
  std::vector<std::pair<int, double>> coeffs;  // (variable, coefficient)
};

/// min cost^T x + offset subject to rows and variable bounds.
struct LpModel {
  std::string name = "scbf";
  std::vector<LpVariable> variables;
  std::vector<LpRow> rows;
  double objective_offset = 0.0;
  std::map<std::string, std::string> metadata;

  int add_variable(std::string name, double lo, double hi, double cost = 0.0);
  int add_row(std::string name, Sense sense, double rhs,
              std::vector<std::pair<int, double>> coeffs);

  int num_variables() const { return static_cast<int>(variables.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  /// Throws on dangling references, non-finite coefficients or crossed bounds.
  void validate() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit, kNumericalFailure };

std::string to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::kNumericalFailure;
  double objective = 0.0;
  std::vector<double> x;       // one value per model variable
  std::vector<double> duals;   // one per model row: d objective / d rhs
  long iterations = 0;
  std::string last_pivot;      // diagnostics for failures
  std::string message;
  double solve_seconds = 0.0;

  bool optimal() const { return status == LpStatus::kOptimal; }
};

struct SimplexOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-11;
  int refactor_every = 100;
  int bland_after = 50;  // consecutive degenerate pivots before switching
  long max_iterations = 2'000'000;
};

/// Bounded-variable revised simplex with an explicit basis inverse. Each row
/// carries a slack; rows whose slack cannot absorb the starting residual get
/// a phase-1 artificial. Dantzig pricing, switching to Bland's rule after a
/// run of degenerate pivots. A basis found singular at refactorization is
/// rolled back to the last good one and the run continues with stricter
/// pivoting.
class RevisedSimplex {
 public:
  explicit RevisedSimplex(const LpModel& model, SimplexOptions options = {});

  LpSolution solve();

  /// Appends a structural column, nonbasic at its lower bound (which must be
  /// finite). The current basis stays primal feasible, so resolve() continues
  /// from it.
  int add_column(double cost, double lo, double hi, std::vector<std::pair<int, double>> entries);
  LpSolution resolve();

  int num_columns() const { return n_; }

 private:
  enum class State : unsigned char { kBasic, kLower, kUpper, kFree };

  void start();
  bool run(bool phase1);
  void refactor();
  bool try_refactor();
  void checkpoint();
  bool rollback();
  void compute_basics();
  void pivot(int q, int leave_pos, const Eigen::VectorXd& alpha);
  Eigen::VectorXd column_times_inverse(int j) const;
  double cost_of(int j, bool phase1) const;
  double dot_column(const Eigen::VectorXd& y, int j) const;
  LpSolution collect(LpStatus status) const;

  SimplexOptions opt_;
  int m_ = 0;  // rows
  int n_ = 0;  // structural columns
  std::vector<double> rhs_;
  std::vector<std::vector<std::pair<int, double>>> cols_;  // structurals, then artificials
  std::vector<double> cost_, lo_, hi_;                      // all columns incl. slacks
  std::vector<double> x_;
  std::vector<State> state_;
  std::vector<int> basis_;                                   // column per row position
  std::vector<int> artificials_;
  Eigen::MatrixXd binv_;
  long iterations_ = 0;
  int since_refactor_ = 0;
  int degenerate_run_ = 0;
  std::string last_pivot_;
  bool started_ = false;
  bool strict_ = false;  // after a rollback: stricter pivots, frequent refactors
  int rollbacks_ = 0;

  struct Checkpoint {
    int n = -1;  // column count when taken; -1 when none
    std::vector<int> basis;
    std::vector<State> state;
    std::vector<double> x;
    long iterations = 0;
  } saved_;

  // Column ids: [0, n) structurals, [n, n+m) slacks, then artificials.
  int slack(int r) const { return n_ + r; }
  bool is_slack(int j) const { return j >= n_ && j < n_ + m_; }
};

/// Pluggable solver. The built-in backend wraps RevisedSimplex.
class LpBackend {
 public:
  virtual ~LpBackend() = default;
  virtual std::string name() const = 0;
  virtual LpSolution solve(const LpModel& model) = 0;
};

class SimplexBackend final : public LpBackend {
 public:
  explicit SimplexBackend(SimplexOptions options = {}) : options_(options) {}
  std::string name() const override { return "revised-simplex"; }
  LpSolution solve(const LpModel& model) override;

 private:
  SimplexOptions options_;
};

/// Drops empty rows and columns, solves with the backend (built-in when
/// null) and maps the result back onto the full model.
LpSolution solve_lp(const LpModel& model, LpBackend* backend = nullptr);

/// Maximum violation of rows and bounds at x.
double max_violation(const LpModel& model, const std::vector<double>& x);

/// Fixed-format MPS.
void write_mps(const LpModel& model, std::ostream& out);

}  // namespace scbf
