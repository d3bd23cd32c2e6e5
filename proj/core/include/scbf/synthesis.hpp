#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scbf/controller.hpp"
#include "scbf/lp.hpp"
#include "scbf/relaxation.hpp"
#include "scbf/system.hpp"

namespace scbf {

/// Per-region polytope data in the block form
///   H1 T + H2 z <= h,   H1 = [-I; I; -1^T; 1^T],  H2 = [A_lo; -A_hi; 0; 0],
///   h = [-c_lo; c_hi; -1; 1],
/// over every region plus the unsafe set (last column of H1).
struct DualBlock {
  Eigen::MatrixXd hp1;  // 2(K+2) x (K+1)
  Eigen::MatrixXd hp2;  // 2(K+2) x (n+m)
  Eigen::VectorXd hp;   // 2(K+2)
};

std::vector<DualBlock> build_blocks(const BoundsMatrix& bounds, const Partition& partition);

struct Barrier {
  std::vector<double> b;
  double eta = 1.0;
  double beta = 0.0;
  std::vector<double> beta_i;
  Horizon horizon;
  double p_safe = 0.0;
  double infinite_residual = 0.0;  // max(V_i - b_i) in infinite mode

  double objective() const;
};

/// 1 - (eta + N beta) clipped at 0; 1 - eta in infinite mode.
double certified_probability(double eta, double beta, const Horizon& horizon);

/// eta = max b over initial regions, beta = max beta_i. Throws an internal
/// error when b leaves [0, 1] or beta_i is negative beyond 1e-9.
Barrier build_barrier(std::vector<double> b, std::vector<double> beta_i,
                      const Partition& partition, const Horizon& horizon);

enum class LpForm {
  kFixedControl,  // region polytopes evaluated at the chosen controls
  kLiteral,       // raw offsets plus the (H2)^T lambda = 0 rows
};

struct LpOptions {
  bool dense = false;  // every destination, instead of active ones plus a merged unsafe entry
  LpForm form = LpForm::kFixedControl;
};

/// Dual LP over (b, eta, beta, beta_i, t_i, lambda_i, z_i) for fixed
/// per-region controls. Infinite horizon pins beta and beta_i to 0.
/// Metadata records the model counts and the primal-side counts
/// 3K^2 + 8K + 2 variables and 2K^2 + 10K + L + 1 constraints.
LpModel assemble_lp(const BoundsMatrix& bounds, const FoldedBounds& folded,
                    const Partition& partition, const Horizon& horizon,
                    const std::vector<std::vector<double>>& controls,
                    const LpOptions& options = {},
                    const std::vector<RowBox>* boxes = nullptr);

/// Reads b and beta_i from a solved assemble_lp model.
void read_lp_solution(const LpModel& model, const LpSolution& sol, int regions,
                      std::vector<double>& b, std::vector<double>& beta_i);

struct RobustResult {
  std::vector<double> b;
  double eta = 0.0;
  double beta = 0.0;
  double objective = 0.0;
  int rows = 0;
  int columns = 0;
  int rounds = 0;
  long iterations = 0;
  double seconds = 0.0;
};

/// Solves min eta + N beta over b in [0, 1]^K with
///   b_i <= eta for initial regions,
///   max_{T in box_i} sum_j b_j T_j + T_u <= b_i + beta for every region,
/// by generating the maximizing vertices as columns of the dual LP.
RobustResult solve_robust(const std::vector<RowBox>& rows, const Partition& partition,
                          const Horizon& horizon, const SimplexOptions& simplex = {});

enum class LpRoute { kAuto, kDual, kColumns };

std::string to_string(LpRoute route);
LpRoute parse_lp_route(std::string_view text);

struct SynthesisOptions {
  Horizon horizon;
  LpRoute route = LpRoute::kAuto;  // auto: dual LP up to 30 regions, columns beyond
  LpOptions lp;
  int max_policy_iterations = 30;
  bool pin_controls = true;  // re-bound each row at every candidate control
  SimplexOptions simplex;
};

struct SynthesisResult {
  Barrier barrier;
  Controller controller;
  std::vector<int> candidate;  // chosen candidate per region
  std::string route;
  int lp_variables = 0;
  int lp_constraints = 0;
  long lp_iterations = 0;
  int policy_iterations = 0;
  double lp_seconds = 0.0;
  LpModel model;  // last assembled dual model (dual route only)
  bool has_model = false;
};

/// Alternates the LP at fixed controls with control recovery at the new b,
/// until the controls repeat or the iteration cap is hit. Returns the best
/// certificate seen.
SynthesisResult synthesize(const SystemSpec& spec, const Partition& partition,
                           const BoundsMatrix& bounds, const SynthesisOptions& options);

/// The same loop on precomputed folded bounds.
SynthesisResult synthesize(const SystemSpec& spec, const Partition& partition,
                           const BoundsMatrix& bounds, const FoldedBounds& folded,
                           const SynthesisOptions& options);

}  // namespace scbf
