#include "scbf/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "scbf/error.hpp"
#include "scbf/parallel.hpp"

namespace scbf {

std::vector<DualBlock> build_blocks(const BoundsMatrix& bounds, const Partition& partition) {
  const int k = partition.size();
  const int e = k + 1;
  const int rows = 2 * (k + 2);
  const int dim = bounds.n + bounds.m;
  std::vector<DualBlock> out(bounds.rows.size());
  for (std::size_t i = 0; i < bounds.rows.size(); ++i) {
    const BoundsRow& row = bounds.rows[i];
    DualBlock& blk = out[i];
    blk.hp1 = Eigen::MatrixXd::Zero(rows, e);
    blk.hp2 = Eigen::MatrixXd::Zero(rows, dim);
    blk.hp = Eigen::VectorXd::Zero(rows);
    for (int j = 0; j < e; ++j) {
      blk.hp1(j, j) = -1.0;
      blk.hp1(e + j, j) = 1.0;
      blk.hp1(2 * e, j) = -1.0;
      blk.hp1(2 * e + 1, j) = 1.0;
      const AffineBound bd = j < k ? row.entry(partition, j) : row.unsafe;
      for (int d = 0; d < dim; ++d) {
        blk.hp2(j, d) = bd.lower.coeff(d);
        blk.hp2(e + j, d) = -bd.upper.coeff(d);
      }
      blk.hp(j) = -bd.lower.offset();
      blk.hp(e + j) = bd.upper.offset();
    }
    blk.hp(2 * e) = -1.0;
    blk.hp(2 * e + 1) = 1.0;
  }
  return out;
}

double Barrier::objective() const {
  return horizon.infinite ? eta : eta + horizon.steps * beta;
}

double certified_probability(double eta, double beta, const Horizon& horizon) {
  const double risk = horizon.infinite ? eta : eta + horizon.steps * beta;
  return std::max(0.0, 1.0 - risk);
}

Barrier build_barrier(std::vector<double> b, std::vector<double> beta_i,
                      const Partition& partition, const Horizon& horizon) {
  const int k = partition.size();
  if (static_cast<int>(b.size()) != k || static_cast<int>(beta_i.size()) != k) {
    throw_mismatch("build_barrier: expected " + std::to_string(k) + " regions");
  }
  Barrier out;
  out.horizon = horizon;
  for (int i = 0; i < k; ++i) {
    if (!(b[i] >= -1e-9 && b[i] <= 1.0 + 1e-9)) {
      throw_internal("barrier value b_" + std::to_string(i + 1) + " = " + std::to_string(b[i]) +
                     " outside [0, 1]");
    }
    if (!(beta_i[i] >= -1e-9)) {
      throw_internal("beta_" + std::to_string(i + 1) + " negative");
    }
    b[i] = std::clamp(b[i], 0.0, 1.0);
    beta_i[i] = std::max(0.0, beta_i[i]);
  }
  const std::vector<int> init = partition.initial_regions();
  if (init.empty()) throw_invalid("initial set not covered");
  out.eta = 0.0;
  for (int i : init) out.eta = std::max(out.eta, b[i]);
  out.beta = 0.0;
  for (double v : beta_i) out.beta = std::max(out.beta, v);
  if (horizon.infinite) {
    out.infinite_residual = out.beta;
    out.beta = 0.0;
    std::fill(beta_i.begin(), beta_i.end(), 0.0);
  }
  out.b = std::move(b);
  out.beta_i = std::move(beta_i);
  out.p_safe = certified_probability(out.eta, out.beta, horizon);
  return out;
}

// ---------------------------------------------------------------------------
// Dual LP

LpModel assemble_lp(const BoundsMatrix& bounds, const FoldedBounds& folded,
                    const Partition& partition, const Horizon& horizon,
                    const std::vector<std::vector<double>>& controls, const LpOptions& options,
                    const std::vector<RowBox>* boxes) {
  const int k = partition.size();
  const int n = bounds.n;
  const int m = bounds.m;
  if (bounds.size() != k || static_cast<int>(folded.rows.size()) != k ||
      static_cast<int>(controls.size()) != k) {
    throw_mismatch("assemble_lp: bounds, controls and partition disagree");
  }
  const std::vector<int> init = partition.initial_regions();
  if (init.empty()) throw_invalid("initial set not covered");
  const bool inf = horizon.infinite;
  const bool literal = options.form == LpForm::kLiteral;

  LpModel model;
  model.name = "SCBF";
  for (int i = 0; i < k; ++i) model.add_variable("b[" + std::to_string(i + 1) + "]", 0.0, 1.0);
  const int eta = model.add_variable("eta", 0.0, kInf, 1.0);
  const int beta = model.add_variable("beta", 0.0, inf ? 0.0 : kInf, inf ? 0.0 : horizon.steps);
  std::vector<int> beta_i(k), t(k);
  for (int i = 0; i < k; ++i) {
    beta_i[i] = model.add_variable("beta_i[" + std::to_string(i + 1) + "]", 0.0, inf ? 0.0 : kInf);
  }
  for (int i = 0; i < k; ++i) t[i] = model.add_variable("t[" + std::to_string(i + 1) + "]", 0.0, kInf);

  for (int i : init) {
    model.add_row("init[" + std::to_string(i + 1) + "]", Sense::kLe, 0.0, {{i, 1.0}, {eta, -1.0}});
  }

  for (int i = 0; i < k; ++i) {
    const std::string tag = std::to_string(i + 1);
    const FoldedRow& frow = folded.rows[i];
    const BoundsRow& brow = bounds.rows[i];
    const std::span<const double> u(controls[i]);

    // Entries of the polytope, with their bounds and (literal form) slopes.
    std::vector<int> dest;
    std::vector<double> lo, hi;
    std::vector<const AffineBound*> raw;
    std::vector<AffineBound> owned;
    if (literal) {
      owned.reserve(k + 1);
      if (options.dense) {
        for (int j = 0; j < k; ++j) {
          owned.push_back(brow.entry(partition, j));
          dest.push_back(j);
        }
        owned.push_back(brow.unsafe);
      } else {
        for (const auto& e : brow.entries) {
          owned.push_back(e.bound);
          dest.push_back(e.dest);
        }
        AffineBound merged = brow.unsafe;
        merged.upper += brow.tail_mass;
        owned.push_back(merged);
      }
      dest.push_back(-1);
      for (const auto& bd : owned) {
        raw.push_back(&bd);
        lo.push_back(bd.lower.offset());
        hi.push_back(bd.upper.offset());
      }
    } else {
      const RowBox box = boxes            ? boxes->at(i)
                         : options.dense ? row_box_dense(frow, brow, partition, u)
                                         : row_box(frow, u);
      dest = box.dest;
      lo = box.lo;
      hi = box.hi;
    }
    const int ne = static_cast<int>(dest.size());

    std::vector<int> lam_lo(ne), lam_hi(ne);
    for (int e = 0; e < ne; ++e) {
      const std::string et = dest[e] < 0 ? "u" : std::to_string(dest[e] + 1);
      lam_lo[e] = model.add_variable("lam_lo[" + tag + "," + et + "]", 0.0, kInf);
      lam_hi[e] = model.add_variable("lam_hi[" + tag + "," + et + "]", 0.0, kInf);
    }
    const int lam_sm = model.add_variable("lam_sum_lo[" + tag + "]", 0.0, kInf);
    const int lam_sp = model.add_variable("lam_sum_hi[" + tag + "]", 0.0, kInf);

    // Decoupled z block: x over the region box, u pinned to the control in
    // the fixed-control form.
    for (int d = 0; d < n; ++d) {
      model.add_variable("z[" + tag + ",x" + std::to_string(d + 1) + "]", brow.box[d].lo, brow.box[d].hi);
    }
    for (int d = 0; d < m; ++d) {
      const double ulo = literal ? brow.box[n + d].lo : u[d];
      const double uhi = literal ? brow.box[n + d].hi : u[d];
      model.add_variable("z[" + tag + ",u" + std::to_string(d + 1) + "]", ulo, uhi);
    }

    std::vector<std::pair<int, double>> obj_row;
    for (int e = 0; e < ne; ++e) {
      if (lo[e] != 0.0) obj_row.push_back({lam_lo[e], -lo[e]});
      obj_row.push_back({lam_hi[e], hi[e]});
    }
    obj_row.push_back({lam_sm, -1.0});
    obj_row.push_back({lam_sp, 1.0});
    obj_row.push_back({t[i], -1.0});
    model.add_row("dual_obj[" + tag + "]", Sense::kLe, 0.0, std::move(obj_row));
    model.add_row("martingale[" + tag + "]", Sense::kLe, 0.0,
                  {{t[i], 1.0}, {i, -1.0}, {beta_i[i], -1.0}});
    for (int e = 0; e < ne; ++e) {
      std::vector<std::pair<int, double>> row = {
          {lam_lo[e], -1.0}, {lam_hi[e], 1.0}, {lam_sm, -1.0}, {lam_sp, 1.0}};
      double rhs = 1.0;
      if (dest[e] >= 0) {
        row.push_back({dest[e], -1.0});
        rhs = 0.0;
      }
      const std::string et = dest[e] < 0 ? "u" : std::to_string(dest[e] + 1);
      model.add_row("stationary[" + tag + "," + et + "]", Sense::kEq, rhs, std::move(row));
    }
    if (literal) {
      for (int d = 0; d < n + m; ++d) {
        std::vector<std::pair<int, double>> row;
        for (int e = 0; e < ne; ++e) {
          const double al = raw[e]->lower.coeff(d);
          const double au = raw[e]->upper.coeff(d);
          if (al != 0.0) row.push_back({lam_lo[e], al});
          if (au != 0.0) row.push_back({lam_hi[e], -au});
        }
        model.add_row("z_stationary[" + tag + "," + std::to_string(d + 1) + "]", Sense::kEq, 0.0,
                      std::move(row));
      }
    }
    model.add_row("beta_cap[" + tag + "]", Sense::kLe, 0.0, {{beta_i[i], 1.0}, {beta, -1.0}});
  }

  const long kk = k;
  const long ll = static_cast<long>(init.size());
  model.metadata["regions"] = std::to_string(k);
  model.metadata["initial_regions"] = std::to_string(ll);
  model.metadata["variables"] = std::to_string(model.num_variables());
  model.metadata["constraints"] = std::to_string(model.num_rows());
  model.metadata["primal_variables"] = std::to_string(3 * kk * kk + 8 * kk + 2);
  model.metadata["primal_constraints"] = std::to_string(2 * kk * kk + 10 * kk + ll + 1);
  model.metadata["form"] = literal ? "literal" : "fixed-control";
  model.metadata["entries"] = options.dense ? "dense" : "sparse";
  model.metadata["horizon"] = horizon.to_string();
  return model;
}

void read_lp_solution(const LpModel& model, const LpSolution& sol, int regions,
                      std::vector<double>& b, std::vector<double>& beta_i) {
  if (model.num_variables() < 2 * regions + 2 || static_cast<int>(sol.x.size()) != model.num_variables()) {
    throw_mismatch("read_lp_solution: solution does not match the model");
  }
  b.assign(sol.x.begin(), sol.x.begin() + regions);
  beta_i.assign(sol.x.begin() + regions + 2, sol.x.begin() + 2 * regions + 2);
}

// ---------------------------------------------------------------------------
// Column generation on the dual of the robust LP

RobustResult solve_robust(const std::vector<RowBox>& rows, const Partition& partition,
                          const Horizon& horizon, const SimplexOptions& simplex) {
  const auto t0 = std::chrono::steady_clock::now();
  const int k = partition.size();
  if (static_cast<int>(rows.size()) != k) throw_mismatch("solve_robust: one row per region expected");
  const std::vector<int> init = partition.initial_regions();
  if (init.empty()) throw_invalid("initial set not covered");
  const bool inf = horizon.infinite;

  // Rows: eta, beta (finite horizon only), then one per b_j.
  const int r_eta = 0;
  const int r_beta = inf ? -1 : 1;
  const int r_b = inf ? 1 : 2;

  LpModel d;
  d.name = "SCBFCG";
  d.add_row("eta", Sense::kLe, 1.0, {});
  if (!inf) d.add_row("beta", Sense::kLe, horizon.steps, {});
  for (int j = 0; j < k; ++j) d.add_row("b[" + std::to_string(j + 1) + "]", Sense::kLe, 0.0, {});

  auto add_initial = [&](LpModel& model, int i) {
    const int v = model.add_variable("y[" + std::to_string(i + 1) + "]", 0.0, kInf, 0.0);
    model.rows[r_eta].coeffs.push_back({v, 1.0});
    model.rows[r_b + i].coeffs.push_back({v, -1.0});
  };
  for (int i : init) add_initial(d, i);
  for (int j = 0; j < k; ++j) {
    const int v = d.add_variable("rho[" + std::to_string(j + 1) + "]", 0.0, kInf, 1.0);
    d.rows[r_b + j].coeffs.push_back({v, -1.0});
  }

  // Column for the vertex T of region i's polytope.
  auto cut_column = [&](int i, const std::vector<double>& tv, double& cost) {
    std::vector<std::pair<int, double>> col;
    double self = 1.0;
    double tu = 0.0;
    const RowBox& box = rows[i];
    for (std::size_t e = 0; e < box.size(); ++e) {
      if (tv[e] == 0.0) continue;
      if (box.dest[e] < 0) {
        tu += tv[e];
      } else if (box.dest[e] == i) {
        self -= tv[e];
      } else {
        col.push_back({r_b + box.dest[e], -tv[e]});
      }
    }
    if (self != 0.0) col.push_back({r_b + i, self});
    if (!inf) col.push_back({r_beta, 1.0});
    cost = -tu;
    return col;
  };

  std::vector<double> b(k, 0.0);
  std::vector<GreedyResult> price(k);
  std::vector<double> value(k);
  auto price_all = [&]() {
    parallel_for(k, [&](std::size_t i) {
      const std::vector<double> w = row_weights(rows[i], b);
      price[i] = greedy_inner(w, rows[i].lo, rows[i].hi);
      value[i] = price[i].value;
    });
  };

  // Seed with the b = 0 vertices.
  price_all();
  for (int i = 0; i < k; ++i) {
    double cost;
    auto col = cut_column(i, price[i].t, cost);
    const int v = d.add_variable("pi[" + std::to_string(i + 1) + ",0]", 0.0, kInf, cost);
    for (const auto& [r, a] : col) d.rows[r].coeffs.push_back({v, a});
  }

  RevisedSimplex solver(d, simplex);
  LpSolution sol = solver.solve();
  RobustResult res;
  double beta = 0.0;
  const int max_rounds = 2000;
  for (res.rounds = 1;; ++res.rounds) {
    if (!sol.optimal()) {
      throw_solver("column generation: " + to_string(sol.status) + " after " +
                   std::to_string(sol.iterations) + " iterations (" + sol.last_pivot + ") " +
                   sol.message);
    }
    beta = inf ? 0.0 : std::max(0.0, -sol.duals[r_beta]);
    for (int j = 0; j < k; ++j) b[j] = std::clamp(-sol.duals[r_b + j], 0.0, 1.0);
    price_all();
    int added = 0;
    for (int i = 0; i < k; ++i) {
      if (value[i] - b[i] - beta <= 1e-10) continue;
      double cost;
      auto col = cut_column(i, price[i].t, cost);
      solver.add_column(cost, 0.0, kInf, std::move(col));
      ++added;
    }
    if (added == 0 || res.rounds >= max_rounds) break;
    sol = solver.resolve();
  }

  res.b = b;
  res.eta = 0.0;
  for (int i : init) res.eta = std::max(res.eta, b[i]);
  res.beta = 0.0;
  for (int i = 0; i < k; ++i) res.beta = std::max(res.beta, value[i] - b[i]);
  if (inf) res.beta = std::max(0.0, res.beta);
  res.objective = inf ? res.eta : res.eta + horizon.steps * res.beta;
  res.rows = d.num_rows();
  res.columns = solver.num_columns();
  res.iterations = sol.iterations;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::string to_string(LpRoute route) {
  switch (route) {
    case LpRoute::kAuto: return "auto";
    case LpRoute::kDual: return "dual";
    case LpRoute::kColumns: return "columns";
  }
  return "auto";
}

LpRoute parse_lp_route(std::string_view text) {
  if (text == "auto") return LpRoute::kAuto;
  if (text == "dual") return LpRoute::kDual;
  if (text == "columns") return LpRoute::kColumns;
  throw_invalid("lp route: expected auto, dual or columns, got '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

SynthesisResult synthesize(const SystemSpec& spec, const Partition& partition,
                           const BoundsMatrix& bounds, const SynthesisOptions& options) {
  return synthesize(spec, partition, bounds, fold_x(bounds, partition), options);
}

SynthesisResult synthesize(const SystemSpec& spec, const Partition& partition,
                           const BoundsMatrix& bounds, const FoldedBounds& folded,
                           const SynthesisOptions& options) {
  const int k = partition.size();
  if (bounds.size() != k) throw_mismatch("synthesize: bounds do not match the partition");
  if (partition.initial_regions().empty()) throw_invalid("initial set not covered");
  const auto candidates = control_candidates(spec.control_box);
  const bool use_dual = options.route == LpRoute::kDual ||
                        (options.route == LpRoute::kAuto && k <= 30);
  if (options.lp.form == LpForm::kLiteral && !use_dual) {
    throw_invalid("the literal form needs the dual route");
  }

  SynthesisResult best;
  bool have_best = false;
  best.route = use_dual ? "dual" : "columns";

  std::optional<PinnedRows> pinned;
  if (options.pin_controls && options.lp.form == LpForm::kFixedControl) {
    pinned = pin_candidates(spec, partition, bounds, folded, candidates, options.lp.dense);
  }
  auto box_for = [&](int i, int c) {
    if (pinned) return pinned->rows[i][c];
    return options.lp.dense ? row_box_dense(folded.rows[i], bounds.rows[i], partition, candidates[c])
                            : row_box(folded.rows[i], candidates[c]);
  };
  auto choose = [&](int i, std::span<const double> b, std::optional<int> preferred) {
    return pinned ? choose_control(pinned->rows[i], b, candidates, preferred).candidate
                  : choose_control(folded.rows[i], b, candidates, preferred).candidate;
  };

  std::vector<int> sigma(k);
  {
    const std::vector<double> zero(k, 0.0);
    parallel_for(k, [&](std::size_t i) { sigma[i] = choose(i, zero, std::nullopt); });
  }

  double lp_seconds = 0.0;
  long lp_iterations = 0;
  for (int it = 1; it <= std::max(1, options.max_policy_iterations); ++it) {
    std::vector<std::vector<double>> controls(k);
    for (int i = 0; i < k; ++i) controls[i] = candidates[sigma[i]];

    std::vector<double> b;
    int vars = 0, cons = 0;
    LpModel model;
    std::vector<RowBox> rows(k);
    parallel_for(k, [&](std::size_t i) { rows[i] = box_for(i, sigma[i]); });
    if (use_dual) {
      model = assemble_lp(bounds, folded, partition, options.horizon, controls, options.lp,
                          options.lp.form == LpForm::kFixedControl ? &rows : nullptr);
      SimplexBackend backend(options.simplex);
      const LpSolution sol = solve_lp(model, &backend);
      lp_seconds += sol.solve_seconds;
      lp_iterations += sol.iterations;
      if (!sol.optimal()) {
        throw_solver("lp " + to_string(sol.status) + " after " + std::to_string(sol.iterations) +
                     " iterations (" + sol.last_pivot + ") " + sol.message);
      }
      std::vector<double> beta_unused;
      read_lp_solution(model, sol, k, b, beta_unused);
      vars = model.num_variables();
      cons = model.num_rows();
    } else {
      const RobustResult rr = solve_robust(rows, partition, options.horizon, options.simplex);
      lp_seconds += rr.seconds;
      lp_iterations += rr.iterations;
      b = rr.b;
      vars = rr.columns;
      cons = rr.rows;
    }
    for (double& v : b) v = std::clamp(v, 0.0, 1.0);

    // Exact martingale residuals at the controls used by the LP.
    std::vector<double> beta_i(k);
    parallel_for(k, [&](std::size_t i) {
      const auto w = row_weights(rows[i], b);
      beta_i[i] = std::max(0.0, greedy_inner(w, rows[i].lo, rows[i].hi).value - b[i]);
    });
    Barrier barrier = build_barrier(b, beta_i, partition, options.horizon);
    if (options.horizon.infinite && barrier.infinite_residual > 1e-7) {
      // The LP pinned beta to 0; a larger residual means a solver breach.
      throw_internal("infinite-horizon residual " + std::to_string(barrier.infinite_residual));
    }

    if (!have_best || barrier.objective() < best.barrier.objective() - 1e-12) {
      have_best = true;
      best.barrier = barrier;
      best.controller.controls = controls;
      best.controller.fallback = default_fallback(spec.control_box);
      best.candidate = sigma;
      best.lp_variables = vars;
      best.lp_constraints = cons;
      if (use_dual) {
        best.model = std::move(model);
        best.has_model = true;
      }
    }
    best.policy_iterations = it;

    std::vector<int> next(k);
    const std::vector<double>& bb = barrier.b;
    parallel_for(k, [&](std::size_t i) { next[i] = choose(i, bb, sigma[i]); });
    if (next == sigma) break;
    sigma = std::move(next);
  }
  best.lp_seconds = lp_seconds;
  best.lp_iterations = lp_iterations;
  return best;
}

}  // namespace scbf
