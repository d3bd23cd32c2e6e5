#include "scbf/lp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "scbf/error.hpp"

namespace scbf {

namespace {

constexpr double kRelativePivot = 1e-7;
constexpr double kStrictPivot = 1e-3;
constexpr int kStrictRefactor = 20;

}  // namespace

int LpModel::add_variable(std::string name, double lo, double hi, double cost) {
  variables.push_back({std::move(name), lo, hi, cost});
  return static_cast<int>(variables.size()) - 1;
}

int LpModel::add_row(std::string name, Sense sense, double rhs,
                     std::vector<std::pair<int, double>> coeffs) {
  rows.push_back({std::move(name), sense, rhs, std::move(coeffs)});
  return static_cast<int>(rows.size()) - 1;
}

void LpModel::validate() const {
  const int n = num_variables();
  for (const auto& v : variables) {
    if (std::isnan(v.lo) || std::isnan(v.hi) || v.lo > v.hi || !std::isfinite(v.cost)) {
      throw_invalid("lp: variable '" + v.name + "' has invalid bounds or cost");
    }
  }
  for (const auto& r : rows) {
    if (!std::isfinite(r.rhs)) throw_invalid("lp: row '" + r.name + "' has non-finite rhs");
    for (const auto& [j, a] : r.coeffs) {
      if (j < 0 || j >= n) throw_invalid("lp: row '" + r.name + "' references unknown variable");
      if (!std::isfinite(a)) throw_invalid("lp: row '" + r.name + "' has non-finite coefficient");
    }
  }
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration_limit";
    case LpStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// RevisedSimplex

RevisedSimplex::RevisedSimplex(const LpModel& model, SimplexOptions options) : opt_(options) {
  model.validate();
  m_ = model.num_rows();
  n_ = model.num_variables();
  cols_.assign(n_, {});
  rhs_.resize(m_);
  for (int r = 0; r < m_; ++r) {
    rhs_[r] = model.rows[r].rhs;
    for (const auto& [j, a] : model.rows[r].coeffs) {
      if (a != 0.0) cols_[j].push_back({r, a});
    }
  }
  // Merge repeated (row, column) pairs.
  for (auto& col : cols_) {
    std::sort(col.begin(), col.end());
    std::vector<std::pair<int, double>> merged;
    for (const auto& e : col) {
      if (!merged.empty() && merged.back().first == e.first) merged.back().second += e.second;
      else merged.push_back(e);
    }
    col.swap(merged);
  }
  for (const auto& v : model.variables) {
    cost_.push_back(v.cost);
    lo_.push_back(v.lo);
    hi_.push_back(v.hi);
  }
  for (const auto& r : model.rows) {
    cost_.push_back(0.0);
    lo_.push_back(r.sense == Sense::kGe ? -kInf : 0.0);
    hi_.push_back(r.sense == Sense::kLe ? kInf : 0.0);
  }
}

double RevisedSimplex::cost_of(int j, bool phase1) const {
  if (phase1) {
    return j >= n_ + m_ ? 1.0 : 0.0;
  }
  return j < n_ ? cost_[j] : 0.0;
}

double RevisedSimplex::dot_column(const Eigen::VectorXd& y, int j) const {
  if (is_slack(j)) return y[j - n_];
  const auto& col = j < n_ ? cols_[j] : cols_[n_ + (j - n_ - m_)];
  double s = 0.0;
  for (const auto& [r, a] : col) s += y[r] * a;
  return s;
}

Eigen::VectorXd RevisedSimplex::column_times_inverse(int j) const {
  if (is_slack(j)) return binv_.col(j - n_);
  const auto& col = j < n_ ? cols_[j] : cols_[n_ + (j - n_ - m_)];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
  for (const auto& [r, a] : col) out += a * binv_.col(r);
  return out;
}

void RevisedSimplex::start() {
  const int total = n_ + m_;
  x_.assign(total, 0.0);
  state_.assign(total, State::kLower);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lo_[j])) {
      state_[j] = State::kLower;
      x_[j] = lo_[j];
    } else if (std::isfinite(hi_[j])) {
      state_[j] = State::kUpper;
      x_[j] = hi_[j];
    } else {
      state_[j] = State::kFree;
      x_[j] = 0.0;
    }
  }
  std::vector<double> resid = rhs_;
  for (int j = 0; j < n_; ++j) {
    if (x_[j] == 0.0) continue;
    for (const auto& [r, a] : cols_[j]) resid[r] -= a * x_[j];
  }
  basis_.assign(m_, -1);
  binv_ = Eigen::MatrixXd::Identity(m_, m_);
  artificials_.clear();
  for (int r = 0; r < m_; ++r) {
    const int s = slack(r);
    const double v = resid[r];
    if (v >= lo_[s] - opt_.primal_tol && v <= hi_[s] + opt_.primal_tol) {
      state_[s] = State::kBasic;
      x_[s] = v;
      basis_[r] = s;
      continue;
    }
    const double bound = std::clamp(v, lo_[s], hi_[s]);
    x_[s] = bound;
    state_[s] = bound == lo_[s] ? State::kLower : State::kUpper;
    const double sign = v - bound > 0.0 ? 1.0 : -1.0;
    const int id = static_cast<int>(cost_.size());
    cols_.push_back({{r, sign}});
    cost_.push_back(0.0);
    lo_.push_back(0.0);
    hi_.push_back(kInf);
    x_.push_back(std::fabs(v - bound));
    state_.push_back(State::kBasic);
    basis_[r] = id;
    binv_(r, r) = sign;
    artificials_.push_back(id);
  }
  since_refactor_ = 0;
  degenerate_run_ = 0;
  started_ = true;
  checkpoint();
}

bool RevisedSimplex::try_refactor() {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m_, m_);
  for (int p = 0; p < m_; ++p) {
    const int j = basis_[p];
    if (is_slack(j)) {
      b(j - n_, p) = 1.0;
    } else {
      const auto& col = j < n_ ? cols_[j] : cols_[n_ + (j - n_ - m_)];
      for (const auto& [r, a] : col) b(r, p) = a;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
  if (!lu.isInvertible()) return false;
  binv_ = lu.inverse();
  if (!binv_.allFinite()) return false;
  since_refactor_ = 0;
  compute_basics();
  return true;
}

void RevisedSimplex::refactor() {
  if (try_refactor()) {
    checkpoint();
    return;
  }
  if (rollback() && try_refactor()) return;
  throw_solver("simplex: singular basis after " + std::to_string(iterations_) + " iterations");
}

void RevisedSimplex::checkpoint() {
  saved_.n = n_;
  saved_.basis = basis_;
  saved_.state = state_;
  saved_.x = x_;
  saved_.iterations = iterations_;
}

bool RevisedSimplex::rollback() {
  if (saved_.n != n_ || rollbacks_ >= 20) return false;
  ++rollbacks_;
  basis_ = saved_.basis;
  state_ = saved_.state;
  x_ = saved_.x;
  strict_ = true;
  degenerate_run_ = 0;
  return true;
}

void RevisedSimplex::compute_basics() {
  Eigen::VectorXd resid = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m_);
  const int total = static_cast<int>(x_.size());
  for (int j = 0; j < total; ++j) {
    if (state_[j] == State::kBasic || x_[j] == 0.0) continue;
    if (is_slack(j)) {
      resid[j - n_] -= x_[j];
    } else {
      const auto& col = j < n_ ? cols_[j] : cols_[n_ + (j - n_ - m_)];
      for (const auto& [r, a] : col) resid[r] -= a * x_[j];
    }
  }
  const Eigen::VectorXd xb = binv_ * resid;
  for (int p = 0; p < m_; ++p) x_[basis_[p]] = xb[p];
}

void RevisedSimplex::pivot(int q, int leave_pos, const Eigen::VectorXd& alpha) {
  const double piv = alpha[leave_pos];
  binv_.row(leave_pos) /= piv;
  const Eigen::RowVectorXd prow = binv_.row(leave_pos);
  for (int p = 0; p < m_; ++p) {
    if (p == leave_pos || alpha[p] == 0.0) continue;
    binv_.row(p) -= alpha[p] * prow;
  }
  basis_[leave_pos] = q;
  state_[q] = State::kBasic;
  ++since_refactor_;
}

bool RevisedSimplex::run(bool phase1) {
  const int total = static_cast<int>(x_.size());
  while (true) {
    if (iterations_ >= opt_.max_iterations) return false;
    if (since_refactor_ >= (strict_ ? kStrictRefactor : opt_.refactor_every)) refactor();

    Eigen::VectorXd cb(m_);
    for (int p = 0; p < m_; ++p) cb[p] = cost_of(basis_[p], phase1);
    const Eigen::VectorXd y = binv_.transpose() * cb;

    const bool bland = degenerate_run_ >= opt_.bland_after;
    int q = -1;
    double best = 0.0;
    double dq = 0.0;
    for (int j = 0; j < total; ++j) {
      const State s = state_[j];
      if (s == State::kBasic || lo_[j] == hi_[j]) continue;
      const double d = cost_of(j, phase1) - dot_column(y, j);
      bool ok = false;
      if (s == State::kLower) ok = d < -opt_.dual_tol;
      else if (s == State::kUpper) ok = d > opt_.dual_tol;
      else ok = std::fabs(d) > opt_.dual_tol;
      if (!ok) continue;
      if (bland) {
        q = j;
        dq = d;
        break;
      }
      if (std::fabs(d) > best) {
        best = std::fabs(d);
        q = j;
        dq = d;
      }
    }
    if (q < 0) return true;

    const double dir = dq < 0.0 ? 1.0 : -1.0;
    const Eigen::VectorXd alpha = column_times_inverse(q);

    // Harris ratio test: pass 1 finds the step allowed with bounds relaxed
    // by the primal tolerance, pass 2 takes the largest pivot within it.
    const double flip = hi_[q] - lo_[q];  // inf when a side is unbounded
    auto limit_of = [&](int p, double slack) {
      const double a = alpha[p];
      const int b = basis_[p];
      const double delta = -dir * a;  // rate of change of x_b
      if (delta < 0.0) {
        return std::isfinite(lo_[b]) ? std::max(0.0, (x_[b] - lo_[b] + slack) / -delta) : kInf;
      }
      return std::isfinite(hi_[b]) ? std::max(0.0, (hi_[b] - x_[b] + slack) / delta) : kInf;
    };
    double relaxed = kInf;
    for (int p = 0; p < m_; ++p) {
      if (std::fabs(alpha[p]) > opt_.pivot_tol) relaxed = std::min(relaxed, limit_of(p, opt_.primal_tol));
    }
    double theta = flip;
    int leave = -1;
    if (relaxed < flip) {
      // Pivots far below the column's scale are taken only as a last resort.
      const double floor = (strict_ ? kStrictPivot : kRelativePivot) * alpha.cwiseAbs().maxCoeff();
      double best_a = 0.0;
      bool best_ok = false;
      for (int p = 0; p < m_; ++p) {
        const double a = std::fabs(alpha[p]);
        if (a <= opt_.pivot_tol) continue;
        const double lim = limit_of(p, 0.0);
        if (lim > relaxed) continue;
        const bool ok = a >= floor;
        bool take;
        if (leave < 0) take = true;
        else if (ok != best_ok) take = ok;
        else take = bland ? basis_[p] < basis_[leave] : a > best_a;
        if (take) {
          leave = p;
          best_a = a;
          best_ok = ok;
          theta = lim;
        }
      }
    }
    if (!std::isfinite(theta)) {
      std::ostringstream msg;
      msg << "column " << q << " unbounded";
      last_pivot_ = msg.str();
      return false;
    }

    degenerate_run_ = theta < 1e-12 ? degenerate_run_ + 1 : 0;
    ++iterations_;
    x_[q] += dir * theta;
    for (int p = 0; p < m_; ++p) x_[basis_[p]] -= dir * theta * alpha[p];

    if (leave < 0) {
      // Entering variable moved to its opposite bound.
      state_[q] = dir > 0.0 ? State::kUpper : State::kLower;
      x_[q] = dir > 0.0 ? hi_[q] : lo_[q];
      continue;
    }
    const int out = basis_[leave];
    const double delta = -dir * alpha[leave];
    if (delta < 0.0) {
      state_[out] = State::kLower;
      x_[out] = lo_[out];
    } else {
      state_[out] = State::kUpper;
      x_[out] = hi_[out];
    }
    std::ostringstream msg;
    msg << "iter " << iterations_ << ": in " << q << " out " << out << " pivot " << alpha[leave];
    last_pivot_ = msg.str();
    pivot(q, leave, alpha);
  }
}

LpSolution RevisedSimplex::collect(LpStatus status) const {
  LpSolution sol;
  sol.status = status;
  sol.iterations = iterations_;
  sol.last_pivot = last_pivot_;
  sol.x.assign(x_.begin(), x_.begin() + n_);
  double obj = 0.0;
  for (int j = 0; j < n_; ++j) obj += cost_[j] * x_[j];
  sol.objective = obj;
  Eigen::VectorXd cb(m_);
  for (int p = 0; p < m_; ++p) cb[p] = basis_[p] < n_ ? cost_[basis_[p]] : 0.0;
  const Eigen::VectorXd y = binv_.transpose() * cb;
  sol.duals.assign(y.data(), y.data() + m_);
  return sol;
}

LpSolution RevisedSimplex::solve() {
  start();
  if (!artificials_.empty()) {
    bool done;
    try {
      done = run(true);
    } catch (const Error& e) {
      LpSolution s = collect(LpStatus::kNumericalFailure);
      s.message = e.what();
      return s;
    }
    if (!done) {
      LpSolution s = collect(iterations_ >= opt_.max_iterations ? LpStatus::kIterationLimit
                                                                 : LpStatus::kNumericalFailure);
      s.message = "phase 1 did not converge";
      return s;
    }
    refactor();
    double infeas = 0.0;
    for (int id : artificials_) infeas += std::fabs(x_[id]);
    if (infeas > 1e-7) {
      LpSolution s = collect(LpStatus::kInfeasible);
      s.message = "phase 1 residual " + std::to_string(infeas);
      return s;
    }
    for (int id : artificials_) {
      hi_[id] = 0.0;
      if (state_[id] != State::kBasic) {
        state_[id] = State::kLower;
        x_[id] = 0.0;
      }
    }
    degenerate_run_ = 0;
  }
  return resolve();
}

int RevisedSimplex::add_column(double cost, double lo, double hi,
                               std::vector<std::pair<int, double>> entries) {
  if (!std::isfinite(lo) || lo > hi) throw_invalid("simplex: added column needs a finite lower bound");
  if (!started_) throw_internal("simplex: add_column before solve");
  // Structural ids are [0, n); slack and artificial ids shift by one.
  const int j = n_;
  std::sort(entries.begin(), entries.end());
  cols_.insert(cols_.begin() + n_, std::move(entries));
  cost_.insert(cost_.begin() + n_, cost);
  lo_.insert(lo_.begin() + n_, lo);
  hi_.insert(hi_.begin() + n_, hi);
  x_.insert(x_.begin() + n_, lo);
  state_.insert(state_.begin() + n_, State::kLower);
  for (int& b : basis_) {
    if (b >= n_) ++b;
  }
  for (int& a : artificials_) ++a;
  ++n_;
  if (lo != 0.0) compute_basics();
  return j;
}

LpSolution RevisedSimplex::resolve() {
  if (!started_) return solve();
  const auto t0 = std::chrono::steady_clock::now();
  LpSolution sol;
  try {
    refactor();
    const bool done = run(false);
    refactor();
    if (done) {
      sol = collect(LpStatus::kOptimal);
    } else if (iterations_ >= opt_.max_iterations) {
      sol = collect(LpStatus::kIterationLimit);
    } else {
      sol = collect(LpStatus::kUnbounded);
    }
  } catch (const Error& e) {
    sol = collect(LpStatus::kNumericalFailure);
    sol.message = e.what();
  }
  sol.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

LpSolution SimplexBackend::solve(const LpModel& model) {
  RevisedSimplex s(model, options_);
  return s.solve();
}

// ---------------------------------------------------------------------------

LpSolution solve_lp(const LpModel& model, LpBackend* backend) {
  const auto t0 = std::chrono::steady_clock::now();
  model.validate();
  SimplexBackend fallback;
  if (backend == nullptr) backend = &fallback;

  const int n = model.num_variables();
  std::vector<char> used(n, 0);
  for (const auto& r : model.rows) {
    for (const auto& [j, a] : r.coeffs) {
      if (a != 0.0) used[j] = 1;
    }
  }

  LpSolution out;
  out.x.assign(n, 0.0);
  out.duals.assign(model.num_rows(), 0.0);

  LpModel reduced;
  reduced.name = model.name;
  std::vector<int> map(n, -1);
  double fixed_obj = model.objective_offset;
  for (int j = 0; j < n; ++j) {
    const auto& v = model.variables[j];
    if (used[j]) {
      map[j] = reduced.add_variable(v.name, v.lo, v.hi, v.cost);
      continue;
    }
    double val;
    if (v.cost > 0.0) val = v.lo;
    else if (v.cost < 0.0) val = v.hi;
    else val = std::isfinite(v.lo) ? v.lo : (std::isfinite(v.hi) ? v.hi : 0.0);
    if (!std::isfinite(val)) {
      out.status = LpStatus::kUnbounded;
      out.message = "variable '" + v.name + "' unbounded in an empty column";
      return out;
    }
    out.x[j] = val;
    fixed_obj += v.cost * val;
  }
  std::vector<int> row_map;
  for (int r = 0; r < model.num_rows(); ++r) {
    const auto& row = model.rows[r];
    std::vector<std::pair<int, double>> coeffs;
    for (const auto& [j, a] : row.coeffs) {
      if (a != 0.0) coeffs.push_back({map[j], a});
    }
    if (coeffs.empty()) {
      const bool ok = (row.sense == Sense::kLe && row.rhs >= -1e-9) ||
                      (row.sense == Sense::kGe && row.rhs <= 1e-9) ||
                      (row.sense == Sense::kEq && std::fabs(row.rhs) <= 1e-9);
      if (!ok) {
        out.status = LpStatus::kInfeasible;
        out.message = "empty row '" + row.name + "' is infeasible";
        return out;
      }
      continue;
    }
    row_map.push_back(r);
    reduced.add_row(row.name, row.sense, row.rhs, std::move(coeffs));
  }

  LpSolution inner = backend->solve(reduced);
  out.status = inner.status;
  out.iterations = inner.iterations;
  out.last_pivot = inner.last_pivot;
  out.message = inner.message;
  for (int j = 0; j < n; ++j) {
    if (map[j] >= 0 && map[j] < static_cast<int>(inner.x.size())) out.x[j] = inner.x[map[j]];
  }
  for (std::size_t k = 0; k < row_map.size() && k < inner.duals.size(); ++k) {
    out.duals[row_map[k]] = inner.duals[k];
  }
  out.objective = inner.objective + fixed_obj;
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

double max_violation(const LpModel& model, const std::vector<double>& x) {
  double worst = 0.0;
  for (int j = 0; j < model.num_variables(); ++j) {
    worst = std::max({worst, model.variables[j].lo - x[j], x[j] - model.variables[j].hi});
  }
  for (const auto& r : model.rows) {
    double s = 0.0;
    for (const auto& [j, a] : r.coeffs) s += a * x[j];
    if (r.sense != Sense::kGe) worst = std::max(worst, s - r.rhs);
    if (r.sense != Sense::kLe) worst = std::max(worst, r.rhs - s);
  }
  return worst;
}

}  // namespace scbf
