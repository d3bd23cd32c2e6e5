#include "scbf/system.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scbf/error.hpp"

namespace scbf {

using nlohmann::json;

Horizon parse_horizon(std::string_view text) {
  if (text == "infinite" || text == "inf") return Horizon::unbounded();
  int n = 0;
  if (text.empty()) throw_invalid("horizon: empty");
  for (char c : text) {
    if (c < '0' || c > '9') throw_invalid("horizon: expected integer or 'infinite', got '" +
                                          std::string(text) + "'");
    n = 10 * n + (c - '0');
  }
  return Horizon::finite(n);
}

bool SystemSpec::in_safe_set(std::span<const double> x) const {
  if (!box_contains(domain_box, x)) return false;
  for (const auto& ob : obstacles) {
    bool inside = true;
    for (std::size_t d = 0; d < ob.size(); ++d) {
      if (!(ob[d].lo < x[d] && x[d] < ob[d].hi)) {
        inside = false;
        break;
      }
    }
    if (inside) return false;
  }
  return true;
}

namespace {

void check_box(const Box& box, std::size_t dim, const std::string& path, bool allow_flat) {
  if (box.size() != dim) {
    throw_invalid(path + ": expected " + std::to_string(dim) + " intervals, got " +
                  std::to_string(box.size()));
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const auto& iv = box[d];
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw_invalid(path + "[" + std::to_string(d) + "]: bounds must be finite");
    }
    if (allow_flat ? iv.lo > iv.hi : iv.lo >= iv.hi) {
      throw_invalid(path + "[" + std::to_string(d) + "]: empty interval");
    }
  }
}

}  // namespace

void SystemSpec::validate() const {
  if (n <= 0) throw_invalid("dimensions.state: must be positive");
  if (m < 0) throw_invalid("dimensions.control: must be nonnegative");
  if (f.state_dim() != n || f.control_dim() != m) throw_invalid("dynamics: dimension mismatch");
  f.validate();

  if (sigma.rows() != n || sigma.cols() != n) {
    throw_invalid("noise.covariance: expected " + std::to_string(n) + "x" + std::to_string(n));
  }
  const double scale = sigma.cwiseAbs().maxCoeff();
  if (!sigma.allFinite()) throw_invalid("noise.covariance: non-finite entry");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
    throw_invalid("noise.covariance: covariance not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw_invalid("noise.covariance: covariance not positive-definite");
  }

  check_box(domain_box, n, "domain", false);
  check_box(control_box, m, "control", true);
  check_box(initial_box, n, "initial", true);
  for (std::size_t k = 0; k < obstacles.size(); ++k) {
    check_box(obstacles[k], n, "obstacles[" + std::to_string(k) + "]", false);
  }
  for (int d = 0; d < n; ++d) {
    if (!domain_box[d].contains(initial_box[d])) {
      throw_invalid("initial: initial box outside safe set (dimension " + std::to_string(d) + ")");
    }
  }
  for (std::size_t k = 0; k < obstacles.size(); ++k) {
    bool overlap = true;
    for (int d = 0; d < n; ++d) {
      const auto& o = obstacles[k][d];
      const auto& i = initial_box[d];
      if (!(std::max(o.lo, i.lo) < std::min(o.hi, i.hi))) {
        overlap = false;
        break;
      }
    }
    if (overlap) {
      throw_invalid("initial: initial box outside safe set (intersects obstacles[" +
                    std::to_string(k) + "])");
    }
  }
  if (!horizon.infinite && horizon.steps < 0) throw_invalid("horizon: must be nonnegative");
}

namespace {

Box parse_box(const json& j, const std::string& path) {
  if (!j.is_array()) throw_invalid(path + ": expected a list of [lo, hi] pairs");
  Box box;
  for (std::size_t d = 0; d < j.size(); ++d) {
    const auto& p = j[d];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw_invalid(path + "[" + std::to_string(d) + "]: expected [lo, hi]");
    }
    box.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return box;
}

Eigen::MatrixXd parse_matrix(const json& j, int n, const std::string& path) {
  Eigen::MatrixXd out(n, n);
  std::vector<double> flat;
  if (!j.is_array()) throw_invalid(path + ": expected a matrix");
  for (const auto& row : j) {
    if (row.is_array()) {
      for (const auto& v : row) {
        if (!v.is_number()) throw_invalid(path + ": non-numeric entry");
        flat.push_back(v.get<double>());
      }
    } else if (row.is_number()) {
      flat.push_back(row.get<double>());
    } else {
      throw_invalid(path + ": non-numeric entry");
    }
  }
  if (static_cast<int>(flat.size()) != n * n) {
    throw_invalid(path + ": expected " + std::to_string(n * n) + " entries (row-major)");
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out(r, c) = flat[r * n + c];
  }
  return out;
}

std::vector<int> parse_grid(const json& j, const std::string& path) {
  if (!j.is_array()) throw_invalid(path + ": expected a list of cell counts");
  std::vector<int> g;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<int>() < 1) throw_invalid(path + ": counts must be >= 1");
    g.push_back(v.get<int>());
  }
  return g;
}

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) throw_invalid(std::string(key) + ": missing field");
  return j.at(key);
}

}  // namespace

SystemSpec load_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw_invalid(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw_invalid("malformed document: expected an object");

  SystemSpec spec;
  spec.name = doc.value("name", std::string("unnamed"));
  spec.notes = doc.value("notes", std::string());

  const auto& dims = require(doc, "dimensions");
  if (!dims.contains("state") || !dims["state"].is_number_integer()) {
    throw_invalid("dimensions.state: missing or not an integer");
  }
  spec.n = dims["state"].get<int>();
  spec.m = dims.contains("control") ? dims["control"].get<int>() : 0;
  if (spec.n <= 0) throw_invalid("dimensions.state: must be positive");
  if (spec.m < 0) throw_invalid("dimensions.control: must be nonnegative");

  const auto& dyn = require(doc, "dynamics");
  if (!dyn.is_array()) throw_invalid("dynamics: expected a list of expressions");
  std::vector<std::string> exprs;
  for (const auto& e : dyn) {
    if (!e.is_string()) throw_invalid("dynamics: expected strings");
    exprs.push_back(e.get<std::string>());
  }
  spec.f = parse_dynamics(exprs, spec.n, spec.m);

  const auto& noise = require(doc, "noise");
  if (!noise.contains("covariance")) throw_invalid("noise.covariance: missing field");
  spec.sigma = parse_matrix(noise["covariance"], spec.n, "noise.covariance");

  spec.domain_box = parse_box(require(doc, "domain"), "domain");
  spec.initial_box = parse_box(require(doc, "initial"), "initial");
  spec.control_box = spec.m > 0 ? parse_box(require(doc, "control"), "control") : Box{};
  if (doc.contains("obstacles")) {
    const auto& obs = doc["obstacles"];
    if (!obs.is_array()) throw_invalid("obstacles: expected a list of boxes");
    for (std::size_t k = 0; k < obs.size(); ++k) {
      spec.obstacles.push_back(parse_box(obs[k], "obstacles[" + std::to_string(k) + "]"));
    }
  }

  if (doc.contains("horizon")) {
    const auto& h = doc["horizon"];
    if (h.is_string()) spec.horizon = parse_horizon(h.get<std::string>());
    else if (h.is_number_integer()) spec.horizon = Horizon::finite(h.get<int>());
    else throw_invalid("horizon: expected integer or \"infinite\"");
  }
  if (doc.contains("grid")) spec.default_grid = parse_grid(doc["grid"], "grid");
  if (doc.contains("table_grids")) {
    const auto& tg = doc["table_grids"];
    if (!tg.is_array()) throw_invalid("table_grids: expected a list of grids");
    for (std::size_t k = 0; k < tg.size(); ++k) {
      spec.table_grids.push_back(parse_grid(tg[k], "table_grids[" + std::to_string(k) + "]"));
    }
  }

  spec.validate();
  return spec;
}

SystemSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_invalid("config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_spec(ss.str());
}

}  // namespace scbf
