#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "scbf/lp.hpp"

namespace scbf {

namespace {

// Widest %g rendering that still fits the 12-character value field.
std::string field12(double v) {
  char buf[64];
  for (int prec = 12; prec >= 1; --prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::string(buf).size() <= 12) return buf;
  }
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string row_name(int r) { return "R" + std::to_string(r); }
std::string col_name(int j) { return "C" + std::to_string(j); }

void entry(std::ostream& out, const std::string& kind, const std::string& a,
           const std::string& b, double v) {
  // Fields start at columns 2, 5, 15 and 25.
  out << ' ' << pad(kind, 2) << ' ' << pad(a, 8) << "  " << pad(b, 8) << "  " << field12(v)
      << '\n';
}

}  // namespace

void write_mps(const LpModel& model, std::ostream& out) {
  model.validate();
  out << "* scbf model " << model.name << ": " << model.num_variables() << " columns, "
      << model.num_rows() << " rows\n";
  for (const auto& [k, v] : model.metadata) out << "* " << k << " = " << v << '\n';
  const bool names = model.num_variables() + model.num_rows() <= 5000;
  if (names) {
    for (int j = 0; j < model.num_variables(); ++j) {
      out << "* " << col_name(j) << ' ' << model.variables[j].name << '\n';
    }
    for (int r = 0; r < model.num_rows(); ++r) {
      out << "* " << row_name(r) << ' ' << model.rows[r].name << '\n';
    }
  }
  out << pad("NAME", 14) << model.name.substr(0, 8) << '\n';
  out << "ROWS\n";
  out << " N  OBJ\n";
  for (int r = 0; r < model.num_rows(); ++r) {
    const char* s = model.rows[r].sense == Sense::kLe ? "L" : model.rows[r].sense == Sense::kGe ? "G" : "E";
    out << ' ' << pad(s, 2) << ' ' << row_name(r) << '\n';
  }

  std::vector<std::vector<std::pair<int, double>>> cols(model.num_variables());
  for (int r = 0; r < model.num_rows(); ++r) {
    for (const auto& [j, a] : model.rows[r].coeffs) cols[j].push_back({r, a});
  }
  out << "COLUMNS\n";
  for (int j = 0; j < model.num_variables(); ++j) {
    const std::string c = col_name(j);
    if (model.variables[j].cost != 0.0) entry(out, "", c, "OBJ", model.variables[j].cost);
    for (const auto& [r, a] : cols[j]) entry(out, "", c, row_name(r), a);
    if (cols[j].empty() && model.variables[j].cost == 0.0) entry(out, "", c, "OBJ", 0.0);
  }
  out << "RHS\n";
  if (model.objective_offset != 0.0) entry(out, "", "RHS", "OBJ", -model.objective_offset);
  for (int r = 0; r < model.num_rows(); ++r) {
    if (model.rows[r].rhs != 0.0) entry(out, "", "RHS", row_name(r), model.rows[r].rhs);
  }
  out << "BOUNDS\n";
  for (int j = 0; j < model.num_variables(); ++j) {
    const auto& v = model.variables[j];
    const std::string c = col_name(j);
    if (v.lo == v.hi) {
      entry(out, "FX", "BND", c, v.lo);
      continue;
    }
    const bool lo_inf = !std::isfinite(v.lo);
    const bool hi_inf = !std::isfinite(v.hi);
    if (lo_inf && hi_inf) {
      out << " FR BND       " << c << '\n';
      continue;
    }
    if (lo_inf) out << " MI BND       " << c << '\n';
    else if (v.lo != 0.0 || v.hi < 0.0) entry(out, "LO", "BND", c, v.lo);
    if (!hi_inf) entry(out, "UP", "BND", c, v.hi);
  }
  out << "ENDATA\n";
}

}  // namespace scbf
