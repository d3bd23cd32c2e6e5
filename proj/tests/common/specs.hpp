#pragma once

#include <string>

#include "scbf/system.hpp"

namespace testspec {

/// 1D system x+ = a*x + c*u + w on [-1, 1], initial set [x0lo, x0hi].
inline scbf::SystemSpec line(double a, double c, double var, double x0lo = -0.1,
                             double x0hi = 0.1, double ulo = -1.0, double uhi = 1.0) {
  auto num = [](double v) { return std::to_string(v); };
  const std::string doc = R"({"name": "line", "dimensions": {"state": 1, "control": 1},
    "dynamics": [")" + num(a) + "*x1 + " + num(c) + R"(*u1"],
    "noise": {"covariance": [[)" + num(var) + R"(]]},
    "domain": [[-1, 1]], "initial": [[)" + num(x0lo) + ", " + num(x0hi) + R"(]],
    "obstacles": [], "control": [[)" + num(ulo) + ", " + num(uhi) + R"(]], "horizon": 50})";
  return scbf::load_spec(doc);
}

}  // namespace testspec
