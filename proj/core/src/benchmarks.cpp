#include <array>
#include <string_view>

#include "scbf/error.hpp"
#include "scbf/system.hpp"

namespace scbf {
namespace {

#include "benchmark_data.inc"

struct Entry {
  std::string_view name;
  std::string_view text;
};

constexpr std::array<Entry, 4> kEntries = {{
    {"linear-convex", kLinearConvex},
    {"linear-nonconvex", kLinearNonconvex},
    {"temperature-3room", kTemperature},
    {"unicycle-4d", kUnicycle},
}};

}  // namespace

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& e : kEntries) out.emplace_back(e.name);
    return out;
  }();
  return names;
}

std::string_view benchmark_config(std::string_view name) {
  for (const auto& e : kEntries) {
    if (e.name == name) return e.text;
  }
  // Short aliases.
  if (name == "temperature") return kTemperature;
  if (name == "unicycle") return kUnicycle;
  throw_invalid("unknown benchmark '" + std::string(name) + "'");
}

SystemSpec load_benchmark(std::string_view name) { return load_spec(benchmark_config(name)); }

}  // namespace scbf
