// scbf: synthesize, simulate and check piecewise-constant stochastic
// barrier certificates.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "scbf/controller.hpp"
#include "scbf/error.hpp"
#include "scbf/geometry.hpp"
#include "scbf/io.hpp"
#include "scbf/relaxation.hpp"
#include "scbf/synthesis.hpp"
#include "scbf/system.hpp"
#include "scbf/validation.hpp"

namespace fs = std::filesystem;
using namespace scbf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Source {
  std::string config;
  std::string bench;

  void attach(CLI::App* app) {
    auto* c = app->add_option("--config", config, "configuration file (JSON)");
    auto* b = app->add_option("--bench", bench, "shipped benchmark name");
    c->excludes(b);
  }

  SystemSpec load() const {
    if (!config.empty()) return load_spec_file(config);
    if (!bench.empty()) return load_benchmark(bench);
    throw_invalid("one of --config or --bench is required");
  }
};

struct SynthRun {
  Partition partition;
  BoundsMatrix bounds;
  SynthesisResult result;
  double bound_seconds = 0.0;
  double synth_seconds = 0.0;
};

SynthRun run_synth(const SystemSpec& spec, const std::vector<int>& grid, const Horizon& horizon,
                   BoundMode mode, LpRoute route, bool dense) {
  SynthRun run;
  const auto t0 = Clock::now();
  run.partition = build_partition(spec, grid);
  run.bounds = bound_all(spec, run.partition, mode);
  run.bound_seconds = seconds_since(t0);
  SynthesisOptions opt;
  opt.horizon = horizon;
  opt.route = route;
  opt.lp.dense = dense;
  const auto t1 = Clock::now();
  run.result = synthesize(spec, run.partition, run.bounds, opt);
  run.synth_seconds = seconds_since(t1);
  return run;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw_invalid("cannot create output directory '" + p.string() + "'");
  return p;
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text_file(path.string(), ss.str());
}

std::string grid_text(const std::vector<int>& g) {
  std::string s;
  for (std::size_t d = 0; d < g.size(); ++d) s += (d ? "x" : "") + std::to_string(g[d]);
  return s;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Source src;
  std::string grid;
  std::string horizon;
  std::string mode = "affine";
  std::string route = "auto";
  std::string out = ".";
  bool dense = false;
  bool dump_bounds = false;
  bool dump_lp = false;
  bool timings = false;
};

int cmd_synth(const SynthArgs& a) {
  const SystemSpec spec = a.src.load();
  const std::vector<int> grid = a.grid.empty() ? spec.default_grid : parse_grid_counts(a.grid);
  if (grid.empty()) throw_invalid("grid: none given and the config has no default");
  const Horizon horizon = a.horizon.empty() ? spec.horizon : parse_horizon(a.horizon);
  const SynthRun run = run_synth(spec, grid, horizon, parse_bound_mode(a.mode),
                                 parse_lp_route(a.route), a.dense);
  const auto& res = run.result;
  const fs::path out = prepare_out(a.out);

  RunSummary s;
  s.benchmark = spec.name;
  s.K = run.partition.size();
  s.grid_counts = grid;
  s.eta = res.barrier.eta;
  s.beta = res.barrier.beta;
  s.p_safe = res.barrier.p_safe;
  if (a.timings) {
    s.synth_seconds = run.synth_seconds;
    s.bound_seconds = run.bound_seconds;
  }
  s.lp_variables = res.lp_variables;
  s.lp_constraints = res.lp_constraints;

  write_text_file((out / "summary.json").string(), summary_json(s));
  write_text_file((out / "lp_solution.json").string(),
                  lp_solution_json(res.barrier, "optimal",
                                   a.timings ? std::optional<double>(res.lp_seconds) : std::nullopt,
                                   res.lp_variables, res.lp_constraints));
  write_with(out / "partition.csv", [&](std::ostream& o) { write_partition_csv(o, run.partition, spec.m); });
  write_with(out / "barrier.csv", [&](std::ostream& o) { write_barrier_csv(o, res.barrier, run.partition, spec.m); });
  write_with(out / "controller.csv", [&](std::ostream& o) { write_controller_csv(o, res.controller, run.partition); });
  if (a.dump_bounds) write_with(out / "bounds.csv", [&](std::ostream& o) { write_bounds_csv(o, run.bounds); });
  if (a.dump_lp) {
    if (res.has_model) {
      write_with(out / "model.mps", [&](std::ostream& o) { write_mps(res.model, o); });
    } else {
      std::cerr << "note: the column-generation route keeps no single model; use --route dual for an MPS dump\n";
    }
  }

  std::printf("%s grid=%s K=%d horizon=%s\n", spec.name.c_str(), grid_text(grid).c_str(),
              s.K, horizon.to_string().c_str());
  std::printf("eta=%.6g beta=%.6g p_safe=%.6g\n", s.eta, s.beta, s.p_safe);
  std::printf("route=%s lp_variables=%d lp_constraints=%d policy_iterations=%d\n",
              res.route.c_str(), s.lp_variables, s.lp_constraints, res.policy_iterations);
  std::printf("bound_seconds=%.3f synth_seconds=%.3f\n", run.bound_seconds, run.synth_seconds);
  return 0;
}

// ---------------------------------------------------------------------------

struct SimArgs {
  Source src;
  std::string controller;
  int trials = 500;
  int steps = 50;
  std::uint64_t seed = 0;
  double confidence = 0.95;
  std::string out = ".";
  bool trajectories = false;
};

ControllerFile load_controller(const std::string& path, const SystemSpec& spec, Partition& partition) {
  std::ifstream in(path);
  if (!in) throw_invalid("controller not found: " + path);
  ControllerFile cf = read_controller_csv(in);
  if (cf.tag.state_dim != spec.n || cf.tag.control_dim != spec.m) {
    throw_mismatch("partition mismatch: controller dimensions do not match the config");
  }
  partition = build_partition(spec, cf.tag.grid);
  check_tag(cf.tag, partition, spec.m);
  cf.controller.fallback = default_fallback(spec.control_box);
  return cf;
}

int cmd_simulate(const SimArgs& a) {
  const SystemSpec spec = a.src.load();
  Partition partition;
  const ControllerFile cf = load_controller(a.controller, spec, partition);
  McOptions opt;
  opt.trials = a.trials;
  opt.steps = a.steps;
  opt.seed = a.seed;
  opt.record = a.trajectories;
  const McReport rep = simulate(spec, partition, cf.controller, opt);
  const double lb = binomial_bound(rep, a.confidence);
  const fs::path out = prepare_out(a.out);
  write_text_file((out / "mc_report.json").string(), mc_report_json(rep, a.confidence, lb));
  if (a.trajectories) {
    write_with(out / "trajectories.csv", [&](std::ostream& o) { write_trajectory_csv(o, rep, spec.n); });
  }
  std::printf("%s trials=%d steps=%d seed=%llu violations=%d empirical=%.6g lower_bound=%.6g\n",
              spec.name.c_str(), rep.trials, rep.horizon,
              static_cast<unsigned long long>(rep.seed), rep.violations, rep.empirical_safety, lb);
  return 0;
}

// ---------------------------------------------------------------------------

struct CheckArgs {
  Source src;
  std::string barrier;
  std::string controller;
  std::string horizon;
  int samples = 64;
  std::string out = ".";
};

int cmd_check(const CheckArgs& a) {
  const SystemSpec spec = a.src.load();
  Partition partition;
  const ControllerFile cf = load_controller(a.controller, spec, partition);
  std::ifstream in(a.barrier);
  if (!in) throw_invalid("barrier not found: " + a.barrier);
  BarrierFile bf = read_barrier_csv(in);
  check_tag(bf.tag, partition, spec.m);
  const Horizon horizon = a.horizon.empty() ? spec.horizon : parse_horizon(a.horizon);
  const Barrier barrier = build_barrier(bf.b, bf.beta_i, partition, horizon);
  const CertReport rep = check_certificate(spec, partition, barrier, cf.controller, a.samples);
  const fs::path out = prepare_out(a.out);
  write_text_file((out / "cert_report.json").string(), cert_report_json(rep));
  std::printf("%s regions=%d samples=%ld max_slack=%.3e (region %d) 8a=%s 8b=%s 8c=%s\n",
              spec.name.c_str(), partition.size(), rep.samples, rep.max_slack, rep.worst_region + 1,
              rep.nonnegative ? "ok" : "FAIL", rep.initial_ok ? "ok" : "FAIL",
              rep.martingale_ok ? "ok" : "FAIL");
  if (!rep.nonnegative) std::printf("negative b in %zu regions\n", rep.negative_regions.size());
  return rep.passed ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct TableArgs {
  std::string bench = "all";
  std::string out = ".";
  int trials = 500;
  std::uint64_t seed = 0;
  int samples = 64;
  std::string grids;  // "10x10;20x20" overrides the configured grids
};

int cmd_table(const TableArgs& a) {
  if (a.bench.empty()) throw_invalid("--bench: empty benchmark name");
  std::vector<std::string> names;
  if (a.bench == "all") names = benchmark_names();
  else names.push_back(a.bench);
  for (const auto& n : names) benchmark_config(n);  // unknown names fail early

  const fs::path out = prepare_out(a.out);
  std::ostringstream csv;
  csv << "benchmark,grid,K,eta,beta,p_safe,synth_seconds,bound_seconds,lp_variables,"
         "lp_constraints,mc_violations,mc_trials,mc_empirical,mc_lower_bound,cert_max_slack,status\n";
  for (const auto& name : names) {
    const SystemSpec spec = load_benchmark(name);
    std::vector<std::vector<int>> grids = spec.table_grids;
    if (!a.grids.empty()) {
      grids.clear();
      std::stringstream ss(a.grids);
      std::string g;
      while (std::getline(ss, g, ';')) grids.push_back(parse_grid_counts(g));
    }
    if (grids.empty()) grids.push_back(spec.default_grid);
    for (const auto& grid : grids) {
      csv << spec.name << ',' << grid_text(grid) << ',';
      try {
        const SynthRun run = run_synth(spec, grid, spec.horizon, BoundMode::kAffine, LpRoute::kAuto, false);
        const auto& res = run.result;
        McOptions mo;
        mo.trials = a.trials;
        mo.steps = spec.horizon.infinite ? 50 : spec.horizon.steps;
        mo.seed = a.seed;
        const McReport rep = simulate(spec, run.partition, res.controller, mo);
        const double lb = binomial_bound(rep, 0.95);
        const CertReport cert = check_certificate(spec, run.partition, res.barrier, res.controller, a.samples);
        csv << run.partition.size() << ',' << format_double(res.barrier.eta) << ','
            << format_double(res.barrier.beta) << ',' << format_double(res.barrier.p_safe) << ','
            << format_double(run.synth_seconds) << ',' << format_double(run.bound_seconds) << ','
            << res.lp_variables << ',' << res.lp_constraints << ',' << rep.violations << ','
            << rep.trials << ',' << format_double(rep.empirical_safety) << ',' << format_double(lb)
            << ',' << format_double(cert.max_slack) << ",ok\n";
        std::printf("%-18s %-8s K=%-5d p_safe=%.4f eta=%.4g beta=%.4g mc=%d/%d lb=%.4f slack=%.2e t=%.1fs+%.1fs\n",
                    spec.name.c_str(), grid_text(grid).c_str(), run.partition.size(), res.barrier.p_safe,
                    res.barrier.eta, res.barrier.beta, rep.trials - rep.violations, rep.trials, lb,
                    cert.max_slack, run.bound_seconds, run.synth_seconds);
      } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg) {
          if (c == ',' || c == '\n') c = ';';
        }
        csv << ",,,,,,,,,,,,,error: " << msg << '\n';
        std::printf("%-18s %-8s error: %s\n", spec.name.c_str(), grid_text(grid).c_str(), e.what());
      }
      std::fflush(stdout);
    }
  }
  write_text_file((out / "table.csv").string(), csv.str());
  return 0;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kInvalidInput: return 2;
    case ErrorKind::kDataMismatch: return 3;
    case ErrorKind::kSolver: return 4;
    case ErrorKind::kInternal: return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Piecewise-constant stochastic control barrier synthesis"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "synthesize a barrier and controller");
  sa.src.attach(synth);
  synth->add_option("--grid", sa.grid, "cells per dimension, e.g. 10,10");
  synth->add_option("--horizon", sa.horizon, "steps N or 'infinite'");
  synth->add_option("--mode", sa.mode, "affine or constant kernel bounds");
  synth->add_option("--route", sa.route, "LP route: auto, dual or columns");
  synth->add_option("--out", sa.out, "output directory");
  synth->add_flag("--dense", sa.dense, "keep every destination in the LP");
  synth->add_flag("--dump-bounds", sa.dump_bounds, "write bounds.csv");
  synth->add_flag("--dump-lp", sa.dump_lp, "write model.mps (dual route)");
  synth->add_flag("--timings", sa.timings, "record wall-clock times in the summary");

  SimArgs ma;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo closed-loop runs");
  ma.src.attach(sim);
  sim->add_option("--controller", ma.controller, "controller CSV")->required();
  sim->add_option("--trials", ma.trials, "number of trajectories");
  sim->add_option("--steps", ma.steps, "steps per trajectory");
  sim->add_option("--seed", ma.seed, "RNG seed");
  sim->add_option("--confidence", ma.confidence, "confidence of the lower bound");
  sim->add_option("--out", ma.out, "output directory");
  sim->add_flag("--trajectories", ma.trajectories, "write trajectories.csv");

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "re-check a certificate with the exact kernel");
  ca.src.attach(check);
  check->add_option("--barrier", ca.barrier, "barrier CSV")->required();
  check->add_option("--controller", ca.controller, "controller CSV")->required();
  check->add_option("--horizon", ca.horizon, "steps N or 'infinite'");
  check->add_option("--samples", ca.samples, "samples per region");
  check->add_option("--out", ca.out, "output directory");

  TableArgs ta;
  auto* table = app.add_subcommand("table", "benchmark results table");
  table->add_option("--bench", ta.bench, "'all' or a benchmark name");
  table->add_option("--out", ta.out, "output directory");
  table->add_option("--trials", ta.trials, "Monte Carlo trajectories");
  table->add_option("--seed", ta.seed, "RNG seed");
  table->add_option("--samples", ta.samples, "certificate samples per region");
  table->add_option("--grids", ta.grids, "grids to run, e.g. '10x10;20x20'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*sim) return cmd_simulate(ma);
    if (*check) return cmd_check(ca);
    if (*table) return cmd_table(ta);
  } catch (const Error& e) {
    std::cerr << "scbf: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "scbf: " << e.what() << '\n';
    return 4;
  }
  return 2;
}
