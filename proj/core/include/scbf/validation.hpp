#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scbf/controller.hpp"
#include "scbf/geometry.hpp"
#include "scbf/synthesis.hpp"
#include "scbf/system.hpp"

namespace scbf {

/// Counter-based generator: draw k of stream (seed, trial) is a pure
/// function of the three values, so trajectories do not depend on the
/// order in which threads run them.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();   // Box-Muller

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct McOptions {
  int trials = 500;
  int steps = 50;
  std::uint64_t seed = 0;
  bool record = false;  // keep trajectories
};

struct TrajectoryPoint {
  int trial = 0;
  int step = 0;
  std::vector<double> x;
  int region = -1;  // 0-based, -1 outside the safe regions
  bool violated = false;
};

struct McReport {
  int trials = 0;
  int horizon = 0;
  int violations = 0;
  double empirical_safety = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> first_exit;  // step of first exit per trial, -1 if none
  std::vector<TrajectoryPoint> trajectory;
};

/// Closed-loop runs from uniform starts in X0. A trial is a violation at
/// its first exit from X_s and stops there.
McReport simulate(const SystemSpec& spec, const Partition& partition, const Controller& controller,
                  const McOptions& options);

/// One-sided Clopper-Pearson lower bound on the success probability.
double binomial_lower_bound(int successes, int trials, double confidence);
double binomial_bound(const McReport& report, double confidence);

struct CertReport {
  int samples_per_region = 0;
  long samples = 0;
  double max_slack = -1.0;
  int worst_region = -1;
  std::vector<double> worst_x;
  std::vector<double> region_slack;  // worst slack per region
  std::vector<int> negative_regions;   // (8a) failures
  std::vector<int> initial_regions;    // (8b) failures
  bool nonnegative = true;
  bool initial_ok = true;
  bool martingale_ok = true;
  bool passed = true;
};

/// Points of a box: the 2^n corners, the center, then Halton points until
/// `count` points exist (never fewer than corners plus center).
std::vector<std::vector<double>> region_samples(const Box& box, int count);

/// Checks (8a), (8b) exactly and (8c) with the exact kernel at sampled states:
/// slack = sum_j b_j T(X_j | x, u_i) + T(X_u | x, u_i) - b_i - beta_i. Passes
/// when the largest slack is at most 1e-6.
CertReport check_certificate(const SystemSpec& spec, const Partition& partition,
                             const Barrier& barrier, const Controller& controller,
                             int samples_per_region = 64);

}  // namespace scbf
