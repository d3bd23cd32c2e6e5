#include "scbf/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/beta.hpp>

#include "scbf/error.hpp"
#include "scbf/kernel.hpp"
#include "scbf/parallel.hpp"

namespace scbf {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

std::uint64_t StreamRng::next_u64() {
  return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
}

double StreamRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double StreamRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

McReport simulate(const SystemSpec& spec, const Partition& partition, const Controller& controller,
                  const McOptions& options) {
  if (options.trials < 1) throw_invalid("simulate: trials must be >= 1");
  if (options.steps < 0) throw_invalid("simulate: steps must be >= 0");
  if (controller.size() != partition.size()) {
    throw_mismatch("simulate: controller has " + std::to_string(controller.size()) +
                   " regions, partition has " + std::to_string(partition.size()));
  }
  const int n = spec.n;
  McReport rep;
  rep.trials = options.trials;
  rep.horizon = options.steps;
  rep.seed = options.seed;
  rep.first_exit.assign(options.trials, -1);
  std::vector<std::vector<TrajectoryPoint>> paths(options.record ? options.trials : 0);

  const Eigen::MatrixXd& tinv = partition.whitening.t_inverse;
  parallel_for(options.trials, [&](std::size_t trial) {
    StreamRng rng(options.seed, trial);
    std::vector<double> x(n);
    for (int d = 0; d < n; ++d) {
      x[d] = spec.initial_box[d].lo + rng.uniform() * spec.initial_box[d].width();
    }
    auto record = [&](int step, bool violated) {
      if (!options.record) return;
      const auto r = partition.locate(x);
      paths[trial].push_back({static_cast<int>(trial), step, x, r ? *r : -1, violated});
    };
    record(0, false);
    Eigen::VectorXd eps(n);
    for (int step = 1; step <= options.steps; ++step) {
      const std::vector<double> u = lookup(controller, partition, x);
      const std::vector<double> fx = spec.f.evaluate(x, u);
      for (int d = 0; d < n; ++d) eps[d] = rng.normal();
      const Eigen::VectorXd w = tinv * eps;
      for (int d = 0; d < n; ++d) x[d] = fx[d] + w[d];
      const bool bad = !spec.in_safe_set(x);
      record(step, bad);
      if (bad) {
        rep.first_exit[trial] = step;
        break;
      }
    }
  });

  for (int t = 0; t < options.trials; ++t) {
    if (rep.first_exit[t] >= 0) ++rep.violations;
  }
  rep.empirical_safety = 1.0 - static_cast<double>(rep.violations) / options.trials;
  for (auto& p : paths) {
    rep.trajectory.insert(rep.trajectory.end(), std::make_move_iterator(p.begin()),
                          std::make_move_iterator(p.end()));
  }
  return rep;
}

double binomial_lower_bound(int successes, int trials, double confidence) {
  if (trials < 1 || successes < 0 || successes > trials) {
    throw_invalid("binomial bound: need 0 <= successes <= trials, trials >= 1");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) throw_invalid("binomial bound: confidence in (0, 1)");
  if (successes == 0) return 0.0;
  const boost::math::beta_distribution<double> dist(successes, trials - successes + 1);
  return boost::math::quantile(dist, 1.0 - confidence);
}

double binomial_bound(const McReport& report, double confidence) {
  return binomial_lower_bound(report.trials - report.violations, report.trials, confidence);
}

std::vector<std::vector<double>> region_samples(const Box& box, int count) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  const int n = static_cast<int>(box.size());
  if (n > 12) throw_invalid("region_samples: dimension above 12");
  std::vector<std::vector<double>> pts;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<double> p(n);
    for (int d = 0; d < n; ++d) p[d] = (mask >> d) & 1 ? box[d].hi : box[d].lo;
    pts.push_back(std::move(p));
  }
  pts.push_back(box_center(box));
  for (int idx = 1; static_cast<int>(pts.size()) < count; ++idx) {
    std::vector<double> p(n);
    for (int d = 0; d < n; ++d) {
      double f = 1.0, r = 0.0;
      for (int i = idx; i > 0; i /= kPrimes[d]) {
        f /= kPrimes[d];
        r += f * (i % kPrimes[d]);
      }
      p[d] = box[d].lo + r * box[d].width();
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

CertReport check_certificate(const SystemSpec& spec, const Partition& partition,
                             const Barrier& barrier, const Controller& controller,
                             int samples_per_region) {
  const int k = partition.size();
  if (static_cast<int>(barrier.b.size()) != k || static_cast<int>(barrier.beta_i.size()) != k ||
      controller.size() != k) {
    throw_mismatch("check_certificate: barrier, controller and partition disagree");
  }
  CertReport rep;
  rep.samples_per_region = samples_per_region;

  for (int i = 0; i < k; ++i) {
    if (!(barrier.b[i] >= 0.0)) rep.negative_regions.push_back(i);
  }
  for (int i : partition.initial_regions()) {
    if (!(barrier.b[i] <= barrier.eta)) rep.initial_regions.push_back(i);
  }
  rep.nonnegative = rep.negative_regions.empty();
  rep.initial_ok = rep.initial_regions.empty();

  rep.region_slack.assign(k, -kInf);
  std::vector<std::vector<double>> worst(k);
  std::vector<long> counts(k, 0);
  parallel_for(k, [&](std::size_t i) {
    const Region& r = partition.regions[i];
    const auto& u = controller.controls[i];
    const double rhs = barrier.b[i] + (barrier.horizon.infinite ? 0.0 : barrier.beta_i[i]);
    for (const auto& xw : region_samples(r.box(), samples_per_region)) {
      const Eigen::VectorXd x = partition.whitening.unapply(xw);
      const std::span<const double> xs(x.data(), x.size());
      const KernelRow row = kernel_row(spec, partition, xs, u);
      double v = row.unsafe;
      for (int j = 0; j < k; ++j) v += barrier.b[j] * row.probs[j];
      const double slack = v - rhs;
      if (slack > rep.region_slack[i]) {
        rep.region_slack[i] = slack;
        worst[i].assign(xs.begin(), xs.end());
      }
      ++counts[i];
    }
  });
  for (int i = 0; i < k; ++i) {
    rep.samples += counts[i];
    if (rep.worst_region < 0 || rep.region_slack[i] > rep.max_slack) {
      rep.max_slack = rep.region_slack[i];
      rep.worst_region = i;
    }
  }
  if (rep.worst_region >= 0) rep.worst_x = worst[rep.worst_region];
  rep.martingale_ok = rep.max_slack <= 1e-6;
  rep.passed = rep.nonnegative && rep.initial_ok && rep.martingale_ok;
  return rep;
}

}  // namespace scbf
