#pragma once

// Browser-swarm simulation: worker slots running sequential sessions that are
// killed at their dwell time and replaced by fresh ones.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "webswarm/bundle.hpp"
#include "webswarm/domain.hpp"
#include "webswarm/events.hpp"
#include "webswarm/manager.hpp"
#include "webswarm/random.hpp"

namespace webswarm {

namespace dwell {

/// Constant: +infinity. Weibull: scale * (-ln(1-u))^(1/shape).
double sample(const DwellModel& model, SplitMix64& rng);

double weibull_cdf(double t, double shape, double scale);
double weibull_median(double shape, double scale);
double weibull_mean(double shape, double scale);

/// Scale giving the requested mean / median for a shape.
double scale_for_mean(double mean, double shape);
double scale_for_median(double median, double shape);

/// Weibull model whose scale is derived from `target` under `norm`
/// (Explicit: target is the scale itself).
DwellModel weibull(double shape, double target, DwellNormalization norm);

/// Kolmogorov-Smirnov D statistic of `samples` against a Weibull CDF.
double ks_statistic(std::vector<double> samples, double shape, double scale);

/// Asymptotic two-sided KS critical value for n samples.
double ks_critical(std::size_t n, double alpha);

}  // namespace dwell

struct SwarmOptions {
  /// Overrides the dwell model: (slot, session index within slot) -> seconds.
  std::function<double(std::size_t, std::size_t)> dwell_override;
  /// Bundle served to each session. A placeholder of `bundle_bytes` is used
  /// when the registry has no bundle for the experiment's kernel.
  BundleRegistry bundles;
  std::size_t bundle_bytes = 4096;
  /// NDJSON mirror of the event log.
  std::optional<std::string> event_log_path;
};

struct SwarmResult {
  std::vector<MetricEvent> events;
  bool drained = false;
  double runtime_s = 0.0;  // drained time, or the abort time
  ServerStats stats;
  std::map<std::string, Payload> results;  // as received by the task source
  std::size_t sessions = 0;
};

/// Discrete-event run of the whole experiment in virtual time. The server
/// side is a real TaskManager driven through a manual clock; network and
/// compute are timed by the config's network model and compute_scale.
/// Deterministic for a given config.
SwarmResult run_virtual_swarm(const ExperimentConfig& config, const SwarmOptions& options = {});

}  // namespace webswarm
