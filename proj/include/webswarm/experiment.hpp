#pragma once

// One experiment run end to end: task set, manager, swarm, summary.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "webswarm/domain.hpp"
#include "webswarm/events.hpp"
#include "webswarm/metrics.hpp"
#include "webswarm/swarm_sim.hpp"

namespace webswarm {

struct RunOutput {
  metrics::Summary summary;
  std::vector<MetricEvent> events;
  std::map<std::string, Payload> results;
  bool drained = false;
};

/// Virtual-time run.
RunOutput run_virtual(const ExperimentConfig& config, const std::string& label, const SwarmOptions& options = {});

/// Wall-clock run against an in-process server on a loopback port.
RunOutput run_realtime(const ExperimentConfig& config, const std::string& label,
                       const std::optional<std::filesystem::path>& bundle_dir = std::nullopt);

/// Benchmark answer reconstructed from the task results: the pi estimate for
/// Monte Carlo. nullopt for other kernels or incomplete result sets.
std::optional<double> pi_estimate(const std::map<std::string, Payload>& results);

/// Reassembled Mandelbrot grid; throws Error if the results do not tile it.
std::vector<std::uint32_t> mandelbrot_grid(const ExperimentConfig& config,
                                           const std::map<std::string, Payload>& results);

}  // namespace webswarm
