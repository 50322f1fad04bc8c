#pragma once

// Wall-clock swarm: one thread per worker slot driving real connections to a
// running task manager. Compute is slept (or run for real with
// execute_kernels); sessions are aborted at their dwell deadline.

#include <functional>
#include <memory>

#include "webswarm/client.hpp"
#include "webswarm/clock.hpp"
#include "webswarm/domain.hpp"
#include "webswarm/events.hpp"

namespace webswarm {

struct RealtimeOptions {
  ChannelOptions channel;
  /// Receives the client-side WaitStart/WaitEnd events.
  std::shared_ptr<EventSink> sink;
  std::shared_ptr<const Clock> clock;
  /// Completion probe; defaults to polling /admin/stats.
  std::function<bool()> drained;
  double probe_interval_s = 0.05;
};

struct RealtimeResult {
  bool drained = false;
  double wall_s = 0.0;
  std::size_t sessions = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
};

/// Throws ServerUnreachable when the server cannot be reached at all.
RealtimeResult run_realtime_swarm(const ExperimentConfig& config, const RealtimeOptions& options);

}  // namespace webswarm
