#pragma once

// Transport-agnostic core of the task manager. Connection handlers (HTTP,
// WebSocket, or the virtual-time swarm) translate their traffic into calls on
// this class; it routes messages to the task queue, tracks sessions and
// records metric events.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "webswarm/bundle.hpp"
#include "webswarm/clock.hpp"
#include "webswarm/domain.hpp"
#include "webswarm/events.hpp"
#include "webswarm/protocol.hpp"
#include "webswarm/task_queue.hpp"
#include "webswarm/task_source.hpp"

namespace webswarm {

struct ManagerConfig {
  WireOverhead overhead;
  protocol::CodecOptions codec;
  double idle_timeout_s = 7.5;   // request-response sessions
  std::size_t pull_batch = 100000;
  RetryPolicy retry;
};

struct TransportBytes {
  std::uint64_t in = 0;
  std::uint64_t out = 0;
};

struct ServerStats {
  std::size_t queued = 0;
  std::size_t completed = 0;
  std::size_t open_sessions = 0;
  std::size_t closed_sessions = 0;
  std::size_t value_sessions = 0;      // closed sessions only
  std::size_t non_value_sessions = 0;  // closed sessions only
  double downtime_s = 0.0;
  TransportBytes request_response;
  TransportBytes stream;
  std::uint64_t requests = 0;
  std::uint64_t dispatched = 0;
  std::size_t pushed = 0;

  nlohmann::json to_json() const;
};

class TaskManager {
 public:
  TaskManager(ManagerConfig config, std::shared_ptr<TaskSource> source, std::shared_ptr<EventSink> sink,
              std::shared_ptr<const Clock> clock, BundleRegistry bundles = {});

  /// Pulls new tasks from the source and retries undelivered results.
  /// Returns the number of tasks enqueued; a source outage leaves the queue
  /// untouched and returns 0.
  std::size_t poll();

  /// Registers a session or refreshes an open one. A proposed id is adopted
  /// when it is not already taken by a closed session.
  std::string open_session(Transport transport, const std::optional<std::string>& proposed = std::nullopt);

  /// Handles one client message. Hello opens (or resumes) a session; every
  /// other message must name an open session.
  protocol::ServerMessage handle(Transport transport, const std::string& session,
                                 const protocol::ClientMessage& message);

  /// Serves a bundle, registering `session` (for the transport the page will
  /// go on to use) when given. nullptr for an unknown kernel.
  const Bundle* bundle(std::string_view kernel_id, const std::optional<std::string>& session = std::nullopt,
                       Transport transport = Transport::RequestResponse);

  void record_bytes(const std::string& session, Transport transport, Direction direction, std::uint64_t count);

  void close_session(const std::string& session, std::string_view reason);

  /// Closes request-response sessions idle for longer than the timeout.
  std::size_t reap_idle();

  void close_all(std::string_view reason);

  bool drained() const { return queue_.drained(); }
  bool session_open(const std::string& session) const;
  std::optional<SessionRecord> session(const std::string& session) const;

  ServerStats stats() const;

  TaskQueue& queue() { return queue_; }
  const TaskQueue& queue() const { return queue_; }
  ResultForwarder& forwarder() { return forwarder_; }
  const ManagerConfig& config() const { return config_; }
  const Clock& clock() const { return *clock_; }
  EventSink& sink() { return *sink_; }

 private:
  void emit(EventKind kind, const std::string& session, std::string task = {}, std::string detail = {},
            std::optional<Transport> transport = std::nullopt);
  std::string open_locked(Transport transport, const std::optional<std::string>& proposed);
  void close_locked(SessionRecord& s, std::string_view reason);

  ManagerConfig config_;
  std::shared_ptr<TaskSource> source_;
  std::shared_ptr<EventSink> sink_;
  std::shared_ptr<const Clock> clock_;
  BundleRegistry bundles_;
  TaskQueue queue_;
  ResultForwarder forwarder_;

  mutable std::mutex mu_;  // sessions and counters
  std::unordered_map<std::string, SessionRecord> sessions_;
  std::uint64_t next_session_ = 1;
  std::uint64_t requests_ = 0;
  std::uint64_t dispatched_ = 0;
  bool drained_reported_ = false;
  TransportBytes rr_bytes_;
  TransportBytes stream_bytes_;
};

}  // namespace webswarm
