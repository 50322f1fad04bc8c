#pragma once

// Vocabulary shared by every module: tasks, checkpoints, sessions,
// scheduling policies and experiment configuration.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace webswarm {

/// Schemaless key-value document. Kernels own the fields; the manager never
/// interprets them.
using Payload = nlohmann::json;

enum class TaskStatus { Queued, Completed };
enum class Transport { RequestResponse, Stream };
enum class PolicyMode { SyncSingle, Batch, AsyncPrefetch };
enum class DwellKind { Constant, Weibull };

/// How the Weibull scale is derived when it is not given explicitly.
enum class DwellNormalization { Explicit, SharedMean, SharedMedian };

std::string_view to_string(TaskStatus s);
std::string_view to_string(Transport t);
std::string_view to_string(PolicyMode m);
std::string_view to_string(DwellKind k);
std::string_view to_string(DwellNormalization n);

Transport parse_transport(std::string_view s);
PolicyMode parse_policy_mode(std::string_view s);
DwellKind parse_dwell_kind(std::string_view s);
DwellNormalization parse_dwell_normalization(std::string_view s);

struct CheckpointRecord {
  std::uint64_t sequence = 1;
  Payload partial_payload = Payload::object();
  std::uint64_t progress_units = 0;

  bool operator==(const CheckpointRecord&) const = default;
};

struct Task {
  std::string task_id;
  std::string kernel_id;
  Payload payload = Payload::object();
  std::optional<CheckpointRecord> checkpoint;
  TaskStatus status = TaskStatus::Queued;
  std::uint64_t dispatch_count = 0;

  bool operator==(const Task&) const = default;
};

struct SessionRecord {
  std::string session_id;
  Transport transport = Transport::RequestResponse;
  double dwell_budget = std::numeric_limits<double>::infinity();
  double opened_at = 0.0;
  std::optional<double> closed_at;
  double last_activity = 0.0;
  std::uint64_t tasks_completed = 0;
  double downtime = 0.0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;

  bool is_value() const { return tasks_completed >= 1; }
};

struct PolicyConfig {
  PolicyMode mode = PolicyMode::SyncSingle;
  std::uint32_t batch_size = 1;
  std::uint32_t prefetch_threshold = 0;
  std::optional<std::uint64_t> checkpoint_every;

  static PolicyConfig sync_single(std::optional<std::uint64_t> checkpoint_every = std::nullopt);
  static PolicyConfig batch(std::uint32_t size);
  static PolicyConfig async_prefetch(std::uint32_t size, std::uint32_t threshold);

  /// Throws ConfigError when the mode/size/threshold combination is invalid.
  void validate() const;

  /// Compact form used by config files and CSV output: "sync", "batch:5",
  /// "async:5:2", any of them optionally suffixed "+ckpt:N".
  std::string describe() const;
  static PolicyConfig parse(std::string_view text);
};

struct DwellModel {
  DwellKind kind = DwellKind::Constant;
  double shape = 1.0;
  double scale = 1.0;

  void validate() const;
};

/// Per-message framing overhead. The request-response figure covers a full
/// exchange (request and response header blocks together).
struct WireOverhead {
  std::uint64_t request_response_exchange = 700;
  std::uint64_t stream_frame = 6;
};

/// Timing model for the virtual-time swarm.
struct NetworkModel {
  double latency_s = 0.025;              // one way
  double bandwidth_bytes_per_s = 12.5e6;
  double server_service_s = 0.002;       // per handled message
  double server_per_byte_s = 2e-9;
  double worker_start_s = 0.05;          // bundle parse and worker spin-up
};

struct MandelbrotGrid {
  double x0 = -2.5;
  double y0 = -1.3125;
  double pixel_step = 0.00875;
  std::uint32_t width_px = 400;
  std::uint32_t height_px = 300;
  std::uint32_t max_iter = 1000;
};

struct ExperimentConfig {
  std::string kernel_id = "montecarlo";
  std::uint64_t total_tasks = 720;
  std::uint64_t task_size = 200'000'000;  // work units per task (Monte Carlo)
  std::uint32_t worker_slots = 24;
  DwellModel dwell;
  Transport transport = Transport::RequestResponse;
  PolicyConfig policy;
  std::uint64_t rng_seed = 1;
  std::uint64_t kernel_seed = 1;
  double compute_scale = 3.75 / 200e6;  // simulated seconds per work unit
  bool execute_kernels = false;
  MandelbrotGrid mandelbrot;
  NetworkModel network;
  WireOverhead overhead;
  std::size_t compression_threshold = 16 * 1024;
  double session_idle_timeout_s = 0.0;  // 0: twice the expected task time
  double respawn_delay_s = 0.0;
  double max_time_s = 1e6;              // abort cap

  void validate() const;
  /// Work units of one task as split for this configuration (the largest task).
  std::uint64_t units_per_task() const;
  double expected_task_seconds() const;
  double idle_timeout() const;
};

}  // namespace webswarm
