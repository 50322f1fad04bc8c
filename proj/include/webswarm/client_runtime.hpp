#pragma once

// Transport-agnostic client logic: the local task buffer, the scheduling
// policies and checkpoint cadence. The swarm simulators drive it; the browser
// worker mirrors it.

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "webswarm/domain.hpp"
#include "webswarm/kernels.hpp"
#include "webswarm/protocol.hpp"

namespace webswarm {

struct TaskRequest {
  std::uint32_t count = 1;
  bool async = false;  // issued while the client still has work to do
  bool operator==(const TaskRequest&) const = default;
};

/// What the client should do now. Both members may be set (run a task and
/// prefetch); neither set means Idle, or `finished` once the server has
/// reported that no tasks remain.
struct Step {
  std::optional<Task> run;
  std::optional<TaskRequest> request;
  bool finished = false;

  bool idle() const { return !run && !request && !finished; }
};

class ClientRuntime {
 public:
  explicit ClientRuntime(PolicyConfig policy);

  /// SyncSingle: request 1 when the buffer is empty, otherwise run.
  /// Batch: request batch_size when the buffer is empty, otherwise run.
  /// AsyncPrefetch: run from the buffer and, when the tasks left behind equal
  /// prefetch_threshold with no request in flight, also request batch_size.
  /// Marks any issued request as in flight.
  Step next_action();

  /// Delivers the response to the in-flight request. An empty list means the
  /// server is drained.
  void on_tasks(std::vector<Task> tasks);

  /// The in-flight request was lost; the next empty-buffer step re-requests.
  void on_request_failed();

  std::size_t buffered() const { return buffer_.size(); }
  bool request_in_flight() const { return in_flight_; }
  bool drained() const { return drained_; }
  const PolicyConfig& policy() const { return policy_; }

 private:
  PolicyConfig policy_;
  std::deque<Task> buffer_;
  bool in_flight_ = false;
  bool drained_ = false;
};

/// Runs one task segment by segment. Each segment ends at the next multiple
/// of the checkpoint interval (yielding a Partial) or at the end of the task
/// (yielding the Final). Resumed tasks start from the progress recorded in
/// their payload.
class TaskExecution {
 public:
  struct Segment {
    protocol::ClientMessage message;
    std::uint64_t units = 0;  // work executed in this segment
  };

  /// With `simulate` set, progress is recorded but no kernel work is done.
  TaskExecution(Task task, const Kernel& kernel, std::optional<std::uint64_t> checkpoint_every,
                bool simulate = false);

  bool finished() const { return finished_; }

  /// Throws KernelFailure (and leaves the execution unusable) when the kernel
  /// rejects the payload.
  Segment advance();

  /// Units the next advance() will execute.
  std::uint64_t next_segment_units() const;

  std::uint64_t executed_units() const { return executed_; }
  std::uint64_t start_units() const { return start_; }
  const Task& task() const { return task_; }

 private:
  Task task_;
  const Kernel& kernel_;
  std::optional<std::uint64_t> checkpoint_every_;
  bool simulate_;
  std::uint64_t total_ = 0;
  std::uint64_t done_ = 0;
  std::uint64_t start_ = 0;
  std::uint64_t executed_ = 0;
  std::uint64_t sequence_ = 0;
  bool finished_ = false;
};

/// Whole-task convenience: every Partial in order, then the Final.
std::vector<protocol::ClientMessage> run_task(const Task& task, const Kernel& kernel, const PolicyConfig& policy);

}  // namespace webswarm
