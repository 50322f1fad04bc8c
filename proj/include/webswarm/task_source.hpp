#pragma once

// The upstream system that owns tasks: the manager pulls batches from it and
// hands finished results back.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "webswarm/clock.hpp"
#include "webswarm/domain.hpp"
#include "webswarm/events.hpp"

namespace webswarm {

class TaskSource {
 public:
  virtual ~TaskSource() = default;

  /// Returns 0..max fresh tasks. Throws SourceUnavailable.
  virtual std::vector<Task> pull_tasks(std::size_t max) = 0;

  /// Throws SourceUnavailable when the result was not delivered.
  virtual void push_result(const std::string& task_id, const Payload& payload) = 0;
};

struct TaskSourceDescriptor {
  std::string endpoint;  // "builtin" or http://host:port
  double poll_interval = 1.0;
  std::optional<std::string> token;

  void validate() const;
  bool is_builtin() const { return endpoint.empty() || endpoint == "builtin"; }
};

/// In-process benchmark source: serves a precomputed split and collects the
/// results.
class BuiltinSource final : public TaskSource {
 public:
  explicit BuiltinSource(std::vector<Task> tasks);
  explicit BuiltinSource(const ExperimentConfig& config);

  std::vector<Task> pull_tasks(std::size_t max) override;
  void push_result(const std::string& task_id, const Payload& payload) override;

  std::size_t total() const;
  std::map<std::string, Payload> results() const;
  std::size_t push_count() const;

 private:
  mutable std::mutex mu_;
  std::vector<Task> tasks_;
  std::size_t next_ = 0;
  std::map<std::string, Payload> results_;
  std::size_t pushes_ = 0;
};

struct RetryPolicy {
  std::uint32_t max_attempts = 5;
  std::size_t capacity = 4096;  // results held for retry
};

/// Delivers accepted results to the source. Failed deliveries wait in a
/// bounded buffer and are retried on every poll until delivered or until
/// max_attempts is reached, after which they are dropped and logged.
class ResultForwarder {
 public:
  ResultForwarder(std::shared_ptr<TaskSource> source, RetryPolicy policy, std::shared_ptr<EventSink> sink,
                  std::shared_ptr<const Clock> clock);

  void submit(const std::string& task_id, const Payload& payload);
  void retry_pending();

  std::size_t pending() const;
  std::size_t delivered() const;
  std::size_t dropped() const;

 private:
  struct Pending {
    std::string task_id;
    Payload payload;
    std::uint32_t attempts = 0;
  };

  bool attempt(Pending& p);  // called with mu_ held

  std::shared_ptr<TaskSource> source_;
  RetryPolicy policy_;
  std::shared_ptr<EventSink> sink_;
  std::shared_ptr<const Clock> clock_;
  mutable std::mutex mu_;
  std::deque<Pending> pending_;
  std::size_t delivered_ = 0;
  std::size_t dropped_ = 0;
};

}  // namespace webswarm
