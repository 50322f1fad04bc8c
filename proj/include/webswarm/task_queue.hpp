#pragma once

#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "webswarm/domain.hpp"

namespace webswarm {

enum class PartialStatus { Applied, Stale, AlreadyComplete };
enum class CompletionStatus { Accepted, Duplicate };

std::string_view to_string(PartialStatus s);
std::string_view to_string(CompletionStatus s);

/// In-memory task store. Dispatch rotates tasks from the head to the tail
/// instead of leasing them, so work abandoned by a vanished client is resent
/// once the rotation comes back round. Completion is idempotent.
///
/// Every operation takes one exclusive lock and is therefore linearizable.
class TaskQueue {
 public:
  /// Throws DuplicateTaskId when the id was ever enqueued before.
  void enqueue(Task task);

  /// Up to n snapshots from the head; each dispatched task moves to the tail.
  std::vector<Task> take_next(std::size_t n);

  /// Throws UnknownTask.
  PartialStatus apply_partial(const std::string& task_id, const CheckpointRecord& checkpoint);

  /// The final payload of an Accepted completion is returned through `result`
  /// so the caller can forward it exactly once. Throws UnknownTask.
  CompletionStatus complete(const std::string& task_id, const Payload& final_payload,
                            std::uint64_t final_sequence, Payload* result = nullptr);

  bool drained() const;
  bool known(const std::string& task_id) const;
  std::size_t queued_count() const;
  std::size_t completed_count() const;

  /// Current ordering of queued task ids, head first.
  std::vector<std::string> order() const;
  std::optional<Task> find(const std::string& task_id) const;

 private:
  struct Entry {
    Task task;
    std::uint64_t final_sequence = 0;
    std::list<std::string>::iterator position;
  };

  mutable std::mutex mu_;
  std::list<std::string> order_;
  std::unordered_map<std::string, Entry> tasks_;
  std::size_t completed_ = 0;
};

}  // namespace webswarm
