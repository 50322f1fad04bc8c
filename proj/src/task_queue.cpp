#include "webswarm/task_queue.hpp"

#include <algorithm>

#include "webswarm/error.hpp"

namespace webswarm {

std::string_view to_string(PartialStatus s) {
  switch (s) {
    case PartialStatus::Applied: return "applied";
    case PartialStatus::Stale: return "stale";
    case PartialStatus::AlreadyComplete: return "already_complete";
  }
  return "stale";
}

std::string_view to_string(CompletionStatus s) {
  return s == CompletionStatus::Accepted ? "accepted" : "duplicate";
}

void TaskQueue::enqueue(Task task) {
  std::lock_guard lock(mu_);
  if (tasks_.contains(task.task_id)) throw DuplicateTaskId(task.task_id);
  task.status = TaskStatus::Queued;
  auto position = order_.insert(order_.end(), task.task_id);
  auto id = task.task_id;
  tasks_.emplace(std::move(id), Entry{std::move(task), 0, position});
}

std::vector<Task> TaskQueue::take_next(std::size_t n) {
  std::lock_guard lock(mu_);
  std::vector<Task> out;
  const auto take = std::min(n, order_.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    auto& entry = tasks_.at(order_.front());
    ++entry.task.dispatch_count;
    out.push_back(entry.task);
    order_.splice(order_.end(), order_, order_.begin());
  }
  return out;
}

PartialStatus TaskQueue::apply_partial(const std::string& task_id, const CheckpointRecord& checkpoint) {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw UnknownTask(task_id);
  auto& task = it->second.task;
  if (task.status == TaskStatus::Completed) return PartialStatus::AlreadyComplete;
  if (task.checkpoint && checkpoint.sequence <= task.checkpoint->sequence) return PartialStatus::Stale;
  if (checkpoint.partial_payload.is_object()) {
    for (const auto& [key, value] : checkpoint.partial_payload.items()) task.payload[key] = value;
  }
  task.checkpoint = checkpoint;
  return PartialStatus::Applied;
}

CompletionStatus TaskQueue::complete(const std::string& task_id, const Payload& final_payload,
                                     std::uint64_t final_sequence, Payload* result) {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw UnknownTask(task_id);
  auto& entry = it->second;
  if (entry.task.status == TaskStatus::Completed) return CompletionStatus::Duplicate;
  entry.task.status = TaskStatus::Completed;
  entry.final_sequence = final_sequence;
  order_.erase(entry.position);
  ++completed_;
  if (result) *result = final_payload;
  // Completed entries keep only their id so duplicates are still recognised;
  // the payload memory is released.
  entry.task.payload = Payload::object();
  entry.task.checkpoint.reset();
  return CompletionStatus::Accepted;
}

bool TaskQueue::drained() const {
  std::lock_guard lock(mu_);
  return order_.empty();
}

bool TaskQueue::known(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  return tasks_.contains(task_id);
}

std::size_t TaskQueue::queued_count() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

std::size_t TaskQueue::completed_count() const {
  std::lock_guard lock(mu_);
  return completed_;
}

std::vector<std::string> TaskQueue::order() const {
  std::lock_guard lock(mu_);
  return {order_.begin(), order_.end()};
}

std::optional<Task> TaskQueue::find(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second.task;
}

}  // namespace webswarm
