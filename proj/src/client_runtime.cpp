#include "webswarm/client_runtime.hpp"

#include <algorithm>

#include "webswarm/error.hpp"

namespace webswarm {

ClientRuntime::ClientRuntime(PolicyConfig policy) : policy_(policy) { policy_.validate(); }

Step ClientRuntime::next_action() {
  Step step;
  if (buffer_.empty()) {
    if (in_flight_) return step;  // Idle
    if (drained_) {
      step.finished = true;
      return step;
    }
    const auto count = policy_.mode == PolicyMode::SyncSingle ? 1u : policy_.batch_size;
    step.request = TaskRequest{count, false};
    in_flight_ = true;
    return step;
  }
  step.run = std::move(buffer_.front());
  buffer_.pop_front();
  if (policy_.mode == PolicyMode::AsyncPrefetch && !in_flight_ && !drained_ &&
      buffer_.size() == policy_.prefetch_threshold) {
    step.request = TaskRequest{policy_.batch_size, true};
    in_flight_ = true;
  }
  return step;
}

void ClientRuntime::on_tasks(std::vector<Task> tasks) {
  in_flight_ = false;
  if (tasks.empty()) {
    drained_ = true;
    return;
  }
  for (auto& t : tasks) buffer_.push_back(std::move(t));
}

void ClientRuntime::on_request_failed() { in_flight_ = false; }

TaskExecution::TaskExecution(Task task, const Kernel& kernel, std::optional<std::uint64_t> checkpoint_every,
                             bool simulate)
    : task_(std::move(task)), kernel_(kernel), checkpoint_every_(checkpoint_every), simulate_(simulate) {
  total_ = kernel_.total_units(task_.payload);
  done_ = start_ = std::min(kernel_.done_units(task_.payload), total_);
  sequence_ = task_.checkpoint ? task_.checkpoint->sequence : 0;
}

std::uint64_t TaskExecution::next_segment_units() const {
  if (finished_) return 0;
  if (checkpoint_every_) {
    const auto boundary = (done_ / *checkpoint_every_ + 1) * *checkpoint_every_;
    if (boundary < total_) return boundary - done_;
  }
  return total_ - done_;
}

TaskExecution::Segment TaskExecution::advance() {
  if (finished_) throw Error("task execution already finished");
  const auto units = next_segment_units();
  const auto until = done_ + units;
  if (simulate_) {
    kernel_.mark_done(task_.payload, until);
  } else {
    kernel_.run(task_.payload, until);
  }
  done_ = until;
  executed_ += units;
  if (done_ < total_) {
    ++sequence_;
    return Segment{protocol::Partial{task_.task_id, sequence_, done_, task_.payload}, units};
  }
  finished_ = true;
  return Segment{protocol::Final{task_.task_id, sequence_ + 1, task_.payload}, units};
}

std::vector<protocol::ClientMessage> run_task(const Task& task, const Kernel& kernel, const PolicyConfig& policy) {
  TaskExecution exec(task, kernel, policy.checkpoint_every);
  std::vector<protocol::ClientMessage> out;
  while (!exec.finished()) out.push_back(exec.advance().message);
  return out;
}

}  // namespace webswarm
