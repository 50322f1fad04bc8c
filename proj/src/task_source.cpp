#include "webswarm/task_source.hpp"

#include <algorithm>
#include <iostream>

#include "webswarm/error.hpp"
#include "webswarm/kernels.hpp"

namespace webswarm {

void TaskSourceDescriptor::validate() const {
  if (!(poll_interval > 0.0)) throw ConfigError("source poll_interval must be positive");
  if (!is_builtin() && !endpoint.starts_with("http://")) {
    throw ConfigError("task source endpoint must be 'builtin' or an http:// URL");
  }
}

BuiltinSource::BuiltinSource(std::vector<Task> tasks) : tasks_(std::move(tasks)) {}

BuiltinSource::BuiltinSource(const ExperimentConfig& config) : tasks_(split(config)) {}

std::vector<Task> BuiltinSource::pull_tasks(std::size_t max) {
  std::lock_guard lock(mu_);
  const auto n = std::min(max, tasks_.size() - next_);
  std::vector<Task> out(tasks_.begin() + static_cast<std::ptrdiff_t>(next_),
                        tasks_.begin() + static_cast<std::ptrdiff_t>(next_ + n));
  next_ += n;
  return out;
}

void BuiltinSource::push_result(const std::string& task_id, const Payload& payload) {
  std::lock_guard lock(mu_);
  ++pushes_;
  results_[task_id] = payload;
}

std::size_t BuiltinSource::total() const {
  std::lock_guard lock(mu_);
  return tasks_.size();
}

std::map<std::string, Payload> BuiltinSource::results() const {
  std::lock_guard lock(mu_);
  return results_;
}

std::size_t BuiltinSource::push_count() const {
  std::lock_guard lock(mu_);
  return pushes_;
}

ResultForwarder::ResultForwarder(std::shared_ptr<TaskSource> source, RetryPolicy policy,
                                 std::shared_ptr<EventSink> sink, std::shared_ptr<const Clock> clock)
    : source_(std::move(source)), policy_(policy), sink_(std::move(sink)), clock_(std::move(clock)) {}

bool ResultForwarder::attempt(Pending& p) {
  ++p.attempts;
  try {
    source_->push_result(p.task_id, p.payload);
  } catch (const SourceUnavailable&) {
    return false;
  }
  ++delivered_;
  if (sink_) {
    MetricEvent e;
    e.t = clock_->now();
    e.kind = EventKind::ResultPushed;
    e.task = p.task_id;
    sink_->append(std::move(e));
  }
  return true;
}

void ResultForwarder::submit(const std::string& task_id, const Payload& payload) {
  std::lock_guard lock(mu_);
  Pending p{task_id, payload, 0};
  if (attempt(p)) return;
  if (p.attempts >= policy_.max_attempts) {
    ++dropped_;
    std::cerr << "result for " << task_id << " dropped after " << p.attempts << " attempts\n";
    return;
  }
  if (pending_.size() >= policy_.capacity) {
    ++dropped_;
    std::cerr << "retry buffer full; result for " << task_id << " dropped\n";
    return;
  }
  pending_.push_back(std::move(p));
}

void ResultForwarder::retry_pending() {
  std::lock_guard lock(mu_);
  std::deque<Pending> keep;
  for (auto& p : pending_) {
    if (attempt(p)) continue;
    if (p.attempts >= policy_.max_attempts) {
      ++dropped_;
      std::cerr << "result for " << p.task_id << " dropped after " << p.attempts << " attempts\n";
      continue;
    }
    keep.push_back(std::move(p));
  }
  pending_.swap(keep);
}

std::size_t ResultForwarder::pending() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

std::size_t ResultForwarder::delivered() const {
  std::lock_guard lock(mu_);
  return delivered_;
}

std::size_t ResultForwarder::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

}  // namespace webswarm
