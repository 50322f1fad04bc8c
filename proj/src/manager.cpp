#include "webswarm/manager.hpp"

#include <iostream>
#include <map>

#include "webswarm/error.hpp"

namespace webswarm {

namespace pr = protocol;

nlohmann::json ServerStats::to_json() const {
  return {
      {"queued", queued},
      {"completed", completed},
      {"open_sessions", open_sessions},
      {"closed_sessions", closed_sessions},
      {"value_sessions", value_sessions},
      {"non_value_sessions", non_value_sessions},
      {"downtime_s", downtime_s},
      {"bytes",
       {{"request_response", {{"in", request_response.in}, {"out", request_response.out}}},
        {"stream", {{"in", stream.in}, {"out", stream.out}}}}},
      {"requests", requests},
      {"dispatched", dispatched},
      {"pushed", pushed},
  };
}

TaskManager::TaskManager(ManagerConfig config, std::shared_ptr<TaskSource> source, std::shared_ptr<EventSink> sink,
                         std::shared_ptr<const Clock> clock, BundleRegistry bundles)
    : config_(std::move(config)),
      source_(std::move(source)),
      sink_(sink ? std::move(sink) : std::make_shared<EventSink>()),
      clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()),
      bundles_(std::move(bundles)),
      forwarder_(source_, config_.retry, sink_, clock_) {}

void TaskManager::emit(EventKind kind, const std::string& session, std::string task, std::string detail,
                       std::optional<Transport> transport) {
  MetricEvent e;
  e.t = clock_->now();
  e.kind = kind;
  e.session = session;
  e.task = std::move(task);
  e.detail = std::move(detail);
  e.transport = transport;
  sink_->append(std::move(e));
}

std::size_t TaskManager::poll() {
  std::size_t added = 0;
  if (source_) {
    try {
      for (auto& t : source_->pull_tasks(config_.pull_batch)) {
        if (queue_.known(t.task_id)) {
          std::cerr << "source re-offered known task " << t.task_id << "; ignored\n";
          continue;
        }
        t.status = TaskStatus::Queued;
        t.dispatch_count = 0;
        queue_.enqueue(std::move(t));
        ++added;
      }
    } catch (const SourceUnavailable& e) {
      std::cerr << "task source unavailable: " << e.what() << '\n';
    }
    forwarder_.retry_pending();
  }
  if (added > 0) {
    std::lock_guard lock(mu_);
    drained_reported_ = false;
  }
  return added;
}

std::string TaskManager::open_locked(Transport transport, const std::optional<std::string>& proposed) {
  if (proposed && !proposed->empty()) {
    auto it = sessions_.find(*proposed);
    if (it != sessions_.end() && !it->second.closed_at) {
      it->second.transport = transport;
      it->second.last_activity = clock_->now();
      return *proposed;
    }
    if (it == sessions_.end()) {
      SessionRecord s;
      s.session_id = *proposed;
      s.transport = transport;
      s.opened_at = s.last_activity = clock_->now();
      sessions_.emplace(*proposed, s);
      emit(EventKind::SessionOpen, *proposed, {}, {}, transport);
      return *proposed;
    }
  }
  std::string id;
  do {
    id = "s" + std::to_string(next_session_++);
  } while (sessions_.contains(id));
  SessionRecord s;
  s.session_id = id;
  s.transport = transport;
  s.opened_at = s.last_activity = clock_->now();
  sessions_.emplace(id, s);
  emit(EventKind::SessionOpen, id, {}, {}, transport);
  return id;
}

std::string TaskManager::open_session(Transport transport, const std::optional<std::string>& proposed) {
  std::lock_guard lock(mu_);
  return open_locked(transport, proposed);
}

pr::ServerMessage TaskManager::handle(Transport transport, const std::string& session,
                                      const pr::ClientMessage& message) {
  if (const auto* hello = std::get_if<pr::Hello>(&message)) {
    std::lock_guard lock(mu_);
    ++requests_;
    auto proposed = hello->session ? hello->session : (session.empty() ? std::nullopt : std::optional(session));
    auto id = open_locked(transport, proposed);
    emit(EventKind::RequestReceived, id, {}, "hello", transport);
    return pr::Welcome{id};
  }

  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session);
    if (it == sessions_.end() || it->second.closed_at) return pr::ErrorReply{"unknown_session"};
    it->second.last_activity = clock_->now();
    ++requests_;
    emit(EventKind::RequestReceived, session, {}, std::string(pr::type_name(message)), transport);
  }

  if (const auto* req = std::get_if<pr::RequestTasks>(&message)) {
    auto tasks = queue_.take_next(req->count);
    if (tasks.empty()) return pr::Drained{};
    {
      std::lock_guard lock(mu_);
      dispatched_ += tasks.size();
    }
    for (const auto& t : tasks) emit(EventKind::TaskDispatched, session, t.task_id);
    return pr::Tasks{std::move(tasks)};
  }

  if (const auto* partial = std::get_if<pr::Partial>(&message)) {
    PartialStatus status;
    try {
      status = queue_.apply_partial(partial->task_id, CheckpointRecord{partial->sequence, partial->partial_payload,
                                                                       partial->progress_units});
    } catch (const UnknownTask&) {
      return pr::ErrorReply{"unknown_task"};
    }
    emit(EventKind::PartialReceived, session, partial->task_id, std::string(to_string(status)));
    return pr::Ack{partial->task_id, pr::to_ack(status)};
  }

  if (const auto* fin = std::get_if<pr::Final>(&message)) {
    CompletionStatus status;
    Payload result;
    try {
      status = queue_.complete(fin->task_id, fin->payload, fin->sequence, &result);
    } catch (const UnknownTask&) {
      return pr::ErrorReply{"unknown_task"};
    }
    emit(EventKind::FinalReceived, session, fin->task_id, std::string(to_string(status)));
    if (status == CompletionStatus::Accepted) {
      {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(session);
        if (it != sessions_.end()) ++it->second.tasks_completed;
      }
      forwarder_.submit(fin->task_id, result);
      if (queue_.drained()) {
        std::lock_guard lock(mu_);
        if (!drained_reported_) {
          drained_reported_ = true;
          emit(EventKind::Drained, {});
        }
      }
    }
    return pr::Ack{fin->task_id, pr::to_ack(status)};
  }

  return pr::ErrorReply{"unexpected_message"};
}

const Bundle* TaskManager::bundle(std::string_view kernel_id, const std::optional<std::string>& session,
                                  Transport transport) {
  const auto* b = bundles_.find(kernel_id);
  std::lock_guard lock(mu_);
  ++requests_;
  std::string id;
  if (session && !session->empty()) id = open_locked(transport, session);
  if (b) emit(EventKind::BundleServed, id, {}, std::string(kernel_id));
  return b;
}

void TaskManager::record_bytes(const std::string& session, Transport transport, Direction direction,
                               std::uint64_t count) {
  {
    std::lock_guard lock(mu_);
    auto& bucket = transport == Transport::RequestResponse ? rr_bytes_ : stream_bytes_;
    (direction == Direction::In ? bucket.in : bucket.out) += count;
    auto it = sessions_.find(session);
    if (it != sessions_.end()) {
      // Session perspective: server "out" is what the session received.
      (direction == Direction::In ? it->second.bytes_sent : it->second.bytes_received) += count;
    }
  }
  MetricEvent e;
  e.t = clock_->now();
  e.kind = EventKind::Bytes;
  e.session = session;
  e.transport = transport;
  e.direction = direction;
  e.count = count;
  sink_->append(std::move(e));
}

void TaskManager::close_locked(SessionRecord& s, std::string_view reason) {
  if (s.closed_at) return;
  s.closed_at = clock_->now();
  emit(EventKind::SessionClose, s.session_id, {}, std::string(reason));
}

void TaskManager::close_session(const std::string& session, std::string_view reason) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session);
  if (it != sessions_.end()) close_locked(it->second, reason);
}

std::size_t TaskManager::reap_idle() {
  std::lock_guard lock(mu_);
  const auto now = clock_->now();
  std::size_t n = 0;
  for (auto& [id, s] : sessions_) {
    if (s.closed_at || s.transport != Transport::RequestResponse) continue;
    if (now - s.last_activity >= config_.idle_timeout_s) {
      close_locked(s, "idle_timeout");
      ++n;
    }
  }
  return n;
}

void TaskManager::close_all(std::string_view reason) {
  std::lock_guard lock(mu_);
  // Deterministic order for reproducible logs.
  std::map<std::string, SessionRecord*> open;
  for (auto& [id, s] : sessions_) {
    if (!s.closed_at) open.emplace(id, &s);
  }
  for (auto& [id, s] : open) close_locked(*s, reason);
}

bool TaskManager::session_open(const std::string& session) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session);
  return it != sessions_.end() && !it->second.closed_at;
}

std::optional<SessionRecord> TaskManager::session(const std::string& session) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

ServerStats TaskManager::stats() const {
  ServerStats st;
  st.queued = queue_.queued_count();
  st.completed = queue_.completed_count();
  st.pushed = forwarder_.delivered();
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) {
      if (!s.closed_at) {
        ++st.open_sessions;
        continue;
      }
      ++st.closed_sessions;
      (s.is_value() ? st.value_sessions : st.non_value_sessions) += 1;
    }
    st.request_response = rr_bytes_;
    st.stream = stream_bytes_;
    st.requests = requests_;
    st.dispatched = dispatched_;
  }
  std::unordered_map<std::string, double> waiting;
  for (const auto& e : sink_->snapshot()) {
    if (e.kind == EventKind::WaitStart) {
      waiting[e.session] = e.t;
    } else if (e.kind == EventKind::WaitEnd) {
      auto it = waiting.find(e.session);
      if (it != waiting.end()) {
        st.downtime_s += e.t - it->second;
        waiting.erase(it);
      }
    }
  }
  return st;
}

}  // namespace webswarm
