#include "webswarm/events.hpp"

#include <array>
#include <istream>
#include <ostream>

#include "webswarm/error.hpp"

namespace webswarm {

namespace {

constexpr std::array<std::string_view, 12> kKindNames = {
    "session_open",  "session_close", "bundle_served", "task_dispatched", "partial_received", "final_received",
    "wait_start",    "wait_end",      "bytes",         "request_received", "result_pushed",   "drained",
};

const char* detail_key(EventKind k) {
  switch (k) {
    case EventKind::PartialReceived:
    case EventKind::FinalReceived: return "status";
    case EventKind::SessionClose: return "reason";
    case EventKind::RequestReceived: return "message";
    case EventKind::BundleServed: return "kernel";
    default: return "detail";
  }
}

}  // namespace

std::string_view to_string(EventKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

EventKind parse_event_kind(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == s) return static_cast<EventKind>(i);
  }
  throw Error("unknown event kind '" + std::string(s) + "'");
}

nlohmann::json to_json(const MetricEvent& e) {
  nlohmann::json j = {{"t", e.t}, {"kind", to_string(e.kind)}};
  if (!e.session.empty()) j["session"] = e.session;
  if (!e.task.empty()) j["task"] = e.task;
  if (!e.detail.empty()) j[detail_key(e.kind)] = e.detail;
  if (e.transport) j["transport"] = to_string(*e.transport);
  if (e.kind == EventKind::Bytes) {
    j["direction"] = e.direction == Direction::In ? "in" : "out";
    j["count"] = e.count;
  }
  return j;
}

MetricEvent event_from_json(const nlohmann::json& j) {
  MetricEvent e;
  try {
    e.t = j.at("t").get<double>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.session = j.value("session", "");
    e.task = j.value("task", "");
    e.detail = j.value(detail_key(e.kind), "");
    if (j.contains("transport")) e.transport = parse_transport(j.at("transport").get<std::string>());
    if (e.kind == EventKind::Bytes) {
      e.direction = j.at("direction").get<std::string>() == "in" ? Direction::In : Direction::Out;
      e.count = j.at("count").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("malformed event record: ") + ex.what());
  }
  return e;
}

void write_ndjson(std::ostream& out, const std::vector<MetricEvent>& events) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

std::vector<MetricEvent> read_ndjson(std::istream& in) {
  std::vector<MetricEvent> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw Error("event log line " + std::to_string(n) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<MetricEvent> read_ndjson_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open event log " + path);
  return read_ndjson(in);
}

EventSink::EventSink(const std::string& log_path) : file_(log_path, std::ios::app) {
  if (!file_) throw Error("cannot open event log " + log_path);
}

void EventSink::append(MetricEvent e) {
  std::lock_guard lock(mu_);
  if (file_.is_open()) file_ << to_json(e).dump() << '\n';
  events_.push_back(std::move(e));
}

std::vector<MetricEvent> EventSink::snapshot() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t EventSink::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

void EventSink::flush() {
  std::lock_guard lock(mu_);
  if (file_.is_open()) file_.flush();
}

}  // namespace webswarm
