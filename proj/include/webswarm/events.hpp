#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "webswarm/domain.hpp"

namespace webswarm {

enum class EventKind {
  SessionOpen,
  SessionClose,
  BundleServed,
  TaskDispatched,
  PartialReceived,
  FinalReceived,
  WaitStart,
  WaitEnd,
  Bytes,
  RequestReceived,
  ResultPushed,
  Drained,
};

/// Byte direction relative to the server.
enum class Direction { In, Out };

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view s);

/// One timestamped observation. `detail` carries the kind-specific tag: the
/// ack status for Partial/FinalReceived, the close reason for SessionClose,
/// the message type for RequestReceived and the kernel for BundleServed.
struct MetricEvent {
  double t = 0.0;
  EventKind kind = EventKind::SessionOpen;
  std::string session;
  std::string task;
  std::string detail;
  std::optional<Transport> transport;
  Direction direction = Direction::In;
  std::uint64_t count = 0;

  bool operator==(const MetricEvent&) const = default;
};

nlohmann::json to_json(const MetricEvent& e);
MetricEvent event_from_json(const nlohmann::json& j);

void write_ndjson(std::ostream& out, const std::vector<MetricEvent>& events);
std::vector<MetricEvent> read_ndjson(std::istream& in);
std::vector<MetricEvent> read_ndjson_file(const std::string& path);

/// Append-only, thread-safe event store. Optionally mirrors every event to
/// an NDJSON file as it arrives.
class EventSink {
 public:
  EventSink() = default;
  explicit EventSink(const std::string& log_path);

  void append(MetricEvent e);
  std::vector<MetricEvent> snapshot() const;
  std::size_t size() const;
  void flush();

 private:
  mutable std::mutex mu_;
  std::vector<MetricEvent> events_;
  std::ofstream file_;
};

}  // namespace webswarm
