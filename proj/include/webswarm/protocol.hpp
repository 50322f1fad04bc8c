#pragma once

// Wire messages shared by both transports. Bodies are canonical UTF-8 JSON
// (sorted keys, no whitespace); bodies above a size threshold may be
// zlib-compressed, which the transport marks in its own framing (HTTP
// Content-Encoding, WebSocket binary opcode).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "webswarm/domain.hpp"
#include "webswarm/task_queue.hpp"

namespace webswarm::protocol {

struct Hello {
  Payload client_info = Payload::object();
  std::optional<std::string> session;  // client-proposed session id
  bool operator==(const Hello&) const = default;
};

struct RequestTasks {
  std::uint32_t count = 1;
  bool operator==(const RequestTasks&) const = default;
};

struct Partial {
  std::string task_id;
  std::uint64_t sequence = 1;
  std::uint64_t progress_units = 0;
  Payload partial_payload = Payload::object();
  bool operator==(const Partial&) const = default;
};

struct Final {
  std::string task_id;
  std::uint64_t sequence = 1;
  Payload payload = Payload::object();
  bool operator==(const Final&) const = default;
};

using ClientMessage = std::variant<Hello, RequestTasks, Partial, Final>;

struct Welcome {
  std::string session;
  bool operator==(const Welcome&) const = default;
};

struct Tasks {
  std::vector<Task> tasks;  // only id, kernel, payload and checkpoint travel
  bool operator==(const Tasks&) const = default;
};

enum class AckStatus { Applied, Stale, AlreadyComplete, Accepted, Duplicate };

struct Ack {
  std::string task_id;
  AckStatus status = AckStatus::Accepted;
  bool operator==(const Ack&) const = default;
};

struct Drained {
  bool operator==(const Drained&) const = default;
};

struct ErrorReply {
  std::string reason;
  bool operator==(const ErrorReply&) const = default;
};

using ServerMessage = std::variant<Welcome, Tasks, Ack, Drained, ErrorReply>;

AckStatus to_ack(PartialStatus s);
AckStatus to_ack(CompletionStatus s);
std::string_view to_string(AckStatus s);
AckStatus parse_ack_status(std::string_view s);

std::string_view type_name(const ClientMessage& m);
std::string_view type_name(const ServerMessage& m);

struct Frame {
  bool compressed = false;
  std::string body;
  bool operator==(const Frame&) const = default;
};

struct CodecOptions {
  bool compression = true;
  std::size_t threshold = 16 * 1024;
  int level = 6;
  std::size_t max_body = 64u << 20;  // decoded size limit
};

Frame encode(const ClientMessage& m, const CodecOptions& opts = {});
Frame encode(const ServerMessage& m, const CodecOptions& opts = {});

/// Throws MalformedMessage on anything that is not a well-formed message.
ClientMessage decode_client(const Frame& f, const CodecOptions& opts = {});
ServerMessage decode_server(const Frame& f, const CodecOptions& opts = {});

/// Canonical JSON body without compression.
std::string to_json(const ClientMessage& m);
std::string to_json(const ServerMessage& m);

std::string deflate(std::string_view raw, int level);
std::string inflate(std::string_view compressed, std::size_t max_size);

/// Framing overhead added to one message on the given transport.
std::uint64_t framing_overhead(Transport t, const WireOverhead& o = {});

/// Estimated bytes on the wire for one message: encoded body plus framing.
/// Request-response charges half of the per-exchange header block to each of
/// the two messages in an exchange; streams charge one frame header.
std::uint64_t wire_cost(const Frame& f, Transport t, const WireOverhead& o = {});
std::uint64_t wire_cost(const ClientMessage& m, Transport t, const WireOverhead& o = {},
                        const CodecOptions& opts = {});
std::uint64_t wire_cost(const ServerMessage& m, Transport t, const WireOverhead& o = {},
                        const CodecOptions& opts = {});

}  // namespace webswarm::protocol
