#include "webswarm/protocol.hpp"

#include <zlib.h>

#include "webswarm/error.hpp"

namespace webswarm::protocol {

using nlohmann::json;

AckStatus to_ack(PartialStatus s) {
  switch (s) {
    case PartialStatus::Applied: return AckStatus::Applied;
    case PartialStatus::Stale: return AckStatus::Stale;
    case PartialStatus::AlreadyComplete: return AckStatus::AlreadyComplete;
  }
  return AckStatus::Stale;
}

AckStatus to_ack(CompletionStatus s) {
  return s == CompletionStatus::Accepted ? AckStatus::Accepted : AckStatus::Duplicate;
}

std::string_view to_string(AckStatus s) {
  switch (s) {
    case AckStatus::Applied: return "applied";
    case AckStatus::Stale: return "stale";
    case AckStatus::AlreadyComplete: return "already_complete";
    case AckStatus::Accepted: return "accepted";
    case AckStatus::Duplicate: return "duplicate";
  }
  return "stale";
}

AckStatus parse_ack_status(std::string_view s) {
  if (s == "applied") return AckStatus::Applied;
  if (s == "stale") return AckStatus::Stale;
  if (s == "already_complete") return AckStatus::AlreadyComplete;
  if (s == "accepted") return AckStatus::Accepted;
  if (s == "duplicate") return AckStatus::Duplicate;
  throw MalformedMessage("unknown ack status '" + std::string(s) + "'");
}

std::string_view type_name(const ClientMessage& m) {
  static constexpr std::string_view names[] = {"hello", "request_tasks", "partial", "final"};
  return names[m.index()];
}

std::string_view type_name(const ServerMessage& m) {
  static constexpr std::string_view names[] = {"welcome", "tasks", "ack", "drained", "error"};
  return names[m.index()];
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json checkpoint_json(const CheckpointRecord& c) {
  return {{"sequence", c.sequence}, {"progress_units", c.progress_units}, {"partial_payload", c.partial_payload}};
}

json to_document(const ClientMessage& m) {
  return std::visit(overloaded{
                        [](const Hello& h) {
                          json j = {{"type", "hello"}, {"client_info", h.client_info}};
                          if (h.session) j["session"] = *h.session;
                          return j;
                        },
                        [](const RequestTasks& r) { return json{{"type", "request_tasks"}, {"count", r.count}}; },
                        [](const Partial& p) {
                          return json{{"type", "partial"},
                                      {"task_id", p.task_id},
                                      {"sequence", p.sequence},
                                      {"progress_units", p.progress_units},
                                      {"partial_payload", p.partial_payload}};
                        },
                        [](const Final& f) {
                          return json{{"type", "final"},
                                      {"task_id", f.task_id},
                                      {"sequence", f.sequence},
                                      {"payload", f.payload}};
                        },
                    },
                    m);
}

json to_document(const ServerMessage& m) {
  return std::visit(overloaded{
                        [](const Welcome& w) { return json{{"type", "welcome"}, {"session", w.session}}; },
                        [](const Tasks& t) {
                          json list = json::array();
                          for (const auto& task : t.tasks) {
                            json e = {{"task_id", task.task_id}, {"kernel_id", task.kernel_id}, {"payload", task.payload}};
                            if (task.checkpoint) e["checkpoint"] = checkpoint_json(*task.checkpoint);
                            list.push_back(std::move(e));
                          }
                          return json{{"type", "tasks"}, {"tasks", std::move(list)}};
                        },
                        [](const Ack& a) {
                          return json{{"type", "ack"}, {"task_id", a.task_id}, {"status", to_string(a.status)}};
                        },
                        [](const Drained&) { return json{{"type", "drained"}}; },
                        [](const ErrorReply& e) { return json{{"type", "error"}, {"reason", e.reason}}; },
                    },
                    m);
}

// Strict field access: every failure is a MalformedMessage.
const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw MalformedMessage(std::string("missing field '") + key + "'");
  return *it;
}

std::string need_string(const json& j, const char* key) {
  const auto& v = need(j, key);
  if (!v.is_string()) throw MalformedMessage(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t need_uint(const json& j, const char* key) {
  const auto& v = need(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw MalformedMessage(std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

const json& need_object(const json& j, const char* key) {
  const auto& v = need(j, key);
  if (!v.is_object()) throw MalformedMessage(std::string("field '") + key + "' must be an object");
  return v;
}

std::uint64_t need_sequence(const json& j) {
  auto s = need_uint(j, "sequence");
  if (s == 0) throw MalformedMessage("sequence must be >= 1");
  return s;
}

json parse_body(const Frame& f, const CodecOptions& opts) {
  std::string text = f.compressed ? inflate(f.body, opts.max_body) : f.body;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedMessage(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MalformedMessage("message must be a JSON object");
  return doc;
}

Frame finish(const json& doc, const CodecOptions& opts) {
  Frame f;
  f.body = doc.dump();
  if (opts.compression && f.body.size() > opts.threshold) {
    f.body = deflate(f.body, opts.level);
    f.compressed = true;
  }
  return f;
}

}  // namespace

std::string to_json(const ClientMessage& m) { return to_document(m).dump(); }
std::string to_json(const ServerMessage& m) { return to_document(m).dump(); }

Frame encode(const ClientMessage& m, const CodecOptions& opts) { return finish(to_document(m), opts); }
Frame encode(const ServerMessage& m, const CodecOptions& opts) { return finish(to_document(m), opts); }

ClientMessage decode_client(const Frame& f, const CodecOptions& opts) {
  const auto doc = parse_body(f, opts);
  const auto type = need_string(doc, "type");
  if (type == "hello") {
    Hello h;
    if (doc.contains("client_info")) h.client_info = need_object(doc, "client_info");
    if (doc.contains("session")) h.session = need_string(doc, "session");
    return h;
  }
  if (type == "request_tasks") {
    auto count = need_uint(doc, "count");
    if (count == 0 || count > 1'000'000) throw MalformedMessage("count must be in 1..1000000");
    return RequestTasks{static_cast<std::uint32_t>(count)};
  }
  if (type == "partial") {
    return Partial{need_string(doc, "task_id"), need_sequence(doc), need_uint(doc, "progress_units"),
                   need_object(doc, "partial_payload")};
  }
  if (type == "final") {
    return Final{need_string(doc, "task_id"), need_sequence(doc), need_object(doc, "payload")};
  }
  throw MalformedMessage("unknown client message type '" + type + "'");
}

ServerMessage decode_server(const Frame& f, const CodecOptions& opts) {
  const auto doc = parse_body(f, opts);
  const auto type = need_string(doc, "type");
  if (type == "welcome") return Welcome{need_string(doc, "session")};
  if (type == "tasks") {
    const auto& list = need(doc, "tasks");
    if (!list.is_array()) throw MalformedMessage("tasks must be an array");
    Tasks out;
    for (const auto& e : list) {
      if (!e.is_object()) throw MalformedMessage("task entry must be an object");
      Task t;
      t.task_id = need_string(e, "task_id");
      t.kernel_id = need_string(e, "kernel_id");
      t.payload = need_object(e, "payload");
      if (e.contains("checkpoint")) {
        const auto& c = need_object(e, "checkpoint");
        t.checkpoint = CheckpointRecord{need_sequence(c), need_object(c, "partial_payload"),
                                        need_uint(c, "progress_units")};
      }
      out.tasks.push_back(std::move(t));
    }
    return out;
  }
  if (type == "ack") return Ack{need_string(doc, "task_id"), parse_ack_status(need_string(doc, "status"))};
  if (type == "drained") return Drained{};
  if (type == "error") return ErrorReply{need_string(doc, "reason")};
  throw MalformedMessage("unknown server message type '" + type + "'");
}

std::string deflate(std::string_view raw, int level) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string out(bound, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                           reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), level);
  if (rc != Z_OK) throw Error("zlib compression failed");
  out.resize(bound);
  return out;
}

std::string inflate(std::string_view compressed, std::size_t max_size) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw Error("zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::string out;
  char buf[16384];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = ::inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw MalformedMessage("corrupt compressed body");
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (out.size() > max_size) {
      inflateEnd(&zs);
      throw MalformedMessage("compressed body exceeds size limit");
    }
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw MalformedMessage("truncated compressed body");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::uint64_t framing_overhead(Transport t, const WireOverhead& o) {
  return t == Transport::RequestResponse ? o.request_response_exchange / 2 : o.stream_frame;
}

std::uint64_t wire_cost(const Frame& f, Transport t, const WireOverhead& o) {
  return f.body.size() + framing_overhead(t, o);
}

std::uint64_t wire_cost(const ClientMessage& m, Transport t, const WireOverhead& o, const CodecOptions& opts) {
  return wire_cost(encode(m, opts), t, o);
}

std::uint64_t wire_cost(const ServerMessage& m, Transport t, const WireOverhead& o, const CodecOptions& opts) {
  return wire_cost(encode(m, opts), t, o);
}

}  // namespace webswarm::protocol
