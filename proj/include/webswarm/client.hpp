#pragma once

// Native clients of the task manager's HTTP and WebSocket endpoints, and an
// HTTP-backed task source.

#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "webswarm/net.hpp"
#include "webswarm/protocol.hpp"
#include "webswarm/task_source.hpp"

namespace webswarm {

/// One session's connection to the manager. Replies arrive in request order.
/// abort() may be called from any thread; it drops the connection without
/// a farewell, and pending or later calls throw ServerUnreachable.
class Channel {
 public:
  virtual ~Channel() = default;

  virtual protocol::ServerMessage call(const protocol::ClientMessage& m) = 0;

  /// Issues a request whose reply is collected later. The returned future
  /// may be deferred: get() performs the read on the calling thread.
  virtual std::future<protocol::ServerMessage> call_async(const protocol::ClientMessage& m) = 0;

  virtual void abort() = 0;

  /// Application bytes on the wire, client perspective.
  virtual std::uint64_t bytes_sent() const = 0;
  virtual std::uint64_t bytes_received() const = 0;

  virtual Transport transport() const = 0;
  const std::string& session() const { return session_; }

 protected:
  std::string session_;
};

struct ChannelOptions {
  net::Endpoint endpoint;
  protocol::CodecOptions codec;
  /// Header set of a current desktop browser, so that header overhead is
  /// representative of real visitors.
  bool browser_headers = true;
  std::string origin = "http://volunteer.example";
};

/// Opens a connection for `transport`. The stream variant performs the
/// upgrade handshake here. Throws ServerUnreachable.
std::unique_ptr<Channel> connect_channel(Transport transport, const ChannelOptions& options);

/// GET /bundle/{kernel}?session=... Returns the body; throws UnknownKernel
/// on 404 and ServerUnreachable on connection failure.
std::string fetch_bundle(const ChannelOptions& options, const std::string& kernel_id, const std::string& session,
                         std::uint64_t* bytes_sent = nullptr, std::uint64_t* bytes_received = nullptr);

/// GET /admin/stats as JSON. Throws ServerUnreachable.
nlohmann::json fetch_stats(const net::Endpoint& endpoint);

/// Task source at an HTTP endpoint:
///   GET  /tasks?max=N  -> [{task_id, kernel_id, payload}, ...]
///   POST /results      <- {task_id, payload}
/// Any transport failure or non-2xx status raises SourceUnavailable.
class HttpTaskSource final : public TaskSource {
 public:
  explicit HttpTaskSource(TaskSourceDescriptor descriptor);

  std::vector<Task> pull_tasks(std::size_t max) override;
  void push_result(const std::string& task_id, const Payload& payload) override;

 private:
  TaskSourceDescriptor descriptor_;
  net::Endpoint endpoint_;
  std::string base_path_;
};

}  // namespace webswarm
