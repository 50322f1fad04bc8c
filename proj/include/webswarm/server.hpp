#pragma once

// HTTP + WebSocket front end of the task manager. One thread per connection.
//
//   POST /api/hello | /api/tasks | /api/partial | /api/final  (?session=ID)
//   GET  /bundle/{kernel_id}                                  (?session=ID)
//   GET  /admin/stats
//   GET  /ws   upgraded to a WebSocket carrying the same messages
//
// Message bodies are JSON; "Content-Encoding: deflate" (HTTP) or a binary
// frame (WebSocket) marks a compressed body.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include "webswarm/manager.hpp"
#include "webswarm/net.hpp"

namespace webswarm {

struct HttpServerOptions {
  std::string listen = "127.0.0.1:0";  // port 0 picks a free port
  bool request_response = true;
  bool stream = true;
  double reap_interval_s = 1.0;
  double poll_interval_s = 1.0;
};

class HttpServer {
 public:
  /// Binds immediately. Throws BindFailure.
  HttpServer(std::shared_ptr<TaskManager> manager, HttpServerOptions options);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Starts the accept loop and the maintenance loop (polling the task
  /// source, reaping idle sessions).
  void start();

  /// Stops accepting, drops every open connection and joins all threads.
  void stop();

  std::uint16_t port() const { return port_; }
  std::size_t active_connections() const;
  TaskManager& manager() { return *manager_; }

 private:
  void accept_loop();
  void maintenance_loop();
  void serve_connection(net::tcp::socket socket);

  std::shared_ptr<TaskManager> manager_;
  HttpServerOptions options_;
  net::asio::io_context ioc_;
  net::tcp::acceptor acceptor_;
  std::uint16_t port_ = 0;

  std::thread accept_thread_;
  std::thread maintenance_thread_;
  std::atomic<bool> stopping_{false};
  bool started_ = false;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::set<int> live_fds_;
  std::size_t active_ = 0;
};

}  // namespace webswarm
