#pragma once

// Socket plumbing shared by the HTTP/WebSocket server and clients.

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core/error.hpp>
#include <boost/beast/core/role.hpp>

namespace webswarm::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

struct ByteCounters {
  std::atomic<std::uint64_t> in{0};
  std::atomic<std::uint64_t> out{0};
};

/// tcp::socket that tallies application bytes read and written. Several
/// sockets may share one set of counters.
class CountingSocket {
 public:
  using executor_type = tcp::socket::executor_type;

  explicit CountingSocket(tcp::socket s, std::shared_ptr<ByteCounters> counters = nullptr)
      : sock_(std::move(s)), counters_(counters ? std::move(counters) : std::make_shared<ByteCounters>()) {}

  executor_type get_executor() { return sock_.get_executor(); }

  template <class Buffers>
  std::size_t read_some(const Buffers& b) {
    const auto n = sock_.read_some(b);
    counters_->in += n;
    return n;
  }
  template <class Buffers>
  std::size_t read_some(const Buffers& b, boost::beast::error_code& ec) {
    const auto n = sock_.read_some(b, ec);
    counters_->in += n;
    return n;
  }
  template <class Buffers>
  std::size_t write_some(const Buffers& b) {
    const auto n = sock_.write_some(b);
    counters_->out += n;
    return n;
  }
  template <class Buffers>
  std::size_t write_some(const Buffers& b, boost::beast::error_code& ec) {
    const auto n = sock_.write_some(b, ec);
    counters_->out += n;
    return n;
  }

  tcp::socket& socket() { return sock_; }
  std::uint64_t bytes_in() const { return counters_->in; }
  std::uint64_t bytes_out() const { return counters_->out; }
  const std::shared_ptr<ByteCounters>& counters() const { return counters_; }

 private:
  tcp::socket sock_;
  std::shared_ptr<ByteCounters> counters_;
};

void teardown(boost::beast::role_type role, CountingSocket& s, boost::beast::error_code& ec);

/// Immediate bidirectional shutdown, safe to call from another thread to
/// unblock a peer thread stuck in a read.
void hard_shutdown(tcp::socket& s);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;

  /// "host:port", optionally prefixed by http:// or ws://. Throws ConfigError.
  static Endpoint parse(std::string_view text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Query parameter from a request target, percent-decoding not applied
/// (ids are plain tokens).
std::string query_param(std::string_view target, std::string_view name);

/// Path part of a request target.
std::string_view target_path(std::string_view target);

}  // namespace webswarm::net
