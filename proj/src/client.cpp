#include "webswarm/client.hpp"

#include <sys/socket.h>

#include <atomic>
#include <map>
#include <set>

#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "webswarm/error.hpp"

namespace webswarm {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace pr = protocol;
using net::tcp;

namespace {

constexpr std::size_t kBodyLimit = 64u << 20;
constexpr const char* kUserAgent = "Mozilla/5.0 (X11; Linux x86_64; rv:109.0) Gecko/20100101 Firefox/115.0";

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

std::string_view route_of(const pr::ClientMessage& m) {
  return std::visit(
      [](const auto& v) -> std::string_view {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, pr::Hello>) return "hello";
        if constexpr (std::is_same_v<T, pr::RequestTasks>) return "tasks";
        if constexpr (std::is_same_v<T, pr::Partial>) return "partial";
        return "final";
      },
      m);
}

void browser_fields(Request& req, const ChannelOptions& o, std::string_view dest) {
  req.set(http::field::user_agent, kUserAgent);
  req.set(http::field::accept, "*/*");
  req.set(http::field::accept_language, "en-GB,en;q=0.5");
  req.set(http::field::accept_encoding, "gzip, deflate, br");
  req.set(http::field::referer, o.origin + "/");
  req.set(http::field::origin, o.origin);
  req.set(http::field::connection, "keep-alive");
  req.set("Sec-Fetch-Dest", std::string(dest));
  req.set("Sec-Fetch-Mode", "cors");
  req.set("Sec-Fetch-Site", "cross-site");
}

tcp::socket open_socket(net::asio::io_context& ioc, const net::Endpoint& ep) {
  tcp::resolver resolver(ioc);
  beast::error_code ec;
  const auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
  if (ec) throw ServerUnreachable("cannot resolve " + ep.str() + ": " + ec.message());
  tcp::socket s(ioc);
  net::asio::connect(s, results, ec);
  if (ec) throw ServerUnreachable("cannot connect to " + ep.str() + ": " + ec.message());
  s.set_option(tcp::no_delay(true), ec);
  return s;
}

Response exchange_once(net::CountingSocket& s, beast::flat_buffer& buf, Request& req) {
  beast::error_code ec;
  http::write(s, req, ec);
  if (ec) throw ServerUnreachable("write failed: " + ec.message());
  http::response_parser<http::string_body> parser;
  parser.body_limit(kBodyLimit);
  http::read(s, buf, parser, ec);
  if (ec) throw ServerUnreachable("read failed: " + ec.message());
  return parser.release();
}

pr::ServerMessage decode_reply(const Response& res, const pr::CodecOptions& codec) {
  if (res[http::field::content_type] != "application/json") {
    throw ServerUnreachable("unexpected HTTP " + std::to_string(res.result_int()));
  }
  return pr::decode_server(pr::Frame{res[http::field::content_encoding] == "deflate", res.body()}, codec);
}

Request message_request(const ChannelOptions& o, const pr::ClientMessage& m, const std::string& session) {
  auto frame = pr::encode(m, o.codec);
  std::string target = "/api/" + std::string(route_of(m));
  if (!session.empty()) target += "?session=" + session;
  Request req{http::verb::post, target, 11};
  req.set(http::field::host, o.endpoint.str());
  if (o.browser_headers) browser_fields(req, o, "empty");
  req.set(http::field::content_type, "application/json");
  if (frame.compressed) req.set(http::field::content_encoding, "deflate");
  req.body() = std::move(frame.body);
  req.prepare_payload();
  return req;
}

class HttpChannel final : public Channel {
 public:
  explicit HttpChannel(ChannelOptions o) : opts_(std::move(o)), counters_(std::make_shared<net::ByteCounters>()) {}

  ~HttpChannel() override {
    for (auto& f : pending_) {
      if (f.valid()) f.wait();
    }
  }

  pr::ServerMessage call(const pr::ClientMessage& m) override {
    std::lock_guard lock(call_mu_);
    check_aborted();
    auto req = message_request(opts_, m, session_);
    Response res;
    const bool reused = conn_ != nullptr;
    try {
      ensure_connected();
      res = exchange_once(*conn_, buf_, req);
    } catch (const ServerUnreachable&) {
      drop_connection();
      if (!reused || aborted_) throw;
      ensure_connected();  // the server may have closed an idle keep-alive connection
      res = exchange_once(*conn_, buf_, req);
    }
    if (!res.keep_alive()) drop_connection();
    auto reply = decode_reply(res, opts_.codec);
    if (const auto* w = std::get_if<pr::Welcome>(&reply)) session_ = w->session;
    return reply;
  }

  std::future<pr::ServerMessage> call_async(const pr::ClientMessage& m) override {
    check_aborted();
    auto req = message_request(opts_, m, session_);
    auto fut = std::async(std::launch::async, [this, req = std::move(req)]() mutable {
      net::asio::io_context ioc;
      check_aborted();
      net::CountingSocket s(open_socket(ioc, opts_.endpoint), counters_);
      const int fd = s.socket().native_handle();
      register_fd(fd);
      beast::flat_buffer buf;
      Response res;
      try {
        res = exchange_once(s, buf, req);
      } catch (...) {
        unregister_fd(fd);
        throw;
      }
      unregister_fd(fd);
      beast::error_code ec;
      s.socket().shutdown(tcp::socket::shutdown_both, ec);
      return decode_reply(res, opts_.codec);
    });
    // A shared copy keeps the destructor from returning before the request
    // has finished touching this object.
    auto shared = fut.share();
    pending_.push_back(shared);
    return std::async(std::launch::deferred, [shared] { return shared.get(); });
  }

  void abort() override {
    std::lock_guard lock(fd_mu_);
    aborted_ = true;
    for (int fd : fds_) ::shutdown(fd, SHUT_RDWR);
  }

  std::uint64_t bytes_sent() const override { return counters_->out; }
  std::uint64_t bytes_received() const override { return counters_->in; }
  Transport transport() const override { return Transport::RequestResponse; }

 private:
  void check_aborted() const {
    if (aborted_) throw ServerUnreachable("channel aborted");
  }

  void ensure_connected() {
    if (conn_) return;
    conn_ = std::make_unique<net::CountingSocket>(open_socket(ioc_, opts_.endpoint), counters_);
    conn_fd_ = conn_->socket().native_handle();
    register_fd(conn_fd_);
    buf_.clear();
  }

  void drop_connection() {
    if (!conn_) return;
    unregister_fd(conn_fd_);
    beast::error_code ec;
    conn_->socket().shutdown(tcp::socket::shutdown_both, ec);
    conn_->socket().close(ec);
    conn_.reset();
  }

  void register_fd(int fd) {
    std::lock_guard lock(fd_mu_);
    if (aborted_) {
      ::shutdown(fd, SHUT_RDWR);
    }
    fds_.insert(fd);
  }

  void unregister_fd(int fd) {
    std::lock_guard lock(fd_mu_);
    fds_.erase(fd);
  }

  ChannelOptions opts_;
  std::shared_ptr<net::ByteCounters> counters_;
  net::asio::io_context ioc_;
  std::unique_ptr<net::CountingSocket> conn_;
  int conn_fd_ = -1;
  beast::flat_buffer buf_;
  std::mutex call_mu_;
  std::mutex fd_mu_;
  std::set<int> fds_;
  std::atomic<bool> aborted_{false};
  std::vector<std::shared_future<pr::ServerMessage>> pending_;
};

class WsChannel final : public Channel {
 public:
  explicit WsChannel(ChannelOptions o) : opts_(std::move(o)), ws_(net::CountingSocket(open_socket(ioc_, opts_.endpoint))) {
    fd_ = ws_.next_layer().socket().native_handle();
    if (opts_.browser_headers) {
      const auto origin = opts_.origin;
      ws_.set_option(websocket::stream_base::decorator([origin](websocket::request_type& r) {
        r.set(http::field::user_agent, kUserAgent);
        r.set(http::field::accept, "*/*");
        r.set(http::field::accept_language, "en-GB,en;q=0.5");
        r.set(http::field::accept_encoding, "gzip, deflate, br");
        r.set(http::field::origin, origin);
        r.set(http::field::pragma, "no-cache");
        r.set(http::field::cache_control, "no-cache");
        r.set("Sec-Fetch-Dest", "empty");
        r.set("Sec-Fetch-Mode", "websocket");
        r.set("Sec-Fetch-Site", "cross-site");
      }));
    }
    ws_.read_message_max(kBodyLimit);
    beast::error_code ec;
    ws_.handshake(opts_.endpoint.str(), "/ws", ec);
    if (ec) throw ServerUnreachable("websocket handshake failed: " + ec.message());
  }

  ~WsChannel() override {
    if (!aborted_) {
      beast::error_code ec;
      ws_.close(websocket::close_code::normal, ec);
    }
  }

  pr::ServerMessage call(const pr::ClientMessage& m) override {
    std::lock_guard lock(mu_);
    return receive(send(m));
  }

  std::future<pr::ServerMessage> call_async(const pr::ClientMessage& m) override {
    std::lock_guard lock(mu_);
    const auto ticket = send(m);
    return std::async(std::launch::deferred, [this, ticket] {
      std::lock_guard lock2(mu_);
      return receive(ticket);
    });
  }

  void abort() override {
    aborted_ = true;
    ::shutdown(fd_, SHUT_RDWR);
  }

  std::uint64_t bytes_sent() const override { return ws_.next_layer().bytes_out(); }
  std::uint64_t bytes_received() const override { return ws_.next_layer().bytes_in(); }
  Transport transport() const override { return Transport::Stream; }

 private:
  std::uint64_t send(const pr::ClientMessage& m) {
    if (aborted_) throw ServerUnreachable("channel aborted");
    const auto frame = pr::encode(m, opts_.codec);
    ws_.binary(frame.compressed);
    beast::error_code ec;
    ws_.write(net::asio::buffer(frame.body), ec);
    if (ec) throw ServerUnreachable("websocket write failed: " + ec.message());
    return next_ticket_++;
  }

  pr::ServerMessage receive(std::uint64_t ticket) {
    while (!replies_.contains(ticket)) {
      if (aborted_) throw ServerUnreachable("channel aborted");
      beast::flat_buffer buf;
      beast::error_code ec;
      ws_.read(buf, ec);
      if (ec) throw ServerUnreachable("websocket read failed: " + ec.message());
      auto reply = pr::decode_server(pr::Frame{!ws_.got_text(), beast::buffers_to_string(buf.data())}, opts_.codec);
      if (const auto* w = std::get_if<pr::Welcome>(&reply)) session_ = w->session;
      replies_.emplace(next_read_++, std::move(reply));
    }
    auto node = replies_.extract(ticket);
    return std::move(node.mapped());
  }

  ChannelOptions opts_;
  net::asio::io_context ioc_;
  websocket::stream<net::CountingSocket> ws_;
  int fd_ = -1;
  std::recursive_mutex mu_;
  std::atomic<bool> aborted_{false};
  std::uint64_t next_ticket_ = 0;
  std::uint64_t next_read_ = 0;
  std::map<std::uint64_t, pr::ServerMessage> replies_;
};

Response simple_request(const net::Endpoint& ep, Request req) {
  net::asio::io_context ioc;
  net::CountingSocket s(open_socket(ioc, ep));
  beast::flat_buffer buf;
  auto res = exchange_once(s, buf, req);
  beast::error_code ec;
  s.socket().shutdown(tcp::socket::shutdown_both, ec);
  return res;
}

}  // namespace

std::unique_ptr<Channel> connect_channel(Transport transport, const ChannelOptions& options) {
  if (transport == Transport::Stream) return std::make_unique<WsChannel>(options);
  return std::make_unique<HttpChannel>(options);
}

std::string fetch_bundle(const ChannelOptions& options, const std::string& kernel_id, const std::string& session,
                         std::uint64_t* bytes_sent, std::uint64_t* bytes_received) {
  std::string target = "/bundle/" + kernel_id;
  if (!session.empty()) target += "?session=" + session;
  Request req{http::verb::get, target, 11};
  req.set(http::field::host, options.endpoint.str());
  if (options.browser_headers) browser_fields(req, options, "script");
  net::asio::io_context ioc;
  net::CountingSocket s(open_socket(ioc, options.endpoint));
  beast::flat_buffer buf;
  auto res = exchange_once(s, buf, req);
  if (bytes_sent) *bytes_sent = s.bytes_out();
  if (bytes_received) *bytes_received = s.bytes_in();
  beast::error_code ec;
  s.socket().shutdown(tcp::socket::shutdown_both, ec);
  if (res.result() == http::status::not_found) throw UnknownKernel(kernel_id);
  if (res.result() != http::status::ok) throw ServerUnreachable("bundle fetch: HTTP " + std::to_string(res.result_int()));
  return std::move(res.body());
}

nlohmann::json fetch_stats(const net::Endpoint& endpoint) {
  Request req{http::verb::get, "/admin/stats", 11};
  req.set(http::field::host, endpoint.str());
  req.keep_alive(false);
  const auto res = simple_request(endpoint, std::move(req));
  if (res.result() != http::status::ok) throw ServerUnreachable("stats: HTTP " + std::to_string(res.result_int()));
  try {
    return nlohmann::json::parse(res.body());
  } catch (const nlohmann::json::exception& e) {
    throw ServerUnreachable(std::string("stats: ") + e.what());
  }
}

HttpTaskSource::HttpTaskSource(TaskSourceDescriptor descriptor) : descriptor_(std::move(descriptor)) {
  descriptor_.validate();
  std::string_view rest = descriptor_.endpoint;
  if (rest.starts_with("http://")) rest.remove_prefix(7);
  const auto slash = rest.find('/');
  endpoint_ = net::Endpoint::parse(rest.substr(0, slash));
  if (slash != std::string_view::npos) base_path_ = std::string(rest.substr(slash));
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

std::vector<Task> HttpTaskSource::pull_tasks(std::size_t max) {
  Request req{http::verb::get, base_path_ + "/tasks?max=" + std::to_string(max), 11};
  req.set(http::field::host, endpoint_.str());
  req.set(http::field::accept, "application/json");
  if (descriptor_.token) req.set(http::field::authorization, "Bearer " + *descriptor_.token);
  req.keep_alive(false);
  Response res;
  try {
    res = simple_request(endpoint_, std::move(req));
  } catch (const ServerUnreachable& e) {
    throw SourceUnavailable(e.what());
  }
  if (res.result_int() / 100 != 2) throw SourceUnavailable("GET /tasks: HTTP " + std::to_string(res.result_int()));
  std::vector<Task> out;
  try {
    const auto doc = nlohmann::json::parse(res.body());
    if (!doc.is_array()) throw SourceUnavailable("GET /tasks: expected an array");
    for (const auto& item : doc) {
      Task t;
      t.task_id = item.at("task_id").get<std::string>();
      t.kernel_id = item.at("kernel_id").get<std::string>();
      t.payload = item.value("payload", Payload::object());
      if (t.task_id.empty()) throw SourceUnavailable("GET /tasks: empty task_id");
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SourceUnavailable(std::string("GET /tasks: ") + e.what());
  }
  if (out.size() > max) out.resize(max);
  return out;
}

void HttpTaskSource::push_result(const std::string& task_id, const Payload& payload) {
  Request req{http::verb::post, base_path_ + "/results", 11};
  req.set(http::field::host, endpoint_.str());
  req.set(http::field::content_type, "application/json");
  if (descriptor_.token) req.set(http::field::authorization, "Bearer " + *descriptor_.token);
  req.keep_alive(false);
  req.body() = nlohmann::json{{"task_id", task_id}, {"payload", payload}}.dump();
  req.prepare_payload();
  Response res;
  try {
    res = simple_request(endpoint_, std::move(req));
  } catch (const ServerUnreachable& e) {
    throw SourceUnavailable(e.what());
  }
  if (res.result_int() / 100 != 2) throw SourceUnavailable("POST /results: HTTP " + std::to_string(res.result_int()));
}

}  // namespace webswarm
