#include "webswarm/server.hpp"

#include <sys/socket.h>

#include <chrono>
#include <ctime>
#include <iostream>

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

constexpr const char* kServerName = "webswarm";
constexpr std::size_t kBodyLimit = 64u << 20;

using Response = http::response<http::string_body>;

std::string http_date() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%a, %d %b %Y %H:%M:%S GMT", &tm);
  return buf;
}

void cors(Response& res) {
  res.set(http::field::access_control_allow_origin, "*");
}

Response make_response(const http::request<http::string_body>& req, http::status status, std::string body,
                       std::string_view content_type) {
  Response res{status, req.version()};
  res.set(http::field::server, kServerName);
  res.set(http::field::date, http_date());
  res.set(http::field::content_type, std::string(content_type));
  cors(res);
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response message_response(const http::request<http::string_body>& req, http::status status,
                          const pr::ServerMessage& msg, const pr::CodecOptions& codec) {
  auto frame = pr::encode(msg, codec);
  auto res = make_response(req, status, std::move(frame.body), "application/json");
  if (frame.compressed) res.set(http::field::content_encoding, "deflate");
  res.set(http::field::cache_control, "no-store");
  return res;
}

http::status status_for(const pr::ServerMessage& msg) {
  if (const auto* e = std::get_if<pr::ErrorReply>(&msg)) {
    if (e->reason == "unknown_session") return http::status::gone;
    if (e->reason == "unknown_task") return http::status::not_found;
    return http::status::bad_request;
  }
  return http::status::ok;
}

bool route_matches(std::string_view route, const pr::ClientMessage& m) {
  if (route == "hello") return std::holds_alternative<pr::Hello>(m);
  if (route == "tasks") return std::holds_alternative<pr::RequestTasks>(m);
  if (route == "partial") return std::holds_alternative<pr::Partial>(m);
  if (route == "final") return std::holds_alternative<pr::Final>(m);
  return false;
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<TaskManager> manager, HttpServerOptions options)
    : manager_(std::move(manager)), options_(std::move(options)), acceptor_(ioc_) {
  if (!options_.request_response && !options_.stream) throw ConfigError("no transport enabled");
  const auto ep = net::Endpoint::parse(options_.listen);
  beast::error_code ec;
  tcp::resolver resolver(ioc_);
  const auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
  if (ec || results.empty()) throw BindFailure("cannot resolve " + options_.listen + ": " + ec.message());
  const tcp::endpoint endpoint = *results.begin();
  acceptor_.open(endpoint.protocol(), ec);
  if (!ec) acceptor_.set_option(net::asio::socket_base::reuse_address(true), ec);
  if (!ec) acceptor_.bind(endpoint, ec);
  if (!ec) acceptor_.listen(net::asio::socket_base::max_listen_connections, ec);
  if (ec) throw BindFailure("cannot listen on " + options_.listen + ": " + ec.message());
  port_ = acceptor_.local_endpoint().port();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  if (started_) return;
  started_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  maintenance_thread_ = std::thread([this] { maintenance_loop(); });
}

void HttpServer::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.is_open()) {
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  beast::error_code ec;
  acceptor_.close(ec);
  {
    std::unique_lock lock(mu_);
    for (int fd : live_fds_) ::shutdown(fd, SHUT_RDWR);
    cv_.notify_all();
    cv_.wait(lock, [this] { return active_ == 0; });
  }
  if (maintenance_thread_.joinable()) maintenance_thread_.join();
}

std::size_t HttpServer::active_connections() const {
  std::lock_guard lock(mu_);
  return active_;
}

void HttpServer::accept_loop() {
  while (!stopping_) {
    tcp::socket socket(ioc_);
    beast::error_code ec;
    acceptor_.accept(socket, ec);
    if (ec) {
      if (stopping_) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    {
      std::lock_guard lock(mu_);
      if (stopping_) break;
      ++active_;
      live_fds_.insert(socket.native_handle());
    }
    std::thread([this, s = std::move(socket)]() mutable { serve_connection(std::move(s)); }).detach();
  }
}

void HttpServer::maintenance_loop() {
  using clock = std::chrono::steady_clock;
  auto next_reap = clock::now();
  auto next_poll = clock::now();
  const auto reap_every = std::chrono::duration<double>(options_.reap_interval_s);
  const auto poll_every = std::chrono::duration<double>(options_.poll_interval_s);
  std::unique_lock lock(mu_);
  while (!stopping_) {
    const auto wake = std::min(next_reap, next_poll);
    cv_.wait_until(lock, wake, [this] { return stopping_.load(); });
    if (stopping_) break;
    lock.unlock();
    const auto now = clock::now();
    if (now >= next_reap) {
      manager_->reap_idle();
      next_reap = now + std::chrono::duration_cast<clock::duration>(reap_every);
    }
    if (now >= next_poll) {
      manager_->poll();
      next_poll = now + std::chrono::duration_cast<clock::duration>(poll_every);
    }
    lock.lock();
  }
}

void HttpServer::serve_connection(tcp::socket socket) {
  const int fd = socket.native_handle();
  net::CountingSocket cs(std::move(socket));
  beast::flat_buffer buffer;
  const auto& codec = manager_->config().codec;
  std::string ws_session;

  try {
    for (;;) {
      const auto in0 = cs.bytes_in();
      http::request_parser<http::string_body> parser;
      parser.body_limit(kBodyLimit);
      beast::error_code ec;
      http::read(cs, buffer, parser, ec);
      if (ec) break;
      auto req = parser.release();
      const std::string target(req.target());
      const auto path = net::target_path(target);

      if (path == "/ws" && websocket::is_upgrade(req)) {
        if (!options_.stream) {
          http::write(cs, make_response(req, http::status::not_found, "stream transport disabled\n", "text/plain"));
          break;
        }
        const auto hs_in = cs.bytes_in() - in0;
        const auto out0 = cs.bytes_out();
        websocket::stream<net::CountingSocket&> ws(cs);
        ws.set_option(websocket::stream_base::decorator(
            [](websocket::response_type& r) { r.set(http::field::server, kServerName); }));
        ws.read_message_max(kBodyLimit);
        ws.accept(req);
        auto hs_out = cs.bytes_out() - out0;
        for (;;) {
          beast::flat_buffer frame_buf;
          const auto i0 = cs.bytes_in();
          ws.read(frame_buf, ec);
          if (ec) break;
          pr::Frame in_frame{!ws.got_text(), beast::buffers_to_string(frame_buf.data())};
          pr::ServerMessage reply;
          try {
            const auto msg = pr::decode_client(in_frame, codec);
            reply = manager_->handle(Transport::Stream, ws_session, msg);
            if (const auto* w = std::get_if<pr::Welcome>(&reply)) {
              if (ws_session.empty()) {
                manager_->record_bytes(w->session, Transport::Stream, Direction::In, hs_in);
                manager_->record_bytes(w->session, Transport::Stream, Direction::Out, hs_out);
                hs_out = 0;
              }
              ws_session = w->session;
            }
          } catch (const MalformedMessage& e) {
            reply = pr::ErrorReply{std::string("malformed: ") + e.what()};
          }
          const auto i1 = cs.bytes_in();
          const auto o0 = cs.bytes_out();
          const auto out_frame = pr::encode(reply, codec);
          ws.binary(out_frame.compressed);
          ws.write(net::asio::buffer(out_frame.body), ec);
          manager_->record_bytes(ws_session, Transport::Stream, Direction::In, i1 - i0);
          manager_->record_bytes(ws_session, Transport::Stream, Direction::Out, cs.bytes_out() - o0);
          if (ec) break;
        }
        if (!ws_session.empty()) manager_->close_session(ws_session, stopping_ ? "shutdown" : "disconnect");
        ws_session.clear();
        break;
      }

      std::string session = net::query_param(target, "session");
      bool account = false;
      Response res;
      if (req.method() == http::verb::options) {
        res = make_response(req, http::status::no_content, "", "text/plain");
        res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type, Content-Encoding");
        res.set(http::field::access_control_max_age, "86400");
      } else if (req.method() == http::verb::get && path == "/admin/stats") {
        auto j = manager_->stats().to_json();
        j["drained"] = manager_->drained();
        res = make_response(req, http::status::ok, j.dump(), "application/json");
        res.set(http::field::cache_control, "no-store");
      } else if (req.method() == http::verb::get && path.starts_with("/bundle/")) {
        account = true;
        const auto kernel = path.substr(8);
        const auto* bundle = manager_->bundle(kernel, session.empty() ? std::nullopt : std::optional(session));
        if (!bundle) {
          res = make_response(req, http::status::not_found, "unknown kernel\n", "text/plain");
        } else if (req[http::field::if_none_match] == "\"" + bundle->etag + "\"") {
          res = make_response(req, http::status::not_modified, "", "application/javascript");
          res.set(http::field::etag, "\"" + bundle->etag + "\"");
        } else {
          res = make_response(req, http::status::ok, bundle->body, "application/javascript");
          res.set(http::field::etag, "\"" + bundle->etag + "\"");
          res.set(http::field::cache_control, "no-cache");
        }
      } else if (req.method() == http::verb::post && path.starts_with("/api/") && options_.request_response) {
        account = true;
        const auto route = path.substr(5);
        pr::Frame frame{req[http::field::content_encoding] == "deflate", std::move(req.body())};
        try {
          const auto msg = pr::decode_client(frame, codec);
          if (!route_matches(route, msg)) {
            res = message_response(req, http::status::bad_request, pr::ErrorReply{"wrong_endpoint"}, codec);
          } else {
            const auto reply = manager_->handle(Transport::RequestResponse, session, msg);
            if (const auto* w = std::get_if<pr::Welcome>(&reply)) session = w->session;
            res = message_response(req, status_for(reply), reply, codec);
          }
        } catch (const MalformedMessage& e) {
          res = message_response(req, http::status::bad_request, pr::ErrorReply{std::string("malformed: ") + e.what()},
                                 codec);
        }
      } else {
        res = make_response(req, http::status::not_found, "not found\n", "text/plain");
      }

      const auto in1 = cs.bytes_in();
      const auto out0 = cs.bytes_out();
      http::write(cs, res, ec);
      if (account) {
        manager_->record_bytes(session, Transport::RequestResponse, Direction::In, in1 - in0);
        manager_->record_bytes(session, Transport::RequestResponse, Direction::Out, cs.bytes_out() - out0);
      }
      if (ec || !res.keep_alive()) break;
    }
  } catch (const boost::system::system_error&) {
    // peer went away mid-message
    if (!ws_session.empty()) manager_->close_session(ws_session, stopping_ ? "shutdown" : "disconnect");
  } catch (const std::exception& e) {
    if (!ws_session.empty()) manager_->close_session(ws_session, stopping_ ? "shutdown" : "disconnect");
    std::cerr << "connection error: " << e.what() << '\n';
  }

  {
    std::lock_guard lock(mu_);
    live_fds_.erase(fd);
  }
  beast::error_code ignored;
  cs.socket().shutdown(tcp::socket::shutdown_both, ignored);
  cs.socket().close(ignored);
  std::lock_guard lock(mu_);
  --active_;
  cv_.notify_all();
}

}  // namespace webswarm
