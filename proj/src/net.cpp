#include "webswarm/net.hpp"

#include <sys/socket.h>

#include <boost/beast/websocket/teardown.hpp>

#include "webswarm/error.hpp"

namespace webswarm::net {

void teardown(boost::beast::role_type role, CountingSocket& s, boost::beast::error_code& ec) {
  boost::beast::websocket::teardown(role, s.socket(), ec);
}

void hard_shutdown(tcp::socket& s) {
  if (s.is_open()) ::shutdown(s.native_handle(), SHUT_RDWR);
}

Endpoint Endpoint::parse(std::string_view text) {
  for (std::string_view prefix : {"http://", "ws://"}) {
    if (text.starts_with(prefix)) text.remove_prefix(prefix.size());
  }
  if (const auto slash = text.find('/'); slash != std::string_view::npos) text = text.substr(0, slash);
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ConfigError("expected host:port, got '" + std::string(text) + "'");
  Endpoint e;
  e.host = std::string(text.substr(0, colon));
  const auto port_text = std::string(text.substr(colon + 1));
  try {
    std::size_t used = 0;
    const auto port = std::stoul(port_text, &used);
    if (used != port_text.size() || port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + std::string(text) + "'");
  }
  return e;
}

std::string_view target_path(std::string_view target) {
  const auto q = target.find('?');
  return q == std::string_view::npos ? target : target.substr(0, q);
}

std::string query_param(std::string_view target, std::string_view name) {
  const auto q = target.find('?');
  if (q == std::string_view::npos) return {};
  auto rest = target.substr(q + 1);
  while (!rest.empty()) {
    const auto amp = rest.find('&');
    const auto pair = rest.substr(0, amp);
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == name) return eq == std::string_view::npos ? std::string{} : std::string(pair.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 1);
  }
  return {};
}

}  // namespace webswarm::net
