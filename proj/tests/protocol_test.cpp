#include <gtest/gtest.h>

#include "webswarm/error.hpp"
#include "webswarm/kernels.hpp"
#include "webswarm/protocol.hpp"
#include "webswarm/random.hpp"

using namespace webswarm;
namespace pr = webswarm::protocol;

namespace {

Task sample_task() {
  Task t;
  t.task_id = "montecarlo-7";
  t.kernel_id = "montecarlo";
  t.payload = {{"iterations", 1000}, {"seed", 8}};
  t.checkpoint = CheckpointRecord{2, {{"hits", 5}}, 400};
  return t;
}

// A Mandelbrot task result of roughly 100 KB of JSON.
pr::Final mandelbrot_final() {
  MandelbrotGrid g;
  mandel::MandelbrotTask t;
  t.grid = g;
  t.first_pixel = 0;
  t.pixel_count = 50000;
  t = mandel::run(t);
  return pr::Final{"mandelbrot-0", 1, t.to_payload()};
}

}  // namespace

TEST(Protocol, RequestTasksRoundTrip) {
  const auto f = pr::encode(pr::ClientMessage{pr::RequestTasks{1}});
  EXPECT_FALSE(f.compressed);
  const auto m = pr::decode_client(f);
  ASSERT_TRUE(std::holds_alternative<pr::RequestTasks>(m));
  EXPECT_EQ(std::get<pr::RequestTasks>(m).count, 1u);
}

TEST(Protocol, FinalRoundTrip) {
  const pr::Final f{"A", 3, {{"sum", 5}, {"nested", {{"x", 1.5}}}}};
  const auto m = pr::decode_client(pr::encode(pr::ClientMessage{f}));
  EXPECT_EQ(std::get<pr::Final>(m), f);
}

TEST(Protocol, EveryVariantRoundTrips) {
  std::vector<pr::ClientMessage> client = {
      pr::Hello{{{"agent", "test"}}, "v1"}, pr::Hello{}, pr::RequestTasks{9},
      pr::Partial{"A", 2, 50, {{"hits", 1}}}, pr::Final{"A", 3, {{"hits", 2}}}};
  for (const auto& m : client) EXPECT_EQ(pr::decode_client(pr::encode(m)), m);

  std::vector<pr::ServerMessage> server = {pr::Welcome{"s1"}, pr::Tasks{{sample_task()}}, pr::Tasks{},
                                           pr::Ack{"A", pr::AckStatus::Duplicate}, pr::Drained{},
                                           pr::ErrorReply{"unknown_session"}};
  for (const auto& m : server) EXPECT_EQ(pr::decode_server(pr::encode(m)), m);
}

TEST(Protocol, CanonicalEncodingIsStable) {
  // Re-encoding a decoded body reproduces it byte for byte.
  const pr::Frame f{false, R"({"payload":{"b":1,"a":2},"sequence":1,"task_id":"A","type":"final"})"};
  const auto again = pr::encode(pr::decode_client(f));
  EXPECT_EQ(pr::encode(pr::decode_client(again)), again);
  EXPECT_EQ(again.body.find(' '), std::string::npos);
  EXPECT_LT(again.body.find("\"a\""), again.body.find("\"b\""));
}

TEST(ProtocolProperty, RandomMessagesRoundTrip) {
  SplitMix64 rng(7);
  for (int i = 0; i < 500; ++i) {
    Payload p = Payload::object();
    const auto keys = rng.next() % 6;
    for (std::uint64_t k = 0; k < keys; ++k) {
      const auto key = "k" + std::to_string(rng.next() % 100);
      switch (rng.next() % 3) {
        case 0: p[key] = rng.next(); break;
        case 1: p[key] = std::string(rng.next() % 40, static_cast<char>('a' + rng.next() % 26)); break;
        default: p[key] = std::vector<std::uint64_t>(rng.next() % 50, rng.next() % 1000); break;
      }
    }
    const pr::ClientMessage m = pr::Partial{"t" + std::to_string(i), rng.next() % 100 + 1, rng.next() % 1000, p};
    pr::CodecOptions opts;
    opts.threshold = rng.next() % 400;
    const auto f = pr::encode(m, opts);
    EXPECT_EQ(pr::decode_client(f, opts), m);
    EXPECT_EQ(pr::encode(pr::decode_client(f, opts), opts), f);
  }
}

TEST(Protocol, LargeMandelbrotPayloadCompresses) {
  const pr::ClientMessage m = mandelbrot_final();
  pr::CodecOptions off;
  off.compression = false;
  const auto raw = pr::encode(m, off);
  ASSERT_GT(raw.body.size(), 80'000u);
  const auto packed = pr::encode(m);
  EXPECT_TRUE(packed.compressed);
  EXPECT_LT(packed.body.size(), raw.body.size());
  EXPECT_EQ(pr::decode_client(packed), m);
}

TEST(Protocol, SmallBodiesStayUncompressed) {
  EXPECT_FALSE(pr::encode(pr::ClientMessage{pr::Final{"A", 1, {{"sum", 5}}}}).compressed);
}

TEST(Protocol, MalformedInputs) {
  const auto good = pr::encode(pr::ClientMessage{pr::Final{"A", 1, {{"sum", 5}}}});
  pr::Frame truncated{false, good.body.substr(0, good.body.size() / 2)};
  EXPECT_THROW(pr::decode_client(truncated), MalformedMessage);
  EXPECT_THROW(pr::decode_client(pr::Frame{false, R"({"type":"launch_missiles"})"}), MalformedMessage);
  EXPECT_THROW(pr::decode_client(pr::Frame{false, R"({"type":"final"})"}), MalformedMessage);
  EXPECT_THROW(pr::decode_client(pr::Frame{false, "[]"}), MalformedMessage);
  EXPECT_THROW(pr::decode_client(pr::Frame{true, "not zlib"}), MalformedMessage);
  EXPECT_THROW(pr::decode_server(pr::Frame{false, R"({"type":"hello"})"}), MalformedMessage);
}

TEST(Protocol, InflateRespectsLimit) {
  const std::string big(1 << 20, 'x');
  const auto packed = pr::deflate(big, 6);
  EXPECT_EQ(pr::inflate(packed, 2 << 20), big);
  EXPECT_THROW(pr::inflate(packed, 1000), MalformedMessage);
}

TEST(WireCost, EmptyStreamFrameIsFrameOverhead) {
  const WireOverhead o;
  EXPECT_EQ(pr::wire_cost(pr::Frame{}, Transport::Stream, o), o.stream_frame);
  EXPECT_EQ(pr::wire_cost(pr::Frame{}, Transport::RequestResponse, o), o.request_response_exchange / 2);
}

// With default constants the stream is cheaper whenever the body is the same:
// the per-message difference is 350 - 6 bytes regardless of body size.
TEST(WireCost, StreamCheaperThanRequestResponse) {
  const WireOverhead o;
  for (std::size_t n : {0, 1, 10, 100, 343, 344, 1000, 100000}) {
    const pr::Frame f{false, std::string(n, 'x')};
    EXPECT_LT(pr::wire_cost(f, Transport::Stream, o), pr::wire_cost(f, Transport::RequestResponse, o));
    EXPECT_EQ(pr::wire_cost(f, Transport::RequestResponse, o) - pr::wire_cost(f, Transport::Stream, o),
              o.request_response_exchange / 2 - o.stream_frame);
  }
}

TEST(WireCostProperty, MonotoneInBodySize) {
  SplitMix64 rng(3);
  for (auto t : {Transport::RequestResponse, Transport::Stream}) {
    for (int i = 0; i < 1000; ++i) {
      const auto a = rng.next() % 100000;
      const auto b = a + rng.next() % 1000;
      EXPECT_LE(pr::wire_cost(pr::Frame{false, std::string(a, 'x')}, t),
                pr::wire_cost(pr::Frame{false, std::string(b, 'x')}, t));
    }
  }
}

TEST(WireCost, CustomOverheadAdoptedAsConfigured) {
  const WireOverhead o{1000, 10};
  const pr::Frame f{false, std::string(50, 'x')};
  EXPECT_EQ(pr::wire_cost(f, Transport::RequestResponse, o), 550u);
  EXPECT_EQ(pr::wire_cost(f, Transport::Stream, o), 60u);
}
