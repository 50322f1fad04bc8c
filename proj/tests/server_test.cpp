#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "webswarm/client.hpp"
#include "webswarm/error.hpp"
#include "webswarm/manager.hpp"
#include "webswarm/server.hpp"

using namespace webswarm;
namespace pr = webswarm::protocol;

namespace {

class ServerTest : public ::testing::Test {
 protected:
  void start(std::size_t tasks, double idle = 30.0) {
    std::vector<Task> ts;
    for (std::size_t i = 0; i < tasks; ++i) {
      Task t;
      t.task_id = "t" + std::to_string(i);
      t.kernel_id = "add";
      t.payload = {{"a", i}, {"b", 2}};
      ts.push_back(t);
    }
    source = std::make_shared<BuiltinSource>(ts);
    BundleRegistry bundles;
    bundles.add("add", "// adder\nconst kernel = function (task) {\n  task.result = task.a + task.b;\n};\n",
                "const runtime = 1;\n");
    ManagerConfig mc;
    mc.idle_timeout_s = idle;
    manager = std::make_shared<TaskManager>(mc, source, std::make_shared<EventSink>(), std::make_shared<SteadyClock>(),
                                            std::move(bundles));
    manager->poll();
    HttpServerOptions o;
    o.reap_interval_s = 0.05;
    server = std::make_unique<HttpServer>(manager, o);
    server->start();
    options.endpoint.port = server->port();
  }
  void TearDown() override {
    if (server) server->stop();
  }
  httplib::Client http() const { return httplib::Client("127.0.0.1", server->port()); }

  std::shared_ptr<BuiltinSource> source;
  std::shared_ptr<TaskManager> manager;
  std::unique_ptr<HttpServer> server;
  ChannelOptions options;
};

// Runs one client to completion over the given transport.
std::size_t run_client(Transport t, const ChannelOptions& o) {
  auto ch = connect_channel(t, o);
  ch->call(pr::Hello{});
  std::size_t done = 0;
  for (;;) {
    auto reply = ch->call(pr::RequestTasks{1});
    if (std::holds_alternative<pr::Drained>(reply)) return done;
    for (const auto& task : std::get<pr::Tasks>(reply).tasks) {
      Payload p = task.payload;
      p["result"] = p["a"].get<int>() + p["b"].get<int>();
      ch->call(pr::Final{task.task_id, 1, p});
      ++done;
    }
  }
}

}  // namespace

TEST_F(ServerTest, OneTaskSmoke) {
  start(1);
  for (auto t : {Transport::RequestResponse}) EXPECT_EQ(run_client(t, options), 1u);
  EXPECT_TRUE(manager->drained());
  manager->close_all("drain");
  const auto st = manager->stats();
  EXPECT_EQ(st.value_sessions, 1u);
  EXPECT_EQ(source->results().at("t0")["result"], 2);
}

TEST_F(ServerTest, BothTransportsShareTheQueue) {
  start(40);
  std::size_t a = 0, b = 0;
  std::thread ta([&] { a = run_client(Transport::RequestResponse, options); });
  std::thread tb([&] { b = run_client(Transport::Stream, options); });
  ta.join();
  tb.join();
  EXPECT_GE(a + b, 40u);
  EXPECT_TRUE(manager->drained());
  EXPECT_EQ(source->push_count(), 40u);
  const auto st = manager->stats();
  EXPECT_GT(st.request_response.in, 0u);
  EXPECT_GT(st.stream.in, 0u);
}

TEST_F(ServerTest, TwoClientRace) {
  start(1);
  auto rr = connect_channel(Transport::RequestResponse, options);
  auto ws = connect_channel(Transport::Stream, options);
  rr->call(pr::Hello{});
  ws->call(pr::Hello{});
  const auto t1 = std::get<pr::Tasks>(rr->call(pr::RequestTasks{1})).tasks.at(0);
  const auto t2 = std::get<pr::Tasks>(ws->call(pr::RequestTasks{1})).tasks.at(0);
  ASSERT_EQ(t1.task_id, t2.task_id);
  const auto a1 = std::get<pr::Ack>(ws->call(pr::Final{t2.task_id, 1, {{"result", 2}}}));
  const auto a2 = std::get<pr::Ack>(rr->call(pr::Final{t1.task_id, 1, {{"result", 2}}}));
  EXPECT_EQ(a1.status, pr::AckStatus::Accepted);
  EXPECT_EQ(a2.status, pr::AckStatus::Duplicate);
  EXPECT_EQ(source->push_count(), 1u);
}

TEST_F(ServerTest, BundleEndpoint) {
  start(1);
  auto c = http();
  auto r1 = c.Get("/bundle/add?session=b1");
  auto r2 = c.Get("/bundle/add");
  ASSERT_TRUE(r1);
  ASSERT_TRUE(r2);
  EXPECT_EQ(r1->status, 200);
  EXPECT_EQ(r1->body, r2->body);
  EXPECT_NE(r1->body.find("task.result"), std::string::npos);
  EXPECT_EQ(r1->get_header_value("Access-Control-Allow-Origin"), "*");
  const auto etag = r1->get_header_value("ETag");
  ASSERT_FALSE(etag.empty());
  auto r3 = c.Get("/bundle/add", httplib::Headers{{"If-None-Match", etag}});
  EXPECT_EQ(r3->status, 304);
  EXPECT_EQ(c.Get("/bundle/nope")->status, 404);
  EXPECT_TRUE(manager->session_open("b1"));
  EXPECT_THROW(fetch_bundle(options, "nope", "b2"), UnknownKernel);
  EXPECT_EQ(fetch_bundle(options, "add", "b3"), r1->body);
}

TEST_F(ServerTest, HttpErrors) {
  start(1);
  auto c = http();
  const auto hello = pr::encode(pr::ClientMessage{pr::Hello{}});
  auto r = c.Post("/api/tasks", hello.body, "application/json");
  EXPECT_EQ(r->status, 400);
  r = c.Post("/api/hello", "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  const auto req = pr::encode(pr::ClientMessage{pr::RequestTasks{1}});
  r = c.Post("/api/tasks?session=ghost", req.body, "application/json");
  EXPECT_EQ(r->status, 410);
  EXPECT_EQ(c.Get("/no/such/thing")->status, 404);
  auto opt = c.Options("/api/tasks");
  EXPECT_EQ(opt->status, 204);
  EXPECT_FALSE(opt->get_header_value("Access-Control-Allow-Methods").empty());
}

TEST_F(ServerTest, DeflatedRequestBody) {
  start(1);
  auto c = http();
  auto welcome = c.Post("/api/hello", pr::encode(pr::ClientMessage{pr::Hello{}}).body, "application/json");
  const auto session = std::get<pr::Welcome>(pr::decode_server(pr::Frame{false, welcome->body})).session;
  Payload p = {{"result", 2}, {"pad", std::string(20000, 'z')}};
  const auto frame = pr::encode(pr::ClientMessage{pr::Final{"t0", 1, p}});
  ASSERT_TRUE(frame.compressed);
  auto r = c.Post("/api/final?session=" + session, httplib::Headers{{"Content-Encoding", "deflate"}}, frame.body,
                  "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(std::get<pr::Ack>(pr::decode_server(pr::Frame{false, r->body})).status, pr::AckStatus::Accepted);
}

TEST_F(ServerTest, StatsEndpoint) {
  start(3);
  const auto stats = fetch_stats(options.endpoint);
  EXPECT_EQ(stats["queued"], 3);
  EXPECT_EQ(stats["completed"], 0);
  EXPECT_EQ(stats["drained"], false);
}

TEST_F(ServerTest, DisconnectClosesStreamSession) {
  start(2);
  auto ws = connect_channel(Transport::Stream, options);
  ws->call(pr::Hello{Payload::object(), "w1"});
  EXPECT_TRUE(manager->session_open("w1"));
  ws->abort();
  ws.reset();
  for (int i = 0; i < 100 && manager->session_open("w1"); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  EXPECT_FALSE(manager->session_open("w1"));
}

TEST_F(ServerTest, IdleRequestResponseSessionIsReaped) {
  start(2, 0.2);
  auto rr = connect_channel(Transport::RequestResponse, options);
  rr->call(pr::Hello{Payload::object(), "r1"});
  std::this_thread::sleep_for(std::chrono::milliseconds(500));
  EXPECT_FALSE(manager->session_open("r1"));
}

TEST_F(ServerTest, StopDropsConnections) {
  start(2);
  auto ws = connect_channel(Transport::Stream, options);
  ws->call(pr::Hello{});
  server->stop();
  EXPECT_EQ(server->active_connections(), 0u);
  EXPECT_THROW(ws->call(pr::RequestTasks{1}), ServerUnreachable);
  server.reset();
}

TEST(Server, BindFailure) {
  auto m = std::make_shared<TaskManager>(ManagerConfig{}, nullptr, nullptr, nullptr);
  HttpServerOptions o;
  HttpServer a(m, o);
  o.listen = "127.0.0.1:" + std::to_string(a.port());
  EXPECT_THROW(HttpServer(m, o), BindFailure);
}
