#include <gtest/gtest.h>

#include "webswarm/manager.hpp"
#include "webswarm/random.hpp"

using namespace webswarm;
namespace pr = webswarm::protocol;

namespace {

struct Fixture {
  explicit Fixture(std::size_t n, double idle = 5.0) {
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < n; ++i) {
      Task t;
      t.task_id = "t" + std::to_string(i);
      t.kernel_id = "add";
      t.payload = {{"a", i}, {"b", 1}};
      tasks.push_back(t);
    }
    source = std::make_shared<BuiltinSource>(tasks);
    clock = std::make_shared<ManualClock>();
    ManagerConfig mc;
    mc.idle_timeout_s = idle;
    BundleRegistry bundles;
    bundles.add("add", "const kernel = function (task) { task.result = task.a + task.b; };", "");
    manager = std::make_shared<TaskManager>(mc, source, sink, clock, std::move(bundles));
    manager->poll();
  }
  std::shared_ptr<BuiltinSource> source;
  std::shared_ptr<EventSink> sink = std::make_shared<EventSink>();
  std::shared_ptr<ManualClock> clock;
  std::shared_ptr<TaskManager> manager;
};

std::string hello(TaskManager& m, Transport t = Transport::RequestResponse) {
  return std::get<pr::Welcome>(m.handle(t, "", pr::Hello{})).session;
}

}  // namespace

TEST(Manager, FreshStatsAreZeroExceptQueued) {
  Fixture f(3);
  const auto st = f.manager->stats();
  EXPECT_EQ(st.queued, 3u);
  EXPECT_EQ(st.completed, 0u);
  EXPECT_EQ(st.open_sessions + st.closed_sessions + st.value_sessions + st.non_value_sessions, 0u);
  EXPECT_EQ(st.requests + st.dispatched + st.pushed, 0u);
  EXPECT_EQ(st.request_response.in + st.request_response.out + st.stream.in + st.stream.out, 0u);
  EXPECT_EQ(st.downtime_s, 0.0);
}

TEST(Manager, SingleTaskEndToEnd) {
  Fixture f(1);
  const auto s = hello(*f.manager);
  auto reply = f.manager->handle(Transport::RequestResponse, s, pr::RequestTasks{1});
  const auto& tasks = std::get<pr::Tasks>(reply).tasks;
  ASSERT_EQ(tasks.size(), 1u);
  auto ack = f.manager->handle(Transport::RequestResponse, s, pr::Final{tasks[0].task_id, 1, {{"result", 1}}});
  EXPECT_EQ(std::get<pr::Ack>(ack).status, pr::AckStatus::Accepted);
  EXPECT_TRUE(f.manager->drained());
  EXPECT_EQ(f.manager->stats().completed, 1u);
  EXPECT_TRUE(std::holds_alternative<pr::Drained>(f.manager->handle(Transport::RequestResponse, s, pr::RequestTasks{1})));
  f.manager->close_all("drain");
  const auto st = f.manager->stats();
  EXPECT_EQ(st.value_sessions, 1u);
  EXPECT_EQ(st.pushed, 1u);
  EXPECT_EQ(f.source->results().at("t0")["result"], 1);
}

TEST(Manager, TwoClientsRaceOneTask) {
  Fixture f(1);
  const auto a = hello(*f.manager);
  const auto b = hello(*f.manager, Transport::Stream);
  const auto ta = std::get<pr::Tasks>(f.manager->handle(Transport::RequestResponse, a, pr::RequestTasks{1})).tasks;
  const auto tb = std::get<pr::Tasks>(f.manager->handle(Transport::Stream, b, pr::RequestTasks{1})).tasks;
  ASSERT_EQ(ta.at(0).task_id, tb.at(0).task_id);
  auto ra = f.manager->handle(Transport::Stream, b, pr::Final{"t0", 1, {{"result", 1}}});
  auto rb = f.manager->handle(Transport::RequestResponse, a, pr::Final{"t0", 1, {{"result", 1}}});
  EXPECT_EQ(std::get<pr::Ack>(ra).status, pr::AckStatus::Accepted);
  EXPECT_EQ(std::get<pr::Ack>(rb).status, pr::AckStatus::Duplicate);
  EXPECT_EQ(f.source->push_count(), 1u);
  f.manager->close_all("drain");
  EXPECT_EQ(f.manager->session(b)->tasks_completed, 1u);
  EXPECT_EQ(f.manager->session(a)->tasks_completed, 0u);
}

TEST(Manager, UnknownSessionAndTask) {
  Fixture f(1);
  EXPECT_EQ(std::get<pr::ErrorReply>(f.manager->handle(Transport::RequestResponse, "nope", pr::RequestTasks{1})).reason,
            "unknown_session");
  const auto s = hello(*f.manager);
  EXPECT_EQ(std::get<pr::ErrorReply>(f.manager->handle(Transport::RequestResponse, s, pr::Final{"zz", 1, {}})).reason,
            "unknown_task");
}

TEST(Manager, PartialsMergeAndResume) {
  Fixture f(1);
  const auto s = hello(*f.manager);
  f.manager->handle(Transport::RequestResponse, s, pr::RequestTasks{1});
  auto ack = f.manager->handle(Transport::RequestResponse, s, pr::Partial{"t0", 1, 5, {{"progress", 5}}});
  EXPECT_EQ(std::get<pr::Ack>(ack).status, pr::AckStatus::Applied);
  ack = f.manager->handle(Transport::RequestResponse, s, pr::Partial{"t0", 1, 5, {{"progress", 9}}});
  EXPECT_EQ(std::get<pr::Ack>(ack).status, pr::AckStatus::Stale);
  // The next dispatch carries the merged checkpoint.
  const auto t = std::get<pr::Tasks>(f.manager->handle(Transport::RequestResponse, s, pr::RequestTasks{1})).tasks.at(0);
  EXPECT_EQ(t.payload["progress"], 5);
  EXPECT_EQ(t.checkpoint->progress_units, 5u);
}

TEST(Manager, ReapsIdleRequestResponseSessionsOnly) {
  Fixture f(1, 2.0);
  const auto rr = hello(*f.manager);
  const auto ws = hello(*f.manager, Transport::Stream);
  f.clock->set(1.0);
  EXPECT_EQ(f.manager->reap_idle(), 0u);
  f.clock->set(2.5);
  EXPECT_EQ(f.manager->reap_idle(), 1u);
  EXPECT_FALSE(f.manager->session_open(rr));
  EXPECT_TRUE(f.manager->session_open(ws));
  // A reaped session must say hello again.
  EXPECT_TRUE(std::holds_alternative<pr::ErrorReply>(
      f.manager->handle(Transport::RequestResponse, rr, pr::RequestTasks{1})));
}

TEST(Manager, ProposedIdsAdoptedOnce) {
  Fixture f(1);
  EXPECT_EQ(f.manager->open_session(Transport::Stream, "v7"), "v7");
  EXPECT_EQ(f.manager->open_session(Transport::Stream, "v7"), "v7");
  f.manager->close_session("v7", "disconnect");
  EXPECT_NE(f.manager->open_session(Transport::Stream, "v7"), "v7");
}

TEST(Manager, BundleFetchOnlySessionIsNonValue) {
  Fixture f(1);
  ASSERT_NE(f.manager->bundle("add", std::string("b1")), nullptr);
  EXPECT_EQ(f.manager->bundle("nope", std::string("b2")), nullptr);
  f.manager->close_all("drain");
  const auto st = f.manager->stats();
  EXPECT_EQ(st.non_value_sessions, 2u);
  EXPECT_EQ(st.value_sessions, 0u);
}

TEST(ManagerProperty, ValuePlusNonValueEqualsClosed) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Fixture f(20);
    SplitMix64 rng(seed);
    std::vector<std::string> sessions;
    for (int i = 0; i < 200; ++i) {
      const auto op = rng.next() % 5;
      if (op == 0 || sessions.empty()) {
        sessions.push_back(hello(*f.manager));
        continue;
      }
      const auto& s = sessions[rng.next() % sessions.size()];
      if (op == 1) {
        f.manager->close_session(s, "disconnect");
      } else if (op == 2) {
        f.manager->handle(Transport::RequestResponse, s, pr::RequestTasks{2});
      } else {
        f.manager->handle(Transport::RequestResponse, s,
                          pr::Final{"t" + std::to_string(rng.next() % 20), 1, {{"result", 0}}});
      }
      const auto st = f.manager->stats();
      ASSERT_EQ(st.value_sessions + st.non_value_sessions, st.closed_sessions);
      ASSERT_EQ(st.queued + st.completed, 20u);
      ASSERT_EQ(st.pushed, st.completed);
    }
  }
}
