#include <gtest/gtest.h>

#include "webswarm/domain.hpp"
#include "webswarm/error.hpp"
#include "webswarm/events.hpp"

using namespace webswarm;

TEST(Policy, ParseAndDescribe) {
  for (const char* s : {"sync", "batch:5", "async:5:2", "async:10:3", "sync+ckpt:50000000"}) {
    EXPECT_EQ(PolicyConfig::parse(s).describe(), s);
  }
  const auto p = PolicyConfig::parse("sync+ckpt:50e6");
  EXPECT_EQ(*p.checkpoint_every, 50'000'000u);
  EXPECT_EQ(PolicyConfig::parse("async:5:2").prefetch_threshold, 2u);
}

TEST(Policy, InvalidCombinations) {
  EXPECT_THROW(PolicyConfig::parse("async:2:2"), ConfigError);
  EXPECT_THROW(PolicyConfig::parse("batch:0"), ConfigError);
  EXPECT_THROW(PolicyConfig::parse("sync:3"), ConfigError);
  EXPECT_THROW(PolicyConfig::parse("sync+ckpt:0"), ConfigError);
  EXPECT_THROW(PolicyConfig::parse("lottery"), ConfigError);
  EXPECT_THROW(PolicyConfig::parse("sync+chk:5"), ConfigError);
}

TEST(Enums, RoundTrip) {
  for (auto t : {Transport::RequestResponse, Transport::Stream}) EXPECT_EQ(parse_transport(to_string(t)), t);
  EXPECT_EQ(parse_transport("request-response"), Transport::RequestResponse);
  EXPECT_THROW(parse_transport("carrier-pigeon"), ConfigError);
  for (auto k : {DwellKind::Constant, DwellKind::Weibull}) EXPECT_EQ(parse_dwell_kind(to_string(k)), k);
}

TEST(Experiment, DefaultsAreValid) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.units_per_task(), 200'000'000u);
  EXPECT_DOUBLE_EQ(c.expected_task_seconds(), 3.75);
  EXPECT_DOUBLE_EQ(c.idle_timeout(), 7.5);
}

TEST(Experiment, Rejections) {
  ExperimentConfig c;
  c.total_tasks = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.worker_slots = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.kernel_id = "sha256";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.dwell = {DwellKind::Weibull, -1.0, 1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.kernel_id = "mandelbrot";
  c.mandelbrot.width_px = 2;
  c.mandelbrot.height_px = 2;
  c.total_tasks = 5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Experiment, MandelbrotUnitsRoundUp) {
  ExperimentConfig c;
  c.kernel_id = "mandelbrot";
  c.total_tasks = 720;
  EXPECT_EQ(c.units_per_task(), 167u);
}

TEST(Session, ValueMeansAtLeastOneCompletion) {
  SessionRecord s;
  EXPECT_FALSE(s.is_value());
  s.tasks_completed = 1;
  EXPECT_TRUE(s.is_value());
}

TEST(Events, JsonRoundTrip) {
  MetricEvent e;
  e.t = 1.25;
  e.kind = EventKind::Bytes;
  e.session = "v3";
  e.transport = Transport::Stream;
  e.direction = Direction::Out;
  e.count = 77;
  EXPECT_EQ(event_from_json(to_json(e)), e);
  MetricEvent f;
  f.kind = EventKind::FinalReceived;
  f.session = "s1";
  f.task = "A";
  f.detail = "accepted";
  std::stringstream ss;
  write_ndjson(ss, {e, f});
  EXPECT_EQ(read_ndjson(ss), (std::vector<MetricEvent>{e, f}));
}
