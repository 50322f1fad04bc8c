#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "webswarm/error.hpp"
#include "webswarm/kernels.hpp"
#include "webswarm/random.hpp"

using namespace webswarm;

namespace {

// Test-side sequential oracle for the escape-time grid.
std::vector<std::uint32_t> oracle_grid(const MandelbrotGrid& g) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t py = 0; py < g.height_px; ++py) {
    for (std::uint32_t px = 0; px < g.width_px; ++px) {
      const double cr = g.x0 + px * g.pixel_step;
      const double ci = g.y0 + py * g.pixel_step;
      double zr = 0, zi = 0;
      std::uint32_t n = 1;
      for (; n <= g.max_iter; ++n) {
        const double t = zr * zr - zi * zi + cr;
        zi = 2.0 * zr * zi + ci;
        zr = t;
        if (zr * zr + zi * zi > 4.0) break;
      }
      out.push_back(std::min(n, g.max_iter));
    }
  }
  return out;
}

std::vector<mandel::MandelbrotTask> split_grid(const MandelbrotGrid& g, std::uint64_t parts) {
  ExperimentConfig c;
  c.kernel_id = "mandelbrot";
  c.total_tasks = parts;
  c.mandelbrot = g;
  std::vector<mandel::MandelbrotTask> out;
  for (const auto& t : split(c)) out.push_back(mandel::MandelbrotTask::from_payload(t.payload));
  return out;
}

}  // namespace

TEST(MonteCarlo, HitGeometry) {
  EXPECT_TRUE(mc::is_hit(0.5, 0.5));
  EXPECT_FALSE(mc::is_hit(0.9, 0.9));
  EXPECT_TRUE(mc::is_hit(1.0, 0.0));
}

// Values pinned from an independent sequential run of the generator
// (two uniforms per point, x then y, one stream per million points).
TEST(MonteCarlo, SeededRegressionValues) {
  mc::MonteCarloTask t{1'000'000, 1, 0, 0};
  EXPECT_EQ(mc::run(t).hits, 785667u);
  t.seed = 42;
  EXPECT_EQ(mc::run(t).hits, 785464u);
}

TEST(MonteCarlo, ReduceDegenerateCases) {
  std::vector<mc::MonteCarloTask> all{{100, 1, 100, 100}};
  EXPECT_DOUBLE_EQ(mc::reduce(all), 4.0);
  std::vector<mc::MonteCarloTask> none{{100, 1, 0, 100}};
  EXPECT_DOUBLE_EQ(mc::reduce(none), 0.0);
  EXPECT_THROW(mc::reduce({}), Error);
}

TEST(MonteCarlo, ResumeFromAnyPointMatchesSingleShot) {
  const mc::MonteCarloTask fresh{2'500'000, 9, 0, 0};
  const auto whole = mc::run(fresh);
  for (std::uint64_t cut : {1ull, 999'999ull, 1'000'000ull, 1'500'000ull, 2'499'999ull}) {
    auto part = mc::run(fresh, cut);
    EXPECT_EQ(part.done_iterations, cut);
    auto resumed = mc::MonteCarloTask::from_payload(part.to_payload());
    EXPECT_EQ(mc::run(resumed), whole) << cut;
  }
}

TEST(MonteCarlo, ResumeOneFiftyOfTwoHundred) {
  // Scaled-down 150M-of-200M resume: 150k of 200k.
  const mc::MonteCarloTask fresh{200'000, 3, 0, 0};
  const auto part = mc::run(fresh, 150'000);
  const auto resumed = mc::run(part);
  EXPECT_EQ(resumed.done_iterations - part.done_iterations, 50'000u);
  EXPECT_EQ(resumed, mc::run(fresh));
}

TEST(MonteCarlo, RejectsInconsistentPayload) {
  EXPECT_THROW(mc::MonteCarloTask::from_payload({{"iterations", 10}, {"seed", 1}, {"done_iterations", 11}}),
               KernelFailure);
  EXPECT_THROW(mc::MonteCarloTask::from_payload({{"seed", 1}}), KernelFailure);
}

TEST(Mandelbrot, EscapeCounts) {
  EXPECT_EQ(mandel::escape_count(0.0, 0.0, 1000), 1000u);
  // z: 0, 1, 2, 5 -> |5| > 2 at the third step
  EXPECT_EQ(mandel::escape_count(1.0, 0.0, 1000), 3u);
  EXPECT_EQ(mandel::escape_count(-1.0, 0.0, 50), 50u);
  EXPECT_EQ(mandel::escape_count(3.0, 0.0, 50), 1u);
}

TEST(Mandelbrot, RenderMatchesOracle) {
  MandelbrotGrid g;
  g.width_px = 40;
  g.height_px = 30;
  g.pixel_step = 0.0875;
  EXPECT_EQ(mandel::render(g), oracle_grid(g));
}

TEST(Mandelbrot, FullGridVia720TasksIsBitExact) {
  const MandelbrotGrid g;  // 400 x 300
  const auto tasks = split_grid(g, 720);
  ASSERT_EQ(tasks.size(), 720u);
  std::vector<mandel::MandelbrotTask> done;
  for (const auto& t : tasks) done.push_back(mandel::run(t));
  EXPECT_EQ(mandel::reduce(g, done), oracle_grid(g));
}

// 300 rows do not divide into 720 tasks; the bands must still tile the grid.
TEST(Mandelbrot, SplitTilesExactlyOnce) {
  const MandelbrotGrid g;
  for (std::uint64_t parts : {1, 2, 7, 30, 300, 720, 1000}) {
    const auto tasks = split_grid(g, parts);
    ASSERT_EQ(tasks.size(), parts);
    std::uint64_t at = 0;
    for (const auto& t : tasks) {
      EXPECT_EQ(t.first_pixel, at);
      EXPECT_GT(t.pixel_count, 0u);
      EXPECT_GE(tasks.front().pixel_count, t.pixel_count);
      at += t.pixel_count;
    }
    EXPECT_EQ(at, std::uint64_t{g.width_px} * g.height_px);
  }
}

TEST(Mandelbrot, SingleTaskIsWholeProblem) {
  const MandelbrotGrid g;
  const auto tasks = split_grid(g, 1);
  EXPECT_EQ(tasks[0].first_pixel, 0u);
  EXPECT_EQ(tasks[0].pixel_count, 120000u);
}

TEST(Mandelbrot, ReduceRejectsGapsAndOverlaps) {
  MandelbrotGrid g;
  g.width_px = 10;
  g.height_px = 2;
  auto tasks = split_grid(g, 2);
  std::vector<mandel::MandelbrotTask> done{mandel::run(tasks[0])};
  EXPECT_THROW(mandel::reduce(g, done), Error);
  done.push_back(mandel::run(tasks[0]));
  EXPECT_THROW(mandel::reduce(g, done), Error);
  done.back() = mandel::run(tasks[1], 3);  // incomplete
  EXPECT_THROW(mandel::reduce(g, done), Error);
}

TEST(Mandelbrot, WritesPgm) {
  MandelbrotGrid g;
  g.width_px = 8;
  g.height_px = 4;
  const auto path = std::filesystem::temp_directory_path() / "webswarm_kernels_test.pgm";
  mandel::write_pgm(path, g, mandel::render(g));
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  in >> magic;
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(std::filesystem::file_size(path), std::string("P5\n8 4\n255\n").size() + 32);
}

TEST(Kernels, AddKernel) {
  const auto reg = KernelRegistry::builtin();
  const auto& k = reg.get("add");
  Payload p = {{"a", 2}, {"b", 3}};
  k.run(p, 1);
  EXPECT_EQ(p["result"], 5);
  Payload bad = {{"a", "x"}, {"b", 3}};
  EXPECT_THROW(k.run(bad, 1), KernelFailure);
  EXPECT_THROW(reg.get("nope"), UnknownKernel);
}

TEST(Kernels, MonteCarloSplitUsesConsecutiveSeeds) {
  ExperimentConfig c;
  c.total_tasks = 3;
  c.task_size = 10;
  c.kernel_seed = 5;
  const auto tasks = split(c);
  ASSERT_EQ(tasks.size(), 3u);
  EXPECT_EQ(tasks[2].task_id, "montecarlo-2");
  EXPECT_EQ(tasks[2].payload["seed"], 7);
  EXPECT_EQ(tasks[2].payload["iterations"], 10);
}

TEST(Kernels, BalancedRanges) {
  const auto r = balanced_ranges(10, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0], (std::pair<std::uint64_t, std::uint64_t>{0, 4}));
  EXPECT_EQ(r[1], (std::pair<std::uint64_t, std::uint64_t>{4, 3}));
  EXPECT_EQ(r[2], (std::pair<std::uint64_t, std::uint64_t>{7, 3}));
  EXPECT_THROW(balanced_ranges(2, 3), Error);
}
