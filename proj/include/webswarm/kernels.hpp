#pragma once

// Benchmark kernels: Monte Carlo pi and Mandelbrot escape counts, plus the
// two-number adder used for smoke tests. Each kernel keeps its whole
// resumable state in the task payload, so a checkpoint fully determines the
// remaining work.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "webswarm/domain.hpp"

namespace webswarm {

class Kernel {
 public:
  virtual ~Kernel() = default;

  virtual std::string_view id() const = 0;
  virtual std::uint64_t total_units(const Payload& payload) const = 0;
  virtual std::uint64_t done_units(const Payload& payload) const = 0;

  /// Advances the payload state from done_units() to `until` (clamped to
  /// total_units()). Throws KernelFailure on a payload it cannot interpret.
  virtual void run(Payload& payload, std::uint64_t until) const = 0;

  /// Records progress without computing anything; used when compute is
  /// simulated rather than executed.
  virtual void mark_done(Payload& payload, std::uint64_t until) const = 0;
};

class KernelRegistry {
 public:
  /// Registry holding the three built-in kernels.
  static KernelRegistry builtin();

  void add(std::shared_ptr<const Kernel> kernel);
  const Kernel& get(std::string_view id) const;  // throws UnknownKernel
  bool contains(std::string_view id) const;

 private:
  std::map<std::string, std::shared_ptr<const Kernel>, std::less<>> kernels_;
};

namespace mc {

/// Iterations drawn from one reseeded generator stream. A checkpoint at any
/// iteration resumes by reseeding the enclosing chunk and skipping ahead.
inline constexpr std::uint64_t kChunkIterations = 1'000'000;

struct MonteCarloTask {
  std::uint64_t iterations = 0;
  std::uint64_t seed = 0;
  std::uint64_t hits = 0;
  std::uint64_t done_iterations = 0;

  Payload to_payload() const;
  static MonteCarloTask from_payload(const Payload& p);
  bool operator==(const MonteCarloTask&) const = default;
};

inline bool is_hit(double x, double y) { return x * x + y * y <= 1.0; }

/// Runs iterations [done_iterations, until) and returns the updated state.
MonteCarloTask run(MonteCarloTask task, std::uint64_t until);
inline MonteCarloTask run(MonteCarloTask task) { return run(task, task.iterations); }

double reduce(std::span<const MonteCarloTask> results);

}  // namespace mc

namespace mandel {

/// One contiguous run of pixels, in row-major order, of the global grid.
struct MandelbrotTask {
  MandelbrotGrid grid;  // global geometry; height_px is informational
  std::uint64_t first_pixel = 0;
  std::uint64_t pixel_count = 0;
  std::vector<std::uint32_t> counts;
  std::uint64_t done_pixels = 0;

  Payload to_payload() const;
  static MandelbrotTask from_payload(const Payload& p);
  bool operator==(const MandelbrotTask&) const = default;
};

/// First n <= max_iter with |z_n| > 2 under z <- z^2 + c from z = 0,
/// otherwise max_iter.
std::uint32_t escape_count(double cr, double ci, std::uint32_t max_iter);

MandelbrotTask run(MandelbrotTask task, std::uint64_t until);
inline MandelbrotTask run(MandelbrotTask task) {
  const auto until = task.pixel_count;
  return run(std::move(task), until);
}

/// Sequential single-shot grid, row-major.
std::vector<std::uint32_t> render(const MandelbrotGrid& grid);

/// Assembles task outputs into a grid. Throws Error when the tasks do not
/// tile the grid exactly once or are incomplete.
std::vector<std::uint32_t> reduce(const MandelbrotGrid& grid, std::span<const MandelbrotTask> results);

/// Binary graymap (P5). Escape counts are scaled into 0..255.
void write_pgm(const std::filesystem::path& path, const MandelbrotGrid& grid,
               std::span<const std::uint32_t> counts);

}  // namespace mandel

/// Contiguous balanced ranges: the first (total % parts) ranges get one extra
/// unit, so later ranges are never larger than earlier ones.
std::vector<std::pair<std::uint64_t, std::uint64_t>> balanced_ranges(std::uint64_t total, std::uint64_t parts);

/// Builds the task set for an experiment. Monte Carlo: total_tasks tasks of
/// task_size iterations with seeds kernel_seed + index. Mandelbrot: the grid
/// split into total_tasks pixel runs (whole rows whenever the row count
/// divides evenly). Add: {a: i, b: 2i}.
std::vector<Task> split(const ExperimentConfig& config);

}  // namespace webswarm
