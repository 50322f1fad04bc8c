#include "webswarm/kernels.hpp"

#include <algorithm>
#include <fstream>

#include "webswarm/error.hpp"
#include "webswarm/random.hpp"

namespace webswarm {

namespace {

template <class T>
T field(const Payload& p, const char* key) {
  auto it = p.find(key);
  if (it == p.end()) throw KernelFailure(std::string("payload missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw KernelFailure(std::string("payload field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const Payload& p, const char* key, T fallback) {
  return p.contains(key) ? field<T>(p, key) : fallback;
}

}  // namespace

namespace mc {

Payload MonteCarloTask::to_payload() const {
  return {{"iterations", iterations}, {"seed", seed}, {"hits", hits}, {"done_iterations", done_iterations}};
}

MonteCarloTask MonteCarloTask::from_payload(const Payload& p) {
  MonteCarloTask t;
  t.iterations = field<std::uint64_t>(p, "iterations");
  t.seed = field<std::uint64_t>(p, "seed");
  t.hits = field_or<std::uint64_t>(p, "hits", 0);
  t.done_iterations = field_or<std::uint64_t>(p, "done_iterations", 0);
  if (t.done_iterations > t.iterations || t.hits > t.done_iterations) {
    throw KernelFailure("inconsistent Monte Carlo state");
  }
  return t;
}

MonteCarloTask run(MonteCarloTask task, std::uint64_t until) {
  until = std::min(until, task.iterations);
  auto i = task.done_iterations;
  while (i < until) {
    const auto chunk = i / kChunkIterations;
    const auto chunk_end = std::min(until, (chunk + 1) * kChunkIterations);
    SplitMix64 rng(derive_seed(task.seed, chunk));
    rng.discard(2 * (i - chunk * kChunkIterations));
    std::uint64_t hits = 0;
    for (; i < chunk_end; ++i) {
      const double x = rng.uniform();
      const double y = rng.uniform();
      hits += is_hit(x, y) ? 1 : 0;
    }
    task.hits += hits;
  }
  task.done_iterations = std::max(task.done_iterations, until);
  return task;
}

double reduce(std::span<const MonteCarloTask> results) {
  std::uint64_t hits = 0;
  std::uint64_t iterations = 0;
  for (const auto& r : results) {
    hits += r.hits;
    iterations += r.iterations;
  }
  if (iterations == 0) throw Error("cannot reduce zero iterations");
  return 4.0 * static_cast<double>(hits) / static_cast<double>(iterations);
}

}  // namespace mc

namespace mandel {

Payload MandelbrotTask::to_payload() const {
  Payload p = {{"x0", grid.x0},
               {"y0", grid.y0},
               {"pixel_step", grid.pixel_step},
               {"width_px", grid.width_px},
               {"height_px", grid.height_px},
               {"max_iter", grid.max_iter},
               {"first_pixel", first_pixel},
               {"pixel_count", pixel_count},
               {"done_pixels", done_pixels}};
  if (!counts.empty()) p["counts"] = counts;
  return p;
}

MandelbrotTask MandelbrotTask::from_payload(const Payload& p) {
  MandelbrotTask t;
  t.grid.x0 = field<double>(p, "x0");
  t.grid.y0 = field<double>(p, "y0");
  t.grid.pixel_step = field<double>(p, "pixel_step");
  t.grid.width_px = field<std::uint32_t>(p, "width_px");
  t.grid.height_px = field_or<std::uint32_t>(p, "height_px", 0);
  t.grid.max_iter = field<std::uint32_t>(p, "max_iter");
  t.first_pixel = field<std::uint64_t>(p, "first_pixel");
  t.pixel_count = field<std::uint64_t>(p, "pixel_count");
  t.done_pixels = field_or<std::uint64_t>(p, "done_pixels", 0);
  t.counts = field_or<std::vector<std::uint32_t>>(p, "counts", {});
  if (t.grid.width_px == 0 || t.done_pixels > t.pixel_count || t.counts.size() != t.done_pixels) {
    throw KernelFailure("inconsistent Mandelbrot state");
  }
  return t;
}

std::uint32_t escape_count(double cr, double ci, std::uint32_t max_iter) {
  double zr = 0.0;
  double zi = 0.0;
  for (std::uint32_t n = 1; n <= max_iter; ++n) {
    const double r2 = zr * zr - zi * zi + cr;
    zi = 2.0 * zr * zi + ci;
    zr = r2;
    if (zr * zr + zi * zi > 4.0) return n;
  }
  return max_iter;
}

namespace {

std::uint32_t pixel_count_at(const MandelbrotGrid& g, std::uint64_t index) {
  const auto px = index % g.width_px;
  const auto py = index / g.width_px;
  const double cr = g.x0 + static_cast<double>(px) * g.pixel_step;
  const double ci = g.y0 + static_cast<double>(py) * g.pixel_step;
  return escape_count(cr, ci, g.max_iter);
}

}  // namespace

MandelbrotTask run(MandelbrotTask task, std::uint64_t until) {
  until = std::min(until, task.pixel_count);
  task.counts.reserve(until);
  for (auto i = task.done_pixels; i < until; ++i) {
    task.counts.push_back(pixel_count_at(task.grid, task.first_pixel + i));
  }
  task.done_pixels = std::max(task.done_pixels, until);
  return task;
}

std::vector<std::uint32_t> render(const MandelbrotGrid& grid) {
  const auto total = std::uint64_t{grid.width_px} * grid.height_px;
  std::vector<std::uint32_t> out(total);
  for (std::uint64_t i = 0; i < total; ++i) out[i] = pixel_count_at(grid, i);
  return out;
}

std::vector<std::uint32_t> reduce(const MandelbrotGrid& grid, std::span<const MandelbrotTask> results) {
  const auto total = std::uint64_t{grid.width_px} * grid.height_px;
  std::vector<std::uint32_t> out(total, 0);
  std::vector<bool> seen(total, false);
  std::uint64_t filled = 0;
  for (const auto& r : results) {
    if (r.done_pixels != r.pixel_count || r.counts.size() != r.pixel_count) {
      throw Error("incomplete Mandelbrot task in reduce");
    }
    if (r.first_pixel + r.pixel_count > total) throw Error("Mandelbrot task outside the grid");
    for (std::uint64_t i = 0; i < r.pixel_count; ++i) {
      const auto at = r.first_pixel + i;
      if (seen[at]) throw Error("Mandelbrot tasks overlap");
      seen[at] = true;
      out[at] = r.counts[i];
      ++filled;
    }
  }
  if (filled != total) throw Error("Mandelbrot tasks do not cover the grid");
  return out;
}

void write_pgm(const std::filesystem::path& path, const MandelbrotGrid& grid,
               std::span<const std::uint32_t> counts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << grid.width_px << ' ' << grid.height_px << "\n255\n";
  for (auto c : counts) {
    const auto shade = static_cast<unsigned char>(255 - (255ULL * c) / grid.max_iter);
    out.put(static_cast<char>(shade));
  }
}

}  // namespace mandel

namespace {

class MonteCarloKernel final : public Kernel {
 public:
  std::string_view id() const override { return "montecarlo"; }
  std::uint64_t total_units(const Payload& p) const override { return field<std::uint64_t>(p, "iterations"); }
  std::uint64_t done_units(const Payload& p) const override {
    return field_or<std::uint64_t>(p, "done_iterations", 0);
  }
  void run(Payload& p, std::uint64_t until) const override {
    p = mc::run(mc::MonteCarloTask::from_payload(p), until).to_payload();
  }
  void mark_done(Payload& p, std::uint64_t until) const override {
    p["done_iterations"] = std::min(until, total_units(p));
  }
};

class MandelbrotKernel final : public Kernel {
 public:
  std::string_view id() const override { return "mandelbrot"; }
  std::uint64_t total_units(const Payload& p) const override { return field<std::uint64_t>(p, "pixel_count"); }
  std::uint64_t done_units(const Payload& p) const override {
    return field_or<std::uint64_t>(p, "done_pixels", 0);
  }
  void run(Payload& p, std::uint64_t until) const override {
    p = mandel::run(mandel::MandelbrotTask::from_payload(p), until).to_payload();
  }
  void mark_done(Payload& p, std::uint64_t until) const override {
    p["done_pixels"] = std::min(until, total_units(p));
  }
};

// Mirrors the browser kernel: task.result = task.a + task.b.
class AddKernel final : public Kernel {
 public:
  std::string_view id() const override { return "add"; }
  std::uint64_t total_units(const Payload&) const override { return 1; }
  std::uint64_t done_units(const Payload& p) const override { return p.contains("result") ? 1 : 0; }
  void run(Payload& p, std::uint64_t until) const override {
    if (until == 0 || p.contains("result")) return;
    const auto& a = p.at("a");
    const auto& b = p.at("b");
    if (!a.is_number() || !b.is_number()) throw KernelFailure("add kernel needs numeric a and b");
    if (a.is_number_integer() && b.is_number_integer()) {
      p["result"] = a.get<std::int64_t>() + b.get<std::int64_t>();
    } else {
      p["result"] = a.get<double>() + b.get<double>();
    }
  }
  void mark_done(Payload& p, std::uint64_t until) const override {
    if (until > 0) p["result"] = nullptr;
  }
};

}  // namespace

KernelRegistry KernelRegistry::builtin() {
  KernelRegistry r;
  r.add(std::make_shared<MonteCarloKernel>());
  r.add(std::make_shared<MandelbrotKernel>());
  r.add(std::make_shared<AddKernel>());
  return r;
}

void KernelRegistry::add(std::shared_ptr<const Kernel> kernel) {
  auto id = std::string(kernel->id());
  kernels_[id] = std::move(kernel);
}

const Kernel& KernelRegistry::get(std::string_view id) const {
  auto it = kernels_.find(id);
  if (it == kernels_.end()) throw UnknownKernel(std::string(id));
  return *it->second;
}

bool KernelRegistry::contains(std::string_view id) const { return kernels_.find(id) != kernels_.end(); }

std::vector<std::pair<std::uint64_t, std::uint64_t>> balanced_ranges(std::uint64_t total, std::uint64_t parts) {
  if (parts == 0 || parts > total) throw Error("cannot split " + std::to_string(total) + " units into " +
                                               std::to_string(parts) + " parts");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  out.reserve(parts);
  const auto base = total / parts;
  const auto extra = total % parts;
  std::uint64_t at = 0;
  for (std::uint64_t i = 0; i < parts; ++i) {
    const auto len = base + (i < extra ? 1 : 0);
    out.emplace_back(at, len);
    at += len;
  }
  return out;
}

std::vector<Task> split(const ExperimentConfig& config) {
  std::vector<Task> tasks;
  tasks.reserve(config.total_tasks);
  auto make = [&](std::uint64_t index, Payload payload) {
    Task t;
    t.task_id = config.kernel_id + "-" + std::to_string(index);
    t.kernel_id = config.kernel_id;
    t.payload = std::move(payload);
    tasks.push_back(std::move(t));
  };
  if (config.kernel_id == "montecarlo") {
    for (std::uint64_t i = 0; i < config.total_tasks; ++i) {
      mc::MonteCarloTask t;
      t.iterations = config.task_size;
      t.seed = config.kernel_seed + i;
      make(i, t.to_payload());
    }
  } else if (config.kernel_id == "mandelbrot") {
    const auto& g = config.mandelbrot;
    const auto ranges = balanced_ranges(std::uint64_t{g.width_px} * g.height_px, config.total_tasks);
    for (std::uint64_t i = 0; i < ranges.size(); ++i) {
      mandel::MandelbrotTask t;
      t.grid = g;
      t.first_pixel = ranges[i].first;
      t.pixel_count = ranges[i].second;
      make(i, t.to_payload());
    }
  } else if (config.kernel_id == "add") {
    for (std::uint64_t i = 0; i < config.total_tasks; ++i) {
      make(i, Payload{{"a", i}, {"b", 2 * i}});
    }
  } else {
    throw UnknownKernel(config.kernel_id);
  }
  return tasks;
}

}  // namespace webswarm
