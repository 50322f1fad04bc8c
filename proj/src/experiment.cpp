#include "webswarm/experiment.hpp"

#include "webswarm/error.hpp"
#include "webswarm/kernels.hpp"
#include "webswarm/realtime.hpp"
#include "webswarm/server.hpp"

namespace webswarm {

RunOutput run_virtual(const ExperimentConfig& config, const std::string& label, const SwarmOptions& options) {
  auto r = run_virtual_swarm(config, options);
  RunOutput out;
  out.summary = metrics::experiment_summary(r.events, config, label);
  out.events = std::move(r.events);
  out.results = std::move(r.results);
  out.drained = r.drained;
  return out;
}

RunOutput run_realtime(const ExperimentConfig& config, const std::string& label,
                       const std::optional<std::filesystem::path>& bundle_dir) {
  auto source = std::make_shared<BuiltinSource>(config);
  auto sink = std::make_shared<EventSink>();
  auto clock = std::make_shared<SteadyClock>();
  ManagerConfig mc;
  mc.overhead = config.overhead;
  mc.codec.threshold = config.compression_threshold;
  mc.idle_timeout_s = config.idle_timeout();
  BundleRegistry bundles;
  if (bundle_dir && std::filesystem::exists(*bundle_dir / "runtime.js")) {
    bundles = BundleRegistry::from_directory(*bundle_dir);
  }
  if (!bundles.find(config.kernel_id)) bundles.add(config.kernel_id, "const kernel = function (task) {};", "");
  auto manager = std::make_shared<TaskManager>(mc, source, sink, clock, std::move(bundles));
  manager->poll();

  HttpServerOptions so;
  so.reap_interval_s = std::min(1.0, mc.idle_timeout_s / 4.0);
  HttpServer server(manager, so);
  server.start();

  RealtimeOptions ro;
  ro.channel.endpoint.port = server.port();
  ro.sink = sink;
  ro.clock = clock;
  ro.drained = [&] { return manager->drained(); };
  run_realtime_swarm(config, ro);
  server.stop();
  manager->poll();
  manager->close_all(manager->drained() ? "drain" : "abort");

  RunOutput out;
  out.events = sink->snapshot();
  out.summary = metrics::experiment_summary(out.events, config, label);
  out.results = source->results();
  out.drained = manager->drained();
  return out;
}

std::optional<double> pi_estimate(const std::map<std::string, Payload>& results) {
  std::vector<mc::MonteCarloTask> tasks;
  for (const auto& [id, payload] : results) {
    if (!id.starts_with("montecarlo-")) return std::nullopt;
    auto t = mc::MonteCarloTask::from_payload(payload);
    if (t.done_iterations != t.iterations) return std::nullopt;
    tasks.push_back(t);
  }
  if (tasks.empty()) return std::nullopt;
  return mc::reduce(tasks);
}

std::vector<std::uint32_t> mandelbrot_grid(const ExperimentConfig& config,
                                           const std::map<std::string, Payload>& results) {
  std::vector<mandel::MandelbrotTask> tasks;
  for (const auto& [id, payload] : results) tasks.push_back(mandel::MandelbrotTask::from_payload(payload));
  return mandel::reduce(config.mandelbrot, tasks);
}

}  // namespace webswarm
