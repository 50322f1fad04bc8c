// webswarm command-line front end: serve, simulate, sweep, report.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>

#include <CLI11.hpp>

#include "webswarm/client.hpp"
#include "webswarm/config.hpp"
#include "webswarm/error.hpp"
#include "webswarm/experiment.hpp"
#include "webswarm/kernels.hpp"
#include "webswarm/manager.hpp"
#include "webswarm/server.hpp"

namespace fs = std::filesystem;
using namespace webswarm;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void write_events(const fs::path& p, const std::vector<MetricEvent>& events) {
  auto out = open_out(p);
  write_ndjson(out, events);
}

int serve(const fs::path& path, bool exit_when_drained) {
  auto cfg = config::load_server(path);
  if (auto env = config::listen_from_env()) cfg.listen = *env;
  cfg.validate();

  std::shared_ptr<TaskSource> source;
  if (cfg.source.is_builtin()) {
    source = std::make_shared<BuiltinSource>(cfg.experiment);
  } else {
    source = std::make_shared<HttpTaskSource>(cfg.source);
  }
  auto sink = cfg.event_log ? std::make_shared<EventSink>(cfg.event_log->string()) : std::make_shared<EventSink>();
  ManagerConfig mc;
  mc.overhead = cfg.overhead;
  mc.codec.threshold = cfg.compression_threshold;
  mc.idle_timeout_s = cfg.idle_timeout_s > 0 ? cfg.idle_timeout_s : cfg.experiment.idle_timeout();
  BundleRegistry bundles;
  if (fs::exists(cfg.bundle_dir / "runtime.js")) {
    bundles = BundleRegistry::from_directory(cfg.bundle_dir);
  } else {
    std::cerr << "warning: no bundles in " << cfg.bundle_dir << "\n";
  }
  auto manager = std::make_shared<TaskManager>(mc, source, sink, std::make_shared<SteadyClock>(), std::move(bundles));
  try {
    manager->poll();
  } catch (const SourceUnavailable& e) {
    std::cerr << "warning: " << e.what() << "\n";
  }

  HttpServerOptions so;
  so.listen = cfg.listen;
  so.request_response = cfg.request_response;
  so.stream = cfg.stream;
  so.poll_interval_s = cfg.source.poll_interval;
  so.reap_interval_s = std::clamp(mc.idle_timeout_s / 4.0, 0.05, 1.0);

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  HttpServer server(manager, so);
  server.start();
  std::cout << "listening on " << net::Endpoint::parse(cfg.listen).host << ":" << server.port() << std::endl;

  if (exit_when_drained) {
    timespec tick{0, 100'000'000};
    while (!manager->drained()) {
      if (sigtimedwait(&set, nullptr, &tick) > 0) break;
    }
  } else {
    int sig = 0;
    sigwait(&set, &sig);
  }
  server.stop();
  manager->close_all(manager->drained() ? "drain" : "shutdown");
  sink->flush();
  std::cout << manager->stats().to_json().dump() << std::endl;
  return kOk;
}

void write_run_artifacts(const fs::path& dir, const ExperimentConfig& cfg, const RunOutput& run) {
  write_events(dir / "events.ndjson", run.events);
  if (cfg.execute_kernels) {
    if (auto pi = pi_estimate(run.results)) std::printf("pi_estimate %.8f\n", *pi);
  }
  if (cfg.kernel_id == "mandelbrot" && cfg.execute_kernels && run.drained) {
    mandel::write_pgm(dir / "mandelbrot.pgm", cfg.mandelbrot, mandelbrot_grid(cfg, run.results));
  }
}

int simulate(const fs::path& path, const fs::path& out_dir, std::uint32_t repeats,
             const std::optional<std::string>& transport, const std::optional<std::uint64_t>& seed, bool realtime) {
  auto cfg = config::load_experiment(path);
  if (transport) cfg.transport = parse_transport(*transport);
  if (seed) cfg.rng_seed = *seed;
  cfg.validate();
  fs::create_directories(out_dir);

  std::vector<metrics::Summary> rows;
  for (std::uint32_t r = 0; r < repeats; ++r) {
    auto c = cfg;
    c.rng_seed = cfg.rng_seed + r;
    const auto label = path.stem().string() + "/seed=" + std::to_string(c.rng_seed);
    auto run = realtime ? run_realtime(c, label, fs::path("bundles")) : run_virtual(c, label);
    const auto dir = repeats == 1 ? out_dir : out_dir / ("seed-" + std::to_string(c.rng_seed));
    fs::create_directories(dir);
    write_run_artifacts(dir, c, run);
    std::printf("%s drained=%d runtime_s=%.3f sessions=%zu value=%zu downtime_s=%.3f\n", label.c_str(),
                run.drained ? 1 : 0, run.summary.runtime_s, run.summary.sessions, run.summary.value_sessions,
                run.summary.downtime_s);
    rows.push_back(std::move(run.summary));
  }
  auto all = rows;
  if (repeats > 1) all.push_back(metrics::mean_summary(rows, path.stem().string() + "/mean"));
  {
    auto out = open_out(out_dir / "summary.csv");
    metrics::write_summary_csv(out, all);
  }
  {
    auto out = open_out(out_dir / "histogram.csv");
    metrics::write_histogram_csv(out, all);
  }
  for (const auto& s : rows) {
    if (!s.drained) return kRuntime;
  }
  return kOk;
}

int sweep(const fs::path& path, const fs::path& out_dir) {
  const auto matrix = config::load_matrix(path);
  if (matrix.cells.empty()) {
    std::cout << "empty matrix\n";
    return kOk;
  }
  for (const auto& c : matrix.cells) c.config.validate();
  fs::create_directories(out_dir);

  std::vector<metrics::Summary> runs;
  std::vector<metrics::Summary> means;
  bool all_drained = true;
  for (const auto& cell : matrix.cells) {
    std::vector<metrics::Summary> cell_runs;
    for (std::uint32_t r = 0; r < matrix.repeats; ++r) {
      auto c = cell.config;
      c.rng_seed = cell.config.rng_seed + r;
      auto run = run_virtual(c, cell.name);
      all_drained = all_drained && run.drained;
      cell_runs.push_back(run.summary);
    }
    auto mean = metrics::mean_summary(cell_runs, cell.name);
    std::printf("%-40s runtime_s=%.3f value=%.1f non_value=%.1f downtime_s=%.2f\n", cell.name.c_str(), mean.runtime_s,
                static_cast<double>(mean.value_sessions), static_cast<double>(mean.non_value_sessions),
                mean.downtime_s);
    runs.insert(runs.end(), cell_runs.begin(), cell_runs.end());
    means.push_back(std::move(mean));
  }
  auto summary = open_out(out_dir / "summary.csv");
  metrics::write_summary_csv(summary, means);
  auto runs_out = open_out(out_dir / "runs.csv");
  metrics::write_summary_csv(runs_out, runs);
  auto sessions = open_out(out_dir / "sessions.csv");
  metrics::write_sessions_csv(sessions, runs);
  auto hist = open_out(out_dir / "histogram.csv");
  metrics::write_histogram_csv(hist, runs);
  auto down = open_out(out_dir / "downtime.csv");
  metrics::write_downtime_csv(down, runs);
  return all_drained ? kOk : kRuntime;
}

int report(const fs::path& events_path, const std::optional<fs::path>& config_path,
           const std::optional<fs::path>& out_dir) {
  if (!fs::exists(events_path)) throw ConfigError("no such file: " + events_path.string());
  ExperimentConfig cfg;
  if (config_path) cfg = config::load_experiment(*config_path);
  const auto events = read_ndjson_file(events_path.string());
  auto s = metrics::experiment_summary(events, cfg, events_path.parent_path().filename().string());
  std::vector<metrics::Summary> rows{s};
  if (out_dir) {
    fs::create_directories(*out_dir);
    auto a = open_out(*out_dir / "summary.csv");
    metrics::write_summary_csv(a, rows);
    auto b = open_out(*out_dir / "histogram.csv");
    metrics::write_histogram_csv(b, rows);
    auto c = open_out(*out_dir / "sessions.csv");
    metrics::write_sessions_csv(c, rows);
    auto d = open_out(*out_dir / "downtime.csv");
    metrics::write_downtime_csv(d, rows);
  } else {
    metrics::write_summary_csv(std::cout, rows);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"webswarm: volunteer browser computing orchestrator"};
  app.require_subcommand(1);

  fs::path serve_cfg;
  bool exit_when_drained = false;
  auto* serve_cmd = app.add_subcommand("serve", "run the task manager");
  serve_cmd->add_option("config", serve_cfg, "server config file")->required();
  serve_cmd->add_flag("--exit-when-drained", exit_when_drained, "stop once every task is completed");

  fs::path sim_cfg;
  fs::path sim_out = "out";
  std::uint32_t repeats = 1;
  std::optional<std::string> transport;
  std::optional<std::uint64_t> seed;
  bool realtime = false;
  auto* sim_cmd = app.add_subcommand("simulate", "run one experiment against a synthetic swarm");
  sim_cmd->add_option("config", sim_cfg, "experiment config file")->required();
  sim_cmd->add_option("-o,--out", sim_out, "output directory");
  sim_cmd->add_option("--repeats", repeats, "runs with consecutive seeds")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--transport", transport, "request_response or stream");
  sim_cmd->add_option("--seed", seed, "swarm seed");
  sim_cmd->add_flag("--realtime", realtime, "wall-clock run over loopback sockets");

  fs::path matrix_path;
  fs::path sweep_out = "out";
  auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment matrix");
  sweep_cmd->add_option("matrix", matrix_path, "matrix file")->required();
  sweep_cmd->add_option("-o,--out", sweep_out, "output directory");

  fs::path events_path;
  std::optional<fs::path> report_cfg;
  std::optional<fs::path> report_out;
  auto* report_cmd = app.add_subcommand("report", "summarise an event log");
  report_cmd->add_option("events", events_path, "events.ndjson")->required();
  report_cmd->add_option("--config", report_cfg, "experiment config the log came from");
  report_cmd->add_option("-o,--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*serve_cmd) return serve(serve_cfg, exit_when_drained);
    if (*sim_cmd) return simulate(sim_cfg, sim_out, repeats, transport, seed, realtime);
    if (*sweep_cmd) return sweep(matrix_path, sweep_out);
    if (*report_cmd) return report(events_path, report_cfg, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const BindFailure& e) {
    std::cerr << "bind failed: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
