#include "webswarm/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "webswarm/error.hpp"
#include "webswarm/swarm_sim.hpp"

namespace webswarm::config {

namespace {

namespace pt = boost::property_tree;

KeyValues flatten(const pt::ptree& tree) {
  KeyValues kv;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      kv[name] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) kv[name + "." + key] = leaf.data();
  }
  return kv;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  std::erase(t, '_');
  char* end = nullptr;
  const double d = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(d)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != std::floor(d) || d > 1.8e19) throw ConfigError(key + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

template <class F>
auto parse_enum(const std::string& key, const std::string& v, F f) {
  try {
    return f(trim(v));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

const std::set<std::string>& experiment_keys() {
  static const std::set<std::string> keys = {
      "experiment.kernel",          "experiment.total_tasks",      "experiment.task_size",
      "experiment.total_work",      "experiment.worker_slots",     "experiment.transport",
      "experiment.policy",          "experiment.rng_seed",         "experiment.kernel_seed",
      "experiment.compute_scale",   "experiment.execute_kernels",  "experiment.compression_threshold",
      "experiment.session_idle_timeout", "experiment.respawn_delay", "experiment.max_time",
      "dwell.kind",                 "dwell.shape",                 "dwell.scale",
      "dwell.mean",                 "dwell.median",                "network.latency",
      "network.bandwidth",          "network.server_service",      "network.server_per_byte",
      "network.worker_start",       "overhead.request_response_exchange", "overhead.stream_frame",
      "mandelbrot.x0",              "mandelbrot.y0",               "mandelbrot.pixel_step",
      "mandelbrot.width_px",        "mandelbrot.height_px",        "mandelbrot.max_iter",
  };
  return keys;
}

bool is_experiment_section(const std::string& key) {
  for (const char* p : {"experiment.", "dwell.", "network.", "overhead.", "mandelbrot."}) {
    if (key.starts_with(p)) return true;
  }
  return false;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KeyValues parse_string(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return flatten(tree);
}

KeyValues read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_string(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig experiment_from(const KeyValues& kv) {
  ExperimentConfig c;
  for (const auto& [k, v] : kv) {
    if (is_experiment_section(k) && !experiment_keys().contains(k)) throw ConfigError("unknown key " + k);
  }
  auto get = [&](const char* k) -> const std::string* {
    const auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("experiment.kernel")) c.kernel_id = trim(*v);
  if (auto* v = get("experiment.total_tasks")) c.total_tasks = to_uint("experiment.total_tasks", *v);
  if (auto* v = get("experiment.task_size")) c.task_size = to_uint("experiment.task_size", *v);
  if (auto* v = get("experiment.total_work")) {
    if (get("experiment.task_size")) throw ConfigError("give either experiment.task_size or experiment.total_work");
    const auto work = to_uint("experiment.total_work", *v);
    if (c.total_tasks == 0 || work % c.total_tasks != 0) {
      throw ConfigError("experiment.total_work must divide evenly into experiment.total_tasks");
    }
    c.task_size = work / c.total_tasks;
  }
  if (auto* v = get("experiment.worker_slots")) {
    c.worker_slots = static_cast<std::uint32_t>(to_uint("experiment.worker_slots", *v));
  }
  if (auto* v = get("experiment.transport")) c.transport = parse_enum("experiment.transport", *v, parse_transport);
  if (auto* v = get("experiment.policy")) {
    c.policy = parse_enum("experiment.policy", *v, [](const std::string& s) { return PolicyConfig::parse(s); });
  }
  if (auto* v = get("experiment.rng_seed")) c.rng_seed = to_uint("experiment.rng_seed", *v);
  if (auto* v = get("experiment.kernel_seed")) c.kernel_seed = to_uint("experiment.kernel_seed", *v);
  if (auto* v = get("experiment.compute_scale")) c.compute_scale = to_double("experiment.compute_scale", *v);
  if (auto* v = get("experiment.execute_kernels")) c.execute_kernels = to_bool("experiment.execute_kernels", *v);
  if (auto* v = get("experiment.compression_threshold")) {
    c.compression_threshold = to_uint("experiment.compression_threshold", *v);
  }
  if (auto* v = get("experiment.session_idle_timeout")) {
    c.session_idle_timeout_s = to_double("experiment.session_idle_timeout", *v);
  }
  if (auto* v = get("experiment.respawn_delay")) c.respawn_delay_s = to_double("experiment.respawn_delay", *v);
  if (auto* v = get("experiment.max_time")) c.max_time_s = to_double("experiment.max_time", *v);

  if (auto* v = get("dwell.kind")) c.dwell.kind = parse_enum("dwell.kind", *v, parse_dwell_kind);
  if (auto* v = get("dwell.shape")) c.dwell.shape = to_double("dwell.shape", *v);
  int targets = 0;
  for (const char* k : {"dwell.scale", "dwell.mean", "dwell.median"}) targets += get(k) ? 1 : 0;
  if (targets > 1) throw ConfigError("give only one of dwell.scale, dwell.mean, dwell.median");
  if (c.dwell.kind == DwellKind::Weibull) {
    if (targets == 0) throw ConfigError("weibull dwell needs dwell.scale, dwell.mean or dwell.median");
    if (c.dwell.shape <= 0) throw ConfigError("dwell.shape must be positive");
    if (auto* v = get("dwell.scale")) c.dwell.scale = to_double("dwell.scale", *v);
    if (auto* v = get("dwell.mean")) c.dwell.scale = dwell::scale_for_mean(to_double("dwell.mean", *v), c.dwell.shape);
    if (auto* v = get("dwell.median")) {
      c.dwell.scale = dwell::scale_for_median(to_double("dwell.median", *v), c.dwell.shape);
    }
  }

  if (auto* v = get("network.latency")) c.network.latency_s = to_double("network.latency", *v);
  if (auto* v = get("network.bandwidth")) c.network.bandwidth_bytes_per_s = to_double("network.bandwidth", *v);
  if (auto* v = get("network.server_service")) c.network.server_service_s = to_double("network.server_service", *v);
  if (auto* v = get("network.server_per_byte")) {
    c.network.server_per_byte_s = to_double("network.server_per_byte", *v);
  }
  if (auto* v = get("network.worker_start")) c.network.worker_start_s = to_double("network.worker_start", *v);
  if (auto* v = get("overhead.request_response_exchange")) {
    c.overhead.request_response_exchange = to_uint("overhead.request_response_exchange", *v);
  }
  if (auto* v = get("overhead.stream_frame")) c.overhead.stream_frame = to_uint("overhead.stream_frame", *v);

  if (auto* v = get("mandelbrot.x0")) c.mandelbrot.x0 = to_double("mandelbrot.x0", *v);
  if (auto* v = get("mandelbrot.y0")) c.mandelbrot.y0 = to_double("mandelbrot.y0", *v);
  if (auto* v = get("mandelbrot.pixel_step")) c.mandelbrot.pixel_step = to_double("mandelbrot.pixel_step", *v);
  if (auto* v = get("mandelbrot.width_px")) {
    c.mandelbrot.width_px = static_cast<std::uint32_t>(to_uint("mandelbrot.width_px", *v));
  }
  if (auto* v = get("mandelbrot.height_px")) {
    c.mandelbrot.height_px = static_cast<std::uint32_t>(to_uint("mandelbrot.height_px", *v));
  }
  if (auto* v = get("mandelbrot.max_iter")) {
    c.mandelbrot.max_iter = static_cast<std::uint32_t>(to_uint("mandelbrot.max_iter", *v));
  }

  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) { return experiment_from(read_file(path)); }

void ServerConfig::validate() const {
  if (!request_response && !stream) throw ConfigError("server: at least one transport must be enabled");
  if (listen.find(':') == std::string::npos) throw ConfigError("server.listen must be host:port");
  if (stats_interval_s <= 0) throw ConfigError("server.stats_interval must be positive");
  try {
    source.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

ServerConfig server_from(const KeyValues& kv) {
  ServerConfig s;
  static const std::set<std::string> known = {
      "server.listen",         "server.transports", "server.bundle_dir",   "server.event_log",
      "server.stats_interval", "server.idle_timeout", "source.endpoint",   "source.poll_interval",
      "source.token",
  };
  for (const auto& [k, v] : kv) {
    if ((k.starts_with("server.") || k.starts_with("source.")) && !known.contains(k)) {
      throw ConfigError("unknown key " + k);
    }
  }
  s.experiment = experiment_from(kv);
  s.overhead = s.experiment.overhead;
  s.compression_threshold = s.experiment.compression_threshold;
  auto get = [&](const char* k) -> const std::string* {
    const auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("server.listen")) s.listen = trim(*v);
  if (auto* v = get("server.transports")) {
    s.request_response = s.stream = false;
    for (const auto& t : split_list(*v)) {
      const auto tr = parse_enum("server.transports", t, parse_transport);
      (tr == Transport::RequestResponse ? s.request_response : s.stream) = true;
    }
  }
  if (auto* v = get("server.bundle_dir")) s.bundle_dir = trim(*v);
  if (auto* v = get("server.event_log")) s.event_log = trim(*v);
  if (auto* v = get("server.stats_interval")) s.stats_interval_s = to_double("server.stats_interval", *v);
  if (auto* v = get("server.idle_timeout")) s.idle_timeout_s = to_double("server.idle_timeout", *v);
  if (auto* v = get("source.endpoint")) s.source.endpoint = trim(*v);
  if (auto* v = get("source.poll_interval")) s.source.poll_interval = to_double("source.poll_interval", *v);
  if (auto* v = get("source.token")) s.source.token = trim(*v);
  if (auto env = listen_from_env()) s.listen = *env;
  s.validate();
  return s;
}

ServerConfig load_server(const std::filesystem::path& path) {
  auto kv = read_file(path);
  auto s = server_from(kv);
  if (s.bundle_dir.is_relative() && !kv.contains("server.bundle_dir")) return s;
  if (s.bundle_dir.is_relative()) s.bundle_dir = path.parent_path() / s.bundle_dir;
  return s;
}

std::optional<std::string> listen_from_env() {
  const char* v = std::getenv("WEBSWARM_LISTEN");
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

Matrix matrix_from(const KeyValues& kv, const std::filesystem::path& base_dir) {
  Matrix m;
  KeyValues base;
  std::map<std::string, KeyValues> cells;
  std::vector<std::pair<std::string, std::vector<std::string>>> sweep;
  for (const auto& [k, v] : kv) {
    if (k == "base") {
      std::filesystem::path p = trim(v);
      if (p.is_relative()) p = base_dir / p;
      for (const auto& [bk, bv] : read_file(p)) base.try_emplace(bk, bv);
    } else if (k == "repeats") {
      m.repeats = static_cast<std::uint32_t>(to_uint("repeats", v));
      if (m.repeats == 0) throw ConfigError("repeats must be at least 1");
    } else if (k.starts_with("set.")) {
      base[k.substr(4)] = v;
    } else if (k.starts_with("sweep.")) {
      auto values = split_list(v);
      if (values.empty()) throw ConfigError(k + ": empty sweep list");
      sweep.emplace_back(k.substr(6), std::move(values));
    } else if (k.starts_with("cell.")) {
      const auto rest = k.substr(5);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw ConfigError("malformed cell key " + k);
      cells[rest.substr(0, dot)][rest.substr(dot + 1)] = v;
    } else {
      throw ConfigError("unknown matrix key " + k);
    }
  }
  // [set] keys override the base file; read order above is alphabetical, so
  // re-apply them after the base is loaded.
  for (const auto& [k, v] : kv) {
    if (k.starts_with("set.")) base[k.substr(4)] = v;
  }
  if (cells.empty() && sweep.empty()) return m;
  if (cells.empty()) cells.emplace("run", KeyValues{});

  for (const auto& [name, overrides] : cells) {
    std::vector<std::pair<std::string, KeyValues>> expanded{{name, overrides}};
    for (const auto& [key, values] : sweep) {
      std::vector<std::pair<std::string, KeyValues>> next;
      for (const auto& [label, partial] : expanded) {
        for (const auto& value : values) {
          auto kvs = partial;
          kvs[key] = value;
          next.emplace_back(label + "/" + key + "=" + value, std::move(kvs));
        }
      }
      expanded = std::move(next);
    }
    for (auto& [label, overrides2] : expanded) {
      KeyValues merged = base;
      for (const auto& [k, v] : overrides2) merged[k] = v;
      try {
        m.cells.push_back(Cell{label, experiment_from(merged)});
      } catch (const ConfigError& e) {
        throw ConfigError("cell " + label + ": " + e.what());
      }
    }
  }
  return m;
}

Matrix load_matrix(const std::filesystem::path& path) { return matrix_from(read_file(path), path.parent_path()); }

}  // namespace webswarm::config
