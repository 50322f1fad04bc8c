#include "webswarm/domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "webswarm/error.hpp"

namespace webswarm {

std::string_view to_string(TaskStatus s) {
  return s == TaskStatus::Queued ? "queued" : "completed";
}

std::string_view to_string(Transport t) {
  return t == Transport::RequestResponse ? "request_response" : "stream";
}

std::string_view to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::SyncSingle: return "sync";
    case PolicyMode::Batch: return "batch";
    case PolicyMode::AsyncPrefetch: return "async";
  }
  return "sync";
}

std::string_view to_string(DwellKind k) { return k == DwellKind::Constant ? "constant" : "weibull"; }

std::string_view to_string(DwellNormalization n) {
  switch (n) {
    case DwellNormalization::Explicit: return "explicit";
    case DwellNormalization::SharedMean: return "shared_mean";
    case DwellNormalization::SharedMedian: return "shared_median";
  }
  return "explicit";
}

Transport parse_transport(std::string_view s) {
  if (s == "request_response" || s == "request-response" || s == "rr" || s == "xhr") {
    return Transport::RequestResponse;
  }
  if (s == "stream" || s == "ws" || s == "websocket") return Transport::Stream;
  throw ConfigError("unknown transport '" + std::string(s) + "'");
}

PolicyMode parse_policy_mode(std::string_view s) {
  if (s == "sync" || s == "sync_single") return PolicyMode::SyncSingle;
  if (s == "batch") return PolicyMode::Batch;
  if (s == "async" || s == "async_prefetch") return PolicyMode::AsyncPrefetch;
  throw ConfigError("unknown policy mode '" + std::string(s) + "'");
}

DwellKind parse_dwell_kind(std::string_view s) {
  if (s == "constant") return DwellKind::Constant;
  if (s == "weibull") return DwellKind::Weibull;
  throw ConfigError("unknown dwell model '" + std::string(s) + "'");
}

DwellNormalization parse_dwell_normalization(std::string_view s) {
  if (s == "explicit") return DwellNormalization::Explicit;
  if (s == "shared_mean") return DwellNormalization::SharedMean;
  if (s == "shared_median") return DwellNormalization::SharedMedian;
  throw ConfigError("unknown dwell normalization '" + std::string(s) + "'");
}

PolicyConfig PolicyConfig::sync_single(std::optional<std::uint64_t> checkpoint_every) {
  return PolicyConfig{PolicyMode::SyncSingle, 1, 0, checkpoint_every};
}

PolicyConfig PolicyConfig::batch(std::uint32_t size) {
  return PolicyConfig{PolicyMode::Batch, size, 0, std::nullopt};
}

PolicyConfig PolicyConfig::async_prefetch(std::uint32_t size, std::uint32_t threshold) {
  return PolicyConfig{PolicyMode::AsyncPrefetch, size, threshold, std::nullopt};
}

void PolicyConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (mode == PolicyMode::SyncSingle && batch_size != 1) {
    throw ConfigError("sync policy requires batch_size = 1");
  }
  if (mode == PolicyMode::AsyncPrefetch && prefetch_threshold >= batch_size) {
    throw ConfigError("async policy requires prefetch_threshold < batch_size");
  }
  if (checkpoint_every && *checkpoint_every == 0) {
    throw ConfigError("checkpoint_every must be positive");
  }
}

std::string PolicyConfig::describe() const {
  std::string out;
  switch (mode) {
    case PolicyMode::SyncSingle: out = "sync"; break;
    case PolicyMode::Batch: out = "batch:" + std::to_string(batch_size); break;
    case PolicyMode::AsyncPrefetch:
      out = "async:" + std::to_string(batch_size) + ":" + std::to_string(prefetch_threshold);
      break;
  }
  if (checkpoint_every) out += "+ckpt:" + std::to_string(*checkpoint_every);
  return out;
}

namespace {

std::uint64_t parse_count(std::string_view s, const char* what) {
  try {
    std::size_t used = 0;
    auto text = std::string(s);
    std::erase(text, '_');
    auto v = std::stoull(text, &used);
    if (used == text.size()) return v;
    // exponent form such as 50e6
    const double d = std::stod(text, &used);
    if (used != text.size() || d < 0 || d != std::floor(d) || d > 1.8e19) throw ConfigError("");
    return static_cast<std::uint64_t>(d);
  } catch (const std::exception&) {
    throw ConfigError(std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
}

}  // namespace

PolicyConfig PolicyConfig::parse(std::string_view text) {
  PolicyConfig p;
  auto plus = text.find('+');
  auto head = text.substr(0, plus);
  if (plus != std::string_view::npos) {
    auto tail = text.substr(plus + 1);
    if (!tail.starts_with("ckpt:")) throw ConfigError("invalid policy suffix '" + std::string(tail) + "'");
    p.checkpoint_every = parse_count(tail.substr(5), "checkpoint interval");
  }
  auto c1 = head.find(':');
  p.mode = parse_policy_mode(head.substr(0, c1));
  if (p.mode == PolicyMode::SyncSingle) {
    if (c1 != std::string_view::npos) throw ConfigError("sync policy takes no parameters");
  } else if (p.mode == PolicyMode::Batch) {
    if (c1 == std::string_view::npos) throw ConfigError("batch policy needs a size");
    p.batch_size = static_cast<std::uint32_t>(parse_count(head.substr(c1 + 1), "batch size"));
  } else {
    if (c1 == std::string_view::npos) throw ConfigError("async policy needs size and threshold");
    auto rest = head.substr(c1 + 1);
    auto c2 = rest.find(':');
    if (c2 == std::string_view::npos) throw ConfigError("async policy needs size and threshold");
    p.batch_size = static_cast<std::uint32_t>(parse_count(rest.substr(0, c2), "batch size"));
    p.prefetch_threshold = static_cast<std::uint32_t>(parse_count(rest.substr(c2 + 1), "threshold"));
  }
  p.validate();
  return p;
}

void DwellModel::validate() const {
  if (kind == DwellKind::Constant) return;
  if (!(shape > 0.0) || !std::isfinite(shape)) throw ConfigError("Weibull shape must be positive");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("Weibull scale must be positive");
}

void ExperimentConfig::validate() const {
  if (total_tasks == 0) throw ConfigError("total_tasks must be at least 1");
  if (worker_slots == 0) throw ConfigError("worker_slots must be at least 1");
  if (kernel_id == "montecarlo" && task_size == 0) throw ConfigError("task_size must be positive");
  if (kernel_id == "mandelbrot") {
    if (mandelbrot.width_px == 0 || mandelbrot.height_px == 0 || mandelbrot.max_iter == 0) {
      throw ConfigError("mandelbrot grid must be non-empty with max_iter >= 1");
    }
    if (total_tasks > std::uint64_t{mandelbrot.width_px} * mandelbrot.height_px) {
      throw ConfigError("more mandelbrot tasks than pixels");
    }
  }
  if (kernel_id != "montecarlo" && kernel_id != "mandelbrot" && kernel_id != "add") {
    throw ConfigError("unknown kernel '" + kernel_id + "'");
  }
  if (compute_scale < 0.0) throw ConfigError("compute_scale must be non-negative");
  if (network.latency_s < 0.0 || network.bandwidth_bytes_per_s <= 0.0 ||
      network.server_service_s < 0.0 || network.server_per_byte_s < 0.0 ||
      network.worker_start_s < 0.0) {
    throw ConfigError("invalid network model");
  }
  if (max_time_s <= 0.0) throw ConfigError("max_time_s must be positive");
  dwell.validate();
  policy.validate();
}

std::uint64_t ExperimentConfig::units_per_task() const {
  if (kernel_id == "mandelbrot") {
    const auto pixels = std::uint64_t{mandelbrot.width_px} * mandelbrot.height_px;
    return (pixels + total_tasks - 1) / total_tasks;
  }
  if (kernel_id == "add") return 1;
  return task_size;
}

double ExperimentConfig::expected_task_seconds() const {
  return static_cast<double>(units_per_task()) * compute_scale;
}

double ExperimentConfig::idle_timeout() const {
  if (session_idle_timeout_s > 0.0) return session_idle_timeout_s;
  return std::max(2.0 * expected_task_seconds(), 1.0);
}

}  // namespace webswarm
