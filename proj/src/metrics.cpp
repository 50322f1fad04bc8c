#include "webswarm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "webswarm/error.hpp"

namespace webswarm::metrics {

SessionClasses classify_sessions(const std::vector<MetricEvent>& log) {
  std::unordered_map<std::string, std::uint64_t> completed;
  std::set<std::string> closed;
  for (const auto& e : log) {
    if (e.kind == EventKind::FinalReceived && e.detail == "accepted") {
      ++completed[e.session];
    } else if (e.kind == EventKind::SessionClose) {
      closed.insert(e.session);
    }
  }
  SessionClasses c;
  for (const auto& id : closed) {
    const auto it = completed.find(id);
    const auto n = it == completed.end() ? 0 : it->second;
    c.per_session[id] = n;
    ++c.histogram[n];
    (n >= 1 ? c.value : c.non_value) += 1;
  }
  return c;
}

std::map<std::string, double> downtime_by_session(const std::vector<MetricEvent>& log) {
  std::unordered_map<std::string, double> open;
  std::map<std::string, double> out;
  for (const auto& e : log) {
    switch (e.kind) {
      case EventKind::WaitStart:
        open.emplace(e.session, e.t);
        out.emplace(e.session, 0.0);
        break;
      case EventKind::WaitEnd:
      case EventKind::SessionClose: {
        auto it = open.find(e.session);
        if (it == open.end()) break;
        out[e.session] += std::max(0.0, e.t - it->second);
        open.erase(it);
        break;
      }
      default:
        break;
    }
  }
  return out;
}

double total_downtime(const std::vector<MetricEvent>& log) {
  double total = 0.0;
  for (const auto& [id, d] : downtime_by_session(log)) total += d;
  return total;
}

namespace {

std::string dwell_name(const ExperimentConfig& c) { return std::string(to_string(c.dwell.kind)); }

}  // namespace

Summary experiment_summary(const std::vector<MetricEvent>& log, const ExperimentConfig& config, std::string label) {
  Summary s;
  s.label = std::move(label);
  s.kernel_id = config.kernel_id;
  s.total_tasks = config.total_tasks;
  s.task_size = config.task_size;
  s.transport = std::string(to_string(config.transport));
  s.policy = config.policy.describe();
  s.dwell = dwell_name(config);
  s.shape = config.dwell.shape;
  s.scale = config.dwell.scale;
  s.seed = config.rng_seed;

  if (log.empty()) return s;

  double first = log.front().t;
  double last = log.front().t;
  std::optional<double> drained_at;
  // (session, task) pairs dispatched and finalised, and how sessions closed.
  std::set<std::pair<std::string, std::string>> dispatched;
  std::set<std::pair<std::string, std::string>> finalised;
  std::unordered_map<std::string, std::string> close_reason;

  for (const auto& e : log) {
    first = std::min(first, e.t);
    last = std::max(last, e.t);
    switch (e.kind) {
      case EventKind::Drained:
        if (!drained_at) drained_at = e.t;
        break;
      case EventKind::FinalReceived:
        if (e.detail == "accepted") ++s.completions;
        finalised.emplace(e.session, e.task);
        break;
      case EventKind::TaskDispatched:
        ++s.dispatched;
        dispatched.emplace(e.session, e.task);
        break;
      case EventKind::ResultPushed:
        ++s.pushes;
        break;
      case EventKind::RequestReceived:
        ++s.requests;
        break;
      case EventKind::SessionClose:
        close_reason[e.session] = e.detail;
        break;
      case EventKind::Bytes: {
        const bool rr = e.transport.value_or(Transport::RequestResponse) == Transport::RequestResponse;
        auto& in = rr ? s.rr_bytes_in : s.stream_bytes_in;
        auto& out = rr ? s.rr_bytes_out : s.stream_bytes_out;
        (e.direction == Direction::In ? in : out) += e.count;
        break;
      }
      default:
        break;
    }
  }

  s.drained = drained_at.has_value();
  s.runtime_s = (drained_at ? *drained_at : last) - first;

  for (const auto& key : dispatched) {
    if (finalised.contains(key)) continue;
    const auto it = close_reason.find(key.first);
    if (it != close_reason.end() && it->second != "drain") ++s.wasted_dispatches;
  }

  const auto classes = classify_sessions(log);
  s.value_sessions = classes.value;
  s.non_value_sessions = classes.non_value;
  s.sessions = classes.value + classes.non_value;
  s.value_fraction = s.sessions ? static_cast<double>(s.value_sessions) / static_cast<double>(s.sessions) : 0.0;
  s.histogram = classes.histogram;
  s.downtime_s = total_downtime(log);
  s.request_rate = s.runtime_s > 0 ? static_cast<double>(s.requests) / s.runtime_s : 0.0;

  std::vector<std::uint64_t> per;
  std::uint64_t total = 0;
  for (const auto& [id, n] : classes.per_session) {
    per.push_back(n);
    total += n;
  }
  if (total > 0) {
    std::sort(per.begin(), per.end(), std::greater<>());
    const auto top = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(per.size())));
    std::uint64_t top_sum = 0;
    for (std::size_t i = 0; i < top; ++i) top_sum += per[i];
    s.top_decile_share = static_cast<double>(top_sum) / static_cast<double>(total);
  }
  return s;
}

Summary mean_summary(const std::vector<Summary>& runs, std::string label) {
  if (runs.empty()) throw Error("mean of zero summaries");
  Summary m = runs.front();
  m.label = std::move(label);
  const auto n = static_cast<double>(runs.size());
  auto avg = [&](auto field) {
    double acc = 0.0;
    for (const auto& r : runs) acc += static_cast<double>(r.*field);
    return acc / n;
  };
  auto avg_int = [&](auto field) { return static_cast<std::uint64_t>(std::llround(avg(field))); };
  m.drained = std::all_of(runs.begin(), runs.end(), [](const Summary& r) { return r.drained; });
  m.runtime_s = avg(&Summary::runtime_s);
  m.sessions = avg_int(&Summary::sessions);
  m.value_sessions = avg_int(&Summary::value_sessions);
  m.non_value_sessions = avg_int(&Summary::non_value_sessions);
  m.value_fraction = avg(&Summary::value_fraction);
  m.downtime_s = avg(&Summary::downtime_s);
  m.completions = avg_int(&Summary::completions);
  m.pushes = avg_int(&Summary::pushes);
  m.requests = avg_int(&Summary::requests);
  m.request_rate = avg(&Summary::request_rate);
  m.dispatched = avg_int(&Summary::dispatched);
  m.wasted_dispatches = avg_int(&Summary::wasted_dispatches);
  m.rr_bytes_in = avg_int(&Summary::rr_bytes_in);
  m.rr_bytes_out = avg_int(&Summary::rr_bytes_out);
  m.stream_bytes_in = avg_int(&Summary::stream_bytes_in);
  m.stream_bytes_out = avg_int(&Summary::stream_bytes_out);
  m.top_decile_share = avg(&Summary::top_decile_share);
  m.histogram.clear();
  for (const auto& r : runs) {
    for (const auto& [k, v] : r.histogram) m.histogram[k] += v;
  }
  for (auto& [k, v] : m.histogram) v = static_cast<std::size_t>(std::llround(static_cast<double>(v) / n));
  return m;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

constexpr const char* kColumns[] = {
    "schema_version", "label",           "kernel",          "total_tasks",      "task_size",
    "transport",      "policy",          "dwell",           "shape",            "scale",
    "seed",           "drained",         "runtime_s",       "sessions",         "value_sessions",
    "non_value_sessions", "value_fraction", "downtime_s",   "completions",      "pushes",
    "requests",       "request_rate",    "dispatched",      "wasted_dispatches", "rr_bytes_in",
    "rr_bytes_out",   "stream_bytes_in", "stream_bytes_out", "top_decile_share",
};

}  // namespace

void write_summary_header(std::ostream& out) {
  bool first = true;
  for (const auto* c : kColumns) {
    if (!first) out << ',';
    out << c;
    first = false;
  }
  out << '\n';
}

void write_summary_row(std::ostream& out, const Summary& s) {
  out << kSchemaVersion << ',' << field(s.label) << ',' << field(s.kernel_id) << ',' << s.total_tasks << ','
      << s.task_size << ',' << s.transport << ',' << s.policy << ',' << s.dwell << ',' << fmt(s.shape) << ','
      << fmt(s.scale) << ',' << s.seed << ',' << (s.drained ? 1 : 0) << ',' << fmt(s.runtime_s) << ','
      << s.sessions << ',' << s.value_sessions << ',' << s.non_value_sessions << ',' << fmt(s.value_fraction)
      << ',' << fmt(s.downtime_s) << ',' << s.completions << ',' << s.pushes << ',' << s.requests << ','
      << fmt(s.request_rate) << ',' << s.dispatched << ',' << s.wasted_dispatches << ',' << s.rr_bytes_in << ','
      << s.rr_bytes_out << ',' << s.stream_bytes_in << ',' << s.stream_bytes_out << ','
      << fmt(s.top_decile_share) << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<Summary>& rows) {
  write_summary_header(out);
  for (const auto& r : rows) write_summary_row(out, r);
}

void write_histogram_csv(std::ostream& out, const std::vector<Summary>& rows) {
  out << "schema_version,label,tasks_completed,sessions\n";
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.histogram) out << kSchemaVersion << ',' << field(r.label) << ',' << k << ',' << v << '\n';
  }
}

void write_sessions_csv(std::ostream& out, const std::vector<Summary>& rows) {
  out << "schema_version,label,shape,value_sessions,non_value_sessions,value_fraction\n";
  for (const auto& r : rows) {
    out << kSchemaVersion << ',' << field(r.label) << ',' << fmt(r.shape) << ',' << r.value_sessions << ','
        << r.non_value_sessions << ',' << fmt(r.value_fraction) << '\n';
  }
}

void write_downtime_csv(std::ostream& out, const std::vector<Summary>& rows) {
  out << "schema_version,label,task_size,total_tasks,runtime_s,downtime_s\n";
  for (const auto& r : rows) {
    out << kSchemaVersion << ',' << field(r.label) << ',' << r.task_size << ',' << r.total_tasks << ','
        << fmt(r.runtime_s) << ',' << fmt(r.downtime_s) << '\n';
  }
}

std::vector<Summary> read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) header.push_back(c);
  }
  if (header.empty() || header[0] != "schema_version") throw Error("not a summary CSV");
  std::vector<Summary> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) f.push_back(c);
    if (f.size() != header.size()) throw Error("summary CSV row has " + std::to_string(f.size()) + " fields");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < f.size(); ++i) row[header[i]] = f[i];
    if (std::stoi(row["schema_version"]) != kSchemaVersion) throw Error("unsupported summary schema");
    Summary s;
    auto u = [&](const char* k) { return static_cast<std::uint64_t>(std::stoull(row.at(k))); };
    auto d = [&](const char* k) { return std::stod(row.at(k)); };
    s.label = row["label"];
    s.kernel_id = row["kernel"];
    s.total_tasks = u("total_tasks");
    s.task_size = u("task_size");
    s.transport = row["transport"];
    s.policy = row["policy"];
    s.dwell = row["dwell"];
    s.shape = d("shape");
    s.scale = d("scale");
    s.seed = u("seed");
    s.drained = u("drained") != 0;
    s.runtime_s = d("runtime_s");
    s.sessions = u("sessions");
    s.value_sessions = u("value_sessions");
    s.non_value_sessions = u("non_value_sessions");
    s.value_fraction = d("value_fraction");
    s.downtime_s = d("downtime_s");
    s.completions = u("completions");
    s.pushes = u("pushes");
    s.requests = u("requests");
    s.request_rate = d("request_rate");
    s.dispatched = u("dispatched");
    s.wasted_dispatches = u("wasted_dispatches");
    s.rr_bytes_in = u("rr_bytes_in");
    s.rr_bytes_out = u("rr_bytes_out");
    s.stream_bytes_in = u("stream_bytes_in");
    s.stream_bytes_out = u("stream_bytes_out");
    s.top_decile_share = d("top_decile_share");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace webswarm::metrics
