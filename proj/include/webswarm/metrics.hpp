#pragma once

// Offline analysis of an event log.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "webswarm/domain.hpp"
#include "webswarm/events.hpp"

namespace webswarm::metrics {

inline constexpr int kSchemaVersion = 1;

struct SessionClasses {
  std::size_t value = 0;
  std::size_t non_value = 0;
  /// tasks completed -> number of closed sessions
  std::map<std::uint64_t, std::size_t> histogram;
  /// closed session -> tasks completed
  std::map<std::string, std::uint64_t> per_session;
};

/// Partitions closed sessions by accepted completions.
SessionClasses classify_sessions(const std::vector<MetricEvent>& log);

/// Sum over sessions of WaitEnd - WaitStart. A wait left open is closed by
/// the session's close event, or ignored when there is none.
double total_downtime(const std::vector<MetricEvent>& log);

/// Per-session downtime, for sessions with at least one wait.
std::map<std::string, double> downtime_by_session(const std::vector<MetricEvent>& log);

struct Summary {
  std::string label;
  std::string kernel_id;
  std::uint64_t total_tasks = 0;
  std::uint64_t task_size = 0;
  std::string transport;
  std::string policy;
  std::string dwell;
  double shape = 0.0;
  double scale = 0.0;
  std::uint64_t seed = 0;

  bool drained = false;
  double runtime_s = 0.0;
  std::size_t sessions = 0;  // closed sessions
  std::size_t value_sessions = 0;
  std::size_t non_value_sessions = 0;
  double value_fraction = 0.0;
  double downtime_s = 0.0;
  std::uint64_t completions = 0;  // accepted finals
  std::uint64_t pushes = 0;
  std::uint64_t requests = 0;
  double request_rate = 0.0;  // requests per second of runtime
  std::uint64_t dispatched = 0;
  std::uint64_t wasted_dispatches = 0;
  std::uint64_t rr_bytes_in = 0;
  std::uint64_t rr_bytes_out = 0;
  std::uint64_t stream_bytes_in = 0;
  std::uint64_t stream_bytes_out = 0;
  double top_decile_share = 0.0;  // completions by the busiest 10% of sessions
  std::map<std::uint64_t, std::size_t> histogram;
};

/// Runtime runs from the first event to the Drained event (or the last
/// event of an undrained log). Wasted dispatches are tasks handed to a
/// session that went away without returning a Final for them.
Summary experiment_summary(const std::vector<MetricEvent>& log, const ExperimentConfig& config,
                           std::string label = {});

/// Field-wise mean; identity fields come from the first summary.
Summary mean_summary(const std::vector<Summary>& runs, std::string label);

void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const Summary& s);
void write_summary_csv(std::ostream& out, const std::vector<Summary>& rows);

/// label,tasks_completed,sessions
void write_histogram_csv(std::ostream& out, const std::vector<Summary>& rows);

/// label,value_sessions,non_value_sessions,value_fraction
void write_sessions_csv(std::ostream& out, const std::vector<Summary>& rows);

/// label,task_size,total_tasks,runtime_s,downtime_s
void write_downtime_csv(std::ostream& out, const std::vector<Summary>& rows);

/// Parses rows written by write_summary_csv (histograms are not carried).
std::vector<Summary> read_summary_csv(std::istream& in);

}  // namespace webswarm::metrics
