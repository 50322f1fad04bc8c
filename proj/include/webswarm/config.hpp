#pragma once

// Key-value configuration files. INI syntax; every setting is addressed as
// "section.key" (see docs/config.md).

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "webswarm/domain.hpp"
#include "webswarm/task_source.hpp"

namespace webswarm::config {

/// Flat "section.key" -> value view of a file.
using KeyValues = std::map<std::string, std::string>;

/// Throws ConfigError for a missing or malformed file.
KeyValues read_file(const std::filesystem::path& path);
KeyValues parse_string(const std::string& text);

/// Builds an experiment from defaults overridden by `kv`. Unknown keys in the
/// experiment sections are rejected.
ExperimentConfig experiment_from(const KeyValues& kv);
ExperimentConfig load_experiment(const std::filesystem::path& path);

struct ServerConfig {
  std::string listen = "127.0.0.1:8080";  // WEBSWARM_LISTEN overrides
  bool request_response = true;
  bool stream = true;
  TaskSourceDescriptor source;
  WireOverhead overhead;
  std::size_t compression_threshold = 16 * 1024;
  std::filesystem::path bundle_dir = "bundles";
  std::optional<std::filesystem::path> event_log;
  double stats_interval_s = 5.0;
  double idle_timeout_s = 0.0;  // 0: derived from the experiment
  ExperimentConfig experiment;  // task set for the built-in source

  void validate() const;
};

ServerConfig server_from(const KeyValues& kv);
ServerConfig load_server(const std::filesystem::path& path);

/// Listen address override from the environment, if set.
std::optional<std::string> listen_from_env();

struct Cell {
  std::string name;
  ExperimentConfig config;
};

struct Matrix {
  std::vector<Cell> cells;
  std::uint32_t repeats = 1;
};

/// A matrix file has optional top-level `base` (path of an experiment file)
/// and `repeats`, a [set] section applied to every cell, [cell.NAME]
/// sections each defining one cell, and a [sweep] section whose
/// comma-separated lists are expanded as a cross product over the cells.
/// Neither cells nor sweep lists means an empty matrix.
Matrix load_matrix(const std::filesystem::path& path);
Matrix matrix_from(const KeyValues& kv, const std::filesystem::path& base_dir = {});

}  // namespace webswarm::config
