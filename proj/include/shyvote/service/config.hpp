#pragma once

// Server settings: JSON file first, then SHYVOTE_* environment variables.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shyvote/error.hpp"
#include "shyvote/pipeline.hpp"
#include "shyvote/service/serialization.hpp"
#include "shyvote/service/study.hpp"

namespace shyvote::service {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "shyvote-data";
  bool sync_writes = true;
  int k_outliers = 4;           // default for analysis requests
  StudyConfig study_defaults;   // trial counts, seed
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

namespace detail {

inline int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::invalid_config, std::string(what) + " is not an integer: '" + s + "'");
}

inline std::array<int, kBlockCount> parse_trial_counts(const std::string& s) {
  std::vector<int> values;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(parse_int(item, "trial count"));
  if (values.size() != kBlockCount) {
    throw Error(ErrorKind::invalid_config, "trial counts need exactly 5 values, got '" + s + "'");
  }
  std::array<int, kBlockCount> out{};
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

}  // namespace detail

inline ServerConfig config_from_json(const json& j) {
  ServerConfig c;
  if (!j.is_object()) throw Error(ErrorKind::invalid_config, "config must be a JSON object");
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.sync_writes = j.value("sync_writes", c.sync_writes);
    c.k_outliers = j.value("k_outliers", c.k_outliers);
    if (j.contains("trial_counts")) {
      c.study_defaults.trial_counts = j.at("trial_counts").get<std::array<int, kBlockCount>>();
    }
    c.study_defaults.seed = j.value("seed", c.study_defaults.seed);
    c.study_defaults.enforce_gap = j.value("enforce_gap", c.study_defaults.enforce_gap);
    c.study_defaults.min_gap_days = j.value("min_gap_days", c.study_defaults.min_gap_days);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }
  return c;
}

inline void apply_env(ServerConfig& c, const EnvLookup& env) {
  if (auto v = env("SHYVOTE_HOST")) c.host = *v;
  if (auto v = env("SHYVOTE_PORT")) c.port = detail::parse_int(*v, "SHYVOTE_PORT");
  if (auto v = env("SHYVOTE_DATA_DIR")) c.data_dir = *v;
  if (auto v = env("SHYVOTE_K_OUTLIERS")) c.k_outliers = detail::parse_int(*v, "SHYVOTE_K_OUTLIERS");
  if (auto v = env("SHYVOTE_TRIAL_COUNTS")) c.study_defaults.trial_counts = detail::parse_trial_counts(*v);
}

inline void validate(const ServerConfig& c) {
  if (c.port < 0 || c.port > 65535) {
    throw Error(ErrorKind::invalid_config, "port out of range: " + std::to_string(c.port));
  }
  if (c.k_outliers < 0) throw Error(ErrorKind::invalid_config, "k_outliers must be >= 0");
  validate(SessionConfig{c.study_defaults.trial_counts, PairingOrder::a_good_first, c.study_defaults.seed});
}

/// Reads `path` (if given) and overlays the environment.
inline ServerConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env) {
  ServerConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::invalid_config, "cannot read config " + path.string());
    try {
      c = config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::invalid_config, path.string() + ": " + e.what());
    }
  }
  apply_env(c, env);
  validate(c);
  return c;
}

}  // namespace shyvote::service
