#include <blockloc/core/config.hpp>
#include <blockloc/core/error.hpp>

#include <cstdlib>
#include <fstream>

namespace blockloc {
namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      // NDT
      {"ndt.voxel_size", "1.0"},
      {"ndt.sigma", "0.1"},
      {"ndt.outlier_ratio", "0.55"},
      // IMU noise model (continuous densities) and gravity magnitude
      {"imu.gyro_noise", "1.7e-4"},
      {"imu.accel_noise", "2.0e-3"},
      {"imu.gyro_walk", "1e-5"},
      {"imu.accel_walk", "1e-4"},
      {"imu.gravity", "9.81"},
      // Sliding window / keyframing
      {"tracker.max_keyframes", "20"},
      {"tracker.reserve_keyframes", "5"},
      {"tracker.switch_hysteresis", "3"},
      {"tracker.keyframe_trans", "0.5"},
      {"tracker.keyframe_rot_deg", "10"},
      {"tracker.keyframe_time", "1.0"},
      {"tracker.max_scan_gap", "2.0"},
      {"tracker.scan_leaf", "0.4"},
      // Branch-and-bound initialization
      {"bbs.levels", "6"},
      {"bbs.resolution", "0.25"},
      {"bbs.base_score", "0.6"},
      {"bbs.retry_score", "0.3"},
      {"bbs.window", "40"},
      {"bbs.slice_low", "0.3"},
      {"bbs.slice_high", "2.0"},
      // Block map builder
      {"builder.block_size", "30"},
      {"builder.leaf", "0.25"},
      {"builder.max_stamp_gap", "0.1"},
      // Map server client
      {"server.timeout_ms", "2000"},
  };
  return defaults;
}

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config::Config() : values_(default_values()) {}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set expects key=value, got: " + assignment);
  }
  set(strip(assignment.substr(0, eq)), strip(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  if (values_.find(key) == values_.end()) {
    throw ConfigError("unknown config key: " + key);
  }
  values_[key] = value;
}

double Config::get_double(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str()) throw ConfigError("config key " + key + " is not numeric");
  return v;
}

int Config::get_int(const std::string& key) const {
  return static_cast<int>(get_double(key));
}

bool Config::get_bool(const std::string& key) const {
  const auto& v = get_string(key);
  return v == "1" || v == "true" || v == "on";
}

const std::string& Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

}  // namespace blockloc
