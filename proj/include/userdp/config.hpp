//
// Copyright 2026 The userdp-sco Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef USERDP_CONFIG_HPP
#define USERDP_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace userdp {

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line)
      : std::runtime_error("config line " + std::to_string(line) + ": " + msg),
        line_number(line) {}
  int line_number;
};

/// Experiment description parsed from the flat key=value config format.
/// Sections: [problem] [algorithm] [data] [privacy] [schedule] [run] [sweep].
/// Repeated keys form lists (seeds, sweep axes).
struct ExperimentConfig {
  // [problem]
  std::string problem = "quadratic_mean";
  int d = 8;
  double radius = 1.0;
  double mean_norm = 0.5;
  double scale = 0.5;
  double trunc = 2.0;
  long oracle_samples = 1000000;
  // [algorithm]
  std::string algorithm = "alg1";  // alg1 | alg3 | alg3_nonsmooth
  // [data]
  int n = 1024;
  int m = 8;
  // [privacy]
  double epsilon = 1.0;
  double delta = 1e-5;
  double kappa = 1.0;
  std::string mode = "practical";  // theory | practical
  // [schedule]
  std::optional<double> p, q, eta, lambda, c_tau, c_t;
  int k = 1;  // smoothing samples per gradient
  // [run]
  std::vector<std::uint64_t> seeds;
  std::string out = "results.csv";
  int jobs = 1;
  // [sweep]: axes applied as a cross product, declaration order
  std::vector<std::pair<std::string, std::vector<double>>> sweep;

  std::string raw_text;  // verbatim config, embedded in output headers

  /// Settable scalar fields, by config/sweep key.
  void set_scalar(const std::string& key, double value) {
    if (key == "n") n = static_cast<int>(value);
    else if (key == "m") m = static_cast<int>(value);
    else if (key == "d") d = static_cast<int>(value);
    else if (key == "k") k = static_cast<int>(value);
    else if (key == "radius") radius = value;
    else if (key == "mean_norm") mean_norm = value;
    else if (key == "scale") scale = value;
    else if (key == "trunc") trunc = value;
    else if (key == "oracle_samples") oracle_samples = static_cast<long>(value);
    else if (key == "epsilon") epsilon = value;
    else if (key == "delta") delta = value;
    else if (key == "kappa") kappa = value;
    else if (key == "p") p = value;
    else if (key == "q") q = value;
    else if (key == "eta") eta = value;
    else if (key == "lambda") lambda = value;
    else if (key == "c_tau") c_tau = value;
    else if (key == "c_T") c_t = value;
    else if (key == "jobs") jobs = static_cast<int>(value);
    else throw std::invalid_argument("unknown scalar field: " + key);
  }

  static bool is_scalar_field(const std::string& key) {
    static const char* names[] = {"n", "m", "d", "k", "radius", "mean_norm",
                                  "scale", "trunc", "oracle_samples", "epsilon",
                                  "delta", "kappa", "p", "q", "eta", "lambda",
                                  "c_tau", "c_T", "jobs"};
    for (const char* nm : names)
      if (key == nm) return true;
    return false;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number '" + v + "'", line);
  }
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  cfg.raw_text = text;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = t.substr(1, t.size() - 2);
      if (section != "problem" && section != "algorithm" && section != "data" &&
          section != "privacy" && section != "schedule" && section != "run" &&
          section != "sweep")
        throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("expected key = value", line_no);

    if (section == "problem") {
      if (key == "name") cfg.problem = value;
      else if (key == "d" || key == "radius" || key == "mean_norm" ||
               key == "scale" || key == "trunc" || key == "oracle_samples")
        cfg.set_scalar(key, detail::parse_number(value, line_no));
      else throw ConfigError("unknown [problem] key: " + key, line_no);
    } else if (section == "algorithm") {
      if (key == "name") cfg.algorithm = value;
      else throw ConfigError("unknown [algorithm] key: " + key, line_no);
    } else if (section == "data") {
      if (key == "n" || key == "m")
        cfg.set_scalar(key, detail::parse_number(value, line_no));
      else throw ConfigError("unknown [data] key: " + key, line_no);
    } else if (section == "privacy") {
      if (key == "mode") {
        if (value != "theory" && value != "practical")
          throw ConfigError("mode must be theory or practical", line_no);
        cfg.mode = value;
      } else if (key == "epsilon" || key == "delta" || key == "kappa") {
        cfg.set_scalar(key, detail::parse_number(value, line_no));
      } else {
        throw ConfigError("unknown [privacy] key: " + key, line_no);
      }
    } else if (section == "schedule") {
      if (key == "p" || key == "q" || key == "eta" || key == "lambda" ||
          key == "c_tau" || key == "c_T" || key == "k")
        cfg.set_scalar(key, detail::parse_number(value, line_no));
      else throw ConfigError("unknown [schedule] key: " + key, line_no);
    } else if (section == "run") {
      if (key == "seed") {
        cfg.seeds.push_back(static_cast<std::uint64_t>(
            detail::parse_number(value, line_no)));
      } else if (key == "out") {
        cfg.out = value;
      } else if (key == "jobs") {
        cfg.set_scalar(key, detail::parse_number(value, line_no));
      } else {
        throw ConfigError("unknown [run] key: " + key, line_no);
      }
    } else if (section == "sweep") {
      if (!ExperimentConfig::is_scalar_field(key))
        throw ConfigError("cannot sweep over '" + key + "'", line_no);
      const double v = detail::parse_number(value, line_no);
      bool found = false;
      for (auto& axis : cfg.sweep)
        if (axis.first == key) {
          axis.second.push_back(v);
          found = true;
        }
      if (!found) cfg.sweep.push_back({key, {v}});
    } else {
      throw ConfigError("key outside of any section", line_no);
    }
  }
  if (cfg.seeds.empty()) cfg.seeds.push_back(1);
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace userdp

#endif  // USERDP_CONFIG_HPP
