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

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "userdp/cli.hpp"
#include "userdp/config.hpp"

namespace {

// Only the master seed and output directory may come from the environment;
// everything else lives in the config file for reproducibility.
void apply_env_overrides(userdp::CliOptions& cli) {
  if (const char* s = std::getenv("USERDP_MASTER_SEED"))
    cli.seed = std::strtoull(s, nullptr, 10);
  if (const char* s = std::getenv("USERDP_OUT_DIR")) cli.out_dir = s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"user-level DP stochastic convex optimization harness"};
  app.require_subcommand(1);

  userdp::CliOptions cli;
  apply_env_overrides(cli);

  std::string seed_str;
  std::string mode;
  int jobs = 0;
  app.add_option("--seed", seed_str, "master seed override");
  app.add_option("--out-dir", cli.out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads");
  app.add_option("--mode", mode, "constant mode: theory | practical")
      ->check(CLI::IsMember({"theory", "practical"}));

  auto* run = app.add_subcommand("run", "run experiments from a config file");
  std::string config_path;
  run->add_option("config", config_path, "config file (key = value text)")
      ->required();

  auto* audit = app.add_subcommand("audit", "run a lemma audit");
  std::string audit_name;
  std::vector<std::string> override_kv;
  audit->add_option("name", audit_name,
                    "stability | sensitivity | variance | mechanisms")
      ->required();
  audit->add_option("--override", override_kv, "parameter override k=v");

  auto* report = app.add_subcommand("report", "summarize result CSVs");
  std::vector<std::string> csv_paths;
  report->add_option("csv", csv_paths, "result CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  if (!seed_str.empty()) cli.seed = std::strtoull(seed_str.c_str(), nullptr, 10);
  if (jobs > 0) cli.jobs = jobs;
  if (!mode.empty()) cli.mode = mode;

  try {
    if (run->parsed()) {
      userdp::ExperimentConfig cfg;
      try {
        cfg = userdp::parse_config_file(config_path);
      } catch (const userdp::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return userdp::kExitConfig;
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return userdp::kExitConfig;
      }
      return userdp::cmd_run(cfg, cli);
    }
    if (audit->parsed()) {
      std::map<std::string, double> overrides;
      for (const auto& kv : override_kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::cerr << "--override expects k=v, got '" << kv << "'\n";
          return userdp::kExitConfig;
        }
        try {
          overrides[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
          std::cerr << "--override " << kv << ": bad number\n";
          return userdp::kExitConfig;
        }
      }
      return userdp::cmd_audit(audit_name, overrides, cli);
    }
    return userdp::cmd_report(csv_paths);
  } catch (const userdp::InfeasibleScheduleError& e) {
    std::cerr << "infeasible schedule: " << e.what() << "\n";
    return userdp::kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return userdp::kExitConfig;
  }
}
