// Copyright 2026 The dapriv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: run a scenario file and print its report, or sweep
// one numeric parameter and tabulate the linkage rate.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "dapriv/harness.h"
#include "dapriv/report.h"
#include "dapriv/scenario.h"

namespace {

struct Sweep {
  std::string param;
  std::vector<uint64_t> values;
};

// Accepts "name=a..b" or "name=a,b,c".
std::optional<Sweep> ParseSweep(const std::string& text, std::string& error) {
  const size_t eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    error = "sweep must look like name=a..b or name=a,b,c";
    return std::nullopt;
  }
  Sweep sweep;
  sweep.param = text.substr(0, eq);
  const std::string range = text.substr(eq + 1);
  const size_t dots = range.find("..");
  if (dots != std::string::npos) {
    uint64_t lo = 0;
    uint64_t hi = 0;
    if (!absl::SimpleAtoi(range.substr(0, dots), &lo) ||
        !absl::SimpleAtoi(range.substr(dots + 2), &hi) || lo > hi ||
        hi - lo > 10000) {
      error = absl::StrCat("bad sweep range '", range, "'");
      return std::nullopt;
    }
    for (uint64_t v = lo; v <= hi; ++v) sweep.values.push_back(v);
    return sweep;
  }
  size_t start = 0;
  while (start <= range.size()) {
    const size_t comma = std::min(range.find(',', start), range.size());
    uint64_t v = 0;
    if (!absl::SimpleAtoi(range.substr(start, comma - start), &v)) {
      error = absl::StrCat("bad sweep value in '", range, "'");
      return std::nullopt;
    }
    sweep.values.push_back(v);
    start = comma + 1;
  }
  return sweep;
}

int RunOnce(const dapriv::Scenario& scenario, dapriv::EmitFormat format,
            const std::string& event_log_path) {
  auto world = dapriv::World::Build(scenario);
  if (!world.ok()) {
    std::cerr << "error: " << world.status().message() << "\n";
    return 2;
  }
  if (absl::Status s = (*world)->Run(); !s.ok()) {
    std::cerr << "error: " << s.message() << "\n";
    return 2;
  }
  const dapriv::RunReport report = (*world)->Report();
  if (!event_log_path.empty()) {
    std::ofstream log(event_log_path);
    for (const dapriv::EventRecord& e : (*world)->network().events()) {
      log << e.ToLine() << "\n";
    }
    if (!log) {
      std::cerr << "error: cannot write " << event_log_path << "\n";
      return 2;
    }
  }
  std::cout << dapriv::Emit(report, format);
  for (const dapriv::InvariantResult& inv : report.invariants) {
    if (!inv.passed) {
      std::cerr << "invariant violated: " << inv.name << ": " << inv.detail
                << "\n";
    }
  }
  return report.ok() ? 0 : 1;
}

int RunSweep(dapriv::Scenario scenario, const Sweep& sweep,
             uint64_t replicates) {
  const uint64_t base_seed = scenario.seed;
  bool clean = true;
  std::cout << absl::StrFormat("%-20s %10s %14s %10s\n", sweep.param,
                               "runs", "linkage_rate", "violations");
  for (uint64_t value : sweep.values) {
    if (absl::Status s = dapriv::ApplyOverride(scenario, sweep.param, value);
        !s.ok()) {
      std::cerr << "error: " << s.message() << "\n";
      return 2;
    }
    double total = 0.0;
    size_t violations = 0;
    for (uint64_t r = 0; r < replicates; ++r) {
      scenario.seed = base_seed + r;
      auto report = dapriv::RunScenario(scenario);
      if (!report.ok()) {
        std::cerr << "error: " << report.status().message() << "\n";
        return 2;
      }
      total += report->MetricOr("linkage_rate", 0.0);
      if (!report->ok()) ++violations;
    }
    clean = clean && violations == 0;
    std::cout << absl::StrFormat("%-20d %10d %14.6f %10d\n", value, replicates,
                                 total / static_cast<double>(replicates),
                                 violations);
  }
  return clean ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulates medical data flows and measures what colluding "
               "parties can re-assemble."};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run a scenario file");
  std::string path;
  std::string emit = "summary";
  std::optional<uint64_t> seed;
  std::string sweep_text;
  uint64_t replicates = 1;
  std::string event_log;
  run->add_option("scenario", path, "Scenario YAML file")->required();
  run->add_option("--emit", emit, "Output format")
      ->check(CLI::IsMember({"summary", "records"}));
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--sweep", sweep_text,
                  "Vary one parameter, e.g. public_threshold=1..4");
  run->add_option("--replicates", replicates,
                  "Seeds per sweep value (seed, seed+1, ...)")
      ->check(CLI::PositiveNumber);
  run->add_option("--event-log", event_log,
                  "Write the audit event log, one JSON line per delivery");

  CLI11_PARSE(app, argc, argv);

  auto scenario = dapriv::LoadScenario(path);
  if (!scenario.ok()) {
    std::cerr << "error: " << scenario.status().message() << "\n";
    return 2;
  }
  if (seed.has_value()) scenario->seed = *seed;

  if (!sweep_text.empty()) {
    std::string error;
    auto sweep = ParseSweep(sweep_text, error);
    if (!sweep.has_value()) {
      std::cerr << "error: " << error << "\n";
      return 2;
    }
    return RunSweep(*std::move(scenario), *sweep, replicates);
  }
  auto format = dapriv::ParseEmitFormat(emit);
  return RunOnce(*scenario, *format, event_log);
}
