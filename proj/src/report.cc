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

#include "dapriv/report.h"

#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "dapriv/wire.h"

namespace dapriv {
namespace {

using wire::Json;

constexpr char kFormatName[] = "dapriv-run-report";
constexpr int kFormatVersion = 1;

bool IsEmpty(const RunReport& r) {
  return r.scenario.empty() && r.flows.empty() && r.metrics.empty() &&
         r.invariants.empty() && r.event_log_digest.empty();
}

std::string Summary(const RunReport& r) {
  std::string out = absl::StrFormat("run %s (seed %d, %s)\n", r.scenario,
                                    r.seed, r.token_mode);
  for (const char* kind : {"lab", "research", "release", "deposit", "access"}) {
    const size_t done = r.CountFlows(kind, true);
    const size_t failed = r.CountFlows(kind, false);
    if (done + failed == 0) continue;
    absl::StrAppendFormat(&out, "  %-9s flows: %d completed, %d not completed\n",
                          kind, done, failed);
  }
  for (const FlowOutcome& f : r.flows) {
    if (f.completed || f.kind != "lab") continue;
    absl::StrAppendFormat(&out, "    %s aborted: %s\n", f.flow_id, f.reason);
  }
  out += "  metrics:\n";
  for (const Metric& m : r.metrics) {
    absl::StrAppendFormat(&out, "    %-24s %.6g\n", m.name, m.value);
  }
  out += "  invariants:\n";
  for (const InvariantResult& inv : r.invariants) {
    absl::StrAppendFormat(&out, "    %-30s %s%s\n", inv.name,
                          inv.passed ? "ok" : "VIOLATED",
                          inv.detail.empty() ? "" : absl::StrCat(" (", inv.detail, ")"));
  }
  absl::StrAppendFormat(&out, "  event log digest: %s\n", r.event_log_digest);
  return out;
}

std::string Records(const RunReport& r) {
  std::string out =
      Json{{"record", "header"}, {"format", kFormatName}, {"version", kFormatVersion}}
          .dump();
  out += '\n';
  if (IsEmpty(r)) return out;
  auto line = [&](const Json& j) {
    out += j.dump();
    out += '\n';
  };
  line({{"record", "run"},
        {"scenario", r.scenario},
        {"seed", r.seed},
        {"token_mode", r.token_mode},
        {"event_log_digest", r.event_log_digest}});
  for (const FlowOutcome& f : r.flows) {
    line({{"record", "flow"},
          {"flow_id", f.flow_id},
          {"kind", f.kind},
          {"subject", f.subject},
          {"completed", f.completed},
          {"reason", f.reason}});
  }
  for (const Metric& m : r.metrics) {
    line({{"record", "metric"}, {"name", m.name}, {"value", m.value}});
  }
  for (const InvariantResult& inv : r.invariants) {
    line({{"record", "invariant"},
          {"name", inv.name},
          {"passed", inv.passed},
          {"detail", inv.detail}});
  }
  return out;
}

}  // namespace

absl::StatusOr<EmitFormat> ParseEmitFormat(std::string_view name) {
  if (name == "summary") return EmitFormat::kSummary;
  if (name == "records") return EmitFormat::kRecords;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown emit format '", std::string(name), "'"));
}

std::string Emit(const RunReport& report, EmitFormat format) {
  return format == EmitFormat::kSummary ? Summary(report) : Records(report);
}

absl::StatusOr<RunReport> ParseRecords(std::string_view text) {
  RunReport report;
  bool saw_header = false;
  size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto where = [&](std::string_view what) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": ", std::string(what)));
    };
    auto j = wire::ParseJson(ToBytes(line));
    if (!j.ok() || !j->is_object()) return where("not a JSON object");
    auto kind = wire::GetString(*j, "record");
    if (!kind.ok()) return where(std::string(kind.status().message()));
    if (!saw_header) {
      if (*kind != "header" || j->value("format", "") != kFormatName ||
          j->value("version", 0) != kFormatVersion) {
        return where("expected the report header");
      }
      saw_header = true;
      continue;
    }
    try {
      if (*kind == "run") {
        report.scenario = j->at("scenario").get<std::string>();
        report.seed = j->at("seed").get<uint64_t>();
        report.token_mode = j->at("token_mode").get<std::string>();
        report.event_log_digest = j->at("event_log_digest").get<std::string>();
      } else if (*kind == "flow") {
        report.flows.push_back({j->at("flow_id").get<std::string>(),
                                j->at("kind").get<std::string>(),
                                j->at("subject").get<std::string>(),
                                j->at("completed").get<bool>(),
                                j->at("reason").get<std::string>()});
      } else if (*kind == "metric") {
        report.metrics.push_back(
            {j->at("name").get<std::string>(), j->at("value").get<double>()});
      } else if (*kind == "invariant") {
        report.invariants.push_back({j->at("name").get<std::string>(),
                                     j->at("passed").get<bool>(),
                                     j->at("detail").get<std::string>()});
      } else {
        return where(absl::StrCat("unknown record kind '", *kind, "'"));
      }
    } catch (const wire::Json::exception& e) {
      return where(e.what());
    }
  }
  if (!saw_header) return absl::InvalidArgumentError("missing report header");
  return report;
}

}  // namespace dapriv
