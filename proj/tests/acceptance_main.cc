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

// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any
// criterion fails. Tolerances are fixed here and never loosened at run time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "anonymizer_oracle.h"
#include "dapriv/anonymizer.h"
#include "dapriv/harness.h"
#include "dapriv/report.h"
#include "dapriv/scenario.h"
#include "linkage_oracle.h"

namespace dapriv {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void Report(const char* name, const Verdict& v) {
  std::printf("%s  %-26s %s\n", v.pass ? "PASS" : "FAIL", name,
              v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string ScenarioPath(const std::string& name) {
  return absl::StrCat(DAPRIV_SCENARIO_DIR, "/", name, ".yaml");
}

std::vector<std::string> SuiteScenarios() {
  std::vector<std::string> out;
  for (const auto& entry :
       std::filesystem::directory_iterator(DAPRIV_SCENARIO_DIR)) {
    if (entry.path().extension() == ".yaml") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::unique_ptr<World> RunWorld(const Scenario& s, std::string* error) {
  auto world = World::Build(s);
  if (!world.ok()) {
    *error = std::string(world.status().message());
    return nullptr;
  }
  if (absl::Status st = (*world)->Run(); !st.ok()) {
    *error = std::string(st.message());
    return nullptr;
  }
  return *std::move(world);
}

const LedgerEntry* FindEntry(const Entity& e, std::string_view kind,
                             std::string_view context) {
  for (const LedgerEntry& entry : e.ledger()) {
    if (entry.kind == kind && entry.context == context) return &entry;
  }
  return nullptr;
}

const LabEntity* LabById(const World& w, const std::string& id) {
  for (const auto& lab : w.labs()) {
    if (lab->id() == id) return lab.get();
  }
  return nullptr;
}

// Baseline tokens let a lab coalition join every patient; single-use keys
// leave nothing to join on.
Verdict ReassemblyDefense() {
  const auto start = Clock::now();
  auto baseline = LoadScenario(ScenarioPath("reassembly_baseline"));
  auto dapriv = LoadScenario(ScenarioPath("reassembly_dapriv"));
  if (!baseline.ok() || !dapriv.ok()) return {false, "scenario failed to load"};
  for (const Scenario* s : {&*baseline, &*dapriv}) {
    size_t sessions = 0;
    for (const ScheduleItem& item : s->schedule) {
      if (const auto* r = std::get_if<RoundRobinSpec>(&item)) {
        sessions = r->sessions_per_patient;
      }
    }
    if (s->patients != 20 || sessions != 3 || s->coalition.size() != 3) {
      return {false, "scenario is not 20 patients x 3 sessions x 3 labs"};
    }
  }
  if (dapriv->key_pool.public_threshold != 1) {
    return {false, "key-mode scenario allows key reuse"};
  }
  auto a = RunScenario(*baseline);
  auto b = RunScenario(*dapriv);
  const double elapsed = Seconds(start);
  if (!a.ok() || !b.ok()) return {false, "run failed"};
  const double base_rate = a->MetricOr("linkage_rate", -1);
  const double key_rate = b->MetricOr("linkage_rate", -1);
  const size_t completed =
      a->CountFlows("lab", true) + b->CountFlows("lab", true);
  Verdict v;
  v.pass = base_rate == 1.0 && key_rate == 0.0 && elapsed < 5.0 &&
           completed == 120 && a->ok() && b->ok();
  v.detail = absl::StrFormat(
      "baseline=%.6f (want 1.0) keys=%.6f (want 0.0) completed=%d/120 "
      "time=%.2fs (< 5s)",
      base_rate, key_rate, completed, elapsed);
  return v;
}

// Measured linkage against the exact uniform-selection estimate as the
// public-key threshold grows.
Verdict KeyReuseSensitivity() {
  const auto start = Clock::now();
  auto parsed = ParseScenario(
      "name: key_reuse_sweep\npatients: 1\nlabs: 3\n"
      "key_pool: {private_keys: 1, subkeys_per_private: 3, "
      "public_threshold: 1, private_threshold: 1000}\n"
      "schedule:\n  - round_robin: {sessions_per_patient: 3}\n"
      "coalition: all_labs\n");
  if (!parsed.ok()) return {false, std::string(parsed.status().message())};
  Scenario s = *parsed;
  const int kRuns = 1000;
  const double kTolerance = 0.05;
  Verdict v;
  for (uint64_t threshold : {1, 2, 3}) {
    s.key_pool.public_threshold = threshold;
    const double expected = oracle::ExactKeyReuseProbability(s.key_pool, 3);
    double total = 0.0;
    size_t violations = 0;
    for (int r = 0; r < kRuns; ++r) {
      s.seed = 10000 + static_cast<uint64_t>(r);
      auto report = RunScenario(s);
      if (!report.ok()) return {false, "run failed"};
      total += report->MetricOr("linkage_rate", -1);
      violations += !report->ok();
    }
    const double measured = total / kRuns;
    const bool ok = std::fabs(measured - expected) <= kTolerance &&
                    violations == 0;
    v.pass = v.pass && ok;
    absl::StrAppendFormat(&v.detail, "t=%d: %.4f vs %.4f; ", threshold,
                          measured, expected);
  }
  const double elapsed = Seconds(start);
  v.pass = v.pass && elapsed < 60.0;
  absl::StrAppendFormat(&v.detail, "runs=%dx3 tol=+-%.2f time=%.1fs (< 60s)",
                        kRuns, kTolerance, elapsed);
  return v;
}

// Every completed flow hands the physician exactly what the lab produced;
// every tampered flow aborts without the result reaching anyone else.
Verdict EndToEndLabFlow() {
  auto nominal = ParseScenario(
      "name: e2e\npatients: 5\nphysicians: 2\nlabs: 3\n"
      "schedule:\n  - round_robin: {sessions_per_patient: 1, "
      "tests: [blood_panel, xray]}\n");
  if (!nominal.ok()) return {false, "scenario"};
  Scenario s = *nominal;
  size_t flows = 0;
  size_t completed = 0;
  size_t matching = 0;
  std::string error;
  for (uint64_t seed = 1; flows < 500; ++seed) {
    s.seed = seed;
    auto world = RunWorld(s, &error);
    if (!world) return {false, error};
    for (const auto& [flow_id, info] : world->lab_flows()) {
      ++flows;
      const auto& pflow = world->patient(info.patient).flows().at(flow_id);
      if (!pflow.completed) continue;
      ++completed;
      const LabEntity* lab = LabById(*world, info.lab.Render());
      const LedgerEntry* lab_copy =
          lab ? FindEntry(*lab, kLedgerLabResult, pflow.session_id) : nullptr;
      const LedgerEntry* doc_copy =
          FindEntry(world->physician(info.physician), kLedgerResult, flow_id);
      if (lab_copy && doc_copy && lab_copy->plaintext == doc_copy->plaintext) {
        ++matching;
      }
    }
  }

  size_t tamper_runs = 0;
  size_t aborted = 0;
  size_t leaks = 0;
  auto tamper_base = ParseScenario("name: tamper\npatients: 1\nlabs: 1\n");
  if (!tamper_base.ok()) return {false, "scenario"};
  for (TamperKind kind : AllTampers()) {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      Scenario t = *tamper_base;
      t.seed = seed;
      LabFlowSpec spec;
      spec.lab = {"D1", "L1"};
      spec.tests = {"blood_panel"};
      spec.tamper = kind;
      t.schedule = {spec};
      auto world = RunWorld(t, &error);
      if (!world) return {false, error};
      ++tamper_runs;
      const auto& [flow_id, info] = *world->lab_flows().begin();
      const auto& pflow = world->patient(0).flows().at(flow_id);
      const bool physician_has_result =
          FindEntry(world->physician(0), kLedgerResult, flow_id) != nullptr;
      if (info.tamper_fired && !pflow.completed && !physician_has_result) {
        ++aborted;
      }
      // Anyone other than the lab, the patient and the physician holding the
      // lab's plaintext, or the plaintext appearing on the wire, is a leak.
      const LabEntity* lab = world->labs()[0].get();
      for (const LedgerEntry& produced : lab->ledger()) {
        if (produced.kind != kLedgerLabResult) continue;
        const std::string escaped = wire::Json(produced.plaintext).dump();
        const std::string inner = escaped.substr(1, escaped.size() - 2);
        for (const auto& [id, entity] : world->network().entities()) {
          if (id == lab->id() || id == PatientId(0) || id == PhysicianId(0)) {
            continue;
          }
          for (const LedgerEntry& e : entity->ledger()) {
            leaks += e.plaintext.find(produced.plaintext) != std::string::npos;
          }
        }
        for (const Message& m : world->network().transcript()) {
          const std::string body = m.body.dump();
          leaks += body.find(inner) != std::string::npos;
        }
      }
      leaks += world->mitm().ledger().size();
    }
  }
  Verdict v;
  v.pass = flows >= 500 && completed == flows && matching == completed &&
           aborted == tamper_runs && leaks == 0;
  v.detail = absl::StrFormat(
      "flows=%d completed=%d identical=%d (100%%); tamper runs=%d aborted=%d "
      "leaks=%d (0)",
      flows, completed, matching, tamper_runs, aborted, leaks);
  return v;
}

Verdict AnonymizerOracle() {
  const auto start = Clock::now();
  Rng rng(20240611);
  size_t agree = 0;
  size_t feasible = 0;
  std::string first;
  const int kDatasets = 1000;
  for (int i = 0; i < kDatasets; ++i) {
    const oracle::RandomInstance inst = oracle::MakeRandomInstance(rng);
    const std::string diff = oracle::CompareWithLibrary(inst);
    if (diff.empty()) {
      ++agree;
    } else if (first.empty()) {
      first = absl::StrCat("dataset ", i, ": ", diff);
    }
    auto g = GeneralizeToPolicy(inst.records, inst.policy);
    feasible += g.ok() && g->feasible;
  }
  const double elapsed = Seconds(start);
  Verdict v;
  v.pass = agree == kDatasets && elapsed < 30.0;
  v.detail = absl::StrFormat("agree=%d/%d feasible=%d time=%.2fs (< 30s)%s",
                             agree, kDatasets, feasible, elapsed,
                             first.empty() ? "" : " first: " + first);
  return v;
}

Verdict EntropyBoundary() {
  auto run = [](const std::vector<std::string>& values, double l) {
    std::vector<Record> records;
    for (const std::string& v : values) {
      records.push_back({{"zip", "47601"}, {"diagnosis", v}});
    }
    auto ok = EntropyLDiversity(records, {"zip"}, "diagnosis", l);
    return ok.ok() && *ok;
  };
  const std::vector<std::string> uniform3 = {"a", "b", "c"};
  const std::vector<std::string> half_quarter = {"a", "a", "b", "c"};
  const bool u3 = run(uniform3, 3.0);
  const bool u301 = run(uniform3, 3.01);
  const bool h2 = run(half_quarter, 2.0);
  const bool h3 = run(half_quarter, 3.0);
  Verdict v;
  v.pass = u3 && !u301 && h2 && !h3;
  v.detail = absl::StrFormat(
      "uniform3: l=3 %s, l=3.01 %s; (1/2,1/4,1/4): l=2 %s, l=3 %s",
      u3 ? "pass" : "fail", u301 ? "pass" : "fail", h2 ? "pass" : "fail",
      h3 ? "pass" : "fail");
  return v;
}

Verdict ConsentAndNotification() {
  size_t scenarios = 0;
  size_t non_consenting = 0;
  size_t attempts = 0;
  size_t notices = 0;
  size_t log_entries = 0;
  bool equal_everywhere = true;
  std::string error;
  for (const std::string& path : SuiteScenarios()) {
    auto s = LoadScenario(path);
    if (!s.ok()) return {false, std::string(s.status().message())};
    auto world = RunWorld(*s, &error);
    if (!world) return {false, error};
    ++scenarios;

    std::map<std::string, std::set<std::string>> consenting;
    for (size_t i = 0; i < world->patient_count(); ++i) {
      for (const auto& [study, st] : world->patient(i).studies()) {
        if (st.consent) consenting[study].insert(PatientId(i));
      }
      for (const auto& [study, fields] : world->patient(i).submissions()) {
        non_consenting += !consenting[study].contains(PatientId(i));
      }
    }
    for (const auto& [session, study] : world->auth().research_sessions()) {
      const TempStore* store = world->auth().service().FindStore({session});
      for (const StoreAccess& a : store->journal()) {
        if (a.action == StoreAction::kWrite && a.succeeded) {
          non_consenting += !consenting[study].contains(a.accessor);
        }
      }
    }
    for (const auto& researcher : world->researchers()) {
      for (const auto& [study, batches] : researcher->releases()) {
        size_t released = 0;
        for (const ReleasedBatch& b : batches) released += b.records.size();
        if (released > consenting[study].size()) {
          non_consenting += released - consenting[study].size();
        }
      }
      for (const auto& [study, by_sender] : researcher->direct_submissions()) {
        for (const auto& [sender, fields] : by_sender) {
          non_consenting += !consenting[study].contains(sender);
        }
      }
    }

    size_t a = 0;
    for (const Message& m : world->network().transcript()) {
      a += m.type == msg::kEmergencyFetch;
    }
    size_t n = 0;
    for (size_t i = 0; i < world->patient_count(); ++i) {
      n += world->patient(i).emergency_notices();
    }
    size_t l = 0;
    for (const auto& [patient, history] :
         world->emergency_server().storage().all()) {
      for (const EmergencySnapshot& snap : history) l += snap.access_log.size();
    }
    equal_everywhere = equal_everywhere && a == n && n == l;
    attempts += a;
    notices += n;
    log_entries += l;
  }
  Verdict v;
  v.pass = non_consenting == 0 && equal_everywhere && attempts > 0;
  v.detail = absl::StrFormat(
      "scenarios=%d non-consenting=%d (0); attempts=%d notifications=%d "
      "log=%d",
      scenarios, non_consenting, attempts, notices, log_entries);
  return v;
}

Verdict Determinism() {
  size_t scenarios = 0;
  size_t identical = 0;
  for (const std::string& path : SuiteScenarios()) {
    auto s = LoadScenario(path);
    if (!s.ok()) return {false, std::string(s.status().message())};
    auto a = RunScenario(*s);
    auto b = RunScenario(*s);
    if (!a.ok() || !b.ok()) return {false, "run failed"};
    ++scenarios;
    identical += Emit(*a, EmitFormat::kRecords) == Emit(*b, EmitFormat::kRecords);
  }
  return {scenarios > 0 && identical == scenarios,
          absl::StrFormat("byte-identical reports: %d/%d scenarios", identical,
                          scenarios)};
}

}  // namespace
}  // namespace dapriv

int main() {
  using namespace dapriv;
  Report("reassembly_defense", ReassemblyDefense());
  Report("key_reuse_sensitivity", KeyReuseSensitivity());
  Report("end_to_end_lab_flow", EndToEndLabFlow());
  Report("anonymizer_oracle", AnonymizerOracle());
  Report("entropy_boundary", EntropyBoundary());
  Report("consent_and_notification", ConsentAndNotification());
  Report("determinism", Determinism());
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
