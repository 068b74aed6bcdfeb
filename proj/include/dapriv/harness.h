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

#ifndef DAPRIV_HARNESS_H_
#define DAPRIV_HARNESS_H_

// Wires a scenario's entities onto one network, runs the schedule item by
// item, then harvests what the coalition saw and sweeps the invariants.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "dapriv/adversary.h"
#include "dapriv/certificates.h"
#include "dapriv/entities.h"
#include "dapriv/network.h"
#include "dapriv/scenario.h"

namespace dapriv {

struct FlowOutcome {
  std::string flow_id;
  std::string kind;  // lab, research, deposit, access
  std::string subject;
  bool completed = false;
  std::string reason;

  friend bool operator==(const FlowOutcome&, const FlowOutcome&) = default;
};

struct Metric {
  std::string name;
  double value = 0.0;

  friend bool operator==(const Metric&, const Metric&) = default;
};

struct InvariantResult {
  std::string name;
  bool passed = true;
  std::string detail;  // first violation, empty when passed

  friend bool operator==(const InvariantResult&,
                         const InvariantResult&) = default;
};

struct RunReport {
  std::string scenario;
  uint64_t seed = 0;
  std::string token_mode;
  std::vector<FlowOutcome> flows;
  std::vector<Metric> metrics;
  std::vector<InvariantResult> invariants;
  std::string event_log_digest;

  bool ok() const;
  const Metric* FindMetric(std::string_view name) const;
  double MetricOr(std::string_view name, double fallback) const;
  size_t CountFlows(std::string_view kind, bool completed) const;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

// Seeded synthetic patients with unique national ids.
std::vector<MedicalRecord> GeneratePopulation(size_t count, Rng& rng);

class World {
 public:
  static absl::StatusOr<std::unique_ptr<World>> Build(const Scenario& scenario);

  // Executes every schedule item in order, each to quiescence.
  absl::Status Run();

  // Harvest, metrics and invariants. Call after Run().
  RunReport Report() const;

  std::vector<ObservationShard> Harvest() const;
  std::map<std::string, FieldMap> GroundTruth() const;
  std::vector<InvariantResult> CheckInvariants() const;

  const Scenario& scenario() const { return scenario_; }
  const Network& network() const { return network_; }
  const CertificateRegistry& registry() const { return registry_; }
  size_t patient_count() const { return patients_.size(); }
  const PatientEntity& patient(size_t i) const { return *patients_[i]; }
  const PhysicianEntity& physician(size_t i) const { return *physicians_[i]; }
  const std::vector<std::unique_ptr<LabEntity>>& labs() const { return labs_; }
  const AuthServerEntity& auth() const { return *auth_; }
  const AnonymizerEntity& anonymizer() const { return *anonymizer_; }
  const EmergencyServerEntity& emergency_server() const {
    return *emergency_server_;
  }
  const MitmEntity& mitm() const { return *mitm_; }
  const std::vector<std::unique_ptr<ResearcherEntity>>& researchers() const {
    return researchers_;
  }
  const std::vector<FlowOutcome>& flows() const { return flows_; }

  // Lab flows by id with the tamper that was armed for them.
  struct LabFlowInfo {
    size_t patient = 0;
    size_t physician = 0;
    DirectoryRef lab;
    TamperKind tamper = TamperKind::kNone;
    bool tamper_fired = false;
  };
  const std::map<std::string, LabFlowInfo>& lab_flows() const {
    return lab_flows_;
  }

 private:
  explicit World(Scenario scenario);

  absl::Status Wire();
  absl::Status RunLabFlow(const LabFlowSpec& spec);
  absl::Status RunResearch(const ResearchFlowSpec& spec, size_t item_index);
  absl::Status RunEmergency(const EmergencySpec& spec);
  void Kick(const std::string& to, const std::string& type, wire::Json body);
  void CollectLabOutcome(const std::string& flow_id);

  Scenario scenario_;
  Rng rng_;
  Network network_;
  CertificateRegistry registry_;
  EntityContext context_;
  std::vector<MedicalRecord> population_;

  std::vector<std::unique_ptr<PatientEntity>> patients_;
  std::vector<std::unique_ptr<PhysicianEntity>> physicians_;
  std::vector<std::unique_ptr<LabEntity>> labs_;
  std::vector<std::unique_ptr<ResearcherEntity>> researchers_;
  std::vector<std::unique_ptr<DirectoryEntity>> directories_;
  std::vector<std::unique_ptr<EmergencyContactEntity>> contacts_;
  std::unique_ptr<AuthServerEntity> auth_;
  std::unique_ptr<BlobStoreEntity> blob_store_;
  std::unique_ptr<AnonymizerEntity> anonymizer_;
  std::unique_ptr<EmergencyServerEntity> emergency_server_;
  std::unique_ptr<EmergencyContactEntity> intruder_;
  std::unique_ptr<MitmEntity> mitm_;
  std::unique_ptr<HarnessSink> sink_;

  std::map<std::string, LabFlowInfo> lab_flows_;
  std::vector<FlowOutcome> flows_;
  size_t next_flow_ = 0;
  size_t sink_cursor_ = 0;
};

// Build, Run and Report in one call.
absl::StatusOr<RunReport> RunScenario(const Scenario& scenario);

}  // namespace dapriv

#endif  // DAPRIV_HARNESS_H_
