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


#ifndef DAPRIV_SCENARIO_H_
#define DAPRIV_SCENARIO_H_

// Scenario files: who exists, which flows run in which order, the release
// policy and the colluding coalition. Loaded from YAML.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "dapriv/anonymizer.h"
#include "dapriv/directory.h"
#include "dapriv/key_pool.h"

namespace dapriv {

enum class TokenMode {
  kBaselineSsn,  // the patient shows the lab its national id
  kDaprivKeys,   // the lab only ever sees a session id and a public key
};

std::string_view TokenModeName(TokenMode mode);

enum class TamperKind {
  kNone,
  kPrescriptionByteFlip,
  kPrescriptionTestsAltered,
  kSubstitutedStoreKey,
  kMutatedPointerEnvelope,
  kMutatedResultBlob,
  kMutatedHandoffEnvelope,
};

std::string_view TamperName(TamperKind kind);
std::optional<TamperKind> ParseTamper(std::string_view name);
std::vector<TamperKind> AllTampers();

struct LabSpec {
  std::string id;
  std::set<std::string> tests;
};

struct ResearcherSpec {
  std::string id;
  std::set<std::string> studies;
};

struct DirectorySpec {
  std::string id;
  std::vector<LabSpec> labs;
  std::vector<ResearcherSpec> researchers;
};

struct LabFlowSpec {
  size_t patient = 0;
  std::optional<size_t> physician;  // defaults to the patient's own
  DirectoryRef lab;
  std::set<std::string> tests;
  TamperKind tamper = TamperKind::kNone;
};

// Every patient visits `sessions_per_patient` labs; session s of patient p
// goes to lab (p + s) mod L, so a patient's sessions hit distinct labs
// whenever sessions_per_patient <= L.
struct RoundRobinSpec {
  size_t sessions_per_patient = 1;
  std::set<std::string> tests;
};

struct ResearchFlowSpec {
  std::string study_id;
  DirectoryRef researcher;
  double consent_fraction = 1.0;
  std::set<std::string> share_policy;
  bool bypass_anonymizer = false;
};

struct EmergencySpec {
  size_t patient = 0;
  bool designate_contact = true;
  // Each entry is "contact" (the designated contact) or "intruder".
  std::vector<std::string> accesses;
};

using ScheduleItem =
    std::variant<LabFlowSpec, RoundRobinSpec, ResearchFlowSpec, EmergencySpec>;

struct Scenario {
  std::string name;
  uint64_t seed = 1;
  TokenMode token_mode = TokenMode::kDaprivKeys;
  size_t patients = 1;
  size_t physicians = 1;
  KeyPoolParams key_pool;
  std::vector<DirectorySpec> directories;
  std::vector<ScheduleItem> schedule;
  AnonymizationPolicy policy;
  std::vector<std::string> coalition;

  // Flattened lab ids in directory order ("D1#L1", ...).
  std::vector<DirectoryRef> LabRefs() const;
  std::vector<DirectoryRef> ResearcherRefs() const;
};

// Default release policy over birth_date, zip and gender with diagnosis as
// the sensitive attribute.
AnonymizationPolicy DefaultPolicy();

// Cross-field checks: referenced patients, labs and coalition members exist.
absl::Status ValidateScenario(const Scenario& scenario);

// Errors name the offending field and, when parsing from text, its line.
absl::StatusOr<Scenario> ParseScenario(std::string_view yaml_text);
absl::StatusOr<Scenario> LoadScenario(const std::string& path);

// Applies a numeric override such as "public_threshold=3" or "seed=9".
absl::Status ApplyOverride(Scenario& scenario, std::string_view name,
                           uint64_t value);

}  // namespace dapriv

#endif  // DAPRIV_SCENARIO_H_
