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

#ifndef DAPRIV_ADVERSARY_H_
#define DAPRIV_ADVERSARY_H_

// Re-assembly analysis: a coalition of honest-but-curious entities pools
// what each of them legitimately saw and joins the pieces on whatever
// identifier they share.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dapriv/anonymizer.h"
#include "dapriv/records.h"

namespace dapriv {

struct ObservationShard {
  std::string observer;
  // The identifier the observer saw for this interaction: a national id if
  // one was disclosed, else the deposited public key, else the session or
  // location identifier.
  std::string session_token;
  FieldMap attributes_seen;
  uint64_t timestamp = 0;
  // Interaction this shard came from (session id, location, flow id).
  std::string interaction;
  // Ground-truth patient, used only when scoring. Joins never read it.
  std::string subject;
};

struct ReassembledProfile {
  std::string join_key;
  std::set<std::pair<std::string, std::string>> merged_attributes;
  std::set<std::string> contributing_observers;
  std::vector<ObservationShard> shards;
};

// Groups shards by equal session_token, in token order.
std::vector<ReassembledProfile> ColludeJoin(
    const std::vector<ObservationShard>& shards);

struct LinkageMetrics {
  size_t patients = 0;
  size_t linked_patients = 0;
  size_t merged_profiles = 0;
  size_t pure_merged_profiles = 0;
  // Fraction of ground-truth patients for whom one profile combines
  // attribute-bearing shards from at least two distinct observers.
  double linkage_rate = 0.0;
  // Mean over patients with at least one attribute-bearing shard of
  // |largest correctly merged profile| / |largest single shard|.
  double enrichment = 1.0;
  // Fraction of merged (two or more shard) profiles whose shards all
  // belong to one patient. 1.0 when nothing merged.
  double precision = 1.0;
};

LinkageMetrics ReassemblyRate(
    const std::vector<ReassembledProfile>& profiles,
    const std::map<std::string, FieldMap>& ground_truth);

// For each profile: true iff exactly one record of some released batch
// matches the profile on every quasi-id field after generalizing the
// profile's values to the batch's levels. Profiles missing a quasi-id never
// match.
std::vector<bool> QuasiIdLinkage(
    const std::vector<ReassembledProfile>& profiles,
    const std::vector<ReleasedBatch>& releases,
    const std::map<std::string, GeneralizationHierarchy>& hierarchies);

}  // namespace dapriv

#endif  // DAPRIV_ADVERSARY_H_
