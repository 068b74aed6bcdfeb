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

#include "dapriv/adversary.h"

#include <algorithm>

namespace dapriv {

std::vector<ReassembledProfile> ColludeJoin(
    const std::vector<ObservationShard>& shards) {
  std::map<std::string, ReassembledProfile> by_token;
  for (const ObservationShard& shard : shards) {
    ReassembledProfile& profile = by_token[shard.session_token];
    profile.join_key = shard.session_token;
    for (const auto& kv : shard.attributes_seen) {
      profile.merged_attributes.insert(kv);
    }
    profile.contributing_observers.insert(shard.observer);
    profile.shards.push_back(shard);
  }
  std::vector<ReassembledProfile> out;
  out.reserve(by_token.size());
  for (auto& [token, profile] : by_token) out.push_back(std::move(profile));
  return out;
}

LinkageMetrics ReassemblyRate(
    const std::vector<ReassembledProfile>& profiles,
    const std::map<std::string, FieldMap>& ground_truth) {
  LinkageMetrics m;
  m.patients = ground_truth.size();

  std::map<std::string, size_t> largest_shard;
  std::map<std::string, size_t> largest_pure_profile;
  std::set<std::string> linked;

  for (const ReassembledProfile& profile : profiles) {
    std::set<std::string> subjects;
    std::map<std::string, std::set<std::string>> observers_by_subject;
    for (const ObservationShard& shard : profile.shards) {
      subjects.insert(shard.subject);
      if (!shard.attributes_seen.empty()) {
        observers_by_subject[shard.subject].insert(shard.observer);
        size_t& best = largest_shard[shard.subject];
        best = std::max(best, shard.attributes_seen.size());
      }
    }
    for (const auto& [subject, observers] : observers_by_subject) {
      if (observers.size() >= 2) linked.insert(subject);
    }
    if (profile.shards.size() >= 2) {
      ++m.merged_profiles;
      if (subjects.size() == 1) ++m.pure_merged_profiles;
    }
    if (subjects.size() == 1) {
      size_t& best = largest_pure_profile[*subjects.begin()];
      best = std::max(best, profile.merged_attributes.size());
    }
  }

  for (const std::string& subject : linked) {
    if (ground_truth.contains(subject)) ++m.linked_patients;
  }
  if (m.patients > 0) {
    m.linkage_rate = static_cast<double>(m.linked_patients) /
                     static_cast<double>(m.patients);
  }
  if (m.merged_profiles > 0) {
    m.precision = static_cast<double>(m.pure_merged_profiles) /
                  static_cast<double>(m.merged_profiles);
  }

  double ratio_sum = 0.0;
  size_t counted = 0;
  for (const auto& [subject, truth] : ground_truth) {
    auto shard_it = largest_shard.find(subject);
    if (shard_it == largest_shard.end() || shard_it->second == 0) continue;
    auto profile_it = largest_pure_profile.find(subject);
    const size_t merged =
        profile_it == largest_pure_profile.end() ? shard_it->second
                                                 : profile_it->second;
    ratio_sum += static_cast<double>(std::max(merged, shard_it->second)) /
                 static_cast<double>(shard_it->second);
    ++counted;
  }
  if (counted > 0) m.enrichment = ratio_sum / static_cast<double>(counted);
  return m;
}

std::vector<bool> QuasiIdLinkage(
    const std::vector<ReassembledProfile>& profiles,
    const std::vector<ReleasedBatch>& releases,
    const std::map<std::string, GeneralizationHierarchy>& hierarchies) {
  std::vector<bool> out(profiles.size(), false);
  for (size_t p = 0; p < profiles.size(); ++p) {
    std::map<std::string, std::string> known;
    for (const auto& [field, value] : profiles[p].merged_attributes) {
      known.emplace(field, value);
    }
    for (const ReleasedBatch& batch : releases) {
      std::vector<std::string> probe;
      bool complete = true;
      for (size_t f = 0; f < batch.quasi_id_fields.size(); ++f) {
        const std::string& field = batch.quasi_id_fields[f];
        auto it = known.find(field);
        if (it == known.end()) {
          complete = false;
          break;
        }
        const size_t level = f < batch.levels.size() ? batch.levels[f] : 0;
        std::string generalized = it->second;
        if (level > 0) {
          auto h = hierarchies.find(field);
          if (h == hierarchies.end()) {
            complete = false;
            break;
          }
          auto g = h->second.Generalize(it->second, level);
          if (!g.ok()) {
            complete = false;
            break;
          }
          generalized = *std::move(g);
        }
        probe.push_back(std::move(generalized));
      }
      if (!complete || batch.quasi_id_fields.empty()) continue;

      size_t matches = 0;
      for (const Record& record : batch.records) {
        bool equal = true;
        for (size_t f = 0; f < batch.quasi_id_fields.size() && equal; ++f) {
          auto it = record.find(batch.quasi_id_fields[f]);
          equal = it != record.end() && it->second == probe[f];
        }
        if (equal) ++matches;
      }
      if (matches == 1) {
        out[p] = true;
        break;
      }
    }
  }
  return out;
}

}  // namespace dapriv
