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

#include "dapriv/anonymizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "absl/strings/str_cat.h"

namespace dapriv {

GeneralizationLevel GeneralizationLevel::MaskSuffix(size_t chars) {
  GeneralizationLevel level;
  level.kind = Kind::kMaskSuffix;
  level.mask = chars;
  return level;
}

GeneralizationLevel GeneralizationLevel::Table(
    std::map<std::string, std::string> table) {
  GeneralizationLevel level;
  level.kind = Kind::kTable;
  level.table = std::move(table);
  return level;
}

GeneralizationLevel GeneralizationLevel::Suppress() { return {}; }

absl::StatusOr<std::string> GeneralizationLevel::Apply(
    const std::string& raw) const {
  if (raw == kSuppressed) return raw;
  switch (kind) {
    case Kind::kSuppress:
      return std::string(kSuppressed);
    case Kind::kMaskSuffix: {
      std::string out = raw;
      const size_t n = std::min(mask, out.size());
      std::fill(out.end() - static_cast<std::ptrdiff_t>(n), out.end(), '*');
      return out;
    }
    case Kind::kTable: {
      auto it = table.find(raw);
      if (it == table.end()) {
        return absl::InvalidArgumentError(
            absl::StrCat("hierarchy table has no entry for '", raw, "'"));
      }
      return it->second;
    }
  }
  return absl::InternalError("unknown generalization kind");
}

absl::StatusOr<std::string> GeneralizationHierarchy::Generalize(
    const std::string& raw, size_t level) const {
  if (level == 0) return raw;
  if (level > steps.size()) {
    return absl::OutOfRangeError(absl::StrCat("level ", level,
                                              " exceeds hierarchy height ",
                                              steps.size()));
  }
  return steps[level - 1].Apply(raw);
}

absl::Status AnonymizationPolicy::Validate() const {
  if (k < 1) return absl::InvalidArgumentError("k must be at least 1");
  if (!(l >= 1.0)) return absl::InvalidArgumentError("l must be at least 1");
  if (sensitive_field.empty()) {
    return absl::InvalidArgumentError("sensitive_field must be set");
  }
  for (const std::string& field : quasi_id_fields) {
    if (field == sensitive_field) {
      return absl::InvalidArgumentError(
          absl::StrCat("'", field, "' is both quasi-id and sensitive"));
    }
    auto it = hierarchies.find(field);
    if (it == hierarchies.end() || it->second.steps.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("quasi-id '", field, "' has no hierarchy"));
    }
    if (it->second.steps.back().kind !=
        GeneralizationLevel::Kind::kSuppress) {
      return absl::InvalidArgumentError(absl::StrCat(
          "hierarchy for '", field, "' must end in full suppression"));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<EquivalenceClass>> EquivalenceClasses(
    const std::vector<Record>& records,
    const std::vector<std::string>& quasi_id_fields) {
  std::map<std::vector<std::string>, EquivalenceClass> grouped;
  for (size_t i = 0; i < records.size(); ++i) {
    std::vector<std::string> key;
    key.reserve(quasi_id_fields.size());
    for (const std::string& field : quasi_id_fields) {
      auto it = records[i].find(field);
      if (it == records[i].end()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "record ", i, " is missing quasi-id field '", field, "'"));
      }
      key.push_back(it->second);
    }
    grouped[std::move(key)].push_back(i);
  }
  std::vector<EquivalenceClass> out;
  out.reserve(grouped.size());
  for (auto& [key, members] : grouped) out.push_back(std::move(members));
  return out;
}

absl::StatusOr<bool> CheckKAnonymity(
    const std::vector<Record>& records,
    const std::vector<std::string>& quasi_id_fields, size_t k) {
  auto classes = EquivalenceClasses(records, quasi_id_fields);
  if (!classes.ok()) return classes.status();
  return std::all_of(classes->begin(), classes->end(),
                     [k](const EquivalenceClass& c) { return c.size() >= k; });
}

double SensitiveEntropy(const std::vector<Record>& records,
                        const EquivalenceClass& members,
                        const std::string& sensitive_field) {
  std::map<std::string, size_t> counts;
  size_t total = 0;
  for (size_t i : members) {
    auto it = records[i].find(sensitive_field);
    if (it == records[i].end()) continue;
    ++counts[it->second];
    ++total;
  }
  if (total == 0) return std::numeric_limits<double>::infinity();
  // H = log N - (1/N) * sum c log c, which is exact for uniform classes.
  double weighted = 0.0;
  for (const auto& [value, count] : counts) {
    weighted += static_cast<double>(count) * std::log(static_cast<double>(count));
  }
  return std::log(static_cast<double>(total)) -
         weighted / static_cast<double>(total);
}

namespace {

bool ClassPasses(const std::vector<Record>& records, const EquivalenceClass& c,
                 const AnonymizationPolicy& policy) {
  if (c.size() < policy.k) return false;
  return SensitiveEntropy(records, c, policy.sensitive_field) +
             kEntropyTolerance >=
         std::log(policy.l);
}

}  // namespace

absl::StatusOr<bool> EntropyLDiversity(
    const std::vector<Record>& records,
    const std::vector<std::string>& quasi_id_fields,
    const std::string& sensitive_field, double l) {
  auto classes = EquivalenceClasses(records, quasi_id_fields);
  if (!classes.ok()) return classes.status();
  const double bound = std::log(l);
  for (const EquivalenceClass& c : *classes) {
    if (SensitiveEntropy(records, c, sensitive_field) + kEntropyTolerance <
        bound) {
      return false;
    }
  }
  return true;
}

absl::StatusOr<size_t> CountViolating(const std::vector<Record>& records,
                                      const AnonymizationPolicy& policy) {
  auto classes = EquivalenceClasses(records, policy.quasi_id_fields);
  if (!classes.ok()) return classes.status();
  size_t violating = 0;
  for (const EquivalenceClass& c : *classes) {
    if (!ClassPasses(records, c, policy)) violating += c.size();
  }
  return violating;
}

absl::StatusOr<bool> PassesGates(const std::vector<Record>& records,
                                 const AnonymizationPolicy& policy) {
  auto violating = CountViolating(records, policy);
  if (!violating.ok()) return violating.status();
  return *violating == 0;
}

absl::StatusOr<std::vector<Record>> ApplyLevels(
    const std::vector<Record>& records, const AnonymizationPolicy& policy,
    const std::vector<size_t>& levels) {
  if (levels.size() != policy.quasi_id_fields.size()) {
    return absl::InvalidArgumentError("one level per quasi-id field expected");
  }
  std::vector<Record> out = records;
  for (size_t f = 0; f < levels.size(); ++f) {
    if (levels[f] == 0) continue;
    const std::string& field = policy.quasi_id_fields[f];
    const GeneralizationHierarchy& h = policy.hierarchies.at(field);
    for (size_t i = 0; i < out.size(); ++i) {
      auto it = out[i].find(field);
      if (it == out[i].end()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "record ", i, " is missing quasi-id field '", field, "'"));
      }
      auto generalized = h.Generalize(it->second, levels[f]);
      if (!generalized.ok()) return generalized.status();
      it->second = *std::move(generalized);
    }
  }
  return out;
}

absl::StatusOr<GeneralizationResult> GeneralizeToPolicy(
    const std::vector<Record>& records, const AnonymizationPolicy& policy) {
  if (absl::Status s = policy.Validate(); !s.ok()) return s;
  const size_t fields = policy.quasi_id_fields.size();
  std::vector<size_t> max_levels(fields);
  for (size_t f = 0; f < fields; ++f) {
    max_levels[f] = policy.hierarchies.at(policy.quasi_id_fields[f]).max_level();
  }

  std::vector<size_t> levels(fields, 0);
  for (;;) {
    auto current = ApplyLevels(records, policy, levels);
    if (!current.ok()) return current.status();
    auto passes = PassesGates(*current, policy);
    if (!passes.ok()) return passes.status();
    if (*passes) {
      return GeneralizationResult{true, *std::move(current), levels, 0};
    }
    if (levels == max_levels) break;

    std::vector<size_t> best;
    size_t best_violating = 0;
    for (size_t f = 0; f < fields; ++f) {
      if (levels[f] == max_levels[f]) continue;
      std::vector<size_t> candidate = levels;
      ++candidate[f];
      auto generalized = ApplyLevels(records, policy, candidate);
      if (!generalized.ok()) return generalized.status();
      auto violating = CountViolating(*generalized, policy);
      if (!violating.ok()) return violating.status();
      if (best.empty() || *violating < best_violating) {
        best = std::move(candidate);
        best_violating = *violating;
      }
    }
    levels = std::move(best);
  }

  // Every hierarchy is at its top and the gates still fail: suppress.
  auto top = ApplyLevels(records, policy, levels);
  if (!top.ok()) return top.status();
  auto classes = EquivalenceClasses(*top, policy.quasi_id_fields);
  if (!classes.ok()) return classes.status();
  GeneralizationResult result;
  result.levels = levels;
  for (const EquivalenceClass& c : *classes) {
    if (ClassPasses(*top, c, policy)) {
      for (size_t i : c) result.records.push_back((*top)[i]);
    } else {
      result.suppressed += c.size();
    }
  }
  if (result.suppressed * 2 > records.size()) {
    return GeneralizationResult{false, {}, levels, result.suppressed};
  }
  result.feasible = true;
  return result;
}

std::string_view ReleaseStatusName(ReleaseStatus status) {
  switch (status) {
    case ReleaseStatus::kReleased:
      return "released";
    case ReleaseStatus::kPoolTooSmall:
      return "withheld_pool_too_small";
    case ReleaseStatus::kInfeasible:
      return "withheld_infeasible";
  }
  return "unknown";
}

SubmissionPool::SubmissionPool(std::string study_id, AnonymizationPolicy policy)
    : study_id_(std::move(study_id)), policy_(std::move(policy)) {}

void SubmissionPool::AddSealed(crypto::SealedEnvelope envelope) {
  sealed_.push_back(std::move(envelope));
}

std::vector<Record> SubmissionPool::Ingest(
    const crypto::EncryptionKeyPair& key) {
  std::vector<Record> opened;
  for (const crypto::SealedEnvelope& env : sealed_) {
    auto plain = crypto::Open(env, key);
    if (!plain.ok()) {
      ++rejected_;
      continue;
    }
    auto fields = ParseFields(plain->plaintext);
    if (!fields.ok()) {
      ++rejected_;
      continue;
    }
    opened.push_back(*fields);
    working_set_.push_back(*std::move(fields));
  }
  sealed_.clear();
  return opened;
}

absl::StatusOr<ReleaseDecision> SubmissionPool::Release(Rng& rng) {
  ReleaseDecision decision;
  if (closed_) {
    return absl::FailedPreconditionError("pool has already been closed");
  }
  if (working_set_.size() < policy_.min_pool_size) {
    decision.status = ReleaseStatus::kPoolTooSmall;
    return decision;
  }

  std::vector<Record> normalized;
  normalized.reserve(working_set_.size());
  for (Record r : working_set_) {
    r.erase(kFieldName);
    r.erase(kFieldNationalId);
    for (const std::string& field : policy_.quasi_id_fields) {
      r.try_emplace(field, kSuppressed);
    }
    normalized.push_back(std::move(r));
  }

  auto result = GeneralizeToPolicy(normalized, policy_);
  if (!result.ok()) return result.status();
  closed_ = true;
  if (!result->feasible) {
    decision.status = ReleaseStatus::kInfeasible;
    return decision;
  }
  rng.Shuffle(result->records.begin(), result->records.end());
  decision.status = ReleaseStatus::kReleased;
  decision.batch = ReleasedBatch{study_id_, std::move(result->records),
                                 policy_.quasi_id_fields, result->levels,
                                 result->suppressed};
  return decision;
}

}  // namespace dapriv
