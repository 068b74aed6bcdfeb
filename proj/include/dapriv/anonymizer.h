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

#ifndef DAPRIV_ANONYMIZER_H_
#define DAPRIV_ANONYMIZER_H_

// Privacy gates and generalization for research releases.
//
// Records are flat field maps. A record's quasi-identifier projection
// decides its equivalence class; k-anonymity requires every class to hold
// at least k records and entropy l-diversity requires the natural-log
// entropy of each class's sensitive values to be at least log(l).

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dapriv/crypto.h"
#include "dapriv/records.h"
#include "dapriv/rng.h"

namespace dapriv {

using Record = FieldMap;

inline constexpr char kSuppressed[] = "*";

// Slack used when comparing an entropy against log(l); keeps exact
// boundaries such as a uniform class over l values on the passing side.
inline constexpr double kEntropyTolerance = 1e-12;

// One coarsening step of a hierarchy. Each step maps the raw value
// directly.
struct GeneralizationLevel {
  enum class Kind { kMaskSuffix, kTable, kSuppress };

  Kind kind = Kind::kSuppress;
  size_t mask = 0;                           // kMaskSuffix
  std::map<std::string, std::string> table;  // kTable

  static GeneralizationLevel MaskSuffix(size_t chars);
  static GeneralizationLevel Table(std::map<std::string, std::string> table);
  static GeneralizationLevel Suppress();

  absl::StatusOr<std::string> Apply(const std::string& raw) const;
};

// Level 0 is the raw value; steps[i] is level i + 1. The last step must
// suppress.
struct GeneralizationHierarchy {
  std::vector<GeneralizationLevel> steps;

  size_t max_level() const { return steps.size(); }
  absl::StatusOr<std::string> Generalize(const std::string& raw,
                                         size_t level) const;
};

struct AnonymizationPolicy {
  size_t k = 2;
  double l = 1.0;
  std::vector<std::string> quasi_id_fields;
  std::string sensitive_field;
  std::map<std::string, GeneralizationHierarchy> hierarchies;
  size_t min_pool_size = 5;

  absl::Status Validate() const;
};

using EquivalenceClass = std::vector<size_t>;

// Partition of record indices by exact quasi-id projection, classes ordered
// by projection. InvalidArgument if a record lacks a quasi-id field.
absl::StatusOr<std::vector<EquivalenceClass>> EquivalenceClasses(
    const std::vector<Record>& records,
    const std::vector<std::string>& quasi_id_fields);

absl::StatusOr<bool> CheckKAnonymity(
    const std::vector<Record>& records,
    const std::vector<std::string>& quasi_id_fields, size_t k);

// Natural-log entropy of a class's sensitive values. Records without the
// sensitive field are left out of the estimate; a class with none passes.
double SensitiveEntropy(const std::vector<Record>& records,
                        const EquivalenceClass& members,
                        const std::string& sensitive_field);

absl::StatusOr<bool> EntropyLDiversity(
    const std::vector<Record>& records,
    const std::vector<std::string>& quasi_id_fields,
    const std::string& sensitive_field, double l);

// Number of records sitting in classes that fail either gate.
absl::StatusOr<size_t> CountViolating(const std::vector<Record>& records,
                                      const AnonymizationPolicy& policy);

absl::StatusOr<bool> PassesGates(const std::vector<Record>& records,
                                 const AnonymizationPolicy& policy);

absl::StatusOr<std::vector<Record>> ApplyLevels(
    const std::vector<Record>& records, const AnonymizationPolicy& policy,
    const std::vector<size_t>& levels);

struct GeneralizationResult {
  bool feasible = false;
  std::vector<Record> records;
  std::vector<size_t> levels;  // parallel to policy.quasi_id_fields
  size_t suppressed = 0;
};

// Greedy full-domain generalization. Each round raises the quasi-id field
// whose increment leaves the fewest violating records (ties to the leftmost
// field) until both gates pass. At the top of every hierarchy the violating
// classes are suppressed, unless that would drop more than half of the
// records, in which case the result is infeasible.
absl::StatusOr<GeneralizationResult> GeneralizeToPolicy(
    const std::vector<Record>& records, const AnonymizationPolicy& policy);

struct ReleasedBatch {
  std::string study_id;
  std::vector<Record> records;
  std::vector<std::string> quasi_id_fields;
  std::vector<size_t> levels;
  size_t suppressed = 0;
};

enum class ReleaseStatus { kReleased, kPoolTooSmall, kInfeasible };

std::string_view ReleaseStatusName(ReleaseStatus status);

struct ReleaseDecision {
  ReleaseStatus status = ReleaseStatus::kPoolTooSmall;
  ReleasedBatch batch;  // meaningful only when released
};

// Sealed submissions for one study. Decrypted records stay inside the pool;
// the only way out is Release().
class SubmissionPool {
 public:
  SubmissionPool(std::string study_id, AnonymizationPolicy policy);

  void AddSealed(crypto::SealedEnvelope envelope);
  // Opens every pending envelope. Returns the decrypted records so the
  // owning entity can keep its own audit ledger; malformed submissions are
  // counted and dropped.
  std::vector<Record> Ingest(const crypto::EncryptionKeyPair& key);

  size_t size() const { return working_set_.size(); }
  size_t rejected() const { return rejected_; }
  size_t pending() const { return sealed_.size(); }
  bool closed() const { return closed_; }
  const AnonymizationPolicy& policy() const { return policy_; }

  // Withholds when the pool is smaller than min_pool_size (the pool stays
  // open) or when the gates cannot be met (the pool closes). A successful
  // release also closes the pool.
  absl::StatusOr<ReleaseDecision> Release(Rng& rng);

 private:
  std::string study_id_;
  AnonymizationPolicy policy_;
  std::vector<crypto::SealedEnvelope> sealed_;
  std::vector<Record> working_set_;
  size_t rejected_ = 0;
  bool closed_ = false;
};

}  // namespace dapriv

#endif  // DAPRIV_ANONYMIZER_H_
