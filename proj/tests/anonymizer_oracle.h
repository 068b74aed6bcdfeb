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

// Independent reference implementations of the release gates, used by the
// unit tests and the acceptance binary. These deliberately avoid the library's
// grouping code: every record is compared against every other record.

#ifndef DAPRIV_TESTS_ANONYMIZER_ORACLE_H_
#define DAPRIV_TESTS_ANONYMIZER_ORACLE_H_

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dapriv/anonymizer.h"
#include "dapriv/rng.h"

namespace dapriv::oracle {

inline bool SameProjection(const Record& a, const Record& b,
                           const std::vector<std::string>& fields) {
  for (const std::string& f : fields) {
    if (a.at(f) != b.at(f)) return false;
  }
  return true;
}

inline bool BruteKAnonymous(const std::vector<Record>& records,
                            const std::vector<std::string>& fields, size_t k) {
  for (const Record& r : records) {
    size_t peers = 0;
    for (const Record& s : records) peers += SameProjection(r, s, fields);
    if (peers < k) return false;
  }
  return true;
}

// Shannon entropy of the sensitive values among r's peers, computed as
// -sum p log p.
inline double BruteClassEntropy(const std::vector<Record>& records,
                                const Record& r,
                                const std::vector<std::string>& fields,
                                const std::string& sensitive) {
  std::map<std::string, double> freq;
  double total = 0;
  for (const Record& s : records) {
    if (!SameProjection(r, s, fields)) continue;
    auto it = s.find(sensitive);
    if (it == s.end()) continue;
    freq[it->second] += 1;
    total += 1;
  }
  if (total == 0) return INFINITY;
  double h = 0;
  for (const auto& [v, c] : freq) {
    const double p = c / total;
    h -= p * std::log(p);
  }
  return h;
}

inline bool BruteLDiverse(const std::vector<Record>& records,
                          const std::vector<std::string>& fields,
                          const std::string& sensitive, double l) {
  for (const Record& r : records) {
    if (BruteClassEntropy(records, r, fields, sensitive) + kEntropyTolerance <
        std::log(l)) {
      return false;
    }
  }
  return true;
}

inline bool BruteGates(const std::vector<Record>& records,
                       const AnonymizationPolicy& policy) {
  return BruteKAnonymous(records, policy.quasi_id_fields, policy.k) &&
         BruteLDiverse(records, policy.quasi_id_fields, policy.sensitive_field,
                       policy.l);
}

// Generalizes each record independently, without the library's ApplyLevels.
inline std::vector<Record> BruteApply(const std::vector<Record>& records,
                                      const AnonymizationPolicy& policy,
                                      const std::vector<size_t>& levels) {
  std::vector<Record> out;
  for (Record r : records) {
    for (size_t f = 0; f < levels.size(); ++f) {
      const std::string& field = policy.quasi_id_fields[f];
      r[field] =
          *policy.hierarchies.at(field).Generalize(r.at(field), levels[f]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Every level vector under which the gates pass without suppression.
inline std::vector<std::vector<size_t>> ExhaustiveFeasibleLevels(
    const std::vector<Record>& records, const AnonymizationPolicy& policy) {
  const size_t n = policy.quasi_id_fields.size();
  std::vector<size_t> levels(n, 0);
  std::vector<std::vector<size_t>> feasible;
  for (;;) {
    if (BruteGates(BruteApply(records, policy, levels), policy)) {
      feasible.push_back(levels);
    }
    size_t f = 0;
    while (f < n) {
      const size_t top =
          policy.hierarchies.at(policy.quasi_id_fields[f]).max_level();
      if (++levels[f] <= top) break;
      levels[f] = 0;
      ++f;
    }
    if (f == n) break;
  }
  return feasible;
}

// Outcome the generalizer must reach when no level vector is feasible: the
// records surviving suppression of failing classes at the top levels, or
// infeasible when more than half would be removed.
struct SuppressionOracle {
  bool feasible = false;
  size_t suppressed = 0;
};

inline SuppressionOracle BruteSuppression(const std::vector<Record>& records,
                                          const AnonymizationPolicy& policy) {
  std::vector<size_t> top;
  for (const std::string& f : policy.quasi_id_fields) {
    top.push_back(policy.hierarchies.at(f).max_level());
  }
  const std::vector<Record> gen = BruteApply(records, policy, top);
  SuppressionOracle out;
  for (const Record& r : gen) {
    size_t peers = 0;
    for (const Record& s : gen) peers += SameProjection(r, s, policy.quasi_id_fields);
    const bool ok =
        peers >= policy.k &&
        BruteClassEntropy(gen, r, policy.quasi_id_fields,
                          policy.sensitive_field) +
                kEntropyTolerance >=
            std::log(policy.l);
    if (!ok) ++out.suppressed;
  }
  out.feasible = out.suppressed * 2 <= records.size();
  return out;
}

struct RandomInstance {
  std::vector<Record> records;
  AnonymizationPolicy policy;
};

// Up to 20 records, 1 to 3 quasi-ids and at most 5 distinct sensitive values.
inline RandomInstance MakeRandomInstance(Rng& rng) {
  static const std::vector<std::string> kZips = {
      "47601", "47602", "47655", "47677", "47702", "47788", "48001"};
  static const std::vector<std::string> kAges = {"23", "27", "31",
                                                 "38", "45", "52"};
  static const std::vector<std::string> kGenders = {"F", "M"};
  static const std::vector<std::string> kSensitive = {"flu", "asthma", "cold",
                                                      "ulcer", "gastritis"};
  static const std::vector<double> kLs = {1.0, 1.5, 2.0, 2.5, 3.0, 3.01};

  RandomInstance inst;
  AnonymizationPolicy& p = inst.policy;
  p.sensitive_field = "diagnosis";
  p.k = 1 + rng.Uniform(4);
  p.l = kLs[rng.Uniform(kLs.size())];
  p.min_pool_size = 1;

  std::vector<std::string> all = {"zip", "age", "gender"};
  rng.Shuffle(all.begin(), all.end());
  p.quasi_id_fields.assign(all.begin(), all.begin() + 1 + rng.Uniform(3));

  p.hierarchies["zip"].steps = {GeneralizationLevel::MaskSuffix(1),
                                GeneralizationLevel::MaskSuffix(3),
                                GeneralizationLevel::Suppress()};
  std::map<std::string, std::string> decades;
  for (const std::string& a : kAges) decades[a] = a.substr(0, 1) + "0s";
  p.hierarchies["age"].steps = {GeneralizationLevel::Table(decades),
                                GeneralizationLevel::Suppress()};
  p.hierarchies["gender"].steps = {GeneralizationLevel::Suppress()};

  const size_t n = rng.Uniform(21);
  const size_t zip_pool = 1 + rng.Uniform(kZips.size());
  const size_t age_pool = 1 + rng.Uniform(kAges.size());
  const size_t sens_pool = 1 + rng.Uniform(kSensitive.size());
  for (size_t i = 0; i < n; ++i) {
    Record r;
    r["zip"] = kZips[rng.Uniform(zip_pool)];
    r["age"] = kAges[rng.Uniform(age_pool)];
    r["gender"] = kGenders[rng.Uniform(2)];
    r["diagnosis"] = kSensitive[rng.Uniform(sens_pool)];
    inst.records.push_back(std::move(r));
  }
  return inst;
}

// Checks one instance against the library. Returns an empty string on
// agreement, otherwise a description of the first disagreement.
inline std::string CompareWithLibrary(const RandomInstance& inst) {
  const auto& p = inst.policy;
  auto k = CheckKAnonymity(inst.records, p.quasi_id_fields, p.k);
  if (!k.ok() || *k != BruteKAnonymous(inst.records, p.quasi_id_fields, p.k)) {
    return "k-anonymity gate disagrees";
  }
  auto l = EntropyLDiversity(inst.records, p.quasi_id_fields,
                             p.sensitive_field, p.l);
  if (!l.ok() || *l != BruteLDiverse(inst.records, p.quasi_id_fields,
                                     p.sensitive_field, p.l)) {
    return "l-diversity gate disagrees";
  }
  auto result = GeneralizeToPolicy(inst.records, p);
  if (!result.ok()) return "generalizer error: " + result.status().ToString();
  const auto feasible = ExhaustiveFeasibleLevels(inst.records, p);
  if (!feasible.empty()) {
    if (!result->feasible || result->suppressed != 0) {
      return "generalizer missed a feasible level vector";
    }
    bool listed = false;
    for (const auto& v : feasible) listed |= v == result->levels;
    if (!listed) return "generalizer levels not in the feasible set";
    if (result->records != BruteApply(inst.records, p, result->levels)) {
      return "generalized records differ from the chosen levels";
    }
    if (!BruteGates(result->records, p)) return "output fails the gates";
    return "";
  }
  const SuppressionOracle sup = BruteSuppression(inst.records, p);
  if (result->feasible != sup.feasible) {
    return "suppression feasibility disagrees";
  }
  if (result->suppressed != sup.suppressed) return "suppressed count differs";
  if (result->feasible && !BruteGates(result->records, p)) {
    return "suppressed output fails the gates";
  }
  return "";
}

}  // namespace dapriv::oracle

#endif  // DAPRIV_TESTS_ANONYMIZER_ORACLE_H_
