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

#ifndef DAPRIV_RECORDS_H_
#define DAPRIV_RECORDS_H_

// Clinical data units exchanged by the entities: the patient's medical
// record, signed prescriptions, and lab result pointers/files.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dapriv/bytes.h"
#include "dapriv/certificates.h"
#include "dapriv/crypto.h"
#include "dapriv/rng.h"

namespace dapriv {

// Flat field-name -> value view of a record. Also the unit the anonymizer
// works on.
using FieldMap = std::map<std::string, std::string>;

inline constexpr char kFieldName[] = "name";
inline constexpr char kFieldNationalId[] = "ssn";
inline constexpr char kFieldBirthDate[] = "birth_date";
inline constexpr char kFieldZip[] = "zip";
inline constexpr char kFieldGender[] = "gender";

bool IsExplicitIdentifier(std::string_view field);

struct ExplicitIds {
  std::string name;
  std::string national_id;
};

struct QuasiIds {
  std::string birth_date;
  std::string zip;
  std::string gender;
};

struct ProvenanceEntry {
  Bytes payload;
  crypto::Signature signature;
};

struct MedicalRecord {
  ExplicitIds explicit_ids;
  QuasiIds quasi_ids;
  std::map<std::string, std::string> sensitive;
  std::vector<ProvenanceEntry> provenance;

  FieldMap Fields() const;
};

// A record is quarantined when any provenance signature fails to verify or
// was made by a key the certifying authority does not know.
bool IsQuarantined(const MedicalRecord& record,
                   const CertificateRegistry& registry);

struct SanitizeOutcome {
  FieldMap record;
  std::vector<std::string> warnings;
};

// Keeps exactly the policy fields. Explicit identifiers are always dropped;
// asking for one adds a warning instead of an error. Unknown field names are
// InvalidArgument.
absl::StatusOr<SanitizeOutcome> SanitizeRecord(
    const MedicalRecord& record, const std::set<std::string>& share_policy);

struct Prescription {
  std::set<std::string> tests;
  crypto::VerifyKey physician_pub;
  std::string nonce;
  crypto::Signature signature;

  // Canonical bytes covered by the signature.
  Bytes SignedPayload() const;
};

absl::StatusOr<Prescription> IssuePrescription(
    const crypto::SigningIdentity& physician, std::set<std::string> tests,
    Rng& rng);

// Unauthenticated when the signature does not match; InvalidArgument when it
// cannot be decoded.
absl::Status VerifyPrescription(const Prescription& prescription);

// What the lab leaves for the patient: where the encrypted result lives and
// the key that opens it.
struct ResultPointer {
  std::string location;
  crypto::SymmetricKey symmetric_key;
  crypto::Signature lab_signature;

  // Canonical bytes the lab signs: location and key, not the signature.
  Bytes SignedPayload() const;
  Bytes Serialize() const;
  static absl::StatusOr<ResultPointer> Parse(ByteView data);
};

// Plaintext of a stored result: the lab's report and its signature over it.
struct ResultFile {
  Bytes report;
  crypto::Signature lab_signature;

  Bytes Serialize() const;
  static absl::StatusOr<ResultFile> Parse(ByteView data);
};

// Canonical lab report body.
Bytes MakeLabReport(const std::string& lab_ref, const FieldMap& measurements);
absl::StatusOr<FieldMap> ParseLabReport(ByteView report);

Bytes SerializeFields(const FieldMap& fields);
absl::StatusOr<FieldMap> ParseFields(ByteView data);

}  // namespace dapriv

#endif  // DAPRIV_RECORDS_H_
