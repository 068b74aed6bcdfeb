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

#include "dapriv/records.h"

#include "absl/strings/str_cat.h"
#include "dapriv/wire.h"

namespace dapriv {
using json = wire::Json;
using wire::ParseJson;
using wire::SignatureFromJson;
using wire::SignatureToJson;

bool IsExplicitIdentifier(std::string_view field) {
  return field == kFieldName || field == kFieldNationalId;
}

FieldMap MedicalRecord::Fields() const {
  FieldMap fields = sensitive;
  fields[kFieldName] = explicit_ids.name;
  fields[kFieldNationalId] = explicit_ids.national_id;
  fields[kFieldBirthDate] = quasi_ids.birth_date;
  fields[kFieldZip] = quasi_ids.zip;
  fields[kFieldGender] = quasi_ids.gender;
  return fields;
}

bool IsQuarantined(const MedicalRecord& record,
                   const CertificateRegistry& registry) {
  for (const ProvenanceEntry& entry : record.provenance) {
    if (registry.FindBySigner(entry.signature.signer_public) == nullptr) {
      return true;
    }
    auto ok = crypto::Verify(entry.payload, entry.signature,
                             entry.signature.signer_public);
    if (!ok.ok() || !*ok) return true;
  }
  return false;
}

absl::StatusOr<SanitizeOutcome> SanitizeRecord(
    const MedicalRecord& record, const std::set<std::string>& share_policy) {
  const FieldMap all = record.Fields();
  SanitizeOutcome out;
  for (const std::string& field : share_policy) {
    auto it = all.find(field);
    if (it == all.end()) {
      return absl::InvalidArgumentError(
          absl::StrCat("share policy names unknown field '", field, "'"));
    }
    if (IsExplicitIdentifier(field)) {
      out.warnings.push_back(absl::StrCat(
          "explicit identifier '", field, "' is never shared; dropped"));
      continue;
    }
    out.record.emplace(field, it->second);
  }
  return out;
}

Bytes Prescription::SignedPayload() const {
  json body = {{"kind", "prescription"},
               {"tests", tests},
               {"nonce", nonce},
               {"physician", physician_pub.Hex()}};
  return ToBytes(body.dump());
}

absl::StatusOr<Prescription> IssuePrescription(
    const crypto::SigningIdentity& physician, std::set<std::string> tests,
    Rng& rng) {
  if (tests.empty()) {
    return absl::InvalidArgumentError("prescription must name at least one test");
  }
  Prescription p;
  p.tests = std::move(tests);
  p.physician_pub = physician.public_part;
  std::array<uint8_t, 16> nonce;
  rng.Fill(nonce);
  p.nonce = HexEncode(nonce);
  p.signature = crypto::Sign(p.SignedPayload(), physician);
  return p;
}

absl::Status VerifyPrescription(const Prescription& prescription) {
  if (prescription.signature.signer_public != prescription.physician_pub) {
    return absl::UnauthenticatedError(
        "prescription signed by a key other than the named physician");
  }
  auto ok = crypto::Verify(prescription.SignedPayload(),
                           prescription.signature, prescription.physician_pub);
  if (!ok.ok()) return ok.status();
  if (!*ok) {
    return absl::UnauthenticatedError("prescription signature does not verify");
  }
  return absl::OkStatus();
}

Bytes ResultPointer::SignedPayload() const {
  json body = {{"kind", "result_pointer"},
               {"loc", location},
               {"sk", symmetric_key.Hex()}};
  return ToBytes(body.dump());
}

Bytes ResultPointer::Serialize() const {
  json body = {{"loc", location},
               {"sk", symmetric_key.Hex()},
               {"lab_signature", SignatureToJson(lab_signature)}};
  return ToBytes(body.dump());
}

absl::StatusOr<ResultPointer> ResultPointer::Parse(ByteView data) {
  auto j = ParseJson(data);
  if (!j.ok()) return j.status();
  if (!j->is_object() || !j->contains("loc") || !j->contains("sk") ||
      !j->contains("lab_signature") || !(*j)["loc"].is_string() ||
      !(*j)["sk"].is_string()) {
    return absl::InvalidArgumentError("result pointer is malformed");
  }
  ResultPointer out;
  out.location = (*j)["loc"].get<std::string>();
  auto key = crypto::SymmetricKey::FromHex((*j)["sk"].get<std::string>());
  if (!key.ok()) return key.status();
  out.symmetric_key = *key;
  auto sig = SignatureFromJson((*j)["lab_signature"]);
  if (!sig.ok()) return sig.status();
  out.lab_signature = *std::move(sig);
  return out;
}

Bytes ResultFile::Serialize() const {
  json body = {{"report", ToString(report)},
               {"lab_signature", SignatureToJson(lab_signature)}};
  return ToBytes(body.dump());
}

absl::StatusOr<ResultFile> ResultFile::Parse(ByteView data) {
  auto j = ParseJson(data);
  if (!j.ok()) return j.status();
  if (!j->is_object() || !j->contains("report") ||
      !(*j)["report"].is_string() || !j->contains("lab_signature")) {
    return absl::InvalidArgumentError("result file is malformed");
  }
  ResultFile out;
  out.report = ToBytes((*j)["report"].get<std::string>());
  auto sig = SignatureFromJson((*j)["lab_signature"]);
  if (!sig.ok()) return sig.status();
  out.lab_signature = *std::move(sig);
  return out;
}

Bytes MakeLabReport(const std::string& lab_ref, const FieldMap& measurements) {
  json body = {{"lab", lab_ref}, {"measurements", measurements}};
  return ToBytes(body.dump());
}

absl::StatusOr<FieldMap> ParseLabReport(ByteView report) {
  auto j = ParseJson(report);
  if (!j.ok()) return j.status();
  if (!j->is_object() || !j->contains("measurements") ||
      !(*j)["measurements"].is_object()) {
    return absl::InvalidArgumentError("lab report is malformed");
  }
  FieldMap out;
  for (const auto& [k, v] : (*j)["measurements"].items()) {
    if (!v.is_string()) {
      return absl::InvalidArgumentError("lab measurement is not a string");
    }
    out.emplace(k, v.get<std::string>());
  }
  return out;
}

Bytes SerializeFields(const FieldMap& fields) {
  return ToBytes(json(fields).dump());
}

absl::StatusOr<FieldMap> ParseFields(ByteView data) {
  auto j = ParseJson(data);
  if (!j.ok()) return j.status();
  return wire::FieldsFromJson(*j);
}


}  // namespace dapriv
