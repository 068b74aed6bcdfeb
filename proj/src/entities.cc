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

#include "dapriv/entities.h"

#include <array>
#include <cstdio>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace dapriv {
namespace {

using wire::Json;

std::string RandomToken(Rng& rng) {
  std::array<uint8_t, 8> raw;
  rng.Fill(raw);
  return HexEncode(raw);
}

std::string StatusText(const absl::Status& status) {
  return std::string(status.message());
}

// Store items travel as {"kind": "public_key", "key": hex} or
// {"kind": "envelope", "envelope": {...}}.
Json ItemToJson(const StoreItem& item) {
  if (const auto* key = std::get_if<crypto::BoxPublicKey>(&item)) {
    return {{"kind", "public_key"}, {"key", key->Hex()}};
  }
  return {{"kind", "envelope"},
          {"envelope",
           wire::EnvelopeToJson(std::get<crypto::SealedEnvelope>(item))}};
}

absl::StatusOr<StoreItem> ItemFromJson(const Json& j) {
  auto kind = wire::GetString(j, "kind");
  if (!kind.ok()) return kind.status();
  if (*kind == "public_key") {
    auto key = wire::GetKey<crypto::BoxPublicKey>(j, "key");
    if (!key.ok()) return key.status();
    return StoreItem(*key);
  }
  if (*kind == "envelope") {
    auto env_json = wire::GetObject(j, "envelope");
    if (!env_json.ok()) return env_json.status();
    auto env = wire::EnvelopeFromJson(*env_json);
    if (!env.ok()) return env.status();
    return StoreItem(*std::move(env));
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown store item kind '", *kind, "'"));
}

absl::StatusOr<crypto::SealedEnvelope> EnvelopeMember(const Json& body,
                                                      std::string_view key) {
  auto env_json = wire::GetObject(body, key);
  if (!env_json.ok()) return env_json.status();
  return wire::EnvelopeFromJson(*env_json);
}

absl::StatusOr<Bytes> HexMember(const Json& body, std::string_view key) {
  auto hex = wire::GetString(body, key);
  if (!hex.ok()) return hex.status();
  return HexDecode(*hex);
}

absl::StatusOr<std::set<std::string>> StringSet(const Json& body,
                                                std::string_view key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_array()) {
    return absl::InvalidArgumentError(
        absl::StrCat("member '", std::string(key), "' is not an array"));
  }
  std::set<std::string> out;
  for (const Json& v : *it) {
    if (!v.is_string()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "member '", std::string(key), "' holds a non-string value"));
    }
    out.insert(v.get<std::string>());
  }
  return out;
}

// Opens an envelope that must carry a valid signature by `expected_signer`.
absl::StatusOr<Bytes> OpenSignedBy(const crypto::SealedEnvelope& envelope,
                                   const crypto::EncryptionKeyPair& keys,
                                   const crypto::VerifyKey& expected_signer) {
  auto opened = crypto::Open(envelope, keys, crypto::SignaturePolicy::kRequired);
  if (!opened.ok()) return opened.status();
  if (opened->signature != crypto::SignatureStatus::kValid) {
    return absl::UnauthenticatedError("envelope signature invalid or missing");
  }
  if (!opened->signer.has_value() || *opened->signer != expected_signer) {
    return absl::UnauthenticatedError("envelope signed by an unexpected party");
  }
  return std::move(opened->plaintext);
}

absl::Status CheckSignature(ByteView payload, const crypto::Signature& sig,
                            const crypto::VerifyKey& expected_signer) {
  if (sig.signer_public != expected_signer) {
    return absl::UnauthenticatedError("signature names an unexpected signer");
  }
  auto ok = crypto::Verify(payload, sig, expected_signer);
  if (!ok.ok()) return ok.status();
  if (!*ok) return absl::UnauthenticatedError("signature does not verify");
  return absl::OkStatus();
}

}  // namespace

std::string PatientId(size_t index) { return absl::StrCat("patient:", index); }
std::string PhysicianId(size_t index) {
  return absl::StrCat("physician:", index);
}
std::string ContactId(size_t patient) {
  return absl::StrCat("contact:", patient);
}
std::string DirectoryEntityId(const std::string& directory_id) {
  return absl::StrCat("directory:", directory_id);
}

void ReportAbort(Outbox& out, const std::string& flow_id,
                 const std::string& session_id, const std::string& reason) {
  out.Send(kHarnessId, msg::kFlowOutcome,
           {{"flow_id", flow_id},
            {"session_id", session_id},
            {"completed", false},
            {"reason", reason},
            {"result_digest", ""}},
           session_id);
}

// ---------------------------------------------------------------------------
// Patient

PatientEntity::PatientEntity(std::string id, MedicalRecord record,
                             std::optional<std::string> emergency_contact,
                             KeyPool pool, crypto::SigningIdentity identity,
                             Rng rng, EntityContext context)
    : Entity(std::move(id), Role::kPatient),
      record_(std::move(record)),
      emergency_contact_(std::move(emergency_contact)),
      pool_(std::move(pool)),
      identity_(std::move(identity)),
      rng_(std::move(rng)),
      context_(context) {}

PatientEntity::LabFlowState* PatientEntity::FlowByRequest(
    const std::string& request_id) {
  for (auto& [id, flow] : flows_) {
    if (!flow.request_id.empty() && flow.request_id == request_id) return &flow;
  }
  return nullptr;
}

PatientEntity::LabFlowState* PatientEntity::FlowBySession(
    const std::string& session_id) {
  for (auto& [id, flow] : flows_) {
    if (!flow.session_id.empty() && flow.session_id == session_id) return &flow;
  }
  return nullptr;
}

PatientEntity::LabFlowState* PatientEntity::FlowByLocation(
    const std::string& location) {
  for (auto& [id, flow] : flows_) {
    if (flow.pointer.has_value() && flow.pointer->location == location &&
        !flow.completed && !flow.aborted) {
      return &flow;
    }
  }
  return nullptr;
}

void PatientEntity::Abort(LabFlowState& flow, const std::string& reason,
                          Outbox& out) {
  if (flow.aborted || flow.completed) return;
  flow.aborted = true;
  ReportAbort(out, flow.flow_id, flow.session_id, reason);
}

void PatientEntity::OnMessage(const Message& m, Outbox& out) {
  const Json& b = m.body;
  if (m.type == msg::kLabVisitPlan) {
    auto flow_id = wire::GetString(b, "flow_id");
    auto lab = wire::GetString(b, "lab_ref");
    auto physician = wire::GetString(b, "physician");
    if (!flow_id.ok() || !lab.ok() || !physician.ok()) return;
    auto ref = DirectoryRef::Parse(*lab);
    LabFlowState& flow = flows_[*flow_id];
    flow.flow_id = *flow_id;
    flow.physician = *physician;
    if (!ref.ok()) {
      Abort(flow, StatusText(ref.status()), out);
      return;
    }
    flow.lab = *ref;
    MaybeRequestSession(flow, out);
  } else if (m.type == msg::kPrescription) {
    OnPrescription(m, out);
  } else if (m.type == msg::kSessionGrant) {
    OnSessionGrant(m, out);
  } else if (m.type == msg::kSessionDenied) {
    auto request_id = wire::GetString(b, "request_id");
    if (!request_id.ok()) return;
    if (LabFlowState* flow = FlowByRequest(*request_id)) {
      Abort(*flow,
            absl::StrCat("session denied: ",
                         wire::GetString(b, "reason").value_or("")),
            out);
    }
  } else if (m.type == msg::kStoreWriteAck) {
    OnStoreWriteAck(m, out);
  } else if (m.type == msg::kStoreDenied) {
    if (LabFlowState* flow = FlowBySession(m.session_id)) {
      Abort(*flow, "store access denied", out);
    }
  } else if (m.type == msg::kResultReady) {
    auto slot = wire::GetUint(b, "slot");
    if (!slot.ok() || FlowBySession(m.session_id) == nullptr) return;
    out.Send(kAuthId, msg::kStoreRead,
             {{"session_id", m.session_id}, {"slot", *slot}}, m.session_id);
  } else if (m.type == msg::kStoreReadReply) {
    OnStoreReadReply(m, out);
  } else if (m.type == msg::kBlobContent) {
    OnBlobContent(m, out);
  } else if (m.type == msg::kBlobMissing) {
    auto location = wire::GetString(b, "location");
    if (!location.ok()) return;
    if (LabFlowState* flow = FlowByLocation(*location)) {
      Abort(*flow, "result blob missing", out);
    }
  } else if (m.type == msg::kResultAck) {
    OnResultAck(m, out);
  } else if (m.type == msg::kConsentPlan) {
    auto study = wire::GetString(b, "study");
    auto consent = wire::GetBool(b, "consent");
    auto bypass = wire::GetBool(b, "bypass");
    auto policy = StringSet(b, "share_policy");
    if (!study.ok() || !consent.ok() || !bypass.ok() || !policy.ok()) return;
    StudyState& s = studies_[*study];
    s.consent = *consent;
    s.bypass = *bypass;
    s.share_policy = *std::move(policy);
  } else if (m.type == msg::kForwardedResearchRequest) {
    OnResearchRequest(m, out);
  } else if (m.type == msg::kResearchChannelGrant) {
    OnResearchGrant(m, out);
  } else if (m.type == msg::kResearchDenied) {
    auto study = wire::GetString(b, "study");
    if (!study.ok()) return;
    StudyState& s = studies_[*study];
    s.outcome = absl::StrCat("denied: ",
                             wire::GetString(b, "reason").value_or(""));
    out.Send(kHarnessId, msg::kResearchOutcome,
             {{"study", *study}, {"patient", id()}, {"status", "denied"},
              {"reason", s.outcome}});
  } else if (m.type == msg::kEmergencyDepositKickoff) {
    OnEmergencyKickoff(m, out);
  } else if (m.type == msg::kEmergencyDepositAck) {
    out.Send(kHarnessId, msg::kDepositOutcome,
             {{"patient", id()}, {"success", true}, {"reason", ""}});
  } else if (m.type == msg::kEmergencyAccessNotice) {
    ++emergency_notices_;
  }
}

void PatientEntity::OnPrescription(const Message& m, Outbox& out) {
  auto flow_id = wire::GetString(m.body, "flow_id");
  if (!flow_id.ok()) return;
  auto p_json = wire::GetObject(m.body, "prescription");
  LabFlowState& flow = flows_[*flow_id];
  flow.flow_id = *flow_id;
  if (!p_json.ok()) {
    Abort(flow, "prescription missing", out);
    return;
  }
  auto p = wire::PrescriptionFromJson(*p_json);
  if (!p.ok()) {
    Abort(flow, StatusText(p.status()), out);
    return;
  }
  prescriptions_[*flow_id] = *std::move(p);
  MaybeRequestSession(flow, out);
}

void PatientEntity::MaybeRequestSession(LabFlowState& flow, Outbox& out) {
  if (flow.aborted || !flow.request_id.empty() || flow.physician.empty()) {
    return;
  }
  auto it = prescriptions_.find(flow.flow_id);
  if (it == prescriptions_.end()) return;
  flow.request_id = RandomToken(rng_);
  out.Send(kAuthId, msg::kAuthorizeLabRequest,
           {{"request_id", flow.request_id},
            {"prescription", wire::PrescriptionToJson(it->second)},
            {"lab_ref", flow.lab.Render()}});
}

void PatientEntity::OnSessionGrant(const Message& m, Outbox& out) {
  auto request_id = wire::GetString(m.body, "request_id");
  if (!request_id.ok()) return;
  LabFlowState* flow = FlowByRequest(*request_id);
  if (flow == nullptr || flow->aborted) return;
  auto session_id = wire::GetString(m.body, "session_id");
  auto lab_key = wire::GetKey<crypto::VerifyKey>(m.body, "lab_verify_key");
  if (!session_id.ok() || !lab_key.ok()) {
    Abort(*flow, "malformed session grant", out);
    return;
  }
  flow->session_id = *session_id;
  flow->lab_key = *lab_key;
  flow->deposited = pool_.SelectPublicKey();
  out.Send(kAuthId, msg::kStoreWrite,
           {{"session_id", flow->session_id},
            {"item", ItemToJson(flow->deposited->public_key)}},
           flow->session_id);
}

void PatientEntity::OnStoreWriteAck(const Message& m, Outbox& out) {
  if (LabFlowState* flow = FlowBySession(m.session_id)) {
    if (flow->aborted || !flow->specimen.empty()) return;
    flow->specimen = RandomToken(rng_);
    Json disclosed = Json::object();
    if (context_.token_mode == TokenMode::kBaselineSsn) {
      const FieldMap fields = record_.Fields();
      for (const char* f : {kFieldName, kFieldNationalId, kFieldBirthDate,
                            kFieldZip, kFieldGender}) {
        disclosed[f] = fields.at(f);
      }
    }
    out.Send(flow->lab.Render(), msg::kLabVisit,
             {{"session_id", flow->session_id},
              {"specimen", flow->specimen},
              {"disclosed_ids", disclosed}},
             flow->session_id);
    return;
  }
  for (auto& [study, s] : studies_) {
    if (s.session_id == m.session_id && !s.submitted) {
      s.submitted = true;
      s.outcome = "submitted";
      out.Send(kHarnessId, msg::kResearchOutcome,
               {{"study", study}, {"patient", id()}, {"status", "submitted"},
                {"reason", ""}});
    }
  }
}

void PatientEntity::OnStoreReadReply(const Message& m, Outbox& out) {
  LabFlowState* flow = FlowBySession(m.session_id);
  if (flow == nullptr || flow->aborted || !flow->deposited.has_value()) return;
  auto item_json = wire::GetObject(m.body, "item");
  if (!item_json.ok()) {
    Abort(*flow, "malformed store reply", out);
    return;
  }
  auto item = ItemFromJson(*item_json);
  if (!item.ok() || !std::holds_alternative<crypto::SealedEnvelope>(*item)) {
    Abort(*flow, "store reply does not hold an envelope", out);
    return;
  }
  auto key = pool_.FindPrivateFor(flow->deposited->public_key);
  if (!key.ok()) {
    Abort(*flow, StatusText(key.status()), out);
    return;
  }
  auto plain = OpenSignedBy(std::get<crypto::SealedEnvelope>(*item), key->keys,
                            *flow->lab_key);
  if (!plain.ok()) {
    Abort(*flow, absl::StrCat("result pointer rejected: ",
                              StatusText(plain.status())),
          out);
    return;
  }
  auto pointer = ResultPointer::Parse(*plain);
  if (!pointer.ok()) {
    Abort(*flow, StatusText(pointer.status()), out);
    return;
  }
  if (absl::Status s = CheckSignature(pointer->SignedPayload(),
                                      pointer->lab_signature, *flow->lab_key);
      !s.ok()) {
    Abort(*flow, absl::StrCat("pointer signature: ", StatusText(s)), out);
    return;
  }
  flow->pointer = *std::move(pointer);
  out.Send(kBlobStoreId, msg::kBlobGet, {{"location", flow->pointer->location}});
}

void PatientEntity::OnBlobContent(const Message& m, Outbox& out) {
  auto location = wire::GetString(m.body, "location");
  if (!location.ok()) return;
  LabFlowState* flow = FlowByLocation(*location);
  if (flow == nullptr) return;
  auto blob = HexMember(m.body, "blob");
  if (!blob.ok()) {
    Abort(*flow, "malformed blob", out);
    return;
  }
  auto file_bytes = crypto::SymmetricOpen(*blob, flow->pointer->symmetric_key);
  if (!file_bytes.ok()) {
    Abort(*flow, absl::StrCat("result blob rejected: ",
                              StatusText(file_bytes.status())),
          out);
    return;
  }
  auto file = ResultFile::Parse(*file_bytes);
  if (!file.ok()) {
    Abort(*flow, StatusText(file.status()), out);
    return;
  }
  if (absl::Status s =
          CheckSignature(file->report, file->lab_signature, *flow->lab_key);
      !s.ok()) {
    Abort(*flow, absl::StrCat("result signature: ", StatusText(s)), out);
    return;
  }
  Record(kLedgerResult, flow->flow_id, ToString(file->report));

  const Certificate* physician = context_.registry->Find(flow->physician);
  if (physician == nullptr) {
    Abort(*flow, "physician has no certificate", out);
    return;
  }
  const crypto::SealedEnvelope handoff = crypto::Seal(
      flow->pointer->Serialize(), physician->encryption_key, &identity_, rng_);
  out.Send(flow->physician, msg::kResultHandoff,
           {{"flow_id", flow->flow_id},
            {"envelope", wire::EnvelopeToJson(handoff)}});
}

void PatientEntity::OnResultAck(const Message& m, Outbox& out) {
  auto flow_id = wire::GetString(m.body, "flow_id");
  if (!flow_id.ok()) return;
  auto it = flows_.find(*flow_id);
  if (it == flows_.end()) return;
  LabFlowState& flow = it->second;
  if (flow.completed || flow.aborted || !flow.deposited.has_value()) return;
  // The key counts as used only once the whole exchange has completed.
  auto report = pool_.RecordUse(flow.deposited->id);
  if (!report.ok()) {
    Abort(flow, StatusText(report.status()), out);
    return;
  }
  flow.completed = true;
}

void PatientEntity::OnResearchRequest(const Message& m, Outbox& out) {
  auto study = wire::GetString(m.body, "study");
  auto researcher = wire::GetString(m.body, "researcher_ref");
  if (!study.ok() || !researcher.ok()) return;
  StudyState& s = studies_[*study];
  if (!s.consent) {
    s.outcome = "declined";
    out.Send(kHarnessId, msg::kResearchOutcome,
             {{"study", *study}, {"patient", id()}, {"status", "declined"},
              {"reason", ""}});
    return;
  }
  if (s.bypass) {
    auto sanitized = SanitizeRecord(record_, s.share_policy);
    const Certificate* cert = context_.registry->Find(*researcher);
    if (!sanitized.ok() || cert == nullptr || cert->role != Role::kResearcher) {
      s.outcome = "denied: researcher unknown";
      out.Send(kHarnessId, msg::kResearchOutcome,
               {{"study", *study}, {"patient", id()}, {"status", "denied"},
                {"reason", s.outcome}});
      return;
    }
    submissions_[*study] = sanitized->record;
    const crypto::SealedEnvelope env = crypto::Seal(
        SerializeFields(sanitized->record), cert->encryption_key, nullptr, rng_);
    out.Send(*researcher, msg::kDirectSubmission,
             {{"study", *study}, {"envelope", wire::EnvelopeToJson(env)}});
    s.submitted = true;
    s.outcome = "submitted_direct";
    out.Send(kHarnessId, msg::kResearchOutcome,
             {{"study", *study}, {"patient", id()},
              {"status", "submitted_direct"}, {"reason", ""}});
    return;
  }
  s.request_id = RandomToken(rng_);
  out.Send(kAuthId, msg::kVerifyResearcherRequest,
           {{"request_id", s.request_id},
            {"study", *study},
            {"researcher_ref", *researcher}});
}

void PatientEntity::OnResearchGrant(const Message& m, Outbox& out) {
  auto study = wire::GetString(m.body, "study");
  auto session_id = wire::GetString(m.body, "session_id");
  auto anonymizer_key =
      wire::GetKey<crypto::BoxPublicKey>(m.body, "anonymizer_key");
  if (!study.ok() || !session_id.ok() || !anonymizer_key.ok()) return;
  auto it = studies_.find(*study);
  if (it == studies_.end() || !it->second.consent || it->second.submitted) {
    return;
  }
  StudyState& s = it->second;
  auto sanitized = SanitizeRecord(record_, s.share_policy);
  if (!sanitized.ok()) {
    s.outcome = absl::StrCat("denied: ", StatusText(sanitized.status()));
    out.Send(kHarnessId, msg::kResearchOutcome,
             {{"study", *study}, {"patient", id()}, {"status", "denied"},
              {"reason", s.outcome}});
    return;
  }
  s.session_id = *session_id;
  submissions_[*study] = sanitized->record;
  // Unsigned on purpose: a signature would name the submitter.
  const crypto::SealedEnvelope env = crypto::Seal(
      SerializeFields(sanitized->record), *anonymizer_key, nullptr, rng_);
  out.Send(kAuthId, msg::kStoreWrite,
           {{"session_id", s.session_id}, {"item", ItemToJson(env)}},
           s.session_id);
}

void PatientEntity::OnEmergencyKickoff(const Message&, Outbox& out) {
  std::optional<crypto::BoxPublicKey> contact_key;
  if (emergency_contact_.has_value()) {
    if (const Certificate* c = context_.registry->Find(*emergency_contact_)) {
      contact_key = c->encryption_key;
    }
  }
  auto sealed =
      SealSnapshot(SerializeFields(record_.Fields()), contact_key, rng_);
  if (!sealed.ok()) {
    out.Send(kHarnessId, msg::kDepositOutcome,
             {{"patient", id()},
              {"success", false},
              {"reason", StatusText(sealed.status())}});
    return;
  }
  out.Send(kEmergencyServerId, msg::kEmergencyDeposit,
           {{"envelope", wire::EnvelopeToJson(*sealed)}});
}

// ---------------------------------------------------------------------------
// Physician

PhysicianEntity::PhysicianEntity(std::string id,
                                 crypto::SigningIdentity identity,
                                 crypto::EncryptionKeyPair keys,
                                 std::vector<std::string> patients, Rng rng,
                                 EntityContext context)
    : Entity(std::move(id), Role::kPhysician),
      identity_(std::move(identity)),
      keys_(keys),
      patients_(std::move(patients)),
      rng_(std::move(rng)),
      context_(context) {}

void PhysicianEntity::Fail(const std::string& flow_id,
                           const std::string& reason, Outbox& out) {
  ReportAbort(out, flow_id, "", reason);
}

void PhysicianEntity::OnMessage(const Message& m, Outbox& out) {
  const Json& b = m.body;
  if (m.type == msg::kConsultationKickoff) {
    auto flow_id = wire::GetString(b, "flow_id");
    auto patient = wire::GetString(b, "patient");
    auto tests = StringSet(b, "tests");
    if (!flow_id.ok() || !patient.ok() || !tests.ok()) return;
    if (auto ids = wire::GetObject(b, "patient_ids"); ids.ok()) {
      Record(kLedgerIdentity, *flow_id, ids->dump());
    }
    auto prescription = IssuePrescription(identity_, *std::move(tests), rng_);
    if (!prescription.ok()) {
      Fail(*flow_id, StatusText(prescription.status()), out);
      return;
    }
    flows_[*flow_id] = {*flow_id, *patient, std::nullopt};
    out.Send(*patient, msg::kPrescription,
             {{"flow_id", *flow_id},
              {"prescription", wire::PrescriptionToJson(*prescription)}});
  } else if (m.type == msg::kResultHandoff) {
    OnHandoff(m, out);
  } else if (m.type == msg::kBlobContent) {
    OnBlobContent(m, out);
  } else if (m.type == msg::kBlobMissing) {
    auto location = wire::GetString(b, "location");
    if (!location.ok()) return;
    auto it = flow_by_location_.find(*location);
    if (it != flow_by_location_.end()) {
      Fail(it->second, "result blob missing", out);
      flow_by_location_.erase(it);
    }
  } else if (m.type == msg::kResearchRequest) {
    auto study = wire::GetString(b, "study");
    auto researcher = wire::GetString(b, "researcher_ref");
    if (!study.ok() || !researcher.ok()) return;
    for (const std::string& patient : patients_) {
      out.Send(patient, msg::kForwardedResearchRequest,
               {{"study", *study}, {"researcher_ref", *researcher}});
    }
  }
}

void PhysicianEntity::OnHandoff(const Message& m, Outbox& out) {
  auto flow_id = wire::GetString(m.body, "flow_id");
  if (!flow_id.ok()) return;
  auto it = flows_.find(*flow_id);
  if (it == flows_.end() || it->second.patient != m.from) {
    Fail(*flow_id, "handoff from an unexpected sender", out);
    return;
  }
  const Certificate* patient = context_.registry->Find(m.from);
  auto env = EnvelopeMember(m.body, "envelope");
  if (patient == nullptr || !env.ok()) {
    Fail(*flow_id, "malformed handoff", out);
    return;
  }
  auto plain = OpenSignedBy(*env, keys_, patient->verify_key);
  if (!plain.ok()) {
    Fail(*flow_id,
         absl::StrCat("handoff rejected: ", StatusText(plain.status())), out);
    return;
  }
  auto pointer = ResultPointer::Parse(*plain);
  if (!pointer.ok()) {
    Fail(*flow_id, StatusText(pointer.status()), out);
    return;
  }
  const crypto::VerifyKey& lab_key = pointer->lab_signature.signer_public;
  if (!context_.registry->IsRegistered(lab_key, Role::kLab)) {
    Fail(*flow_id, "pointer not signed by a certified lab", out);
    return;
  }
  if (absl::Status s = CheckSignature(pointer->SignedPayload(),
                                      pointer->lab_signature, lab_key);
      !s.ok()) {
    Fail(*flow_id, absl::StrCat("pointer signature: ", StatusText(s)), out);
    return;
  }
  flow_by_location_[pointer->location] = *flow_id;
  it->second.pointer = *std::move(pointer);
  out.Send(kBlobStoreId, msg::kBlobGet,
           {{"location", it->second.pointer->location}});
}

void PhysicianEntity::OnBlobContent(const Message& m, Outbox& out) {
  auto location = wire::GetString(m.body, "location");
  if (!location.ok()) return;
  auto loc_it = flow_by_location_.find(*location);
  if (loc_it == flow_by_location_.end()) return;
  const std::string flow_id = loc_it->second;
  flow_by_location_.erase(loc_it);
  Pending& flow = flows_.at(flow_id);
  auto blob = HexMember(m.body, "blob");
  if (!blob.ok()) {
    Fail(flow_id, "malformed blob", out);
    return;
  }
  auto file_bytes = crypto::SymmetricOpen(*blob, flow.pointer->symmetric_key);
  if (!file_bytes.ok()) {
    Fail(flow_id,
         absl::StrCat("result blob rejected: ",
                      StatusText(file_bytes.status())),
         out);
    return;
  }
  auto file = ResultFile::Parse(*file_bytes);
  if (!file.ok()) {
    Fail(flow_id, StatusText(file.status()), out);
    return;
  }
  const crypto::VerifyKey& lab_key = flow.pointer->lab_signature.signer_public;
  if (absl::Status s =
          CheckSignature(file->report, file->lab_signature, lab_key);
      !s.ok()) {
    Fail(flow_id, absl::StrCat("result signature: ", StatusText(s)), out);
    return;
  }
  Record(kLedgerResult, flow_id, ToString(file->report));
  out.Send(kHarnessId, msg::kFlowOutcome,
           {{"flow_id", flow_id},
            {"session_id", ""},
            {"completed", true},
            {"reason", ""},
            {"result_digest", DigestHex(file->report)}});
  out.Send(flow.patient, msg::kResultAck, {{"flow_id", flow_id}});
}

// ---------------------------------------------------------------------------
// Lab

LabEntity::LabEntity(DirectoryRef ref, std::set<std::string> capabilities,
                     crypto::SigningIdentity identity, Rng rng,
                     EntityContext context)
    : Entity(ref.Render(), Role::kLab),
      ref_(std::move(ref)),
      capabilities_(std::move(capabilities)),
      identity_(std::move(identity)),
      rng_(std::move(rng)),
      context_(context) {}

FieldMap LabEntity::Measure(const std::set<std::string>& tests) {
  FieldMap out;
  for (const std::string& test : tests) {
    out[test] = absl::StrFormat("%.1f", 1.0 + 99.0 * rng_.UniformReal());
  }
  return out;
}

void LabEntity::OnMessage(const Message& m, Outbox& out) {
  const Json& b = m.body;
  if (m.type == msg::kLabSessionNotice) {
    if (m.from != kAuthId) return;
    auto tests = StringSet(b, "tests");
    if (!tests.ok()) return;
    sessions_[m.session_id].tests = *std::move(tests);
  } else if (m.type == msg::kLabVisit) {
    OnVisit(m, out);
  } else if (m.type == msg::kStoreReadReply) {
    OnKey(m, out);
  } else if (m.type == msg::kBlobPutAck) {
    OnBlobStored(m, out);
  } else if (m.type == msg::kStoreWriteAck) {
    auto slot = wire::GetUint(b, "slot");
    if (!slot.ok()) return;
    out.Send(kAuthId, msg::kResultReady,
             {{"session_id", m.session_id}, {"slot", *slot}}, m.session_id);
  } else if (m.type == msg::kStoreDenied) {
    ReportAbort(out, "", m.session_id, "lab store access denied");
  }
}

void LabEntity::OnVisit(const Message& m, Outbox& out) {
  auto it = sessions_.find(m.session_id);
  if (it == sessions_.end() || it->second.visited) {
    out.Send(m.from, msg::kVisitRejected, {{"session_id", m.session_id}},
             m.session_id);
    ReportAbort(out, "", m.session_id, "visit for an unknown session");
    return;
  }
  Session& s = it->second;
  s.visited = true;
  s.specimen = wire::GetString(m.body, "specimen").value_or("");
  if (auto ids = wire::GetObject(m.body, "disclosed_ids"); ids.ok()) {
    if (auto fields = wire::FieldsFromJson(*ids); fields.ok()) {
      s.disclosed = *std::move(fields);
    }
    if (!s.disclosed.empty()) {
      Record(kLedgerIdentity, m.session_id, ids->dump());
    }
  }
  out.Send(kAuthId, msg::kStoreRead,
           {{"session_id", m.session_id}, {"slot", 0}}, m.session_id);
}

void LabEntity::OnKey(const Message& m, Outbox& out) {
  auto it = sessions_.find(m.session_id);
  if (it == sessions_.end()) return;
  Session& s = it->second;
  auto item_json = wire::GetObject(m.body, "item");
  if (!item_json.ok()) return;
  auto item = ItemFromJson(*item_json);
  if (!item.ok() || !std::holds_alternative<crypto::BoxPublicKey>(*item)) {
    ReportAbort(out, "", m.session_id, "store slot 0 is not a public key");
    return;
  }
  s.patient_key = std::get<crypto::BoxPublicKey>(*item);

  FieldMap measurements = Measure(s.tests);
  measurements["specimen"] = s.specimen;
  ResultFile file;
  file.report = MakeLabReport(ref_.Render(), measurements);
  file.lab_signature = crypto::Sign(file.report, identity_);
  s.report_signature = file.lab_signature;
  Record(kLedgerLabResult, m.session_id, ToString(file.report));

  s.symmetric_key = crypto::GenerateSymmetricKey(rng_);
  const Bytes blob =
      crypto::SymmetricSeal(file.Serialize(), *s.symmetric_key, rng_);
  session_by_blob_[DigestHex(blob)] = m.session_id;
  out.Send(kBlobStoreId, msg::kBlobPut, {{"blob", HexEncode(blob)}});
}

void LabEntity::OnBlobStored(const Message& m, Outbox& out) {
  auto digest = wire::GetString(m.body, "digest");
  auto location = wire::GetString(m.body, "location");
  if (!digest.ok() || !location.ok()) return;
  auto it = session_by_blob_.find(*digest);
  if (it == session_by_blob_.end()) return;
  const std::string session_id = it->second;
  session_by_blob_.erase(it);
  Session& s = sessions_.at(session_id);
  s.location = *location;

  ResultPointer pointer;
  pointer.location = s.location;
  pointer.symmetric_key = *s.symmetric_key;
  pointer.lab_signature = crypto::Sign(pointer.SignedPayload(), identity_);
  const crypto::SealedEnvelope env =
      crypto::Seal(pointer.Serialize(), *s.patient_key, &identity_, rng_);
  out.Send(kAuthId, msg::kStoreWrite,
           {{"session_id", session_id}, {"item", ItemToJson(env)}},
           session_id);
}

// ---------------------------------------------------------------------------
// Authorization server

AuthServerEntity::AuthServerEntity(AuthorizationService service,
                                   AnonymizerInfo anonymizer,
                                   EntityContext context)
    : Entity(kAuthId, Role::kAuthServer),
      service_(std::move(service)),
      anonymizer_(std::move(anonymizer)),
      context_(context) {}

Role AuthServerEntity::RoleOf(const std::string& entity_id) const {
  const Certificate* cert = context_.registry->Find(entity_id);
  return cert == nullptr ? Role::kAdversary : cert->role;
}

void AuthServerEntity::OnMessage(const Message& m, Outbox& out) {
  if (m.type == msg::kAuthorizeLabRequest) {
    OnAuthorizeLab(m, out);
  } else if (m.type == msg::kVerifyResearcherRequest) {
    OnVerifyResearcher(m, out);
  } else if (m.type == msg::kDirectoryAnswer) {
    OnDirectoryAnswer(m, out);
  } else if (m.type == msg::kStoreWrite) {
    OnStoreWrite(m, out);
  } else if (m.type == msg::kStoreRead) {
    OnStoreRead(m, out);
  } else if (m.type == msg::kResultReady) {
    OnResultReady(m, out);
  } else if (m.type == msg::kReleaseBlocked) {
    auto study = wire::GetString(m.body, "study");
    auto status = wire::GetString(m.body, "status");
    if (study.ok() && status.ok()) blocked_[*study] = *status;
  }
}

void AuthServerEntity::OnAuthorizeLab(const Message& m, Outbox& out) {
  auto request_id = wire::GetString(m.body, "request_id");
  if (!request_id.ok()) return;
  auto deny = [&](const std::string& reason) {
    out.Send(m.from, msg::kSessionDenied,
             {{"request_id", *request_id}, {"reason", reason}});
  };
  auto p_json = wire::GetObject(m.body, "prescription");
  if (!p_json.ok()) return deny("prescription missing");
  auto prescription = wire::PrescriptionFromJson(*p_json);
  if (!prescription.ok()) return deny(StatusText(prescription.status()));
  if (absl::Status s = service_.CheckPrescription(*prescription); !s.ok()) {
    return deny(StatusText(s));
  }
  auto lab_text = wire::GetString(m.body, "lab_ref");
  if (!lab_text.ok()) return deny("lab reference missing");
  auto lab = DirectoryRef::Parse(*lab_text);
  if (!lab.ok()) return deny(StatusText(lab.status()));
  PendingQuery pending;
  pending.requester = m.from;
  pending.request_id = *request_id;
  pending.prescription = *std::move(prescription);
  pending.ref = *std::move(lab);
  Query(std::move(pending), out);
}

void AuthServerEntity::OnVerifyResearcher(const Message& m, Outbox& out) {
  auto request_id = wire::GetString(m.body, "request_id");
  auto study = wire::GetString(m.body, "study");
  auto ref_text = wire::GetString(m.body, "researcher_ref");
  if (!request_id.ok() || !study.ok() || !ref_text.ok()) return;
  auto ref = DirectoryRef::Parse(*ref_text);
  if (!ref.ok()) {
    out.Send(m.from, msg::kResearchDenied,
             {{"request_id", *request_id},
              {"study", *study},
              {"reason", StatusText(ref.status())}});
    return;
  }
  PendingQuery pending;
  pending.requester = m.from;
  pending.request_id = *request_id;
  pending.research = true;
  pending.study_id = *study;
  pending.ref = *std::move(ref);
  Query(std::move(pending), out);
}

void AuthServerEntity::Query(PendingQuery pending, Outbox& out) {
  const std::string directory = DirectoryEntityId(pending.ref.directory_id);
  const Certificate* cert = context_.registry->Find(directory);
  if (cert == nullptr || cert->role != Role::kDirectory) {
    Resolve(pending, DirectoryLookup{}, out);
    return;
  }
  const std::string query_id = absl::StrCat("q", next_query_++);
  out.Send(directory, msg::kDirectoryQuery,
           {{"query_id", query_id}, {"ref", pending.ref.Render()}});
  queries_.emplace(query_id, std::move(pending));
}

void AuthServerEntity::OnDirectoryAnswer(const Message& m, Outbox& out) {
  auto query_id = wire::GetString(m.body, "query_id");
  if (!query_id.ok()) return;
  auto it = queries_.find(*query_id);
  if (it == queries_.end()) return;
  const PendingQuery pending = std::move(it->second);
  queries_.erase(it);
  if (m.from != DirectoryEntityId(pending.ref.directory_id)) return;
  DirectoryLookup lookup;
  lookup.known_directory = wire::GetBool(m.body, "known_directory").value_or(false);
  if (auto entry_json = wire::GetObject(m.body, "entry"); entry_json.ok()) {
    if (auto entry = wire::EntryFromJson(*entry_json); entry.ok()) {
      lookup.entry = *std::move(entry);
    }
  }
  Resolve(pending, lookup, out);
}

void AuthServerEntity::Resolve(const PendingQuery& pending,
                               const DirectoryLookup& lookup, Outbox& out) {
  if (!pending.research) {
    auto session =
        service_.GrantLabSession(*pending.prescription, pending.ref, lookup);
    if (!session.ok()) {
      out.Send(pending.requester, msg::kSessionDenied,
               {{"request_id", pending.request_id},
                {"reason", StatusText(session.status())}});
      return;
    }
    grants_[session->patient_copy.value] = {*pending.prescription,
                                            pending.ref, pending.requester};
    out.Send(pending.requester, msg::kSessionGrant,
             {{"request_id", pending.request_id},
              {"session_id", session->patient_copy.value},
              {"lab_verify_key", lookup.entry->verify_key.Hex()}},
             session->patient_copy.value);
    out.Send(pending.ref.Render(), msg::kLabSessionNotice,
             {{"session_id", session->lab_copy.value},
              {"tests", session->tests}},
             session->lab_copy.value);
    return;
  }
  auto channel = service_.SetupResearchChannel(pending.study_id, pending.ref,
                                               lookup, anonymizer_);
  if (!channel.ok()) {
    out.Send(pending.requester, msg::kResearchDenied,
             {{"request_id", pending.request_id},
              {"study", pending.study_id},
              {"reason", StatusText(channel.status())}});
    return;
  }
  const std::string& session_id = channel->session_id.value;
  research_sessions_[session_id] = pending.study_id;
  if (announced_studies_.insert(pending.study_id).second) {
    out.Send(anonymizer_.entity_id, msg::kOpenAnonymizerChannel,
             {{"study", pending.study_id},
              {"session_id", session_id},
              {"researcher_ref", pending.ref.Render()}},
             session_id);
  }
  out.Send(pending.requester, msg::kResearchChannelGrant,
           {{"request_id", pending.request_id},
            {"study", pending.study_id},
            {"session_id", session_id},
            {"anonymizer_key", channel->anonymizer.public_key.Hex()}},
           session_id);
}

void AuthServerEntity::OnStoreWrite(const Message& m, Outbox& out) {
  auto deny = [&](const std::string& reason) {
    out.Send(m.from, msg::kStoreDenied,
             {{"session_id", m.session_id}, {"reason", reason}},
             m.session_id);
  };
  TempStore* store = service_.FindStore(SessionId{m.session_id});
  if (store == nullptr) return deny("unknown session");
  auto item_json = wire::GetObject(m.body, "item");
  if (!item_json.ok()) return deny("item missing");
  auto item = ItemFromJson(*item_json);
  if (!item.ok()) return deny(StatusText(item.status()));
  auto slot = store->Write(RoleOf(m.from), *std::move(item), m.from);
  if (!slot.ok()) return deny(StatusText(slot.status()));
  out.Send(m.from, msg::kStoreWriteAck,
           {{"session_id", m.session_id}, {"slot", *slot}}, m.session_id);
  if (research_sessions_.contains(m.session_id)) {
    out.Send(anonymizer_.entity_id, msg::kSubmissionNotice,
             {{"session_id", m.session_id}, {"slot", *slot}}, m.session_id);
  }
}

void AuthServerEntity::OnStoreRead(const Message& m, Outbox& out) {
  auto deny = [&](const std::string& reason) {
    out.Send(m.from, msg::kStoreDenied,
             {{"session_id", m.session_id}, {"reason", reason}},
             m.session_id);
  };
  TempStore* store = service_.FindStore(SessionId{m.session_id});
  if (store == nullptr) return deny("unknown session");
  auto slot = wire::GetUint(m.body, "slot");
  if (!slot.ok()) return deny("slot missing");
  auto item = store->Read(RoleOf(m.from), *slot, m.from);
  if (!item.ok()) return deny(StatusText(item.status()));
  out.Send(m.from, msg::kStoreReadReply,
           {{"session_id", m.session_id},
            {"slot", *slot},
            {"item", ItemToJson(*item)}},
           m.session_id);
}

void AuthServerEntity::OnResultReady(const Message& m, Outbox& out) {
  auto it = grants_.find(m.session_id);
  if (it == grants_.end() || it->second.lab.Render() != m.from) return;
  auto slot = wire::GetUint(m.body, "slot");
  if (!slot.ok()) return;
  out.Send(it->second.patient, msg::kResultReady,
           {{"session_id", m.session_id}, {"slot", *slot}}, m.session_id);
}

// ---------------------------------------------------------------------------
// Directory, blob store

DirectoryEntity::DirectoryEntity(Directory directory)
    : Entity(DirectoryEntityId(directory.id()), Role::kDirectory),
      directory_(std::move(directory)) {}

void DirectoryEntity::OnMessage(const Message& m, Outbox& out) {
  if (m.type != msg::kDirectoryQuery) return;
  auto query_id = wire::GetString(m.body, "query_id");
  auto ref_text = wire::GetString(m.body, "ref");
  if (!query_id.ok() || !ref_text.ok()) return;
  Json answer = {{"query_id", *query_id}, {"known_directory", false},
                 {"entry", nullptr}};
  if (auto ref = DirectoryRef::Parse(*ref_text);
      ref.ok() && ref->directory_id == directory_.id()) {
    answer["known_directory"] = true;
    if (const DirectoryEntry* entry = directory_.Find(ref->entry_id)) {
      answer["entry"] = wire::EntryToJson(*entry);
    }
  }
  out.Send(m.from, msg::kDirectoryAnswer, std::move(answer));
}

BlobStoreEntity::BlobStoreEntity() : Entity(kBlobStoreId, Role::kBlobStore) {}

void BlobStoreEntity::OnMessage(const Message& m, Outbox& out) {
  if (m.type == msg::kBlobPut) {
    auto blob = HexMember(m.body, "blob");
    if (!blob.ok()) return;
    const std::string digest = DigestHex(*blob);
    const std::string location = absl::StrCat("blob:", digest);
    blobs_[location] = *std::move(blob);
    out.Send(m.from, msg::kBlobPutAck,
             {{"location", location}, {"digest", digest}});
  } else if (m.type == msg::kBlobGet) {
    auto location = wire::GetString(m.body, "location");
    if (!location.ok()) return;
    auto it = blobs_.find(*location);
    if (it == blobs_.end()) {
      out.Send(m.from, msg::kBlobMissing, {{"location", *location}});
      return;
    }
    out.Send(m.from, msg::kBlobContent,
             {{"location", *location}, {"blob", HexEncode(it->second)}});
  }
}

// ---------------------------------------------------------------------------
// Anonymizer, researcher

AnonymizerEntity::AnonymizerEntity(crypto::EncryptionKeyPair keys,
                                   AnonymizationPolicy policy, Rng rng)
    : Entity(kAnonymizerId, Role::kAnonymizer),
      keys_(keys),
      policy_(std::move(policy)),
      rng_(std::move(rng)) {}

void AnonymizerEntity::OnMessage(const Message& m, Outbox& out) {
  const Json& b = m.body;
  if (m.type == msg::kOpenAnonymizerChannel) {
    if (m.from != kAuthId) return;
    auto study = wire::GetString(b, "study");
    auto researcher = wire::GetString(b, "researcher_ref");
    if (!study.ok() || !researcher.ok()) return;
    auto ref = DirectoryRef::Parse(*researcher);
    if (!ref.ok()) return;
    studies_.try_emplace(*study,
                         Study{m.session_id, *ref,
                               SubmissionPool(*study, policy_), false,
                               std::nullopt, 0});
    study_by_session_[m.session_id] = *study;
  } else if (m.type == msg::kSubmissionNotice) {
    auto slot = wire::GetUint(b, "slot");
    if (!slot.ok() || !study_by_session_.contains(m.session_id)) return;
    out.Send(kAuthId, msg::kStoreRead,
             {{"session_id", m.session_id}, {"slot", *slot}}, m.session_id);
  } else if (m.type == msg::kStoreReadReply) {
    auto sit = study_by_session_.find(m.session_id);
    if (sit == study_by_session_.end()) return;
    Study& study = studies_.at(sit->second);
    auto item_json = wire::GetObject(b, "item");
    if (!item_json.ok()) return;
    auto item = ItemFromJson(*item_json);
    if (!item.ok() || !std::holds_alternative<crypto::SealedEnvelope>(*item)) {
      return;
    }
    if (study.pool.closed()) return;
    study.pool.AddSealed(std::get<crypto::SealedEnvelope>(*std::move(item)));
    for (const FieldMap& r : study.pool.Ingest(keys_)) {
      Record(kLedgerResearchRecord, sit->second, ToString(SerializeFields(r)));
      ++study.submissions;
    }
    if (study.close_requested) TryRelease(study, sit->second, out);
  } else if (m.type == msg::kCloseStudy) {
    auto study_id = wire::GetString(b, "study");
    if (!study_id.ok()) return;
    auto it = studies_.find(*study_id);
    if (it == studies_.end()) {
      out.Send(kHarnessId, msg::kStudyOutcome,
               {{"study", *study_id},
                {"status", ReleaseStatusName(ReleaseStatus::kPoolTooSmall)},
                {"submissions", 0},
                {"released", 0},
                {"suppressed", 0}});
      return;
    }
    it->second.close_requested = true;
    TryRelease(it->second, *study_id, out);
  }
}

void AnonymizerEntity::TryRelease(Study& study, const std::string& study_id,
                                  Outbox& out) {
  if (study.pool.closed()) return;
  auto decision = study.pool.Release(rng_);
  if (!decision.ok()) {
    out.Send(kHarnessId, msg::kStudyOutcome,
             {{"study", study_id},
              {"status", "error"},
              {"reason", StatusText(decision.status())},
              {"submissions", study.submissions},
              {"released", 0},
              {"suppressed", 0}});
    return;
  }
  study.decision = *decision;
  size_t released = 0;
  if (decision->status == ReleaseStatus::kReleased) {
    const ReleasedBatch& batch = decision->batch;
    released = batch.records.size();
    Json records = Json::array();
    for (const FieldMap& r : batch.records) records.push_back(wire::FieldsToJson(r));
    out.Send(study.researcher.Render(), msg::kReleasedBatch,
             {{"study", study_id},
              {"quasi_id_fields", batch.quasi_id_fields},
              {"levels", batch.levels},
              {"suppressed", batch.suppressed},
              {"records", std::move(records)}});
  } else if (decision->status == ReleaseStatus::kInfeasible) {
    out.Send(kAuthId, msg::kReleaseBlocked,
             {{"study", study_id},
              {"status", ReleaseStatusName(decision->status)}});
  }
  out.Send(kHarnessId, msg::kStudyOutcome,
           {{"study", study_id},
            {"status", ReleaseStatusName(decision->status)},
            {"submissions", study.submissions},
            {"released", released},
            {"suppressed", decision->batch.suppressed}});
}

ResearcherEntity::ResearcherEntity(DirectoryRef ref,
                                   crypto::EncryptionKeyPair keys,
                                   EntityContext context)
    : Entity(ref.Render(), Role::kResearcher),
      ref_(std::move(ref)),
      keys_(keys),
      context_(context) {}

void ResearcherEntity::OnMessage(const Message& m, Outbox& out) {
  const Json& b = m.body;
  if (m.type == msg::kStudyKickoff) {
    auto study = wire::GetString(b, "study");
    auto physicians = StringSet(b, "physicians");
    if (!study.ok() || !physicians.ok()) return;
    for (const std::string& physician : *physicians) {
      out.Send(physician, msg::kResearchRequest,
               {{"study", *study}, {"researcher_ref", ref_.Render()}});
    }
  } else if (m.type == msg::kReleasedBatch) {
    if (m.from != kAnonymizerId) return;
    auto study = wire::GetString(b, "study");
    if (!study.ok()) return;
    ReleasedBatch batch;
    batch.study_id = *study;
    if (auto q = StringSet(b, "quasi_id_fields"); q.ok()) {
      // Preserve the sender's order rather than the set's.
      for (const Json& f : b["quasi_id_fields"]) {
        batch.quasi_id_fields.push_back(f.get<std::string>());
      }
    }
    if (b.contains("levels") && b["levels"].is_array()) {
      for (const Json& l : b["levels"]) {
        if (l.is_number_unsigned()) batch.levels.push_back(l.get<size_t>());
      }
    }
    batch.suppressed = wire::GetUint(b, "suppressed").value_or(0);
    if (b.contains("records") && b["records"].is_array()) {
      for (const Json& r : b["records"]) {
        auto fields = wire::FieldsFromJson(r);
        if (!fields.ok()) continue;
        Record(kLedgerReleasedRecord, *study,
               ToString(SerializeFields(*fields)));
        batch.records.push_back(*std::move(fields));
      }
    }
    releases_[*study].push_back(std::move(batch));
  } else if (m.type == msg::kDirectSubmission) {
    auto study = wire::GetString(b, "study");
    auto env = EnvelopeMember(b, "envelope");
    if (!study.ok() || !env.ok()) return;
    auto opened = crypto::Open(*env, keys_);
    if (!opened.ok()) return;
    auto fields = ParseFields(opened->plaintext);
    if (!fields.ok()) return;
    Record(kLedgerResearchRecord, *study, ToString(opened->plaintext));
    direct_[*study][m.from] = *std::move(fields);
  }
  (void)context_;
}

// ---------------------------------------------------------------------------
// Emergency access

EmergencyServerEntity::EmergencyServerEntity()
    : Entity(kEmergencyServerId, Role::kEmergencyServer) {}

void EmergencyServerEntity::OnMessage(const Message& m, Outbox& out) {
  if (m.type == msg::kEmergencyDeposit) {
    auto env = EnvelopeMember(m.body, "envelope");
    if (!env.ok()) return;
    const EmergencySnapshot& snap = storage_.Deposit(m.from, *std::move(env));
    out.Send(m.from, msg::kEmergencyDepositAck, {{"version", snap.version}});
  } else if (m.type == msg::kEmergencyFetch) {
    auto patient = wire::GetString(m.body, "patient");
    if (!patient.ok()) return;
    uint64_t version = 0;
    if (const EmergencySnapshot* current = storage_.Current(*patient)) {
      version = current->version;
    }
    // The notice is queued before the reply, so the patient hears about the
    // read no later than the reader gets the data.
    auto sealed = storage_.Fetch(
        *patient, m.from, m.timestamp, [&](const AccessNotice& notice) {
          out.Send(notice.patient, msg::kEmergencyAccessNotice,
                   {{"accessor", notice.accessor},
                    {"timestamp", notice.timestamp},
                    {"version", notice.version}});
        });
    if (!sealed.ok()) {
      out.Send(m.from, msg::kEmergencyMissing, {{"patient", *patient}});
      return;
    }
    out.Send(m.from, msg::kEmergencySnapshot,
             {{"patient", *patient},
              {"version", version},
              {"envelope", wire::EnvelopeToJson(*sealed)}});
  }
}

EmergencyContactEntity::EmergencyContactEntity(std::string id,
                                               crypto::EncryptionKeyPair keys)
    : Entity(std::move(id), Role::kEmergencyContact), keys_(keys) {}

void EmergencyContactEntity::OnMessage(const Message& m, Outbox& out) {
  auto report = [&](const std::string& patient, bool success,
                    const std::string& reason) {
    out.Send(kHarnessId, msg::kEmergencyOutcome,
             {{"patient", patient},
              {"accessor", id()},
              {"success", success},
              {"reason", reason}});
  };
  if (m.type == msg::kEmergencyAccessKickoff) {
    auto patient = wire::GetString(m.body, "patient");
    if (!patient.ok()) return;
    out.Send(kEmergencyServerId, msg::kEmergencyFetch, {{"patient", *patient}});
  } else if (m.type == msg::kEmergencySnapshot) {
    auto patient = wire::GetString(m.body, "patient");
    auto env = EnvelopeMember(m.body, "envelope");
    if (!patient.ok() || !env.ok()) return;
    auto opened = crypto::Open(*env, keys_);
    if (!opened.ok()) {
      report(*patient, false, StatusText(opened.status()));
      return;
    }
    Record(kLedgerEmergencyData, *patient, ToString(opened->plaintext));
    report(*patient, true, "");
  } else if (m.type == msg::kEmergencyMissing) {
    report(wire::GetString(m.body, "patient").value_or(""), false,
           "no snapshot");
  }
}

MitmEntity::MitmEntity(crypto::EncryptionKeyPair keys)
    : Entity(kMitmId, Role::kAdversary), keys_(keys) {}

void MitmEntity::OnMessage(const Message& m, Outbox& out) {
  if (m.type == msg::kMitmProbe) {
    auto session_id = wire::GetString(m.body, "session_id");
    if (!session_id.ok()) return;
    for (uint64_t slot : {0u, 1u}) {
      out.Send(kAuthId, msg::kStoreRead,
               {{"session_id", *session_id}, {"slot", slot}}, *session_id);
    }
  } else if (m.type == msg::kStoreDenied) {
    ++denials_;
  } else if (m.type == msg::kStoreReadReply) {
    // Only reachable if the store's access control failed.
    auto item_json = wire::GetObject(m.body, "item");
    if (!item_json.ok()) return;
    auto item = ItemFromJson(*item_json);
    if (!item.ok() || !std::holds_alternative<crypto::SealedEnvelope>(*item)) {
      return;
    }
    auto opened =
        crypto::Open(std::get<crypto::SealedEnvelope>(*item), keys_);
    if (opened.ok()) {
      Record("stolen_pointer", m.session_id, ToString(opened->plaintext));
    }
  }
}

HarnessSink::HarnessSink() : Entity(kHarnessId, Role::kHarness) {}

void HarnessSink::OnMessage(const Message& m, Outbox&) {
  received_.push_back(m);
}

}  // namespace dapriv
