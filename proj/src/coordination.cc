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

#include "dapriv/coordination.h"

#include <array>

#include "absl/strings/str_cat.h"

namespace dapriv {

TempStore::TempStore(SessionId session_id, Acl acl, std::string created_by)
    : session_id_(std::move(session_id)),
      acl_(std::move(acl)),
      created_by_(std::move(created_by)) {}

absl::StatusOr<size_t> TempStore::Write(Role role, StoreItem item,
                                        std::string accessor) {
  StoreAccess access{std::move(accessor), role, StoreAction::kWrite,
                     std::nullopt};
  auto it = acl_.find(role);
  access.permitted = it != acl_.end() && Allows(it->second, Access::kWrite);
  if (!access.permitted) {
    journal_.push_back(std::move(access));
    return absl::PermissionDeniedError(absl::StrCat(
        std::string(RoleName(role)), " may not write to this store"));
  }
  access.slot = slots_.size();
  access.succeeded = true;
  journal_.push_back(std::move(access));
  slots_.push_back({role, std::move(item)});
  return slots_.size() - 1;
}

absl::StatusOr<StoreItem> TempStore::Read(Role role, size_t slot,
                                          std::string accessor) {
  StoreAccess access{std::move(accessor), role, StoreAction::kRead, slot};
  auto it = acl_.find(role);
  access.permitted = it != acl_.end() && Allows(it->second, Access::kRead);
  if (!access.permitted) {
    journal_.push_back(std::move(access));
    return absl::PermissionDeniedError(absl::StrCat(
        std::string(RoleName(role)), " may not read from this store"));
  }
  if (slot >= slots_.size()) {
    journal_.push_back(std::move(access));
    return absl::NotFoundError(absl::StrCat("slot ", slot, " is empty"));
  }
  access.succeeded = true;
  journal_.push_back(std::move(access));
  return slots_[slot].item;
}

Acl LabSessionAcl() {
  return {{Role::kPatient, Access::kReadWrite}, {Role::kLab, Access::kReadWrite}};
}

Acl ResearchSubmissionAcl() {
  return {{Role::kPatient, Access::kWrite}, {Role::kAnonymizer, Access::kRead}};
}

absl::Status VerificationStatus(VerificationOutcome outcome,
                                const DirectoryRef& ref) {
  const std::string what =
      absl::StrCat(ref.Render(), ": ", std::string(OutcomeName(outcome)));
  switch (outcome) {
    case VerificationOutcome::kVerified:
      return absl::OkStatus();
    case VerificationOutcome::kUnknownDirectory:
    case VerificationOutcome::kUnknownEntry:
      return absl::NotFoundError(what);
    case VerificationOutcome::kKindMismatch:
    case VerificationOutcome::kMissingCapability:
      return absl::FailedPreconditionError(what);
  }
  return absl::InternalError(what);
}

AuthorizationService::AuthorizationService(std::string id, Rng rng)
    : id_(std::move(id)), rng_(std::move(rng)) {}

void AuthorizationService::RegisterPhysician(const crypto::VerifyKey& key) {
  physicians_.insert(key);
}

absl::Status AuthorizationService::CheckPrescription(
    const Prescription& prescription) const {
  if (!physicians_.contains(prescription.physician_pub)) {
    return absl::PermissionDeniedError(
        "prescription names an unregistered physician");
  }
  if (absl::Status s = VerifyPrescription(prescription); !s.ok()) return s;
  if (used_nonces_.contains(prescription.nonce)) {
    return absl::AlreadyExistsError("prescription nonce was already used");
  }
  return absl::OkStatus();
}

SessionId AuthorizationService::NewSessionId() {
  for (;;) {
    std::array<uint8_t, 16> raw;
    rng_.Fill(raw);
    SessionId id{HexEncode(raw)};
    if (!stores_.contains(id)) return id;
  }
}

TempStore& AuthorizationService::CreateStore(Acl acl) {
  SessionId id = NewSessionId();
  SessionId key = id;
  return stores_.emplace(std::move(key), TempStore(std::move(id), std::move(acl), id_))
      .first->second;
}

absl::StatusOr<LabSession> AuthorizationService::GrantLabSession(
    const Prescription& prescription, const DirectoryRef& lab,
    const DirectoryLookup& lookup) {
  if (used_nonces_.contains(prescription.nonce)) {
    return absl::AlreadyExistsError("prescription nonce was already used");
  }
  if (absl::Status s =
          VerificationStatus(EvaluateLab(lookup, prescription.tests), lab);
      !s.ok()) {
    return s;
  }
  used_nonces_.insert(prescription.nonce);
  TempStore& store = CreateStore(LabSessionAcl());
  return LabSession{store.session_id(), store.session_id(), lab,
                    prescription.tests};
}

absl::StatusOr<LabSession> AuthorizationService::AuthorizeLabSession(
    const Prescription& prescription, const DirectoryRef& lab,
    const DirectoryService& directories) {
  if (absl::Status s = CheckPrescription(prescription); !s.ok()) return s;
  return GrantLabSession(prescription, lab, directories.Lookup(lab));
}

absl::StatusOr<ResearchChannel> AuthorizationService::SetupResearchChannel(
    const std::string& study_id, const DirectoryRef& researcher,
    const DirectoryLookup& lookup, const AnonymizerInfo& anonymizer) {
  if (absl::Status s =
          VerificationStatus(EvaluateResearcher(lookup), researcher);
      !s.ok()) {
    return s;
  }
  if (const ResearchChannel* existing = FindChannel(study_id)) {
    if (existing->researcher != researcher) {
      return absl::FailedPreconditionError(
          absl::StrCat("study ", study_id, " belongs to another researcher"));
    }
    return *existing;
  }
  TempStore& store = CreateStore(ResearchSubmissionAcl());
  ResearchChannel channel{study_id, researcher, store.session_id(), anonymizer};
  channels_.emplace(study_id, channel);
  return channel;
}

absl::StatusOr<ResearchChannel> AuthorizationService::SetupResearchChannel(
    const std::string& study_id, const DirectoryRef& researcher,
    const DirectoryService& directories, const AnonymizerInfo& anonymizer) {
  return SetupResearchChannel(study_id, researcher,
                              directories.Lookup(researcher), anonymizer);
}

const ResearchChannel* AuthorizationService::FindChannel(
    const std::string& study_id) const {
  auto it = channels_.find(study_id);
  return it == channels_.end() ? nullptr : &it->second;
}

TempStore* AuthorizationService::FindStore(const SessionId& id) {
  auto it = stores_.find(id);
  return it == stores_.end() ? nullptr : &it->second;
}

const TempStore* AuthorizationService::FindStore(const SessionId& id) const {
  auto it = stores_.find(id);
  return it == stores_.end() ? nullptr : &it->second;
}

}  // namespace dapriv
