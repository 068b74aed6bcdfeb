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

#include "dapriv/emergency.h"

#include "absl/strings/str_cat.h"

namespace dapriv {

absl::StatusOr<crypto::SealedEnvelope> SealSnapshot(
    ByteView data, const std::optional<crypto::BoxPublicKey>& contact,
    Rng& rng) {
  if (!contact.has_value()) {
    return absl::FailedPreconditionError(
        "no emergency contact has been designated");
  }
  return crypto::Seal(data, *contact, nullptr, rng);
}

const EmergencySnapshot& EmergencyStorage::Deposit(
    const std::string& patient, crypto::SealedEnvelope sealed) {
  auto& history = snapshots_[patient];
  EmergencySnapshot snap;
  snap.version = history.size() + 1;
  snap.ciphertext = std::move(sealed);
  snap.patient_notify_channel = patient;
  history.push_back(std::move(snap));
  return history.back();
}

absl::StatusOr<crypto::SealedEnvelope> EmergencyStorage::Fetch(
    const std::string& patient, const std::string& accessor,
    uint64_t timestamp, const NotifyFn& notify) {
  auto it = snapshots_.find(patient);
  if (it == snapshots_.end() || it->second.empty()) {
    return absl::NotFoundError(
        absl::StrCat("no emergency snapshot for ", patient));
  }
  EmergencySnapshot& current = it->second.back();
  current.access_log.push_back({accessor, timestamp, true});
  ++notifications_sent_;
  if (notify) {
    notify({current.patient_notify_channel, accessor, timestamp,
            current.version});
  }
  return current.ciphertext;
}

const EmergencySnapshot* EmergencyStorage::Current(
    const std::string& patient) const {
  auto it = snapshots_.find(patient);
  if (it == snapshots_.end() || it->second.empty()) return nullptr;
  return &it->second.back();
}

const std::vector<EmergencySnapshot>* EmergencyStorage::History(
    const std::string& patient) const {
  auto it = snapshots_.find(patient);
  return it == snapshots_.end() ? nullptr : &it->second;
}

absl::StatusOr<const EmergencySnapshot*> EmergencyDeposit(
    EmergencyStorage& storage, const std::string& patient, ByteView data,
    const std::optional<crypto::BoxPublicKey>& contact, Rng& rng) {
  auto sealed = SealSnapshot(data, contact, rng);
  if (!sealed.ok()) return sealed.status();
  return &storage.Deposit(patient, *std::move(sealed));
}

absl::StatusOr<Bytes> EmergencyAccess(EmergencyStorage& storage,
                                      const std::string& patient,
                                      const std::string& accessor,
                                      const crypto::EncryptionKeyPair& key,
                                      uint64_t timestamp,
                                      const NotifyFn& notify) {
  auto sealed = storage.Fetch(patient, accessor, timestamp, notify);
  if (!sealed.ok()) return sealed.status();
  auto opened = crypto::Open(*sealed, key);
  if (!opened.ok()) return opened.status();
  return std::move(opened->plaintext);
}

}  // namespace dapriv
