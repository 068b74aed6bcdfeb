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

#ifndef DAPRIV_EMERGENCY_H_
#define DAPRIV_EMERGENCY_H_

// Emergency contact storage. The server keeps each patient's snapshot sealed
// to the designated contact and holds no key that opens it. Every fetch,
// successful or not, is logged and signalled to the patient in the same
// step.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "dapriv/bytes.h"
#include "dapriv/crypto.h"
#include "dapriv/rng.h"

namespace dapriv {

struct AccessLogEntry {
  std::string accessor;
  uint64_t timestamp = 0;
  bool flag_raised = true;
};

struct AccessNotice {
  std::string patient;
  std::string accessor;
  uint64_t timestamp = 0;
  uint64_t version = 0;
};

struct EmergencySnapshot {
  uint64_t version = 0;
  crypto::SealedEnvelope ciphertext;
  std::vector<AccessLogEntry> access_log;
  std::string patient_notify_channel;
};

using NotifyFn = std::function<void(const AccessNotice&)>;

// FailedPrecondition when no contact has been designated.
absl::StatusOr<crypto::SealedEnvelope> SealSnapshot(
    ByteView data, const std::optional<crypto::BoxPublicKey>& contact,
    Rng& rng);

class EmergencyStorage {
 public:
  // The newest deposit becomes current; earlier ones stay in the history.
  const EmergencySnapshot& Deposit(const std::string& patient,
                                   crypto::SealedEnvelope sealed);

  // Appends to the current snapshot's access log and calls `notify` before
  // returning the ciphertext. NotFound if the patient has no snapshot.
  absl::StatusOr<crypto::SealedEnvelope> Fetch(const std::string& patient,
                                               const std::string& accessor,
                                               uint64_t timestamp,
                                               const NotifyFn& notify);

  const EmergencySnapshot* Current(const std::string& patient) const;
  const std::vector<EmergencySnapshot>* History(
      const std::string& patient) const;
  const std::map<std::string, std::vector<EmergencySnapshot>>& all() const {
    return snapshots_;
  }
  uint64_t notifications_sent() const { return notifications_sent_; }

 private:
  std::map<std::string, std::vector<EmergencySnapshot>> snapshots_;
  uint64_t notifications_sent_ = 0;
};

absl::StatusOr<const EmergencySnapshot*> EmergencyDeposit(
    EmergencyStorage& storage, const std::string& patient, ByteView data,
    const std::optional<crypto::BoxPublicKey>& contact, Rng& rng);

// Fetches and opens. A wrong key still leaves a log entry and a
// notification behind; the open failure is returned.
absl::StatusOr<Bytes> EmergencyAccess(EmergencyStorage& storage,
                                      const std::string& patient,
                                      const std::string& accessor,
                                      const crypto::EncryptionKeyPair& key,
                                      uint64_t timestamp,
                                      const NotifyFn& notify);

}  // namespace dapriv

#endif  // DAPRIV_EMERGENCY_H_
