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

#ifndef DAPRIV_COORDINATION_H_
#define DAPRIV_COORDINATION_H_

// The authorization server and the temporary communication stores it
// creates. The server brokers identifiers and keys only; it never holds
// medical plaintext.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dapriv/certificates.h"
#include "dapriv/crypto.h"
#include "dapriv/directory.h"
#include "dapriv/records.h"
#include "dapriv/rng.h"

namespace dapriv {

// 128-bit random identifier rendered as hex.
struct SessionId {
  std::string value;

  friend auto operator<=>(const SessionId&, const SessionId&) = default;
  friend bool operator==(const SessionId&, const SessionId&) = default;
};

enum class Access : uint8_t { kNone = 0, kRead = 1, kWrite = 2, kReadWrite = 3 };

inline bool Allows(Access granted, Access wanted) {
  return (static_cast<uint8_t>(granted) & static_cast<uint8_t>(wanted)) ==
         static_cast<uint8_t>(wanted);
}

using Acl = std::map<Role, Access>;
using StoreItem = std::variant<crypto::BoxPublicKey, crypto::SealedEnvelope>;

enum class StoreAction { kRead, kWrite };

struct StoreSlot {
  Role writer_role;
  StoreItem item;
};

// One attempted access, kept for auditing.
struct StoreAccess {
  std::string accessor;
  Role role;
  StoreAction action;
  std::optional<size_t> slot;
  bool permitted = false;  // acl allowed the action
  bool succeeded = false;  // and the operation completed
};

class TempStore {
 public:
  TempStore(SessionId session_id, Acl acl, std::string created_by);

  const SessionId& session_id() const { return session_id_; }
  const Acl& acl() const { return acl_; }
  const std::string& created_by() const { return created_by_; }
  size_t size() const { return slots_.size(); }
  const std::vector<StoreSlot>& slots() const { return slots_; }
  const std::vector<StoreAccess>& journal() const { return journal_; }

  // PermissionDenied when the acl forbids the action; the attempt is
  // journaled either way.
  absl::StatusOr<size_t> Write(Role role, StoreItem item,
                               std::string accessor = {});
  // NotFound for an empty slot.
  absl::StatusOr<StoreItem> Read(Role role, size_t slot,
                                 std::string accessor = {});

 private:
  SessionId session_id_;
  Acl acl_;
  std::string created_by_;
  std::vector<StoreSlot> slots_;
  std::vector<StoreAccess> journal_;
};

Acl LabSessionAcl();
Acl ResearchSubmissionAcl();

// Both parties receive the same identifier through separate messages.
struct LabSession {
  SessionId patient_copy;
  SessionId lab_copy;
  DirectoryRef lab;
  std::set<std::string> tests;
};

struct AnonymizerInfo {
  std::string entity_id;
  crypto::BoxPublicKey public_key;
};

struct ResearchChannel {
  std::string study_id;
  DirectoryRef researcher;
  SessionId session_id;
  AnonymizerInfo anonymizer;
};

class AuthorizationService {
 public:
  AuthorizationService(std::string id, Rng rng);

  const std::string& id() const { return id_; }

  void RegisterPhysician(const crypto::VerifyKey& key);

  // Signature, physician registration and nonce freshness. Does not consume
  // the nonce.
  absl::Status CheckPrescription(const Prescription& prescription) const;

  // Creates the lab session for an already checked prescription, given the
  // directory's answer about `lab`. Consumes the prescription nonce.
  absl::StatusOr<LabSession> GrantLabSession(const Prescription& prescription,
                                             const DirectoryRef& lab,
                                             const DirectoryLookup& lookup);

  absl::StatusOr<LabSession> AuthorizeLabSession(
      const Prescription& prescription, const DirectoryRef& lab,
      const DirectoryService& directories);

  // One submission store per study; later calls for the same study return the
  // existing channel.
  absl::StatusOr<ResearchChannel> SetupResearchChannel(
      const std::string& study_id, const DirectoryRef& researcher,
      const DirectoryLookup& lookup, const AnonymizerInfo& anonymizer);

  absl::StatusOr<ResearchChannel> SetupResearchChannel(
      const std::string& study_id, const DirectoryRef& researcher,
      const DirectoryService& directories, const AnonymizerInfo& anonymizer);

  const ResearchChannel* FindChannel(const std::string& study_id) const;
  TempStore* FindStore(const SessionId& id);
  const TempStore* FindStore(const SessionId& id) const;
  const std::map<SessionId, TempStore>& stores() const { return stores_; }

 private:
  SessionId NewSessionId();
  TempStore& CreateStore(Acl acl);

  std::string id_;
  Rng rng_;
  std::set<crypto::VerifyKey> physicians_;
  std::set<std::string> used_nonces_;
  std::map<SessionId, TempStore> stores_;
  std::map<std::string, ResearchChannel> channels_;
};

absl::Status VerificationStatus(VerificationOutcome outcome,
                                const DirectoryRef& ref);

}  // namespace dapriv

#endif  // DAPRIV_COORDINATION_H_
