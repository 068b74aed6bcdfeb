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

#ifndef DAPRIV_CERTIFICATES_H_
#define DAPRIV_CERTIFICATES_H_

// The certifying authority: a trusted, read-only registry of every entity's
// long-term public keys, populated when the simulation is wired up.

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "dapriv/crypto.h"

namespace dapriv {

enum class Role {
  kPatient,
  kPhysician,
  kLab,
  kResearcher,
  kAnonymizer,
  kAuthServer,
  kDirectory,
  kBlobStore,
  kEmergencyServer,
  kEmergencyContact,
  kHarness,
  kAdversary,
};

std::string_view RoleName(Role role);
std::optional<Role> ParseRole(std::string_view name);

struct Certificate {
  std::string entity_id;
  Role role;
  crypto::VerifyKey verify_key;
  crypto::BoxPublicKey encryption_key;
};

class CertificateRegistry {
 public:
  absl::Status Register(Certificate cert);

  const Certificate* Find(std::string_view entity_id) const;
  const Certificate* FindBySigner(const crypto::VerifyKey& key) const;
  bool IsRegistered(const crypto::VerifyKey& key, Role role) const;

  const std::map<std::string, Certificate, std::less<>>& all() const {
    return by_id_;
  }

 private:
  std::map<std::string, Certificate, std::less<>> by_id_;
  std::map<crypto::VerifyKey, std::string> by_signer_;
};

}  // namespace dapriv

#endif  // DAPRIV_CERTIFICATES_H_
