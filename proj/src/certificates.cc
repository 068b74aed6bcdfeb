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

#include "dapriv/certificates.h"

#include <array>
#include <utility>

#include "absl/strings/str_cat.h"

namespace dapriv {
namespace {

constexpr std::array<std::pair<Role, std::string_view>, 12> kRoleNames = {{
    {Role::kPatient, "patient"},
    {Role::kPhysician, "physician"},
    {Role::kLab, "lab"},
    {Role::kResearcher, "researcher"},
    {Role::kAnonymizer, "anonymizer"},
    {Role::kAuthServer, "auth_server"},
    {Role::kDirectory, "directory"},
    {Role::kBlobStore, "blob_store"},
    {Role::kEmergencyServer, "emergency_server"},
    {Role::kEmergencyContact, "emergency_contact"},
    {Role::kHarness, "harness"},
    {Role::kAdversary, "adversary"},
}};

}  // namespace

std::string_view RoleName(Role role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  return "unknown";
}

std::optional<Role> ParseRole(std::string_view name) {
  for (const auto& [r, n] : kRoleNames) {
    if (n == name) return r;
  }
  return std::nullopt;
}

absl::Status CertificateRegistry::Register(Certificate cert) {
  if (by_id_.contains(cert.entity_id)) {
    return absl::AlreadyExistsError(
        absl::StrCat("entity ", cert.entity_id, " already certified"));
  }
  by_signer_.emplace(cert.verify_key, cert.entity_id);
  std::string id = cert.entity_id;
  by_id_.emplace(std::move(id), std::move(cert));
  return absl::OkStatus();
}

const Certificate* CertificateRegistry::Find(std::string_view entity_id) const {
  auto it = by_id_.find(entity_id);
  return it == by_id_.end() ? nullptr : &it->second;
}

const Certificate* CertificateRegistry::FindBySigner(
    const crypto::VerifyKey& key) const {
  auto it = by_signer_.find(key);
  return it == by_signer_.end() ? nullptr : Find(it->second);
}

bool CertificateRegistry::IsRegistered(const crypto::VerifyKey& key,
                                       Role role) const {
  const Certificate* cert = FindBySigner(key);
  return cert != nullptr && cert->role == role;
}

}  // namespace dapriv
