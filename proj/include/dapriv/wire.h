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


#ifndef DAPRIV_WIRE_H_
#define DAPRIV_WIRE_H_

// JSON encodings of the protocol's wire objects. Every message body on the
// simulated network is a JSON object built from these helpers.

#include <cstdint>
#include <string>
#include <string_view>

#include "absl/status/statusor.h"
#include "dapriv/bytes.h"
#include "dapriv/crypto.h"
#include "dapriv/directory.h"
#include "dapriv/records.h"
#include "json.hpp"

namespace dapriv::wire {

using Json = nlohmann::json;

// Parses untrusted bytes; InvalidArgument instead of an exception.
absl::StatusOr<Json> ParseJson(ByteView data);

// Typed member access on untrusted objects. Each returns InvalidArgument
// naming the missing or mistyped member.
absl::StatusOr<std::string> GetString(const Json& object, std::string_view key);
absl::StatusOr<uint64_t> GetUint(const Json& object, std::string_view key);
absl::StatusOr<bool> GetBool(const Json& object, std::string_view key);
absl::StatusOr<Json> GetObject(const Json& object, std::string_view key);

template <typename Key>
absl::StatusOr<Key> GetKey(const Json& object, std::string_view key) {
  auto hex = GetString(object, key);
  if (!hex.ok()) return hex.status();
  return Key::FromHex(*hex);
}

Json SignatureToJson(const crypto::Signature& sig);
absl::StatusOr<crypto::Signature> SignatureFromJson(const Json& j);

Json EnvelopeToJson(const crypto::SealedEnvelope& envelope);
absl::StatusOr<crypto::SealedEnvelope> EnvelopeFromJson(const Json& j);

Json PrescriptionToJson(const Prescription& prescription);
absl::StatusOr<Prescription> PrescriptionFromJson(const Json& j);

Json EntryToJson(const DirectoryEntry& entry);
absl::StatusOr<DirectoryEntry> EntryFromJson(const Json& j);

Json FieldsToJson(const FieldMap& fields);
absl::StatusOr<FieldMap> FieldsFromJson(const Json& j);

}  // namespace dapriv::wire

#endif  // DAPRIV_WIRE_H_
