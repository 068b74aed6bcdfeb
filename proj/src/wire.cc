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

#include "dapriv/wire.h"

#include <utility>

#include "absl/strings/str_cat.h"

namespace dapriv::wire {
namespace {

absl::Status Missing(std::string_view key, std::string_view type) {
  return absl::InvalidArgumentError(absl::StrCat(
      "member '", std::string(key), "' missing or not ", std::string(type)));
}

}  // namespace

absl::StatusOr<Json> ParseJson(ByteView data) {
  Json parsed = Json::parse(data.begin(), data.end(), nullptr,
                            /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    return absl::InvalidArgumentError("payload is not valid JSON");
  }
  return parsed;
}

absl::StatusOr<std::string> GetString(const Json& object,
                                      std::string_view key) {
  if (!object.is_object()) return Missing(key, "a string");
  auto it = object.find(key);
  if (it == object.end() || !it->is_string()) return Missing(key, "a string");
  return it->get<std::string>();
}

absl::StatusOr<uint64_t> GetUint(const Json& object, std::string_view key) {
  if (!object.is_object()) return Missing(key, "an unsigned integer");
  auto it = object.find(key);
  // Literals built in C++ arrive as signed integers; accept any that are
  // non-negative.
  if (it == object.end() || !it->is_number_integer() ||
      (!it->is_number_unsigned() && it->get<int64_t>() < 0)) {
    return Missing(key, "an unsigned integer");
  }
  return it->get<uint64_t>();
}

absl::StatusOr<bool> GetBool(const Json& object, std::string_view key) {
  if (!object.is_object()) return Missing(key, "a boolean");
  auto it = object.find(key);
  if (it == object.end() || !it->is_boolean()) return Missing(key, "a boolean");
  return it->get<bool>();
}

absl::StatusOr<Json> GetObject(const Json& object, std::string_view key) {
  if (!object.is_object()) return Missing(key, "an object");
  auto it = object.find(key);
  if (it == object.end() || !it->is_object()) return Missing(key, "an object");
  return *it;
}

Json SignatureToJson(const crypto::Signature& sig) {
  return {{"sig", HexEncode(sig.bytes)}, {"signer", sig.signer_public.Hex()}};
}

absl::StatusOr<crypto::Signature> SignatureFromJson(const Json& j) {
  auto sig_hex = GetString(j, "sig");
  if (!sig_hex.ok()) return sig_hex.status();
  auto bytes = HexDecode(*sig_hex);
  if (!bytes.ok()) return bytes.status();
  auto signer = GetKey<crypto::VerifyKey>(j, "signer");
  if (!signer.ok()) return signer.status();
  return crypto::Signature{*std::move(bytes), *signer};
}

Json EnvelopeToJson(const crypto::SealedEnvelope& envelope) {
  return {{"wrapped_key", HexEncode(envelope.wrapped_key)},
          {"ciphertext", HexEncode(envelope.ciphertext)}};
}

absl::StatusOr<crypto::SealedEnvelope> EnvelopeFromJson(const Json& j) {
  auto wrapped = GetString(j, "wrapped_key");
  if (!wrapped.ok()) return wrapped.status();
  auto body = GetString(j, "ciphertext");
  if (!body.ok()) return body.status();
  auto wrapped_bytes = HexDecode(*wrapped);
  if (!wrapped_bytes.ok()) return wrapped_bytes.status();
  auto body_bytes = HexDecode(*body);
  if (!body_bytes.ok()) return body_bytes.status();
  return crypto::SealedEnvelope{*std::move(wrapped_bytes),
                                *std::move(body_bytes)};
}

Json PrescriptionToJson(const Prescription& p) {
  return {{"tests", p.tests},
          {"physician", p.physician_pub.Hex()},
          {"nonce", p.nonce},
          {"signature", SignatureToJson(p.signature)}};
}

absl::StatusOr<Prescription> PrescriptionFromJson(const Json& j) {
  Prescription p;
  if (!j.is_object() || !j.contains("tests") || !j["tests"].is_array()) {
    return Missing("tests", "an array");
  }
  for (const Json& t : j["tests"]) {
    if (!t.is_string()) return Missing("tests", "an array of strings");
    p.tests.insert(t.get<std::string>());
  }
  auto physician = GetKey<crypto::VerifyKey>(j, "physician");
  if (!physician.ok()) return physician.status();
  p.physician_pub = *physician;
  auto nonce = GetString(j, "nonce");
  if (!nonce.ok()) return nonce.status();
  p.nonce = *std::move(nonce);
  auto sig_json = GetObject(j, "signature");
  if (!sig_json.ok()) return sig_json.status();
  auto sig = SignatureFromJson(*sig_json);
  if (!sig.ok()) return sig.status();
  p.signature = *std::move(sig);
  return p;
}

Json EntryToJson(const DirectoryEntry& entry) {
  return {{"ref", entry.ref.Render()},
          {"kind", entry.kind == EntryKind::kLab ? "lab" : "researcher"},
          {"capabilities", entry.capabilities},
          {"verify_key", entry.verify_key.Hex()},
          {"encryption_key", entry.encryption_key.Hex()}};
}

absl::StatusOr<DirectoryEntry> EntryFromJson(const Json& j) {
  DirectoryEntry entry;
  auto ref_text = GetString(j, "ref");
  if (!ref_text.ok()) return ref_text.status();
  auto ref = DirectoryRef::Parse(*ref_text);
  if (!ref.ok()) return ref.status();
  entry.ref = *std::move(ref);
  auto kind = GetString(j, "kind");
  if (!kind.ok()) return kind.status();
  if (*kind == "lab") {
    entry.kind = EntryKind::kLab;
  } else if (*kind == "researcher") {
    entry.kind = EntryKind::kResearcher;
  } else {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown directory entry kind '", *kind, "'"));
  }
  if (!j.contains("capabilities") || !j["capabilities"].is_array()) {
    return Missing("capabilities", "an array");
  }
  for (const Json& c : j["capabilities"]) {
    if (!c.is_string()) return Missing("capabilities", "an array of strings");
    entry.capabilities.insert(c.get<std::string>());
  }
  auto verify = GetKey<crypto::VerifyKey>(j, "verify_key");
  if (!verify.ok()) return verify.status();
  entry.verify_key = *verify;
  auto enc = GetKey<crypto::BoxPublicKey>(j, "encryption_key");
  if (!enc.ok()) return enc.status();
  entry.encryption_key = *enc;
  return entry;
}

Json FieldsToJson(const FieldMap& fields) { return Json(fields); }

absl::StatusOr<FieldMap> FieldsFromJson(const Json& j) {
  if (!j.is_object()) {
    return absl::InvalidArgumentError("field map is not an object");
  }
  FieldMap out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) {
      return absl::InvalidArgumentError(
          absl::StrCat("field '", k, "' is not a string"));
    }
    out.emplace(k, v.get<std::string>());
  }
  return out;
}

}  // namespace dapriv::wire
