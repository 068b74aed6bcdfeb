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

#include "dapriv/key_pool.h"

#include <algorithm>
#include <string>

#include "absl/strings/str_cat.h"

namespace dapriv {

size_t RotationReport::Count(RotationEvent::Kind kind) const {
  return std::count_if(events.begin(), events.end(),
                       [kind](const RotationEvent& e) { return e.kind == kind; });
}

KeyPool::KeyPool(const KeyPoolParams& params, uint64_t seed)
    : params_(params), rng_(Rng(seed).Substream("key_pool")) {}

absl::StatusOr<KeyPool> KeyPool::Create(const KeyPoolParams& params,
                                        uint64_t seed) {
  if (params.private_keys == 0 || params.subkeys_per_private == 0 ||
      params.public_threshold == 0 || params.private_threshold == 0) {
    return absl::InvalidArgumentError(
        "key pool counts and thresholds must all be at least 1");
  }
  KeyPool pool(params, seed);
  for (uint32_t i = 0; i < params.private_keys; ++i) {
    pool.MintPrivateKey(nullptr);
  }
  return pool;
}

crypto::EncryptionKeyPair KeyPool::DeriveSubKey(const crypto::KeySeed& root,
                                                uint32_t index) const {
  Bytes material(root.bytes.begin(), root.bytes.end());
  const std::string tag = absl::StrCat("/subkey/", index);
  material.insert(material.end(), tag.begin(), tag.end());
  crypto::KeySeed seed;
  seed.bytes = Digest(material);
  return crypto::GenerateEncryptionKeys(seed);
}

PrivateKeyId KeyPool::MintPrivateKey(RotationReport* report) {
  PrivateKey key;
  key.id = static_cast<PrivateKeyId>(privates_.size());
  key.root = crypto::RandomSeed(rng_);
  privates_.push_back(key);
  if (report != nullptr) {
    report->events.push_back({RotationEvent::Kind::kPrivateKeyMinted,
                              static_cast<uint32_t>(key.id)});
  }
  for (uint32_t i = 0; i < params_.subkeys_per_private; ++i) {
    MintSubKey(key.id, report);
  }
  return key.id;
}

SubKeyId KeyPool::MintSubKey(PrivateKeyId parent, RotationReport* report) {
  PrivateKey& owner = privates_[static_cast<uint32_t>(parent)];
  SubKey sub;
  sub.id = static_cast<SubKeyId>(subkeys_.size());
  sub.parent = parent;
  sub.index_in_parent = owner.next_subkey_index++;
  sub.public_key = DeriveSubKey(owner.root, sub.index_in_parent).public_key;
  owner.subkeys.push_back(sub.id);
  by_public_.emplace(sub.public_key, sub.id);
  subkeys_.push_back(sub);
  if (report != nullptr) {
    report->events.push_back(
        {RotationEvent::Kind::kSubKeyMinted, static_cast<uint32_t>(sub.id)});
  }
  return sub.id;
}

std::vector<SubKeyId> KeyPool::ActiveSubKeys() const {
  std::vector<SubKeyId> active;
  for (const SubKey& s : subkeys_) {
    if (s.status == KeyStatus::kActive) active.push_back(s.id);
  }
  return active;
}

SubKey KeyPool::SelectPublicKey() {
  const std::vector<SubKeyId> active = ActiveSubKeys();
  return subkey(active[rng_.Uniform(active.size())]);
}

absl::StatusOr<RotationReport> KeyPool::RecordUse(SubKeyId id) {
  const auto index = static_cast<uint32_t>(id);
  if (index >= subkeys_.size()) {
    return absl::NotFoundError("subkey does not belong to this pool");
  }
  if (subkeys_[index].status == KeyStatus::kArchived) {
    return absl::FailedPreconditionError(
        absl::StrCat("subkey ", index, " is archived"));
  }

  RotationReport report;
  SubKey& sub = subkeys_[index];
  PrivateKey& owner = privates_[static_cast<uint32_t>(sub.parent)];
  ++sub.use_count;
  ++owner.use_count;
  ++total_uses_;

  const bool retire_private = owner.use_count >= params_.private_threshold;
  if (sub.use_count >= params_.public_threshold) {
    sub.status = KeyStatus::kArchived;
    report.events.push_back({RotationEvent::Kind::kSubKeyArchived, index});
    // A replacement under a private key that is retiring in the same step
    // would be archived immediately, so it is not minted.
    if (!retire_private) MintSubKey(owner.id, &report);
  }
  if (retire_private) {
    const PrivateKeyId retired = owner.id;
    for (SubKeyId child : privates_[static_cast<uint32_t>(retired)].subkeys) {
      SubKey& s = subkeys_[static_cast<uint32_t>(child)];
      if (s.status == KeyStatus::kActive) {
        s.status = KeyStatus::kArchived;
        report.events.push_back({RotationEvent::Kind::kSubKeyArchived,
                                 static_cast<uint32_t>(child)});
      }
    }
    privates_[static_cast<uint32_t>(retired)].status = KeyStatus::kArchived;
    report.events.push_back({RotationEvent::Kind::kPrivateKeyArchived,
                             static_cast<uint32_t>(retired)});
    MintPrivateKey(&report);
  }
  return report;
}

absl::StatusOr<DecryptionKey> KeyPool::FindPrivateFor(
    const crypto::BoxPublicKey& public_key) const {
  auto it = by_public_.find(public_key);
  if (it == by_public_.end()) {
    return absl::NotFoundError("public key was not minted by this pool");
  }
  const SubKey& sub = subkey(it->second);
  const PrivateKey& owner = privates_[static_cast<uint32_t>(sub.parent)];
  DecryptionKey out;
  out.parent = owner.id;
  out.parent_status = owner.status;
  out.subkey = sub.id;
  out.keys = DeriveSubKey(owner.root, sub.index_in_parent);
  return out;
}

bool KeyPool::IsActive(const crypto::BoxPublicKey& public_key) const {
  auto it = by_public_.find(public_key);
  return it != by_public_.end() &&
         subkey(it->second).status == KeyStatus::kActive;
}

absl::Status KeyPool::CheckInvariants() const {
  uint64_t sum = 0;
  bool has_active = false;
  for (const SubKey& s : subkeys_) {
    sum += s.use_count;
    if (s.use_count > params_.public_threshold) {
      return absl::InternalError(absl::StrCat(
          "subkey ", static_cast<uint32_t>(s.id), " exceeded public threshold"));
    }
    if (s.status == KeyStatus::kActive) {
      if (s.use_count >= params_.public_threshold) {
        return absl::InternalError("active subkey at its threshold");
      }
      if (privates_[static_cast<uint32_t>(s.parent)].status !=
          KeyStatus::kActive) {
        return absl::InternalError("active subkey under archived private key");
      }
      has_active = true;
    }
  }
  if (!has_active) return absl::InternalError("pool has no active subkey");
  if (sum != total_uses_) {
    return absl::InternalError("use counts do not sum to recorded uses");
  }
  for (const PrivateKey& p : privates_) {
    if (p.status == KeyStatus::kActive &&
        p.use_count >= params_.private_threshold) {
      return absl::InternalError("active private key at its threshold");
    }
  }
  return absl::OkStatus();
}

}  // namespace dapriv
