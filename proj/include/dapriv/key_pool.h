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

#ifndef DAPRIV_KEY_POOL_H_
#define DAPRIV_KEY_POOL_H_

// A patient's decryption key material: several private keys, each owning a
// few public subkeys. Every public key handed out is chosen uniformly from
// the active subkeys, and keys are retired once their use counts reach the
// configured thresholds.
//
// A "private key" here is a root secret. Subkey i of a root has its own
// X25519 key pair derived from (root, i), so the owner can recover the
// decryption key for any subkey it ever minted, archived or not.

#include <cstdint>
#include <map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dapriv/crypto.h"
#include "dapriv/rng.h"

namespace dapriv {

enum class PrivateKeyId : uint32_t {};
enum class SubKeyId : uint32_t {};
enum class KeyStatus { kActive, kArchived };

struct SubKey {
  SubKeyId id{};
  crypto::BoxPublicKey public_key;
  PrivateKeyId parent{};
  uint32_t index_in_parent = 0;
  uint64_t use_count = 0;
  KeyStatus status = KeyStatus::kActive;
};

struct PrivateKey {
  PrivateKeyId id{};
  crypto::KeySeed root;
  std::vector<SubKeyId> subkeys;
  uint64_t use_count = 0;
  KeyStatus status = KeyStatus::kActive;
  uint32_t next_subkey_index = 0;
};

struct KeyPoolParams {
  uint32_t private_keys = 2;
  uint32_t subkeys_per_private = 3;
  uint64_t public_threshold = 5;
  uint64_t private_threshold = 12;
};

struct RotationEvent {
  enum class Kind {
    kSubKeyArchived,
    kSubKeyMinted,
    kPrivateKeyArchived,
    kPrivateKeyMinted,
  };
  Kind kind;
  uint32_t id;  // SubKeyId or PrivateKeyId depending on kind.
};

struct RotationReport {
  std::vector<RotationEvent> events;

  bool empty() const { return events.empty(); }
  size_t Count(RotationEvent::Kind kind) const;
};

// Decryption material for one subkey, found by its public key.
struct DecryptionKey {
  PrivateKeyId parent{};
  KeyStatus parent_status = KeyStatus::kActive;
  SubKeyId subkey{};
  crypto::EncryptionKeyPair keys;
};

class KeyPool {
 public:
  static absl::StatusOr<KeyPool> Create(const KeyPoolParams& params,
                                        uint64_t seed);

  // Uniformly random active subkey. Does not count as a use.
  SubKey SelectPublicKey();

  // Records one completed use of `subkey` and applies the threshold rules.
  // FailedPrecondition if the subkey is archived, NotFound if unknown.
  absl::StatusOr<RotationReport> RecordUse(SubKeyId subkey);

  // Works for archived keys too so old envelopes stay readable.
  absl::StatusOr<DecryptionKey> FindPrivateFor(
      const crypto::BoxPublicKey& public_key) const;

  bool IsActive(const crypto::BoxPublicKey& public_key) const;

  const KeyPoolParams& params() const { return params_; }
  const std::vector<PrivateKey>& private_keys() const { return privates_; }
  const std::vector<SubKey>& subkeys() const { return subkeys_; }
  const SubKey& subkey(SubKeyId id) const {
    return subkeys_[static_cast<uint32_t>(id)];
  }
  std::vector<SubKeyId> ActiveSubKeys() const;
  uint64_t total_uses() const { return total_uses_; }

  // Checks the structural invariants; returns Internal naming the first
  // violation.
  absl::Status CheckInvariants() const;

 private:
  KeyPool(const KeyPoolParams& params, uint64_t seed);

  PrivateKeyId MintPrivateKey(RotationReport* report);
  SubKeyId MintSubKey(PrivateKeyId parent, RotationReport* report);
  crypto::EncryptionKeyPair DeriveSubKey(const crypto::KeySeed& root,
                                         uint32_t index) const;

  KeyPoolParams params_;
  Rng rng_;
  std::vector<PrivateKey> privates_;
  std::vector<SubKey> subkeys_;
  std::map<crypto::BoxPublicKey, SubKeyId> by_public_;
  uint64_t total_uses_ = 0;
};

}  // namespace dapriv

#endif  // DAPRIV_KEY_POOL_H_
