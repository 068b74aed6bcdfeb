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

#ifndef DAPRIV_CRYPTO_H_
#define DAPRIV_CRYPTO_H_

// Signing, sealing and verification used by every entity.
//
// Signatures are Ed25519. Sealing wraps a fresh symmetric key to the
// recipient's X25519 key with an ephemeral sender key and encrypts the body
// with XChaCha20-Poly1305. When a signer is supplied the signature is
// computed over the plaintext and travels inside the ciphertext, so the
// signer is only learned by the recipient.
//
// All randomness is drawn from a caller-supplied Rng, which makes every
// envelope reproducible from (inputs, seed).

#include <cstdint>
#include <optional>
#include <string>

#include "absl/status/statusor.h"
#include "dapriv/bytes.h"
#include "dapriv/rng.h"

namespace dapriv::crypto {

using VerifyKey = FixedBytes<32, struct VerifyKeyTag>;
using SigningSecret = FixedBytes<64, struct SigningSecretTag>;
using BoxPublicKey = FixedBytes<32, struct BoxPublicKeyTag>;
using BoxSecretKey = FixedBytes<32, struct BoxSecretKeyTag>;
using SymmetricKey = FixedBytes<32, struct SymmetricKeyTag>;
using KeySeed = FixedBytes<32, struct KeySeedTag>;

inline constexpr size_t kSignatureSize = 64;

struct SigningIdentity {
  SigningSecret private_part;
  VerifyKey public_part;
  // Simulation metadata only. Never serialized into envelopes.
  std::string owner_label;
};

struct EncryptionKeyPair {
  BoxPublicKey public_key;
  BoxSecretKey private_key;
};

struct Signature {
  Bytes bytes;
  VerifyKey signer_public;
};

struct SealedEnvelope {
  // Ephemeral sender key followed by the boxed symmetric key.
  Bytes wrapped_key;
  // Nonce followed by the AEAD ciphertext.
  Bytes ciphertext;

  friend bool operator==(const SealedEnvelope&,
                         const SealedEnvelope&) = default;
};

enum class SignatureStatus { kAbsent, kValid, kInvalid };
enum class SignaturePolicy { kOptional, kRequired };

struct OpenedEnvelope {
  Bytes plaintext;
  SignatureStatus signature = SignatureStatus::kAbsent;
  std::optional<VerifyKey> signer;
};

KeySeed DeriveSeed(uint64_t seed, std::string_view domain);
KeySeed RandomSeed(Rng& rng);

SigningIdentity GenerateIdentity(uint64_t seed, std::string owner_label = {});
SigningIdentity GenerateIdentity(const KeySeed& seed,
                                 std::string owner_label = {});
VerifyKey DerivePublic(const SigningSecret& private_part);

EncryptionKeyPair GenerateEncryptionKeys(uint64_t seed);
EncryptionKeyPair GenerateEncryptionKeys(const KeySeed& seed);

Signature Sign(ByteView payload, const SigningIdentity& identity);

// True iff `sig` was produced over exactly `payload` by the private half of
// `pub`. A signature whose encoding is malformed yields InvalidArgument
// rather than false.
absl::StatusOr<bool> Verify(ByteView payload, const Signature& sig,
                            const VerifyKey& pub);

SealedEnvelope Seal(ByteView payload, const BoxPublicKey& recipient,
                    const SigningIdentity* signer, Rng& rng);

// Errors:
//   PermissionDenied  the wrapped key does not open under `recipient`
//                     (wrong key or corrupted wrap).
//   DataLoss          the body fails its integrity check.
//   InvalidArgument   structurally malformed envelope.
// A present but bad signature, or a missing signature under kRequired, is
// reported through OpenedEnvelope::signature = kInvalid; the plaintext is
// still returned and the caller decides.
absl::StatusOr<OpenedEnvelope> Open(
    const SealedEnvelope& envelope, const EncryptionKeyPair& recipient,
    SignaturePolicy policy = SignaturePolicy::kOptional);

// Symmetric encryption of stored result files.
SymmetricKey GenerateSymmetricKey(Rng& rng);
Bytes SymmetricSeal(ByteView payload, const SymmetricKey& key, Rng& rng);
absl::StatusOr<Bytes> SymmetricOpen(ByteView sealed, const SymmetricKey& key);

}  // namespace dapriv::crypto

#endif  // DAPRIV_CRYPTO_H_
