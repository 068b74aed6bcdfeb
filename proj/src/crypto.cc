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

#include "dapriv/crypto.h"

#include <sodium.h>

#include <cstring>

namespace dapriv::crypto {
namespace {

constexpr size_t kWrappedKeySize =
    crypto_box_PUBLICKEYBYTES + crypto_box_MACBYTES + SymmetricKey::kSize;
constexpr size_t kAeadNonceSize =
    crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
constexpr uint8_t kUnsigned = 0;
constexpr uint8_t kSigned = 1;

std::array<uint8_t, crypto_box_NONCEBYTES> WrapNonce(
    const BoxPublicKey& ephemeral, const BoxPublicKey& recipient) {
  Bytes material(ephemeral.bytes.begin(), ephemeral.bytes.end());
  material.insert(material.end(), recipient.bytes.begin(),
                  recipient.bytes.end());
  const auto digest = Digest(material);
  std::array<uint8_t, crypto_box_NONCEBYTES> nonce;
  std::memcpy(nonce.data(), digest.data(), nonce.size());
  return nonce;
}

Bytes AeadSeal(ByteView payload, ByteView associated, const SymmetricKey& key,
               Rng& rng) {
  Bytes out(kAeadNonceSize + payload.size() +
            crypto_aead_xchacha20poly1305_ietf_ABYTES);
  rng.Fill({out.data(), kAeadNonceSize});
  unsigned long long written = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      out.data() + kAeadNonceSize, &written, payload.data(), payload.size(),
      associated.data(), associated.size(), nullptr, out.data(),
      key.bytes.data());
  out.resize(kAeadNonceSize + written);
  return out;
}

absl::StatusOr<Bytes> AeadOpen(ByteView sealed, ByteView associated,
                               const SymmetricKey& key) {
  if (sealed.size() <
      kAeadNonceSize + crypto_aead_xchacha20poly1305_ietf_ABYTES) {
    return absl::InvalidArgumentError("ciphertext is truncated");
  }
  Bytes out(sealed.size() - kAeadNonceSize -
            crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long written = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(
          out.data(), &written, nullptr, sealed.data() + kAeadNonceSize,
          sealed.size() - kAeadNonceSize, associated.data(),
          associated.size(), sealed.data(), key.bytes.data()) != 0) {
    return absl::DataLossError("ciphertext failed its integrity check");
  }
  out.resize(written);
  return out;
}

}  // namespace

KeySeed DeriveSeed(uint64_t seed, std::string_view domain) {
  std::string material(domain);
  material.push_back('\0');
  for (int i = 0; i < 8; ++i) {
    material.push_back(static_cast<char>(seed >> (8 * i)));
  }
  KeySeed out;
  out.bytes = Digest(AsBytes(material));
  return out;
}

KeySeed RandomSeed(Rng& rng) {
  KeySeed out;
  rng.Fill(out.bytes);
  return out;
}

SigningIdentity GenerateIdentity(uint64_t seed, std::string owner_label) {
  return GenerateIdentity(DeriveSeed(seed, "dapriv.identity"),
                          std::move(owner_label));
}

SigningIdentity GenerateIdentity(const KeySeed& seed,
                                 std::string owner_label) {
  EnsureCryptoInitialized();
  SigningIdentity id;
  crypto_sign_seed_keypair(id.public_part.bytes.data(),
                           id.private_part.bytes.data(), seed.bytes.data());
  id.owner_label = std::move(owner_label);
  return id;
}

VerifyKey DerivePublic(const SigningSecret& private_part) {
  EnsureCryptoInitialized();
  VerifyKey out;
  crypto_sign_ed25519_sk_to_pk(out.bytes.data(), private_part.bytes.data());
  return out;
}

EncryptionKeyPair GenerateEncryptionKeys(uint64_t seed) {
  return GenerateEncryptionKeys(DeriveSeed(seed, "dapriv.encryption"));
}

EncryptionKeyPair GenerateEncryptionKeys(const KeySeed& seed) {
  EnsureCryptoInitialized();
  EncryptionKeyPair out;
  crypto_box_seed_keypair(out.public_key.bytes.data(),
                          out.private_key.bytes.data(), seed.bytes.data());
  return out;
}

Signature Sign(ByteView payload, const SigningIdentity& identity) {
  EnsureCryptoInitialized();
  Signature sig;
  sig.bytes.resize(kSignatureSize);
  crypto_sign_detached(sig.bytes.data(), nullptr, payload.data(),
                       payload.size(), identity.private_part.bytes.data());
  sig.signer_public = identity.public_part;
  return sig;
}

absl::StatusOr<bool> Verify(ByteView payload, const Signature& sig,
                            const VerifyKey& pub) {
  EnsureCryptoInitialized();
  if (sig.bytes.size() != kSignatureSize) {
    return absl::InvalidArgumentError("signature has the wrong length");
  }
  return crypto_sign_verify_detached(sig.bytes.data(), payload.data(),
                                     payload.size(), pub.bytes.data()) == 0;
}

SealedEnvelope Seal(ByteView payload, const BoxPublicKey& recipient,
                    const SigningIdentity* signer, Rng& rng) {
  EnsureCryptoInitialized();
  const EncryptionKeyPair ephemeral = GenerateEncryptionKeys(RandomSeed(rng));
  const SymmetricKey body_key = GenerateSymmetricKey(rng);

  SealedEnvelope env;
  env.wrapped_key.resize(kWrappedKeySize);
  std::copy(ephemeral.public_key.bytes.begin(),
            ephemeral.public_key.bytes.end(), env.wrapped_key.begin());
  const auto nonce = WrapNonce(ephemeral.public_key, recipient);
  if (crypto_box_easy(env.wrapped_key.data() + crypto_box_PUBLICKEYBYTES,
                      body_key.bytes.data(), body_key.bytes.size(),
                      nonce.data(), recipient.bytes.data(),
                      ephemeral.private_key.bytes.data()) != 0) {
    // Low-order recipient point. Leave an all-zero box that nobody can open.
    std::fill(env.wrapped_key.begin() + crypto_box_PUBLICKEYBYTES,
              env.wrapped_key.end(), uint8_t{0});
  }

  Bytes inner;
  inner.reserve(1 + 32 + kSignatureSize + payload.size());
  if (signer != nullptr) {
    const Signature sig = Sign(payload, *signer);
    inner.push_back(kSigned);
    inner.insert(inner.end(), sig.signer_public.bytes.begin(),
                 sig.signer_public.bytes.end());
    inner.insert(inner.end(), sig.bytes.begin(), sig.bytes.end());
  } else {
    inner.push_back(kUnsigned);
  }
  inner.insert(inner.end(), payload.begin(), payload.end());
  env.ciphertext = AeadSeal(inner, env.wrapped_key, body_key, rng);
  sodium_memzero(inner.data(), inner.size());
  return env;
}

absl::StatusOr<OpenedEnvelope> Open(const SealedEnvelope& envelope,
                                    const EncryptionKeyPair& recipient,
                                    SignaturePolicy policy) {
  EnsureCryptoInitialized();
  if (envelope.wrapped_key.size() != kWrappedKeySize) {
    return absl::InvalidArgumentError("wrapped key has the wrong length");
  }
  BoxPublicKey ephemeral;
  std::copy_n(envelope.wrapped_key.begin(), ephemeral.bytes.size(),
              ephemeral.bytes.begin());
  const auto nonce = WrapNonce(ephemeral, recipient.public_key);
  SymmetricKey body_key;
  if (crypto_box_open_easy(
          body_key.bytes.data(),
          envelope.wrapped_key.data() + crypto_box_PUBLICKEYBYTES,
          kWrappedKeySize - crypto_box_PUBLICKEYBYTES, nonce.data(),
          ephemeral.bytes.data(), recipient.private_key.bytes.data()) != 0) {
    return absl::PermissionDeniedError(
        "envelope does not open under this key");
  }

  auto inner = AeadOpen(envelope.ciphertext, envelope.wrapped_key, body_key);
  if (!inner.ok()) return inner.status();
  if (inner->empty()) {
    return absl::InvalidArgumentError("envelope body is empty");
  }

  OpenedEnvelope out;
  const uint8_t flag = (*inner)[0];
  size_t offset = 1;
  if (flag == kSigned) {
    if (inner->size() < 1 + 32 + kSignatureSize) {
      return absl::InvalidArgumentError("signed envelope body is truncated");
    }
    Signature sig;
    std::copy_n(inner->begin() + 1, 32, sig.signer_public.bytes.begin());
    sig.bytes.assign(inner->begin() + 33, inner->begin() + 33 + kSignatureSize);
    offset = 1 + 32 + kSignatureSize;
    out.plaintext.assign(inner->begin() + offset, inner->end());
    auto valid = Verify(out.plaintext, sig, sig.signer_public);
    out.signer = sig.signer_public;
    out.signature = (valid.ok() && *valid) ? SignatureStatus::kValid
                                           : SignatureStatus::kInvalid;
  } else if (flag == kUnsigned) {
    out.plaintext.assign(inner->begin() + offset, inner->end());
    out.signature = policy == SignaturePolicy::kRequired
                        ? SignatureStatus::kInvalid
                        : SignatureStatus::kAbsent;
  } else {
    return absl::InvalidArgumentError("unknown envelope body flag");
  }
  sodium_memzero(inner->data(), inner->size());
  return out;
}

SymmetricKey GenerateSymmetricKey(Rng& rng) {
  SymmetricKey key;
  rng.Fill(key.bytes);
  return key;
}

Bytes SymmetricSeal(ByteView payload, const SymmetricKey& key, Rng& rng) {
  EnsureCryptoInitialized();
  return AeadSeal(payload, {}, key, rng);
}

absl::StatusOr<Bytes> SymmetricOpen(ByteView sealed, const SymmetricKey& key) {
  EnsureCryptoInitialized();
  return AeadOpen(sealed, {}, key);
}

}  // namespace dapriv::crypto
