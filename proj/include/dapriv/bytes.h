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

#ifndef DAPRIV_BYTES_H_
#define DAPRIV_BYTES_H_

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"

namespace dapriv {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

inline ByteView AsBytes(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}
inline Bytes ToBytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}
inline std::string ToString(ByteView b) {
  return std::string(b.begin(), b.end());
}

std::string HexEncode(ByteView data);
absl::StatusOr<Bytes> HexDecode(std::string_view hex);

// BLAKE2b-256 of `data`, lower-case hex.
std::string DigestHex(ByteView data);
std::array<uint8_t, 32> Digest(ByteView data);

// Initializes libsodium once per process. Safe to call repeatedly.
void EnsureCryptoInitialized();

// Fixed-width key material. `Tag` keeps the different key kinds from being
// mixed up at compile time.
template <size_t N, typename Tag>
struct FixedBytes {
  static constexpr size_t kSize = N;
  std::array<uint8_t, N> bytes{};

  ByteView view() const { return {bytes.data(), bytes.size()}; }
  std::string Hex() const { return HexEncode(view()); }

  static absl::StatusOr<FixedBytes> FromHex(std::string_view hex) {
    auto decoded = HexDecode(hex);
    if (!decoded.ok()) return decoded.status();
    return FromView(*decoded);
  }
  static absl::StatusOr<FixedBytes> FromView(ByteView data) {
    if (data.size() != N) {
      return absl::InvalidArgumentError("key material has the wrong length");
    }
    FixedBytes out;
    std::copy(data.begin(), data.end(), out.bytes.begin());
    return out;
  }

  friend auto operator<=>(const FixedBytes&, const FixedBytes&) = default;
  friend bool operator==(const FixedBytes&, const FixedBytes&) = default;
};

}  // namespace dapriv

#endif  // DAPRIV_BYTES_H_
