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

#include "dapriv/bytes.h"

#include <sodium.h>

#include <cstdlib>
#include <mutex>

namespace dapriv {

void EnsureCryptoInitialized() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) std::abort();
  });
}

std::string HexEncode(ByteView data) {
  std::string out(data.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data.data(), data.size());
  out.pop_back();
  return out;
}

absl::StatusOr<Bytes> HexDecode(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    return absl::InvalidArgumentError("hex string has odd length");
  }
  Bytes out(hex.size() / 2);
  size_t written = 0;
  const char* end = nullptr;
  if (sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr,
                     &written, &end) != 0 ||
      written != out.size()) {
    return absl::InvalidArgumentError("malformed hex string");
  }
  return out;
}

std::array<uint8_t, 32> Digest(ByteView data) {
  EnsureCryptoInitialized();
  std::array<uint8_t, 32> out;
  crypto_generichash(out.data(), out.size(), data.data(), data.size(),
                     nullptr, 0);
  return out;
}

std::string DigestHex(ByteView data) {
  auto d = Digest(data);
  return HexEncode(d);
}

}  // namespace dapriv
