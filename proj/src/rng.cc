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

#include "dapriv/rng.h"

#include <cstring>
#include <limits>
#include <string>

#include "dapriv/bytes.h"

namespace dapriv {

Rng Rng::Substream(std::string_view label) const {
  std::string material(sizeof(seed_), '\0');
  std::memcpy(material.data(), &seed_, sizeof(seed_));
  material.append(label);
  const auto digest = Digest(AsBytes(material));
  uint64_t derived = 0;
  std::memcpy(&derived, digest.data(), sizeof(derived));
  return Rng(derived);
}

Rng Rng::Substream(std::string_view label, uint64_t index) const {
  std::string tagged(label);
  tagged.push_back('/');
  tagged.append(std::to_string(index));
  return Substream(tagged);
}

uint64_t Rng::Uniform(uint64_t bound) {
  // Rejection sampling over the largest multiple of `bound`.
  const uint64_t limit =
      std::numeric_limits<uint64_t>::max() -
      std::numeric_limits<uint64_t>::max() % bound;
  uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return draw % bound;
}

double Rng::UniformReal() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

void Rng::Fill(std::span<uint8_t> out) {
  size_t i = 0;
  while (i < out.size()) {
    uint64_t word = engine_();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<uint8_t>(word >> (8 * b));
    }
  }
}

}  // namespace dapriv
