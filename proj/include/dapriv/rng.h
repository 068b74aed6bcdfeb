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

#ifndef DAPRIV_RNG_H_
#define DAPRIV_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace dapriv {

// Seeded generator used for every random choice in a simulation. Bounded
// draws and shuffles are implemented here rather than through the <random>
// distributions so that results do not depend on the standard library
// vendor.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  // Independent stream keyed by (seed, label). Does not consume from *this.
  Rng Substream(std::string_view label) const;
  Rng Substream(std::string_view label, uint64_t index) const;

  uint64_t seed() const { return seed_; }

  uint64_t NextU64() { return engine_(); }
  // Uniform in [0, bound). bound must be positive.
  uint64_t Uniform(uint64_t bound);
  // Uniform in [0, 1).
  double UniformReal();
  bool Bernoulli(double p) { return UniformReal() < p; }
  void Fill(std::span<uint8_t> out);

  template <typename RandomIt>
  void Shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<uint64_t>(last - first);
    for (uint64_t i = n; i > 1; --i) {
      const uint64_t j = Uniform(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace dapriv

#endif  // DAPRIV_RNG_H_
