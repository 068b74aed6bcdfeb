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

#ifndef DAPRIV_TESTS_LINKAGE_ORACLE_H_
#define DAPRIV_TESTS_LINKAGE_ORACLE_H_

// Exact probability that one patient's visits reuse a public key, by
// enumerating every selection sequence of a from-scratch model of the
// rotation rules. Used to check the measured linkage rate of the simulator.

#include <cstdint>
#include <vector>

#include "dapriv/key_pool.h"

namespace dapriv::oracle {

struct ModelKey {
  uint32_t parent = 0;
  uint64_t uses = 0;
  bool active = true;
};

struct ModelPool {
  std::vector<ModelKey> keys;
  std::vector<uint64_t> parent_uses;
  std::vector<bool> parent_active;
  KeyPoolParams params;

  void MintParent() {
    const uint32_t p = static_cast<uint32_t>(parent_uses.size());
    parent_uses.push_back(0);
    parent_active.push_back(true);
    for (uint32_t i = 0; i < params.subkeys_per_private; ++i) {
      keys.push_back({p, 0, true});
    }
  }

  static ModelPool Fresh(const KeyPoolParams& params) {
    ModelPool pool;
    pool.params = params;
    for (uint32_t i = 0; i < params.private_keys; ++i) pool.MintParent();
    return pool;
  }

  std::vector<size_t> Active() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < keys.size(); ++i) {
      if (keys[i].active) out.push_back(i);
    }
    return out;
  }

  void Use(size_t k) {
    ModelKey& key = keys[k];
    const uint32_t p = key.parent;
    ++key.uses;
    ++parent_uses[p];
    const bool parent_done = parent_uses[p] >= params.private_threshold;
    if (key.uses >= params.public_threshold) {
      key.active = false;
      if (!parent_done) keys.push_back({p, 0, true});
    }
    if (parent_done) {
      for (ModelKey& other : keys) {
        if (other.parent == p) other.active = false;
      }
      parent_active[p] = false;
      MintParent();
    }
  }
};

inline double ReuseProbability(const ModelPool& pool, std::vector<size_t>& used,
                               size_t remaining) {
  for (size_t i = 0; i < used.size(); ++i) {
    for (size_t j = i + 1; j < used.size(); ++j) {
      if (used[i] == used[j]) return 1.0;
    }
  }
  if (remaining == 0) return 0.0;
  const std::vector<size_t> active = pool.Active();
  double total = 0.0;
  for (size_t k : active) {
    ModelPool next = pool;
    next.Use(k);
    used.push_back(k);
    total += ReuseProbability(next, used, remaining - 1);
    used.pop_back();
  }
  return total / static_cast<double>(active.size());
}

// Probability that `sessions` consecutive completed visits by one patient
// with a fresh pool use some public key more than once.
inline double ExactKeyReuseProbability(const KeyPoolParams& params,
                                       size_t sessions) {
  std::vector<size_t> used;
  return ReuseProbability(ModelPool::Fresh(params), used, sessions);
}

// Birthday bound for uniform draws with replacement from n keys.
inline double UnlimitedReuseProbability(size_t n, size_t sessions) {
  double distinct = 1.0;
  for (size_t i = 0; i < sessions; ++i) {
    distinct *= static_cast<double>(n > i ? n - i : 0) / static_cast<double>(n);
  }
  return 1.0 - distinct;
}

}  // namespace dapriv::oracle

#endif  // DAPRIV_TESTS_LINKAGE_ORACLE_H_
