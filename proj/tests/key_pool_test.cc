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

#include <cmath>
#include <map>
#include <set>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dapriv {
namespace {

using Kind = RotationEvent::Kind;

KeyPool MakePool(uint32_t n, uint32_t m, uint64_t pub, uint64_t priv,
                 uint64_t seed = 1) {
  auto pool = KeyPool::Create({n, m, pub, priv}, seed);
  EXPECT_TRUE(pool.ok()) << pool.status();
  return *std::move(pool);
}

TEST(CreatePool, ShapeAndZeroCounts) {
  KeyPool pool = MakePool(2, 3, 5, 12);
  EXPECT_EQ(pool.private_keys().size(), 2u);
  EXPECT_EQ(pool.subkeys().size(), 6u);
  for (const SubKey& s : pool.subkeys()) {
    EXPECT_EQ(s.use_count, 0u);
    EXPECT_EQ(s.status, KeyStatus::kActive);
  }
  EXPECT_TRUE(pool.CheckInvariants().ok());
}

TEST(CreatePool, ZeroCountsRejected) {
  EXPECT_EQ(KeyPool::Create({0, 3, 5, 12}, 1).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(KeyPool::Create({2, 0, 5, 12}, 1).ok());
  EXPECT_FALSE(KeyPool::Create({2, 3, 0, 12}, 1).ok());
  EXPECT_FALSE(KeyPool::Create({2, 3, 5, 0}, 1).ok());
}

TEST(CreatePool, MinimalPoolFirstUseRotatesEverything) {
  KeyPool pool = MakePool(1, 1, 1, 1);
  const SubKey only = pool.SelectPublicKey();
  auto report = pool.RecordUse(only.id);
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(report->Count(Kind::kSubKeyArchived), 1u);
  EXPECT_EQ(report->Count(Kind::kPrivateKeyArchived), 1u);
  EXPECT_EQ(report->Count(Kind::kPrivateKeyMinted), 1u);
  EXPECT_EQ(report->Count(Kind::kSubKeyMinted), 1u);
  const auto active = pool.ActiveSubKeys();
  ASSERT_EQ(active.size(), 1u);
  EXPECT_NE(pool.subkey(active[0]).public_key, only.public_key);
  EXPECT_TRUE(pool.CheckInvariants().ok());
}

TEST(CreatePool, SameSeedSameKeys) {
  KeyPool a = MakePool(2, 3, 5, 12, 77);
  KeyPool b = MakePool(2, 3, 5, 12, 77);
  for (size_t i = 0; i < a.subkeys().size(); ++i) {
    EXPECT_EQ(a.subkeys()[i].public_key, b.subkeys()[i].public_key);
  }
  KeyPool c = MakePool(2, 3, 5, 12, 78);
  EXPECT_NE(a.subkeys()[0].public_key, c.subkeys()[0].public_key);
}

TEST(SelectPublicKey, SingleActiveSubkeyIsForced) {
  KeyPool pool = MakePool(1, 1, 100, 100);
  const SubKey first = pool.SelectPublicKey();
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(pool.SelectPublicKey().public_key, first.public_key);
  }
}

TEST(SelectPublicKey, UniformOverSixSubkeys) {
  KeyPool pool = MakePool(2, 3, 1000000, 1000000, 2024);
  std::map<SubKeyId, int> counts;
  for (int i = 0; i < 6000; ++i) ++counts[pool.SelectPublicKey().id];
  ASSERT_EQ(counts.size(), 6u);
  double chi2 = 0;
  for (const auto& [id, c] : counts) {
    EXPECT_GE(c, 800);
    EXPECT_LE(c, 1200);
    chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  }
  // 99.9th percentile of chi-square with 5 degrees of freedom.
  EXPECT_LT(chi2, 20.515);
  // Selection alone never counts as a use.
  EXPECT_EQ(pool.total_uses(), 0u);
}

TEST(SelectPublicKey, ArchivedSubkeysNeverSelected) {
  KeyPool pool = MakePool(1, 6, 1, 1000);
  // Retire five of the six original subkeys; each retirement mints a
  // replacement, so track the survivor among the originals.
  std::set<crypto::BoxPublicKey> retired;
  for (int i = 0; i < 5; ++i) {
    const SubKey s = pool.subkey(static_cast<SubKeyId>(i));
    retired.insert(s.public_key);
    ASSERT_TRUE(pool.RecordUse(s.id).ok());
  }
  for (int i = 0; i < 500; ++i) {
    EXPECT_FALSE(retired.contains(pool.SelectPublicKey().public_key));
  }
}

TEST(RecordUse, PublicThresholdArchivesAndMints) {
  KeyPool pool = MakePool(1, 3, 5, 1000);
  const SubKey s = pool.SelectPublicKey();
  for (int i = 0; i < 4; ++i) {
    auto r = pool.RecordUse(s.id);
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(r->empty());
  }
  auto fifth = pool.RecordUse(s.id);
  ASSERT_TRUE(fifth.ok());
  EXPECT_EQ(fifth->Count(Kind::kSubKeyArchived), 1u);
  EXPECT_EQ(fifth->Count(Kind::kSubKeyMinted), 1u);
  EXPECT_EQ(pool.subkey(s.id).status, KeyStatus::kArchived);
  EXPECT_EQ(pool.ActiveSubKeys().size(), 3u);
  const SubKey fresh = pool.subkeys().back();
  EXPECT_EQ(fresh.parent, s.parent);
  EXPECT_EQ(fresh.use_count, 0u);
}

TEST(RecordUse, PrivateThresholdRotatesWholeFamily) {
  KeyPool pool = MakePool(1, 3, 1000, 12);
  const PrivateKeyId original = pool.private_keys()[0].id;
  RotationReport last;
  for (int i = 0; i < 12; ++i) {
    const SubKey s = pool.SelectPublicKey();
    EXPECT_EQ(s.parent, original);
    auto r = pool.RecordUse(s.id);
    ASSERT_TRUE(r.ok());
    if (i < 11) EXPECT_TRUE(r->empty());
    last = *r;
  }
  EXPECT_EQ(last.Count(Kind::kPrivateKeyArchived), 1u);
  EXPECT_EQ(last.Count(Kind::kSubKeyArchived), 3u);
  EXPECT_EQ(last.Count(Kind::kPrivateKeyMinted), 1u);
  EXPECT_EQ(last.Count(Kind::kSubKeyMinted), 3u);
  EXPECT_EQ(pool.private_keys()[0].status, KeyStatus::kArchived);
  const auto active = pool.ActiveSubKeys();
  ASSERT_EQ(active.size(), 3u);
  for (SubKeyId id : active) EXPECT_NE(pool.subkey(id).parent, original);
  EXPECT_TRUE(pool.CheckInvariants().ok());
}

TEST(RecordUse, ArchivedSubkeyRejected) {
  KeyPool pool = MakePool(1, 2, 1, 1000);
  const SubKey s = pool.SelectPublicKey();
  ASSERT_TRUE(pool.RecordUse(s.id).ok());
  EXPECT_EQ(pool.RecordUse(s.id).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(pool.RecordUse(static_cast<SubKeyId>(999)).status().code(),
            absl::StatusCode::kNotFound);
}

TEST(FindPrivateFor, ActiveArchivedAndForeign) {
  KeyPool pool = MakePool(1, 2, 1, 1000);
  Rng rng(4);
  const SubKey s = pool.SelectPublicKey();
  const crypto::SealedEnvelope env =
      crypto::Seal(ToBytes("old"), s.public_key, nullptr, rng);

  auto before = pool.FindPrivateFor(s.public_key);
  ASSERT_TRUE(before.ok());
  EXPECT_EQ(before->subkey, s.id);
  EXPECT_EQ(before->parent, s.parent);

  ASSERT_TRUE(pool.RecordUse(s.id).ok());
  ASSERT_FALSE(pool.IsActive(s.public_key));
  auto after = pool.FindPrivateFor(s.public_key);
  ASSERT_TRUE(after.ok());
  auto opened = crypto::Open(env, after->keys);
  ASSERT_TRUE(opened.ok());
  EXPECT_EQ(opened->plaintext, ToBytes("old"));

  const auto foreign = crypto::GenerateEncryptionKeys(555).public_key;
  EXPECT_EQ(pool.FindPrivateFor(foreign).status().code(),
            absl::StatusCode::kNotFound);
}

// Random select/use sequences keep every structural invariant.
TEST(KeyPoolProperty, InvariantsHoldUnderRandomUse) {
  Rng driver(31337);
  for (int trial = 0; trial < 40; ++trial) {
    const KeyPoolParams params{
        static_cast<uint32_t>(1 + driver.Uniform(3)),
        static_cast<uint32_t>(1 + driver.Uniform(3)), 1 + driver.Uniform(4),
        1 + driver.Uniform(8)};
    auto pool = KeyPool::Create(params, driver.NextU64());
    ASSERT_TRUE(pool.ok());
    std::set<crypto::BoxPublicKey> archived;
    for (int step = 0; step < 60; ++step) {
      const SubKey s = pool->SelectPublicKey();
      EXPECT_FALSE(archived.contains(s.public_key));
      if (driver.Bernoulli(0.8)) {
        ASSERT_TRUE(pool->RecordUse(s.id).ok());
      }
      for (const SubKey& k : pool->subkeys()) {
        EXPECT_LE(k.use_count, params.public_threshold);
        if (k.status == KeyStatus::kArchived) archived.insert(k.public_key);
      }
      ASSERT_TRUE(pool->CheckInvariants().ok()) << pool->CheckInvariants();
    }
  }
}

// Two-of-K collision frequency under uniform selection matches the birthday
// bound 1 - prod_{i<K} (1 - i/a).
TEST(KeyPoolProperty, SessionCollisionMatchesBirthdayBound) {
  constexpr int kSessions = 3;
  constexpr int kTrials = 20000;
  KeyPool pool = MakePool(2, 3, 1000000, 1000000, 99);
  const double a = 6.0;
  double analytic_distinct = 1.0;
  for (int i = 1; i < kSessions; ++i) analytic_distinct *= (1.0 - i / a);
  int collisions = 0;
  for (int t = 0; t < kTrials; ++t) {
    std::set<SubKeyId> seen;
    for (int s = 0; s < kSessions; ++s) seen.insert(pool.SelectPublicKey().id);
    if (seen.size() < kSessions) ++collisions;
  }
  EXPECT_NEAR(static_cast<double>(collisions) / kTrials,
              1.0 - analytic_distinct, 0.02);
}

}  // namespace
}  // namespace dapriv
