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

#include "dapriv/emergency.h"

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dapriv {
namespace {

class EmergencyTest : public ::testing::Test {
 protected:
  NotifyFn Notifier() {
    return [this](const AccessNotice& n) { notices_.push_back(n); };
  }

  EmergencyStorage storage_;
  Rng rng_{12};
  crypto::EncryptionKeyPair contact_ = crypto::GenerateEncryptionKeys(40);
  std::vector<AccessNotice> notices_;
  const Bytes data_ = ToBytes("{\"allergies\":\"penicillin\"}");
};

TEST_F(EmergencyTest, ServerHoldsOnlyCiphertext) {
  auto snap = EmergencyDeposit(storage_, "patient:0", data_,
                               contact_.public_key, rng_);
  ASSERT_TRUE(snap.ok());
  const std::string wire =
      ToString((*snap)->ciphertext.ciphertext) +
      ToString((*snap)->ciphertext.wrapped_key);
  EXPECT_EQ(wire.find("penicillin"), std::string::npos);
  EXPECT_EQ((*snap)->patient_notify_channel, "patient:0");
  EXPECT_TRUE((*snap)->access_log.empty());
}

TEST_F(EmergencyTest, SecondDepositBecomesCurrent) {
  ASSERT_TRUE(EmergencyDeposit(storage_, "p", data_, contact_.public_key, rng_)
                  .ok());
  ASSERT_TRUE(EmergencyDeposit(storage_, "p", ToBytes("v2"),
                               contact_.public_key, rng_)
                  .ok());
  ASSERT_EQ(storage_.History("p")->size(), 2u);
  EXPECT_EQ(storage_.Current("p")->version, 2u);
  auto plain = EmergencyAccess(storage_, "p", "contact", contact_, 1, Notifier());
  ASSERT_TRUE(plain.ok());
  EXPECT_EQ(*plain, ToBytes("v2"));
}

TEST_F(EmergencyTest, NoDesignatedContactRejected) {
  EXPECT_EQ(EmergencyDeposit(storage_, "p", data_, std::nullopt, rng_)
                .status()
                .code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(storage_.Current("p"), nullptr);
}

TEST_F(EmergencyTest, EveryAccessIsLoggedAndNotified) {
  ASSERT_TRUE(EmergencyDeposit(storage_, "p", data_, contact_.public_key, rng_)
                  .ok());
  auto first = EmergencyAccess(storage_, "p", "contact", contact_, 5, Notifier());
  ASSERT_TRUE(first.ok());
  EXPECT_EQ(*first, data_);
  EXPECT_EQ(storage_.Current("p")->access_log.size(), 1u);
  ASSERT_EQ(notices_.size(), 1u);
  EXPECT_EQ(notices_[0].patient, "p");
  EXPECT_EQ(notices_[0].accessor, "contact");
  EXPECT_EQ(notices_[0].timestamp, 5u);

  ASSERT_TRUE(
      EmergencyAccess(storage_, "p", "contact", contact_, 6, Notifier()).ok());
  EXPECT_EQ(storage_.Current("p")->access_log.size(), 2u);
  EXPECT_EQ(notices_.size(), 2u);
}

TEST_F(EmergencyTest, WrongKeyStillLoggedAndNotified) {
  ASSERT_TRUE(EmergencyDeposit(storage_, "p", data_, contact_.public_key, rng_)
                  .ok());
  const auto intruder = crypto::GenerateEncryptionKeys(41);
  auto attempt =
      EmergencyAccess(storage_, "p", "intruder", intruder, 9, Notifier());
  EXPECT_FALSE(attempt.ok());
  ASSERT_EQ(storage_.Current("p")->access_log.size(), 1u);
  EXPECT_EQ(storage_.Current("p")->access_log[0].accessor, "intruder");
  EXPECT_TRUE(storage_.Current("p")->access_log[0].flag_raised);
  EXPECT_EQ(notices_.size(), 1u);
  EXPECT_EQ(storage_.notifications_sent(), 1u);
}

TEST_F(EmergencyTest, NoSnapshotIsNotFound) {
  EXPECT_EQ(EmergencyAccess(storage_, "ghost", "c", contact_, 1, Notifier())
                .status()
                .code(),
            absl::StatusCode::kNotFound);
  EXPECT_TRUE(notices_.empty());
}

TEST_F(EmergencyTest, NotificationTotalityUnderRandomAccess) {
  Rng driver(3);
  const auto intruder = crypto::GenerateEncryptionKeys(41);
  for (int p = 0; p < 4; ++p) {
    ASSERT_TRUE(EmergencyDeposit(storage_, "p" + std::to_string(p), data_,
                                 contact_.public_key, rng_)
                    .ok());
  }
  size_t attempts = 0;
  for (uint64_t t = 0; t < 100; ++t) {
    const std::string patient = "p" + std::to_string(driver.Uniform(4));
    const auto& key = driver.Bernoulli(0.3) ? intruder : contact_;
    (void)EmergencyAccess(storage_, patient, "who", key, t, Notifier());
    ++attempts;
  }
  size_t logged = 0;
  for (const auto& [patient, history] : storage_.all()) {
    for (const auto& snap : history) logged += snap.access_log.size();
  }
  EXPECT_EQ(logged, attempts);
  EXPECT_EQ(notices_.size(), attempts);
  EXPECT_EQ(storage_.notifications_sent(), attempts);
}

}  // namespace
}  // namespace dapriv
