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

#include "dapriv/coordination.h"

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dapriv {
namespace {

DirectoryEntry LabEntry(std::string dir, std::string id,
                        std::set<std::string> caps) {
  DirectoryEntry e;
  e.ref = {std::move(dir), std::move(id)};
  e.kind = EntryKind::kLab;
  e.capabilities = std::move(caps);
  return e;
}

DirectoryEntry ResearcherEntry(std::string dir, std::string id) {
  DirectoryEntry e;
  e.ref = {std::move(dir), std::move(id)};
  e.kind = EntryKind::kResearcher;
  e.capabilities = {"cohort_study"};
  return e;
}

class CoordinationTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Directory& d1 = directories_.AddDirectory("D1");
    ASSERT_TRUE(d1.Register(LabEntry("D1", "L7", {"blood_panel", "xray"})).ok());
    ASSERT_TRUE(d1.Register(LabEntry("D1", "L8", {"xray"})).ok());
    ASSERT_TRUE(d1.Register(ResearcherEntry("D1", "R1")).ok());
    auth_.RegisterPhysician(doctor_.public_part);
  }

  Prescription Prescribe(std::set<std::string> tests) {
    return *IssuePrescription(doctor_, std::move(tests), rng_);
  }

  DirectoryService directories_;
  AuthorizationService auth_{"auth", Rng(11)};
  crypto::SigningIdentity doctor_ = crypto::GenerateIdentity(7, "doctor");
  Rng rng_{3};
  AnonymizerInfo anonymizer_{"anonymizer",
                             crypto::GenerateEncryptionKeys(8).public_key};
};

TEST(DirectoryRef, RenderParseRoundTrip) {
  const DirectoryRef ref{"D1", "L7"};
  EXPECT_EQ(ref.Render(), "D1#L7");
  auto back = DirectoryRef::Parse(ref.Render());
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, ref);
  EXPECT_FALSE(DirectoryRef::Parse("D1L7").ok());
  EXPECT_FALSE(DirectoryRef::Parse("D1#L#7").ok());
  EXPECT_FALSE(DirectoryRef::Parse("#L7").ok());
  EXPECT_FALSE(DirectoryRef::Parse("D1#").ok());
}

TEST_F(CoordinationTest, RegisterEntry) {
  const DirectoryEntry* lab = directories_.FindDirectory("D1")->Find("L7");
  ASSERT_NE(lab, nullptr);
  EXPECT_THAT(lab->capabilities, ::testing::Contains("blood_panel"));
  EXPECT_EQ(directories_.FindDirectory("D1")
                ->Register(LabEntry("D1", "L7", {"mri"}))
                .status()
                .code(),
            absl::StatusCode::kAlreadyExists);
  const DirectoryEntry* researcher =
      directories_.FindDirectory("D1")->Find("R1");
  ASSERT_NE(researcher, nullptr);
  EXPECT_EQ(researcher->kind, EntryKind::kResearcher);
}

TEST_F(CoordinationTest, VerifyLab) {
  EXPECT_EQ(VerifyLab(directories_, {"D1", "L7"}, {"blood_panel"}),
            VerificationOutcome::kVerified);
  EXPECT_EQ(VerifyLab(directories_, {"D1", "L7"}, {"mri"}),
            VerificationOutcome::kMissingCapability);
  EXPECT_EQ(VerifyLab(directories_, {"D9", "L1"}, {"xray"}),
            VerificationOutcome::kUnknownDirectory);
  EXPECT_EQ(VerifyLab(directories_, {"D1", "L99"}, {"xray"}),
            VerificationOutcome::kUnknownEntry);
  EXPECT_EQ(VerifyLab(directories_, {"D1", "R1"}, {}),
            VerificationOutcome::kKindMismatch);
}

TEST_F(CoordinationTest, VerifyResearcher) {
  EXPECT_EQ(VerifyResearcher(directories_, {"D1", "R1"}),
            VerificationOutcome::kVerified);
  EXPECT_EQ(VerifyResearcher(directories_, {"D1", "L7"}),
            VerificationOutcome::kKindMismatch);
  EXPECT_EQ(VerifyResearcher(directories_, {"D1", "R404"}),
            VerificationOutcome::kUnknownEntry);
}

TEST_F(CoordinationTest, AuthorizeLabSessionSharesOneSessionId) {
  auto session =
      auth_.AuthorizeLabSession(Prescribe({"blood_panel"}), {"D1", "L7"},
                                directories_);
  ASSERT_TRUE(session.ok()) << session.status();
  EXPECT_EQ(session->patient_copy, session->lab_copy);
  EXPECT_EQ(session->patient_copy.value.size(), 32u);
  const TempStore* store = auth_.FindStore(session->patient_copy);
  ASSERT_NE(store, nullptr);
  EXPECT_EQ(store->acl().at(Role::kPatient), Access::kReadWrite);
  EXPECT_EQ(store->acl().at(Role::kLab), Access::kReadWrite);
  EXPECT_FALSE(store->acl().contains(Role::kResearcher));
  EXPECT_EQ(store->created_by(), "auth");
}

TEST_F(CoordinationTest, FlippedPrescriptionByteRejected) {
  Prescription p = Prescribe({"blood_panel"});
  p.nonce[0] = p.nonce[0] == 'a' ? 'b' : 'a';
  EXPECT_EQ(auth_.AuthorizeLabSession(p, {"D1", "L7"}, directories_)
                .status()
                .code(),
            absl::StatusCode::kUnauthenticated);
  EXPECT_TRUE(auth_.stores().empty());
}

TEST_F(CoordinationTest, LabLackingTestRejected) {
  EXPECT_EQ(auth_.AuthorizeLabSession(Prescribe({"blood_panel"}), {"D1", "L8"},
                                      directories_)
                .status()
                .code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(auth_.AuthorizeLabSession(Prescribe({"xray"}), {"D9", "L1"},
                                      directories_)
                .status()
                .code(),
            absl::StatusCode::kNotFound);
}

TEST_F(CoordinationTest, UnregisteredPhysicianRejected) {
  const auto quack = crypto::GenerateIdentity(99);
  Prescription p = *IssuePrescription(quack, {"xray"}, rng_);
  EXPECT_EQ(auth_.AuthorizeLabSession(p, {"D1", "L7"}, directories_)
                .status()
                .code(),
            absl::StatusCode::kPermissionDenied);
}

TEST_F(CoordinationTest, ReplayedPrescriptionRejected) {
  const Prescription p = Prescribe({"xray"});
  ASSERT_TRUE(auth_.AuthorizeLabSession(p, {"D1", "L7"}, directories_).ok());
  EXPECT_EQ(auth_.AuthorizeLabSession(p, {"D1", "L7"}, directories_)
                .status()
                .code(),
            absl::StatusCode::kAlreadyExists);
}

TEST_F(CoordinationTest, SessionIdsDistinctAcrossSessions) {
  std::set<SessionId> ids;
  for (int i = 0; i < 50; ++i) {
    auto s = auth_.AuthorizeLabSession(Prescribe({"xray"}), {"D1", "L8"},
                                       directories_);
    ASSERT_TRUE(s.ok());
    ids.insert(s->patient_copy);
  }
  EXPECT_EQ(ids.size(), 50u);
}

TEST_F(CoordinationTest, StoreReadWriteSemantics) {
  auto s = auth_.AuthorizeLabSession(Prescribe({"xray"}), {"D1", "L7"},
                                     directories_);
  ASSERT_TRUE(s.ok());
  TempStore* store = auth_.FindStore(s->patient_copy);
  const auto key = crypto::GenerateEncryptionKeys(21).public_key;
  auto slot = store->Write(Role::kPatient, key, "patient:0");
  ASSERT_TRUE(slot.ok());
  auto read = store->Read(Role::kLab, *slot, "D1#L7");
  ASSERT_TRUE(read.ok());
  EXPECT_EQ(std::get<crypto::BoxPublicKey>(*read), key);

  EXPECT_EQ(store->Read(Role::kResearcher, *slot, "D1#R1").status().code(),
            absl::StatusCode::kPermissionDenied);
  EXPECT_EQ(store->Read(Role::kLab, 5, "D1#L7").status().code(),
            absl::StatusCode::kNotFound);

  ASSERT_EQ(store->journal().size(), 4u);
  EXPECT_FALSE(store->journal()[2].permitted);
  EXPECT_EQ(store->journal()[2].accessor, "D1#R1");
  EXPECT_TRUE(store->journal()[3].permitted);
  EXPECT_FALSE(store->journal()[3].succeeded);
}

TEST_F(CoordinationTest, ResearchChannel) {
  auto c1 = auth_.SetupResearchChannel("study-a", {"D1", "R1"}, directories_,
                                       anonymizer_);
  ASSERT_TRUE(c1.ok());
  auto c2 = auth_.SetupResearchChannel("study-b", {"D1", "R1"}, directories_,
                                       anonymizer_);
  ASSERT_TRUE(c2.ok());
  EXPECT_NE(c1->session_id, c2->session_id);
  auto again = auth_.SetupResearchChannel("study-a", {"D1", "R1"},
                                          directories_, anonymizer_);
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(again->session_id, c1->session_id);

  TempStore* store = auth_.FindStore(c1->session_id);
  ASSERT_NE(store, nullptr);
  Rng rng(1);
  const auto env = crypto::Seal(ToBytes("{}"), anonymizer_.public_key, nullptr,
                                rng);
  ASSERT_TRUE(store->Write(Role::kPatient, env).ok());
  EXPECT_TRUE(store->Read(Role::kAnonymizer, 0).ok());
  EXPECT_EQ(store->Read(Role::kResearcher, 0).status().code(),
            absl::StatusCode::kPermissionDenied);
  EXPECT_EQ(store->Read(Role::kPatient, 0).status().code(),
            absl::StatusCode::kPermissionDenied);
  EXPECT_EQ(store->Write(Role::kResearcher, env).status().code(),
            absl::StatusCode::kPermissionDenied);
}

TEST_F(CoordinationTest, UnverifiedResearcherRejected) {
  EXPECT_FALSE(auth_.SetupResearchChannel("s", {"D1", "L7"}, directories_,
                                          anonymizer_)
                   .ok());
  EXPECT_FALSE(auth_.SetupResearchChannel("s", {"D2", "R1"}, directories_,
                                          anonymizer_)
                   .ok());
  EXPECT_TRUE(auth_.stores().empty());
}

}  // namespace
}  // namespace dapriv
