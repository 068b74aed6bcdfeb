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

#include "dapriv/records.h"

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dapriv {
namespace {

using ::testing::ElementsAre;
using ::testing::IsEmpty;
using ::testing::Pair;
using ::testing::SizeIs;

MedicalRecord SampleRecord() {
  MedicalRecord r;
  r.explicit_ids = {"Ada Lovelace", "123-45-6789"};
  r.quasi_ids = {"1815-12-10", "47677", "F"};
  r.sensitive = {{"diagnosis", "flu"}, {"blood_type", "O+"}};
  return r;
}

TEST(SanitizeRecord, KeepsExactlyPolicyFields) {
  auto out = SanitizeRecord(SampleRecord(), {"birth_date", "diagnosis"});
  ASSERT_TRUE(out.ok());
  EXPECT_THAT(out->record, ElementsAre(Pair("birth_date", "1815-12-10"),
                                       Pair("diagnosis", "flu")));
  EXPECT_THAT(out->warnings, IsEmpty());
}

TEST(SanitizeRecord, ExplicitIdentifiersDroppedWithWarning) {
  auto out = SanitizeRecord(SampleRecord(), {"ssn", "name", "zip"});
  ASSERT_TRUE(out.ok());
  EXPECT_THAT(out->record, ElementsAre(Pair("zip", "47677")));
  EXPECT_THAT(out->warnings, SizeIs(2));
}

TEST(SanitizeRecord, EmptyPolicyGivesEmptyRecord) {
  auto out = SanitizeRecord(SampleRecord(), {});
  ASSERT_TRUE(out.ok());
  EXPECT_THAT(out->record, IsEmpty());
}

TEST(SanitizeRecord, UnknownFieldRejected) {
  EXPECT_EQ(SanitizeRecord(SampleRecord(), {"shoe_size"}).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(SanitizeRecord, NoSubsetOfPolicyEverLeaksIdentifiers) {
  const MedicalRecord record = SampleRecord();
  const std::vector<std::string> fields = {"name", "ssn", "birth_date",
                                           "zip", "gender", "diagnosis",
                                           "blood_type"};
  for (uint32_t mask = 0; mask < (1u << fields.size()); ++mask) {
    std::set<std::string> policy;
    for (size_t i = 0; i < fields.size(); ++i) {
      if (mask & (1u << i)) policy.insert(fields[i]);
    }
    auto out = SanitizeRecord(record, policy);
    ASSERT_TRUE(out.ok());
    for (const auto& [field, value] : out->record) {
      EXPECT_FALSE(IsExplicitIdentifier(field));
      EXPECT_NE(value, record.explicit_ids.name);
      EXPECT_NE(value, record.explicit_ids.national_id);
      EXPECT_TRUE(policy.contains(field));
    }
  }
}

TEST(Prescription, IssueAndVerify) {
  Rng rng(5);
  const auto doctor = crypto::GenerateIdentity(100, "doctor");
  auto p = IssuePrescription(doctor, {"blood_panel"}, rng);
  ASSERT_TRUE(p.ok());
  EXPECT_TRUE(VerifyPrescription(*p).ok());
  EXPECT_EQ(p->physician_pub, doctor.public_part);
}

TEST(Prescription, PatientAddingATestBreaksSignature) {
  Rng rng(5);
  const auto doctor = crypto::GenerateIdentity(100);
  auto p = IssuePrescription(doctor, {"blood_panel"}, rng);
  ASSERT_TRUE(p.ok());
  p->tests.insert("mri");
  EXPECT_EQ(VerifyPrescription(*p).code(), absl::StatusCode::kUnauthenticated);
}

TEST(Prescription, FlippedSignatureByteRejected) {
  Rng rng(5);
  const auto doctor = crypto::GenerateIdentity(100);
  auto p = IssuePrescription(doctor, {"blood_panel"}, rng);
  ASSERT_TRUE(p.ok());
  p->signature.bytes[7] ^= 0x01;
  EXPECT_FALSE(VerifyPrescription(*p).ok());
}

TEST(Prescription, ResigningUnderAnotherKeyRejected) {
  Rng rng(5);
  const auto doctor = crypto::GenerateIdentity(100);
  const auto forger = crypto::GenerateIdentity(101);
  auto p = IssuePrescription(doctor, {"blood_panel"}, rng);
  ASSERT_TRUE(p.ok());
  p->signature = crypto::Sign(p->SignedPayload(), forger);
  EXPECT_EQ(VerifyPrescription(*p).code(), absl::StatusCode::kUnauthenticated);
}

TEST(Prescription, EmptyTestSetRejected) {
  Rng rng(5);
  EXPECT_EQ(IssuePrescription(crypto::GenerateIdentity(1), {}, rng)
                .status()
                .code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(Prescription, NoncesAreFresh) {
  Rng rng(5);
  const auto doctor = crypto::GenerateIdentity(100);
  std::set<std::string> nonces;
  for (int i = 0; i < 200; ++i) {
    nonces.insert(IssuePrescription(doctor, {"x"}, rng)->nonce);
  }
  EXPECT_EQ(nonces.size(), 200u);
}

TEST(ResultPointer, SerializeRoundTrip) {
  Rng rng(9);
  const auto lab = crypto::GenerateIdentity(3);
  ResultPointer ptr;
  ptr.location = "blob:abc";
  ptr.symmetric_key = crypto::GenerateSymmetricKey(rng);
  ptr.lab_signature = crypto::Sign(ToBytes("x"), lab);
  auto back = ResultPointer::Parse(ptr.Serialize());
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->location, ptr.location);
  EXPECT_EQ(back->symmetric_key, ptr.symmetric_key);
  EXPECT_EQ(back->lab_signature.bytes, ptr.lab_signature.bytes);
  EXPECT_EQ(back->lab_signature.signer_public, ptr.lab_signature.signer_public);
  EXPECT_FALSE(ResultPointer::Parse(ToBytes("{not json")).ok());
}

TEST(ResultFile, SerializeRoundTrip) {
  const auto lab = crypto::GenerateIdentity(3);
  ResultFile file;
  file.report = MakeLabReport("D1#L1", {{"hemoglobin", "13.9"}});
  file.lab_signature = crypto::Sign(file.report, lab);
  auto back = ResultFile::Parse(file.Serialize());
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->report, file.report);
  auto fields = ParseLabReport(back->report);
  ASSERT_TRUE(fields.ok());
  EXPECT_THAT(*fields, ElementsAre(Pair("hemoglobin", "13.9")));
}

TEST(Fields, SerializeRoundTrip) {
  const FieldMap f = {{"a", "1"}, {"b", ""}};
  auto back = ParseFields(SerializeFields(f));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, f);
  EXPECT_FALSE(ParseFields(ToBytes("[1,2]")).ok());
}

TEST(Provenance, BrokenSignatureQuarantines) {
  CertificateRegistry registry;
  const auto lab = crypto::GenerateIdentity(3);
  ASSERT_TRUE(
      registry.Register({"D1#L1", Role::kLab, lab.public_part, {}}).ok());
  MedicalRecord r = SampleRecord();
  const Bytes payload = ToBytes("result");
  r.provenance.push_back({payload, crypto::Sign(payload, lab)});
  EXPECT_FALSE(IsQuarantined(r, registry));
  r.provenance[0].payload[0] ^= 1;
  EXPECT_TRUE(IsQuarantined(r, registry));

  MedicalRecord unknown = SampleRecord();
  const auto stranger = crypto::GenerateIdentity(4);
  unknown.provenance.push_back({payload, crypto::Sign(payload, stranger)});
  EXPECT_TRUE(IsQuarantined(unknown, registry));
}

}  // namespace
}  // namespace dapriv
