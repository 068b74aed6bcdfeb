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

#include "dapriv/report.h"

#include <string>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dapriv {
namespace {

using ::testing::HasSubstr;

RunReport Sample() {
  RunReport r;
  r.scenario = "sample";
  r.seed = 42;
  r.token_mode = "dapriv_keys";
  r.flows = {{"flow:000000", "lab", "patient:0", true, ""},
             {"flow:000001", "lab", "patient:1", false, "session denied: x"},
             {"study:s", "release", "D1#R1", true, "released"}};
  r.metrics = {{"linkage_rate", 0.1}, {"enrichment", 1.0 / 3.0}};
  r.invariants = {{"acl_soundness", true, ""},
                  {"consent_soundness", false, "patient:3 wrote"}};
  r.event_log_digest = "abc123";
  return r;
}

TEST(ReportTest, SummaryHasFlowCounts) {
  const std::string text = Emit(Sample(), EmitFormat::kSummary);
  EXPECT_THAT(text, HasSubstr("lab       flows: 1 completed, 1 not completed"));
  EXPECT_THAT(text, HasSubstr("session denied: x"));
  EXPECT_THAT(text, HasSubstr("VIOLATED (patient:3 wrote)"));
}

TEST(ReportTest, RecordsRoundTrip) {
  const RunReport original = Sample();
  const std::string text = Emit(original, EmitFormat::kRecords);
  auto parsed = ParseRecords(text);
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  EXPECT_EQ(*parsed, original);
  EXPECT_EQ(Emit(*parsed, EmitFormat::kRecords), text);
}

TEST(ReportTest, EmptyReportIsHeaderOnly) {
  const std::string text = Emit(RunReport{}, EmitFormat::kRecords);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_THAT(text, HasSubstr("\"record\":\"header\""));
  auto parsed = ParseRecords(text);
  ASSERT_TRUE(parsed.ok());
  EXPECT_EQ(*parsed, RunReport{});
}

TEST(ReportTest, RejectsMalformedInput) {
  EXPECT_FALSE(ParseRecords("").ok());
  EXPECT_FALSE(ParseRecords("{\"record\":\"run\"}\n").ok());
  const std::string header = Emit(RunReport{}, EmitFormat::kRecords);
  EXPECT_FALSE(ParseRecords(header + "not json\n").ok());
  EXPECT_FALSE(ParseRecords(header + "{\"record\":\"flow\"}\n").ok());
  EXPECT_FALSE(ParseRecords(header + "{\"record\":\"mystery\"}\n").ok());
}

TEST(ReportTest, EmitFormatNames) {
  EXPECT_EQ(*ParseEmitFormat("summary"), EmitFormat::kSummary);
  EXPECT_EQ(*ParseEmitFormat("records"), EmitFormat::kRecords);
  EXPECT_FALSE(ParseEmitFormat("xml").ok());
}

}  // namespace
}  // namespace dapriv
