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

#ifndef DAPRIV_REPORT_H_
#define DAPRIV_REPORT_H_

// Serializations of a RunReport. The records format is one JSON object per
// line, header first, and parses back into an equal report.

#include <string>
#include <string_view>

#include "absl/status/statusor.h"
#include "dapriv/harness.h"

namespace dapriv {

enum class EmitFormat { kSummary, kRecords };

absl::StatusOr<EmitFormat> ParseEmitFormat(std::string_view name);

std::string Emit(const RunReport& report, EmitFormat format);

absl::StatusOr<RunReport> ParseRecords(std::string_view text);

}  // namespace dapriv

#endif  // DAPRIV_REPORT_H_
