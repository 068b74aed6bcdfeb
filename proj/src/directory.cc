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

#include "dapriv/directory.h"

#include <algorithm>

#include "absl/strings/str_cat.h"

namespace dapriv {

absl::StatusOr<DirectoryRef> DirectoryRef::Parse(std::string_view text) {
  const size_t hash = text.find('#');
  if (hash == std::string_view::npos ||
      text.find('#', hash + 1) != std::string_view::npos) {
    return absl::InvalidArgumentError(absl::StrCat(
        "directory reference '", std::string(text),
        "' must contain exactly one '#'"));
  }
  DirectoryRef ref{std::string(text.substr(0, hash)),
                   std::string(text.substr(hash + 1))};
  if (ref.directory_id.empty() || ref.entry_id.empty()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "directory reference '", std::string(text), "' has an empty part"));
  }
  return ref;
}

absl::StatusOr<DirectoryRef> Directory::Register(DirectoryEntry entry) {
  if (entry.ref.directory_id != id_) {
    return absl::InvalidArgumentError(
        absl::StrCat("entry ", entry.ref.Render(), " does not belong to ", id_));
  }
  if (entry.ref.entry_id.empty() ||
      entry.ref.entry_id.find('#') != std::string::npos) {
    return absl::InvalidArgumentError("entry id must be non-empty without '#'");
  }
  if (entries_.contains(entry.ref.entry_id)) {
    return absl::AlreadyExistsError(
        absl::StrCat(entry.ref.Render(), " is already registered"));
  }
  DirectoryRef ref = entry.ref;
  entries_.emplace(ref.entry_id, std::move(entry));
  return ref;
}

const DirectoryEntry* Directory::Find(std::string_view entry_id) const {
  auto it = entries_.find(entry_id);
  return it == entries_.end() ? nullptr : &it->second;
}

Directory& DirectoryService::AddDirectory(std::string id) {
  auto it = directories_.find(id);
  if (it != directories_.end()) return it->second;
  std::string key = id;
  return directories_.emplace(std::move(key), Directory(std::move(id)))
      .first->second;
}

Directory* DirectoryService::FindDirectory(std::string_view id) {
  auto it = directories_.find(id);
  return it == directories_.end() ? nullptr : &it->second;
}

const Directory* DirectoryService::FindDirectory(std::string_view id) const {
  auto it = directories_.find(id);
  return it == directories_.end() ? nullptr : &it->second;
}

DirectoryLookup DirectoryService::Lookup(const DirectoryRef& ref) const {
  DirectoryLookup out;
  const Directory* dir = FindDirectory(ref.directory_id);
  if (dir == nullptr) return out;
  out.known_directory = true;
  if (const DirectoryEntry* e = dir->Find(ref.entry_id)) out.entry = *e;
  return out;
}

std::string_view OutcomeName(VerificationOutcome outcome) {
  switch (outcome) {
    case VerificationOutcome::kVerified:
      return "verified";
    case VerificationOutcome::kUnknownDirectory:
      return "unknown_directory";
    case VerificationOutcome::kUnknownEntry:
      return "unknown_entry";
    case VerificationOutcome::kKindMismatch:
      return "kind_mismatch";
    case VerificationOutcome::kMissingCapability:
      return "missing_capability";
  }
  return "unknown";
}

VerificationOutcome EvaluateLab(const DirectoryLookup& lookup,
                                const std::set<std::string>& required_tests) {
  if (!lookup.known_directory) return VerificationOutcome::kUnknownDirectory;
  if (!lookup.entry) return VerificationOutcome::kUnknownEntry;
  if (lookup.entry->kind != EntryKind::kLab) {
    return VerificationOutcome::kKindMismatch;
  }
  const auto& caps = lookup.entry->capabilities;
  if (!std::includes(caps.begin(), caps.end(), required_tests.begin(),
                     required_tests.end())) {
    return VerificationOutcome::kMissingCapability;
  }
  return VerificationOutcome::kVerified;
}

VerificationOutcome EvaluateResearcher(const DirectoryLookup& lookup) {
  if (!lookup.known_directory) return VerificationOutcome::kUnknownDirectory;
  if (!lookup.entry) return VerificationOutcome::kUnknownEntry;
  if (lookup.entry->kind != EntryKind::kResearcher) {
    return VerificationOutcome::kKindMismatch;
  }
  return VerificationOutcome::kVerified;
}

VerificationOutcome VerifyLab(const DirectoryService& directories,
                              const DirectoryRef& ref,
                              const std::set<std::string>& required_tests) {
  return EvaluateLab(directories.Lookup(ref), required_tests);
}

VerificationOutcome VerifyResearcher(const DirectoryService& directories,
                                     const DirectoryRef& ref) {
  return EvaluateResearcher(directories.Lookup(ref));
}

}  // namespace dapriv
