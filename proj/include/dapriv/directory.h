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

#ifndef DAPRIV_DIRECTORY_H_
#define DAPRIV_DIRECTORY_H_

// Directory servers list the labs and researchers that may take part in a
// flow. Entries are addressed as "DirectoryID#EntryID".

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dapriv/crypto.h"

namespace dapriv {

struct DirectoryRef {
  std::string directory_id;
  std::string entry_id;

  std::string Render() const { return directory_id + "#" + entry_id; }
  static absl::StatusOr<DirectoryRef> Parse(std::string_view text);

  friend auto operator<=>(const DirectoryRef&, const DirectoryRef&) = default;
  friend bool operator==(const DirectoryRef&, const DirectoryRef&) = default;
};

enum class EntryKind { kLab, kResearcher };

struct DirectoryEntry {
  DirectoryRef ref;
  EntryKind kind = EntryKind::kLab;
  // Test types for labs, study descriptors for researchers.
  std::set<std::string> capabilities;
  crypto::VerifyKey verify_key;
  crypto::BoxPublicKey encryption_key;
};

class Directory {
 public:
  explicit Directory(std::string id) : id_(std::move(id)) {}

  const std::string& id() const { return id_; }

  // AlreadyExists on a duplicate entry id, InvalidArgument when the entry's
  // directory id does not name this directory.
  absl::StatusOr<DirectoryRef> Register(DirectoryEntry entry);
  const DirectoryEntry* Find(std::string_view entry_id) const;
  const std::map<std::string, DirectoryEntry, std::less<>>& entries() const {
    return entries_;
  }

 private:
  std::string id_;
  std::map<std::string, DirectoryEntry, std::less<>> entries_;
};

// Answer to a lookup, as a directory server would report it.
struct DirectoryLookup {
  bool known_directory = false;
  std::optional<DirectoryEntry> entry;
};

class DirectoryService {
 public:
  Directory& AddDirectory(std::string id);
  Directory* FindDirectory(std::string_view id);
  const Directory* FindDirectory(std::string_view id) const;
  DirectoryLookup Lookup(const DirectoryRef& ref) const;
  const std::map<std::string, Directory, std::less<>>& directories() const {
    return directories_;
  }

 private:
  std::map<std::string, Directory, std::less<>> directories_;
};

enum class VerificationOutcome {
  kVerified,
  kUnknownDirectory,
  kUnknownEntry,
  kKindMismatch,
  kMissingCapability,
};

std::string_view OutcomeName(VerificationOutcome outcome);

VerificationOutcome EvaluateLab(const DirectoryLookup& lookup,
                                const std::set<std::string>& required_tests);
VerificationOutcome EvaluateResearcher(const DirectoryLookup& lookup);

VerificationOutcome VerifyLab(const DirectoryService& directories,
                              const DirectoryRef& ref,
                              const std::set<std::string>& required_tests);
VerificationOutcome VerifyResearcher(const DirectoryService& directories,
                                     const DirectoryRef& ref);

}  // namespace dapriv

#endif  // DAPRIV_DIRECTORY_H_
