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

#include "dapriv/scenario.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "yaml-cpp/yaml.h"

namespace dapriv {
namespace {

constexpr const char* kDefaultTests[] = {"blood_panel", "lipid_panel", "xray"};
constexpr char kAllLabs[] = "all_labs";

// Parse errors carry the node's line so a user can find the offending entry.
class ParseError {
 public:
  ParseError(const YAML::Node& node, std::string field, std::string what)
      : line_(node.Mark().line + 1),
        field_(std::move(field)),
        what_(std::move(what)) {}

  absl::Status ToStatus() const {
    return absl::InvalidArgumentError(
        absl::StrCat("line ", line_, ": field '", field_, "': ", what_));
  }

 private:
  int line_;
  std::string field_;
  std::string what_;
};

void CheckKeys(const YAML::Node& map, const std::string& where,
               std::initializer_list<std::string_view> allowed) {
  if (!map.IsMap()) throw ParseError(map, where, "expected a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    bool known = false;
    for (std::string_view a : allowed) known = known || a == key;
    if (!known) {
      const std::string field = where.empty() ? key : where + "." + key;
      throw ParseError(kv.first, field, "unknown field");
    }
  }
}

template <typename T>
T Scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw ParseError(node, field, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(node, field, "value has the wrong type");
  }
}

template <typename T>
void Optional(const YAML::Node& map, const char* key, const std::string& where,
              T& out) {
  if (const YAML::Node n = map[key]) {
    out = Scalar<T>(n, where.empty() ? key : where + "." + key);
  }
}

std::set<std::string> StringSet(const YAML::Node& node,
                                const std::string& field) {
  if (!node.IsSequence()) throw ParseError(node, field, "expected a list");
  std::set<std::string> out;
  for (const YAML::Node& item : node) {
    out.insert(Scalar<std::string>(item, field));
  }
  return out;
}

DirectoryRef Ref(const YAML::Node& node, const std::string& field) {
  auto ref = DirectoryRef::Parse(Scalar<std::string>(node, field));
  if (!ref.ok()) throw ParseError(node, field, std::string(ref.status().message()));
  return *ref;
}

GeneralizationHierarchy ParseHierarchy(const YAML::Node& node,
                                       const std::string& field) {
  if (!node.IsSequence()) throw ParseError(node, field, "expected a list");
  GeneralizationHierarchy h;
  for (const YAML::Node& step : node) {
    if (step.IsScalar()) {
      if (step.as<std::string>() != "suppress") {
        throw ParseError(step, field, "scalar steps must be 'suppress'");
      }
      h.steps.push_back(GeneralizationLevel::Suppress());
      continue;
    }
    CheckKeys(step, field, {"mask", "table"});
    if (step["mask"]) {
      h.steps.push_back(GeneralizationLevel::MaskSuffix(
          Scalar<size_t>(step["mask"], field + ".mask")));
    } else if (const YAML::Node t = step["table"]) {
      if (!t.IsMap()) throw ParseError(t, field + ".table", "expected a mapping");
      std::map<std::string, std::string> table;
      for (const auto& kv : t) {
        table[kv.first.as<std::string>()] =
            Scalar<std::string>(kv.second, field + ".table");
      }
      h.steps.push_back(GeneralizationLevel::Table(std::move(table)));
    } else {
      throw ParseError(step, field, "step needs 'mask' or 'table'");
    }
  }
  return h;
}

void ParsePolicy(const YAML::Node& node, AnonymizationPolicy& policy) {
  CheckKeys(node, "policy",
            {"k", "l", "quasi_id_fields", "sensitive_field", "hierarchies",
             "min_pool_size"});
  Optional(node, "k", "policy", policy.k);
  Optional(node, "l", "policy", policy.l);
  Optional(node, "sensitive_field", "policy", policy.sensitive_field);
  Optional(node, "min_pool_size", "policy", policy.min_pool_size);
  if (const YAML::Node q = node["quasi_id_fields"]) {
    if (!q.IsSequence()) {
      throw ParseError(q, "policy.quasi_id_fields", "expected a list");
    }
    policy.quasi_id_fields.clear();
    for (const YAML::Node& f : q) {
      policy.quasi_id_fields.push_back(
          Scalar<std::string>(f, "policy.quasi_id_fields"));
    }
  }
  if (const YAML::Node hs = node["hierarchies"]) {
    if (!hs.IsMap()) {
      throw ParseError(hs, "policy.hierarchies", "expected a mapping");
    }
    for (const auto& kv : hs) {
      const std::string f = kv.first.as<std::string>();
      policy.hierarchies[f] =
          ParseHierarchy(kv.second, "policy.hierarchies." + f);
    }
  }
  if (absl::Status s = policy.Validate(); !s.ok()) {
    throw ParseError(node, "policy", std::string(s.message()));
  }
}

DirectorySpec ParseDirectory(const YAML::Node& node) {
  CheckKeys(node, "directories", {"id", "labs", "researchers"});
  DirectorySpec d;
  if (!node["id"]) throw ParseError(node, "directories.id", "missing");
  d.id = Scalar<std::string>(node["id"], "directories.id");
  if (const YAML::Node labs = node["labs"]) {
    for (const YAML::Node& lab : labs) {
      CheckKeys(lab, "directories.labs", {"id", "tests"});
      LabSpec spec;
      spec.id = Scalar<std::string>(lab["id"], "directories.labs.id");
      if (lab["tests"]) {
        spec.tests = StringSet(lab["tests"], "directories.labs.tests");
      }
      d.labs.push_back(std::move(spec));
    }
  }
  if (const YAML::Node rs = node["researchers"]) {
    for (const YAML::Node& r : rs) {
      CheckKeys(r, "directories.researchers", {"id", "studies"});
      ResearcherSpec spec;
      spec.id = Scalar<std::string>(r["id"], "directories.researchers.id");
      if (r["studies"]) {
        spec.studies = StringSet(r["studies"], "directories.researchers.studies");
      }
      d.researchers.push_back(std::move(spec));
    }
  }
  return d;
}

ScheduleItem ParseScheduleItem(const YAML::Node& node) {
  if (!node.IsMap() || node.size() != 1) {
    throw ParseError(node, "schedule",
                     "each entry is a single-key mapping naming its kind");
  }
  const auto kv = *node.begin();
  const std::string kind = kv.first.as<std::string>();
  const YAML::Node body = kv.second;
  const std::string where = "schedule." + kind;
  if (kind == "lab_flow") {
    CheckKeys(body, where, {"patient", "physician", "lab", "tests", "tamper"});
    LabFlowSpec spec;
    Optional(body, "patient", where, spec.patient);
    if (body["physician"]) {
      spec.physician = Scalar<size_t>(body["physician"], where + ".physician");
    }
    if (!body["lab"]) throw ParseError(body, where + ".lab", "missing");
    spec.lab = Ref(body["lab"], where + ".lab");
    spec.tests = body["tests"]
                     ? StringSet(body["tests"], where + ".tests")
                     : std::set<std::string>{"blood_panel"};
    if (const YAML::Node t = body["tamper"]) {
      auto tamper = ParseTamper(Scalar<std::string>(t, where + ".tamper"));
      if (!tamper) throw ParseError(t, where + ".tamper", "unknown tamper kind");
      spec.tamper = *tamper;
    }
    return spec;
  }
  if (kind == "round_robin") {
    CheckKeys(body, where, {"sessions_per_patient", "tests"});
    RoundRobinSpec spec;
    Optional(body, "sessions_per_patient", where, spec.sessions_per_patient);
    spec.tests = body["tests"]
                     ? StringSet(body["tests"], where + ".tests")
                     : std::set<std::string>{"blood_panel"};
    return spec;
  }
  if (kind == "research") {
    CheckKeys(body, where,
              {"study", "researcher", "consent_fraction", "share_policy",
               "bypass_anonymizer"});
    ResearchFlowSpec spec;
    if (!body["study"]) throw ParseError(body, where + ".study", "missing");
    spec.study_id = Scalar<std::string>(body["study"], where + ".study");
    if (!body["researcher"]) {
      throw ParseError(body, where + ".researcher", "missing");
    }
    spec.researcher = Ref(body["researcher"], where + ".researcher");
    Optional(body, "consent_fraction", where, spec.consent_fraction);
    if (spec.consent_fraction < 0.0 || spec.consent_fraction > 1.0) {
      throw ParseError(body["consent_fraction"], where + ".consent_fraction",
                       "must lie in [0, 1]");
    }
    spec.share_policy = body["share_policy"]
                            ? StringSet(body["share_policy"],
                                        where + ".share_policy")
                            : std::set<std::string>{kFieldBirthDate, kFieldZip,
                                                    kFieldGender, "diagnosis"};
    Optional(body, "bypass_anonymizer", where, spec.bypass_anonymizer);
    return spec;
  }
  if (kind == "emergency") {
    CheckKeys(body, where, {"patient", "designate_contact", "accesses"});
    EmergencySpec spec;
    Optional(body, "patient", where, spec.patient);
    Optional(body, "designate_contact", where, spec.designate_contact);
    if (const YAML::Node a = body["accesses"]) {
      if (!a.IsSequence()) throw ParseError(a, where + ".accesses", "expected a list");
      for (const YAML::Node& who : a) {
        std::string s = Scalar<std::string>(who, where + ".accesses");
        if (s != "contact" && s != "intruder") {
          throw ParseError(who, where + ".accesses",
                           "entries are 'contact' or 'intruder'");
        }
        spec.accesses.push_back(std::move(s));
      }
    }
    return spec;
  }
  throw ParseError(kv.first, "schedule", absl::StrCat("unknown kind '", kind, "'"));
}

Scenario ParseNode(const YAML::Node& root) {
  CheckKeys(root, "",
            {"name", "seed", "token_mode", "patients", "physicians", "labs",
             "researchers", "key_pool", "directories", "schedule", "policy",
             "coalition"});
  Scenario s;
  s.policy = DefaultPolicy();
  Optional(root, "name", "", s.name);
  Optional(root, "seed", "", s.seed);
  Optional(root, "patients", "", s.patients);
  Optional(root, "physicians", "", s.physicians);
  if (const YAML::Node m = root["token_mode"]) {
    const std::string mode = Scalar<std::string>(m, "token_mode");
    if (mode == TokenModeName(TokenMode::kBaselineSsn)) {
      s.token_mode = TokenMode::kBaselineSsn;
    } else if (mode == TokenModeName(TokenMode::kDaprivKeys)) {
      s.token_mode = TokenMode::kDaprivKeys;
    } else {
      throw ParseError(m, "token_mode", "expected baseline_ssn or dapriv_keys");
    }
  }
  if (const YAML::Node kp = root["key_pool"]) {
    CheckKeys(kp, "key_pool",
              {"private_keys", "subkeys_per_private", "public_threshold",
               "private_threshold"});
    Optional(kp, "private_keys", "key_pool", s.key_pool.private_keys);
    Optional(kp, "subkeys_per_private", "key_pool",
             s.key_pool.subkeys_per_private);
    Optional(kp, "public_threshold", "key_pool", s.key_pool.public_threshold);
    Optional(kp, "private_threshold", "key_pool", s.key_pool.private_threshold);
  }

  if (const YAML::Node ds = root["directories"]) {
    if (root["labs"] || root["researchers"]) {
      throw ParseError(ds, "directories",
                       "give either directories or labs/researchers counts");
    }
    if (!ds.IsSequence()) throw ParseError(ds, "directories", "expected a list");
    for (const YAML::Node& d : ds) s.directories.push_back(ParseDirectory(d));
  } else {
    size_t labs = 3;
    size_t researchers = 1;
    Optional(root, "labs", "", labs);
    Optional(root, "researchers", "", researchers);
    DirectorySpec d{"D1", {}, {}};
    for (size_t i = 1; i <= labs; ++i) {
      d.labs.push_back({absl::StrCat("L", i),
                        {std::begin(kDefaultTests), std::end(kDefaultTests)}});
    }
    for (size_t i = 1; i <= researchers; ++i) {
      d.researchers.push_back({absl::StrCat("R", i), {}});
    }
    s.directories.push_back(std::move(d));
  }

  if (const YAML::Node p = root["policy"]) ParsePolicy(p, s.policy);

  if (const YAML::Node sched = root["schedule"]) {
    if (!sched.IsSequence()) throw ParseError(sched, "schedule", "expected a list");
    for (const YAML::Node& item : sched) {
      s.schedule.push_back(ParseScheduleItem(item));
    }
  }

  if (const YAML::Node c = root["coalition"]) {
    if (c.IsScalar() && c.as<std::string>() == kAllLabs) {
      for (const DirectoryRef& ref : s.LabRefs()) {
        s.coalition.push_back(ref.Render());
      }
    } else {
      if (!c.IsSequence()) throw ParseError(c, "coalition", "expected a list");
      for (const YAML::Node& member : c) {
        const std::string id = Scalar<std::string>(member, "coalition");
        if (id == kAllLabs) {
          for (const DirectoryRef& ref : s.LabRefs()) {
            s.coalition.push_back(ref.Render());
          }
        } else {
          s.coalition.push_back(id);
        }
      }
    }
  }
  return s;
}

bool IsFixedEntityId(const std::string& id) {
  return id == "auth" || id == "blob_store" || id == "anonymizer" ||
         id == "emergency_server";
}

// Parses "<prefix><index>" and checks the index is below `count`.
bool IndexedIdExists(const std::string& id, std::string_view prefix,
                     size_t count) {
  if (id.rfind(prefix, 0) != 0) return false;
  const std::string digits = id.substr(prefix.size());
  if (digits.empty() || digits.size() > 9) return false;
  for (char ch : digits) {
    if (ch < '0' || ch > '9') return false;
  }
  return std::stoul(digits) < count;
}

}  // namespace

std::string_view TokenModeName(TokenMode mode) {
  switch (mode) {
    case TokenMode::kBaselineSsn:
      return "baseline_ssn";
    case TokenMode::kDaprivKeys:
      return "dapriv_keys";
  }
  return "unknown";
}

std::string_view TamperName(TamperKind kind) {
  switch (kind) {
    case TamperKind::kNone:
      return "none";
    case TamperKind::kPrescriptionByteFlip:
      return "prescription_byte_flip";
    case TamperKind::kPrescriptionTestsAltered:
      return "prescription_tests_altered";
    case TamperKind::kSubstitutedStoreKey:
      return "substituted_store_key";
    case TamperKind::kMutatedPointerEnvelope:
      return "mutated_pointer_envelope";
    case TamperKind::kMutatedResultBlob:
      return "mutated_result_blob";
    case TamperKind::kMutatedHandoffEnvelope:
      return "mutated_handoff_envelope";
  }
  return "unknown";
}

std::optional<TamperKind> ParseTamper(std::string_view name) {
  if (name == "none") return TamperKind::kNone;
  for (TamperKind kind : AllTampers()) {
    if (TamperName(kind) == name) return kind;
  }
  return std::nullopt;
}

std::vector<TamperKind> AllTampers() {
  return {TamperKind::kPrescriptionByteFlip,
          TamperKind::kPrescriptionTestsAltered,
          TamperKind::kSubstitutedStoreKey,
          TamperKind::kMutatedPointerEnvelope,
          TamperKind::kMutatedResultBlob,
          TamperKind::kMutatedHandoffEnvelope};
}

std::vector<DirectoryRef> Scenario::LabRefs() const {
  std::vector<DirectoryRef> out;
  for (const DirectorySpec& d : directories) {
    for (const LabSpec& lab : d.labs) out.push_back({d.id, lab.id});
  }
  return out;
}

std::vector<DirectoryRef> Scenario::ResearcherRefs() const {
  std::vector<DirectoryRef> out;
  for (const DirectorySpec& d : directories) {
    for (const ResearcherSpec& r : d.researchers) out.push_back({d.id, r.id});
  }
  return out;
}

AnonymizationPolicy DefaultPolicy() {
  AnonymizationPolicy policy;
  policy.k = 2;
  policy.l = 2.0;
  policy.quasi_id_fields = {kFieldBirthDate, kFieldZip, kFieldGender};
  policy.sensitive_field = "diagnosis";
  policy.min_pool_size = 5;
  // Dates are YYYY-MM-DD: masking 6 keeps the year, 7 keeps the decade.
  policy.hierarchies[kFieldBirthDate].steps = {
      GeneralizationLevel::MaskSuffix(6), GeneralizationLevel::MaskSuffix(7),
      GeneralizationLevel::Suppress()};
  policy.hierarchies[kFieldZip].steps = {
      GeneralizationLevel::MaskSuffix(1), GeneralizationLevel::MaskSuffix(2),
      GeneralizationLevel::MaskSuffix(3), GeneralizationLevel::Suppress()};
  policy.hierarchies[kFieldGender].steps = {GeneralizationLevel::Suppress()};
  return policy;
}

absl::Status ValidateScenario(const Scenario& s) {
  if (s.patients == 0) return absl::InvalidArgumentError("patients: must be > 0");
  if (s.physicians == 0) {
    return absl::InvalidArgumentError("physicians: must be > 0");
  }
  if (s.key_pool.private_keys == 0 || s.key_pool.subkeys_per_private == 0 ||
      s.key_pool.public_threshold == 0 || s.key_pool.private_threshold == 0) {
    return absl::InvalidArgumentError("key_pool: every parameter must be > 0");
  }
  if (absl::Status st = s.policy.Validate(); !st.ok()) {
    return absl::InvalidArgumentError(absl::StrCat("policy: ", st.message()));
  }
  std::set<std::string> directory_ids;
  std::set<std::string> refs;
  for (const DirectorySpec& d : s.directories) {
    if (d.id.empty() || d.id.find('#') != std::string::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("directories.id: invalid id '", d.id, "'"));
    }
    if (!directory_ids.insert(d.id).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("directories.id: duplicate '", d.id, "'"));
    }
    for (const LabSpec& lab : d.labs) {
      if (!refs.insert(DirectoryRef{d.id, lab.id}.Render()).second) {
        return absl::InvalidArgumentError(
            absl::StrCat("directories.labs.id: duplicate '", lab.id, "'"));
      }
    }
    for (const ResearcherSpec& r : d.researchers) {
      if (!refs.insert(DirectoryRef{d.id, r.id}.Render()).second) {
        return absl::InvalidArgumentError(
            absl::StrCat("directories.researchers.id: duplicate '", r.id, "'"));
      }
    }
  }
  const std::vector<DirectoryRef> labs = s.LabRefs();
  const std::vector<DirectoryRef> researchers = s.ResearcherRefs();
  for (const ScheduleItem& item : s.schedule) {
    if (const auto* f = std::get_if<LabFlowSpec>(&item)) {
      if (f->patient >= s.patients) {
        return absl::InvalidArgumentError(absl::StrCat(
            "schedule.lab_flow.patient: no patient ", f->patient));
      }
      if (f->physician && *f->physician >= s.physicians) {
        return absl::InvalidArgumentError(absl::StrCat(
            "schedule.lab_flow.physician: no physician ", *f->physician));
      }
      // Unknown labs are allowed on purpose: the run exercises the
      // authorization server's rejection path.
    } else if (const auto* r = std::get_if<RoundRobinSpec>(&item)) {
      if (labs.empty()) {
        return absl::InvalidArgumentError(
            "schedule.round_robin: scenario has no labs");
      }
      if (r->sessions_per_patient == 0) {
        return absl::InvalidArgumentError(
            "schedule.round_robin.sessions_per_patient: must be > 0");
      }
    } else if (const auto* rf = std::get_if<ResearchFlowSpec>(&item)) {
      if (!refs.contains(rf->researcher.Render()) ||
          std::find(researchers.begin(), researchers.end(), rf->researcher) ==
              researchers.end()) {
        return absl::InvalidArgumentError(
            absl::StrCat("schedule.research.researcher: no researcher '",
                         rf->researcher.Render(), "'"));
      }
    } else if (const auto* e = std::get_if<EmergencySpec>(&item)) {
      if (e->patient >= s.patients) {
        return absl::InvalidArgumentError(absl::StrCat(
            "schedule.emergency.patient: no patient ", e->patient));
      }
    }
  }
  for (const std::string& member : s.coalition) {
    if (refs.contains(member) || IsFixedEntityId(member) ||
        IndexedIdExists(member, "physician:", s.physicians) ||
        IndexedIdExists(member, "contact:", s.patients)) {
      continue;
    }
    return absl::InvalidArgumentError(
        absl::StrCat("coalition: no entity '", member, "'"));
  }
  return absl::OkStatus();
}

absl::StatusOr<Scenario> ParseScenario(std::string_view yaml_text) {
  Scenario scenario;
  try {
    const YAML::Node root = YAML::Load(std::string(yaml_text));
    if (!root || root.IsNull()) {
      return absl::InvalidArgumentError("scenario is empty");
    }
    scenario = ParseNode(root);
  } catch (const ParseError& e) {
    return e.ToStatus();
  } catch (const YAML::Exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("line ", e.mark.line + 1, ": ", e.msg));
  }
  if (absl::Status s = ValidateScenario(scenario); !s.ok()) return s;
  return scenario;
}

absl::StatusOr<Scenario> LoadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto scenario = ParseScenario(buffer.str());
  if (!scenario.ok()) {
    return absl::Status(scenario.status().code(),
                        absl::StrCat(path, ": ", scenario.status().message()));
  }
  return scenario;
}

absl::Status ApplyOverride(Scenario& s, std::string_view name, uint64_t value) {
  if (name == "seed") {
    s.seed = value;
  } else if (name == "patients") {
    s.patients = value;
  } else if (name == "physicians") {
    s.physicians = value;
  } else if (name == "public_threshold") {
    s.key_pool.public_threshold = value;
  } else if (name == "private_threshold") {
    s.key_pool.private_threshold = value;
  } else if (name == "private_keys") {
    s.key_pool.private_keys = static_cast<uint32_t>(value);
  } else if (name == "subkeys_per_private") {
    s.key_pool.subkeys_per_private = static_cast<uint32_t>(value);
  } else if (name == "k") {
    s.policy.k = value;
  } else if (name == "min_pool_size") {
    s.policy.min_pool_size = value;
  } else if (name == "sessions_per_patient") {
    for (ScheduleItem& item : s.schedule) {
      if (auto* r = std::get_if<RoundRobinSpec>(&item)) {
        r->sessions_per_patient = value;
      }
    }
  } else {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown parameter '", std::string(name), "'"));
  }
  return ValidateScenario(s);
}

}  // namespace dapriv
