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

#include "dapriv/harness.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_replace.h"

namespace dapriv {
namespace {

using wire::Json;

constexpr const char* kFirstNames[] = {
    "Ada",   "Bela",  "Chen",  "Dara",  "Emil",  "Farah", "Goran", "Hana",
    "Ivo",   "Jun",   "Kira",  "Lior",  "Mira",  "Nils",  "Omar",  "Pia",
    "Quinn", "Rosa",  "Sami",  "Tove",  "Uma",   "Vera",  "Wen",   "Yara"};
constexpr const char* kLastNames[] = {
    "Abbott", "Brandt", "Castro", "Dahl",   "Eklund", "Fischer", "Garcia",
    "Horvat", "Ito",    "Jensen", "Kowal",  "Lindqvist", "Moreau", "Novak",
    "Okafor", "Petrov", "Quist",  "Rossi",  "Sato",   "Tanaka"};
constexpr const char* kDiagnoses[] = {"asthma", "diabetes", "hypertension",
                                      "influenza", "migraine"};

template <typename T, size_t N>
const T& Pick(const T (&items)[N], Rng& rng) {
  return items[rng.Uniform(N)];
}

// Concatenation of every string value in a JSON tree.
void CollectStrings(const Json& j, std::string& out) {
  if (j.is_string()) {
    out += j.get_ref<const std::string&>();
    out += '\x1f';
  } else if (j.is_structured()) {
    for (const Json& child : j) CollectStrings(child, out);
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) {
        out += k;
        out += '\x1f';
      }
    }
  }
}

bool Contains(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  return std::search(haystack.begin(), haystack.end(),
                     std::boyer_moore_horspool_searcher(needle.begin(),
                                                        needle.end())) !=
         haystack.end();
}

std::string FlipHexChar(const std::string& hex) {
  if (hex.empty()) return hex;
  std::string out = hex;
  char& c = out[out.size() / 2];
  c = c == '0' ? '1' : '0';
  return out;
}

InvariantResult Pass(std::string name, std::string note = {}) {
  return {std::move(name), true, std::move(note)};
}

InvariantResult Fail(std::string name, std::string detail) {
  return {std::move(name), false, std::move(detail)};
}

FieldMap MeasurementsWithoutSpecimen(const std::string& report) {
  auto m = ParseLabReport(ToBytes(report));
  if (!m.ok()) return {};
  m->erase("specimen");
  return *std::move(m);
}

FieldMap FieldsFromText(const std::string& text) {
  auto fields = ParseFields(ToBytes(text));
  return fields.ok() ? *std::move(fields) : FieldMap{};
}

const LedgerEntry* FindLedger(const Entity& entity, std::string_view kind,
                              std::string_view context) {
  for (const LedgerEntry& e : entity.ledger()) {
    if (e.kind == kind && e.context == context) return &e;
  }
  return nullptr;
}

}  // namespace

bool RunReport::ok() const {
  return std::all_of(invariants.begin(), invariants.end(),
                     [](const InvariantResult& r) { return r.passed; });
}

const Metric* RunReport::FindMetric(std::string_view name) const {
  for (const Metric& m : metrics) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

double RunReport::MetricOr(std::string_view name, double fallback) const {
  const Metric* m = FindMetric(name);
  return m == nullptr ? fallback : m->value;
}

size_t RunReport::CountFlows(std::string_view kind, bool completed) const {
  return std::count_if(flows.begin(), flows.end(), [&](const FlowOutcome& f) {
    return f.kind == kind && f.completed == completed;
  });
}

std::vector<MedicalRecord> GeneratePopulation(size_t count, Rng& rng) {
  std::vector<MedicalRecord> out;
  std::set<std::string> ssns;
  out.reserve(count);
  while (out.size() < count) {
    MedicalRecord r;
    r.explicit_ids.name =
        absl::StrCat(Pick(kFirstNames, rng), " ", Pick(kLastNames, rng));
    r.explicit_ids.national_id = absl::StrFormat(
        "%03d-%02d-%04d", 100 + rng.Uniform(800), 10 + rng.Uniform(90),
        1000 + rng.Uniform(9000));
    if (!ssns.insert(r.explicit_ids.national_id).second) continue;
    r.quasi_ids.birth_date =
        absl::StrFormat("%04d-%02d-%02d", 1940 + rng.Uniform(66),
                        1 + rng.Uniform(12), 1 + rng.Uniform(28));
    r.quasi_ids.zip = absl::StrFormat("476%02d", rng.Uniform(20));
    r.quasi_ids.gender = rng.Bernoulli(0.5) ? "F" : "M";
    r.sensitive["diagnosis"] = Pick(kDiagnoses, rng);
    out.push_back(std::move(r));
  }
  return out;
}

World::World(Scenario scenario)
    : scenario_(std::move(scenario)), rng_(scenario_.seed) {}

absl::StatusOr<std::unique_ptr<World>> World::Build(const Scenario& scenario) {
  if (absl::Status s = ValidateScenario(scenario); !s.ok()) return s;
  std::unique_ptr<World> world(new World(scenario));
  if (absl::Status s = world->Wire(); !s.ok()) return s;
  return world;
}

absl::Status World::Wire() {
  context_ = {&registry_, scenario_.token_mode};
  auto identity_for = [&](const std::string& id) {
    return crypto::GenerateIdentity(rng_.Substream("sign", 0).Substream(id).NextU64(), id);
  };
  auto keys_for = [&](const std::string& id) {
    return crypto::GenerateEncryptionKeys(
        rng_.Substream("box", 0).Substream(id).NextU64());
  };
  auto certify = [&](const std::string& id, Role role,
                     const crypto::VerifyKey& verify,
                     const crypto::BoxPublicKey& box) {
    return registry_.Register({id, role, verify, box});
  };

  Rng population_rng = rng_.Substream("population");
  population_ = GeneratePopulation(scenario_.patients, population_rng);

  std::set<size_t> with_contact;
  for (const ScheduleItem& item : scenario_.schedule) {
    if (const auto* e = std::get_if<EmergencySpec>(&item)) {
      if (e->designate_contact) with_contact.insert(e->patient);
    }
  }

  // Infrastructure first, so patients and physicians can be certified
  // against a registry that already knows the servers.
  const crypto::SigningIdentity auth_identity = identity_for(kAuthId);
  const crypto::EncryptionKeyPair anonymizer_keys = keys_for(kAnonymizerId);
  {
    const crypto::SigningIdentity anon_identity = identity_for(kAnonymizerId);
    if (auto s = certify(kAuthId, Role::kAuthServer, auth_identity.public_part,
                         keys_for(kAuthId).public_key);
        !s.ok()) {
      return s;
    }
    if (auto s = certify(kAnonymizerId, Role::kAnonymizer,
                         anon_identity.public_part, anonymizer_keys.public_key);
        !s.ok()) {
      return s;
    }
    for (const char* id : {kBlobStoreId, kEmergencyServerId}) {
      const Role role = std::string_view(id) == kBlobStoreId
                            ? Role::kBlobStore
                            : Role::kEmergencyServer;
      if (auto s = certify(id, role, identity_for(id).public_part,
                           keys_for(id).public_key);
          !s.ok()) {
        return s;
      }
    }
  }

  for (const DirectorySpec& d : scenario_.directories) {
    Directory directory(d.id);
    for (const LabSpec& lab : d.labs) {
      const DirectoryRef ref{d.id, lab.id};
      const std::string id = ref.Render();
      crypto::SigningIdentity identity = identity_for(id);
      const crypto::EncryptionKeyPair keys = keys_for(id);
      if (auto s = certify(id, Role::kLab, identity.public_part, keys.public_key);
          !s.ok()) {
        return s;
      }
      if (auto r = directory.Register(
              {ref, EntryKind::kLab, lab.tests, identity.public_part,
               keys.public_key});
          !r.ok()) {
        return r.status();
      }
      labs_.push_back(std::make_unique<LabEntity>(
          ref, lab.tests, std::move(identity), rng_.Substream("lab").Substream(id),
          context_));
    }
    for (const ResearcherSpec& researcher : d.researchers) {
      const DirectoryRef ref{d.id, researcher.id};
      const std::string id = ref.Render();
      const crypto::SigningIdentity identity = identity_for(id);
      const crypto::EncryptionKeyPair keys = keys_for(id);
      if (auto s = certify(id, Role::kResearcher, identity.public_part,
                           keys.public_key);
          !s.ok()) {
        return s;
      }
      if (auto r = directory.Register({ref, EntryKind::kResearcher,
                                       researcher.studies, identity.public_part,
                                       keys.public_key});
          !r.ok()) {
        return r.status();
      }
      researchers_.push_back(
          std::make_unique<ResearcherEntity>(ref, keys, context_));
    }
    const std::string dir_id = DirectoryEntityId(d.id);
    if (auto s = certify(dir_id, Role::kDirectory, identity_for(dir_id).public_part,
                         keys_for(dir_id).public_key);
        !s.ok()) {
      return s;
    }
    directories_.push_back(
        std::make_unique<DirectoryEntity>(std::move(directory)));
  }

  AuthorizationService service(kAuthId, rng_.Substream("auth"));
  std::vector<std::vector<std::string>> panels(scenario_.physicians);
  for (size_t i = 0; i < scenario_.patients; ++i) {
    panels[i % scenario_.physicians].push_back(PatientId(i));
  }
  for (size_t j = 0; j < scenario_.physicians; ++j) {
    const std::string id = PhysicianId(j);
    crypto::SigningIdentity identity = identity_for(id);
    const crypto::EncryptionKeyPair keys = keys_for(id);
    if (auto s = certify(id, Role::kPhysician, identity.public_part,
                         keys.public_key);
        !s.ok()) {
      return s;
    }
    service.RegisterPhysician(identity.public_part);
    physicians_.push_back(std::make_unique<PhysicianEntity>(
        id, std::move(identity), keys, panels[j],
        rng_.Substream("physician", j), context_));
  }

  for (size_t i = 0; i < scenario_.patients; ++i) {
    const std::string id = PatientId(i);
    crypto::SigningIdentity identity = identity_for(id);
    if (auto s = certify(id, Role::kPatient, identity.public_part,
                         keys_for(id).public_key);
        !s.ok()) {
      return s;
    }
    auto pool = KeyPool::Create(scenario_.key_pool,
                                rng_.Substream("key_pool", i).NextU64());
    if (!pool.ok()) return pool.status();
    std::optional<std::string> contact;
    if (with_contact.contains(i)) {
      contact = ContactId(i);
      const crypto::EncryptionKeyPair contact_keys = keys_for(*contact);
      if (auto s = certify(*contact, Role::kEmergencyContact,
                           identity_for(*contact).public_part,
                           contact_keys.public_key);
          !s.ok()) {
        return s;
      }
      contacts_.push_back(
          std::make_unique<EmergencyContactEntity>(*contact, contact_keys));
    }
    patients_.push_back(std::make_unique<PatientEntity>(
        id, population_[i], contact, *std::move(pool), std::move(identity),
        rng_.Substream("patient", i), context_));
  }

  auth_ = std::make_unique<AuthServerEntity>(
      std::move(service),
      AnonymizerInfo{kAnonymizerId, anonymizer_keys.public_key}, context_);
  blob_store_ = std::make_unique<BlobStoreEntity>();
  anonymizer_ = std::make_unique<AnonymizerEntity>(
      anonymizer_keys, scenario_.policy, rng_.Substream("anonymizer"));
  emergency_server_ = std::make_unique<EmergencyServerEntity>();
  intruder_ = std::make_unique<EmergencyContactEntity>(kIntruderId,
                                                       keys_for(kIntruderId));
  mitm_ = std::make_unique<MitmEntity>(keys_for(kMitmId));
  sink_ = std::make_unique<HarnessSink>();

  std::vector<Entity*> all = {auth_.get(),      blob_store_.get(),
                              anonymizer_.get(), emergency_server_.get(),
                              intruder_.get(),  mitm_.get(),
                              sink_.get()};
  for (auto& e : patients_) all.push_back(e.get());
  for (auto& e : physicians_) all.push_back(e.get());
  for (auto& e : labs_) all.push_back(e.get());
  for (auto& e : researchers_) all.push_back(e.get());
  for (auto& e : directories_) all.push_back(e.get());
  for (auto& e : contacts_) all.push_back(e.get());
  for (Entity* e : all) {
    if (absl::Status s = network_.Attach(e); !s.ok()) return s;
  }
  return absl::OkStatus();
}

void World::Kick(const std::string& to, const std::string& type, Json body) {
  Message m;
  m.from = kHarnessId;
  m.to = to;
  m.type = type;
  m.body = std::move(body);
  network_.Post(std::move(m));
}

absl::Status World::Run() {
  for (size_t index = 0; index < scenario_.schedule.size(); ++index) {
    const ScheduleItem& item = scenario_.schedule[index];
    absl::Status status;
    if (const auto* f = std::get_if<LabFlowSpec>(&item)) {
      status = RunLabFlow(*f);
    } else if (const auto* r = std::get_if<RoundRobinSpec>(&item)) {
      const std::vector<DirectoryRef> labs = scenario_.LabRefs();
      for (size_t p = 0; p < scenario_.patients && status.ok(); ++p) {
        for (size_t s = 0; s < r->sessions_per_patient && status.ok(); ++s) {
          LabFlowSpec spec;
          spec.patient = p;
          spec.lab = labs[(p + s) % labs.size()];
          spec.tests = r->tests;
          status = RunLabFlow(spec);
        }
      }
    } else if (const auto* rs = std::get_if<ResearchFlowSpec>(&item)) {
      status = RunResearch(*rs, index);
    } else if (const auto* e = std::get_if<EmergencySpec>(&item)) {
      status = RunEmergency(*e);
    }
    if (!status.ok()) {
      return absl::Status(status.code(), absl::StrCat("schedule item ", index,
                                                      ": ", status.message()));
    }
  }
  return absl::OkStatus();
}

absl::Status World::RunLabFlow(const LabFlowSpec& spec) {
  const std::string flow_id = absl::StrFormat("flow:%06d", next_flow_++);
  LabFlowInfo info;
  info.patient = spec.patient;
  info.physician = spec.physician.value_or(spec.patient % scenario_.physicians);
  info.lab = spec.lab;
  info.tamper = spec.tamper;
  LabFlowInfo& stored = lab_flows_[flow_id] = info;

  const std::string patient_id = PatientId(info.patient);
  const std::string lab_id = spec.lab.Render();
  const std::string mitm_key = mitm_->keys().public_key.Hex();
  std::string probe_session;

  // Each tamper rewrites exactly one message of this flow.
  auto fired = [&stored](Message&) { stored.tamper_fired = true; };
  switch (spec.tamper) {
    case TamperKind::kNone:
      break;
    case TamperKind::kPrescriptionByteFlip:
      network_.SetInterceptor([&](Message& m) {
        if (stored.tamper_fired || m.type != msg::kAuthorizeLabRequest) return;
        Json& sig = m.body["prescription"]["signature"]["sig"];
        sig = FlipHexChar(sig.get<std::string>());
        fired(m);
      });
      break;
    case TamperKind::kPrescriptionTestsAltered:
      network_.SetInterceptor([&](Message& m) {
        if (stored.tamper_fired || m.type != msg::kAuthorizeLabRequest) return;
        m.body["prescription"]["tests"].push_back("mri");
        fired(m);
      });
      break;
    case TamperKind::kSubstitutedStoreKey:
      network_.SetInterceptor([&](Message& m) {
        if (stored.tamper_fired || m.type != msg::kStoreReadReply ||
            m.to != lab_id || m.body["item"].value("kind", "") != "public_key") {
          return;
        }
        m.body["item"]["key"] = mitm_key;
        probe_session = m.session_id;
        fired(m);
      });
      break;
    case TamperKind::kMutatedPointerEnvelope:
      network_.SetInterceptor([&](Message& m) {
        if (stored.tamper_fired || m.type != msg::kStoreReadReply ||
            m.to != patient_id || m.body["item"].value("kind", "") != "envelope") {
          return;
        }
        Json& ct = m.body["item"]["envelope"]["ciphertext"];
        ct = FlipHexChar(ct.get<std::string>());
        fired(m);
      });
      break;
    case TamperKind::kMutatedResultBlob:
      network_.SetInterceptor([&](Message& m) {
        if (stored.tamper_fired || m.type != msg::kBlobContent ||
            m.to != patient_id) {
          return;
        }
        Json& blob = m.body["blob"];
        blob = FlipHexChar(blob.get<std::string>());
        fired(m);
      });
      break;
    case TamperKind::kMutatedHandoffEnvelope:
      network_.SetInterceptor([&](Message& m) {
        if (stored.tamper_fired || m.type != msg::kResultHandoff) return;
        Json& ct = m.body["envelope"]["ciphertext"];
        ct = FlipHexChar(ct.get<std::string>());
        fired(m);
      });
      break;
  }

  const FieldMap fields = population_[info.patient].Fields();
  Json ids = Json::object();
  for (const char* f : {kFieldName, kFieldNationalId, kFieldBirthDate,
                        kFieldZip, kFieldGender}) {
    ids[f] = fields.at(f);
  }
  Kick(patient_id, msg::kLabVisitPlan,
       {{"flow_id", flow_id},
        {"lab_ref", lab_id},
        {"physician", PhysicianId(info.physician)}});
  Kick(PhysicianId(info.physician), msg::kConsultationKickoff,
       {{"flow_id", flow_id},
        {"patient", patient_id},
        {"tests", spec.tests},
        {"patient_ids", std::move(ids)}});
  absl::Status status = network_.RunUntilIdle();
  network_.ClearInterceptor();
  if (!status.ok()) return status;

  if (!probe_session.empty()) {
    // The adversary now holds the lab's trust; see whether the store lets it
    // pick up what the lab deposited.
    Kick(kMitmId, msg::kMitmProbe, {{"session_id", probe_session}});
    if (absl::Status s = network_.RunUntilIdle(); !s.ok()) return s;
  }
  CollectLabOutcome(flow_id);
  return absl::OkStatus();
}

void World::CollectLabOutcome(const std::string& flow_id) {
  FlowOutcome outcome{flow_id, "lab", PatientId(lab_flows_[flow_id].patient),
                      false, ""};
  const auto& received = sink_->received();
  bool physician_done = false;
  for (; sink_cursor_ < received.size(); ++sink_cursor_) {
    const Message& m = received[sink_cursor_];
    if (m.type != msg::kFlowOutcome) continue;
    if (m.body.value("completed", false)) {
      physician_done = m.body.value("flow_id", "") == flow_id;
    } else if (outcome.reason.empty()) {
      outcome.reason = m.body.value("reason", "aborted");
    }
  }
  const auto& flows = patients_[lab_flows_[flow_id].patient]->flows();
  auto it = flows.find(flow_id);
  const bool patient_done = it != flows.end() && it->second.completed;
  outcome.completed = physician_done && patient_done && outcome.reason.empty();
  if (!outcome.completed && outcome.reason.empty()) outcome.reason = "stalled";
  flows_.push_back(std::move(outcome));
}

absl::Status World::RunResearch(const ResearchFlowSpec& spec,
                                size_t item_index) {
  std::vector<size_t> order(scenario_.patients);
  std::iota(order.begin(), order.end(), 0);
  Rng consent_rng = rng_.Substream("consent", item_index);
  consent_rng.Shuffle(order.begin(), order.end());
  const size_t consenting = static_cast<size_t>(std::llround(
      spec.consent_fraction * static_cast<double>(scenario_.patients)));
  std::vector<bool> consent(scenario_.patients, false);
  for (size_t i = 0; i < consenting; ++i) consent[order[i]] = true;

  for (size_t i = 0; i < scenario_.patients; ++i) {
    Kick(PatientId(i), msg::kConsentPlan,
         {{"study", spec.study_id},
          {"consent", static_cast<bool>(consent[i])},
          {"bypass", spec.bypass_anonymizer},
          {"share_policy", spec.share_policy}});
  }
  Json physicians = Json::array();
  for (size_t j = 0; j < scenario_.physicians; ++j) {
    physicians.push_back(PhysicianId(j));
  }
  Kick(spec.researcher.Render(), msg::kStudyKickoff,
       {{"study", spec.study_id}, {"physicians", std::move(physicians)}});
  if (absl::Status s = network_.RunUntilIdle(); !s.ok()) return s;
  if (!spec.bypass_anonymizer) {
    Kick(kAnonymizerId, msg::kCloseStudy, {{"study", spec.study_id}});
    if (absl::Status s = network_.RunUntilIdle(); !s.ok()) return s;
  }

  const auto& received = sink_->received();
  for (; sink_cursor_ < received.size(); ++sink_cursor_) {
    const Message& m = received[sink_cursor_];
    if (m.type == msg::kResearchOutcome) {
      const std::string status = m.body.value("status", "");
      flows_.push_back({absl::StrCat("study:", spec.study_id, ":", m.from),
                        "research", m.from,
                        status == "submitted" || status == "submitted_direct",
                        status});
    } else if (m.type == msg::kStudyOutcome) {
      const std::string status = m.body.value("status", "");
      flows_.push_back({absl::StrCat("study:", spec.study_id), "release",
                        spec.researcher.Render(),
                        status == ReleaseStatusName(ReleaseStatus::kReleased),
                        status});
    }
  }
  return absl::OkStatus();
}

absl::Status World::RunEmergency(const EmergencySpec& spec) {
  const std::string patient_id = PatientId(spec.patient);
  Kick(patient_id, msg::kEmergencyDepositKickoff, Json::object());
  if (absl::Status s = network_.RunUntilIdle(); !s.ok()) return s;

  const auto& received = sink_->received();
  const std::string base =
      absl::StrFormat("emergency:%06d", next_flow_++);
  for (; sink_cursor_ < received.size(); ++sink_cursor_) {
    const Message& m = received[sink_cursor_];
    if (m.type != msg::kDepositOutcome) continue;
    flows_.push_back({absl::StrCat(base, ":deposit"), "deposit", patient_id,
                      m.body.value("success", false),
                      m.body.value("reason", "")});
  }

  const bool has_contact = network_.Find(ContactId(spec.patient)) != nullptr;
  for (size_t a = 0; a < spec.accesses.size(); ++a) {
    const std::string flow_id = absl::StrCat(base, ":access:", a);
    if (emergency_server_->storage().Current(patient_id) == nullptr) {
      flows_.push_back({flow_id, "access", patient_id, false,
                        "no snapshot deposited"});
      continue;
    }
    std::string accessor = kIntruderId;
    if (spec.accesses[a] == "contact") {
      if (!has_contact) {
        flows_.push_back({flow_id, "access", patient_id, false,
                          "no contact designated"});
        continue;
      }
      accessor = ContactId(spec.patient);
    }
    Kick(accessor, msg::kEmergencyAccessKickoff, {{"patient", patient_id}});
    if (absl::Status s = network_.RunUntilIdle(); !s.ok()) return s;
    FlowOutcome outcome{flow_id, "access", patient_id, false, "no answer"};
    for (; sink_cursor_ < received.size(); ++sink_cursor_) {
      const Message& m = received[sink_cursor_];
      if (m.type != msg::kEmergencyOutcome) continue;
      outcome.completed = m.body.value("success", false);
      outcome.reason = absl::StrCat(accessor, ": ",
                                    outcome.completed
                                        ? std::string("opened")
                                        : m.body.value("reason", ""));
    }
    flows_.push_back(std::move(outcome));
  }
  return absl::OkStatus();
}

// ---------------------------------------------------------------------------
// Harvest

std::map<std::string, FieldMap> World::GroundTruth() const {
  std::map<std::string, FieldMap> out;
  for (const auto& p : patients_) out[p->id()] = p->record().Fields();
  return out;
}

std::vector<ObservationShard> World::Harvest() const {
  const std::set<std::string> coalition(scenario_.coalition.begin(),
                                        scenario_.coalition.end());
  std::vector<ObservationShard> shards;
  uint64_t order = 0;
  auto add = [&](std::string observer, std::string token, FieldMap attrs,
                 std::string interaction, std::string subject) {
    shards.push_back({std::move(observer), std::move(token), std::move(attrs),
                      order++, std::move(interaction), std::move(subject)});
  };

  // Ground truth for session-scoped observations.
  std::map<std::string, std::string> subject_by_session;
  for (const auto& p : patients_) {
    for (const auto& [flow_id, flow] : p->flows()) {
      if (!flow.session_id.empty()) subject_by_session[flow.session_id] = p->id();
    }
  }
  auto subject_of = [&](const std::string& session) {
    auto it = subject_by_session.find(session);
    return it == subject_by_session.end() ? std::string() : it->second;
  };

  for (const auto& lab : labs_) {
    if (!coalition.contains(lab->id())) continue;
    for (const auto& [session_id, s] : lab->sessions()) {
      if (!s.visited) continue;
      std::string token = session_id;
      if (auto it = s.disclosed.find(kFieldNationalId);
          it != s.disclosed.end()) {
        token = it->second;
      } else if (s.patient_key.has_value()) {
        token = s.patient_key->Hex();
      }
      FieldMap attrs = s.disclosed;
      if (const LedgerEntry* e =
              FindLedger(*lab, kLedgerLabResult, session_id)) {
        attrs.merge(MeasurementsWithoutSpecimen(e->plaintext));
      }
      add(lab->id(), token, std::move(attrs), session_id,
          subject_of(session_id));
    }
  }

  if (coalition.contains(kAuthId)) {
    for (const auto& [session_id, grant] : auth_->grants()) {
      std::string token = session_id;
      if (const TempStore* store =
              auth_->service().FindStore(SessionId{session_id});
          store != nullptr && store->size() > 0) {
        if (const auto* key =
                std::get_if<crypto::BoxPublicKey>(&store->slots()[0].item)) {
          token = key->Hex();
        }
      }
      add(kAuthId, token, {}, session_id, grant.patient);
    }
  }

  for (const auto& physician : physicians_) {
    if (!coalition.contains(physician->id())) continue;
    for (const LedgerEntry& e : physician->ledger()) {
      if (e.kind != kLedgerIdentity) continue;
      FieldMap attrs = FieldsFromText(e.plaintext);
      const std::string token = attrs[kFieldNationalId];
      if (const LedgerEntry* r = FindLedger(*physician, kLedgerResult, e.context)) {
        attrs.merge(MeasurementsWithoutSpecimen(r->plaintext));
      }
      auto flow = lab_flows_.find(e.context);
      add(physician->id(), token, std::move(attrs), e.context,
          flow == lab_flows_.end() ? std::string()
                                   : PatientId(flow->second.patient));
    }
  }

  for (const auto& researcher : researchers_) {
    if (!coalition.contains(researcher->id())) continue;
    for (const auto& [study, batches] : researcher->releases()) {
      for (size_t b = 0; b < batches.size(); ++b) {
        for (size_t i = 0; i < batches[b].records.size(); ++i) {
          add(researcher->id(), absl::StrCat("release:", study, ":", b, ":", i),
              batches[b].records[i], absl::StrCat("study:", study), "");
        }
      }
    }
    for (const auto& [study, by_sender] : researcher->direct_submissions()) {
      for (const auto& [sender, fields] : by_sender) {
        add(researcher->id(), sender, fields, absl::StrCat("study:", study),
            sender);
      }
    }
  }

  if (coalition.contains(kAnonymizerId)) {
    std::map<std::string, std::set<std::string>> claimed;
    size_t index = 0;
    for (const LedgerEntry& e : anonymizer_->ledger()) {
      if (e.kind != kLedgerResearchRecord) continue;
      const FieldMap fields = FieldsFromText(e.plaintext);
      std::string subject;
      for (const auto& p : patients_) {
        auto it = p->submissions().find(e.context);
        if (it != p->submissions().end() && it->second == fields &&
            !claimed[e.context].contains(p->id())) {
          subject = p->id();
          claimed[e.context].insert(subject);
          break;
        }
      }
      add(kAnonymizerId, absl::StrCat("submission:", e.context, ":", index++),
          fields, absl::StrCat("study:", e.context), subject);
    }
  }

  if (coalition.contains(kBlobStoreId)) {
    std::map<std::string, std::string> subject_by_location;
    for (const auto& lab : labs_) {
      for (const auto& [session_id, s] : lab->sessions()) {
        if (!s.location.empty()) {
          subject_by_location[s.location] = subject_of(session_id);
        }
      }
    }
    for (const auto& [location, blob] : blob_store_->blobs()) {
      add(kBlobStoreId, location, {}, location, subject_by_location[location]);
    }
  }

  if (coalition.contains(kEmergencyServerId)) {
    for (const auto& [patient, history] : emergency_server_->storage().all()) {
      add(kEmergencyServerId, patient, {}, patient, patient);
    }
  }
  for (const auto& contact : contacts_) {
    if (!coalition.contains(contact->id())) continue;
    for (const LedgerEntry& e : contact->ledger()) {
      if (e.kind != kLedgerEmergencyData) continue;
      add(contact->id(), e.context, FieldsFromText(e.plaintext), e.context,
          e.context);
    }
  }
  return shards;
}

// ---------------------------------------------------------------------------
// Invariants

std::vector<InvariantResult> World::CheckInvariants() const {
  std::vector<InvariantResult> out;

  // Which patient and physician each lab session belongs to.
  struct SessionOwner {
    std::string flow_id;
    std::string patient;
    std::string physician;
  };
  std::map<std::string, SessionOwner> owner;
  for (const auto& p : patients_) {
    for (const auto& [flow_id, flow] : p->flows()) {
      if (!flow.session_id.empty()) {
        owner[flow.session_id] = {flow_id, p->id(), flow.physician};
      }
    }
  }

  {
    const char* name = "event_log_well_formed";
    std::string problem;
    uint64_t last = 0;
    for (const EventRecord& e : network_.events()) {
      if (e.timestamp <= last) {
        problem = absl::StrCat("timestamp ", e.timestamp, " is not increasing");
      } else if (network_.Find(e.sender) == nullptr ||
                 network_.Find(e.receiver) == nullptr) {
        problem = absl::StrCat("event ", e.timestamp,
                               " names an unknown sender or receiver");
      } else if (e.payload_digest.empty()) {
        problem = absl::StrCat("event ", e.timestamp, " lacks a digest");
      }
      if (!problem.empty()) break;
      last = e.timestamp;
    }
    if (problem.empty() && network_.events().size() != network_.transcript().size()) {
      problem = "event log and transcript differ in length";
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "end_to_end_confidentiality";
    std::string problem;
    std::string wire_text;
    for (const Message& m : network_.transcript()) CollectStrings(m.body, wire_text);
    for (const auto& lab : labs_) {
      for (const LedgerEntry& e : lab->ledger()) {
        if (e.kind != kLedgerLabResult) continue;
        std::set<std::string> allowed = {lab->id()};
        if (auto it = owner.find(e.context); it != owner.end()) {
          allowed.insert(it->second.patient);
          allowed.insert(it->second.physician);
        }
        for (const auto& [id, entity] : network_.entities()) {
          for (const LedgerEntry& other : entity->ledger()) {
            if (other.plaintext.find(e.plaintext) != std::string::npos &&
                !allowed.contains(id)) {
              problem = absl::StrCat(id, " holds the result of session ",
                                     e.context);
            }
          }
        }
        if (problem.empty() && Contains(wire_text, e.plaintext)) {
          problem = absl::StrCat("result of session ", e.context,
                                 " crossed the network in the clear");
        }
        if (!problem.empty()) break;
      }
      if (!problem.empty()) break;
    }
    if (problem.empty() && !mitm_->ledger().empty()) {
      problem = "the interceptor recovered plaintext";
    }
    if (problem.empty() && !intruder_->ledger().empty()) {
      problem = "an intruder opened an emergency snapshot";
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "result_integrity";
    std::string problem;
    for (const FlowOutcome& f : flows_) {
      if (f.kind != "lab" || !f.completed) continue;
      const LabFlowInfo& info = lab_flows_.at(f.flow_id);
      const auto& pflow = patients_[info.patient]->flows().at(f.flow_id);
      const LedgerEntry* lab_copy = nullptr;
      for (const auto& lab : labs_) {
        if (lab->id() == info.lab.Render()) {
          lab_copy = FindLedger(*lab, kLedgerLabResult, pflow.session_id);
        }
      }
      const LedgerEntry* physician_copy =
          FindLedger(*physicians_[info.physician], kLedgerResult, f.flow_id);
      const LedgerEntry* patient_copy =
          FindLedger(*patients_[info.patient], kLedgerResult, f.flow_id);
      if (lab_copy == nullptr || physician_copy == nullptr ||
          patient_copy == nullptr ||
          physician_copy->plaintext != lab_copy->plaintext ||
          patient_copy->plaintext != lab_copy->plaintext) {
        problem = absl::StrCat(f.flow_id, ": copies of the result differ");
        break;
      }
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "signature_chain";
    std::string problem;
    for (const auto& lab : labs_) {
      const Certificate* cert = registry_.Find(lab->id());
      for (const auto& [session_id, s] : lab->sessions()) {
        const LedgerEntry* e = FindLedger(*lab, kLedgerLabResult, session_id);
        if (e == nullptr || !s.report_signature.has_value()) continue;
        auto ok = crypto::Verify(ToBytes(e->plaintext), *s.report_signature,
                                 cert->verify_key);
        if (!ok.ok() || !*ok) {
          problem = absl::StrCat(session_id, ": lab signature does not verify");
        }
      }
    }
    // Aborted flows must not leave a result with the physician.
    for (const FlowOutcome& f : flows_) {
      if (!problem.empty()) break;
      if (f.kind != "lab" || f.completed) continue;
      const LabFlowInfo& info = lab_flows_.at(f.flow_id);
      if (FindLedger(*physicians_[info.physician], kLedgerResult, f.flow_id)) {
        problem = absl::StrCat(f.flow_id,
                               ": aborted flow delivered a result to the physician");
      }
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "consent_soundness";
    std::string problem;
    auto consented = [&](const std::string& patient, const std::string& study) {
      for (const auto& p : patients_) {
        if (p->id() != patient) continue;
        auto it = p->studies().find(study);
        return it != p->studies().end() && it->second.consent;
      }
      return false;
    };
    for (const auto& [session, study] : auth_->research_sessions()) {
      const TempStore* store = auth_->service().FindStore(SessionId{session});
      if (store == nullptr) continue;
      for (const StoreAccess& a : store->journal()) {
        if (a.action == StoreAction::kWrite && a.succeeded &&
            !consented(a.accessor, study)) {
          problem = absl::StrCat(a.accessor, " wrote to study ", study,
                                 " without consent");
        }
      }
    }
    std::map<std::string, size_t> consenting_submissions;
    for (const auto& p : patients_) {
      for (const auto& [study, fields] : p->submissions()) {
        if (!consented(p->id(), study)) {
          problem = absl::StrCat(p->id(), " submitted to ", study,
                                 " without consent");
        }
        ++consenting_submissions[study];
      }
    }
    std::map<std::string, std::multiset<FieldMap>> submitted;
    for (const auto& p : patients_) {
      for (const auto& [study, fields] : p->submissions()) {
        submitted[study].insert(fields);
      }
    }
    for (const LedgerEntry& e : anonymizer_->ledger()) {
      if (e.kind != kLedgerResearchRecord) continue;
      auto& pool = submitted[e.context];
      auto it = pool.find(FieldsFromText(e.plaintext));
      if (it == pool.end()) {
        problem = absl::StrCat("anonymizer holds a record for ", e.context,
                               " that no consenting patient sent");
      } else {
        pool.erase(it);
      }
    }
    for (const auto& researcher : researchers_) {
      for (const auto& [study, batches] : researcher->releases()) {
        size_t released = 0;
        for (const ReleasedBatch& b : batches) released += b.records.size();
        if (released > consenting_submissions[study]) {
          problem = absl::StrCat("study ", study,
                                 " released more records than were consented");
        }
      }
      for (const auto& [study, by_sender] : researcher->direct_submissions()) {
        for (const auto& [sender, fields] : by_sender) {
          if (!consented(sender, study)) {
            problem = absl::StrCat(sender, " reached ", study,
                                   " directly without consent");
          }
        }
      }
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "notification_totality";
    size_t attempts = 0;
    for (const Message& m : network_.transcript()) {
      if (m.type == msg::kEmergencyFetch && m.to == kEmergencyServerId) ++attempts;
    }
    size_t notices = 0;
    for (const auto& p : patients_) notices += p->emergency_notices();
    size_t log_entries = 0;
    for (const auto& [patient, history] : emergency_server_->storage().all()) {
      for (const EmergencySnapshot& snap : history) {
        log_entries += snap.access_log.size();
      }
    }
    const uint64_t sent = emergency_server_->storage().notifications_sent();
    if (attempts == notices && notices == log_entries && log_entries == sent) {
      out.push_back(Pass(name));
    } else {
      out.push_back(Fail(name, absl::StrCat("attempts=", attempts, " notices=",
                                            notices, " log=", log_entries,
                                            " sent=", sent)));
    }
  }

  {
    const char* name = "acl_soundness";
    std::string problem;
    for (const auto& [session, store] : auth_->service().stores()) {
      const auto grant = auth_->grants().find(session.value);
      for (const StoreAccess& a : store.journal()) {
        if (!a.succeeded) continue;
        auto acl = store.acl().find(a.role);
        const Access wanted = a.action == StoreAction::kWrite ? Access::kWrite
                                                              : Access::kRead;
        if (acl == store.acl().end() || !Allows(acl->second, wanted)) {
          problem = absl::StrCat(a.accessor, " got past the ACL of ",
                                 session.value);
        } else if (grant != auth_->grants().end() &&
                   a.accessor != grant->second.patient &&
                   a.accessor != grant->second.lab.Render()) {
          problem = absl::StrCat(a.accessor, " used a session granted to ",
                                 grant->second.patient);
        } else if (a.accessor == kMitmId) {
          problem = "the interceptor read a store";
        }
      }
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "lab_receives_no_identifiers";
    if (scenario_.token_mode == TokenMode::kBaselineSsn) {
      out.push_back(Pass(name, "not checked in baseline mode"));
    } else {
      std::string problem;
      std::set<std::string> lab_ids;
      for (const auto& lab : labs_) lab_ids.insert(lab->id());
      std::string to_labs;
      for (const Message& m : network_.transcript()) {
        if (lab_ids.contains(m.to)) CollectStrings(m.body, to_labs);
      }
      for (const MedicalRecord& r : population_) {
        if (Contains(to_labs, r.explicit_ids.name) ||
            Contains(to_labs, r.explicit_ids.national_id)) {
          problem = absl::StrCat("a lab was sent an identifier of ",
                                 r.explicit_ids.name);
          break;
        }
      }
      for (const auto& lab : labs_) {
        for (const auto& [session_id, s] : lab->sessions()) {
          if (!s.disclosed.empty()) {
            problem = absl::StrCat(lab->id(), " recorded disclosed ids");
          }
        }
      }
      out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
    }
  }

  {
    const char* name = "session_ids_carry_no_identity";
    std::string problem;
    for (const auto& [session, store] : auth_->service().stores()) {
      for (const MedicalRecord& r : population_) {
        const std::string& ssn = r.explicit_ids.national_id;
        const std::string bare = absl::StrReplaceAll(ssn, {{"-", ""}});
        if (session.value.find(r.explicit_ids.name) != std::string::npos ||
            session.value.find(ssn) != std::string::npos ||
            session.value.find(bare) != std::string::npos) {
          problem = absl::StrCat("session ", session.value,
                                 " embeds a patient identifier");
        }
      }
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "key_pool_invariants";
    std::string problem;
    for (const auto& p : patients_) {
      if (absl::Status s = p->pool().CheckInvariants(); !s.ok()) {
        problem = absl::StrCat(p->id(), ": ", s.message());
        break;
      }
      for (const SubKey& k : p->pool().subkeys()) {
        if (k.use_count > scenario_.key_pool.public_threshold) {
          problem = absl::StrCat(p->id(), ": a subkey outlived its threshold");
        }
      }
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }

  {
    const char* name = "gate_soundness";
    std::string problem;
    for (const auto& researcher : researchers_) {
      for (const auto& [study, batches] : researcher->releases()) {
        for (const ReleasedBatch& b : batches) {
          auto passes = PassesGates(b.records, scenario_.policy);
          if (!passes.ok() || !*passes) {
            problem = absl::StrCat("release of ", study, " fails the gates");
          }
          for (const Record& r : b.records) {
            if (r.contains(kFieldName) || r.contains(kFieldNationalId)) {
              problem = absl::StrCat("release of ", study,
                                     " carries an explicit identifier");
            }
          }
        }
      }
    }
    out.push_back(problem.empty() ? Pass(name) : Fail(name, problem));
  }
  return out;
}

RunReport World::Report() const {
  RunReport report;
  report.scenario = scenario_.name;
  report.seed = scenario_.seed;
  report.token_mode = std::string(TokenModeName(scenario_.token_mode));
  report.flows = flows_;

  const std::vector<ObservationShard> shards = Harvest();
  const std::vector<ReassembledProfile> profiles = ColludeJoin(shards);
  const LinkageMetrics linkage = ReassemblyRate(profiles, GroundTruth());
  std::vector<ReleasedBatch> releases;
  const std::set<std::string> coalition(scenario_.coalition.begin(),
                                        scenario_.coalition.end());
  for (const auto& researcher : researchers_) {
    if (!coalition.contains(researcher->id())) continue;
    for (const auto& [study, batches] : researcher->releases()) {
      releases.insert(releases.end(), batches.begin(), batches.end());
    }
  }
  // Only profiles carrying identity can re-identify a released row.
  std::vector<ReassembledProfile> identified;
  for (const ReassembledProfile& p : profiles) {
    bool named = false;
    for (const auto& [field, value] : p.merged_attributes) {
      named = named || field == kFieldNationalId || field == kFieldName;
    }
    if (named) identified.push_back(p);
  }
  const std::vector<bool> reidentified =
      QuasiIdLinkage(identified, releases, scenario_.policy.hierarchies);

  size_t attempts = 0;
  for (const Message& m : network_.transcript()) {
    if (m.type == msg::kEmergencyFetch) ++attempts;
  }
  size_t notices = 0;
  for (const auto& p : patients_) notices += p->emergency_notices();
  size_t released = 0;
  for (const auto& researcher : researchers_) {
    for (const auto& [study, batches] : researcher->releases()) {
      for (const ReleasedBatch& b : batches) released += b.records.size();
    }
  }

  auto metric = [&](std::string name, double value) {
    report.metrics.push_back({std::move(name), value});
  };
  metric("linkage_rate", linkage.linkage_rate);
  metric("enrichment", linkage.enrichment);
  metric("precision", linkage.precision);
  metric("patients", static_cast<double>(linkage.patients));
  metric("linked_patients", static_cast<double>(linkage.linked_patients));
  metric("merged_profiles", static_cast<double>(linkage.merged_profiles));
  metric("shards", static_cast<double>(shards.size()));
  metric("quasi_id_reidentified",
         static_cast<double>(std::count(reidentified.begin(),
                                        reidentified.end(), true)));
  metric("lab_flows_completed",
         static_cast<double>(report.CountFlows("lab", true)));
  metric("lab_flows_aborted",
         static_cast<double>(report.CountFlows("lab", false)));
  metric("research_submissions",
         static_cast<double>(report.CountFlows("research", true)));
  metric("studies_released",
         static_cast<double>(report.CountFlows("release", true)));
  metric("records_released", static_cast<double>(released));
  metric("emergency_attempts", static_cast<double>(attempts));
  metric("emergency_notifications", static_cast<double>(notices));
  metric("events", static_cast<double>(network_.events().size()));

  report.invariants = CheckInvariants();

  std::string log;
  for (const EventRecord& e : network_.events()) {
    log += e.ToLine();
    log += '\n';
  }
  report.event_log_digest = DigestHex(ToBytes(log));
  return report;
}

absl::StatusOr<RunReport> RunScenario(const Scenario& scenario) {
  auto world = World::Build(scenario);
  if (!world.ok()) return world.status();
  if (absl::Status s = (*world)->Run(); !s.ok()) return s;
  return (*world)->Report();
}

}  // namespace dapriv
