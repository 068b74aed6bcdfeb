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


#ifndef DAPRIV_ENTITIES_H_
#define DAPRIV_ENTITIES_H_

// The protocol participants as message-driven state machines. Each entity
// owns its keys and state and learns about the world only through messages
// and the public certificate registry.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dapriv/anonymizer.h"
#include "dapriv/certificates.h"
#include "dapriv/coordination.h"
#include "dapriv/crypto.h"
#include "dapriv/directory.h"
#include "dapriv/emergency.h"
#include "dapriv/key_pool.h"
#include "dapriv/network.h"
#include "dapriv/records.h"
#include "dapriv/rng.h"
#include "dapriv/scenario.h"

namespace dapriv {

inline constexpr char kAuthId[] = "auth";
inline constexpr char kBlobStoreId[] = "blob_store";
inline constexpr char kAnonymizerId[] = "anonymizer";
inline constexpr char kEmergencyServerId[] = "emergency_server";
inline constexpr char kIntruderId[] = "intruder";
inline constexpr char kMitmId[] = "mitm";
inline constexpr char kHarnessId[] = "harness";

std::string PatientId(size_t index);
std::string PhysicianId(size_t index);
std::string ContactId(size_t patient);
std::string DirectoryEntityId(const std::string& directory_id);

// Ledger kinds.
inline constexpr char kLedgerLabResult[] = "lab_result";
inline constexpr char kLedgerResult[] = "result";
inline constexpr char kLedgerIdentity[] = "identity";
inline constexpr char kLedgerResearchRecord[] = "research_record";
inline constexpr char kLedgerReleasedRecord[] = "released_record";
inline constexpr char kLedgerEmergencyData[] = "emergency_data";

// Message types. Bodies are JSON objects; the members are listed next to
// each type in entities.cc.
namespace msg {
inline constexpr char kConsultationKickoff[] = "consultation_kickoff";
inline constexpr char kLabVisitPlan[] = "lab_visit_plan";
inline constexpr char kPrescription[] = "prescription";
inline constexpr char kAuthorizeLabRequest[] = "authorize_lab_request";
inline constexpr char kDirectoryQuery[] = "directory_query";
inline constexpr char kDirectoryAnswer[] = "directory_answer";
inline constexpr char kSessionGrant[] = "session_grant";
inline constexpr char kSessionDenied[] = "session_denied";
inline constexpr char kLabSessionNotice[] = "lab_session_notice";
inline constexpr char kStoreWrite[] = "store_write";
inline constexpr char kStoreWriteAck[] = "store_write_ack";
inline constexpr char kStoreRead[] = "store_read";
inline constexpr char kStoreReadReply[] = "store_read_reply";
inline constexpr char kStoreDenied[] = "store_denied";
inline constexpr char kLabVisit[] = "lab_visit";
inline constexpr char kVisitRejected[] = "visit_rejected";
inline constexpr char kBlobPut[] = "blob_put";
inline constexpr char kBlobPutAck[] = "blob_put_ack";
inline constexpr char kBlobGet[] = "blob_get";
inline constexpr char kBlobContent[] = "blob_content";
inline constexpr char kBlobMissing[] = "blob_missing";
inline constexpr char kResultReady[] = "result_ready";
inline constexpr char kResultHandoff[] = "result_handoff";
inline constexpr char kResultAck[] = "result_ack";
inline constexpr char kFlowOutcome[] = "flow_outcome";
inline constexpr char kStudyKickoff[] = "study_kickoff";
inline constexpr char kConsentPlan[] = "consent_plan";
inline constexpr char kResearchRequest[] = "research_request";
inline constexpr char kForwardedResearchRequest[] =
    "forwarded_research_request";
inline constexpr char kVerifyResearcherRequest[] = "verify_researcher_request";
inline constexpr char kOpenAnonymizerChannel[] = "open_anonymizer_channel";
inline constexpr char kResearchChannelGrant[] = "research_channel_grant";
inline constexpr char kResearchDenied[] = "research_denied";
inline constexpr char kResearchOutcome[] = "research_outcome";
inline constexpr char kDirectSubmission[] = "direct_submission";
inline constexpr char kSubmissionNotice[] = "submission_notice";
inline constexpr char kCloseStudy[] = "close_study";
inline constexpr char kReleasedBatch[] = "released_batch";
inline constexpr char kReleaseBlocked[] = "release_blocked";
inline constexpr char kStudyOutcome[] = "study_outcome";
inline constexpr char kEmergencyDepositKickoff[] = "emergency_deposit_kickoff";
inline constexpr char kEmergencyDeposit[] = "emergency_deposit";
inline constexpr char kEmergencyDepositAck[] = "emergency_deposit_ack";
inline constexpr char kDepositOutcome[] = "deposit_outcome";
inline constexpr char kEmergencyAccessKickoff[] = "emergency_access_kickoff";
inline constexpr char kEmergencyFetch[] = "emergency_fetch";
inline constexpr char kEmergencySnapshot[] = "emergency_snapshot";
inline constexpr char kEmergencyMissing[] = "emergency_missing";
inline constexpr char kEmergencyAccessNotice[] = "emergency_access_notice";
inline constexpr char kEmergencyOutcome[] = "emergency_outcome";
inline constexpr char kMitmProbe[] = "mitm_probe";
}  // namespace msg

// Shared by every entity: public certificates and the run's token mode.
struct EntityContext {
  const CertificateRegistry* registry = nullptr;
  TokenMode token_mode = TokenMode::kDaprivKeys;
};

// A sealed message body could not be used; reported to the harness.
void ReportAbort(Outbox& out, const std::string& flow_id,
                 const std::string& session_id, const std::string& reason);

class PatientEntity : public Entity {
 public:
  struct LabFlowState {
    std::string flow_id;
    DirectoryRef lab;
    std::string physician;
    std::string request_id;
    std::string session_id;
    std::string specimen;
    std::optional<SubKey> deposited;
    std::optional<crypto::VerifyKey> lab_key;
    std::optional<ResultPointer> pointer;
    bool completed = false;
    bool aborted = false;
  };

  struct StudyState {
    bool consent = false;
    std::set<std::string> share_policy;
    bool bypass = false;
    std::string request_id;
    std::string session_id;
    bool submitted = false;
    std::string outcome;  // "submitted", "declined", or a denial reason
  };

  PatientEntity(std::string id, MedicalRecord record,
                std::optional<std::string> emergency_contact, KeyPool pool,
                crypto::SigningIdentity identity, Rng rng,
                EntityContext context);

  void OnMessage(const Message& message, Outbox& out) override;

  const MedicalRecord& record() const { return record_; }
  const KeyPool& pool() const { return pool_; }
  const std::map<std::string, LabFlowState>& flows() const { return flows_; }
  const std::map<std::string, StudyState>& studies() const { return studies_; }
  // Sanitized record submitted for each study, for consent audits.
  const std::map<std::string, FieldMap>& submissions() const {
    return submissions_;
  }
  size_t emergency_notices() const { return emergency_notices_; }

 private:
  LabFlowState* FlowByRequest(const std::string& request_id);
  LabFlowState* FlowBySession(const std::string& session_id);
  LabFlowState* FlowByLocation(const std::string& location);
  void Abort(LabFlowState& flow, const std::string& reason, Outbox& out);
  void MaybeRequestSession(LabFlowState& flow, Outbox& out);

  void OnPrescription(const Message& m, Outbox& out);
  void OnSessionGrant(const Message& m, Outbox& out);
  void OnStoreWriteAck(const Message& m, Outbox& out);
  void OnStoreReadReply(const Message& m, Outbox& out);
  void OnBlobContent(const Message& m, Outbox& out);
  void OnResultAck(const Message& m, Outbox& out);
  void OnResearchRequest(const Message& m, Outbox& out);
  void OnResearchGrant(const Message& m, Outbox& out);
  void OnEmergencyKickoff(const Message& m, Outbox& out);

  MedicalRecord record_;
  std::optional<std::string> emergency_contact_;
  KeyPool pool_;
  crypto::SigningIdentity identity_;
  Rng rng_;
  EntityContext context_;
  std::map<std::string, LabFlowState> flows_;
  std::map<std::string, Prescription> prescriptions_;  // by flow id
  std::map<std::string, StudyState> studies_;
  std::map<std::string, FieldMap> submissions_;
  size_t emergency_notices_ = 0;
  uint64_t next_request_ = 0;
};

class PhysicianEntity : public Entity {
 public:
  PhysicianEntity(std::string id, crypto::SigningIdentity identity,
                  crypto::EncryptionKeyPair keys,
                  std::vector<std::string> patients, Rng rng,
                  EntityContext context);

  void OnMessage(const Message& message, Outbox& out) override;

  const crypto::EncryptionKeyPair& keys() const { return keys_; }

 private:
  struct Pending {
    std::string flow_id;
    std::string patient;
    std::optional<ResultPointer> pointer;
  };

  void OnHandoff(const Message& m, Outbox& out);
  void OnBlobContent(const Message& m, Outbox& out);
  void Fail(const std::string& flow_id, const std::string& reason,
            Outbox& out);

  crypto::SigningIdentity identity_;
  crypto::EncryptionKeyPair keys_;
  std::vector<std::string> patients_;
  Rng rng_;
  EntityContext context_;
  std::map<std::string, Pending> flows_;
  std::map<std::string, std::string> flow_by_location_;
};

class LabEntity : public Entity {
 public:
  LabEntity(DirectoryRef ref, std::set<std::string> capabilities,
            crypto::SigningIdentity identity, Rng rng, EntityContext context);

  void OnMessage(const Message& message, Outbox& out) override;

  const DirectoryRef& ref() const { return ref_; }

  struct Session {
    std::set<std::string> tests;
    bool visited = false;
    std::string specimen;
    FieldMap disclosed;
    std::optional<crypto::BoxPublicKey> patient_key;
    std::string location;
    std::optional<crypto::SymmetricKey> symmetric_key;
    std::optional<crypto::Signature> report_signature;
  };
  const std::map<std::string, Session>& sessions() const { return sessions_; }

 private:
  void OnVisit(const Message& m, Outbox& out);
  void OnKey(const Message& m, Outbox& out);
  void OnBlobStored(const Message& m, Outbox& out);
  FieldMap Measure(const std::set<std::string>& tests);

  DirectoryRef ref_;
  std::set<std::string> capabilities_;
  crypto::SigningIdentity identity_;
  Rng rng_;
  EntityContext context_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::string> session_by_blob_;
};

class AuthServerEntity : public Entity {
 public:
  AuthServerEntity(AuthorizationService service, AnonymizerInfo anonymizer,
                   EntityContext context);

  void OnMessage(const Message& message, Outbox& out) override;

  const AuthorizationService& service() const { return service_; }
  AuthorizationService& service() { return service_; }

  struct GrantRecord {
    Prescription prescription;
    DirectoryRef lab;
    std::string patient;
  };
  // Granted lab sessions keyed by session id.
  const std::map<std::string, GrantRecord>& grants() const { return grants_; }
  // Research store session id to study id.
  const std::map<std::string, std::string>& research_sessions() const {
    return research_sessions_;
  }
  const std::map<std::string, std::string>& blocked_studies() const {
    return blocked_;
  }

 private:
  struct PendingQuery {
    std::string requester;
    std::string request_id;
    bool research = false;
    std::optional<Prescription> prescription;
    std::string study_id;
    DirectoryRef ref;
  };

  void OnAuthorizeLab(const Message& m, Outbox& out);
  void OnVerifyResearcher(const Message& m, Outbox& out);
  void OnDirectoryAnswer(const Message& m, Outbox& out);
  void OnStoreWrite(const Message& m, Outbox& out);
  void OnStoreRead(const Message& m, Outbox& out);
  void OnResultReady(const Message& m, Outbox& out);
  void Query(PendingQuery pending, Outbox& out);
  void Resolve(const PendingQuery& pending, const DirectoryLookup& lookup,
               Outbox& out);
  Role RoleOf(const std::string& entity_id) const;

  AuthorizationService service_;
  AnonymizerInfo anonymizer_;
  EntityContext context_;
  uint64_t next_query_ = 0;
  std::map<std::string, PendingQuery> queries_;
  std::map<std::string, GrantRecord> grants_;
  std::map<std::string, std::string> research_sessions_;
  std::set<std::string> announced_studies_;
  std::map<std::string, std::string> blocked_;
};

class DirectoryEntity : public Entity {
 public:
  explicit DirectoryEntity(Directory directory);
  void OnMessage(const Message& message, Outbox& out) override;
  const Directory& directory() const { return directory_; }

 private:
  Directory directory_;
};

class BlobStoreEntity : public Entity {
 public:
  BlobStoreEntity();
  void OnMessage(const Message& message, Outbox& out) override;
  const std::map<std::string, Bytes>& blobs() const { return blobs_; }

 private:
  std::map<std::string, Bytes> blobs_;
};

class AnonymizerEntity : public Entity {
 public:
  AnonymizerEntity(crypto::EncryptionKeyPair keys, AnonymizationPolicy policy,
                   Rng rng);
  void OnMessage(const Message& message, Outbox& out) override;

  const crypto::EncryptionKeyPair& keys() const { return keys_; }

  struct Study {
    std::string session_id;
    DirectoryRef researcher;
    SubmissionPool pool;
    bool close_requested = false;
    std::optional<ReleaseDecision> decision;
    size_t submissions = 0;
  };
  const std::map<std::string, Study>& studies() const { return studies_; }

 private:
  void TryRelease(Study& study, const std::string& study_id, Outbox& out);

  crypto::EncryptionKeyPair keys_;
  AnonymizationPolicy policy_;
  Rng rng_;
  std::map<std::string, Study> studies_;
  std::map<std::string, std::string> study_by_session_;
};

class ResearcherEntity : public Entity {
 public:
  ResearcherEntity(DirectoryRef ref, crypto::EncryptionKeyPair keys,
                   EntityContext context);
  void OnMessage(const Message& message, Outbox& out) override;

  const std::map<std::string, std::vector<ReleasedBatch>>& releases() const {
    return releases_;
  }
  // Directly submitted records per study, keyed by submitting entity.
  const std::map<std::string, std::map<std::string, FieldMap>>&
  direct_submissions() const {
    return direct_;
  }

 private:
  DirectoryRef ref_;
  crypto::EncryptionKeyPair keys_;
  EntityContext context_;
  std::map<std::string, std::vector<ReleasedBatch>> releases_;
  std::map<std::string, std::map<std::string, FieldMap>> direct_;
};

class EmergencyServerEntity : public Entity {
 public:
  EmergencyServerEntity();
  void OnMessage(const Message& message, Outbox& out) override;
  const EmergencyStorage& storage() const { return storage_; }

 private:
  EmergencyStorage storage_;
};

// Designated contacts and intruders share this class; only the key differs.
class EmergencyContactEntity : public Entity {
 public:
  EmergencyContactEntity(std::string id, crypto::EncryptionKeyPair keys);
  void OnMessage(const Message& message, Outbox& out) override;

  const crypto::EncryptionKeyPair& keys() const { return keys_; }

 private:
  crypto::EncryptionKeyPair keys_;
};

// Active attacker used by the substituted-key tamper: it holds a key pair and
// tries to read stores it learned about in flight.
class MitmEntity : public Entity {
 public:
  explicit MitmEntity(crypto::EncryptionKeyPair keys);
  void OnMessage(const Message& message, Outbox& out) override;

  const crypto::EncryptionKeyPair& keys() const { return keys_; }
  size_t denials() const { return denials_; }

 private:
  crypto::EncryptionKeyPair keys_;
  size_t denials_ = 0;
};

// Collects outcome reports addressed to the harness.
class HarnessSink : public Entity {
 public:
  HarnessSink();
  void OnMessage(const Message& message, Outbox& out) override;
  const std::vector<Message>& received() const { return received_; }

 private:
  std::vector<Message> received_;
};

}  // namespace dapriv

#endif  // DAPRIV_ENTITIES_H_
