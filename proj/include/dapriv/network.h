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


#ifndef DAPRIV_NETWORK_H_
#define DAPRIV_NETWORK_H_

// Deterministic single-threaded message transport. Entities never touch each
// other's state; everything they learn arrives as a Message, and every
// delivery is stamped with a logical time and appended to the event log.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "dapriv/certificates.h"
#include "dapriv/wire.h"

namespace dapriv {

struct Message {
  uint64_t timestamp = 0;  // assigned at delivery
  std::string from;
  std::string to;
  std::string type;
  std::string session_id;  // empty when the message belongs to no session
  wire::Json body = wire::Json::object();

  std::string Digest() const;
};

// One line of the audit log. The payload itself is never logged.
struct EventRecord {
  uint64_t timestamp = 0;
  std::string sender;
  std::string receiver;
  std::string type;
  std::string session_id;
  std::string payload_digest;

  wire::Json ToJson() const;
  std::string ToLine() const { return ToJson().dump(); }
};

// Plaintext an entity obtained, either by decrypting or by producing it.
// Invariant sweeps and the adversary harvest read these.
struct LedgerEntry {
  std::string kind;
  std::string context;  // session, flow, study or patient the entry belongs to
  std::string plaintext;
};

class Outbox {
 public:
  explicit Outbox(std::string sender) : sender_(std::move(sender)) {}

  void Send(std::string to, std::string type, wire::Json body,
            std::string session_id = {});

  std::vector<Message>& messages() { return messages_; }

 private:
  std::string sender_;
  std::vector<Message> messages_;
};

class Entity {
 public:
  Entity(std::string id, Role role) : id_(std::move(id)), role_(role) {}
  virtual ~Entity() = default;

  Entity(const Entity&) = delete;
  Entity& operator=(const Entity&) = delete;

  const std::string& id() const { return id_; }
  Role role() const { return role_; }
  const std::vector<LedgerEntry>& ledger() const { return ledger_; }

  virtual void OnMessage(const Message& message, Outbox& out) = 0;

 protected:
  void Record(std::string kind, std::string context, std::string plaintext) {
    ledger_.push_back(
        {std::move(kind), std::move(context), std::move(plaintext)});
  }

 private:
  std::string id_;
  Role role_;
  std::vector<LedgerEntry> ledger_;
};

class Network {
 public:
  // May rewrite a message in flight. Used only for tamper injection.
  using Interceptor = std::function<void(Message&)>;

  // The entity must outlive the network. AlreadyExists on a duplicate id.
  absl::Status Attach(Entity* entity);
  Entity* Find(const std::string& id) const;
  const std::map<std::string, Entity*>& entities() const { return entities_; }

  void Post(Message message);
  void SetInterceptor(Interceptor interceptor) {
    interceptor_ = std::move(interceptor);
  }
  void ClearInterceptor() { interceptor_ = nullptr; }

  // Delivers queued messages in FIFO order until the queue drains.
  // Internal on a message to an unknown entity or when the delivery budget
  // runs out (a message loop).
  absl::Status RunUntilIdle(size_t max_deliveries = 1u << 22);

  uint64_t now() const { return clock_; }
  const std::vector<Message>& transcript() const { return transcript_; }
  const std::vector<EventRecord>& events() const { return events_; }

 private:
  std::map<std::string, Entity*> entities_;
  std::deque<Message> queue_;
  Interceptor interceptor_;
  uint64_t clock_ = 0;
  std::vector<Message> transcript_;
  std::vector<EventRecord> events_;
};

}  // namespace dapriv

#endif  // DAPRIV_NETWORK_H_
