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

#include "dapriv/network.h"

#include <utility>

#include "absl/strings/str_cat.h"

namespace dapriv {

std::string Message::Digest() const { return DigestHex(AsBytes(body.dump())); }

wire::Json EventRecord::ToJson() const {
  return {{"timestamp", timestamp}, {"sender", sender},
          {"receiver", receiver},   {"type", type},
          {"session_id", session_id}, {"payload_digest", payload_digest}};
}

void Outbox::Send(std::string to, std::string type, wire::Json body,
                  std::string session_id) {
  Message m;
  m.from = sender_;
  m.to = std::move(to);
  m.type = std::move(type);
  m.session_id = std::move(session_id);
  m.body = std::move(body);
  messages_.push_back(std::move(m));
}

absl::Status Network::Attach(Entity* entity) {
  if (!entities_.emplace(entity->id(), entity).second) {
    return absl::AlreadyExistsError(
        absl::StrCat("entity '", entity->id(), "' already attached"));
  }
  return absl::OkStatus();
}

Entity* Network::Find(const std::string& id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : it->second;
}

void Network::Post(Message message) { queue_.push_back(std::move(message)); }

absl::Status Network::RunUntilIdle(size_t max_deliveries) {
  size_t delivered = 0;
  while (!queue_.empty()) {
    if (delivered++ == max_deliveries) {
      return absl::InternalError("delivery budget exhausted; message loop?");
    }
    Message message = std::move(queue_.front());
    queue_.pop_front();
    if (interceptor_) interceptor_(message);
    Entity* receiver = Find(message.to);
    if (receiver == nullptr) {
      return absl::InternalError(absl::StrCat(
          "message '", message.type, "' from ", message.from,
          " addressed to unknown entity '", message.to, "'"));
    }
    message.timestamp = ++clock_;
    events_.push_back({message.timestamp, message.from, message.to,
                       message.type, message.session_id, message.Digest()});
    transcript_.push_back(message);
    Outbox out(receiver->id());
    receiver->OnMessage(transcript_.back(), out);
    for (Message& m : out.messages()) queue_.push_back(std::move(m));
  }
  return absl::OkStatus();
}

}  // namespace dapriv
