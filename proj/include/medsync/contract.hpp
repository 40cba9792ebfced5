#pragma once

// The permission-metadata contract. One entry per two-party shared table records
// who shares it, who may update each attribute, who may change those grants,
// and the version/digest of the latest accepted content.
//
// All operations are pure: they take a state and return a new one. Rejected
// transactions return the input state unchanged.

#include "medsync/digest.hpp"
#include "medsync/relational.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace medsync {

using Principal = std::string;
using Tick = std::uint64_t;

struct SharedTableMetadata {
  std::string shared_id;
  Schema view_schema;
  std::set<Principal> peers;
  std::map<AttributeName, std::set<Principal>> perm;
  Principal authority;
  Tick latest_update_time = 0;
  std::uint64_t version = 0;
  Digest content_digest;

  friend bool operator==(const SharedTableMetadata&, const SharedTableMetadata&) = default;
};

enum class RejectReason {
  UnknownShared,
  NotAPeer,
  PermissionDenied,
  StaleVersion,
  NotAuthority,
  DuplicateShared,
  UnknownAttribute,
  MalformedMetadata,
  BlockedBySerialization,
};

std::string_view to_string(RejectReason reason) noexcept;

struct Verdict {
  bool accepted = true;
  RejectReason reason = RejectReason::UnknownShared;  // meaningful only when rejected
  AttributeName attr;                                  // set for PermissionDenied / UnknownAttribute
  std::string message;

  static Verdict accept() { return Verdict{}; }
  static Verdict reject(RejectReason reason, std::string message, AttributeName attr = {}) {
    return Verdict{false, reason, std::move(attr), std::move(message)};
  }
  bool rejected_for(RejectReason r) const noexcept { return !accepted && reason == r; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct DeployTx {
  SharedTableMetadata meta;
  Principal deployer;
  friend bool operator==(const DeployTx&, const DeployTx&) = default;
};

struct UpdateTx {
  std::string shared_id;
  Principal requester;
  AttrSet changed_attrs;
  std::uint64_t base_version = 0;
  Digest new_digest;
  std::uint32_t hops = 0;  // cascade depth that produced this proposal
  friend bool operator==(const UpdateTx&, const UpdateTx&) = default;
};

struct PermChangeTx {
  std::string shared_id;
  Principal requester;
  AttributeName attr;
  std::set<Principal> new_principals;
  friend bool operator==(const PermChangeTx&, const PermChangeTx&) = default;
};

struct Notification {
  std::string shared_id;
  Principal to;
  std::uint64_t new_version = 0;
  Digest new_digest;
  AttrSet changed_attrs;
  Principal source_peer;
  std::uint32_t hops = 0;
  friend bool operator==(const Notification&, const Notification&) = default;
};

class ContractState {
 public:
  const std::map<std::string, SharedTableMetadata>& entries() const noexcept { return entries_; }
  // Errors: UnknownShared.
  const SharedTableMetadata& at(const std::string& shared_id) const;
  const SharedTableMetadata* find(const std::string& shared_id) const;

  friend bool operator==(const ContractState&, const ContractState&) = default;

 private:
  friend std::pair<ContractState, Verdict> deploy(const ContractState&, const DeployTx&, Tick);
  friend std::pair<ContractState, std::vector<Notification>> apply_update(const ContractState&, const UpdateTx&, Tick);
  friend std::pair<ContractState, Verdict> change_permission(const ContractState&, const PermChangeTx&, Tick);
  friend ContractState contract_from_json(const nlohmann::json&);

  std::map<std::string, SharedTableMetadata> entries_;
};

Verdict validate_deploy(const ContractState& state, const DeployTx& tx);
// Registers a new entry with version 0 and latest_update_time = tick.
// Reject order: DuplicateShared, NotAPeer (deployer), MalformedMetadata.
std::pair<ContractState, Verdict> deploy(const ContractState& state, const DeployTx& tx, Tick tick);

// Reject order: UnknownShared, MalformedMetadata (empty changed_attrs), NotAPeer,
// PermissionDenied(first attr in name order), StaleVersion.
Verdict validate_update(const ContractState& state, const UpdateTx& tx);

// Precondition: validate_update(state, tx) accepted; throws std::logic_error otherwise.
// Emits one notification per peer other than the requester.
std::pair<ContractState, std::vector<Notification>> apply_update(const ContractState& state, const UpdateTx& tx,
                                                                  Tick tick);

// Reject order: UnknownShared, NotAuthority, UnknownAttribute, NotAPeer.
Verdict validate_permission_change(const ContractState& state, const PermChangeTx& tx);
std::pair<ContractState, Verdict> change_permission(const ContractState& state, const PermChangeTx& tx, Tick tick);

// Errors: UnknownShared.
const SharedTableMetadata& query_metadata(const ContractState& state, const std::string& shared_id);

nlohmann::json metadata_to_json(const SharedTableMetadata& meta);
SharedTableMetadata metadata_from_json(const nlohmann::json& doc);
nlohmann::json contract_to_json(const ContractState& state);
ContractState contract_from_json(const nlohmann::json& doc);
nlohmann::json verdict_to_json(const Verdict& verdict);
Verdict verdict_from_json(const nlohmann::json& doc);
nlohmann::json notification_to_json(const Notification& note);
Notification notification_from_json(const nlohmann::json& doc);

}  // namespace medsync
