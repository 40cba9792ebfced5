#include "medsync/contract.hpp"

#include "medsync/error.hpp"

#include <array>
#include <stdexcept>

namespace medsync {

namespace {

constexpr std::array<std::pair<RejectReason, std::string_view>, 9> kReasonNames{{
    {RejectReason::UnknownShared, "UnknownShared"},
    {RejectReason::NotAPeer, "NotAPeer"},
    {RejectReason::PermissionDenied, "PermissionDenied"},
    {RejectReason::StaleVersion, "StaleVersion"},
    {RejectReason::NotAuthority, "NotAuthority"},
    {RejectReason::DuplicateShared, "DuplicateShared"},
    {RejectReason::UnknownAttribute, "UnknownAttribute"},
    {RejectReason::MalformedMetadata, "MalformedMetadata"},
    {RejectReason::BlockedBySerialization, "BlockedBySerialization"},
}};

RejectReason reason_from_string(const std::string& name) {
  for (const auto& [reason, text] : kReasonNames) {
    if (text == name) return reason;
  }
  throw Error(Errc::ParseError, "unknown reject reason '" + name + "'");
}

std::string malformed_reason(const SharedTableMetadata& meta) {
  if (meta.shared_id.empty()) return "empty shared_id";
  if (meta.peers.size() != 2) return "a shared table has exactly two peers";
  if (!meta.peers.contains(meta.authority)) return "authority '" + meta.authority + "' is not a peer";
  if (meta.version != 0) return "version must start at 0";
  if (meta.perm.size() != meta.view_schema.attrs().size()) return "perm must cover exactly the view attributes";
  for (const auto& attr : meta.view_schema.attrs()) {
    const auto it = meta.perm.find(attr);
    if (it == meta.perm.end()) return "perm lacks attribute '" + attr + "'";
    for (const auto& p : it->second) {
      if (!meta.peers.contains(p)) return "perm[" + attr + "] names non-peer '" + p + "'";
    }
  }
  return {};
}

}  // namespace

std::string_view to_string(RejectReason reason) noexcept {
  for (const auto& [r, text] : kReasonNames) {
    if (r == reason) return text;
  }
  return "Unknown";
}

const SharedTableMetadata& ContractState::at(const std::string& shared_id) const {
  const auto* meta = find(shared_id);
  if (meta == nullptr) throw Error(Errc::UnknownShared, "'" + shared_id + "'");
  return *meta;
}

const SharedTableMetadata* ContractState::find(const std::string& shared_id) const {
  const auto it = entries_.find(shared_id);
  return it == entries_.end() ? nullptr : &it->second;
}

Verdict validate_deploy(const ContractState& state, const DeployTx& tx) {
  if (state.find(tx.meta.shared_id) != nullptr) {
    return Verdict::reject(RejectReason::DuplicateShared, "'" + tx.meta.shared_id + "' already deployed");
  }
  if (!tx.meta.peers.contains(tx.deployer)) {
    return Verdict::reject(RejectReason::NotAPeer, "deployer '" + tx.deployer + "' is not a peer");
  }
  if (auto why = malformed_reason(tx.meta); !why.empty()) {
    return Verdict::reject(RejectReason::MalformedMetadata, why);
  }
  return Verdict::accept();
}

std::pair<ContractState, Verdict> deploy(const ContractState& state, const DeployTx& tx, Tick tick) {
  Verdict verdict = validate_deploy(state, tx);
  if (!verdict.accepted) return {state, std::move(verdict)};
  ContractState next = state;
  SharedTableMetadata meta = tx.meta;
  meta.latest_update_time = tick;
  next.entries_.emplace(meta.shared_id, std::move(meta));
  return {std::move(next), std::move(verdict)};
}

Verdict validate_update(const ContractState& state, const UpdateTx& tx) {
  const auto* meta = state.find(tx.shared_id);
  if (meta == nullptr) return Verdict::reject(RejectReason::UnknownShared, "'" + tx.shared_id + "'");
  if (tx.changed_attrs.empty()) {
    return Verdict::reject(RejectReason::MalformedMetadata, "update declares no changed attributes");
  }
  if (!meta->peers.contains(tx.requester)) {
    return Verdict::reject(RejectReason::NotAPeer, "'" + tx.requester + "' does not share '" + tx.shared_id + "'");
  }
  for (const auto& attr : tx.changed_attrs) {
    const auto it = meta->perm.find(attr);
    if (it == meta->perm.end() || !it->second.contains(tx.requester)) {
      return Verdict::reject(RejectReason::PermissionDenied,
                             "'" + tx.requester + "' may not update '" + attr + "' of '" + tx.shared_id + "'", attr);
    }
  }
  if (tx.base_version != meta->version) {
    return Verdict::reject(RejectReason::StaleVersion, "base version " + std::to_string(tx.base_version) +
                                                           ", current " + std::to_string(meta->version));
  }
  return Verdict::accept();
}

std::pair<ContractState, std::vector<Notification>> apply_update(const ContractState& state, const UpdateTx& tx,
                                                                  Tick tick) {
  if (!validate_update(state, tx).accepted) throw std::logic_error("apply_update on a rejected transaction");
  ContractState next = state;
  SharedTableMetadata& meta = next.entries_.at(tx.shared_id);
  meta.version += 1;
  meta.content_digest = tx.new_digest;
  meta.latest_update_time = tick;
  std::vector<Notification> notes;
  for (const auto& peer : meta.peers) {
    if (peer == tx.requester) continue;
    notes.push_back(Notification{tx.shared_id, peer, meta.version, meta.content_digest, tx.changed_attrs,
                                 tx.requester, tx.hops});
  }
  return {std::move(next), std::move(notes)};
}

Verdict validate_permission_change(const ContractState& state, const PermChangeTx& tx) {
  const auto* meta = state.find(tx.shared_id);
  if (meta == nullptr) return Verdict::reject(RejectReason::UnknownShared, "'" + tx.shared_id + "'");
  if (tx.requester != meta->authority) {
    return Verdict::reject(RejectReason::NotAuthority,
                           "'" + tx.requester + "' is not the authority of '" + tx.shared_id + "'");
  }
  if (!meta->view_schema.has(tx.attr)) {
    return Verdict::reject(RejectReason::UnknownAttribute, "'" + tx.attr + "' not in '" + tx.shared_id + "'",
                           tx.attr);
  }
  for (const auto& p : tx.new_principals) {
    if (!meta->peers.contains(p)) {
      return Verdict::reject(RejectReason::NotAPeer, "'" + p + "' does not share '" + tx.shared_id + "'");
    }
  }
  return Verdict::accept();
}

std::pair<ContractState, Verdict> change_permission(const ContractState& state, const PermChangeTx& tx, Tick tick) {
  Verdict verdict = validate_permission_change(state, tx);
  if (!verdict.accepted) return {state, std::move(verdict)};
  ContractState next = state;
  SharedTableMetadata& meta = next.entries_.at(tx.shared_id);
  meta.perm[tx.attr] = tx.new_principals;
  meta.latest_update_time = tick;
  return {std::move(next), std::move(verdict)};
}

const SharedTableMetadata& query_metadata(const ContractState& state, const std::string& shared_id) {
  return state.at(shared_id);
}

nlohmann::json metadata_to_json(const SharedTableMetadata& meta) {
  nlohmann::json perm = nlohmann::json::object();
  for (const auto& [attr, who] : meta.perm) perm[attr] = who;
  return {{"shared_id", meta.shared_id},
          {"schema", schema_to_json(meta.view_schema)},
          {"peers", meta.peers},
          {"perm", std::move(perm)},
          {"authority", meta.authority},
          {"latest_update_time", meta.latest_update_time},
          {"version", meta.version},
          {"digest", meta.content_digest.hex()}};
}

SharedTableMetadata metadata_from_json(const nlohmann::json& doc) {
  try {
    SharedTableMetadata meta;
    meta.shared_id = doc.at("shared_id").get<std::string>();
    meta.view_schema = schema_from_json(doc.at("schema"));
    meta.peers = doc.at("peers").get<std::set<Principal>>();
    for (const auto& [attr, who] : doc.at("perm").items()) meta.perm[attr] = who.get<std::set<Principal>>();
    meta.authority = doc.at("authority").get<Principal>();
    meta.latest_update_time = doc.value("latest_update_time", Tick{0});
    meta.version = doc.value("version", std::uint64_t{0});
    if (doc.contains("digest")) meta.content_digest = Digest::from_hex(doc.at("digest").get<std::string>());
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("metadata: ") + e.what());
  }
}

nlohmann::json contract_to_json(const ContractState& state) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [id, meta] : state.entries()) entries.push_back(metadata_to_json(meta));
  return {{"entries", std::move(entries)}};
}

ContractState contract_from_json(const nlohmann::json& doc) {
  ContractState state;
  try {
    for (const auto& entry : doc.at("entries")) {
      auto meta = metadata_from_json(entry);
      const std::string id = meta.shared_id;
      if (!state.entries_.emplace(id, std::move(meta)).second) {
        throw Error(Errc::ParseError, "duplicate contract entry '" + id + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("contract: ") + e.what());
  }
  return state;
}

nlohmann::json verdict_to_json(const Verdict& verdict) {
  if (verdict.accepted) return {{"status", "accept"}};
  nlohmann::json j{{"status", "reject"}, {"reason", to_string(verdict.reason)}, {"message", verdict.message}};
  if (!verdict.attr.empty()) j["attr"] = verdict.attr;
  return j;
}

Verdict verdict_from_json(const nlohmann::json& doc) {
  try {
    const auto status = doc.at("status").get<std::string>();
    if (status == "accept") return Verdict::accept();
    if (status != "reject") throw Error(Errc::ParseError, "verdict status '" + status + "'");
    return Verdict::reject(reason_from_string(doc.at("reason").get<std::string>()),
                           doc.at("message").get<std::string>(), doc.value("attr", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("verdict: ") + e.what());
  }
}

nlohmann::json notification_to_json(const Notification& note) {
  return {{"shared_id", note.shared_id},     {"to", note.to},
          {"new_version", note.new_version}, {"new_digest", note.new_digest.hex()},
          {"changed_attrs", note.changed_attrs}, {"source_peer", note.source_peer},
          {"hops", note.hops}};
}

Notification notification_from_json(const nlohmann::json& doc) {
  try {
    return Notification{doc.at("shared_id").get<std::string>(),
                        doc.at("to").get<Principal>(),
                        doc.at("new_version").get<std::uint64_t>(),
                        Digest::from_hex(doc.at("new_digest").get<std::string>()),
                        doc.at("changed_attrs").get<AttrSet>(),
                        doc.at("source_peer").get<Principal>(),
                        doc.at("hops").get<std::uint32_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("notification: ") + e.what());
  }
}

}  // namespace medsync
