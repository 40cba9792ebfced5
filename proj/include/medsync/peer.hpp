#pragma once

// One principal's state machine.
//
// A peer owns its local source tables and, per shared table, a copy of the
// shared view plus the bookkeeping of the update protocol:
//
//   local edit -> regenerate view through the lens -> propose UpdateTx
//   receipt    -> Accept: the staged view becomes the shared copy
//                 Stale/Blocked: fetch the latest copy, then re-propose
//   notify     -> DataRequest to the updating counterpart
//   response   -> verify against the ledger, put into the source, then check
//                 every other share on the same source for overlapping
//                 attributes and propose the ones whose view changed
//
// The shared copy changes only on an accepted proposal or on a verified
// response, so rejected attempts leave no trace in shared data.

#include "medsync/contract.hpp"
#include "medsync/ledger.hpp"
#include "medsync/lens.hpp"
#include "medsync/relational.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace medsync {

enum class ShareRole {
  Source,   // derives the shared table from a local source through a lens
  Replica,  // stores the shared table as-is
};

struct ShareBinding {
  std::string shared_id;
  std::string lens_id;  // empty for a Replica binding
  Principal counterpart;

  ShareRole role() const noexcept { return lens_id.empty() ? ShareRole::Replica : ShareRole::Source; }
  friend bool operator==(const ShareBinding&, const ShareBinding&) = default;
};

struct DataRequest {
  std::string shared_id;
  std::uint64_t requested_version = 0;
  Principal from;
  Principal to;
  friend bool operator==(const DataRequest&, const DataRequest&) = default;
};

struct DataResponse {
  std::string shared_id;
  std::uint64_t version = 0;
  Table table;
  Principal from;
  Principal to;
  friend bool operator==(const DataResponse&, const DataResponse&) = default;
};

using Message = std::variant<Notification, DataRequest, DataResponse, Receipt>;

Principal message_from(const Message& m);
Principal message_to(const Message& m);
std::string_view message_kind(const Message& m);
nlohmann::json message_to_json(const Message& m);
Message message_from_json(const nlohmann::json& doc);

struct InsertEdit {
  Assignment cells;
};
struct UpdateEdit {
  Assignment key;
  Assignment changes;
};
struct DeleteEdit {
  Assignment key;
};
using Edit = std::variant<InsertEdit, UpdateEdit, DeleteEdit>;

nlohmann::json edit_to_json(const Edit& edit);
Edit edit_from_json(const nlohmann::json& doc);

// Trace-worthy happenings inside a peer, drained and stamped by the driver.
struct PeerEvent {
  std::string kind;
  nlohmann::json detail;
};

struct ShareState {
  Table copy;  // table id == shared id
  std::uint64_t version = 0;
  std::optional<Table> pending;  // proposal awaiting its receipt
  std::uint64_t pending_base = 0;
  std::optional<std::uint64_t> awaiting;  // version requested from the counterpart
  bool needs_repropose = false;
  std::uint32_t hops = 0;  // cascade depth of the last update received

  friend bool operator==(const ShareState&, const ShareState&) = default;
};

// Three-way merge of keyed views. Cells changed only locally keep the local
// value; everything else follows `remote`.
Table merge_views(const Table& base, const Table& local, const Table& remote);

// Attributes differing between two keyed views; every attribute for rows
// present on one side only.
AttrSet changed_attributes(const Table& before, const Table& after);

class PeerNode {
 public:
  explicit PeerNode(Principal principal, std::uint32_t max_cascade_hops = 16);

  const Principal& principal() const noexcept { return principal_; }
  const std::map<std::string, Table>& tables() const noexcept { return tables_; }
  const std::map<std::string, Lens>& lenses() const noexcept { return lenses_; }
  const std::map<std::string, ShareBinding>& bindings() const noexcept { return bindings_; }
  const std::map<std::string, ShareState>& shares() const noexcept { return shares_; }

  // Setup. Errors: KeyConflict-style duplicates raise ValidationError; unknown
  // references raise UnknownTable / UnknownLens.
  void add_table(Table table);
  void add_lens(const LensSpec& spec);
  // Registers a binding whose initial copy is `copy` at version 0.
  void bind(const ShareBinding& binding, Table copy);
  // The view a Source binding derives from the current local source, relabelled
  // with the shared id. Errors: UnknownShared, FdViolation.
  Table derived_view(const std::string& shared_id) const;

  // Errors: UnknownTable plus relational_model errors; the state is unchanged on error.
  void local_edit(const std::string& table_id, const Edit& edit);

  // Regenerates the shared view and, if it differs from the copy, stages it and
  // queues an UpdateTx (also returned). Returns nothing when the view is
  // unchanged or a proposal is already pending (which is then re-checked after
  // its receipt). Errors: UnknownShared, FdViolation.
  std::optional<UpdateTx> regenerate_and_propose(const std::string& shared_id, std::uint32_t hops = 0);

  void on_receipt(const Receipt& receipt);
  // Errors: UnknownShared.
  void on_notification(const Notification& note);
  // Errors: UnknownShared, Refused (not the counterpart), NotReady (copy older
  // than requested).
  DataResponse on_data_request(const DataRequest& req) const;
  // `meta` is the contract entry for resp.shared_id at delivery time. Returns
  // the cascade proposals it queued. Errors: UnknownShared, lens errors from put
  // (state unchanged).
  std::vector<UpdateTx> on_data_response(const DataResponse& resp, const SharedTableMetadata& meta);

  // Errors: UnknownShared.
  const Table& read_shared(const std::string& shared_id) const;

  void request_permission_change(const std::string& shared_id, const AttributeName& attr,
                                 std::set<Principal> principals);

  bool has_pending() const;
  bool has_output() const { return !outbox_.empty() || !tx_outbox_.empty() || !events_.empty(); }

  std::vector<Message> take_outbox() { return std::exchange(outbox_, {}); }
  std::vector<TxBody> take_tx_outbox() { return std::exchange(tx_outbox_, {}); }
  std::vector<PeerEvent> take_events() { return std::exchange(events_, {}); }

  // Persistent state other than tables: lenses, bindings and share bookkeeping.
  nlohmann::json state_to_json() const;
  // Rebuilds a peer from state_to_json output plus its tables and shared copies.
  static PeerNode restore(const nlohmann::json& state, std::vector<Table> tables,
                          std::map<std::string, Table> copies, std::uint32_t max_cascade_hops);

  friend bool operator==(const PeerNode& a, const PeerNode& b) {
    return a.principal_ == b.principal_ && a.tables_ == b.tables_ && a.bindings_ == b.bindings_ &&
           a.shares_ == b.shares_;
  }

 private:
  const ShareBinding& binding(const std::string& shared_id) const;
  void request_data(const std::string& shared_id, std::uint64_t version);
  void emit(std::string kind, nlohmann::json detail);

  Principal principal_;
  std::uint32_t max_cascade_hops_;
  std::map<std::string, Table> tables_;
  std::map<std::string, Lens> lenses_;
  std::map<std::string, ShareBinding> bindings_;
  std::map<std::string, ShareState> shares_;
  std::vector<Message> outbox_;
  std::vector<TxBody> tx_outbox_;
  std::vector<PeerEvent> events_;
};

}  // namespace medsync
