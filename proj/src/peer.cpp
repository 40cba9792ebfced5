#include "medsync/peer.hpp"

#include "medsync/error.hpp"

#include <set>

namespace medsync {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const Principal kLedger = "ledger";

nlohmann::json assignment_to_json(const Assignment& a) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [attr, v] : a) j[attr] = v.is_null() ? nlohmann::json(nullptr) : nlohmann::json(v.text());
  return j;
}

Assignment assignment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ParseError, "expected an attribute -> value object");
  Assignment a;
  for (const auto& [attr, v] : j.items()) {
    if (v.is_null()) {
      a[attr] = Value::null();
    } else if (v.is_string()) {
      a[attr] = Value(v.get<std::string>());
    } else {
      throw Error(Errc::ParseError, "value of '" + attr + "' must be a string or null");
    }
  }
  return a;
}

bool same_row(const Row* a, const Row* b) {
  if (a == nullptr || b == nullptr) return a == b;
  return *a == *b;
}

std::string_view edit_kind(const Edit& edit) {
  return std::visit(overloaded{[](const InsertEdit&) { return std::string_view("insert"); },
                               [](const UpdateEdit&) { return std::string_view("update"); },
                               [](const DeleteEdit&) { return std::string_view("delete"); }},
                    edit);
}

}  // namespace

Principal message_from(const Message& m) {
  return std::visit(overloaded{[](const Notification&) { return kLedger; },
                               [](const DataRequest& r) { return r.from; },
                               [](const DataResponse& r) { return r.from; },
                               [](const Receipt&) { return kLedger; }},
                    m);
}

Principal message_to(const Message& m) {
  return std::visit(overloaded{[](const Notification& n) { return n.to; },
                               [](const DataRequest& r) { return r.to; },
                               [](const DataResponse& r) { return r.to; },
                               [](const Receipt& r) { return r.tx.submitter(); }},
                    m);
}

std::string_view message_kind(const Message& m) {
  return std::visit(overloaded{[](const Notification&) { return std::string_view("notify"); },
                               [](const DataRequest&) { return std::string_view("data_req"); },
                               [](const DataResponse&) { return std::string_view("data_resp"); },
                               [](const Receipt&) { return std::string_view("receipt"); }},
                    m);
}

nlohmann::json message_to_json(const Message& m) {
  nlohmann::json j = std::visit(
      overloaded{
          [](const Notification& n) { return notification_to_json(n); },
          [](const DataRequest& r) -> nlohmann::json {
            return {{"shared_id", r.shared_id}, {"requested_version", r.requested_version}};
          },
          [](const DataResponse& r) -> nlohmann::json {
            return {{"shared_id", r.shared_id}, {"version", r.version}, {"table", table_to_json(r.table)}};
          },
          [](const Receipt& r) -> nlohmann::json {
            return {{"tx", transaction_to_json(r.tx)}, {"verdict", verdict_to_json(r.verdict)}};
          },
      },
      m);
  j["kind"] = message_kind(m);
  j["from"] = message_from(m);
  j["to"] = message_to(m);
  return j;
}

Message message_from_json(const nlohmann::json& doc) {
  try {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "notify") return notification_from_json(doc);
    if (kind == "data_req") {
      return DataRequest{doc.at("shared_id").get<std::string>(), doc.at("requested_version").get<std::uint64_t>(),
                         doc.at("from").get<Principal>(), doc.at("to").get<Principal>()};
    }
    if (kind == "data_resp") {
      return DataResponse{doc.at("shared_id").get<std::string>(), doc.at("version").get<std::uint64_t>(),
                          table_from_json(doc.at("table")), doc.at("from").get<Principal>(),
                          doc.at("to").get<Principal>()};
    }
    if (kind == "receipt") {
      return Receipt{transaction_from_json(doc.at("tx")), verdict_from_json(doc.at("verdict"))};
    }
    throw Error(Errc::ParseError, "unknown message kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("message: ") + e.what());
  }
}

nlohmann::json edit_to_json(const Edit& edit) {
  nlohmann::json j = std::visit(
      overloaded{
          [](const InsertEdit& e) -> nlohmann::json { return {{"row", assignment_to_json(e.cells)}}; },
          [](const UpdateEdit& e) -> nlohmann::json {
            return {{"key", assignment_to_json(e.key)}, {"changes", assignment_to_json(e.changes)}};
          },
          [](const DeleteEdit& e) -> nlohmann::json { return {{"key", assignment_to_json(e.key)}}; },
      },
      edit);
  j["op"] = edit_kind(edit);
  return j;
}

Edit edit_from_json(const nlohmann::json& doc) {
  try {
    const auto op = doc.at("op").get<std::string>();
    if (op == "insert") return InsertEdit{assignment_from_json(doc.at("row"))};
    if (op == "update") {
      return UpdateEdit{assignment_from_json(doc.at("key")),
                        assignment_from_json(doc.value("changes", nlohmann::json::object()))};
    }
    if (op == "delete") return DeleteEdit{assignment_from_json(doc.at("key"))};
    throw Error(Errc::ParseError, "unknown edit op '" + op + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("edit: ") + e.what());
  }
}

Table merge_views(const Table& base, const Table& local, const Table& remote) {
  std::set<KeyTuple> keys;
  for (const Table* t : {&base, &local, &remote}) {
    for (const auto& [k, row] : t->rows()) keys.insert(k);
  }
  TableBuilder out(remote.id(), remote.schema());
  for (const auto& k : keys) {
    const Row* b = base.find(k);
    const Row* l = local.find(k);
    const Row* r = remote.find(k);
    const Row* pick = nullptr;
    if (same_row(l, b)) {
      pick = r;
    } else if (same_row(r, b)) {
      pick = l;
    } else if (b != nullptr && l != nullptr && r != nullptr) {
      Row merged = *r;
      for (std::size_t i = 0; i < merged.size(); ++i) {
        if ((*l)[i] != (*b)[i] && (*r)[i] == (*b)[i]) merged[i] = (*l)[i];
      }
      out.add(std::move(merged));
      continue;
    } else {
      pick = r;  // structural conflict: the accepted remote version wins
    }
    if (pick != nullptr) out.add(*pick);
  }
  return std::move(out).build();
}

AttrSet changed_attributes(const Table& before, const Table& after) {
  const auto& attrs = after.schema().attrs();
  AttrSet out;
  auto all = [&] { out.insert(attrs.begin(), attrs.end()); };
  for (const auto& [k, row] : before.rows()) {
    const Row* other = after.find(k);
    if (other == nullptr) {
      all();
      continue;
    }
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (row[i] != (*other)[i]) out.insert(attrs[i]);
    }
  }
  for (const auto& [k, row] : after.rows()) {
    if (before.find(k) == nullptr) all();
  }
  return out;
}

PeerNode::PeerNode(Principal principal, std::uint32_t max_cascade_hops)
    : principal_(std::move(principal)), max_cascade_hops_(max_cascade_hops) {}

void PeerNode::add_table(Table table) {
  const std::string id = table.id();
  if (!tables_.emplace(id, std::move(table)).second) {
    throw Error(Errc::ValidationError, principal_ + ": duplicate table '" + id + "'");
  }
}

void PeerNode::add_lens(const LensSpec& spec) {
  const auto it = tables_.find(spec.source_table_id);
  if (it == tables_.end()) {
    throw Error(Errc::UnknownTable, principal_ + ": lens '" + spec.lens_id + "' reads unknown table '" +
                                        spec.source_table_id + "'");
  }
  if (lenses_.contains(spec.lens_id)) {
    throw Error(Errc::ValidationError, principal_ + ": duplicate lens '" + spec.lens_id + "'");
  }
  lenses_.emplace(spec.lens_id, compile_lens(spec, it->second.schema()));
}

void PeerNode::bind(const ShareBinding& b, Table copy) {
  if (!b.lens_id.empty() && !lenses_.contains(b.lens_id)) {
    throw Error(Errc::UnknownLens, principal_ + ": binding '" + b.shared_id + "' uses unknown lens '" + b.lens_id + "'");
  }
  if (bindings_.contains(b.shared_id)) {
    throw Error(Errc::ValidationError, principal_ + ": duplicate binding '" + b.shared_id + "'");
  }
  bindings_.emplace(b.shared_id, b);
  ShareState state;
  state.copy = copy.with_id(b.shared_id);
  shares_.emplace(b.shared_id, std::move(state));
}

const ShareBinding& PeerNode::binding(const std::string& shared_id) const {
  const auto it = bindings_.find(shared_id);
  if (it == bindings_.end()) throw Error(Errc::UnknownShared, principal_ + " has no binding '" + shared_id + "'");
  return it->second;
}

Table PeerNode::derived_view(const std::string& shared_id) const {
  const ShareBinding& b = binding(shared_id);
  if (b.role() == ShareRole::Replica) return shares_.at(shared_id).copy;
  const Lens& lens = lenses_.at(b.lens_id);
  return get(lens, tables_.at(lens.spec().source_table_id)).with_id(shared_id);
}

void PeerNode::emit(std::string kind, nlohmann::json detail) {
  events_.push_back(PeerEvent{std::move(kind), std::move(detail)});
}

void PeerNode::local_edit(const std::string& table_id, const Edit& edit) {
  const auto it = tables_.find(table_id);
  if (it == tables_.end()) throw Error(Errc::UnknownTable, principal_ + ": '" + table_id + "'");
  it->second = std::visit(overloaded{[&](const InsertEdit& e) { return insert_row(it->second, e.cells); },
                                     [&](const UpdateEdit& e) { return update_row(it->second, e.key, e.changes); },
                                     [&](const DeleteEdit& e) { return delete_row(it->second, e.key); }},
                          edit);
  nlohmann::json detail = edit_to_json(edit);
  detail["table"] = table_id;
  emit("edit", std::move(detail));
}

std::optional<UpdateTx> PeerNode::regenerate_and_propose(const std::string& shared_id, std::uint32_t hops) {
  const ShareBinding& b = binding(shared_id);
  if (b.role() == ShareRole::Replica) {
    throw Error(Errc::UnknownLens, principal_ + ": replica binding '" + shared_id + "' cannot propose");
  }
  ShareState& share = shares_.at(shared_id);
  Table view = derived_view(shared_id);
  const bool differs = view != share.copy;
  emit("regenerate", {{"shared_id", shared_id}, {"lens", b.lens_id}, {"differs", differs}});
  if (!differs) return std::nullopt;
  if (share.pending) {
    share.needs_repropose = true;
    emit("propose_deferred", {{"shared_id", shared_id}});
    return std::nullopt;
  }
  if (hops > max_cascade_hops_) {
    emit("cascade_suppressed", {{"shared_id", shared_id}, {"hops", hops}});
    return std::nullopt;
  }
  UpdateTx tx{shared_id, principal_, changed_attributes(share.copy, view), share.version, digest(view), hops};
  share.pending = std::move(view);
  share.pending_base = share.version;
  share.needs_repropose = false;
  emit("propose", {{"shared_id", shared_id},
                   {"base_version", tx.base_version},
                   {"changed_attrs", tx.changed_attrs},
                   {"new_digest", tx.new_digest.hex()},
                   {"hops", hops}});
  tx_outbox_.emplace_back(tx);
  return tx;
}

void PeerNode::request_data(const std::string& shared_id, std::uint64_t version) {
  ShareState& share = shares_.at(shared_id);
  if (share.awaiting && *share.awaiting >= version) return;
  share.awaiting = version;
  const Principal& to = binding(shared_id).counterpart;
  outbox_.emplace_back(DataRequest{shared_id, version, principal_, to});
  emit("data_req", {{"shared_id", shared_id}, {"requested_version", version}, {"from", principal_}, {"to", to}});
}

void PeerNode::on_receipt(const Receipt& receipt) {
  const auto* tx = std::get_if<UpdateTx>(&receipt.tx.body);
  if (tx == nullptr || tx->requester != principal_) return;
  const auto it = shares_.find(tx->shared_id);
  if (it == shares_.end()) return;
  ShareState& share = it->second;
  if (!share.pending || digest(*share.pending) != tx->new_digest || share.pending_base != tx->base_version) return;

  nlohmann::json detail{{"shared_id", tx->shared_id}, {"verdict", verdict_to_json(receipt.verdict)}};
  if (receipt.verdict.accepted) {
    share.copy = std::move(*share.pending);
    share.version = share.pending_base + 1;
    share.pending.reset();
    detail["version"] = share.version;
    emit("receipt", std::move(detail));
    if (share.needs_repropose) {
      share.needs_repropose = false;
      regenerate_and_propose(tx->shared_id, tx->hops);
    }
    return;
  }
  share.pending.reset();
  emit("receipt", std::move(detail));
  if (receipt.verdict.rejected_for(RejectReason::StaleVersion) ||
      receipt.verdict.rejected_for(RejectReason::BlockedBySerialization)) {
    share.needs_repropose = true;
    request_data(tx->shared_id, share.version + 1);
  }
}

void PeerNode::on_notification(const Notification& note) {
  binding(note.shared_id);
  ShareState& share = shares_.at(note.shared_id);
  share.hops = note.hops;
  if (note.new_version <= share.version) return;
  request_data(note.shared_id, note.new_version);
}

DataResponse PeerNode::on_data_request(const DataRequest& req) const {
  const ShareBinding& b = binding(req.shared_id);
  if (req.from != b.counterpart) {
    throw Error(Errc::Refused, principal_ + " does not share '" + req.shared_id + "' with '" + req.from + "'");
  }
  const ShareState& share = shares_.at(req.shared_id);
  if (share.version < req.requested_version) {
    throw Error(Errc::NotReady, principal_ + " holds '" + req.shared_id + "' v" + std::to_string(share.version) +
                                    ", v" + std::to_string(req.requested_version) + " requested");
  }
  return DataResponse{req.shared_id, share.version, share.copy, principal_, req.from};
}

std::vector<UpdateTx> PeerNode::on_data_response(const DataResponse& resp, const SharedTableMetadata& meta) {
  const ShareBinding& b = binding(resp.shared_id);
  ShareState& share = shares_.at(resp.shared_id);
  const std::string& sid = resp.shared_id;
  if (resp.from != b.counterpart) {
    emit("response_refused", {{"shared_id", sid}, {"from", resp.from}});
    return {};
  }
  const bool verified = resp.version == meta.version && digest(resp.table) == meta.content_digest;
  if (!verified) {
    if (share.awaiting && *share.awaiting <= share.version) share.awaiting.reset();
    if (share.version >= meta.version) {
      emit("stale_response", {{"shared_id", sid}, {"version", resp.version}});
      return {};
    }
    emit("digest_mismatch", {{"shared_id", sid}, {"version", resp.version}, {"ledger_version", meta.version}});
    share.awaiting.reset();
    request_data(sid, meta.version);
    return {};
  }
  if (resp.version <= share.version) {
    if (share.awaiting && *share.awaiting <= share.version) share.awaiting.reset();
    emit("duplicate_response", {{"shared_id", sid}, {"version", resp.version}});
    if (b.role() == ShareRole::Source && share.needs_repropose && !share.pending) {
      share.needs_repropose = false;
      regenerate_and_propose(sid, 0);
    }
    return {};
  }

  std::vector<UpdateTx> proposals;
  const Lens* lens = b.role() == ShareRole::Source ? &lenses_.at(b.lens_id) : nullptr;
  bool merged = false;
  if (lens != nullptr) {
    const Table local = derived_view(sid);
    merged = local != share.copy;
    const Table target = merged ? merge_views(share.copy, local, resp.table) : resp.table;
    Table& source = tables_.at(lens->spec().source_table_id);
    source = put(*lens, source, target);
  }
  share.copy = resp.table;
  share.version = resp.version;
  if (share.awaiting && *share.awaiting <= share.version) share.awaiting.reset();
  nlohmann::json detail{{"shared_id", sid}, {"version", share.version}, {"merged", merged}};
  if (lens != nullptr) detail["source"] = lens->spec().source_table_id;
  emit("put_applied", std::move(detail));

  if (lens != nullptr) {
    for (const auto& [other_id, other] : bindings_) {
      if (other_id == sid || other.role() != ShareRole::Source) continue;
      const Lens& other_lens = lenses_.at(other.lens_id);
      if (other_lens.spec().source_table_id != lens->spec().source_table_id) continue;
      const AttrSet shared_attrs = overlap(lens->spec(), other_lens.spec());
      if (shared_attrs.empty()) continue;
      const bool differs = derived_view(other_id) != shares_.at(other_id).copy;
      emit("dep_check", {{"shared_id", other_id}, {"via", sid}, {"overlap", shared_attrs}, {"differs", differs}});
      if (!differs) continue;
      emit("cascade", {{"shared_id", other_id}, {"via", sid}, {"hops", share.hops + 1}});
      if (auto tx = regenerate_and_propose(other_id, share.hops + 1)) proposals.push_back(std::move(*tx));
    }
    if (share.needs_repropose && !share.pending) {
      share.needs_repropose = false;
      regenerate_and_propose(sid, 0);
    }
  }
  return proposals;
}

const Table& PeerNode::read_shared(const std::string& shared_id) const {
  binding(shared_id);
  return shares_.at(shared_id).copy;
}

void PeerNode::request_permission_change(const std::string& shared_id, const AttributeName& attr,
                                         std::set<Principal> principals) {
  emit("grant", {{"shared_id", shared_id}, {"attr", attr}, {"principals", principals}});
  tx_outbox_.emplace_back(PermChangeTx{shared_id, principal_, attr, std::move(principals)});
}

bool PeerNode::has_pending() const {
  for (const auto& [id, share] : shares_) {
    if (share.pending) return true;
  }
  return false;
}

nlohmann::json PeerNode::state_to_json() const {
  nlohmann::json lenses = nlohmann::json::array();
  for (const auto& [id, lens] : lenses_) lenses.push_back(lens_spec_to_json(lens.spec()));
  nlohmann::json bindings = nlohmann::json::array();
  nlohmann::json shares = nlohmann::json::object();
  for (const auto& [id, b] : bindings_) {
    bindings.push_back({{"shared_id", b.shared_id},
                        {"lens_id", b.lens_id},
                        {"counterpart", b.counterpart},
                        {"role", b.role() == ShareRole::Source ? "source" : "replica"}});
    const ShareState& s = shares_.at(id);
    shares[id] = {{"version", s.version},
                  {"pending", s.pending ? table_to_json(*s.pending) : nlohmann::json(nullptr)},
                  {"pending_base", s.pending_base},
                  {"awaiting", s.awaiting ? nlohmann::json(*s.awaiting) : nlohmann::json(nullptr)},
                  {"needs_repropose", s.needs_repropose},
                  {"hops", s.hops}};
  }
  return {{"principal", principal_}, {"lenses", std::move(lenses)}, {"bindings", std::move(bindings)},
          {"shares", std::move(shares)}};
}

PeerNode PeerNode::restore(const nlohmann::json& state, std::vector<Table> tables,
                           std::map<std::string, Table> copies, std::uint32_t max_cascade_hops) {
  try {
    PeerNode peer(state.at("principal").get<Principal>(), max_cascade_hops);
    for (auto& t : tables) peer.add_table(std::move(t));
    for (const auto& spec : state.at("lenses")) peer.add_lens(lens_spec_from_json(spec));
    for (const auto& b : state.at("bindings")) {
      ShareBinding binding{b.at("shared_id").get<std::string>(), b.at("lens_id").get<std::string>(),
                           b.at("counterpart").get<Principal>()};
      const auto it = copies.find(binding.shared_id);
      if (it == copies.end()) throw Error(Errc::ParseError, "missing shared copy '" + binding.shared_id + "'");
      peer.bind(binding, it->second);
      const auto& s = state.at("shares").at(binding.shared_id);
      ShareState& share = peer.shares_.at(binding.shared_id);
      share.version = s.at("version").get<std::uint64_t>();
      if (!s.at("pending").is_null()) share.pending = table_from_json(s.at("pending"));
      share.pending_base = s.at("pending_base").get<std::uint64_t>();
      if (!s.at("awaiting").is_null()) share.awaiting = s.at("awaiting").get<std::uint64_t>();
      share.needs_repropose = s.at("needs_repropose").get<bool>();
      share.hops = s.at("hops").get<std::uint32_t>();
    }
    return peer;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("peer state: ") + e.what());
  }
}

}  // namespace medsync
