#include "medsync/sim.hpp"

#include "medsync/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace medsync {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr const char* kLedger = "ledger";

std::string canonical(const nlohmann::json& j) { return j.dump() + "\n"; }

nlohmann::json config_to_json(const SimConfig& c) {
  return {{"max_ticks", c.max_ticks},
          {"seed", c.seed},
          {"network_delay_ticks", c.network_delay_ticks},
          {"blocks_per_tick", c.blocks_per_tick},
          {"max_cascade_hops", c.max_cascade_hops}};
}

SimConfig config_from_dump(const nlohmann::json& j) {
  SimConfig c;
  c.max_ticks = j.at("max_ticks").get<Tick>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.network_delay_ticks = j.at("network_delay_ticks").get<Tick>();
  c.blocks_per_tick = j.at("blocks_per_tick").get<std::uint32_t>();
  c.max_cascade_hops = j.at("max_cascade_hops").get<std::uint32_t>();
  return c;
}

std::string tx_kind(const Transaction& tx) {
  return std::visit(overloaded{[](const DeployTx&) { return "deploy"; }, [](const UpdateTx&) { return "update"; },
                               [](const PermChangeTx&) { return "perm_change"; }},
                    tx.body);
}

nlohmann::json message_summary(const Message& m) {
  nlohmann::json j{{"from", message_from(m)}, {"to", message_to(m)}};
  std::visit(overloaded{
                 [&](const Notification& n) {
                   j["shared_id"] = n.shared_id;
                   j["version"] = n.new_version;
                 },
                 [&](const DataRequest& r) {
                   j["shared_id"] = r.shared_id;
                   j["version"] = r.requested_version;
                 },
                 [&](const DataResponse& r) {
                   j["shared_id"] = r.shared_id;
                   j["version"] = r.version;
                 },
                 [&](const Receipt& r) {
                   j["shared_id"] = r.tx.shared_id();
                   j["seq"] = r.tx.submit_seq;
                 },
             },
             m);
  return j;
}

}  // namespace

nlohmann::json trace_event_to_json(const TraceEvent& e) {
  return {{"tick", e.tick}, {"seq", e.seq}, {"actor", e.actor}, {"kind", e.kind}, {"detail", e.detail}};
}

TraceEvent trace_event_from_json(const nlohmann::json& doc) {
  try {
    return TraceEvent{doc.at("tick").get<Tick>(), doc.at("seq").get<std::uint64_t>(),
                      doc.at("actor").get<std::string>(), doc.at("kind").get<std::string>(), doc.at("detail")};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("trace event: ") + e.what());
  }
}

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace) {
  std::string out;
  for (const auto& e : trace) out += canonical(trace_event_to_json(e));
  return out;
}

World::World(const Scenario& scenario) : name_(scenario.name), config_(scenario.config), script_(scenario.script) {
  for (const auto& setup : scenario.peers) {
    PeerNode node(setup.principal, config_.max_cascade_hops);
    const std::string where = "peers." + setup.principal;
    try {
      for (const auto& t : setup.tables) node.add_table(t);
      for (const auto& l : setup.lenses) node.add_lens(l);
    } catch (const Error& e) {
      throw Error(Errc::ValidationError, where + ": " + e.what());
    }
    peers_.emplace(setup.principal, std::move(node));
  }

  for (const auto& d : scenario.deployments) {
    const std::string where = "deployments." + d.shared_id;
    std::vector<std::pair<const PeerSetup*, const ShareBinding*>> sides;
    for (const auto& setup : scenario.peers) {
      for (const auto& b : setup.bindings) {
        if (b.shared_id == d.shared_id) sides.emplace_back(&setup, &b);
      }
    }
    if (sides.size() != 2) throw Error(Errc::ValidationError, where + ": needs a binding on exactly two peers");

    std::optional<Table> initial;
    for (const auto& [setup, b] : sides) {
      if (b->role() != ShareRole::Source) continue;
      const PeerNode& node = peers_.at(setup->principal);
      const auto lens = node.lenses().find(b->lens_id);
      if (lens == node.lenses().end()) {
        throw Error(Errc::ValidationError, where + ": unknown lens '" + b->lens_id + "' on " + setup->principal);
      }
      Table view;
      try {
        view = get(lens->second, node.tables().at(lens->second.spec().source_table_id)).with_id(d.shared_id);
      } catch (const Error& e) {
        throw Error(Errc::ValidationError, where + ": " + setup->principal + ": " + e.what());
      }
      if (initial && *initial != view) {
        throw Error(Errc::ValidationError, where + ": the two sides derive different initial views");
      }
      initial = std::move(view);
    }
    if (!initial) throw Error(Errc::ValidationError, where + ": at least one side must derive the table through a lens");

    for (const auto& [setup, b] : sides) {
      try {
        peers_.at(setup->principal).bind(*b, *initial);
      } catch (const Error& e) {
        throw Error(Errc::ValidationError, where + ": " + e.what());
      }
    }

    SharedTableMetadata meta;
    meta.shared_id = d.shared_id;
    meta.view_schema = initial->schema();
    meta.peers = d.peers;
    meta.perm = d.perm;
    meta.authority = d.authority;
    meta.content_digest = digest(*initial);
    const Transaction& tx = chain_.submit(DeployTx{std::move(meta), d.deployer});
    record(0, d.deployer, "submit", {{"seq", tx.submit_seq}, {"tx", "deploy"}, {"shared_id", d.shared_id}});
  }
  for (const auto& setup : scenario.peers) {
    for (const auto& b : setup.bindings) {
      if (peers_.at(setup.principal).bindings().contains(b.shared_id)) continue;
      const bool deployed = std::any_of(scenario.deployments.begin(), scenario.deployments.end(),
                                        [&](const Deployment& d) { return d.shared_id == b.shared_id; });
      if (!deployed) {
        throw Error(Errc::ValidationError,
                    "peers." + setup.principal + ".bindings." + b.shared_id + ": no deployment");
      }
    }
  }
}

const PeerNode& World::peer(const Principal& p) const {
  const auto it = peers_.find(p);
  if (it == peers_.end()) throw Error(Errc::NotFound, "no peer '" + p + "'");
  return it->second;
}

PeerNode& World::mutable_peer(const Principal& p) {
  const auto it = peers_.find(p);
  if (it == peers_.end()) throw Error(Errc::NotFound, "no peer '" + p + "'");
  return it->second;
}

void World::record(Tick tick, std::string actor, std::string kind, nlohmann::json detail) {
  trace_.push_back(TraceEvent{tick, trace_.size(), std::move(actor), std::move(kind), std::move(detail)});
}

void World::drain(Tick tick, PeerNode& peer) {
  for (auto& e : peer.take_events()) record(tick, peer.principal(), std::move(e.kind), std::move(e.detail));
}

void World::send(Tick tick, Message msg, Tick delay) {
  in_flight_.push_back(InFlight{tick + delay, msg_seq_++, std::move(msg)});
}

void World::fail(Tick tick, const std::string& actor, const std::string& what) {
  ++errors_;
  record(tick, actor, "error", {{"message", what}});
}

void World::deliver(Tick tick, PeerNode& peer, const InFlight& item) {
  std::visit(overloaded{
                 [&](const Notification& n) { peer.on_notification(n); },
                 [&](const DataRequest& r) {
                   try {
                     DataResponse resp = peer.on_data_request(r);
                     record(tick, peer.principal(), "data_resp",
                            {{"shared_id", resp.shared_id}, {"version", resp.version}, {"from", resp.from},
                             {"to", resp.to}, {"digest", digest(resp.table).hex()}});
                     send(tick, std::move(resp), config_.network_delay_ticks);
                   } catch (const Error& e) {
                     if (e.code() == Errc::NotReady) {
                       record(tick, peer.principal(), "not_ready", message_summary(item.msg));
                       send(tick, item.msg, 1);
                     } else if (e.code() == Errc::Refused) {
                       record(tick, peer.principal(), "refused", message_summary(item.msg));
                     } else {
                       throw;
                     }
                   }
                 },
                 [&](const DataResponse& r) {
                   const SharedTableMetadata* meta = contract_.find(r.shared_id);
                   if (meta == nullptr) throw Error(Errc::UnknownShared, "'" + r.shared_id + "' is not deployed");
                   peer.on_data_response(r, *meta);
                 },
                 [&](const Receipt& r) { peer.on_receipt(r); },
             },
             item.msg);
}

void World::perform(Tick tick, const ScheduledAction& action) {
  PeerNode& node = mutable_peer(action.principal);
  std::visit(overloaded{
                 [&](const EditAction& e) { node.local_edit(e.table, e.edit); },
                 [&](const ProposeAction& p) { node.regenerate_and_propose(p.shared_id, 0); },
                 [&](const GrantAction& g) { node.request_permission_change(g.shared_id, g.attr, g.principals); },
             },
             action.action);
  (void)tick;
}

bool World::step() {
  const Tick t = next_tick_;

  // 1. deliver
  std::vector<InFlight> due;
  std::vector<InFlight> later;
  for (auto& item : in_flight_) (item.deliver_at <= t ? due : later).push_back(std::move(item));
  in_flight_ = std::move(later);
  std::sort(due.begin(), due.end(), [](const InFlight& a, const InFlight& b) {
    return std::tie(a.deliver_at, a.seq) < std::tie(b.deliver_at, b.seq);
  });
  std::map<Principal, std::vector<const InFlight*>> inboxes;
  for (const auto& item : due) inboxes[message_to(item.msg)].push_back(&item);
  for (const auto& [to, items] : inboxes) {
    const auto it = peers_.find(to);
    for (const InFlight* item : items) {
      if (it == peers_.end()) {
        fail(t, kLedger, "message for unknown principal '" + to + "'");
        continue;
      }
      try {
        deliver(t, it->second, *item);
      } catch (const std::exception& e) {
        drain(t, it->second);
        fail(t, to, std::string(message_kind(item->msg)) + ": " + e.what());
        continue;
      }
      drain(t, it->second);
    }
  }

  // 2. script
  while (!script_.empty() && script_.front().tick <= t) {
    const ScheduledAction action = script_.front();
    script_.erase(script_.begin());
    const auto it = peers_.find(action.principal);
    if (it == peers_.end()) {
      fail(t, action.principal, "unknown principal");
      continue;
    }
    try {
      perform(t, action);
    } catch (const std::exception& e) {
      drain(t, it->second);
      fail(t, action.principal, e.what());
      continue;
    }
    drain(t, it->second);
  }

  // 3. collect
  for (auto& [p, node] : peers_) {
    for (auto& body : node.take_tx_outbox()) {
      const Transaction& tx = chain_.submit(std::move(body));
      record(t, p, "submit", {{"seq", tx.submit_seq}, {"tx", tx_kind(tx)}, {"shared_id", tx.shared_id()}});
    }
    for (auto& msg : node.take_outbox()) send(t, std::move(msg), config_.network_delay_ticks);
    drain(t, node);
  }

  // 4. blocks, 5. notifications and receipts
  for (std::uint32_t i = 0; i < config_.blocks_per_tick; ++i) {
    BlockOutput out = produce_block(chain_, contract_, t);
    const Block& block = chain_.blocks().back();
    record(t, kLedger, "block",
           {{"index", block.index}, {"txs", block.txs.size()}, {"digest", block.block_digest.hex()}});
    for (const auto& r : out.receipts) {
      record(t, kLedger, "verdict",
             {{"seq", r.tx.submit_seq},
              {"tx", tx_kind(r.tx)},
              {"shared_id", r.tx.shared_id()},
              {"submitter", r.tx.submitter()},
              {"verdict", verdict_to_json(r.verdict)}});
    }
    for (auto& note : out.notifications) {
      record(t, kLedger, "notify",
             {{"shared_id", note.shared_id}, {"to", note.to}, {"version", note.new_version}, {"hops", note.hops}});
      send(t, std::move(note), config_.network_delay_ticks);
    }
    for (auto& r : out.receipts) {
      if (std::holds_alternative<UpdateTx>(r.tx.body)) send(t, std::move(r), config_.network_delay_ticks);
    }
  }

  ++next_tick_;
  return quiescent();
}

bool World::quiescent() const {
  if (!in_flight_.empty() || !chain_.mempool().empty() || !script_.empty()) return false;
  return std::none_of(peers_.begin(), peers_.end(),
                      [](const auto& kv) { return kv.second.has_pending() || kv.second.has_output(); });
}

std::string World::diagnostics() const {
  std::ostringstream out;
  out << "after " << next_tick_ << " ticks: " << in_flight_.size() << " message(s) in flight, "
      << chain_.mempool().size() << " tx(s) in mempool, " << script_.size() << " scripted action(s) left\n";
  for (const auto& item : in_flight_) {
    out << "  in flight @" << item.deliver_at << ": " << message_kind(item.msg) << " "
        << message_summary(item.msg).dump() << "\n";
  }
  for (const auto& [p, node] : peers_) {
    for (const auto& [sid, share] : node.shares()) {
      if (!share.pending && !share.awaiting && !share.needs_repropose) continue;
      out << "  " << p << "/" << sid << ": v" << share.version;
      if (share.pending) out << " pending on v" << share.pending_base;
      if (share.awaiting) out << " awaiting v" << *share.awaiting;
      if (share.needs_repropose) out << " needs re-propose";
      out << "\n";
    }
  }
  return out.str();
}

World run(const Scenario& scenario) {
  World world(scenario);
  while (!world.quiescent()) {
    if (world.ticks_run() >= world.config().max_ticks) {
      throw Error(Errc::MaxTicksExceeded, "no quiescence within " + std::to_string(world.config().max_ticks) +
                                              " ticks; " + world.diagnostics());
    }
    world.step();
  }
  return world;
}

bool ConvergenceReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ConvergenceCheck& c) { return c.passed; });
}

std::string ConvergenceReport::to_string() const {
  std::string out;
  for (const auto& c : checks) {
    out += (c.passed ? "PASS " : "FAIL ") + c.shared_id + " " + c.check;
    if (!c.detail.empty()) out += " (" + c.detail + ")";
    out += "\n";
  }
  return out;
}

ConvergenceReport verify_convergence(const World& world) {
  if (!world.quiescent()) throw Error(Errc::NotQuiescent, world.diagnostics());
  std::map<std::string, std::vector<const PeerNode*>> holders;
  for (const auto& [p, node] : world.peers()) {
    for (const auto& [sid, b] : node.bindings()) holders[sid].push_back(&node);
  }
  ConvergenceReport report;
  for (const auto& [sid, nodes] : holders) {
    bool equal = true;
    for (const PeerNode* n : nodes) equal = equal && n->read_shared(sid) == nodes.front()->read_shared(sid);
    report.checks.push_back({sid, "copies_equal", equal && nodes.size() == 2,
                             nodes.size() == 2 ? "" : std::to_string(nodes.size()) + " holder(s)"});

    const SharedTableMetadata* meta = world.contract().find(sid);
    for (const PeerNode* n : nodes) {
      const ShareState& share = n->shares().at(sid);
      ConvergenceCheck ledger{sid, "digest_matches_ledger:" + n->principal(), false, ""};
      if (meta == nullptr) {
        ledger.detail = "not deployed";
      } else {
        ledger.passed = digest(share.copy) == meta->content_digest && share.version == meta->version;
        if (!ledger.passed) {
          ledger.detail = "copy v" + std::to_string(share.version) + ", ledger v" + std::to_string(meta->version);
        }
      }
      report.checks.push_back(std::move(ledger));

      if (n->bindings().at(sid).role() != ShareRole::Source) continue;
      ConvergenceCheck source{sid, "copy_matches_source:" + n->principal(), false, ""};
      try {
        source.passed = n->derived_view(sid) == share.copy;
        if (!source.passed) {
          source.detail = "changed: " + nlohmann::json(changed_attributes(share.copy, n->derived_view(sid))).dump();
        }
      } catch (const Error& e) {
        source.detail = e.what();
      }
      report.checks.push_back(std::move(source));
    }
  }
  return report;
}

bool audit_matches(const World& world) {
  try {
    return replay(world.chain()) == world.contract();
  } catch (const Error&) {
    return false;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
  out.close();
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

void dump(const World& world, const std::filesystem::path& dir) {
  nlohmann::json in_flight = nlohmann::json::array();
  for (const auto& item : world.in_flight_) {
    in_flight.push_back({{"deliver_at", item.deliver_at}, {"seq", item.seq}, {"msg", message_to_json(item.msg)}});
  }
  nlohmann::json mempool = nlohmann::json::array();
  for (const auto& tx : world.chain_.mempool()) mempool.push_back(transaction_to_json(tx));
  nlohmann::json script = nlohmann::json::array();
  for (const auto& a : world.script_) script.push_back(action_to_json(a));
  nlohmann::json peers = nlohmann::json::object();
  for (const auto& [p, node] : world.peers_) {
    nlohmann::json tables = nlohmann::json::array();
    for (const auto& [id, t] : node.tables()) tables.push_back(id);
    peers[p] = {{"tables", std::move(tables)}};
  }
  const nlohmann::json doc{{"name", world.name_},
                           {"config", config_to_json(world.config_)},
                           {"clock", world.next_tick_},
                           {"in_flight", std::move(in_flight)},
                           {"mempool", std::move(mempool)},
                           {"next_seq", world.chain_.next_seq()},
                           {"script", std::move(script)},
                           {"msg_seq", world.msg_seq_},
                           {"errors", world.errors_},
                           {"peers", std::move(peers)}};

  write_file(dir / "world.json", canonical(doc));
  write_file(dir / "chain.json", chain_dump_bytes(world.chain_));
  write_file(dir / "contract.json", canonical(contract_to_json(world.contract_)));
  write_file(dir / "trace.jsonl", trace_to_jsonl(world.trace_));
  for (const auto& [p, node] : world.peers_) {
    const auto base = dir / "peers" / p;
    write_file(base / "peer.json", canonical(node.state_to_json()));
    for (const auto& [id, t] : node.tables()) write_file(base / "tables" / (id + ".json"), canonical(table_to_json(t)));
    for (const auto& [sid, share] : node.shares()) {
      write_file(base / "shared" / (sid + ".json"), canonical(table_to_json(share.copy)));
    }
  }
}

World load_dump(const std::filesystem::path& dir) {
  auto parse = [](const std::filesystem::path& path) {
    try {
      return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ": " + e.what());
    }
  };

  World w;
  const nlohmann::json doc = parse(dir / "world.json");
  const Chain chain = chain_from_dump_bytes(read_file(dir / "chain.json"));
  try {
    w.name_ = doc.at("name").get<std::string>();
    w.config_ = config_from_dump(doc.at("config"));
    w.next_tick_ = doc.at("clock").get<Tick>();
    w.msg_seq_ = doc.at("msg_seq").get<std::uint64_t>();
    w.errors_ = doc.at("errors").get<std::uint64_t>();
    for (const auto& item : doc.at("in_flight")) {
      w.in_flight_.push_back(InFlight{item.at("deliver_at").get<Tick>(), item.at("seq").get<std::uint64_t>(),
                                      message_from_json(item.at("msg"))});
    }
    std::vector<Transaction> mempool;
    for (const auto& tx : doc.at("mempool")) mempool.push_back(transaction_from_json(tx));
    w.chain_ = Chain::restore(chain.blocks(), std::move(mempool), doc.at("next_seq").get<std::uint64_t>());
    for (const auto& a : doc.at("script")) w.script_.push_back(action_from_json(a));

    for (const auto& [p, info] : doc.at("peers").items()) {
      const auto base = dir / "peers" / p;
      const nlohmann::json state = parse(base / "peer.json");
      std::vector<Table> tables;
      for (const auto& id : info.at("tables")) {
        tables.push_back(table_from_json(parse(base / "tables" / (id.get<std::string>() + ".json"))));
      }
      std::map<std::string, Table> copies;
      for (const auto& b : state.at("bindings")) {
        const auto sid = b.at("shared_id").get<std::string>();
        copies.emplace(sid, table_from_json(parse(base / "shared" / (sid + ".json"))));
      }
      w.peers_.emplace(p, PeerNode::restore(state, std::move(tables), std::move(copies), w.config_.max_cascade_hops));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, (dir / "world.json").string() + ": " + e.what());
  }
  w.contract_ = contract_from_json(parse(dir / "contract.json"));

  std::istringstream lines(read_file(dir / "trace.jsonl"));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      w.trace_.push_back(trace_event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, (dir / "trace.jsonl").string() + ": " + e.what());
    }
  }
  return w;
}

}  // namespace medsync
