#pragma once

// Deterministic world driver.
//
// Each tick runs, in this order:
//   1. deliver due messages, recipients in lexicographic principal order,
//      each inbox FIFO;
//   2. execute the script actions scheduled for the tick, in file order;
//   3. collect peer outboxes: transactions to the mempool, messages in flight;
//   4. produce `blocks_per_tick` blocks (empty ones are heartbeats);
//   5. send notifications and update receipts as messages.
// Messages sent during tick t are delivered at t + network_delay_ticks. The
// loop uses no randomness; `seed` is carried for scenario generators.

#include "medsync/contract.hpp"
#include "medsync/ledger.hpp"
#include "medsync/peer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace medsync {

struct SimConfig {
  Tick max_ticks = 100;
  std::uint64_t seed = 0;
  Tick network_delay_ticks = 1;
  std::uint32_t blocks_per_tick = 1;
  std::uint32_t max_cascade_hops = 16;
  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct EditAction {
  std::string table;
  Edit edit;
};
struct ProposeAction {
  std::string shared_id;
};
struct GrantAction {
  std::string shared_id;
  AttributeName attr;
  std::set<Principal> principals;
};
using Action = std::variant<EditAction, ProposeAction, GrantAction>;

struct ScheduledAction {
  Tick tick = 0;
  Principal principal;
  Action action;
};

struct PeerSetup {
  Principal principal;
  std::vector<Table> tables;
  std::vector<LensSpec> lenses;
  std::vector<ShareBinding> bindings;
};

struct Deployment {
  Principal deployer;
  std::string shared_id;
  std::set<Principal> peers;
  std::map<AttributeName, std::set<Principal>> perm;
  Principal authority;
};

struct Scenario {
  std::string name;
  SimConfig config;
  std::vector<PeerSetup> peers;  // sorted by principal
  std::vector<Deployment> deployments;
  std::vector<ScheduledAction> script;
};

// Errors: ParseError, ValidationError (message starts with the location).
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);

nlohmann::json action_to_json(const ScheduledAction& action);
ScheduledAction action_from_json(const nlohmann::json& doc);

struct TraceEvent {
  Tick tick = 0;
  std::uint64_t seq = 0;
  std::string actor;
  std::string kind;
  nlohmann::json detail;  // object
};

nlohmann::json trace_event_to_json(const TraceEvent& event);
TraceEvent trace_event_from_json(const nlohmann::json& doc);
// One single-line JSON record per event.
std::string trace_to_jsonl(const std::vector<TraceEvent>& trace);

struct InFlight {
  Tick deliver_at = 0;
  std::uint64_t seq = 0;
  Message msg;
};

class World {
 public:
  // Builds every peer, derives the initial shared copies and submits the
  // deployments. Errors: ValidationError.
  explicit World(const Scenario& scenario);

  // Runs the next tick; returns quiescent().
  bool step();
  // No messages in flight, empty mempool, no pending proposals, no script left.
  bool quiescent() const;

  // Number of ticks executed so far; the last executed tick is ticks_run() - 1.
  Tick ticks_run() const noexcept { return next_tick_; }
  const std::string& name() const noexcept { return name_; }
  const SimConfig& config() const noexcept { return config_; }
  const std::map<Principal, PeerNode>& peers() const noexcept { return peers_; }
  const PeerNode& peer(const Principal& p) const;
  PeerNode& mutable_peer(const Principal& p);
  const Chain& chain() const noexcept { return chain_; }
  const ContractState& contract() const noexcept { return contract_; }
  const std::vector<TraceEvent>& trace() const noexcept { return trace_; }
  const std::vector<InFlight>& in_flight() const noexcept { return in_flight_; }
  // Number of peer/driver errors recorded as "error" trace events.
  std::uint64_t error_count() const noexcept { return errors_; }

  std::string diagnostics() const;

  friend void dump(const World&, const std::filesystem::path&);
  friend World load_dump(const std::filesystem::path&);

 private:
  World() = default;

  void record(Tick tick, std::string actor, std::string kind, nlohmann::json detail);
  void drain(Tick tick, PeerNode& peer);
  void send(Tick tick, Message msg, Tick delay);
  void deliver(Tick tick, PeerNode& peer, const InFlight& item);
  void perform(Tick tick, const ScheduledAction& action);
  void fail(Tick tick, const std::string& actor, const std::string& what);

  std::string name_;
  SimConfig config_;
  std::map<Principal, PeerNode> peers_;
  Chain chain_;
  ContractState contract_;
  std::vector<InFlight> in_flight_;
  std::vector<ScheduledAction> script_;  // not yet executed
  std::vector<TraceEvent> trace_;
  Tick next_tick_ = 0;
  std::uint64_t msg_seq_ = 0;
  std::uint64_t errors_ = 0;
};

// Runs to quiescence. Errors: MaxTicksExceeded (with pending-message diagnostics).
World run(const Scenario& scenario);

struct ConvergenceCheck {
  std::string shared_id;
  std::string check;
  bool passed = false;
  std::string detail;
};

struct ConvergenceReport {
  std::vector<ConvergenceCheck> checks;
  bool passed() const;
  std::string to_string() const;
};

// Per shared table: both copies equal, each copy matches the ledger digest and
// version, each Source side's copy equals get(lens, source). Errors: NotQuiescent.
ConvergenceReport verify_convergence(const World& world);

// True iff replaying the chain reproduces the live contract state bit-exactly.
bool audit_matches(const World& world);

// Writes world.json, chain.json, contract.json, trace.jsonl and
// peers/<principal>/{peer.json,tables/<id>.json,shared/<id>.json}.
// Errors: IoError.
void dump(const World& world, const std::filesystem::path& dir);
// Errors: IoError, ParseError, ChainCorrupt.
World load_dump(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace medsync
