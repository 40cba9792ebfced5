#include "medsync/ledger.hpp"

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

// Evaluates one transaction against `contract`, mutating it on Accept.
// `updated` holds the shared ids with an accepted update in the current block.
Verdict evaluate(const Transaction& tx, ContractState& contract, Tick tick, std::set<std::string>& updated,
                 std::vector<Notification>& notes) {
  return std::visit(
      overloaded{
          [&](const DeployTx& d) {
            auto [next, verdict] = deploy(contract, d, tick);
            contract = std::move(next);
            return verdict;
          },
          [&](const UpdateTx& u) {
            if (updated.contains(u.shared_id)) {
              return Verdict::reject(RejectReason::BlockedBySerialization,
                                     "'" + u.shared_id + "' already updated in this block");
            }
            Verdict verdict = validate_update(contract, u);
            if (verdict.accepted) {
              auto [next, emitted] = apply_update(contract, u, tick);
              contract = std::move(next);
              notes.insert(notes.end(), emitted.begin(), emitted.end());
              updated.insert(u.shared_id);
            }
            return verdict;
          },
          [&](const PermChangeTx& p) {
            auto [next, verdict] = change_permission(contract, p, tick);
            contract = std::move(next);
            return verdict;
          },
      },
      tx.body);
}

nlohmann::json block_body_json(const Block& block) {
  nlohmann::json txs = nlohmann::json::array();
  for (const auto& entry : block.txs) {
    txs.push_back({{"tx", transaction_to_json(entry.tx)}, {"verdict", verdict_to_json(entry.verdict)}});
  }
  return {{"index", block.index}, {"tick", block.tick}, {"prev_digest", block.prev_digest.hex()},
          {"txs", std::move(txs)}};
}

}  // namespace

const Principal& Transaction::submitter() const {
  return std::visit(overloaded{[](const DeployTx& d) -> const Principal& { return d.deployer; },
                               [](const UpdateTx& u) -> const Principal& { return u.requester; },
                               [](const PermChangeTx& p) -> const Principal& { return p.requester; }},
                    body);
}

const std::string& Transaction::shared_id() const {
  return std::visit(overloaded{[](const DeployTx& d) -> const std::string& { return d.meta.shared_id; },
                               [](const UpdateTx& u) -> const std::string& { return u.shared_id; },
                               [](const PermChangeTx& p) -> const std::string& { return p.shared_id; }},
                    body);
}

Digest compute_block_digest(const Block& block) { return sha256(block_body_json(block).dump()); }

Chain::Chain() {
  Block genesis;
  genesis.prev_digest = Digest::zero();
  genesis.block_digest = compute_block_digest(genesis);
  blocks_.push_back(std::move(genesis));
}

const Transaction& Chain::submit(TxBody body) {
  mempool_.push_back(Transaction{next_seq_++, std::move(body)});
  return mempool_.back();
}

Chain Chain::restore(std::vector<Block> blocks, std::vector<Transaction> mempool, std::uint64_t next_seq) {
  verify_chain(blocks);
  Chain chain;
  chain.blocks_ = std::move(blocks);
  chain.mempool_ = std::move(mempool);
  chain.next_seq_ = next_seq;
  return chain;
}

BlockOutput produce_block(Chain& chain, ContractState& contract, Tick tick) {
  BlockOutput out;
  Block block;
  block.index = chain.blocks_.size();
  block.tick = tick;
  block.prev_digest = chain.blocks_.back().block_digest;
  std::set<std::string> updated;
  for (auto& tx : chain.mempool_) {
    Verdict verdict = evaluate(tx, contract, tick, updated, out.notifications);
    out.receipts.push_back(Receipt{tx, verdict});
    block.txs.push_back(BlockEntry{std::move(tx), std::move(verdict)});
  }
  chain.mempool_.clear();
  block.block_digest = compute_block_digest(block);
  chain.blocks_.push_back(std::move(block));
  return out;
}

void verify_chain(const std::vector<Block>& blocks) {
  if (blocks.empty()) throw Error(Errc::ChainCorrupt, "chain has no genesis block");
  Digest prev = Digest::zero();
  std::uint64_t last_seq = 0;
  bool any_seq = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    const std::string where = "block " + std::to_string(i);
    if (b.index != i) throw Error(Errc::ChainCorrupt, where + ": index " + std::to_string(b.index));
    if (b.prev_digest != prev) throw Error(Errc::ChainCorrupt, where + ": broken linkage");
    if (compute_block_digest(b) != b.block_digest) throw Error(Errc::ChainCorrupt, where + ": digest mismatch");
    if (i > 0 && b.tick < blocks[i - 1].tick) throw Error(Errc::ChainCorrupt, where + ": tick goes backwards");
    for (const auto& entry : b.txs) {
      if (any_seq && entry.tx.submit_seq <= last_seq) {
        throw Error(Errc::ChainCorrupt, where + ": submit_seq out of order");
      }
      last_seq = entry.tx.submit_seq;
      any_seq = true;
    }
    prev = b.block_digest;
  }
}

ContractState replay(const Chain& chain) {
  verify_chain(chain.blocks());
  ContractState state;
  std::vector<Notification> ignored;
  for (const auto& block : chain.blocks()) {
    std::set<std::string> updated;
    for (const auto& entry : block.txs) {
      const Verdict recomputed = evaluate(entry.tx, state, block.tick, updated, ignored);
      if (recomputed != entry.verdict) {
        throw Error(Errc::ChainCorrupt, "block " + std::to_string(block.index) + ": tx " +
                                            std::to_string(entry.tx.submit_seq) + " verdict does not replay");
      }
    }
  }
  return state;
}

std::vector<HistoryEntry> history(const Chain& chain, const std::string& shared_id) {
  std::vector<HistoryEntry> out;
  for (const auto& block : chain.blocks()) {
    for (const auto& entry : block.txs) {
      if (entry.tx.shared_id() == shared_id) out.push_back(HistoryEntry{block.tick, entry.tx, entry.verdict});
    }
  }
  return out;
}

nlohmann::json transaction_to_json(const Transaction& tx) {
  nlohmann::json body = std::visit(
      overloaded{
          [](const DeployTx& d) -> nlohmann::json {
            return {{"kind", "deploy"}, {"deployer", d.deployer}, {"meta", metadata_to_json(d.meta)}};
          },
          [](const UpdateTx& u) -> nlohmann::json {
            return {{"kind", "update"},
                    {"shared_id", u.shared_id},
                    {"requester", u.requester},
                    {"changed_attrs", u.changed_attrs},
                    {"base_version", u.base_version},
                    {"new_digest", u.new_digest.hex()},
                    {"hops", u.hops}};
          },
          [](const PermChangeTx& p) -> nlohmann::json {
            return {{"kind", "perm_change"},
                    {"shared_id", p.shared_id},
                    {"requester", p.requester},
                    {"attr", p.attr},
                    {"new_principals", p.new_principals}};
          },
      },
      tx.body);
  body["seq"] = tx.submit_seq;
  return body;
}

Transaction transaction_from_json(const nlohmann::json& doc) {
  try {
    Transaction tx;
    tx.submit_seq = doc.at("seq").get<std::uint64_t>();
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "deploy") {
      tx.body = DeployTx{metadata_from_json(doc.at("meta")), doc.at("deployer").get<Principal>()};
    } else if (kind == "update") {
      tx.body = UpdateTx{doc.at("shared_id").get<std::string>(),
                         doc.at("requester").get<Principal>(),
                         doc.at("changed_attrs").get<AttrSet>(),
                         doc.at("base_version").get<std::uint64_t>(),
                         Digest::from_hex(doc.at("new_digest").get<std::string>()),
                         doc.at("hops").get<std::uint32_t>()};
    } else if (kind == "perm_change") {
      tx.body = PermChangeTx{doc.at("shared_id").get<std::string>(), doc.at("requester").get<Principal>(),
                             doc.at("attr").get<AttributeName>(),
                             doc.at("new_principals").get<std::set<Principal>>()};
    } else {
      throw Error(Errc::ParseError, "unknown transaction kind '" + kind + "'");
    }
    return tx;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("transaction: ") + e.what());
  }
}

nlohmann::json block_to_json(const Block& block) {
  nlohmann::json j = block_body_json(block);
  j["block_digest"] = block.block_digest.hex();
  return j;
}

Block block_from_json(const nlohmann::json& doc) {
  try {
    Block b;
    b.index = doc.at("index").get<std::uint64_t>();
    b.tick = doc.at("tick").get<Tick>();
    b.prev_digest = Digest::from_hex(doc.at("prev_digest").get<std::string>());
    b.block_digest = Digest::from_hex(doc.at("block_digest").get<std::string>());
    for (const auto& entry : doc.at("txs")) {
      b.txs.push_back(BlockEntry{transaction_from_json(entry.at("tx")), verdict_from_json(entry.at("verdict"))});
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("block: ") + e.what());
  }
}

nlohmann::json chain_to_json(const Chain& chain) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : chain.blocks()) blocks.push_back(block_to_json(b));
  return blocks;
}

std::string chain_dump_bytes(const Chain& chain) { return chain_to_json(chain).dump() + "\n"; }

Chain chain_from_dump_bytes(std::string_view bytes) {
  std::vector<Block> blocks;
  std::uint64_t next_seq = 0;
  try {
    const auto doc = nlohmann::json::parse(bytes);
    if (!doc.is_array()) throw Error(Errc::ChainCorrupt, "chain dump must be a JSON list");
    if (doc.dump() + "\n" != bytes) throw Error(Errc::ChainCorrupt, "chain dump is not in canonical form");
    for (const auto& b : doc) {
      blocks.push_back(block_from_json(b));
      if (block_to_json(blocks.back()) != b) {
        throw Error(Errc::ChainCorrupt, "block " + std::to_string(blocks.size() - 1) + " has unexpected fields");
      }
      for (const auto& e : blocks.back().txs) next_seq = std::max(next_seq, e.tx.submit_seq + 1);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ChainCorrupt, std::string("unreadable chain dump: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ChainCorrupt) throw;
    throw Error(Errc::ChainCorrupt, e.what());
  }
  return Chain::restore(std::move(blocks), {}, next_seq);
}

}  // namespace medsync
