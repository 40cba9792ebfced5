#pragma once

// Simulated single-producer ledger driving the permission contract.
//
// Blocks are hash-chained: block_digest = SHA-256 of the canonical JSON of
// {index, prev_digest, tick, txs}. Block 0 is an empty genesis block whose
// predecessor is the all-zero digest. Within one block at most one UpdateTx per
// shared table is accepted; later ones are rejected with BlockedBySerialization.

#include "medsync/contract.hpp"
#include "medsync/digest.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace medsync {

using TxBody = std::variant<DeployTx, UpdateTx, PermChangeTx>;

struct Transaction {
  std::uint64_t submit_seq = 0;
  TxBody body;

  const Principal& submitter() const;
  const std::string& shared_id() const;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct Receipt {
  Transaction tx;
  Verdict verdict;
  friend bool operator==(const Receipt&, const Receipt&) = default;
};

struct BlockEntry {
  Transaction tx;
  Verdict verdict;
  friend bool operator==(const BlockEntry&, const BlockEntry&) = default;
};

struct Block {
  std::uint64_t index = 0;
  Tick tick = 0;
  std::vector<BlockEntry> txs;
  Digest prev_digest;
  Digest block_digest;
  friend bool operator==(const Block&, const Block&) = default;
};

Digest compute_block_digest(const Block& block);

struct BlockOutput {
  std::vector<Notification> notifications;
  std::vector<Receipt> receipts;  // one per transaction, in submit order
};

class Chain {
 public:
  Chain();  // holds only the genesis block

  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  const std::vector<Transaction>& mempool() const noexcept { return mempool_; }
  std::uint64_t next_seq() const noexcept { return next_seq_; }

  // Appends to the mempool with the next arrival sequence number.
  const Transaction& submit(TxBody body);

  // Rebuilds a chain from stored parts; verifies linkage (ChainCorrupt).
  static Chain restore(std::vector<Block> blocks, std::vector<Transaction> mempool, std::uint64_t next_seq);

 private:
  friend BlockOutput produce_block(Chain&, ContractState&, Tick);

  std::vector<Block> blocks_;
  std::vector<Transaction> mempool_;
  std::uint64_t next_seq_ = 0;
};

// Drains the mempool in submit order into a new block, evaluating each tx
// against the evolving contract state.
BlockOutput produce_block(Chain& chain, ContractState& contract, Tick tick);

// Verifies digests and linkage, then re-executes every transaction from an
// empty contract, requiring each recomputed verdict to equal the recorded one.
// Errors: ChainCorrupt.
ContractState replay(const Chain& chain);
void verify_chain(const std::vector<Block>& blocks);

struct HistoryEntry {
  Tick tick = 0;
  Transaction tx;
  Verdict verdict;
};
std::vector<HistoryEntry> history(const Chain& chain, const std::string& shared_id);

nlohmann::json transaction_to_json(const Transaction& tx);
Transaction transaction_from_json(const nlohmann::json& doc);
nlohmann::json block_to_json(const Block& block);
Block block_from_json(const nlohmann::json& doc);
// Chain dump: a JSON list of blocks (the mempool is not part of it).
nlohmann::json chain_to_json(const Chain& chain);
std::string chain_dump_bytes(const Chain& chain);
// Parses a chain dump. Any deviation from the canonical bytes, any parse
// failure and any digest or linkage mismatch raises ChainCorrupt.
Chain chain_from_dump_bytes(std::string_view bytes);

}  // namespace medsync
