#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scauth/contract.hpp"
#include "scauth/crypto.hpp"

namespace scauth {

enum class TxStatus : uint8_t { Success = 0, Failed = 1 };

struct Transaction {
    Address from;
    CallDescriptor call;
    uint64_t nonce_seq{0};
    uint64_t gas_used{0};            // set during block application
    TxStatus status{TxStatus::Success};  // set during block application

    bool operator==(const Transaction&) const = default;

    // Identity bytes hashed into the block: from || nonce_seq || call.
    // Application results (gas, status) are derived data and stay out.
    Bytes canonical() const;
    static std::optional<Transaction> parse(ByteView data);
};

struct Block {
    uint64_t index{0};
    Digest32 prev_hash;
    int64_t timestamp{0};
    uint64_t nonce{0};
    std::vector<Transaction> tx_list;
    Digest32 block_hash;

    bool operator==(const Block&) const = default;

    Bytes content_bytes() const;  // everything under the hash
    Digest32 compute_hash() const;
    Bytes wire() const;  // content_bytes || block_hash, for persistence
    static std::optional<Block> parse_wire(ByteView data);
};

struct ChainConfig {
    uint32_t difficulty_bits{4};  // leading zero bits required of block_hash
    uint64_t gas_base{21000};
    uint64_t gas_per_write{20000};
    uint32_t injected_latency_ms{0};
};

struct Chain {
    std::vector<Block> blocks;  // blocks[0] is genesis
    ChainConfig config;
};

Block genesis();
bool meets_target(const Digest32& h, uint32_t difficulty_bits);

// Deterministic nonce scan from 0; transactions keep submission order.
Block mine_block(const Chain& chain, std::vector<Transaction> pending, int64_t now);

bool validate_chain(const Chain& chain);

// Per-block verdicts. hash_ok taints forward: a block's hash only counts as
// verified when its own recomputed hash matches AND the parent's did, so a
// mutation in block i fails hash_ok for every block from i onward.
struct BlockCheck {
    bool link_ok{true};
    bool index_ok{true};
    bool timestamp_ok{true};
    bool hash_ok{true};
    bool target_ok{true};
    bool ok() const { return link_ok && index_ok && timestamp_ok && hash_ok && target_ok; }
};
std::vector<BlockCheck> audit_chain(const Chain& chain);

struct Receipt {
    uint64_t block_index{0};
    uint32_t tx_index{0};
    uint64_t gas_used{0};
    TxStatus status{TxStatus::Success};
    std::optional<RevertReason> revert_reason;
    std::vector<EventLogEntry> events;  // emitted by this transaction
};

struct BadNonce : std::runtime_error {
    uint64_t expected;
    uint64_t got;
    BadNonce(uint64_t e, uint64_t g)
        : std::runtime_error("BadNonce: expected " + std::to_string(e) + ", got " +
                             std::to_string(g)),
          expected(e),
          got(g) {}
};

struct ChainLoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs one transaction against the contract, filling in gas_used and status.
// A revert discards contract effects, charges gas_base only, and marks the
// transaction Failed; it never throws out of this function.
struct AppliedTx {
    uint64_t gas_used{0};
    TxStatus status{TxStatus::Success};
    std::optional<RevertReason> revert_reason;
    std::vector<EventLogEntry> events;
};
AppliedTx apply_transaction(SmartCoAuthContract& contract, Transaction& tx,
                            const BlockContext& ctx, const ChainConfig& cfg);

// Single-node chain with auto-mining: every submission mines one block and
// applies it immediately. One logical writer; reads see only applied blocks.
class Ledger {
public:
    using Clock = std::function<int64_t()>;

    Ledger(ChainConfig cfg, ContractConfig contract_cfg, Clock clock = {});

    // Throws BadNonce. Contract reverts do not throw: the block still
    // includes the transaction and the receipt carries the failure.
    Receipt submit_transaction(Transaction tx);

    // Convenience wrapper that fills in the sender's next nonce.
    Receipt submit_call(const Address& from, CallDescriptor call);

    uint64_t expected_nonce(const Address& from) const;

    // Contract reads. Subject to injected latency like submissions, since
    // they model round trips to a remote chain node.
    std::optional<TokenRecord> get_user_query_token(const Address& user) const;
    std::vector<EventLogEntry> read_events(uint64_t from_log_index,
                                           const std::optional<Address>& filter = {}) const;

    Chain snapshot_chain() const;
    Bytes contract_state_snapshot() const;
    size_t height() const;
    size_t event_count() const;
    const ChainConfig& config() const { return cfg_; }
    const Address& contract_owner() const { return contract_cfg_.owner; }

    void save_chain(const std::string& path) const;

    // Replaces this ledger's state by replaying a persisted chain from
    // genesis. Throws ChainLoadError when the file is unreadable, fails
    // validation, or contains a genesis differing from the fixed one.
    void load_from_file(const std::string& path);

private:
    void sleep_injected(int64_t start_ms) const;

    ChainConfig cfg_;
    ContractConfig contract_cfg_;
    Clock clock_;
    mutable std::mutex mu_;
    Chain chain_;
    SmartCoAuthContract contract_;
    std::map<Address, uint64_t> next_nonce_;
};

}  // namespace scauth
