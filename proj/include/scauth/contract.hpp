#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scauth/crypto.hpp"

namespace scauth {

// A contract invocation: function name plus raw parameters in declaration
// order. The serialization is length-prefixed throughout so it stays
// injective: equal bytes imply equal calls.
struct CallDescriptor {
    std::string function;
    std::vector<Bytes> params;

    bool operator==(const CallDescriptor&) const = default;
    Bytes serialize() const;
    static std::optional<CallDescriptor> parse(ByteView data);
};

// On-chain query token: who it belongs to, the hash of their signed secret,
// and the timestamp of the block that registered it.
struct TokenRecord {
    Address user;
    Digest32 secret_hash;
    int64_t created_at{0};

    bool operator==(const TokenRecord&) const = default;
};

struct EventLogEntry {
    std::string event_name;  // always "TokenCreated"
    Address user;
    Digest32 secret_hash;
    int64_t block_timestamp{0};
    uint64_t block_index{0};
    uint64_t log_index{0};

    bool operator==(const EventLogEntry&) const = default;
};

enum class RevertReason {
    NotOwner,
    ZeroAddress,
    UnknownFunction,
    BadArguments,
};

const char* to_string(RevertReason r);

struct ContractRevert : std::runtime_error {
    RevertReason reason;
    explicit ContractRevert(RevertReason r)
        : std::runtime_error(std::string("revert: ") + to_string(r)), reason(r) {}
};

struct ContractConfig {
    Address owner;
    bool open_create{false};  // when true, any caller may create tokens
};

// Where in the chain a call is executing.
struct BlockContext {
    uint64_t block_index{0};
    int64_t timestamp{0};
};

struct ExecResult {
    uint32_t slots_written{0};
    uint32_t events_emitted{0};
};

struct ContractState {
    Address owner;
    std::map<Address, TokenRecord> token_by_user;
    std::vector<TokenRecord> token_history;

    bool operator==(const ContractState&) const = default;
};

// The token registry as a deterministic state machine. All mutation happens
// through apply(), which the ledger invokes during block application; reads
// are plain const lookups against the latest applied state.
class SmartCoAuthContract {
public:
    explicit SmartCoAuthContract(ContractConfig cfg);

    // Executes one call. Throws ContractRevert; a revert leaves state and the
    // event log untouched (all checks run before the first write).
    ExecResult apply(const Address& caller, const CallDescriptor& call, const BlockContext& ctx);

    std::optional<TokenRecord> get_user_query_token(const Address& user) const;
    std::vector<EventLogEntry> read_events(uint64_t from_log_index,
                                           const std::optional<Address>& filter = {}) const;

    const ContractState& state() const { return state_; }
    size_t event_count() const { return events_.size(); }

    // Canonical byte encoding of state plus event log, for replay-equivalence
    // checks. Equal bytes iff equal observable contract history.
    Bytes canonical_state() const;

private:
    ExecResult create_query_token(const Address& caller, const Address& user,
                                  const Digest32& secret_hash, const BlockContext& ctx);

    ContractConfig cfg_;
    ContractState state_;
    std::vector<EventLogEntry> events_;
};

// Builds the createQueryToken call the gateway submits on a user's behalf.
CallDescriptor make_create_call(const Address& user, const Digest32& secret_hash);

}  // namespace scauth
