#include "scauth/ledger.hpp"

#include <chrono>
#include <fstream>
#include <thread>

namespace scauth {

namespace {

int64_t wall_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

Bytes Transaction::canonical() const {
    Bytes out;
    out.insert(out.end(), from.bytes.begin(), from.bytes.end());
    put_u64(out, nonce_seq);
    Bytes call_bytes = call.serialize();
    put_u32(out, static_cast<uint32_t>(call_bytes.size()));
    out.insert(out.end(), call_bytes.begin(), call_bytes.end());
    return out;
}

std::optional<Transaction> Transaction::parse(ByteView data) {
    ByteReader rd{data};
    Transaction tx;
    if (!rd.get_bytes(tx.from.bytes.data(), 20)) return std::nullopt;
    if (!rd.get_u64(tx.nonce_seq)) return std::nullopt;
    uint32_t call_len = 0;
    Bytes call_bytes;
    if (!rd.get_u32(call_len) || !rd.get_vec(call_bytes, call_len)) return std::nullopt;
    if (!rd.done()) return std::nullopt;
    auto call = CallDescriptor::parse(call_bytes);
    if (!call) return std::nullopt;
    tx.call = std::move(*call);
    return tx;
}

Bytes Block::content_bytes() const {
    Bytes out;
    put_u64(out, index);
    out.insert(out.end(), prev_hash.bytes.begin(), prev_hash.bytes.end());
    put_i64(out, timestamp);
    put_u64(out, nonce);
    put_u32(out, static_cast<uint32_t>(tx_list.size()));
    for (const Transaction& tx : tx_list) {
        Bytes txb = tx.canonical();
        put_u32(out, static_cast<uint32_t>(txb.size()));
        out.insert(out.end(), txb.begin(), txb.end());
    }
    return out;
}

Digest32 Block::compute_hash() const {
    Bytes content = content_bytes();
    return hash_bytes(ByteView{content.data(), content.size()});
}

Bytes Block::wire() const {
    Bytes out = content_bytes();
    out.insert(out.end(), block_hash.bytes.begin(), block_hash.bytes.end());
    return out;
}

std::optional<Block> Block::parse_wire(ByteView data) {
    ByteReader rd{data};
    Block b;
    if (!rd.get_u64(b.index)) return std::nullopt;
    if (!rd.get_bytes(b.prev_hash.bytes.data(), 32)) return std::nullopt;
    if (!rd.get_i64(b.timestamp)) return std::nullopt;
    if (!rd.get_u64(b.nonce)) return std::nullopt;
    uint32_t ntx = 0;
    if (!rd.get_u32(ntx)) return std::nullopt;
    for (uint32_t i = 0; i < ntx; ++i) {
        uint32_t len = 0;
        Bytes txb;
        if (!rd.get_u32(len) || !rd.get_vec(txb, len)) return std::nullopt;
        auto tx = Transaction::parse(txb);
        if (!tx) return std::nullopt;
        b.tx_list.push_back(std::move(*tx));
    }
    if (!rd.get_bytes(b.block_hash.bytes.data(), 32)) return std::nullopt;
    if (!rd.done()) return std::nullopt;
    return b;
}

Block genesis() {
    Block g;
    g.block_hash = g.compute_hash();
    return g;
}

bool meets_target(const Digest32& h, uint32_t difficulty_bits) {
    // Hash <= 2^(256-k) - 1 is the same as: top k bits are zero.
    uint32_t full = difficulty_bits / 8;
    uint32_t rem = difficulty_bits % 8;
    for (uint32_t i = 0; i < full; ++i)
        if (h.bytes[i] != 0) return false;
    if (rem != 0 && (h.bytes[full] >> (8 - rem)) != 0) return false;
    return true;
}

Block mine_block(const Chain& chain, std::vector<Transaction> pending, int64_t now) {
    const Block& tip = chain.blocks.back();
    Block b;
    b.index = tip.index + 1;
    b.prev_hash = tip.block_hash;
    b.timestamp = std::max(now, tip.timestamp);
    b.tx_list = std::move(pending);
    for (b.nonce = 0;; ++b.nonce) {
        Digest32 h = b.compute_hash();
        if (meets_target(h, chain.config.difficulty_bits)) {
            b.block_hash = h;
            return b;
        }
    }
}

bool validate_chain(const Chain& chain) {
    if (chain.blocks.empty()) return false;
    if (!(chain.blocks[0] == genesis())) return false;
    for (size_t i = 1; i < chain.blocks.size(); ++i) {
        const Block& b = chain.blocks[i];
        const Block& parent = chain.blocks[i - 1];
        if (b.index != i) return false;
        if (b.prev_hash != parent.block_hash) return false;
        if (b.timestamp < parent.timestamp) return false;
        if (b.compute_hash() != b.block_hash) return false;
        if (!meets_target(b.block_hash, chain.config.difficulty_bits)) return false;
    }
    return true;
}

std::vector<BlockCheck> audit_chain(const Chain& chain) {
    std::vector<BlockCheck> checks(chain.blocks.size());
    for (size_t i = 0; i < chain.blocks.size(); ++i) {
        const Block& b = chain.blocks[i];
        BlockCheck& c = checks[i];
        // A block's recomputed hash is only trustworthy when its parent's
        // was: tampering with block i invalidates every later block.
        bool self_ok = b.compute_hash() == b.block_hash;
        if (i == 0) {
            c.hash_ok = self_ok;
        } else {
            const Block& parent = chain.blocks[i - 1];
            c.link_ok = b.prev_hash == parent.block_hash;
            c.index_ok = b.index == i;
            c.timestamp_ok = b.timestamp >= parent.timestamp;
            c.target_ok = meets_target(b.block_hash, chain.config.difficulty_bits);
            c.hash_ok = self_ok && checks[i - 1].hash_ok;
        }
    }
    return checks;
}

AppliedTx apply_transaction(SmartCoAuthContract& contract, Transaction& tx,
                            const BlockContext& ctx, const ChainConfig& cfg) {
    AppliedTx out;
    uint64_t events_before = contract.event_count();
    try {
        ExecResult res = contract.apply(tx.from, tx.call, ctx);
        out.gas_used = cfg.gas_base + cfg.gas_per_write * res.slots_written;
        out.status = TxStatus::Success;
        out.events = contract.read_events(events_before);
    } catch (const ContractRevert& rv) {
        out.gas_used = cfg.gas_base;
        out.status = TxStatus::Failed;
        out.revert_reason = rv.reason;
    }
    tx.gas_used = out.gas_used;
    tx.status = out.status;
    return out;
}

Ledger::Ledger(ChainConfig cfg, ContractConfig contract_cfg, Clock clock)
    : cfg_(cfg),
      contract_cfg_(contract_cfg),
      clock_(clock ? std::move(clock) : Clock(wall_seconds)),
      contract_(contract_cfg) {
    chain_.config = cfg_;
    chain_.blocks.push_back(genesis());
}

void Ledger::sleep_injected(int64_t start_ms) const {
    if (cfg_.injected_latency_ms == 0) return;
    int64_t deadline = start_ms + cfg_.injected_latency_ms;
    int64_t now = steady_ms();
    if (now < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(deadline - now));
}

Receipt Ledger::submit_transaction(Transaction tx) {
    int64_t start = steady_ms();
    Receipt receipt;
    {
        std::lock_guard<std::mutex> lock(mu_);
        uint64_t expected = 0;
        if (auto it = next_nonce_.find(tx.from); it != next_nonce_.end()) expected = it->second;
        if (tx.nonce_seq != expected) throw BadNonce(expected, tx.nonce_seq);

        Block b = mine_block(chain_, {std::move(tx)}, clock_());
        BlockContext ctx{b.index, b.timestamp};
        AppliedTx applied = apply_transaction(contract_, b.tx_list[0], ctx, cfg_);
        next_nonce_[b.tx_list[0].from] = expected + 1;

        receipt.block_index = b.index;
        receipt.tx_index = 0;
        receipt.gas_used = applied.gas_used;
        receipt.status = applied.status;
        receipt.revert_reason = applied.revert_reason;
        receipt.events = std::move(applied.events);
        chain_.blocks.push_back(std::move(b));
    }
    sleep_injected(start);
    return receipt;
}

Receipt Ledger::submit_call(const Address& from, CallDescriptor call) {
    int64_t start = steady_ms();
    Receipt receipt;
    {
        std::lock_guard<std::mutex> lock(mu_);
        uint64_t expected = 0;
        if (auto it = next_nonce_.find(from); it != next_nonce_.end()) expected = it->second;

        Transaction tx{from, std::move(call), expected};
        Block b = mine_block(chain_, {std::move(tx)}, clock_());
        BlockContext ctx{b.index, b.timestamp};
        AppliedTx applied = apply_transaction(contract_, b.tx_list[0], ctx, cfg_);
        next_nonce_[from] = expected + 1;

        receipt.block_index = b.index;
        receipt.tx_index = 0;
        receipt.gas_used = applied.gas_used;
        receipt.status = applied.status;
        receipt.revert_reason = applied.revert_reason;
        receipt.events = std::move(applied.events);
        chain_.blocks.push_back(std::move(b));
    }
    sleep_injected(start);
    return receipt;
}

uint64_t Ledger::expected_nonce(const Address& from) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = next_nonce_.find(from);
    return it == next_nonce_.end() ? 0 : it->second;
}

std::optional<TokenRecord> Ledger::get_user_query_token(const Address& user) const {
    int64_t start = steady_ms();
    std::optional<TokenRecord> rec;
    {
        std::lock_guard<std::mutex> lock(mu_);
        rec = contract_.get_user_query_token(user);
    }
    sleep_injected(start);
    return rec;
}

std::vector<EventLogEntry> Ledger::read_events(uint64_t from_log_index,
                                               const std::optional<Address>& filter) const {
    int64_t start = steady_ms();
    std::vector<EventLogEntry> events;
    {
        std::lock_guard<std::mutex> lock(mu_);
        events = contract_.read_events(from_log_index, filter);
    }
    sleep_injected(start);
    return events;
}

Chain Ledger::snapshot_chain() const {
    std::lock_guard<std::mutex> lock(mu_);
    return chain_;
}

Bytes Ledger::contract_state_snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return contract_.canonical_state();
}

size_t Ledger::height() const {
    std::lock_guard<std::mutex> lock(mu_);
    return chain_.blocks.size();
}

size_t Ledger::event_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return contract_.event_count();
}

void Ledger::save_chain(const std::string& path) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open chain file for writing: " + path);
    for (const Block& b : chain_.blocks) out << to_hex(b.wire()) << "\n";
    out.flush();
    if (!out) throw std::runtime_error("short write to chain file: " + path);
}

void Ledger::load_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ChainLoadError("cannot open chain file: " + path);

    Chain loaded;
    loaded.config = cfg_;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto raw = from_hex(line);
        if (!raw) throw ChainLoadError("bad hex at line " + std::to_string(line_no));
        auto block = Block::parse_wire(*raw);
        if (!block) throw ChainLoadError("unparseable block at line " + std::to_string(line_no));
        loaded.blocks.push_back(std::move(*block));
    }
    if (!validate_chain(loaded)) throw ChainLoadError("chain failed validation: " + path);

    // Replay every transaction from genesis; state and gas are recomputed,
    // never trusted from disk.
    SmartCoAuthContract contract(contract_cfg_);
    std::map<Address, uint64_t> nonces;
    for (size_t i = 1; i < loaded.blocks.size(); ++i) {
        Block& b = loaded.blocks[i];
        for (Transaction& tx : b.tx_list) {
            uint64_t& expected = nonces[tx.from];
            if (tx.nonce_seq != expected)
                throw ChainLoadError("nonce gap for " + tx.from.hex() + " in block " +
                                     std::to_string(i));
            BlockContext ctx{b.index, b.timestamp};
            apply_transaction(contract, tx, ctx, cfg_);
            ++expected;
        }
    }

    std::lock_guard<std::mutex> lock(mu_);
    chain_ = std::move(loaded);
    contract_ = std::move(contract);
    next_nonce_ = std::move(nonces);
}

}  // namespace scauth
