#include "scauth/contract.hpp"

#include <cstring>

namespace scauth {

const char* to_string(RevertReason r) {
    switch (r) {
        case RevertReason::NotOwner: return "NotOwner";
        case RevertReason::ZeroAddress: return "ZeroAddress";
        case RevertReason::UnknownFunction: return "UnknownFunction";
        case RevertReason::BadArguments: return "BadArguments";
    }
    return "?";
}

Bytes CallDescriptor::serialize() const {
    Bytes out;
    put_u32(out, static_cast<uint32_t>(function.size()));
    out.insert(out.end(), function.begin(), function.end());
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const Bytes& p : params) {
        put_u32(out, static_cast<uint32_t>(p.size()));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::optional<CallDescriptor> CallDescriptor::parse(ByteView data) {
    ByteReader rd{data};
    uint32_t fn_len = 0;
    if (!rd.get_u32(fn_len) || rd.remaining() < fn_len) return std::nullopt;
    CallDescriptor call;
    call.function.assign(reinterpret_cast<const char*>(data.data() + rd.pos), fn_len);
    rd.pos += fn_len;
    uint32_t nparams = 0;
    if (!rd.get_u32(nparams)) return std::nullopt;
    for (uint32_t i = 0; i < nparams; ++i) {
        uint32_t len = 0;
        Bytes p;
        if (!rd.get_u32(len) || !rd.get_vec(p, len)) return std::nullopt;
        call.params.push_back(std::move(p));
    }
    if (!rd.done()) return std::nullopt;
    return call;
}

SmartCoAuthContract::SmartCoAuthContract(ContractConfig cfg) : cfg_(cfg) {
    state_.owner = cfg.owner;
}

ExecResult SmartCoAuthContract::apply(const Address& caller, const CallDescriptor& call,
                                      const BlockContext& ctx) {
    if (call.function == "createQueryToken") {
        if (call.params.size() != 2 || call.params[0].size() != 20 || call.params[1].size() != 32)
            throw ContractRevert(RevertReason::BadArguments);
        Address user;
        std::memcpy(user.bytes.data(), call.params[0].data(), 20);
        Digest32 secret_hash;
        std::memcpy(secret_hash.bytes.data(), call.params[1].data(), 32);
        return create_query_token(caller, user, secret_hash, ctx);
    }
    throw ContractRevert(RevertReason::UnknownFunction);
}

ExecResult SmartCoAuthContract::create_query_token(const Address& caller, const Address& user,
                                                   const Digest32& secret_hash,
                                                   const BlockContext& ctx) {
    // All checks precede the first write, so a revert cannot leave partial state.
    if (!cfg_.open_create && caller != state_.owner) throw ContractRevert(RevertReason::NotOwner);
    if (user.is_zero()) throw ContractRevert(RevertReason::ZeroAddress);

    TokenRecord rec{user, secret_hash, ctx.timestamp};
    state_.token_by_user[user] = rec;     // mapping slot
    state_.token_history.push_back(rec);  // array slot

    EventLogEntry ev;
    ev.event_name = "TokenCreated";
    ev.user = user;
    ev.secret_hash = secret_hash;
    ev.block_timestamp = ctx.timestamp;
    ev.block_index = ctx.block_index;
    ev.log_index = events_.size();
    events_.push_back(ev);

    return ExecResult{2, 1};
}

std::optional<TokenRecord> SmartCoAuthContract::get_user_query_token(const Address& user) const {
    auto it = state_.token_by_user.find(user);
    if (it == state_.token_by_user.end()) return std::nullopt;
    return it->second;
}

std::vector<EventLogEntry> SmartCoAuthContract::read_events(
    uint64_t from_log_index, const std::optional<Address>& filter) const {
    std::vector<EventLogEntry> out;
    for (const EventLogEntry& e : events_) {
        if (e.log_index < from_log_index) continue;
        if (filter && e.user != *filter) continue;
        out.push_back(e);
    }
    return out;
}

Bytes SmartCoAuthContract::canonical_state() const {
    Bytes out;
    out.insert(out.end(), state_.owner.bytes.begin(), state_.owner.bytes.end());

    auto put_record = [&out](const TokenRecord& r) {
        out.insert(out.end(), r.user.bytes.begin(), r.user.bytes.end());
        out.insert(out.end(), r.secret_hash.bytes.begin(), r.secret_hash.bytes.end());
        put_i64(out, r.created_at);
    };

    put_u32(out, static_cast<uint32_t>(state_.token_by_user.size()));
    for (const auto& [addr, rec] : state_.token_by_user) put_record(rec);

    put_u32(out, static_cast<uint32_t>(state_.token_history.size()));
    for (const TokenRecord& rec : state_.token_history) put_record(rec);

    put_u32(out, static_cast<uint32_t>(events_.size()));
    for (const EventLogEntry& e : events_) {
        put_u32(out, static_cast<uint32_t>(e.event_name.size()));
        out.insert(out.end(), e.event_name.begin(), e.event_name.end());
        out.insert(out.end(), e.user.bytes.begin(), e.user.bytes.end());
        out.insert(out.end(), e.secret_hash.bytes.begin(), e.secret_hash.bytes.end());
        put_i64(out, e.block_timestamp);
        put_u64(out, e.block_index);
        put_u64(out, e.log_index);
    }
    return out;
}

CallDescriptor make_create_call(const Address& user, const Digest32& secret_hash) {
    CallDescriptor call;
    call.function = "createQueryToken";
    call.params.emplace_back(user.bytes.begin(), user.bytes.end());
    call.params.emplace_back(secret_hash.bytes.begin(), secret_hash.bytes.end());
    return call;
}

}  // namespace scauth
