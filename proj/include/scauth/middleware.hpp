#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scauth/access.hpp"
#include "scauth/contract.hpp"
#include "scauth/crypto.hpp"

namespace scauth {

struct SessionContext {
    std::string user_id;
    bool logged_in{false};
    std::optional<Address> registered_address;
    bool authorized{false};
    // Optional constraint on the secret message (ECMAScript regex, full
    // match). Unset means no constraint.
    std::optional<std::string> secret_pattern;
};

struct QueryToken {
    std::string secret_message;
    std::optional<Signature> signature;
};

// RS1: (T,T,T) full. RS2-RS4: logged in, anything else false -> restricted.
// RS5: not logged in -> anonymized or denied, other inputs ignored.
AccessDecision evaluate_ruleset(bool logged_in, bool token_valid, bool authorized);

using TokenLookup = std::function<std::optional<TokenRecord>(const Address&)>;

// Checks run in a fixed order and the reason names the first failure:
// session, on-chain token (then the optional secret pattern), signature
// against the registered address, hash of the signature against the on-chain
// hash, then expiry. The expiry boundary is inclusive: age == ttl is valid.
TokenValidity validate_token(const SessionContext& session, const QueryToken& token, int64_t now,
                             int64_t ttl, const TokenLookup& lookup);

struct AuditLine {
    std::string user_id;
    AccessDecision decision{AccessDecision::AnonymizedOrDenied};
    ValidityReason reason{ValidityReason::NoSession};
    int64_t timestamp{0};
};

// Decision core wired to a token source. Every record-returning request in
// the gateway goes through authorize_query (or authorize_direct when the
// verification-skipping debug mode is enabled); each call appends exactly
// one audit line.
class Authorizer {
public:
    struct Config {
        int64_t token_ttl{3600};
    };

    Authorizer(TokenLookup lookup, Config cfg);

    TokenValidity validate(const SessionContext& session, const QueryToken& token,
                           int64_t now) const;

    std::pair<AccessDecision, TokenValidity> authorize_query(const SessionContext& session,
                                                             const QueryToken& token, int64_t now);

    // Debug baseline: trusts the token without touching the chain.
    std::pair<AccessDecision, TokenValidity> authorize_direct(const SessionContext& session,
                                                              int64_t now);

    std::vector<AuditLine> audit_log() const;
    size_t audit_count() const;

private:
    void record(const SessionContext& session, AccessDecision d, ValidityReason r, int64_t now);

    TokenLookup lookup_;
    Config cfg_;
    mutable std::mutex mu_;
    std::vector<AuditLine> audit_;
};

}  // namespace scauth
