#include "scauth/middleware.hpp"

#include <regex>

namespace scauth {

const char* to_string(AccessDecision d) {
    switch (d) {
        case AccessDecision::FullView: return "FullView";
        case AccessDecision::RestrictedView: return "RestrictedView";
        case AccessDecision::AnonymizedOrDenied: return "AnonymizedOrDenied";
    }
    return "?";
}

const char* to_string(ValidityReason r) {
    switch (r) {
        case ValidityReason::OK: return "OK";
        case ValidityReason::NoSession: return "NoSession";
        case ValidityReason::NoOnChainToken: return "NoOnChainToken";
        case ValidityReason::SignatureMismatch: return "SignatureMismatch";
        case ValidityReason::HashMismatch: return "HashMismatch";
        case ValidityReason::Expired: return "Expired";
    }
    return "?";
}

AccessDecision evaluate_ruleset(bool logged_in, bool token_valid, bool authorized) {
    if (!logged_in) return AccessDecision::AnonymizedOrDenied;            // RS5
    if (token_valid && authorized) return AccessDecision::FullView;      // RS1
    return AccessDecision::RestrictedView;                                // RS2-RS4
}

static bool pattern_allows(const std::string& pattern, const std::string& message) {
    try {
        return std::regex_match(message, std::regex(pattern));
    } catch (const std::regex_error&) {
        // An unusable pattern must never widen access.
        return false;
    }
}

TokenValidity validate_token(const SessionContext& session, const QueryToken& token, int64_t now,
                             int64_t ttl, const TokenLookup& lookup) {
    if (!session.logged_in || !session.registered_address)
        return {false, ValidityReason::NoSession};

    std::optional<TokenRecord> rec = lookup(*session.registered_address);
    if (!rec) return {false, ValidityReason::NoOnChainToken};

    if (session.secret_pattern && !pattern_allows(*session.secret_pattern, token.secret_message))
        return {false, ValidityReason::HashMismatch};

    if (!token.signature ||
        !verify_signature(as_bytes(token.secret_message), *token.signature,
                          *session.registered_address))
        return {false, ValidityReason::SignatureMismatch};

    auto sig_bytes = token.signature->serialize();
    if (hash_bytes(ByteView{sig_bytes.data(), sig_bytes.size()}) != rec->secret_hash)
        return {false, ValidityReason::HashMismatch};

    if (now - rec->created_at > ttl) return {false, ValidityReason::Expired};

    return {true, ValidityReason::OK};
}

Authorizer::Authorizer(TokenLookup lookup, Config cfg) : lookup_(std::move(lookup)), cfg_(cfg) {}

TokenValidity Authorizer::validate(const SessionContext& session, const QueryToken& token,
                                   int64_t now) const {
    return validate_token(session, token, now, cfg_.token_ttl, lookup_);
}

std::pair<AccessDecision, TokenValidity> Authorizer::authorize_query(
    const SessionContext& session, const QueryToken& token, int64_t now) {
    TokenValidity validity = validate(session, token, now);
    AccessDecision decision = evaluate_ruleset(session.logged_in, validity.valid, session.authorized);
    record(session, decision, validity.reason, now);
    return {decision, validity};
}

std::pair<AccessDecision, TokenValidity> Authorizer::authorize_direct(
    const SessionContext& session, int64_t now) {
    TokenValidity validity{true, ValidityReason::OK};
    AccessDecision decision = evaluate_ruleset(session.logged_in, true, session.authorized);
    record(session, decision, validity.reason, now);
    return {decision, validity};
}

std::vector<AuditLine> Authorizer::audit_log() const {
    std::lock_guard<std::mutex> lock(mu_);
    return audit_;
}

size_t Authorizer::audit_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return audit_.size();
}

void Authorizer::record(const SessionContext& session, AccessDecision d, ValidityReason r,
                        int64_t now) {
    std::lock_guard<std::mutex> lock(mu_);
    audit_.push_back(AuditLine{session.user_id, d, r, now});
}

}  // namespace scauth
