#pragma once

namespace scauth {

enum class AccessDecision { FullView, RestrictedView, AnonymizedOrDenied };
const char* to_string(AccessDecision d);

enum class ValidityReason { OK, NoSession, NoOnChainToken, SignatureMismatch, HashMismatch, Expired };
const char* to_string(ValidityReason r);

struct TokenValidity {
    bool valid{false};
    ValidityReason reason{ValidityReason::NoSession};

    bool operator==(const TokenValidity&) const = default;
};

}  // namespace scauth
