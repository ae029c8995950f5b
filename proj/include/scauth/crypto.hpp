#pragma once

#include <array>
#include <compare>
#include <optional>
#include <stdexcept>

#include "scauth/bytes.hpp"

namespace scauth {

struct CryptoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidSeed : CryptoError {
    InvalidSeed() : CryptoError("InvalidSeed: seed must be a nonzero scalar below the group order") {}
};
struct InvalidPoint : CryptoError {
    InvalidPoint() : CryptoError("InvalidPoint: not a valid secp256k1 point encoding") {}
};
struct InvalidKey : CryptoError {
    InvalidKey() : CryptoError("InvalidKey: private key must be a nonzero scalar below the group order") {}
};

struct Digest32 {
    std::array<uint8_t, 32> bytes{};

    auto operator<=>(const Digest32&) const = default;
    std::string hex() const;
    static std::optional<Digest32> from_hex(std::string_view h);
    ByteView view() const { return {bytes.data(), bytes.size()}; }
};

// 20-byte identifier; canonical text form "0x" + 40 lowercase hex digits.
struct Address {
    std::array<uint8_t, 20> bytes{};

    auto operator<=>(const Address&) const = default;
    bool is_zero() const;
    std::string hex() const;
    static std::optional<Address> from_hex(std::string_view h);
    ByteView view() const { return {bytes.data(), bytes.size()}; }
};

// Canonical low-s ECDSA signature, serialized as r || s || recovery_id (65 bytes).
struct Signature {
    std::array<uint8_t, 32> r{};
    std::array<uint8_t, 32> s{};
    uint8_t recovery_id{0};

    bool operator==(const Signature&) const = default;
    std::array<uint8_t, 65> serialize() const;
    std::string hex() const;
    static std::optional<Signature> parse(ByteView bytes65);
    static std::optional<Signature> from_hex(std::string_view h);
};

struct KeyPair {
    std::array<uint8_t, 32> private_key{};
    std::array<uint8_t, 65> public_key{};  // uncompressed: 0x04 || X || Y

    bool operator==(const KeyPair&) const = default;
    ByteView public_view() const { return {public_key.data(), public_key.size()}; }
};

// Every signed message is hashed under a fixed domain-separation prefix.
inline constexpr std::string_view kDomainTag = "SmartCoAuth-v1:";

Digest32 hash_bytes(ByteView data);
Digest32 hash_bytes(std::string_view data);

// sha256(kDomainTag || message): the digest sign_message actually signs.
Digest32 message_digest(ByteView message);

KeyPair generate_keypair();                     // cryptographically random
KeyPair generate_keypair(ByteView seed32);      // deterministic; throws InvalidSeed

Address derive_address(ByteView public_key65);  // throws InvalidPoint

Signature sign_message(ByteView private_key32, ByteView message);  // throws InvalidKey
Signature sign_digest(ByteView private_key32, const Digest32& z);  // throws InvalidKey

// Total: any malformed input yields false, never an exception.
bool verify_signature(ByteView message, const Signature& sig, const Address& address) noexcept;

// Recover the signer's uncompressed public key, or nullopt if the signature
// does not describe a valid curve point for this digest.
std::optional<std::array<uint8_t, 65>> recover_public_key(const Digest32& z, const Signature& sig) noexcept;

}  // namespace scauth
